#pragma once

// =============================================================================
// Closed-form propagator e^{-i H_r tau} and battery energy in every regime.
// All times are rescaled, t -> gamma_eff * t.
// =============================================================================

#include "epbattery/model.hpp"
#include "epbattery/spectral.hpp"

#include <span>
#include <vector>

namespace epbattery {

/// |Omega| below which the Jordan (defective) form replaces Sylvester's formula.
inline constexpr double kEpSwitch = 1e-7;
/// |Omega tau| below which the divided difference is summed as a series.
inline constexpr double kSeriesTol = 1e-4;
/// |Pi_lambda| at or below which the inhomogeneous integral is done by quadrature.
inline constexpr double kSingularProductTol = 1e-6;

struct Propagator2 {
    Complex m11, m12, m21, m22;

    [[nodiscard]] Complex determinant() const { return m11 * m22 - m12 * m21; }
    [[nodiscard]] Vec2 apply(const Vec2& v) const { return {m11 * v[0] + m12 * v[1], m21 * v[0] + m22 * v[1]}; }

    friend Propagator2 operator*(const Propagator2& x, const Propagator2& y) {
        return {x.m11 * y.m11 + x.m12 * y.m21, x.m11 * y.m12 + x.m12 * y.m22,
                x.m21 * y.m11 + x.m22 * y.m21, x.m21 * y.m12 + x.m22 * y.m22};
    }
};

/// Matrix exponential of -i H_r tau. Sylvester form for distinct eigenvalues,
/// Jordan form e^{-i lambda_0 tau}(I - i(H_r - lambda_0) tau) when |Omega| < kEpSwitch.
[[nodiscard]] Propagator2 propagator(const ReducedParams& r, double tau);

/// (e^{-i lambda_+ tau} - e^{-i lambda_- tau}) / (2 Omega), with the series
/// branch for |Omega tau| < kSeriesTol.
[[nodiscard]] Complex divided_difference(const Spectrum& s, double tau);

struct ModeAmplitudes {
    Complex a;
    Complex b;
    bool quadrature_fallback = false;  // Pi_lambda ~ 0: particular solution by quadrature
};

/// a(t), b(t) from A(t) = M(t) A(0) + int_0^t M(t - s) (eps_r, 0)^T ds.
[[nodiscard]] ModeAmplitudes amplitudes(const ReducedParams& r, double t, Complex a0 = {}, Complex b0 = {});

/// Right-hand side of the reduced equations of motion.
[[nodiscard]] Vec2 reduced_rhs(const ReducedParams& r, const Vec2& state);

/// Steady-state amplitudes -i H_r^{-1} (eps_r, 0)^T; b_ss = -eps_r / Pi_lambda.
[[nodiscard]] Vec2 steady_state(const ReducedParams& r);

// -----------------------------------------------------------------------------
// Battery energy, zero initial conditions
// -----------------------------------------------------------------------------

/// E_B(t) = eps_r^2 |(l+ e^{-i l- t} - l- e^{-i l+ t} - D) / (Pi D)|^2.
/// Throws DegenerateSpectrum for |Omega| < kEpSwitch; for |Pi| <= kSingularProductTol
/// falls back to the quadrature route of amplitudes().
[[nodiscard]] double energy_general(const ReducedParams& r, double t);

/// Energy at the exceptional point from
/// b(t) = eps_r [ i e^{-i l0 t}/l0 (t - i/l0) - 1/l0^2 ], l0 = -i(gamma_a + gamma_b)/2.
/// Throws NotAtEP unless ep_conditions() holds.
[[nodiscard]] double energy_ep(const ReducedParams& r, double t);

/// Symmetric damping (alpha = 0): trigonometric form for |delta_r| > 1,
/// hyperbolic form for |delta_r| < 1, continuous through |delta_r| = 1.
/// Throws AsymmetricParams when |alpha| >= kBoundaryTol.
[[nodiscard]] double energy_symmetric(const ReducedParams& r, double t);

/// Large-time broken-phase form (eps_r/K)^2 ((gamma + |Omega|)/(2|Omega|))^2 e^{2(|Omega|-gamma)t}.
/// Only meaningful for t >> 1/|Omega|; at t = 0 it returns the prefactor, not 0.
/// Throws AsymmetricParams or NotBroken outside alpha = 0, |Omega| > gamma.
[[nodiscard]] double energy_asymptotic_broken(const ReducedParams& r, double t);

/// P_B = dE_B/dt = 2 Re[conj(b) db/dt], db/dt from the equations of motion.
[[nodiscard]] double power(const ReducedParams& r, double t, Complex a0 = {}, Complex b0 = {});

/// Steady-state scale K = delta_r^2 + gamma^2 - 1 for symmetric damping.
[[nodiscard]] inline double steady_scale(const ReducedParams& r) {
    return r.delta_r * r.delta_r + r.gamma_b * r.gamma_b - 1.0;
}

// -----------------------------------------------------------------------------
// Sampled records
// -----------------------------------------------------------------------------

struct EnergyRecord {
    double t = 0.0;
    Complex a;
    Complex b;
    double energy = 0.0;  // |b|^2
    double power = 0.0;   // dE/dt
    bool quadrature_fallback = false;
};

[[nodiscard]] EnergyRecord evaluate(const ReducedParams& r, double t, Complex a0 = {}, Complex b0 = {});

/// Closed-form samples at the given times; independent per point.
[[nodiscard]] std::vector<EnergyRecord> sample(const ReducedParams& r, std::span<const double> times,
                                               Complex a0 = {}, Complex b0 = {});

}  // namespace epbattery
