#pragma once

// =============================================================================
// Drift matrix, closed-form eigen-system and phase classification
// =============================================================================

#include "epbattery/model.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace epbattery {

/// Boundary band for the sign test on the growth rate.
inline constexpr double kBoundaryTol = 1e-9;
/// |Omega| below which the spectrum counts as coalesced.
inline constexpr double kEpTol = 1e-9;

using Vec2 = std::array<Complex, 2>;

// =============================================================================
// Drift matrix H_r
// =============================================================================

/// 2x2 complex matrix, row-major. The reduced dynamics read
/// d/dt (a, b) = -i H_r (a, b) + (eps_r, 0).
struct DriftMatrix {
    std::array<Complex, 4> entries{};

    [[nodiscard]] Complex operator()(int row, int col) const { return entries[2 * row + col]; }
    [[nodiscard]] Complex trace() const { return entries[0] + entries[3]; }
    [[nodiscard]] Complex determinant() const { return entries[0] * entries[3] - entries[1] * entries[2]; }
    [[nodiscard]] Vec2 apply(const Vec2& v) const {
        return {entries[0] * v[0] + entries[1] * v[1], entries[2] * v[0] + entries[3] * v[1]};
    }
};

[[nodiscard]] DriftMatrix drift_matrix(const ReducedParams& r);

// =============================================================================
// Spectrum
// =============================================================================

struct Spectrum {
    Complex lambda_plus;
    Complex lambda_minus;
    Complex omega;       // lambda_plus = -i(alpha + gamma_b) + omega
    double alpha = 0.0;
    Vec2 eigvec_plus{};  // unnormalised, gauge [-alpha - i(delta_r +/- omega), 1]
    Vec2 eigvec_minus{};
    Complex pi_lambda;     // lambda_plus * lambda_minus
    Complex delta_lambda;  // lambda_plus - lambda_minus = 2 omega
    bool defective = false;

    /// Mean eigenvalue -i(alpha + gamma_b).
    [[nodiscard]] Complex lambda_center() const { return 0.5 * (lambda_plus + lambda_minus); }
};

/// Omega = i sqrt(1 + (alpha + i delta_r)^2) with the principal root, so the
/// + branch always carries the larger Im(lambda).
[[nodiscard]] Spectrum eigensystem(const ReducedParams& r, double ep_tol = kEpTol);

// =============================================================================
// Phase classification
// =============================================================================

enum class Regime { Unbroken, Broken, ExceptionalPoint, Boundary };

[[nodiscard]] std::string_view to_string(Regime regime) noexcept;
[[nodiscard]] std::optional<Regime> regime_from_string(std::string_view name) noexcept;

struct PhaseRegime {
    Regime tag = Regime::Unbroken;
    double growth_rate = 0.0;  // max over both eigenvalues of Re[-i lambda]
};

/// Re[-i lambda] = Im(lambda).
[[nodiscard]] inline double growth_of(Complex lambda) { return lambda.imag(); }

[[nodiscard]] PhaseRegime classify(const Spectrum& s, double tol = kBoundaryTol, double ep_tol = kEpTol);

struct EpDiagnostics {
    bool is_ep = false;
    bool damping_balanced = false;  // |gamma_a - gamma_b| < tol
    bool detuning_matched = false;  // ||delta_r| - 1| < tol
    std::string reason;
};

/// A coalescence needs gamma_a == gamma_b and delta_r = +/-1. The reason text
/// names whichever condition fails.
[[nodiscard]] EpDiagnostics ep_conditions(double gamma_a, double gamma_b, double delta_r,
                                          double tol = kEpTol);

/// Hurwitz test on the characteristic polynomial written in s = -i lambda.
/// The complex quadratic p(s) is multiplied by its coefficient conjugate to
/// give a real quartic with the same root real parts.
[[nodiscard]] bool routh_hurwitz_stable(const ReducedParams& r);

/// Coefficients of the real quartic s^4 + c[0] s^3 + c[1] s^2 + c[2] s + c[3].
[[nodiscard]] std::array<double, 4> hurwitz_quartic(const ReducedParams& r);

// =============================================================================
// Phase boundary in alpha
// =============================================================================

struct AlphaWindow {
    double lo;
    double hi;
};

/// Default search window [-gamma_b/2, 50].
[[nodiscard]] AlphaWindow default_alpha_window(double gamma_b);

/// Growth rate Re[-i lambda_plus] at (gamma_b, alpha, delta_r).
[[nodiscard]] double growth_at(double gamma_b, double alpha, double delta_r);

/// Smallest alpha in the window at which Re[-i lambda_plus] changes sign from
/// broken to unbroken, located by bisection to ~1e-13.
/// Returns nullopt when the window is unbroken throughout; throws NoBracket
/// when it is broken throughout (the crossing lies beyond the window).
[[nodiscard]] std::optional<double> boundary_alpha(double gamma_b, double delta_r);
[[nodiscard]] std::optional<double> boundary_alpha(double gamma_b, double delta_r, AlphaWindow window);

}  // namespace epbattery
