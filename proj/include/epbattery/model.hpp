#pragma once

// =============================================================================
// Charger-battery model parameters and adiabatic elimination of the
// auxiliary (reservoir) mode.
// =============================================================================

#include <complex>

namespace epbattery {

using Complex = std::complex<double>;

// =============================================================================
// Three-mode parameter set
// =============================================================================

/// Raw rates of the charger (a), battery (b) and auxiliary mode (c), all in
/// the frame rotating at the drive frequency (hbar = 1). The shared-reservoir
/// rates and cross couplings are derived on demand.
struct PhysicalParams {
    double delta_a = 0.0;
    double delta_b = 0.0;
    double delta_c = 0.0;

    double kappa_a = 0.0;
    double kappa_b = 0.0;
    double kappa_c = 0.0;

    double Gamma = 0.0;  // shared-reservoir rate

    Complex p_a{1.0, 0.0};
    Complex p_b{1.0, 0.0};
    Complex p_c_a{1.0, 0.0};
    Complex p_c_b{1.0, 0.0};

    double drive_eps = 0.0;

    [[nodiscard]] double shared_rate_a() const { return Gamma * std::norm(p_a); }
    [[nodiscard]] double shared_rate_b() const { return Gamma * std::norm(p_b); }
    [[nodiscard]] double aux_rate_a() const { return Gamma * std::norm(p_c_a); }
    [[nodiscard]] double aux_rate_b() const { return Gamma * std::norm(p_c_b); }

    /// mu_cj = p_c^j * conj(p_j)
    [[nodiscard]] Complex mu_a() const { return p_c_a * std::conj(p_a); }
    [[nodiscard]] Complex mu_b() const { return p_c_b * std::conj(p_b); }

    /// Total relaxation rate of the auxiliary mode, kappa_c + Gamma_c^a + Gamma_c^b.
    [[nodiscard]] double aux_total_rate() const { return kappa_c + aux_rate_a() + aux_rate_b(); }

    /// Throws InvalidParameter on negative rates or non-finite entries.
    void validate() const;

    friend bool operator==(const PhysicalParams&, const PhysicalParams&) = default;
};

// =============================================================================
// Reduced two-mode parameter set (dimensionless, units of gamma_eff)
// =============================================================================

struct ReducedParams {
    double gamma_a = 0.0;
    double gamma_b = 0.0;
    double delta_r = 0.0;
    double eps_r = 1.0;
    double gamma_eff = 1.0;  // rate used to rescale time, t -> gamma_eff * t

    /// Damping asymmetry (gamma_a - gamma_b) / 2.
    [[nodiscard]] double alpha() const { return 0.5 * (gamma_a - gamma_b); }

    /// Common damping rate; meaningful when gamma_a == gamma_b.
    [[nodiscard]] double gamma() const { return gamma_a; }

    [[nodiscard]] static ReducedParams symmetric(double gamma, double delta_r, double eps_r = 1.0) {
        return ReducedParams{gamma, gamma, delta_r, eps_r, 1.0};
    }

    /// Parameterisation used by the phase diagrams: battery damping plus asymmetry.
    [[nodiscard]] static ReducedParams from_asymmetry(double gamma_b, double alpha, double delta_r,
                                                      double eps_r = 1.0) {
        return ReducedParams{gamma_b + 2.0 * alpha, gamma_b, delta_r, eps_r, 1.0};
    }

    /// Throws InvalidParameter for negative damping, eps_r < 0, gamma_eff <= 0
    /// or non-finite entries.
    void validate() const;

    friend bool operator==(const ReducedParams&, const ReducedParams&) = default;
};

// =============================================================================
// Adiabatic elimination
// =============================================================================

struct ReductionDiagnostics {
    double gamma_eff_bare = 0.0;   // Gamma^2 / (kappa_c + Gamma_c^a + Gamma_c^b)
    double mu_scale = 1.0;         // |mu_ca| |mu_cb|, absorbed into gamma_eff
    double battery_phase = 0.0;    // b_reduced = exp(-i * phase) * b_full
    double separation_ratio = 0.0;
};

struct Reduction {
    ReducedParams params;
    ReductionDiagnostics diagnostics;
};

/// Eliminates the auxiliary mode. The cross-coupling magnitude |mu_ca||mu_cb|
/// is folded into the returned gamma_eff so the reduced off-diagonal coupling
/// is exactly 1; with |mu| = 1 this is Gamma^2/(kappa_c + Gamma_c^a + Gamma_c^b).
///
/// Rejects: ZeroCoupling (p_a or p_b zero, or a zero auxiliary coupling),
/// AsymmetricDetuning (delta_a != -delta_b beyond 1e-12 relative),
/// NonzeroAuxDetuning (delta_c != 0), NegativeDamping (some gamma_j < 0),
/// InvalidParameter (negative rates, no auxiliary relaxation).
[[nodiscard]] Reduction reduce_with_diagnostics(const PhysicalParams& p);

[[nodiscard]] ReducedParams reduce(const PhysicalParams& p);

/// (kappa_c + Gamma_c^a + Gamma_c^b) / max(kappa_a + Gamma_a, kappa_b + Gamma_b, |delta_a|, |delta_b|).
/// Returns +infinity when the denominator vanishes.
[[nodiscard]] double separation_ratio(const PhysicalParams& p);

/// Builds a three-mode parameter set whose reduction is `target` and whose
/// separation ratio is `ratio`. Uses real couplings with |mu| = 1 and
/// kappa_a = kappa_b = 0. Complete positivity of the shared dissipators
/// requires gamma_a * gamma_b >= 1; smaller products throw InvalidParameter.
[[nodiscard]] PhysicalParams realize_reduced(const ReducedParams& target, double ratio);

}  // namespace epbattery
