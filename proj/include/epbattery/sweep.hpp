#pragma once

// =============================================================================
// Parameter sweeps: phase diagrams, eigenvalue profiles, dynamics panels and
// critical-time curves.
// =============================================================================

#include "epbattery/model.hpp"
#include "epbattery/propagator.hpp"
#include "epbattery/spectral.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace epbattery {

/// Inclusive uniform grid; points == 1 yields {min}.
struct Range {
    double min = 0.0;
    double max = 0.0;
    std::size_t points = 0;

    /// Throws InvalidParameter for points == 0, min > max or non-finite bounds.
    void validate() const;
    [[nodiscard]] std::vector<double> values() const;
    [[nodiscard]] bool contains(double v) const { return v >= min && v <= max; }

    friend bool operator==(const Range&, const Range&) = default;
};

struct SweepOptions {
    unsigned threads = 1;
};

struct PlanePoint {
    double delta_r = 0.0;
    double alpha = 0.0;

    friend bool operator==(const PlanePoint&, const PlanePoint&) = default;
};

// -----------------------------------------------------------------------------
// Phase diagram over (delta_r, alpha) at fixed gamma_b
// -----------------------------------------------------------------------------

struct PhaseGrid {
    double gamma_b = 0.0;
    std::vector<double> delta_r_axis;
    std::vector<double> alpha_axis;
    std::vector<double> growth;   // Re[-i lambda_+], index(i_delta, j_alpha)
    std::vector<Regime> regime;
    std::vector<PlanePoint> boundary;   // (delta_r, alpha*) per delta_r column that has a crossing
    std::vector<PlanePoint> ep_points;

    [[nodiscard]] std::size_t index(std::size_t i_delta, std::size_t j_alpha) const {
        return i_delta * alpha_axis.size() + j_alpha;
    }
    [[nodiscard]] std::size_t count(Regime tag) const;
};

/// Default axes: 201 x 201 over delta_r in [-3, 3], alpha in [-gamma_b/2, 3].
[[nodiscard]] Range default_delta_range();
[[nodiscard]] Range default_alpha_range(double gamma_b);

/// alpha.min must be >= -gamma_b/2.
[[nodiscard]] PhaseGrid phase_diagram(double gamma_b, const Range& delta_r, const Range& alpha,
                                      const SweepOptions& options = {});

// -----------------------------------------------------------------------------
// Eigenvalues displaced by i gamma_b
// -----------------------------------------------------------------------------

struct EigenProfileRow {
    double delta_r = 0.0;
    Complex lambda_plus;   // lambda_+ + i gamma_b
    Complex lambda_minus;  // lambda_- + i gamma_b
};

[[nodiscard]] std::vector<EigenProfileRow> eigenvalue_profile(double gamma_b, double alpha, const Range& delta_r);

// -----------------------------------------------------------------------------
// Dynamics panels
// -----------------------------------------------------------------------------

struct DynamicsSeries {
    PlanePoint point;
    ReducedParams params;
    PhaseRegime regime;
    std::vector<EnergyRecord> records;  // closed-form samples from t = 0 to t_end
};

/// Closed-form energy and power time series per (delta_r, alpha) point at
/// fixed gamma_b. Points must satisfy alpha >= -gamma_b/2.
[[nodiscard]] std::vector<DynamicsSeries> dynamics_panel(double gamma_b, std::span<const PlanePoint> points,
                                                         double t_end, double dt, double eps_r = 1.0,
                                                         const SweepOptions& options = {});

/// Uniform sample times 0, dt, ..., t_end (last one clamped to t_end).
[[nodiscard]] std::vector<double> time_grid(double t_end, double dt);

/// Least-squares slope of ln E over the last half of the time window,
/// skipping samples with E < 1e-12. NaN when fewer than two samples remain.
[[nodiscard]] double fit_log_slope(std::span<const double> times, std::span<const double> energies);

/// Same fit restricted to t in [t_lo, t_hi].
[[nodiscard]] double fit_log_slope(std::span<const double> times, std::span<const double> energies, double t_lo,
                                   double t_hi);

// -----------------------------------------------------------------------------
// Critical time in the broken phase (alpha = 0, energies in units of eps_r^2)
// -----------------------------------------------------------------------------

struct CritTimeCurve {
    double gamma_b = 0.0;
    double e_max = 0.0;
    std::vector<double> delta_r_axis;
    std::vector<std::optional<double>> t_asymptotic;
    std::vector<std::optional<double>> t_exact;
    std::vector<double> e_scale;   // NaN where stable
    std::vector<bool> stable_mask;
};

/// True where no exponential growth occurs: |delta_r| >= sqrt(1 - gamma^2).
[[nodiscard]] bool tcrit_stable(double gamma, double delta_r);

/// E_scale = (1 / 4K^2) ((gamma + |Omega|)/|Omega|)^2 with |Omega| = sqrt(1 - delta_r^2).
[[nodiscard]] double energy_scale(double gamma, double delta_r);

/// ln(E_max/E_scale) / (2(|Omega| - gamma)), clamped at 0 where E_scale >= E_max.
/// nullopt where stable.
[[nodiscard]] std::optional<double> tcrit_asymptotic(double gamma, double delta_r, double e_max);

/// First time the exact symmetric-damping energy reaches E_max: bracket by
/// doubling from t = 1/|Omega|, then bisection. nullopt where stable; throws
/// NoThreshold if no bracket is found before t = 1e7.
[[nodiscard]] std::optional<double> tcrit_exact(double gamma, double delta_r, double e_max);

/// E_max must be > 0.
[[nodiscard]] CritTimeCurve tcrit_curve(double gamma_b, double e_max, const Range& delta_r,
                                        const SweepOptions& options = {});

}  // namespace epbattery
