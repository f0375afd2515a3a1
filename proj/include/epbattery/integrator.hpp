#pragma once

// =============================================================================
// Fixed-step RK4 integration of the first-moment equations. Independent of
// the closed forms in propagator.hpp and used as their oracle.
// =============================================================================

#include "epbattery/model.hpp"
#include "epbattery/spectral.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace epbattery {

struct IntegratorSettings {
    double dt = 1e-2;            // output spacing and initial internal step
    bool refine = true;          // halve the internal step until converged
    double refine_tol = 1e-8;    // successive-refinement error per unit time
    double min_dt = 1e-12;       // StepUnderflow below this internal step
};

struct TrajectoryMeta {
    std::string model;           // "reduced", "full" or "quench"
    std::string time_units;      // "rescaled" or "physical"
    double dt_output = 0.0;
    double dt_internal = 0.0;
    int substeps = 1;            // internal steps per output interval
    double refinement_error = 0.0;
    std::vector<double> switch_times;
    double overshoot_factor = 0.0;  // quench only: post-switch envelope excess
    bool bounded_after_switch = false;
};

struct AmplitudeSample {
    Complex a;
    Complex b;
    Complex c;  // auxiliary mode, zero for the reduced model
};

struct Trajectory {
    std::vector<double> times;
    std::vector<AmplitudeSample> amps;
    std::vector<double> energies;  // |b|^2
    std::vector<double> powers;    // d|b|^2/dt from the equations of motion
    bool has_aux = false;
    TrajectoryMeta meta;

    [[nodiscard]] std::size_t size() const { return times.size(); }
};

/// Three complex amplitudes (a, b, c), physical time.
struct FullState {
    Complex a, b, c;
};

/// Right-hand side of the three-mode first-moment equations.
[[nodiscard]] FullState full_rhs(const PhysicalParams& p, const FullState& y);

[[nodiscard]] Trajectory integrate_full(const PhysicalParams& p, double t_end, const IntegratorSettings& settings,
                                        FullState init = {});
[[nodiscard]] Trajectory integrate_full(const PhysicalParams& p, double t_end, double dt, FullState init = {});

[[nodiscard]] Trajectory integrate_reduced(const ReducedParams& r, double t_end, const IntegratorSettings& settings,
                                           Vec2 init = {});
[[nodiscard]] Trajectory integrate_reduced(const ReducedParams& r, double t_end, double dt, Vec2 init = {});

// -----------------------------------------------------------------------------
// Piecewise-constant parameter switching
// -----------------------------------------------------------------------------

struct QuenchSegment {
    double duration;
    ReducedParams params;

    friend bool operator==(const QuenchSegment&, const QuenchSegment&) = default;
};

struct QuenchSchedule {
    std::vector<QuenchSegment> segments;

    /// Throws InvalidParameter for an empty schedule, non-positive durations
    /// or invalid segment parameters.
    void validate() const;
    [[nodiscard]] double total_duration() const;
};

/// Integrates each segment with its own parameters; amplitudes are continuous
/// across switches. When the last segment is unbroken, meta.overshoot_factor
/// is max_post / max(E_switch, E_steady) - 1 over that segment.
[[nodiscard]] Trajectory integrate_quench(const QuenchSchedule& schedule, Vec2 init, const IntegratorSettings& settings);
[[nodiscard]] Trajectory integrate_quench(const QuenchSchedule& schedule, Vec2 init, double dt);

// -----------------------------------------------------------------------------
// CSV
// -----------------------------------------------------------------------------

/// Columns t, re_a, im_a, re_b, im_b, [re_c, im_c,] energy, power at 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace epbattery
