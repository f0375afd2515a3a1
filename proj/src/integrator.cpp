#include "epbattery/integrator.hpp"

#include "epbattery/error.hpp"
#include "epbattery/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

namespace epbattery {

namespace {

constexpr Complex kI{0.0, 1.0};

template <std::size_t N>
using State = std::array<Complex, N>;

template <std::size_t N>
State<N> axpy(const State<N>& y, double h, const State<N>& k) {
    State<N> out;
    for (std::size_t i = 0; i < N; ++i) {
        out[i] = y[i] + h * k[i];
    }
    return out;
}

template <std::size_t N, class Rhs>
State<N> rk4_step(const Rhs& f, const State<N>& y, double h) {
    const State<N> k1 = f(y);
    const State<N> k2 = f(axpy(y, 0.5 * h, k1));
    const State<N> k3 = f(axpy(y, 0.5 * h, k2));
    const State<N> k4 = f(axpy(y, h, k3));
    State<N> out;
    for (std::size_t i = 0; i < N; ++i) {
        out[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return out;
}

std::vector<double> output_grid(double t_end, double dt) {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) {
        throw Error(ErrorCode::InvalidParameter, "t_end must be > 0");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw Error(ErrorCode::InvalidParameter, "dt must be > 0");
    }
    const auto n = static_cast<std::size_t>(std::ceil(t_end / dt * (1.0 - 1e-12)));
    std::vector<double> times(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        times[i] = static_cast<double>(i) * dt;
    }
    times[n] = t_end;
    return times;
}

template <std::size_t N, class Rhs>
std::vector<State<N>> run_fixed(const Rhs& f, const std::vector<double>& times, const State<N>& init, int substeps) {
    std::vector<State<N>> out;
    out.reserve(times.size());
    out.push_back(init);
    State<N> y = init;
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double h = (times[i] - times[i - 1]) / substeps;
        for (int s = 0; s < substeps; ++s) {
            y = rk4_step<N>(f, y, h);
        }
        out.push_back(y);
    }
    return out;
}

template <std::size_t N>
double refinement_gap(const std::vector<State<N>>& coarse, const std::vector<State<N>>& fine) {
    double gap = 0.0;
    for (std::size_t i = 0; i < fine.size(); ++i) {
        double diff = 0.0;
        double scale = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            diff += std::norm(fine[i][k] - coarse[i][k]);
            scale += std::norm(fine[i][k]);
        }
        const double rel = std::sqrt(diff) / (1.0 + std::sqrt(scale));
        if (!(rel <= gap)) {
            gap = rel;  // also propagates NaN from an unstable step size
        }
    }
    return gap;
}

template <std::size_t N, class Rhs>
std::vector<State<N>> integrate_grid(const Rhs& f, const std::vector<double>& times, const State<N>& init,
                                     const IntegratorSettings& settings, TrajectoryMeta& meta) {
    const double dt = settings.dt;
    const double t_end = times.back();
    int substeps = 1;
    auto current = run_fixed<N>(f, times, init, substeps);
    meta.refinement_error = 0.0;
    if (settings.refine) {
        while (true) {
            if (dt / (2.0 * substeps) < settings.min_dt) {
                throw Error(ErrorCode::StepUnderflow,
                            "internal step fell below " + std::to_string(settings.min_dt) +
                                "; the system is too stiff for this step size");
            }
            auto finer = run_fixed<N>(f, times, init, 2 * substeps);
            const double err = refinement_gap<N>(current, finer) / std::max(t_end, 1e-300);
            substeps *= 2;
            current = std::move(finer);
            if (err < settings.refine_tol) {
                meta.refinement_error = err;
                break;
            }
        }
    }
    meta.dt_output = dt;
    meta.substeps = substeps;
    meta.dt_internal = dt / substeps;
    return current;
}

void check_settings(const IntegratorSettings& s) {
    if (!(s.dt > 0.0)) {
        throw Error(ErrorCode::InvalidParameter, "dt must be > 0");
    }
    if (s.refine && !(s.refine_tol > 0.0)) {
        throw Error(ErrorCode::InvalidParameter, "refine_tol must be > 0");
    }
}

State<2> reduced_derivative(const DriftMatrix& h, double eps_r, const State<2>& y) {
    const Vec2 hv = h.apply({y[0], y[1]});
    return {-kI * hv[0] + eps_r, -kI * hv[1]};
}

}  // namespace

FullState full_rhs(const PhysicalParams& p, const FullState& y) {
    const Complex mu_a = p.mu_a();
    const Complex mu_b = p.mu_b();
    FullState d;
    d.a = -kI * Complex{p.delta_a, -(p.kappa_a + p.shared_rate_a())} * y.a - mu_a * p.Gamma * y.c + p.drive_eps;
    d.b = -kI * Complex{p.delta_b, -(p.kappa_b + p.shared_rate_b())} * y.b - mu_b * p.Gamma * y.c;
    d.c = Complex{-p.aux_total_rate(), -p.delta_c} * y.c - p.Gamma * (std::conj(mu_a) * y.a + std::conj(mu_b) * y.b);
    return d;
}

Trajectory integrate_full(const PhysicalParams& p, double t_end, const IntegratorSettings& settings, FullState init) {
    p.validate();
    check_settings(settings);
    const auto times = output_grid(t_end, settings.dt);
    auto f = [&p](const State<3>& y) {
        const FullState d = full_rhs(p, {y[0], y[1], y[2]});
        return State<3>{d.a, d.b, d.c};
    };

    Trajectory traj;
    traj.has_aux = true;
    traj.meta.model = "full";
    traj.meta.time_units = "physical";
    const auto states = integrate_grid<3>(f, times, {init.a, init.b, init.c}, settings, traj.meta);

    traj.times = times;
    for (const auto& y : states) {
        const FullState d = full_rhs(p, {y[0], y[1], y[2]});
        traj.amps.push_back({y[0], y[1], y[2]});
        traj.energies.push_back(std::norm(y[1]));
        traj.powers.push_back(2.0 * (std::conj(y[1]) * d.b).real());
    }
    return traj;
}

Trajectory integrate_full(const PhysicalParams& p, double t_end, double dt, FullState init) {
    return integrate_full(p, t_end, IntegratorSettings{.dt = dt}, init);
}

Trajectory integrate_reduced(const ReducedParams& r, double t_end, const IntegratorSettings& settings, Vec2 init) {
    r.validate();
    check_settings(settings);
    const auto times = output_grid(t_end, settings.dt);
    const DriftMatrix h = drift_matrix(r);
    auto f = [&h, eps = r.eps_r](const State<2>& y) { return reduced_derivative(h, eps, y); };

    Trajectory traj;
    traj.meta.model = "reduced";
    traj.meta.time_units = "rescaled";
    const auto states = integrate_grid<2>(f, times, {init[0], init[1]}, settings, traj.meta);

    traj.times = times;
    for (const auto& y : states) {
        const State<2> d = f(y);
        traj.amps.push_back({y[0], y[1], Complex{}});
        traj.energies.push_back(std::norm(y[1]));
        traj.powers.push_back(2.0 * (std::conj(y[1]) * d[1]).real());
    }
    return traj;
}

Trajectory integrate_reduced(const ReducedParams& r, double t_end, double dt, Vec2 init) {
    return integrate_reduced(r, t_end, IntegratorSettings{.dt = dt}, init);
}

void QuenchSchedule::validate() const {
    if (segments.empty()) {
        throw Error(ErrorCode::InvalidParameter, "quench schedule has no segments");
    }
    for (const auto& seg : segments) {
        if (!(seg.duration > 0.0) || !std::isfinite(seg.duration)) {
            throw Error(ErrorCode::InvalidParameter, "quench segment duration must be > 0");
        }
        seg.params.validate();
    }
}

double QuenchSchedule::total_duration() const {
    double total = 0.0;
    for (const auto& seg : segments) {
        total += seg.duration;
    }
    return total;
}

Trajectory integrate_quench(const QuenchSchedule& schedule, Vec2 init, const IntegratorSettings& settings) {
    schedule.validate();

    Trajectory out;
    out.meta.model = "quench";
    out.meta.time_units = "rescaled";
    double offset = 0.0;
    Vec2 state = init;
    double energy_at_switch = std::norm(init[1]);
    std::size_t last_segment_start = 0;

    for (std::size_t k = 0; k < schedule.segments.size(); ++k) {
        const auto& seg = schedule.segments[k];
        Trajectory part = integrate_reduced(seg.params, seg.duration, settings, state);
        if (k > 0) {
            out.meta.switch_times.push_back(offset);
        }
        energy_at_switch = part.energies.front();
        last_segment_start = out.times.empty() ? 0 : out.times.size() - 1;
        const std::size_t first = (k == 0) ? 0 : 1;
        for (std::size_t i = first; i < part.size(); ++i) {
            out.times.push_back(offset + part.times[i]);
            out.amps.push_back(part.amps[i]);
            out.energies.push_back(part.energies[i]);
            out.powers.push_back(part.powers[i]);
        }
        out.meta.dt_output = part.meta.dt_output;
        out.meta.substeps = std::max(out.meta.substeps, part.meta.substeps);
        out.meta.dt_internal = settings.dt / out.meta.substeps;
        out.meta.refinement_error = std::max(out.meta.refinement_error, part.meta.refinement_error);
        offset += seg.duration;
        state = {part.amps.back().a, part.amps.back().b};
    }

    const ReducedParams& final_params = schedule.segments.back().params;
    const PhaseRegime regime = classify(eigensystem(final_params));
    if (regime.tag == Regime::Unbroken) {
        const Complex pi = eigensystem(final_params).pi_lambda;
        const double steady = final_params.eps_r * final_params.eps_r / std::norm(pi);
        double max_post = 0.0;
        for (std::size_t i = last_segment_start; i < out.energies.size(); ++i) {
            max_post = std::max(max_post, out.energies[i]);
        }
        const double envelope = std::max(energy_at_switch, steady);
        out.meta.overshoot_factor = envelope > 0.0 ? std::max(0.0, max_post / envelope - 1.0) : 0.0;
        out.meta.bounded_after_switch = true;
    }
    return out;
}

Trajectory integrate_quench(const QuenchSchedule& schedule, Vec2 init, double dt) {
    return integrate_quench(schedule, init, IntegratorSettings{.dt = dt});
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t,re_a,im_a,re_b,im_b,";
    if (traj.has_aux) {
        os << "re_c,im_c,";
    }
    os << "energy,power\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const auto& s = traj.amps[i];
        os << format_double(traj.times[i]) << ',' << format_double(s.a.real()) << ',' << format_double(s.a.imag())
           << ',' << format_double(s.b.real()) << ',' << format_double(s.b.imag()) << ',';
        if (traj.has_aux) {
            os << format_double(s.c.real()) << ',' << format_double(s.c.imag()) << ',';
        }
        os << format_double(traj.energies[i]) << ',' << format_double(traj.powers[i]) << '\n';
    }
}

}  // namespace epbattery
