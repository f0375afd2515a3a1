#include "epbattery/sweep.hpp"

#include "epbattery/error.hpp"
#include "epbattery/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace epbattery {

namespace {

constexpr double kTcritGuard = 1e7;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_gamma_b(double gamma_b) {
    if (!(gamma_b > 0.0) || !std::isfinite(gamma_b)) {
        throw Error(ErrorCode::InvalidParameter, "gamma_b must be > 0");
    }
}

}  // namespace

void Range::validate() const {
    if (!std::isfinite(min) || !std::isfinite(max)) {
        throw Error(ErrorCode::InvalidParameter, "range bounds must be finite");
    }
    if (points == 0) {
        throw Error(ErrorCode::InvalidParameter, "range has no points");
    }
    if (min > max) {
        throw Error(ErrorCode::InvalidParameter, "range min exceeds max");
    }
}

std::vector<double> Range::values() const {
    validate();
    std::vector<double> out(points);
    if (points == 1) {
        out[0] = min;
        return out;
    }
    const double span = max - min;
    const auto last = static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) {
        out[i] = min + span * static_cast<double>(i) / last;
    }
    out.back() = max;
    return out;
}

std::size_t PhaseGrid::count(Regime tag) const { return static_cast<std::size_t>(std::count(regime.begin(), regime.end(), tag)); }

Range default_delta_range() { return {-3.0, 3.0, 201}; }

Range default_alpha_range(double gamma_b) { return {-0.5 * gamma_b, 3.0, 201}; }

PhaseGrid phase_diagram(double gamma_b, const Range& delta_r, const Range& alpha, const SweepOptions& options) {
    require_gamma_b(gamma_b);
    if (alpha.min < -0.5 * gamma_b * (1.0 + 1e-12)) {
        throw Error(ErrorCode::InvalidParameter, "alpha range must satisfy alpha >= -gamma_b/2");
    }

    PhaseGrid grid;
    grid.gamma_b = gamma_b;
    grid.delta_r_axis = delta_r.values();
    grid.alpha_axis = alpha.values();
    const std::size_t nd = grid.delta_r_axis.size();
    const std::size_t na = grid.alpha_axis.size();
    grid.growth.resize(nd * na);
    grid.regime.resize(nd * na);
    std::vector<std::optional<double>> column_boundary(nd);

    parallel_for(nd, options.threads, [&](std::size_t i) {
        const double d = grid.delta_r_axis[i];
        for (std::size_t j = 0; j < na; ++j) {
            const Spectrum s = eigensystem(ReducedParams::from_asymmetry(gamma_b, grid.alpha_axis[j], d));
            const PhaseRegime cls = classify(s);
            grid.growth[grid.index(i, j)] = growth_of(s.lambda_plus);
            grid.regime[grid.index(i, j)] = cls.tag;
        }
        if (na > 1) {
            try {
                column_boundary[i] = boundary_alpha(gamma_b, d, AlphaWindow{alpha.min, alpha.max});
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NoBracket) {
                    throw;
                }
            }
        }
    });

    for (std::size_t i = 0; i < nd; ++i) {
        if (column_boundary[i]) {
            grid.boundary.push_back({grid.delta_r_axis[i], *column_boundary[i]});
        }
    }
    if (alpha.contains(0.0)) {
        for (double d : {-1.0, 1.0}) {
            if (delta_r.contains(d)) {
                grid.ep_points.push_back({d, 0.0});
            }
        }
    }
    return grid;
}

std::vector<EigenProfileRow> eigenvalue_profile(double gamma_b, double alpha, const Range& delta_r) {
    const Complex shift{0.0, gamma_b};
    std::vector<EigenProfileRow> rows;
    for (double d : delta_r.values()) {
        const Spectrum s = eigensystem(ReducedParams::from_asymmetry(gamma_b, alpha, d));
        rows.push_back({d, s.lambda_plus + shift, s.lambda_minus + shift});
    }
    return rows;
}

std::vector<double> time_grid(double t_end, double dt) {
    if (!(t_end > 0.0) || !(dt > 0.0) || !std::isfinite(t_end) || !std::isfinite(dt)) {
        throw Error(ErrorCode::InvalidParameter, "t_end and dt must be > 0");
    }
    const auto n = static_cast<std::size_t>(std::ceil(t_end / dt * (1.0 - 1e-12)));
    std::vector<double> times(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        times[i] = static_cast<double>(i) * dt;
    }
    times[n] = t_end;
    return times;
}

std::vector<DynamicsSeries> dynamics_panel(double gamma_b, std::span<const PlanePoint> points, double t_end,
                                           double dt, double eps_r, const SweepOptions& options) {
    require_gamma_b(gamma_b);
    for (const auto& pt : points) {
        if (pt.alpha < -0.5 * gamma_b * (1.0 + 1e-12)) {
            throw Error(ErrorCode::InvalidParameter, "dynamics point outside alpha >= -gamma_b/2");
        }
    }
    const auto times = time_grid(t_end, dt);
    std::vector<DynamicsSeries> out(points.size());
    parallel_for(points.size(), options.threads, [&](std::size_t k) {
        DynamicsSeries& series = out[k];
        series.point = points[k];
        series.params = ReducedParams::from_asymmetry(gamma_b, points[k].alpha, points[k].delta_r, eps_r);
        series.regime = classify(eigensystem(series.params));
        series.records = sample(series.params, times);
    });
    return out;
}

double fit_log_slope(std::span<const double> times, std::span<const double> energies) {
    if (times.empty()) {
        return kNaN;
    }
    const double mid = times.front() + 0.5 * (times.back() - times.front());
    return fit_log_slope(times, energies, mid, times.back());
}

double fit_log_slope(std::span<const double> times, std::span<const double> energies, double t_lo, double t_hi) {
    double n = 0.0;
    double sx = 0.0;
    double sy = 0.0;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < std::min(times.size(), energies.size()); ++i) {
        if (times[i] < t_lo || times[i] > t_hi || !(energies[i] >= 1e-12)) {
            continue;
        }
        const double y = std::log(energies[i]);
        n += 1.0;
        sx += times[i];
        sy += y;
        sxx += times[i] * times[i];
        sxy += times[i] * y;
    }
    const double denom = n * sxx - sx * sx;
    if (n < 2.0 || denom <= 0.0) {
        return kNaN;
    }
    return (n * sxy - sx * sy) / denom;
}

bool tcrit_stable(double gamma, double delta_r) {
    const double w2 = 1.0 - delta_r * delta_r;
    return !(w2 > 0.0 && std::sqrt(w2) > gamma);
}

double energy_scale(double gamma, double delta_r) {
    const double w = std::sqrt(std::max(0.0, 1.0 - delta_r * delta_r));
    const double k = delta_r * delta_r + gamma * gamma - 1.0;
    const double shape = (gamma + w) / w;
    return shape * shape / (4.0 * k * k);
}

std::optional<double> tcrit_asymptotic(double gamma, double delta_r, double e_max) {
    if (tcrit_stable(gamma, delta_r)) {
        return std::nullopt;
    }
    const double w = std::sqrt(1.0 - delta_r * delta_r);
    const double t = std::log(e_max / energy_scale(gamma, delta_r)) / (2.0 * (w - gamma));
    return std::max(0.0, t);
}

std::optional<double> tcrit_exact(double gamma, double delta_r, double e_max) {
    if (tcrit_stable(gamma, delta_r)) {
        return std::nullopt;
    }
    const ReducedParams r = ReducedParams::symmetric(gamma, delta_r, 1.0);
    auto energy = [&r](double t) { return energy_symmetric(r, t); };

    double lo = 0.0;
    double hi = 1.0 / std::sqrt(1.0 - delta_r * delta_r);
    while (energy(hi) < e_max) {
        lo = hi;
        hi *= 2.0;
        if (hi > kTcritGuard) {
            throw Error(ErrorCode::NoThreshold, "energy never reached E_max before the time guard");
        }
    }
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (energy(mid) < e_max) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

CritTimeCurve tcrit_curve(double gamma_b, double e_max, const Range& delta_r, const SweepOptions& options) {
    require_gamma_b(gamma_b);
    if (!(e_max > 0.0) || !std::isfinite(e_max)) {
        throw Error(ErrorCode::InvalidParameter, "E_max must be > 0");
    }
    CritTimeCurve curve;
    curve.gamma_b = gamma_b;
    curve.e_max = e_max;
    curve.delta_r_axis = delta_r.values();
    const std::size_t n = curve.delta_r_axis.size();
    curve.t_asymptotic.resize(n);
    curve.t_exact.resize(n);
    curve.e_scale.resize(n);
    std::vector<char> stable(n);

    parallel_for(n, options.threads, [&](std::size_t i) {
        const double d = curve.delta_r_axis[i];
        stable[i] = tcrit_stable(gamma_b, d) ? 1 : 0;
        curve.e_scale[i] = stable[i] ? kNaN : energy_scale(gamma_b, d);
        curve.t_asymptotic[i] = tcrit_asymptotic(gamma_b, d, e_max);
        curve.t_exact[i] = tcrit_exact(gamma_b, d, e_max);
    });
    curve.stable_mask.assign(stable.begin(), stable.end());
    return curve;
}

}  // namespace epbattery
