#include "epbattery/cli.hpp"

#include "epbattery/error.hpp"
#include "epbattery/io.hpp"
#include "epbattery/propagator.hpp"
#include "epbattery/spectral.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

namespace epbattery::cli {

using nlohmann::json;

namespace {

constexpr std::string_view kSpectrum = "spectrum";
constexpr std::string_view kDynamics = "dynamics";
constexpr std::string_view kPhaseDiagram = "phase-diagram";
constexpr std::string_view kTcrit = "tcrit";
constexpr std::string_view kValidate = "validate";

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// -----------------------------------------------------------------------------
// Strict JSON object reader
// -----------------------------------------------------------------------------

class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(where() + "expected an object");
        }
    }

    const json* find(const std::string& key) {
        const auto it = j_.find(key);
        if (it == j_.end()) {
            return nullptr;
        }
        seen_.insert(key);
        return &*it;
    }

    void number(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) {
                throw type_error(key, "a number");
            }
            out = v->get<double>();
        }
    }

    void optional_number(const std::string& key, std::optional<double>& out) {
        if (const json* v = find(key)) {
            if (v->is_null()) {
                out.reset();
            } else if (v->is_number()) {
                out = v->get<double>();
            } else {
                throw type_error(key, "a number or null");
            }
        }
    }

    template <class Int>
    void integer(const std::string& key, Int& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<long long>() < 0)) {
                throw type_error(key, "a non-negative integer");
            }
            out = static_cast<Int>(v->get<unsigned long long>());
        }
    }

    void flag(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) {
                throw type_error(key, "a boolean");
            }
            out = v->get<bool>();
        }
    }

    void text(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) {
                throw type_error(key, "a string");
            }
            out = v->get<std::string>();
        }
    }

    void complex(const std::string& key, Complex& out) {
        if (const json* v = find(key)) {
            if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
                throw type_error(key, "an array [re, im]");
            }
            out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
        }
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (seen_.count(item.key()) == 0) {
                throw ConfigError(where() + "unknown key '" + item.key() + "'");
            }
        }
    }

    [[nodiscard]] std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    [[nodiscard]] std::string where() const { return path_.empty() ? std::string{} : path_ + ": "; }

    [[nodiscard]] ConfigError type_error(const std::string& key, const char* expected) const {
        return ConfigError("'" + child(key) + "' must be " + expected);
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

// -----------------------------------------------------------------------------
// Block serialization
// -----------------------------------------------------------------------------

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

json range_json(const Range& r) { return {{"min", r.min}, {"max", r.max}, {"points", r.points}}; }

Range read_range(const json& j, const std::string& path, Range r) {
    Fields f(j, path);
    f.number("min", r.min);
    f.number("max", r.max);
    f.integer("points", r.points);
    f.finish();
    return r;
}

json reduced_json(const ReducedParams& r) {
    return {{"gamma_a", r.gamma_a},   {"gamma_b", r.gamma_b},     {"delta_r", r.delta_r},
            {"eps_r", r.eps_r},       {"gamma_eff", r.gamma_eff}};
}

ReducedParams read_reduced(const json& j, const std::string& path, ReducedParams r) {
    Fields f(j, path);
    f.number("gamma_a", r.gamma_a);
    f.number("gamma_b", r.gamma_b);
    f.number("delta_r", r.delta_r);
    f.number("eps_r", r.eps_r);
    f.number("gamma_eff", r.gamma_eff);
    f.finish();
    return r;
}

json physical_json(const PhysicalParams& p) {
    return {{"delta_a", p.delta_a},          {"delta_b", p.delta_b},          {"delta_c", p.delta_c},
            {"kappa_a", p.kappa_a},          {"kappa_b", p.kappa_b},          {"kappa_c", p.kappa_c},
            {"Gamma", p.Gamma},              {"p_a", complex_json(p.p_a)},    {"p_b", complex_json(p.p_b)},
            {"p_c_a", complex_json(p.p_c_a)}, {"p_c_b", complex_json(p.p_c_b)}, {"drive_eps", p.drive_eps}};
}

PhysicalParams read_physical(const json& j, const std::string& path, PhysicalParams p) {
    Fields f(j, path);
    f.number("delta_a", p.delta_a);
    f.number("delta_b", p.delta_b);
    f.number("delta_c", p.delta_c);
    f.number("kappa_a", p.kappa_a);
    f.number("kappa_b", p.kappa_b);
    f.number("kappa_c", p.kappa_c);
    f.number("Gamma", p.Gamma);
    f.complex("p_a", p.p_a);
    f.complex("p_b", p.p_b);
    f.complex("p_c_a", p.p_c_a);
    f.complex("p_c_b", p.p_c_b);
    f.number("drive_eps", p.drive_eps);
    f.finish();
    return p;
}

json block_json(const SpectrumConfig& c) {
    return {{"gamma_b", c.gamma_b}, {"alpha", c.alpha}, {"delta_r", range_json(c.delta_r)}};
}

json block_json(const DynamicsConfig& c) {
    json points = json::array();
    for (const auto& p : c.points) {
        points.push_back({{"delta_r", p.delta_r}, {"alpha", p.alpha}});
    }
    json segments = json::array();
    for (const auto& s : c.segments) {
        segments.push_back({{"duration", s.duration}, {"params", reduced_json(s.params)}});
    }
    return {{"kind", c.kind},
            {"method", c.method},
            {"t_end", c.t_end},
            {"dt", c.dt},
            {"physical_time", c.physical_time},
            {"params", reduced_json(c.params)},
            {"gamma_b", c.gamma_b},
            {"eps_r", c.eps_r},
            {"points", points},
            {"segments", segments},
            {"physical", physical_json(c.physical)}};
}

json block_json(const PhaseDiagramConfig& c) {
    return {{"gamma_b", c.gamma_b}, {"delta_r", range_json(c.delta_r)}, {"alpha", range_json(c.alpha)}};
}

json block_json(const TcritConfig& c) {
    return {{"gamma_b", c.gamma_b}, {"e_max", c.e_max}, {"delta_r", range_json(c.delta_r)}};
}

json block_json(const ValidateConfig& c) {
    return {{"target", reduced_json(c.target)},
            {"ratios", c.ratios},
            {"t_end", c.t_end},
            {"dt", c.dt},
            {"max_rel_error", c.max_rel_error ? json(*c.max_rel_error) : json(nullptr)},
            {"require_decreasing", c.require_decreasing}};
}

SpectrumConfig read_block(const json& j, const std::string& path, SpectrumConfig c) {
    Fields f(j, path);
    f.number("gamma_b", c.gamma_b);
    f.number("alpha", c.alpha);
    if (const json* v = f.find("delta_r")) {
        c.delta_r = read_range(*v, f.child("delta_r"), c.delta_r);
    }
    f.finish();
    return c;
}

void check_dynamics_choices(const DynamicsConfig& c, const std::string& kind_key, const std::string& method_key) {
    static const std::set<std::string> kinds{"single", "panel", "quench", "full"};
    if (kinds.count(c.kind) == 0) {
        throw ConfigError("'" + kind_key + "' must be one of single, panel, quench, full");
    }
    if (c.method != "closed_form" && c.method != "rk4") {
        throw ConfigError("'" + method_key + "' must be closed_form or rk4");
    }
}

DynamicsConfig read_block(const json& j, const std::string& path, DynamicsConfig c) {
    Fields f(j, path);
    f.text("kind", c.kind);
    f.text("method", c.method);
    f.number("t_end", c.t_end);
    f.number("dt", c.dt);
    f.flag("physical_time", c.physical_time);
    if (const json* v = f.find("params")) {
        c.params = read_reduced(*v, f.child("params"), c.params);
    }
    f.number("gamma_b", c.gamma_b);
    f.number("eps_r", c.eps_r);
    if (const json* v = f.find("points")) {
        if (!v->is_array()) {
            throw ConfigError("'" + f.child("points") + "' must be an array");
        }
        c.points.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
            PlanePoint pt;
            Fields pf((*v)[i], f.child("points") + "[" + std::to_string(i) + "]");
            pf.number("delta_r", pt.delta_r);
            pf.number("alpha", pt.alpha);
            pf.finish();
            c.points.push_back(pt);
        }
    }
    if (const json* v = f.find("segments")) {
        if (!v->is_array()) {
            throw ConfigError("'" + f.child("segments") + "' must be an array");
        }
        c.segments.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
            const std::string seg_path = f.child("segments") + "[" + std::to_string(i) + "]";
            QuenchSegment seg{0.0, ReducedParams{}};
            Fields sf((*v)[i], seg_path);
            sf.number("duration", seg.duration);
            if (const json* pv = sf.find("params")) {
                seg.params = read_reduced(*pv, sf.child("params"), seg.params);
            }
            sf.finish();
            c.segments.push_back(seg);
        }
    }
    if (const json* v = f.find("physical")) {
        c.physical = read_physical(*v, f.child("physical"), c.physical);
    }
    f.finish();

    check_dynamics_choices(c, f.child("kind"), f.child("method"));
    return c;
}

PhaseDiagramConfig read_block(const json& j, const std::string& path, PhaseDiagramConfig c) {
    Fields f(j, path);
    f.number("gamma_b", c.gamma_b);
    c.alpha = default_alpha_range(c.gamma_b);
    if (const json* v = f.find("delta_r")) {
        c.delta_r = read_range(*v, f.child("delta_r"), c.delta_r);
    }
    if (const json* v = f.find("alpha")) {
        c.alpha = read_range(*v, f.child("alpha"), c.alpha);
    }
    f.finish();
    return c;
}

TcritConfig read_block(const json& j, const std::string& path, TcritConfig c) {
    Fields f(j, path);
    f.number("gamma_b", c.gamma_b);
    f.number("e_max", c.e_max);
    if (const json* v = f.find("delta_r")) {
        c.delta_r = read_range(*v, f.child("delta_r"), c.delta_r);
    }
    f.finish();
    return c;
}

ValidateConfig read_block(const json& j, const std::string& path, ValidateConfig c) {
    Fields f(j, path);
    if (const json* v = f.find("target")) {
        c.target = read_reduced(*v, f.child("target"), c.target);
    }
    if (const json* v = f.find("ratios")) {
        if (!v->is_array() || !std::all_of(v->begin(), v->end(), [](const json& x) { return x.is_number(); })) {
            throw ConfigError("'" + f.child("ratios") + "' must be an array of numbers");
        }
        c.ratios = v->get<std::vector<double>>();
    }
    f.number("t_end", c.t_end);
    f.number("dt", c.dt);
    f.optional_number("max_rel_error", c.max_rel_error);
    f.flag("require_decreasing", c.require_decreasing);
    f.finish();
    return c;
}

// -----------------------------------------------------------------------------
// Commands
// -----------------------------------------------------------------------------

unsigned resolve_threads(unsigned requested) {
    if (requested == 0) {
        return std::max(1U, std::thread::hardware_concurrency());
    }
    return requested;
}

json number_or_null(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

CommandResult run(const SpectrumConfig& c, unsigned /*threads*/) {
    CommandResult res;
    res.table.columns = {"delta_r", "re_lp", "im_lp", "re_lm", "im_lm"};
    json coalescence = json::array();
    for (const auto& row : eigenvalue_profile(c.gamma_b, c.alpha, c.delta_r)) {
        res.table.rows.push_back(json::array({row.delta_r, row.lambda_plus.real(), row.lambda_plus.imag(),
                                              row.lambda_minus.real(), row.lambda_minus.imag()}));
        if (std::abs(row.lambda_plus - row.lambda_minus) < 1e-6) {
            coalescence.push_back(row.delta_r);
        }
    }
    res.meta = {{"gamma_b", c.gamma_b}, {"alpha", c.alpha}, {"displacement", "lambda + i gamma_b"},
                {"coalescence_delta_r", coalescence}};
    return res;
}

void push_state_row(Table& t, double time, Complex a, Complex b, double energy, double power, double eps_r) {
    const double norm = eps_r > 0.0 ? power / (eps_r * eps_r) : std::nan("");
    t.rows.push_back(json::array({time, a.real(), a.imag(), b.real(), b.imag(), energy, power, norm}));
}

const std::vector<std::string> kStateColumns = {"t", "re_a", "im_a", "re_b", "im_b", "energy", "power", "power_norm"};

CommandResult run(const DynamicsConfig& c, unsigned threads) {
    check_dynamics_choices(c, "dynamics.kind", "dynamics.method");
    CommandResult res;
    res.meta["kind"] = c.kind;

    if (c.kind == "panel") {
        if (c.points.empty()) {
            throw Error(ErrorCode::InvalidParameter, "panel needs at least one point");
        }
        const auto panel = dynamics_panel(c.gamma_b, c.points, c.t_end, c.dt, c.eps_r, SweepOptions{threads});
        res.table.columns = {"point", "delta_r", "alpha", "regime", "t", "energy", "power", "power_norm"};
        json points = json::array();
        for (std::size_t k = 0; k < panel.size(); ++k) {
            const auto& s = panel[k];
            const std::string tag{to_string(s.regime.tag)};
            std::size_t fallbacks = 0;
            for (const auto& rec : s.records) {
                const double norm = c.eps_r > 0.0 ? rec.power / (c.eps_r * c.eps_r) : std::nan("");
                res.table.rows.push_back(
                    json::array({k, s.point.delta_r, s.point.alpha, tag, rec.t, rec.energy, rec.power, norm}));
                fallbacks += rec.quadrature_fallback ? 1 : 0;
            }
            points.push_back({{"point", k},
                              {"delta_r", s.point.delta_r},
                              {"alpha", s.point.alpha},
                              {"regime", tag},
                              {"growth_rate", s.regime.growth_rate},
                              {"quadrature_fallback_samples", fallbacks}});
        }
        res.meta["gamma_b"] = c.gamma_b;
        res.meta["eps_r"] = c.eps_r;
        res.meta["points"] = points;
        res.meta["time_units"] = "rescaled";
        return res;
    }

    if (c.kind == "full") {
        const Trajectory traj = integrate_full(c.physical, c.t_end, c.dt);
        res.table.columns = {"t", "re_a", "im_a", "re_b", "im_b", "re_c", "im_c", "energy", "power"};
        for (std::size_t i = 0; i < traj.size(); ++i) {
            const auto& s = traj.amps[i];
            res.table.rows.push_back(json::array({traj.times[i], s.a.real(), s.a.imag(), s.b.real(), s.b.imag(),
                                                  s.c.real(), s.c.imag(), traj.energies[i], traj.powers[i]}));
        }
        res.meta["time_units"] = "physical";
        res.meta["substeps"] = traj.meta.substeps;
        res.meta["refinement_error"] = traj.meta.refinement_error;
        res.meta["separation_ratio"] = separation_ratio(c.physical);
        return res;
    }

    const bool quench = c.kind == "quench";
    QuenchSchedule schedule;
    if (quench) {
        schedule.segments = c.segments;
        schedule.validate();
    } else {
        c.params.validate();
    }
    const ReducedParams& last = quench ? schedule.segments.back().params : c.params;
    const double scale = c.physical_time ? last.gamma_eff : 1.0;
    if (quench && c.physical_time) {
        for (const auto& seg : schedule.segments) {
            if (seg.params.gamma_eff != scale) {
                throw Error(ErrorCode::InvalidParameter, "physical_time needs a common gamma_eff across segments");
            }
        }
    }
    res.table.columns = kStateColumns;
    res.meta["time_units"] = c.physical_time ? "physical" : "rescaled";

    if (quench) {
        const Trajectory traj = integrate_quench(schedule, Vec2{}, c.dt);
        std::size_t seg = 0;
        double boundary = schedule.segments.front().duration;
        for (std::size_t i = 0; i < traj.size(); ++i) {
            while (seg + 1 < schedule.segments.size() && traj.times[i] > boundary * (1.0 + 1e-12)) {
                ++seg;
                boundary += schedule.segments[seg].duration;
            }
            push_state_row(res.table, traj.times[i] / scale, traj.amps[i].a, traj.amps[i].b, traj.energies[i],
                           traj.powers[i] * scale, schedule.segments[seg].params.eps_r);
        }
        json switches = json::array();
        for (double t : traj.meta.switch_times) {
            switches.push_back(t / scale);
        }
        json regimes = json::array();
        for (const auto& s : schedule.segments) {
            regimes.push_back(std::string(to_string(classify(eigensystem(s.params)).tag)));
        }
        res.meta["switch_times"] = switches;
        res.meta["segment_regimes"] = regimes;
        res.meta["overshoot_factor"] = traj.meta.overshoot_factor;
        res.meta["bounded_after_switch"] = traj.meta.bounded_after_switch;
        res.meta["substeps"] = traj.meta.substeps;
        return res;
    }

    const PhaseRegime regime = classify(eigensystem(c.params));
    res.meta["regime"] = std::string(to_string(regime.tag));
    res.meta["growth_rate"] = regime.growth_rate;
    res.meta["method"] = c.method;
    if (c.method == "rk4") {
        const Trajectory traj = integrate_reduced(c.params, c.t_end, c.dt);
        for (std::size_t i = 0; i < traj.size(); ++i) {
            push_state_row(res.table, traj.times[i] / scale, traj.amps[i].a, traj.amps[i].b, traj.energies[i],
                           traj.powers[i] * scale, c.params.eps_r);
        }
        res.meta["substeps"] = traj.meta.substeps;
        return res;
    }
    std::size_t fallbacks = 0;
    for (const auto& rec : sample(c.params, time_grid(c.t_end, c.dt))) {
        push_state_row(res.table, rec.t / scale, rec.a, rec.b, rec.energy, rec.power * scale, c.params.eps_r);
        fallbacks += rec.quadrature_fallback ? 1 : 0;
    }
    res.meta["quadrature_fallback_samples"] = fallbacks;
    return res;
}

CommandResult run(const PhaseDiagramConfig& c, unsigned threads) {
    const PhaseGrid grid = phase_diagram(c.gamma_b, c.delta_r, c.alpha, SweepOptions{threads});
    CommandResult res;
    res.table.columns = {"delta_r", "alpha", "growth", "regime"};
    for (std::size_t i = 0; i < grid.delta_r_axis.size(); ++i) {
        for (std::size_t j = 0; j < grid.alpha_axis.size(); ++j) {
            const std::size_t k = grid.index(i, j);
            res.table.rows.push_back(json::array(
                {grid.delta_r_axis[i], grid.alpha_axis[j], grid.growth[k], std::string(to_string(grid.regime[k]))}));
        }
    }
    Table boundary;
    boundary.columns = {"delta_r", "alpha", "growth"};
    for (const auto& pt : grid.boundary) {
        boundary.rows.push_back(json::array({pt.delta_r, pt.alpha, growth_at(c.gamma_b, pt.alpha, pt.delta_r)}));
    }
    res.extras.emplace_back("boundary", std::move(boundary));

    json eps = json::array();
    for (const auto& pt : grid.ep_points) {
        eps.push_back({{"delta_r", pt.delta_r}, {"alpha", pt.alpha}});
    }
    json counts = json::object();
    for (Regime r : {Regime::Unbroken, Regime::Broken, Regime::ExceptionalPoint, Regime::Boundary}) {
        counts[std::string(to_string(r))] = grid.count(r);
    }
    res.meta = {{"gamma_b", c.gamma_b},
                {"delta_r_points", grid.delta_r_axis.size()},
                {"alpha_points", grid.alpha_axis.size()},
                {"ep_points", eps},
                {"regime_counts", counts}};
    return res;
}

CommandResult run(const TcritConfig& c, unsigned threads) {
    const CritTimeCurve curve = tcrit_curve(c.gamma_b, c.e_max, c.delta_r, SweepOptions{threads});
    CommandResult res;
    res.table.columns = {"delta_r", "t_asym", "t_exact", "e_scale", "stable"};
    for (std::size_t i = 0; i < curve.delta_r_axis.size(); ++i) {
        res.table.rows.push_back(json::array({curve.delta_r_axis[i], number_or_null(curve.t_asymptotic[i]),
                                              number_or_null(curve.t_exact[i]), curve.e_scale[i],
                                              curve.stable_mask[i] ? 1 : 0}));
    }
    res.meta = {{"gamma_b", c.gamma_b},
                {"e_max", c.e_max},
                {"alpha", 0.0},
                {"stable_threshold", c.gamma_b < 1.0 ? std::sqrt(1.0 - c.gamma_b * c.gamma_b) : 0.0}};
    return res;
}

struct ValidationRow {
    double ratio = 0.0;
    double separation = 0.0;
    double gamma_eff = 0.0;
    double error_final = 0.0;
    double error_max = 0.0;
    int substeps = 0;
};

ValidationRow validate_ratio(const ValidateConfig& c, double ratio) {
    const PhysicalParams p = realize_reduced(c.target, ratio);
    const Reduction red = reduce_with_diagnostics(p);
    const double ge = red.params.gamma_eff;
    const Trajectory traj = integrate_full(p, c.t_end / ge, IntegratorSettings{.dt = c.dt / ge});
    const Complex gauge = std::polar(1.0, -red.diagnostics.battery_phase);

    ValidationRow row;
    row.ratio = ratio;
    row.separation = red.diagnostics.separation_ratio;
    row.gamma_eff = ge;
    row.substeps = traj.meta.substeps;
    double max_diff = 0.0;
    double max_ref = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const Complex reference = amplitudes(red.params, traj.times[i] * ge).b;
        const double diff = std::abs(gauge * traj.amps[i].b - reference);
        max_diff = std::max(max_diff, diff);
        max_ref = std::max(max_ref, std::abs(reference));
        if (i + 1 == traj.size()) {
            row.error_final = diff / std::abs(reference);
        }
    }
    row.error_max = max_diff / max_ref;
    return row;
}

CommandResult run(const ValidateConfig& c, unsigned threads) {
    if (c.ratios.empty()) {
        throw Error(ErrorCode::InvalidParameter, "validate needs at least one separation ratio");
    }
    for (double r : c.ratios) {
        if (!(r > 0.0) || !std::isfinite(r)) {
            throw Error(ErrorCode::InvalidParameter, "separation ratios must be > 0");
        }
    }
    std::vector<ValidationRow> rows(c.ratios.size());
    parallel_for(rows.size(), threads, [&](std::size_t k) { rows[k] = validate_ratio(c, c.ratios[k]); });

    CommandResult res;
    res.table.columns = {"ratio", "separation_ratio", "gamma_eff", "error_final", "error_max"};
    for (const auto& r : rows) {
        res.table.rows.push_back(json::array({r.ratio, r.separation, r.gamma_eff, r.error_final, r.error_max}));
    }

    std::vector<ValidationRow> sorted = rows;
    std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) { return x.ratio < y.ratio; });
    bool decreasing = true;
    for (std::size_t k = 1; k < sorted.size(); ++k) {
        if (!(sorted[k].error_final < sorted[k - 1].error_final)) {
            decreasing = false;
        }
    }
    const double largest_error = sorted.back().error_final;
    const bool within = !c.max_rel_error || largest_error <= *c.max_rel_error;

    res.meta = {{"t_end", c.t_end},
                {"time_units", "rescaled"},
                {"target", reduced_json(c.target)},
                {"decreasing", decreasing},
                {"largest_ratio_error", largest_error},
                {"max_rel_error", c.max_rel_error ? json(*c.max_rel_error) : json(nullptr)}};
    if (c.require_decreasing && !decreasing) {
        res.exit_code = kExitTolerance;
        res.violation = "error does not decrease with separation ratio";
    } else if (!within) {
        res.exit_code = kExitTolerance;
        res.violation = "error " + format_double(largest_error) + " at ratio " + format_double(sorted.back().ratio) +
                        " exceeds max_rel_error " + format_double(*c.max_rel_error);
    }
    return res;
}

// -----------------------------------------------------------------------------
// Output
// -----------------------------------------------------------------------------

void report(std::ostream& err, std::string_view kind, std::string_view code, std::string_view message) {
    const json record = {{"status", "error"}, {"kind", kind}, {"code", code}, {"message", message}};
    err << record.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
}

std::ofstream open_output(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot open output file '" + path + "'");
    }
    return os;
}

void close_output(std::ofstream& os, const std::string& path) {
    os.close();
    if (!os) {
        throw IoError("failed writing '" + path + "'");
    }
}

json full_document(const RunConfig& cfg, const CommandResult& res) {
    json doc = res.table.to_json();
    doc["command"] = cfg.command();
    for (const auto& [name, table] : res.extras) {
        doc[name] = table.to_json();
    }
    doc["meta"] = res.meta;
    return doc;
}

void write_outputs(const RunConfig& cfg, const CommandResult& res, std::ostream& out) {
    json meta = res.meta;
    meta["command"] = cfg.command();
    meta["config"] = to_json(cfg);
    CommandResult annotated = res;
    annotated.meta = meta;

    if (cfg.format == OutputFormat::Json) {
        const std::string text = full_document(cfg, annotated).dump(2) + "\n";
        if (cfg.output.empty()) {
            out << text;
            return;
        }
        auto os = open_output(cfg.output);
        os << text;
        close_output(os, cfg.output);
        return;
    }

    if (cfg.output.empty()) {
        res.table.write_csv(out);
        return;
    }
    auto os = open_output(cfg.output);
    res.table.write_csv(os);
    close_output(os, cfg.output);
    for (const auto& [name, table] : res.extras) {
        const std::string path = cfg.output + "." + name + ".csv";
        auto extra = open_output(path);
        table.write_csv(extra);
        close_output(extra, path);
    }
    const std::string meta_path = cfg.output + ".meta.json";
    auto ms = open_output(meta_path);
    ms << meta.dump(2) << '\n';
    close_output(ms, meta_path);
}

int dispatch_checked(const RunConfig& cfg, std::string_view expected, std::ostream& out, std::ostream& err) {
    if (cfg.command() != expected) {
        report(err, "config", "CommandMismatch",
               "configuration is for '" + std::string(cfg.command()) + "', not '" + std::string(expected) + "'");
        return kExitConfig;
    }
    return execute(cfg, out, err);
}

}  // namespace

// =============================================================================
// Public interface
// =============================================================================

std::string_view to_string(OutputFormat f) noexcept { return f == OutputFormat::Json ? "json" : "csv"; }

OutputFormat parse_format(std::string_view s) {
    if (s == "csv") {
        return OutputFormat::Csv;
    }
    if (s == "json") {
        return OutputFormat::Json;
    }
    throw ConfigError("format must be csv or json, got '" + std::string(s) + "'");
}

std::string_view RunConfig::command() const noexcept {
    switch (block.index()) {
    case 0: return kSpectrum;
    case 1: return kDynamics;
    case 2: return kPhaseDiagram;
    case 3: return kTcrit;
    default: return kValidate;
    }
}

RunConfig default_config(std::string_view command) {
    RunConfig cfg;
    if (command == kSpectrum) {
        cfg.block = SpectrumConfig{};
    } else if (command == kDynamics) {
        cfg.block = DynamicsConfig{};
    } else if (command == kPhaseDiagram) {
        cfg.block = PhaseDiagramConfig{};
    } else if (command == kTcrit) {
        cfg.block = TcritConfig{};
    } else if (command == kValidate) {
        cfg.block = ValidateConfig{};
    } else {
        throw ConfigError("unknown command '" + std::string(command) + "'");
    }
    return cfg;
}

json to_json(const RunConfig& cfg) {
    json j = {{"command", cfg.command()},
              {"output", cfg.output},
              {"format", to_string(cfg.format)},
              {"threads", cfg.threads}};
    j[std::string(cfg.command())] = std::visit([](const auto& b) { return block_json(b); }, cfg.block);
    return j;
}

RunConfig from_json(const json& j) {
    Fields f(j, "");
    std::string command;
    f.text("command", command);
    if (command.empty()) {
        throw ConfigError("'command' is required");
    }
    RunConfig cfg = default_config(command);
    f.text("output", cfg.output);
    std::string format{to_string(cfg.format)};
    f.text("format", format);
    cfg.format = parse_format(format);
    f.integer("threads", cfg.threads);
    if (const json* v = f.find(command)) {
        cfg.block = std::visit([&](const auto& b) -> CommandBlock { return read_block(*v, command, b); }, cfg.block);
    }
    f.finish();
    return cfg;
}

RunConfig parse_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    return from_json(j);
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ConfigError("cannot read config file '" + path + "'");
    }
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

void Table::write_csv(std::ostream& os) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
        os << (c ? "," : "") << columns[c];
    }
    os << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) {
                os << ',';
            }
            const json& cell = row[c];
            if (cell.is_number_float()) {
                os << format_double(cell.get<double>());
            } else if (cell.is_number_unsigned()) {
                os << cell.get<unsigned long long>();
            } else if (cell.is_number_integer()) {
                os << cell.get<long long>();
            } else if (cell.is_string()) {
                os << cell.get<std::string>();
            } else if (cell.is_boolean()) {
                os << (cell.get<bool>() ? 1 : 0);
            } else {
                os << "nan";
            }
        }
        os << '\n';
    }
}

json Table::to_json() const { return {{"columns", columns}, {"rows", rows}}; }

CommandResult run_command(const RunConfig& cfg) {
    const unsigned threads = resolve_threads(cfg.threads);
    return std::visit([threads](const auto& b) { return run(b, threads); }, cfg.block);
}

int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        const CommandResult res = run_command(cfg);
        write_outputs(cfg, res, out);
        if (res.exit_code == kExitTolerance) {
            report(err, "tolerance", "ToleranceViolation", res.violation);
        }
        return res.exit_code;
    } catch (const ConfigError& e) {
        report(err, "config", "ConfigError", e.what());
        return kExitConfig;
    } catch (const Error& e) {
        report(err, "domain", to_string(e.code()), e.what());
        return kExitDomain;
    } catch (const std::exception& e) {
        report(err, "io", "Failure", e.what());
        return kExitFailure;
    }
}

int cmd_spectrum(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return dispatch_checked(cfg, kSpectrum, out, err);
}

int cmd_dynamics(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return dispatch_checked(cfg, kDynamics, out, err);
}

int cmd_phase_diagram(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return dispatch_checked(cfg, kPhaseDiagram, out, err);
}

int cmd_tcrit(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return dispatch_checked(cfg, kTcrit, out, err);
}

int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return dispatch_checked(cfg, kValidate, out, err);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Charger-battery exceptional-point simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string format;
    std::optional<unsigned> threads;

    const std::vector<std::pair<std::string_view, const char*>> commands = {
        {kSpectrum, "Eigenvalue profile displaced by i*gamma_b"},
        {kDynamics, "Energy and power time series"},
        {kPhaseDiagram, "Growth-rate map and phase boundary over (delta_r, alpha)"},
        {kTcrit, "Critical time to reach an energy threshold"},
        {kValidate, "Three-mode integration against the reduced closed form"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(std::string(name), help);
        sub->add_option("--config", config_path, "JSON run configuration");
        sub->add_option("--out", out_path, "Output path (stdout when omitted)");
        sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--threads", threads, "Worker threads, 0 for all cores");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        report(err, "config", "UsageError", e.what());
        return kExitConfig;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    RunConfig cfg;
    try {
        if (config_path.empty()) {
            cfg = default_config(command);
        } else {
            std::ifstream is(config_path, std::ios::binary);
            if (!is) {
                throw ConfigError("cannot read config file '" + config_path + "'");
            }
            std::ostringstream ss;
            ss << is.rdbuf();
            json j;
            try {
                j = json::parse(ss.str());
            } catch (const json::parse_error& e) {
                throw ConfigError(std::string("malformed JSON: ") + e.what());
            }
            if (j.is_object() && !j.contains("command")) {
                j["command"] = command;
            }
            cfg = from_json(j);
        }
        if (!out_path.empty()) {
            cfg.output = out_path;
        }
        if (!format.empty()) {
            cfg.format = parse_format(format);
        }
        if (threads) {
            cfg.threads = *threads;
        }
    } catch (const ConfigError& e) {
        report(err, "config", "ConfigError", e.what());
        return kExitConfig;
    }

    if (command == kSpectrum) {
        return cmd_spectrum(cfg, out, err);
    }
    if (command == kDynamics) {
        return cmd_dynamics(cfg, out, err);
    }
    if (command == kPhaseDiagram) {
        return cmd_phase_diagram(cfg, out, err);
    }
    if (command == kTcrit) {
        return cmd_tcrit(cfg, out, err);
    }
    return cmd_validate(cfg, out, err);
}

}  // namespace epbattery::cli
