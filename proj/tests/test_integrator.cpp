#include "catch_amalgamated.hpp"

#include "epbattery/error.hpp"
#include "epbattery/integrator.hpp"
#include "epbattery/propagator.hpp"
#include "epbattery/sweep.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

using namespace epbattery;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ReducedParams random_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double gamma_b = 2.0 * u(rng);
    const double alpha = -0.5 * gamma_b + 2.0 * u(rng);
    const double delta = 6.0 * (u(rng) - 0.5);
    return ReducedParams::from_asymmetry(gamma_b, alpha, delta, 0.2 + 1.5 * u(rng));
}

double max_closed_form_gap(const ReducedParams& r, const Trajectory& traj) {
    double gap = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const ModeAmplitudes m = amplitudes(r, traj.times[i]);
        gap = std::max(gap, std::abs(traj.amps[i].b - m.b) + std::abs(traj.amps[i].a - m.a));
    }
    return gap;
}

double fitted_slope(const Trajectory& traj, double lo, double hi) {
    std::vector<double> t;
    std::vector<double> e;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj.times[i] >= lo - 1e-12 && traj.times[i] <= hi + 1e-12) {
            t.push_back(traj.times[i]);
            e.push_back(traj.energies[i]);
        }
    }
    return fit_log_slope(t, e, lo, hi);
}

/// Full-model physical parameters for the oracle, real couplings only.
oracle::FullRates rates_of(const PhysicalParams& p) {
    oracle::FullRates f;
    f.delta = p.delta_a;
    f.kappa_a = p.kappa_a;
    f.kappa_b = p.kappa_b;
    f.kappa_c = p.kappa_c;
    f.Gamma = p.Gamma;
    f.p_a = p.p_a.real();
    f.p_b = p.p_b.real();
    f.p_c_a = p.p_c_a.real();
    f.p_c_b = p.p_c_b.real();
    f.eps = p.drive_eps;
    return f;
}

double full_reduced_error(const ReducedParams& target, double ratio) {
    const PhysicalParams p = realize_reduced(target, ratio);
    const double ge = reduce(p).gamma_eff;
    const Trajectory traj = integrate_full(p, 5.0 / ge, 0.01 / ge);
    const Complex reference = amplitudes(target, 5.0).b;
    return std::abs(traj.amps.back().b - reference) / std::abs(reference);
}

}  // namespace

TEST_CASE("trajectory invariants", "[integrator][property]") {
    const Trajectory traj = integrate_reduced(ReducedParams{0.8, 0.3, 0.5, 1.1, 1.0}, 3.0, 0.05);
    REQUIRE(traj.size() == 61);
    REQUIRE(traj.amps.size() == traj.size());
    REQUIRE(traj.energies.size() == traj.size());
    REQUIRE(traj.powers.size() == traj.size());
    CHECK(traj.times.front() == 0.0);
    CHECK_THAT(traj.times.back(), WithinAbs(3.0, 1e-12));
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (i > 0) {
            CHECK(traj.times[i] > traj.times[i - 1]);
        }
        CHECK(traj.energies[i] == std::norm(traj.amps[i].b));
        CHECK(traj.amps[i].c == Complex{});
    }
    CHECK_FALSE(traj.has_aux);
    CHECK(traj.meta.model == "reduced");
    CHECK(traj.meta.time_units == "rescaled");
    CHECK(traj.meta.refinement_error < 1e-8);
}

TEST_CASE("integrate_reduced rejects bad settings", "[integrator]") {
    const ReducedParams r = ReducedParams::symmetric(0.5, 0.0);
    CHECK_THROWS_AS(integrate_reduced(r, 0.0, 0.01), Error);
    CHECK_THROWS_AS(integrate_reduced(r, 1.0, 0.0), Error);
    CHECK_THROWS_AS(integrate_reduced(ReducedParams{-1.0, 0.5, 0.0, 1.0, 1.0}, 1.0, 0.01), Error);
}

TEST_CASE("RK4 matches the closed-form amplitudes on 100 random sets", "[integrator][oracle]") {
    std::mt19937_64 rng(53);
    for (int trial = 0; trial < 100; ++trial) {
        const ReducedParams r = random_params(rng);
        const Trajectory traj = integrate_reduced(r, 10.0, 0.01);
        double worst = 0.0;
        for (std::size_t i = 0; i < traj.size(); ++i) {
            const Complex ref = amplitudes(r, traj.times[i]).b;
            worst = std::max(worst, std::abs(traj.amps[i].b - ref) / std::max(std::abs(ref), 1e-300));
        }
        INFO("trial " << trial << " gamma_a=" << r.gamma_a << " gamma_b=" << r.gamma_b << " delta_r=" << r.delta_r);
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("RK4 error falls about 16x when the step halves", "[integrator][property]") {
    const ReducedParams r{0.9, 0.6, 0.7, 1.0, 1.0};
    IntegratorSettings coarse{.dt = 0.1, .refine = false};
    IntegratorSettings fine{.dt = 0.05, .refine = false};
    const double e1 = max_closed_form_gap(r, integrate_reduced(r, 5.0, coarse));
    const double e2 = max_closed_form_gap(r, integrate_reduced(r, 5.0, fine));
    const double ratio = e1 / e2;
    CHECK(ratio > 14.0);
    CHECK(ratio < 18.0);
}

TEST_CASE("broken log-slope over [10, 20]", "[integrator]") {
    const Trajectory traj = integrate_reduced(ReducedParams::symmetric(0.5, 0.0), 20.0, 0.01);
    CHECK_THAT(fitted_slope(traj, 10.0, 20.0), WithinRel(1.0, 0.01));
}

TEST_CASE("flow property: restart from the midpoint state", "[integrator][property]") {
    const ReducedParams r{0.7, 0.4, -0.6, 0.8, 1.0};
    const Trajectory whole = integrate_reduced(r, 8.0, 0.01);
    const std::size_t mid = 400;
    REQUIRE_THAT(whole.times[mid], WithinAbs(4.0, 1e-12));
    const Vec2 state{whole.amps[mid].a, whole.amps[mid].b};
    const Trajectory second = integrate_reduced(r, 4.0, 0.01, state);
    REQUIRE(second.size() == whole.size() - mid);
    for (std::size_t i = 0; i < second.size(); ++i) {
        CHECK(std::abs(second.amps[i].b - whole.amps[mid + i].b) < 1e-9 * (1.0 + std::abs(whole.amps[mid + i].b)));
        CHECK(std::abs(second.amps[i].a - whole.amps[mid + i].a) < 1e-9 * (1.0 + std::abs(whole.amps[mid + i].a)));
    }
}

TEST_CASE("trajectories are linear in the drive", "[integrator][property]") {
    const ReducedParams r1{0.7, 0.4, 0.3, 0.6, 1.0};
    ReducedParams r2 = r1;
    r2.eps_r *= 2.0;
    const Trajectory t1 = integrate_reduced(r1, 5.0, 0.01);
    const Trajectory t2 = integrate_reduced(r2, 5.0, 0.01);
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) {
        CHECK(std::abs(t2.amps[i].b - 2.0 * t1.amps[i].b) <= 1e-12 * (1.0 + std::abs(t2.amps[i].b)));
        CHECK(std::abs(t2.amps[i].a - 2.0 * t1.amps[i].a) <= 1e-12 * (1.0 + std::abs(t2.amps[i].a)));
        CHECK_THAT(t2.energies[i], WithinRel(4.0 * t1.energies[i], 1e-11) || WithinAbs(0.0, 1e-300));
    }
}

TEST_CASE("reported power matches the energy derivative", "[integrator]") {
    const ReducedParams r{0.6, 0.9, 0.4, 1.0, 1.0};
    const Trajectory traj = integrate_reduced(r, 4.0, 0.01);
    for (std::size_t i = 10; i < traj.size(); i += 50) {
        CHECK_THAT(traj.powers[i], WithinRel(power(r, traj.times[i]), 1e-7));
    }
}

TEST_CASE("integrate_full with zero drive stays at zero", "[integrator][full]") {
    PhysicalParams p = realize_reduced(ReducedParams::symmetric(1.5, 0.5), 10.0);
    p.drive_eps = 0.0;
    const Trajectory traj = integrate_full(p, 2.0, 0.01);
    CHECK(traj.has_aux);
    CHECK(traj.meta.model == "full");
    CHECK(traj.meta.time_units == "physical");
    for (const auto& s : traj.amps) {
        CHECK(s.a == Complex{});
        CHECK(s.b == Complex{});
        CHECK(s.c == Complex{});
    }
}

TEST_CASE("integrate_full matches the three-mode exponential", "[integrator][full][oracle]") {
    PhysicalParams p;
    p.Gamma = 1.3;
    p.kappa_a = 0.4;
    p.kappa_b = 0.2;
    p.kappa_c = 2.0;
    p.p_a = 0.9;
    p.p_b = 1.1;
    p.p_c_a = 0.7;
    p.p_c_b = 0.5;
    p.delta_a = 0.6;
    p.delta_b = -0.6;
    p.drive_eps = 0.8;
    const Trajectory traj = integrate_full(p, 3.0, 0.01);
    const oracle::FullRates f = rates_of(p);
    for (std::size_t i = 0; i < traj.size(); i += 37) {
        const auto o = oracle::full_solution(f, traj.times[i]);
        CHECK(std::abs(traj.amps[i].a - o[0]) < 1e-8 * (1.0 + std::abs(o[0])));
        CHECK(std::abs(traj.amps[i].b - o[1]) < 1e-8 * (1.0 + std::abs(o[1])));
        CHECK(std::abs(traj.amps[i].c - o[2]) < 1e-8 * (1.0 + std::abs(o[2])));
    }

    SECTION("realized reduced parameters") {
        const PhysicalParams q = realize_reduced(ReducedParams{1.5, 1.5, 0.5, 1.0, 1.0}, 10.0);
        const Trajectory tq = integrate_full(q, 1.0, 0.002);
        const oracle::FullRates fq = rates_of(q);
        for (std::size_t i = 0; i < tq.size(); i += 61) {
            const auto o = oracle::full_solution(fq, tq.times[i]);
            CHECK(std::abs(tq.amps[i].b - o[1]) < 1e-8 * (1.0 + std::abs(o[1])));
        }
    }
}

TEST_CASE("full model converges to the reduced closed form", "[integrator][full]") {
    const ReducedParams target{1.5, 1.5, 0.5, 1.0, 1.0};
    const double e10 = full_reduced_error(target, 10.0);
    const double e30 = full_reduced_error(target, 30.0);
    const double e100 = full_reduced_error(target, 100.0);
    const double e200 = full_reduced_error(target, 200.0);
    CHECK(e10 > e30);
    CHECK(e30 > e100);
    CHECK(e100 < 0.05);
    // Error is O(1/ratio): doubling the ratio roughly halves it.
    CHECK(e100 / e200 > 1.7);
    CHECK(e100 / e200 < 2.3);
}

TEST_CASE("stiff full model signals StepUnderflow", "[integrator][full]") {
    const PhysicalParams p = realize_reduced(ReducedParams{1.5, 1.5, 0.5, 1.0, 1.0}, 1e4);
    IntegratorSettings s{.dt = 0.01, .refine = true, .refine_tol = 1e-8, .min_dt = 0.004};
    try {
        (void)integrate_full(p, 0.1, s);
        FAIL("expected StepUnderflow");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::StepUnderflow);
    }
}

TEST_CASE("quench schedule validation", "[integrator][quench]") {
    CHECK_THROWS_AS(QuenchSchedule{}.validate(), Error);
    CHECK_THROWS_AS((QuenchSchedule{{{0.0, ReducedParams::symmetric(0.5, 0.0)}}}.validate()), Error);
    CHECK_THROWS_AS((QuenchSchedule{{{1.0, ReducedParams{-0.5, 0.5, 0.0, 1.0, 1.0}}}}.validate()), Error);
    const QuenchSchedule ok{{{1.5, ReducedParams::symmetric(0.5, 0.0)}, {2.0, ReducedParams::symmetric(0.5, 2.0)}}};
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.total_duration() == 3.5);
}

TEST_CASE("single-segment quench equals integrate_reduced", "[integrator][quench]") {
    const ReducedParams r{0.9, 0.5, 0.2, 1.0, 1.0};
    const Vec2 init{Complex{0.1, 0.2}, Complex{-0.3, 0.0}};
    const Trajectory q = integrate_quench(QuenchSchedule{{{6.0, r}}}, init, 0.01);
    const Trajectory d = integrate_reduced(r, 6.0, 0.01, init);
    REQUIRE(q.size() == d.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        CHECK(q.times[i] == d.times[i]);
        CHECK(q.amps[i].a == d.amps[i].a);
        CHECK(q.amps[i].b == d.amps[i].b);
    }
    CHECK(q.meta.model == "quench");
    CHECK(q.meta.switch_times.empty());
}

TEST_CASE("quench halts broken growth", "[integrator][quench]") {
    const QuenchSchedule sched{{{5.0, ReducedParams::symmetric(0.5, 0.0)}, {15.0, ReducedParams::symmetric(0.5, 2.0)}}};
    const Trajectory q = integrate_quench(sched, Vec2{}, 0.01);
    REQUIRE(q.meta.switch_times.size() == 1);
    CHECK_THAT(q.meta.switch_times[0], WithinAbs(5.0, 1e-12));

    SECTION("amplitudes are continuous and follow each segment's closed form") {
        const ModeAmplitudes at_switch = amplitudes(sched.segments[0].params, 5.0);
        const std::size_t k = 500;
        REQUIRE_THAT(q.times[k], WithinAbs(5.0, 1e-12));
        CHECK(std::abs(q.amps[k].b - at_switch.b) < 1e-8);
        const ModeAmplitudes later = amplitudes(sched.segments[1].params, 3.0, at_switch.a, at_switch.b);
        CHECK(std::abs(q.amps[k + 300].b - later.b) < 1e-7);
    }
    SECTION("slope over one decay time after the switch is not positive") {
        CHECK(fitted_slope(q, 5.0, 7.0) <= 0.0);
        CHECK(fitted_slope(q, 5.0, 20.0) < 0.0);
    }
    SECTION("post-switch envelope") {
        CHECK(q.meta.bounded_after_switch);
        const double e_switch = q.energies[500];
        const double e_steady = std::pow(1.0 / steady_scale(sched.segments[1].params), 2);
        const double post = *std::max_element(q.energies.begin() + 500, q.energies.end());
        CHECK(post <= std::max(e_switch, e_steady) * (1.0 + q.meta.overshoot_factor) * (1.0 + 1e-12));
        CHECK(q.meta.overshoot_factor >= 0.0);
    }
}

TEST_CASE("switching at the critical time caps the energy at E_max", "[integrator][quench]") {
    const ReducedParams broken = ReducedParams::symmetric(0.5, 0.0);
    const double t_crit = tcrit_exact(0.5, 0.0, 1000.0).value();
    const QuenchSchedule sched{{{t_crit, broken}, {10.0, ReducedParams::symmetric(0.5, 2.0)}}};
    const Trajectory q = integrate_quench(sched, Vec2{}, 0.001);
    std::size_t k = 0;
    while (q.times[k] < t_crit - 1e-9) {
        ++k;
    }
    CHECK_THAT(q.times[k], WithinAbs(t_crit, 1e-12));
    CHECK_THAT(q.energies[k], WithinRel(1000.0, 0.05));
}

TEST_CASE("trajectory CSV layout", "[integrator][io]") {
    std::ostringstream reduced;
    write_trajectory_csv(reduced, integrate_reduced(ReducedParams::symmetric(0.5, 0.0), 0.02, 0.01));
    std::istringstream in(reduced.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,re_a,im_a,re_b,im_b,energy,power");
    int rows = 0;
    while (std::getline(in, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 6);
        ++rows;
    }
    CHECK(rows == 3);

    std::ostringstream full;
    write_trajectory_csv(full, integrate_full(realize_reduced(ReducedParams::symmetric(1.5, 0.0), 10.0), 0.02, 0.01));
    CHECK(full.str().rfind("t,re_a,im_a,re_b,im_b,re_c,im_c,energy,power\n", 0) == 0);
}
