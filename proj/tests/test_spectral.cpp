#include "catch_amalgamated.hpp"

#include "epbattery/error.hpp"
#include "epbattery/spectral.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace epbattery;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr Complex kI{0.0, 1.0};

double cabs_diff(Complex x, Complex y) { return std::abs(x - y); }

ReducedParams random_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double gamma_b = 2.0 * u(rng);
    const double alpha = -0.5 * gamma_b + 3.0 * u(rng);
    const double delta = 6.0 * (u(rng) - 0.5);
    return ReducedParams::from_asymmetry(gamma_b, alpha, delta);
}

/// First sign change of the quadratic-root growth rate in alpha, by dense scan
/// and bisection.
double scan_boundary(double gamma_b, double delta_r, double lo, double hi) {
    auto g = [&](double a) { return oracle::growth(gamma_b + 2.0 * a, gamma_b, delta_r); };
    const int n = 20000;
    double prev = lo;
    for (int i = 1; i <= n; ++i) {
        const double a = lo + (hi - lo) * i / n;
        if (g(prev) > 0.0 && g(a) <= 0.0) {
            double l = prev;
            double h = a;
            for (int k = 0; k < 100; ++k) {
                const double m = 0.5 * (l + h);
                (g(m) > 0.0 ? l : h) = m;
            }
            return 0.5 * (l + h);
        }
        prev = a;
    }
    return std::nan("");
}

}  // namespace

TEST_CASE("drift_matrix entries", "[spectral]") {
    SECTION("no damping, no detuning") {
        const DriftMatrix h = drift_matrix(ReducedParams::symmetric(0.0, 0.0));
        CHECK(h(0, 0) == Complex{0.0, 0.0});
        CHECK(h(0, 1) == kI);
        CHECK(h(1, 0) == kI);
        CHECK(h(1, 1) == Complex{0.0, 0.0});
    }
    SECTION("gamma_a=1, gamma_b=0.5, delta_r=2") {
        const DriftMatrix h = drift_matrix(ReducedParams{1.0, 0.5, 2.0, 1.0, 1.0});
        CHECK(h(0, 0) == Complex{2.0, -1.0});
        CHECK(h(0, 1) == kI);
        CHECK(h(1, 0) == kI);
        CHECK(h(1, 1) == Complex{-2.0, -0.5});
    }
}

TEST_CASE("eigensystem matches a quadratic eigen-solve of the drift matrix", "[spectral][oracle]") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const ReducedParams r = random_params(rng);
        const Spectrum s = eigensystem(r);
        const auto [hi, lo] = oracle::eigenvalues(oracle::drift(r.gamma_a, r.gamma_b, r.delta_r));
        // Compare as sets.
        const double direct = cabs_diff(s.lambda_plus, hi) + cabs_diff(s.lambda_minus, lo);
        const double swapped = cabs_diff(s.lambda_plus, lo) + cabs_diff(s.lambda_minus, hi);
        CHECK(std::min(direct, swapped) < 1e-7 * (1.0 + std::abs(hi)));
        // The + branch carries the larger growth rate.
        CHECK(s.lambda_plus.imag() >= s.lambda_minus.imag() - 1e-12);
    }
}

TEST_CASE("eigensystem examples", "[spectral]") {
    SECTION("alpha=0, delta_r=+/-1: coalescence") {
        for (double d : {-1.0, 1.0}) {
            const Spectrum s = eigensystem(ReducedParams::symmetric(0.5, d));
            CHECK(std::abs(s.omega) < 1e-15);
            CHECK(s.defective);
            CHECK(cabs_diff(s.lambda_plus, Complex{0.0, -0.5}) < 1e-15);
            CHECK(cabs_diff(s.lambda_minus, Complex{0.0, -0.5}) < 1e-15);
            CHECK(cabs_diff(s.eigvec_plus[0], -kI * d) < 1e-15);
            CHECK(cabs_diff(s.eigvec_minus[0], -kI * d) < 1e-15);
            CHECK(s.eigvec_plus[1] == Complex{1.0, 0.0});
        }
    }
    SECTION("alpha=0, delta_r=0: Omega = i") {
        const Spectrum s = eigensystem(ReducedParams::symmetric(0.5, 0.0));
        CHECK(cabs_diff(s.omega, kI) < 1e-15);
        CHECK(cabs_diff(s.lambda_plus, Complex{0.0, 0.5}) < 1e-15);
        CHECK(cabs_diff(s.lambda_minus, Complex{0.0, -1.5}) < 1e-15);
        CHECK_FALSE(s.defective);
    }
    SECTION("alpha=0, delta_r=2, gamma_b=0.5") {
        const Spectrum s = eigensystem(ReducedParams::symmetric(0.5, 2.0));
        const auto [hi, lo] = oracle::eigenvalues(oracle::drift(0.5, 0.5, 2.0));
        CHECK(cabs_diff(s.lambda_plus, Complex{-std::sqrt(3.0), -0.5}) < 1e-14);
        CHECK(cabs_diff(s.lambda_minus, Complex{std::sqrt(3.0), -0.5}) < 1e-14);
        const double set_err = std::min(cabs_diff(s.lambda_plus, hi) + cabs_diff(s.lambda_minus, lo),
                                         cabs_diff(s.lambda_plus, lo) + cabs_diff(s.lambda_minus, hi));
        CHECK(set_err < 1e-14);
    }
}

TEST_CASE("Spectrum invariants", "[spectral][property]") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const ReducedParams r = random_params(rng);
        const Spectrum s = eigensystem(r);
        const DriftMatrix h = drift_matrix(r);
        const double scale = 1.0 + std::abs(s.lambda_plus) + std::abs(s.lambda_minus);
        CHECK(cabs_diff(s.lambda_plus + s.lambda_minus, -2.0 * kI * (s.alpha + r.gamma_b)) < 1e-12 * scale);
        CHECK(cabs_diff(s.delta_lambda, 2.0 * s.omega) < 1e-12 * scale);
        CHECK(s.lambda_minus.imag() <= 1e-12);
        CHECK(cabs_diff(s.lambda_plus + s.lambda_minus, h.trace()) < 1e-12 * scale);
        CHECK(cabs_diff(s.pi_lambda, h.determinant()) < 1e-12 * scale * scale);

        if (std::abs(s.omega) > kEpTol) {
            for (const auto& [lambda, v] : {std::pair{s.lambda_plus, s.eigvec_plus}, std::pair{s.lambda_minus, s.eigvec_minus}}) {
                const Vec2 hv = h.apply(v);
                const double residual = std::abs(hv[0] - lambda * v[0]) + std::abs(hv[1] - lambda * v[1]);
                CHECK(residual < 1e-10 * (1.0 + std::abs(v[0])) * scale);
            }
        }
    }
}

TEST_CASE("growth rate at alpha=0 follows sqrt(1 - delta_r^2) - gamma_b", "[spectral][property]") {
    for (double gamma_b : {0.2, 0.5, 1.0, 1.5}) {
        for (int i = 0; i <= 600; ++i) {
            const double d = -3.0 + 0.01 * i;
            const PhaseRegime p = classify(eigensystem(ReducedParams::symmetric(gamma_b, d)));
            const double expected = std::sqrt(std::max(0.0, 1.0 - d * d)) - gamma_b;
            CHECK_THAT(p.growth_rate, WithinAbs(expected, 1e-7));
        }
    }
}

TEST_CASE("branch swap leaves the eigenvalue set and the classification unchanged", "[spectral][property]") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 500; ++trial) {
        const ReducedParams r = random_params(rng);
        const Spectrum s = eigensystem(r);
        Spectrum swapped = s;
        swapped.omega = -s.omega;
        swapped.lambda_plus = s.lambda_minus;
        swapped.lambda_minus = s.lambda_plus;
        swapped.delta_lambda = -s.delta_lambda;
        const PhaseRegime a = classify(s);
        const PhaseRegime b = classify(swapped);
        CHECK(a.tag == b.tag);
        CHECK(a.growth_rate == b.growth_rate);
        CHECK(swapped.pi_lambda == s.pi_lambda);
    }
}

TEST_CASE("classify examples", "[spectral]") {
    const PhaseRegime broken = classify(eigensystem(ReducedParams::symmetric(0.5, 0.0)));
    CHECK(broken.tag == Regime::Broken);
    CHECK_THAT(broken.growth_rate, WithinAbs(0.5, 1e-15));
    // Direct eigen-solve.
    CHECK_THAT(oracle::growth(0.5, 0.5, 0.0), WithinAbs(0.5, 1e-14));

    CHECK(classify(eigensystem(ReducedParams::symmetric(1.5, 0.0))).tag == Regime::Unbroken);
    CHECK(classify(eigensystem(ReducedParams::symmetric(0.5, 1.0))).tag == Regime::ExceptionalPoint);
    CHECK(classify(eigensystem(ReducedParams::symmetric(0.5, -1.0))).tag == Regime::ExceptionalPoint);
    // gamma_b = 1 at delta_r = 0: growth exactly zero.
    CHECK(classify(eigensystem(ReducedParams::symmetric(1.0, 0.0))).tag == Regime::Boundary);
}

TEST_CASE("regime names round-trip", "[spectral]") {
    for (Regime r : {Regime::Unbroken, Regime::Broken, Regime::ExceptionalPoint, Regime::Boundary}) {
        CHECK(regime_from_string(to_string(r)) == r);
    }
    CHECK_FALSE(regime_from_string("Sideways").has_value());
}

TEST_CASE("ep_conditions", "[spectral]") {
    const EpDiagnostics yes = ep_conditions(0.5, 0.5, 1.0);
    CHECK(yes.is_ep);
    CHECK(ep_conditions(0.5, 0.5, -1.0).is_ep);

    const EpDiagnostics unbalanced = ep_conditions(0.5, 0.6, 1.0);
    CHECK_FALSE(unbalanced.is_ep);
    CHECK_FALSE(unbalanced.damping_balanced);
    CHECK(unbalanced.detuning_matched);
    CHECK_THAT(unbalanced.reason, Catch::Matchers::ContainsSubstring("gamma_a != gamma_b"));

    const EpDiagnostics centered = ep_conditions(0.5, 0.5, 0.0);
    CHECK_FALSE(centered.is_ep);
    CHECK_THAT(centered.reason, Catch::Matchers::ContainsSubstring("no real solution"));
    CHECK_THAT(centered.reason, Catch::Matchers::ContainsSubstring("cannot vanish"));

    const EpDiagnostics off = ep_conditions(0.5, 0.5, 0.7);
    CHECK_FALSE(off.is_ep);
    CHECK_THAT(off.reason, Catch::Matchers::ContainsSubstring("|delta_r| != 1"));
}

TEST_CASE("Routh-Hurwitz examples", "[spectral]") {
    CHECK(routh_hurwitz_stable(ReducedParams::symmetric(1.5, 0.0)));
    CHECK_FALSE(routh_hurwitz_stable(ReducedParams::symmetric(0.5, 0.0)));
    // Sign of the quadratic-root growth rate.
    CHECK(oracle::growth(1.5, 1.5, 0.0) < 0.0);
    CHECK(oracle::growth(0.5, 0.5, 0.0) > 0.0);
}

TEST_CASE("Hurwitz quartic has the roots of p(s) and its coefficient conjugate", "[spectral][oracle]") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const ReducedParams r = random_params(rng);
        const auto c = hurwitz_quartic(r);
        const Spectrum s = eigensystem(r);
        // s = -i lambda is a root of the quartic.
        for (Complex lambda : {s.lambda_plus, s.lambda_minus}) {
            const Complex z = -kI * lambda;
            const Complex q = z * z * z * z + c[0] * z * z * z + c[1] * z * z + c[2] * z + c[3];
            CHECK(std::abs(q) < 1e-9 * std::pow(1.0 + std::abs(z), 4));
        }
    }
}

TEST_CASE("classify and routh_hurwitz_stable agree away from the boundary", "[spectral][property]") {
    std::mt19937_64 rng(19);
    int compared = 0;
    for (int trial = 0; trial < 40000; ++trial) {
        const ReducedParams r = random_params(rng);
        const PhaseRegime p = classify(eigensystem(r));
        if (std::abs(p.growth_rate) < 1e-6) {
            continue;
        }
        CHECK((p.growth_rate < 0.0) == routh_hurwitz_stable(r));
        ++compared;
    }
    CHECK(compared > 39000);
}

TEST_CASE("boundary_alpha", "[spectral][boundary]") {
    SECTION("closed form (1 - gamma_b^2) / (2 gamma_b) at delta_r = 0") {
        const auto a = boundary_alpha(0.5, 0.0);
        REQUIRE(a.has_value());
        CHECK_THAT(*a, WithinAbs(0.75, 1e-9));
        CHECK_THAT(*a, WithinAbs(scan_boundary(0.5, 0.0, -0.25, 50.0), 1e-9));

        const auto b = boundary_alpha(1.0, 0.0);
        REQUIRE(b.has_value());
        CHECK_THAT(*b, WithinAbs(0.0, 1e-9));
    }
    SECTION("detuned point agrees with a scan of the quadratic-root growth rate") {
        const auto a = boundary_alpha(0.5, 2.0);
        REQUIRE(a.has_value());
        const double oracle_alpha = scan_boundary(0.5, 2.0, -0.25, 50.0);
        CHECK_THAT(*a, WithinAbs(oracle_alpha, 1e-9));
    }
    SECTION("unbroken throughout the window gives none") {
        CHECK_FALSE(boundary_alpha(0.5, 2.0, AlphaWindow{0.0, 3.0}).has_value());
    }
    SECTION("broken throughout the window throws NoBracket") {
        try {
            (void)boundary_alpha(0.5, 0.0, AlphaWindow{0.0, 0.5});
            FAIL("expected NoBracket");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NoBracket);
        }
    }
    SECTION("gamma_b must be positive") {
        CHECK_THROWS_AS(boundary_alpha(0.0, 0.0), Error);
    }
    SECTION("boundary points have vanishing growth") {
        for (double gamma_b : {0.3, 0.5, 1.0, 1.5, 2.5}) {
            for (double d = -3.0; d <= 3.0; d += 0.25) {
                const auto a = boundary_alpha(gamma_b, d);
                REQUIRE(a.has_value());
                CHECK(std::abs(growth_at(gamma_b, *a, d)) < 1e-6);
                CHECK(std::abs(classify(eigensystem(ReducedParams::from_asymmetry(gamma_b, *a, d))).growth_rate) <
                      1e-6);
            }
        }
    }
}
