#include "epbattery/spectral.hpp"

#include "epbattery/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace epbattery {

namespace {

constexpr Complex kI{0.0, 1.0};

// Coarse scan resolution used to bracket the first sign change of the growth rate.
constexpr int kBoundaryScanPoints = 4001;

}  // namespace

DriftMatrix drift_matrix(const ReducedParams& r) {
    DriftMatrix h;
    h.entries = {Complex{r.delta_r, -r.gamma_a}, kI, kI, Complex{-r.delta_r, -r.gamma_b}};
    return h;
}

Spectrum eigensystem(const ReducedParams& r, double ep_tol) {
    Spectrum s;
    s.alpha = r.alpha();
    const Complex shifted{s.alpha, r.delta_r};
    s.omega = kI * std::sqrt(1.0 + shifted * shifted);

    const Complex center = -kI * (s.alpha + r.gamma_b);
    s.lambda_plus = center + s.omega;
    s.lambda_minus = center - s.omega;
    s.pi_lambda = s.lambda_plus * s.lambda_minus;
    s.delta_lambda = 2.0 * s.omega;

    s.eigvec_plus = {-s.alpha - kI * (r.delta_r + s.omega), Complex{1.0, 0.0}};
    s.eigvec_minus = {-s.alpha - kI * (r.delta_r - s.omega), Complex{1.0, 0.0}};
    s.defective = std::abs(s.omega) < ep_tol;
    return s;
}

std::string_view to_string(Regime regime) noexcept {
    switch (regime) {
        case Regime::Unbroken: return "Unbroken";
        case Regime::Broken: return "Broken";
        case Regime::ExceptionalPoint: return "ExceptionalPoint";
        case Regime::Boundary: return "Boundary";
    }
    return "Unknown";
}

std::optional<Regime> regime_from_string(std::string_view name) noexcept {
    for (Regime r : {Regime::Unbroken, Regime::Broken, Regime::ExceptionalPoint, Regime::Boundary}) {
        if (to_string(r) == name) {
            return r;
        }
    }
    return std::nullopt;
}

PhaseRegime classify(const Spectrum& s, double tol, double ep_tol) {
    PhaseRegime out;
    out.growth_rate = std::max(growth_of(s.lambda_plus), growth_of(s.lambda_minus));
    if (std::abs(s.omega) < ep_tol) {
        out.tag = Regime::ExceptionalPoint;
    } else if (out.growth_rate < -tol) {
        out.tag = Regime::Unbroken;
    } else if (out.growth_rate > tol) {
        out.tag = Regime::Broken;
    } else {
        out.tag = Regime::Boundary;
    }
    return out;
}

EpDiagnostics ep_conditions(double gamma_a, double gamma_b, double delta_r, double tol) {
    EpDiagnostics d;
    d.damping_balanced = std::abs(gamma_a - gamma_b) < tol;
    d.detuning_matched = std::abs(std::abs(delta_r) - 1.0) < tol;
    d.is_ep = d.damping_balanced && d.detuning_matched;

    if (d.is_ep) {
        d.reason = "exceptional point: gamma_a == gamma_b and |delta_r| == 1";
    } else if (!d.damping_balanced && std::abs(delta_r) < tol) {
        // Im(Omega^2) vanishes at delta_r = 0 but Re leaves (gamma_a - gamma_b)^2 + 4 > 0.
        d.reason = "no real solution: delta_r = 0 leaves (gamma_a - gamma_b)^2 + 4 = 0, which cannot vanish";
    } else if (!d.damping_balanced) {
        d.reason = "gamma_a != gamma_b: a coalescence needs balanced damping";
    } else if (std::abs(delta_r) < tol) {
        d.reason = "no real solution: delta_r = 0 gives (gamma_a - gamma_b)^2 + 4 = 4, which cannot vanish";
    } else {
        d.reason = "|delta_r| != 1: balanced damping coalesces only at delta_r = +/-1";
    }
    return d;
}

std::array<double, 4> hurwitz_quartic(const ReducedParams& r) {
    // det(-iH - s) = s^2 + a1 s + a0
    const double a1 = r.gamma_a + r.gamma_b;
    const Complex a0{r.delta_r * r.delta_r + r.gamma_a * r.gamma_b - 1.0,
                     r.delta_r * (r.gamma_b - r.gamma_a)};
    // p(s) * conj-coefficient p(s); a1 is real.
    return {2.0 * a1, a1 * a1 + 2.0 * a0.real(), 2.0 * a1 * a0.real(), std::norm(a0)};
}

bool routh_hurwitz_stable(const ReducedParams& r) {
    const auto [b1, b2, b3, b4] = hurwitz_quartic(r);
    if (!(b1 > 0.0 && b2 > 0.0 && b3 > 0.0 && b4 > 0.0)) {
        return false;
    }
    // Hurwitz determinants of order 2 and 3 for a monic quartic.
    const double h2 = b1 * b2 - b3;
    const double h3 = b3 * h2 - b1 * b1 * b4;
    return h2 > 0.0 && h3 > 0.0;
}

AlphaWindow default_alpha_window(double gamma_b) { return {-0.5 * gamma_b, 50.0}; }

double growth_at(double gamma_b, double alpha, double delta_r) {
    const Complex shifted{alpha, delta_r};
    return std::sqrt(1.0 + shifted * shifted).real() - alpha - gamma_b;
}

std::optional<double> boundary_alpha(double gamma_b, double delta_r) {
    return boundary_alpha(gamma_b, delta_r, default_alpha_window(gamma_b));
}

std::optional<double> boundary_alpha(double gamma_b, double delta_r, AlphaWindow window) {
    if (!(gamma_b > 0.0)) {
        throw Error(ErrorCode::InvalidParameter, "boundary_alpha requires gamma_b > 0");
    }
    if (!(window.hi > window.lo)) {
        throw Error(ErrorCode::InvalidParameter, "empty alpha window");
    }

    auto g = [&](double alpha) { return growth_at(gamma_b, alpha, delta_r); };

    const double step = (window.hi - window.lo) / (kBoundaryScanPoints - 1);
    double prev_alpha = window.lo;
    double prev_g = g(prev_alpha);
    bool any_broken = prev_g > 0.0;
    for (int i = 1; i < kBoundaryScanPoints; ++i) {
        const double alpha = (i == kBoundaryScanPoints - 1) ? window.hi : window.lo + i * step;
        const double cur_g = g(alpha);
        if (prev_g > 0.0 && cur_g <= 0.0) {
            double lo = prev_alpha;
            double hi = alpha;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
                const double mid = 0.5 * (lo + hi);
                if (g(mid) > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return 0.5 * (lo + hi);
        }
        any_broken = any_broken || cur_g > 0.0;
        prev_alpha = alpha;
        prev_g = cur_g;
    }
    if (any_broken) {
        throw Error(ErrorCode::NoBracket,
                    "growth rate stays positive up to alpha = " + std::to_string(window.hi));
    }
    return std::nullopt;
}

}  // namespace epbattery
