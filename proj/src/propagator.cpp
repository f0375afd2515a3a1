#include "epbattery/propagator.hpp"

#include "epbattery/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace epbattery {

namespace {

constexpr Complex kI{0.0, 1.0};

// Below this |rate * t| the exponential integrals are summed as power series.
constexpr double kSmallArgument = 0.1;
constexpr int kSeriesTerms = 24;

// 8-point Gauss-Legendre rule on [-1, 1].
constexpr std::array<double, 8> kGlNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

/// int_0^t e^{rate s} ds
Complex exp_integral(Complex rate, double t) {
    const Complex z = rate * t;
    if (std::abs(z) < kSmallArgument) {
        Complex term = t;  // rate^k t^{k+1} / (k+1)!
        Complex sum = term;
        for (int k = 1; k < kSeriesTerms; ++k) {
            term *= z / static_cast<double>(k + 1);
            sum += term;
        }
        return sum;
    }
    return (std::exp(z) - 1.0) / rate;
}

/// int_0^t s e^{rate s} ds = t e^{at}/a - (e^{at} - 1)/a^2
Complex ramp_integral(Complex rate, double t) {
    const Complex z = rate * t;
    if (std::abs(z) < kSmallArgument) {
        // sum_k rate^k t^{k+2} / (k! (k+2))
        Complex power = t * t;  // rate^k t^{k+2} / k!
        Complex sum = power / 2.0;
        for (int k = 1; k < kSeriesTerms; ++k) {
            power *= z / static_cast<double>(k);
            sum += power / static_cast<double>(k + 2);
        }
        return sum;
    }
    const Complex e = std::exp(z);
    return t * e / rate - (e - 1.0) / (rate * rate);
}

/// H_r - lambda_c I, with lambda_c = -i(alpha + gamma_b).
std::array<Complex, 4> centered_drift(const ReducedParams& r) {
    const double alpha = r.alpha();
    return {Complex{r.delta_r, -alpha}, kI, kI, Complex{-r.delta_r, alpha}};
}

/// int_0^t M(s) e1 ds as a Taylor series in -i H_r, for small ||H_r|| t.
Vec2 particular_series(const DriftMatrix& h, double t) {
    Vec2 term{Complex{t, 0.0}, Complex{}};  // (-iH)^k e1 t^{k+1}/(k+1)!
    Vec2 sum = term;
    for (int k = 1; k < 40; ++k) {
        const Vec2 hv = h.apply(term);
        const double f = t / static_cast<double>(k + 1);
        term = {-kI * hv[0] * f, -kI * hv[1] * f};
        sum[0] += term[0];
        sum[1] += term[1];
        if (std::abs(term[0]) + std::abs(term[1]) < 1e-18 * (std::abs(sum[0]) + std::abs(sum[1]))) {
            break;
        }
    }
    return sum;
}

/// int_0^t M(s) e1 ds by composite Gauss-Legendre.
Vec2 particular_quadrature(const ReducedParams& r, const Spectrum& s, double t) {
    const double rate = std::max({std::abs(s.lambda_plus), std::abs(s.lambda_minus), 1.0});
    const int panels = std::max(4, static_cast<int>(std::ceil(2.0 * rate * t)));
    const double width = t / panels;
    Vec2 sum{};
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * width;
        for (std::size_t q = 0; q < kGlNodes.size(); ++q) {
            const Propagator2 m = propagator(r, mid + 0.5 * width * kGlNodes[q]);
            const double w = 0.5 * width * kGlWeights[q];
            sum[0] += w * m.m11;
            sum[1] += w * m.m21;
        }
    }
    return sum;
}

double matrix_bound(const DriftMatrix& h) {
    double bound = 0.0;
    for (const Complex& e : h.entries) {
        bound = std::max(bound, std::abs(e));
    }
    return 2.0 * bound;
}

void require_time(double t) {
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw Error(ErrorCode::InvalidParameter, "time must be finite and >= 0");
    }
}

}  // namespace

Complex divided_difference(const Spectrum& s, double tau) {
    const Complex x = s.omega * tau;
    if (std::abs(x) < kSeriesTol) {
        // -i sin(x)/x tau e^{-i lambda_c tau}, through x^4
        const Complex x2 = x * x;
        const Complex sinc = 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
        return std::exp(-kI * s.lambda_center() * tau) * (-kI * tau) * sinc;
    }
    return (std::exp(-kI * s.lambda_plus * tau) - std::exp(-kI * s.lambda_minus * tau)) / (2.0 * s.omega);
}

Propagator2 propagator(const ReducedParams& r, double tau) {
    const Spectrum s = eigensystem(r);
    const auto n = centered_drift(r);

    if (std::abs(s.omega) < kEpSwitch) {
        const Complex e0 = std::exp(-kI * s.lambda_center() * tau);
        const Complex k = -kI * tau;
        return {e0 * (1.0 + k * n[0]), e0 * k * n[1], e0 * k * n[2], e0 * (1.0 + k * n[3])};
    }

    // Sylvester: M = (f + g)/2 I + D (H - lambda_c I), D = (f - g)/(2 Omega)
    const Complex f = std::exp(-kI * s.lambda_plus * tau);
    const Complex g = std::exp(-kI * s.lambda_minus * tau);
    const Complex avg = 0.5 * (f + g);
    const Complex d = divided_difference(s, tau);
    return {avg + d * n[0], d * n[1], d * n[2], avg + d * n[3]};
}

Vec2 reduced_rhs(const ReducedParams& r, const Vec2& state) {
    const auto& [a, b] = state;
    return {Complex{-r.gamma_a, -r.delta_r} * a + b + r.eps_r, a + Complex{-r.gamma_b, r.delta_r} * b};
}

Vec2 steady_state(const ReducedParams& r) {
    const DriftMatrix h = drift_matrix(r);
    const Complex det = h.determinant();
    if (std::abs(det) <= kSingularProductTol) {
        throw Error(ErrorCode::DegenerateSpectrum, "drift matrix is singular: no steady state");
    }
    // -i H^{-1} (eps_r, 0)
    return {-kI * h(1, 1) / det * r.eps_r, kI * h(1, 0) / det * r.eps_r};
}

ModeAmplitudes amplitudes(const ReducedParams& r, double t, Complex a0, Complex b0) {
    require_time(t);
    ModeAmplitudes out{a0, b0, false};
    if (t == 0.0) {
        return out;
    }

    const Propagator2 m = propagator(r, t);
    const Vec2 hom = m.apply({a0, b0});

    const DriftMatrix h = drift_matrix(r);
    const Spectrum s = eigensystem(r);
    Vec2 part{};
    if (matrix_bound(h) * t < 0.5) {
        part = particular_series(h, t);
    } else if (std::abs(s.omega) < kEpSwitch) {
        // int e^{-i l0 s}(I - i N s) e1 ds, N e1 = (delta_r - i alpha, i)
        const Complex rate = -kI * s.lambda_center();
        const Complex j0 = exp_integral(rate, t);
        const Complex j1 = ramp_integral(rate, t);
        const auto n = centered_drift(r);
        part = {j0 - kI * j1 * n[0], -kI * j1 * n[2]};
    } else if (std::abs(s.pi_lambda) > kSingularProductTol) {
        // i H^{-1} (M(t) - I) e1
        const Complex det = h.determinant();
        const Complex v0 = m.m11 - 1.0;
        const Complex v1 = m.m21;
        part = {kI * (h(1, 1) * v0 - h(0, 1) * v1) / det, kI * (h(0, 0) * v1 - h(1, 0) * v0) / det};
    } else {
        part = particular_quadrature(r, s, t);
        out.quadrature_fallback = true;
    }

    out.a = hom[0] + r.eps_r * part[0];
    out.b = hom[1] + r.eps_r * part[1];
    return out;
}

double energy_general(const ReducedParams& r, double t) {
    require_time(t);
    const Spectrum s = eigensystem(r);
    if (std::abs(s.omega) < kEpSwitch) {
        throw Error(ErrorCode::DegenerateSpectrum, "coalescent spectrum: use energy_ep");
    }
    if (std::abs(s.pi_lambda) <= kSingularProductTol) {
        return std::norm(amplitudes(r, t).b);
    }
    const Complex& lp = s.lambda_plus;
    const Complex& lm = s.lambda_minus;
    const Complex num = lp * std::exp(-kI * lm * t) - lm * std::exp(-kI * lp * t) - s.delta_lambda;
    return r.eps_r * r.eps_r * std::norm(num / (s.pi_lambda * s.delta_lambda));
}

double energy_ep(const ReducedParams& r, double t) {
    require_time(t);
    const EpDiagnostics ep = ep_conditions(r.gamma_a, r.gamma_b, r.delta_r);
    if (!ep.is_ep) {
        throw Error(ErrorCode::NotAtEP, ep.reason);
    }
    // m21 = tau e^{-i l0 tau}; the closed form of its integral is the ramp integral.
    const Complex lambda0 = -kI * 0.5 * (r.gamma_a + r.gamma_b);
    return r.eps_r * r.eps_r * std::norm(ramp_integral(-kI * lambda0, t));
}

double energy_symmetric(const ReducedParams& r, double t) {
    require_time(t);
    if (std::abs(r.alpha()) >= kBoundaryTol) {
        throw Error(ErrorCode::AsymmetricParams, "energy_symmetric requires gamma_a == gamma_b");
    }
    const double gamma = 0.5 * (r.gamma_a + r.gamma_b);
    const double k = r.delta_r * r.delta_r + gamma * gamma - 1.0;
    if (std::abs(k) <= kSingularProductTol) {
        // K = -Pi_lambda: the steady-state amplitude diverges, bracket and prefactor both vanish.
        return std::norm(amplitudes(r, t).b);
    }

    const double w2 = 1.0 - r.delta_r * r.delta_r;
    const double w = std::sqrt(std::abs(w2));
    const double x = w * t;
    const double decay = std::exp(-gamma * t);
    double damped = 0.0;  // e^{-gamma t} (gamma sin(wt)/w + cos(wt)), hyperbolic when w2 > 0
    if (std::abs(x) < kSeriesTol) {
        const double x2 = w2 >= 0.0 ? x * x : -x * x;
        const double sin_over_w = t * (1.0 + x2 / 6.0 + x2 * x2 / 120.0);
        const double cos_term = 1.0 + x2 / 2.0 + x2 * x2 / 24.0;
        damped = decay * (gamma * sin_over_w + cos_term);
    } else if (w2 >= 0.0) {
        const double up = std::exp((w - gamma) * t);
        const double down = std::exp(-(w + gamma) * t);
        damped = gamma * (up - down) / (2.0 * w) + 0.5 * (up + down);
    } else {
        damped = decay * (gamma * std::sin(x) / w + std::cos(x));
    }
    const double bracket = 1.0 - damped;
    return (r.eps_r / k) * (r.eps_r / k) * bracket * bracket;
}

double energy_asymptotic_broken(const ReducedParams& r, double t) {
    require_time(t);
    if (std::abs(r.alpha()) >= kBoundaryTol) {
        throw Error(ErrorCode::AsymmetricParams, "asymptotic form requires gamma_a == gamma_b");
    }
    const double gamma = 0.5 * (r.gamma_a + r.gamma_b);
    const double w2 = 1.0 - r.delta_r * r.delta_r;
    const double w = w2 > 0.0 ? std::sqrt(w2) : 0.0;
    if (!(w > gamma)) {
        throw Error(ErrorCode::NotBroken, "asymptotic form requires |Omega| > gamma");
    }
    const double k = r.delta_r * r.delta_r + gamma * gamma - 1.0;
    const double shape = (gamma + w) / (2.0 * w);
    return (r.eps_r / k) * (r.eps_r / k) * shape * shape * std::exp(2.0 * (w - gamma) * t);
}

EnergyRecord evaluate(const ReducedParams& r, double t, Complex a0, Complex b0) {
    const ModeAmplitudes amp = amplitudes(r, t, a0, b0);
    const Vec2 rate = reduced_rhs(r, {amp.a, amp.b});
    EnergyRecord rec;
    rec.t = t;
    rec.a = amp.a;
    rec.b = amp.b;
    rec.energy = std::norm(amp.b);
    rec.power = 2.0 * (std::conj(amp.b) * rate[1]).real();
    rec.quadrature_fallback = amp.quadrature_fallback;
    return rec;
}

double power(const ReducedParams& r, double t, Complex a0, Complex b0) { return evaluate(r, t, a0, b0).power; }

std::vector<EnergyRecord> sample(const ReducedParams& r, std::span<const double> times, Complex a0, Complex b0) {
    std::vector<EnergyRecord> out;
    out.reserve(times.size());
    for (double t : times) {
        out.push_back(evaluate(r, t, a0, b0));
    }
    return out;
}

}  // namespace epbattery
