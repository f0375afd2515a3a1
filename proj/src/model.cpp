#include "epbattery/model.hpp"

#include "epbattery/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace epbattery {

namespace {

constexpr double kDetuningRelTol = 1e-12;

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw Error(ErrorCode::InvalidParameter, std::string(name) + " must be finite");
    }
}

void require_nonnegative(double v, const char* name) {
    require_finite(v, name);
    if (v < 0.0) {
        throw Error(ErrorCode::InvalidParameter, std::string(name) + " must be >= 0");
    }
}

}  // namespace

void PhysicalParams::validate() const {
    require_finite(delta_a, "delta_a");
    require_finite(delta_b, "delta_b");
    require_finite(delta_c, "delta_c");
    require_nonnegative(kappa_a, "kappa_a");
    require_nonnegative(kappa_b, "kappa_b");
    require_nonnegative(kappa_c, "kappa_c");
    require_nonnegative(Gamma, "Gamma");
    require_nonnegative(drive_eps, "drive_eps");
    for (const Complex& p : {p_a, p_b, p_c_a, p_c_b}) {
        require_finite(p.real(), "coupling weight");
        require_finite(p.imag(), "coupling weight");
    }
}

void ReducedParams::validate() const {
    require_nonnegative(gamma_a, "gamma_a");
    require_nonnegative(gamma_b, "gamma_b");
    require_finite(delta_r, "delta_r");
    require_nonnegative(eps_r, "eps_r");
    require_finite(gamma_eff, "gamma_eff");
    if (gamma_eff <= 0.0) {
        throw Error(ErrorCode::InvalidParameter, "gamma_eff must be > 0");
    }
}

double separation_ratio(const PhysicalParams& p) {
    const double denom = std::max({p.kappa_a + p.shared_rate_a(), p.kappa_b + p.shared_rate_b(),
                                   std::abs(p.delta_a), std::abs(p.delta_b)});
    if (denom == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return p.aux_total_rate() / denom;
}

Reduction reduce_with_diagnostics(const PhysicalParams& p) {
    p.validate();

    if (p.p_a == Complex{} || p.p_b == Complex{}) {
        throw Error(ErrorCode::ZeroCoupling, "p_a and p_b must be nonzero for the reduction");
    }
    const Complex mu_a = p.mu_a();
    const Complex mu_b = p.mu_b();
    if (mu_a == Complex{} || mu_b == Complex{} || p.Gamma == 0.0) {
        throw Error(ErrorCode::ZeroCoupling, "auxiliary couplings p_c^a, p_c^b and Gamma must be nonzero");
    }
    if (p.delta_c != 0.0) {
        throw Error(ErrorCode::NonzeroAuxDetuning, "delta_c must be exactly 0");
    }
    const double detuning_scale = std::max(std::abs(p.delta_a), std::abs(p.delta_b));
    if (std::abs(p.delta_a + p.delta_b) > kDetuningRelTol * detuning_scale) {
        throw Error(ErrorCode::AsymmetricDetuning, "delta_a must equal -delta_b");
    }

    const double aux_rate = p.aux_total_rate();
    if (!(aux_rate > 0.0)) {
        throw Error(ErrorCode::InvalidParameter, "kappa_c + Gamma_c^a + Gamma_c^b must be > 0");
    }

    Reduction out;
    auto& diag = out.diagnostics;
    diag.gamma_eff_bare = p.Gamma * p.Gamma / aux_rate;
    diag.mu_scale = std::abs(mu_a) * std::abs(mu_b);
    diag.battery_phase = std::arg(mu_b) - std::arg(mu_a);
    diag.separation_ratio = separation_ratio(p);

    // Eliminating c adds Gamma_eff * (|mu_a|^2 a + mu_a conj(mu_b) b) to da/dt and the
    // mirror term to db/dt. The cross term magnitude sets the time scale.
    const double rate = diag.gamma_eff_bare * diag.mu_scale;
    auto& r = out.params;
    r.gamma_eff = rate;
    r.gamma_a = (p.kappa_a + p.shared_rate_a() - std::norm(mu_a) * diag.gamma_eff_bare) / rate;
    r.gamma_b = (p.kappa_b + p.shared_rate_b() - std::norm(mu_b) * diag.gamma_eff_bare) / rate;
    r.delta_r = p.delta_a / rate;
    r.eps_r = p.drive_eps / rate;

    if (r.gamma_a < 0.0 || r.gamma_b < 0.0) {
        throw Error(ErrorCode::NegativeDamping,
                    "reduced damping is negative (gamma_a=" + std::to_string(r.gamma_a) +
                        ", gamma_b=" + std::to_string(r.gamma_b) + ")");
    }
    return out;
}

ReducedParams reduce(const PhysicalParams& p) { return reduce_with_diagnostics(p).params; }

PhysicalParams realize_reduced(const ReducedParams& target, double ratio) {
    target.validate();
    if (!(ratio > 0.0) || !std::isfinite(ratio)) {
        throw Error(ErrorCode::InvalidParameter, "separation ratio must be positive and finite");
    }
    const double ge = target.gamma_eff;
    const double shared_a = ge * (1.0 + target.gamma_a);
    const double shared_b = ge * (1.0 + target.gamma_b);
    const double aux_rate = ratio * std::max({shared_a, shared_b, ge * std::abs(target.delta_r)});

    // Gamma_j * Gamma_c^j = Gamma^2 = aux_rate * gamma_eff when |mu| = 1.
    const double aux_a = aux_rate * ge / shared_a;
    const double aux_b = aux_rate * ge / shared_b;
    const double kappa_c = aux_rate - aux_a - aux_b;
    if (kappa_c < -1e-12 * aux_rate) {
        throw Error(ErrorCode::InvalidParameter,
                    "target damping not realizable with positive rates (needs gamma_a * gamma_b >= 1)");
    }

    PhysicalParams p;
    p.Gamma = std::sqrt(aux_rate * ge);
    p.kappa_a = 0.0;
    p.kappa_b = 0.0;
    p.kappa_c = std::max(kappa_c, 0.0);
    p.p_a = std::sqrt(shared_a / p.Gamma);
    p.p_b = std::sqrt(shared_b / p.Gamma);
    p.p_c_a = std::sqrt(aux_a / p.Gamma);
    p.p_c_b = std::sqrt(aux_b / p.Gamma);
    p.delta_a = target.delta_r * ge;
    p.delta_b = -p.delta_a;
    p.delta_c = 0.0;
    p.drive_eps = target.eps_r * ge;
    return p;
}

}  // namespace epbattery
