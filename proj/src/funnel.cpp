#include "drillwave/funnel.hpp"

#include "drillwave/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace drillwave {

double FunnelBoundary::eval(double t) const {
    if (t < t_min)
        throw ConfigError("funnel.psi", "evaluated at t=" + std::to_string(t) +
                                            " before the domain start " + std::to_string(t_min));
    return a * std::exp(-b * t) + d;
}

double FunnelBoundary::derivative(double t) const {
    if (t < t_min)
        throw ConfigError("funnel.psi", "evaluated at t=" + std::to_string(t) +
                                            " before the domain start " + std::to_string(t_min));
    return -a * b * std::exp(-b * t);
}

double FunnelBoundary::sup() const {
    if (std::isinf(t_min)) return std::numeric_limits<double>::infinity();
    return a * std::exp(-b * t_min) + d;
}

void FunnelBoundary::validate() const {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("funnel.psi.a", "must be nonnegative and finite");
    if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("funnel.psi.b", "must be nonnegative and finite");
    if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError("funnel.psi.d", "must be positive (psi must stay away from zero)");
}

void FunnelConfig::validate() const {
    psi.validate();
    if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("funnel.k", "must be positive");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("funnel.alpha", "must be positive");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("funnel.beta", "must be positive");
    if (!std::isfinite(v_hat)) throw ConfigError("funnel.v_hat", "must be finite");
    if (!(t_shaping > 0.0) || !std::isfinite(t_shaping)) throw ConfigError("funnel.t_shaping", "must be positive");
}

double shaping_p(double t, double t_shaping) {
    const double tau = t / t_shaping;
    if (tau <= 0.0) return 1.0;
    if (tau >= 1.0) return 0.0;
    return std::exp(tau * tau / (tau * tau - 1.0));
}

double error_transform(double e, double k, double t_diag) {
    if (!(std::abs(e) < 1.0)) throw FunnelViolation(t_diag, e);
    return k * e / (1.0 - e * e);
}

double controller_v(double e, double e0, const FunnelConfig& cfg, double t) {
    const double w = shaping_p(t, cfg.t_shaping);
    const double a = error_transform(e, cfg.k, t);
    if (w == 0.0) return a;  // past the shaping window: pure funnel feedback
    const double a0 = error_transform(e0, cfg.k, t);
    // At t = 0, e == e0 and the transforms cancel exactly, so v(0) == v_hat
    // to the last bit.
    if (w == 1.0) return cfg.v_hat + (a - a0);
    return a + (cfg.v_hat - a0) * w;
}

double compute_e_direct(double y_delayed, double yref_delayed, double I, double psi_delayed) {
    return (y_delayed - yref_delayed + I) / psi_delayed;
}

double compute_e_from_invariant(double W, double v_del2, double yref_delayed, double I,
                                double psi_delayed, double c) {
    return compute_e_direct(0.5 * W - 0.5 * c * v_del2, yref_delayed, I, psi_delayed);
}

MeasuredSolve solve_e_measured(double R, double psi_tmo, double k, double c) {
    const double ck2 = 0.5 * c * k;
    if (!(psi_tmo > 0.0)) throw ConfigError("funnel.psi", "psi(t - omega) must be positive");
    if (!(ck2 > psi_tmo))
        throw ConfigError("funnel.k", "gain condition violated: need c*k/2 > psi(t-omega) (" +
                                          std::to_string(ck2) + " <= " + std::to_string(psi_tmo) +
                                          "); the boundary-data reconstruction is not invertible");

    // F(e) = psi_tmo*e - ck2*e/(1-e^2) is strictly decreasing on (-1, 1) with
    // range all of R, so F(e) = R has exactly one root.  Track a bracket
    // [lo, hi] with F(lo) > R > F(hi) and fall back to bisection whenever a
    // Newton step leaves it.
    const double edge = 1.0 - 1e-14;
    double lo = -edge, hi = edge;
    auto F = [&](double e) { return psi_tmo * e - ck2 * e / (1.0 - e * e); };
    auto dF = [&](double e) {
        const double s = 1.0 - e * e;
        return psi_tmo - ck2 * (1.0 + e * e) / (s * s);
    };

    MeasuredSolve out;
    double e = 0.0;
    const double tol = 1e-12;
    const int max_iter = 50;
    for (int it = 0; it < max_iter; ++it) {
        const double r = F(e) - R;
        out.e = e;
        out.residual = r;
        out.iterations = it;
        if (std::abs(r) <= tol * std::max(1.0, std::abs(R))) return out;
        // shrink the bracket (F decreasing: r > 0 means the root is above e)
        if (r > 0.0) lo = e; else hi = e;
        double step = r / dF(e);      // dF < 0 everywhere, never zero
        double next = e - step;
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
        // Bracket collapsed to adjacent doubles: F is steeper there than the
        // residual tolerance can resolve, so the best representable root is
        // at hand.  Return whichever side has the smaller residual.
        if (next == lo || next == hi) {
            const double rn = F(next) - R;
            if (std::abs(rn) < std::abs(out.residual)) {
                out.e = next;
                out.residual = rn;
            }
            return out;
        }
        e = next;
    }
    out.e = e;
    out.residual = F(e) - R;
    if (std::abs(out.residual) <= tol * std::max(1.0, std::abs(R))) return out;
    throw NumericalError("boundary-data error reconstruction did not converge (R=" + std::to_string(R) +
                         ", residual=" + std::to_string(out.residual) + ")");
}

double I_rhs(double I, double v_now, double v_del2, const FunnelConfig& cfg, int i_sign) {
    const double s = (i_sign >= 0) ? 1.0 : -1.0;
    return -cfg.alpha * I + s * cfg.beta * (v_now - v_del2);
}

double update_I(double I, double v_now, double v_del2, const FunnelConfig& cfg, double dt, int i_sign) {
    // Forcing frozen over the step; the closed-loop simulators re-evaluate the
    // controller at RK4 substages instead of using this helper.
    auto f = [&](double Ik) { return I_rhs(Ik, v_now, v_del2, cfg, i_sign); };
    const double k1 = f(I);
    const double k2 = f(I + 0.5 * dt * k1);
    const double k3 = f(I + 0.5 * dt * k2);
    const double k4 = f(I + dt * k3);
    return I + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double control_input_u(double z, double v, double c) { return z / c + v; }

} // namespace drillwave
