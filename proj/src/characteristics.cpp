#include "drillwave/characteristics.hpp"

#include "drillwave/delay.hpp"
#include "drillwave/errors.hpp"
#include "drillwave/funnel.hpp"

#include <algorithm>
#include <cmath>

namespace drillwave {

double profile_eval(const Profile& f, double x) {
    if (std::holds_alternative<ZeroProfile>(f)) return 0.0;
    if (auto* s = std::get_if<SineProfile>(&f))
        return s->amplitude * std::sin(s->mode * std::acos(-1.0) * x / s->ell);
    const auto& c = std::get<PolyProfile>(f).coeffs;
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
    return acc;
}

double profile_derivative(const Profile& f, double x) {
    if (std::holds_alternative<ZeroProfile>(f)) return 0.0;
    if (auto* s = std::get_if<SineProfile>(&f)) {
        const double k = s->mode * std::acos(-1.0) / s->ell;
        return s->amplitude * k * std::cos(k * x);
    }
    const auto& c = std::get<PolyProfile>(f).coeffs;
    double acc = 0.0;
    for (std::size_t i = c.size(); i-- > 1;) acc = acc * x + c[i] * static_cast<double>(i);
    return acc;
}

namespace {

void check_cone(const InitialData& data, double xi, double t, double c) {
    if (data.policy != ExtensionPolicy::InteriorOnly) return;
    const double slack = 1e-12 * std::max(1.0, data.ell);
    if (xi - c * t < -slack || xi + c * t > data.ell + slack)
        throw ConfigError("initial_data",
                          "characteristic cone of (xi=" + std::to_string(xi) + ", t=" + std::to_string(t) +
                              ") leaves [0, ell]; use the smooth-extension policy or stay inside the "
                              "domain of dependence");
}

// Recursive adaptive Simpson with the standard |S2 - S1|/15 error estimate.
double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_step(const std::function<double(double)>& f, double a, double b, double fa,
                     double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth = 28) {
    if (a == b) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    return adaptive_step(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, max_depth);
}

} // namespace

double dalembert(const InitialData& data, const std::function<double(double, double)>* h, double xi,
                 double t, double c, double quad_tol) {
    check_cone(data, xi, t, c);
    double out = 0.5 * (profile_eval(data.phi0, xi - c * t) + profile_eval(data.phi0, xi + c * t));
    if (!std::holds_alternative<ZeroProfile>(data.v0)) {
        out += adaptive_simpson([&](double s) { return profile_eval(data.v0, s); }, xi - c * t,
                                xi + c * t, quad_tol) /
               (2.0 * c);
    }
    if (h) {
        auto outer = [&](double tau) {
            const double half = c * (t - tau);
            return adaptive_simpson([&](double s) { return (*h)(s, tau); }, xi - half, xi + half,
                                    quad_tol);
        };
        out += adaptive_simpson(outer, 0.0, t, quad_tol) / (2.0 * c);
    }
    return out;
}

double dalembert_velocity(const InitialData& data, const std::function<double(double, double)>* h,
                          double xi, double t, double c, double quad_tol) {
    check_cone(data, xi, t, c);
    double out = 0.5 * c * (profile_derivative(data.phi0, xi + c * t) - profile_derivative(data.phi0, xi - c * t)) +
                 0.5 * (profile_eval(data.v0, xi + c * t) + profile_eval(data.v0, xi - c * t));
    if (h) {
        out += 0.5 * adaptive_simpson(
                         [&](double tau) {
                             const double r = c * (t - tau);
                             return (*h)(xi + r, tau) + (*h)(xi - r, tau);
                         },
                         0.0, t, quad_tol);
    }
    return out;
}

PicardResult picard_damped(const InitialData& data, const DampingSpec& damping,
                           const DrillParams& params, int n_points, double horizon, double tol,
                           int max_sweeps) {
    if (n_points < 3) throw ConfigError("grid", "picard grid needs at least 3 nodes");
    const double c = params.c();
    SpatialGrid grid{n_points, params.ell / (n_points - 1), params.ell};
    const double dt = grid.dxi / c;  // unit CFL: characteristics pass through nodes

    const int max_levels = (n_points - 1) / 2 + 1;  // triangle height
    const int n_levels = static_cast<int>(std::lround(horizon / dt)) + 1;
    if (n_levels > max_levels)
        throw ConfigError("horizon", "requested horizon leaves the interior-only validity triangle "
                                     "of this grid; refine the grid or shorten the horizon");

    TriangleField field;
    field.grid = grid;
    field.dt = dt;
    field.n_levels = n_levels;
    field.vt.assign(n_levels, std::vector<double>(n_points, 0.0));

    // Homogeneous part of the velocity formula, exact at the nodes.
    std::vector<std::vector<double>> base(n_levels, std::vector<double>(n_points, 0.0));
    for (int j = 0; j < n_levels; ++j) {
        for (int i = 0; i < n_points; ++i) {
            if (!field.valid(i, j)) continue;
            const double xp = grid.node(i + j), xm = grid.node(i - j);
            base[j][i] = 0.5 * c * (profile_derivative(data.phi0, xp) - profile_derivative(data.phi0, xm)) +
                         0.5 * (profile_eval(data.v0, xp) + profile_eval(data.v0, xm));
        }
    }
    field.vt = base;

    PicardResult out;
    if (!damping.has_distributed()) { out.field = std::move(field); return out; }

    std::vector<std::vector<double>> next(n_levels, std::vector<double>(n_points, 0.0));
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
        double sup_delta = 0.0, sup_val = 0.0;
        for (int j = 0; j < n_levels; ++j) {
            for (int i = 0; i < n_points; ++i) {
                if (!field.valid(i, j)) continue;
                // Trapezoid along both characteristics through (i, j); the
                // sample points are exactly the nodes (i +- (j-k), k).
                double integral = 0.0;
                for (int k = 0; k <= j; ++k) {
                    const int off = j - k;
                    const double g = damping.Fd(grid.node(i + off), field.vt[k][i + off]) +
                                     damping.Fd(grid.node(i - off), field.vt[k][i - off]);
                    integral += (k == 0 || k == j) ? 0.5 * g : g;
                }
                integral *= dt;
                const double val = base[j][i] - 0.5 * integral;
                sup_delta = std::max(sup_delta, std::abs(val - field.vt[j][i]));
                sup_val = std::max(sup_val, std::abs(val));
                next[j][i] = val;
            }
        }
        field.vt.swap(next);
        out.iterations = sweep;
        out.sup_deltas.push_back(sup_delta);
        if (sup_delta <= tol * std::max(1.0, sup_val)) { out.field = std::move(field); return out; }
    }
    throw NumericalError("picard iteration did not converge within " + std::to_string(max_sweeps) +
                         " sweeps");
}

double damping_line_integral(const std::function<double(double, double)>& phi_t, double t,
                             const DrillParams& params, const DampingSpec& damping,
                             double quad_tol) {
    if (!damping.has_distributed()) return 0.0;
    const double c = params.c();
    const double omega = params.omega();
    auto integrand = [&](double s) {
        const double xi = params.ell - c * (t - s);
        return damping.Fd(xi, phi_t(xi, s));
    };
    return adaptive_simpson(integrand, t - omega, t, quad_tol);
}

double y_delay_rhs(double y, double u_delayed, double z_delayed, double d_phi,
                   const DrillParams& params, const DampingSpec& damping) {
    // From the incoming Riemann invariant phi_t - c phi_xi, transported at +c
    // and losing int F_d along the way:
    //   c phi_xi(ell,t) = y(t) - z(t-omega) + (c/G) u(t-omega) + D_phi(t),
    // then J y' = -Gamma G phi_xi(ell,t) + F_e(y).  (c/G) u is the boundary
    // slope c phi_xi(0); the input u carries the factor G.
    const double c = params.c();
    return (-(params.G * params.Gamma / c) *
                (y + (c / params.G) * u_delayed - z_delayed + d_phi) +
            damping.Fe(y)) /
           params.J;
}

DelayOdeResult integrate_delay_ode(const std::function<double(double)>& u_of_t,
                                   const std::function<double(double)>& z_of_t,
                                   const std::function<double(double, double)>& phi_t,
                                   double y_start, double t_end, double dt,
                                   const DrillParams& params, const DampingSpec& damping) {
    const double omega = params.omega();
    if (!(t_end > omega)) throw ConfigError("time.t_end", "delay-equation window starts at t = omega");
    const int n_steps = static_cast<int>(std::lround((t_end - omega) / dt));

    // The line integral is the expensive part of each stage; a fixed tolerance
    // below the comparison tolerances keeps it out of the error budget.
    const double quad_tol = 1e-8;
    auto f = [&](double t, double y) {
        const double d_phi = damping_line_integral(phi_t, t, params, damping, quad_tol);
        return y_delay_rhs(y, u_of_t(t - omega), z_of_t(t - omega), d_phi, params, damping);
    };

    DelayOdeResult out;
    out.t.reserve(n_steps + 1);
    out.y.reserve(n_steps + 1);
    double y = y_start;
    out.t.push_back(omega);
    out.y.push_back(y);
    for (int k = 0; k < n_steps; ++k) {
        const double t0 = omega + k * dt;
        const double k1 = f(t0, y);
        const double k2 = f(t0 + 0.5 * dt, y + 0.5 * dt * k1);
        const double k3 = f(t0 + 0.5 * dt, y + 0.5 * dt * k2);
        const double k4 = f(t0 + dt, y + dt * k3);
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.t.push_back(omega + (k + 1) * dt);
        out.y.push_back(y);
    }
    return out;
}

TransportLoopResult run_transport_closed_loop(const ExperimentConfig& cfg, double dt_request) {
    if (cfg.damping.has_distributed())
        throw ConfigError("damping.distributed",
                          "the exact-transport loop is an undamped-string representation");
    const DrillParams& p = cfg.params;
    const double c = p.c();
    const double omega = p.omega();
    const int m = std::max(1, static_cast<int>(std::ceil(omega / dt_request - 1e-12)));
    const double dt = omega / m;

    FunnelConfig funnel = cfg.funnel;
    funnel.psi.t_min = -omega;
    if (!(0.5 * c * funnel.k > funnel.psi.sup()))
        throw ConfigError("funnel.k", "gain condition c*k/2 > sup psi required for the "
                                      "boundary-data reconstruction");

    HistoryBuffer y_hist = init_history([](double) { return 0.0; }, -omega - 2.0 * dt, 0.0, dt,
                                        omega + 4.0 * dt);
    HistoryBuffer v_hist = init_history([&](double) { return funnel.v_hat; }, -2.0 * omega - 2.0 * dt,
                                        0.0, dt, 2.0 * omega + 4.0 * dt);

    const double e0 = compute_e_direct(y_hist.sample(-omega), cfg.reference.value(-omega), 0.0,
                                       funnel.psi.eval(-omega));
    if (!(std::abs(e0) < 1.0)) throw FunnelViolation(0.0, e0);
    const double a0 = error_transform(e0, funnel.k, 0.0);

    auto direct_e = [&](double t, double I) {
        return compute_e_direct(y_hist.sample(t - omega), cfg.reference.value(t - omega), I,
                                funnel.psi.eval(t - omega));
    };
    auto rhs = [&](double t, double y, double I, double& dy, double& dI) {
        const double e = direct_e(t, I);
        const double v = controller_v(e, e0, funnel, t);
        const double v_del = v_hist.sample(t - omega);
        const double v_del2 = v_hist.sample(t - 2.0 * omega);
        dy = (-(p.G * p.Gamma / c) * (y + c * v_del) + cfg.damping.Fe(y)) / p.J;
        dI = I_rhs(I, v, v_del2, funnel, cfg.i_sign);
    };

    const int n_steps = static_cast<int>(std::lround(cfg.time.t_end / dt));
    TransportLoopResult out;
    out.t.reserve(n_steps + 1);

    double y = 0.0, I = 0.0;
    auto record = [&](double t) {
        const double e_dir = direct_e(t, I);
        const double v = controller_v(e_dir, e0, funnel, t);
        const double v_del2 = v_hist.sample(t - 2.0 * omega);
        // Synthesized top-boundary measurement from the transport identity.
        const double z = y_hist.sample(t - omega) - 0.5 * c * v + 0.5 * c * v_del2;
        const double p_hat = (funnel.v_hat - a0) * shaping_p(t, funnel.t_shaping);
        const double R = z + 0.5 * c * p_hat - 0.5 * c * v_del2 - cfg.reference.value(t - omega) + I;
        const double e_meas = solve_e_measured(R, funnel.psi.eval(t - omega), funnel.k, c).e;
        out.t.push_back(t);
        out.y.push_back(y);
        out.e_direct.push_back(e_dir);
        out.e_measured.push_back(e_meas);
        out.max_mode_gap = std::max(out.max_mode_gap, std::abs(e_dir - e_meas));
        return v;
    };
    record(0.0);

    for (int k = 0; k < n_steps; ++k) {
        const double t0 = k * dt, th = t0 + 0.5 * dt, t1 = (k + 1) * dt;
        double dy1, dI1, dy2, dI2, dy3, dI3, dy4, dI4;
        rhs(t0, y, I, dy1, dI1);
        rhs(th, y + 0.5 * dt * dy1, I + 0.5 * dt * dI1, dy2, dI2);
        rhs(th, y + 0.5 * dt * dy2, I + 0.5 * dt * dI2, dy3, dI3);
        rhs(t1, y + dt * dy3, I + dt * dI3, dy4, dI4);
        y += dt / 6.0 * (dy1 + 2.0 * dy2 + 2.0 * dy3 + dy4);
        I += dt / 6.0 * (dI1 + 2.0 * dI2 + 2.0 * dI3 + dI4);
        y_hist.push(t1, y);
        const double v_new = record(t1);
        v_hist.push(t1, v_new);
    }
    return out;
}

} // namespace drillwave
