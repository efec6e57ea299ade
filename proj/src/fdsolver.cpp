#include "drillwave/fdsolver.hpp"

#include "drillwave/delay.hpp"
#include "drillwave/errors.hpp"
#include "drillwave/funnel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace drillwave {

double ghost_value(double phi0, double u, double G, double dxi) {
    return phi0 - dxi * u / G;
}

void wave_rhs(const std::vector<double>& phi, const std::vector<double>& vel, double u,
              const DrillParams& p, const DampingSpec& damping, const SpatialGrid& grid,
              std::vector<double>& dphi, std::vector<double>& dvel) {
    const int n = grid.n;
    const double dxi = grid.dxi;
    const double c2 = p.G / p.rho;
    const double inv_dxi2 = 1.0 / (dxi * dxi);
    const bool damped = damping.has_distributed();

    dphi = vel;  // the angle rate is the velocity field everywhere, bit included
    dvel.resize(vel.size());

    const double ghost = ghost_value(phi[0], u, p.G, dxi);
    dvel[0] = c2 * (phi[1] - 2.0 * phi[0] + ghost) * inv_dxi2 - (damped ? damping.Fd(0.0, vel[0]) : 0.0);
    for (int i = 1; i < n - 1; ++i) {
        dvel[i] = c2 * (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) * inv_dxi2 -
                  (damped ? damping.Fd(grid.node(i), vel[i]) : 0.0);
    }
    // Bit: J y' = -Gamma G phi_xi(ell) + F_e(y), phi_xi by the one-sided
    // second-order stencil so the boundary derivative matches the interior
    // accuracy.
    const double strain = (3.0 * phi[n - 1] - 4.0 * phi[n - 2] + phi[n - 3]) / (2.0 * dxi);
    dvel[n - 1] = (-p.Gamma * p.G * strain + damping.Fe(vel[n - 1])) / p.J;
}

double discrete_energy(const SimState& s, const DrillParams& p, const SpatialGrid& grid) {
    const int n = grid.n;
    double kinetic = 0.0;
    for (int i = 0; i < n - 1; ++i) kinetic += s.vel[i] * s.vel[i];
    kinetic *= grid.dxi * p.rho;
    double strain = 0.0;
    for (int i = 0; i < n - 1; ++i) {
        const double d = s.phi[i + 1] - s.phi[i];
        strain += d * d;
    }
    strain *= p.G / grid.dxi;
    const double y = s.vel[n - 1];
    return kinetic + strain + (p.J / p.Gamma) * y * y;
}

double FieldHistory::value(double xi, double t) const {
    if (times.empty()) throw DelayBufferError("field history is empty");
    if (t < times.front() - 1e-12 || t > times.back() + 1e-12)
        throw DelayBufferError("field lookup at t=" + std::to_string(t) + " outside stored range");
    const double slack = 1e-12 * std::max(1.0, grid.ell);
    if (xi < -slack || xi > grid.ell + slack)
        throw DelayBufferError("field lookup at xi=" + std::to_string(xi) + " outside the string");
    xi = std::clamp(xi, 0.0, grid.ell);
    t = std::clamp(t, times.front(), times.back());

    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t kt = (it == times.begin()) ? 1 : static_cast<std::size_t>(it - times.begin());
    if (kt >= times.size()) kt = times.size() - 1;
    const double t0 = times[kt - 1], t1 = times[kt];
    const double wt = (t1 > t0) ? (t - t0) / (t1 - t0) : 0.0;

    double pos = xi / grid.dxi;
    int ix = std::min(static_cast<int>(pos), grid.n - 2);
    const double wx = pos - ix;

    auto at = [&](std::size_t frame) {
        const auto& f = vel_frames[frame];
        return f[ix] + wx * (f[ix + 1] - f[ix]);
    };
    return at(kt - 1) + wt * (at(kt) - at(kt - 1));
}

namespace {

// Controller evaluation shared by all RK4 substages: given the substage time,
// compensator state and top velocity, produce (e, v, u) and the delayed v the
// compensator ODE needs.
struct CtrlEval {
    double e = 0.0;
    double v = 0.0;
    double u = 0.0;
    double v_del2 = 0.0;
};

struct LoopContext {
    const ExperimentConfig* cfg = nullptr;
    FunnelConfig funnel;  // copy with psi.t_min pinned to -omega
    double c = 1.0;
    double omega = 1.0;
    bool measured = false;
    int i_sign = -1;
    double e0 = 0.0;
    HistoryBuffer y_hist{1.0};
    HistoryBuffer v_hist{1.0};

    // z is the top velocity of the stage state; slope0 the one-sided interior
    // estimate of phi_xi(0) from the same stage (independent of the input
    // ghost, so the outgoing invariant W = z + c*slope0 stays input-free).
    CtrlEval eval(double t, double I, double z, double slope0) const {
        CtrlEval out;
        const double psi_del = funnel.psi.eval(t - omega);
        const double yref_del = cfg->reference.value(t - omega);
        out.v_del2 = v_hist.sample(t - 2.0 * omega);
        if (measured) {
            // Boundary-data reconstruction through the outgoing invariant;
            // exact for the undamped string once the delay lines carry real
            // data (t >= 2 omega), biased by the held v_hat before that and
            // by the distributed-damping line integral when F_d is active.
            out.e = compute_e_from_invariant(z + c * slope0, out.v_del2, yref_del, I, psi_del, c);
        } else {
            out.e = compute_e_direct(y_hist.sample(t - omega), yref_del, I, psi_del);
        }
        out.v = controller_v(out.e, e0, funnel, t);  // throws FunnelViolation when |e| >= 1
        out.u = control_input_u(z, out.v, c);
        return out;
    }
};

} // namespace

ClosedLoopResult run_closed_loop(const ExperimentConfig& cfg, const ResolvedRun& run,
                                 FieldHistory* fields) {
    const auto t_begin = std::chrono::steady_clock::now();
    const DrillParams& p = cfg.params;
    SpatialGrid grid{run.n_points, run.dxi, p.ell};
    const double dt = run.dt;
    const double c = p.c();
    const double omega = p.omega();
    const int n = grid.n;
    if (n < 5) throw ConfigError("grid", "need at least 5 nodes for the boundary stencils");

    LoopContext ctx;
    ctx.cfg = &cfg;
    ctx.funnel = cfg.funnel;
    ctx.funnel.psi.t_min = -omega;
    ctx.c = c;
    ctx.omega = omega;
    ctx.measured = (cfg.e_mode == ErrorMode::Measured);
    ctx.i_sign = cfg.i_sign;
    if (ctx.measured && !(0.5 * c * ctx.funnel.k > ctx.funnel.psi.sup()))
        throw ConfigError("funnel.k",
                          "boundary-data error mode needs c*k/2 > sup psi; raise k or use the direct mode");

    // Zero-rest start: the string and bit begin at rest, the controller output
    // was held at v_hat for the whole pre-history.
    SimState s;
    s.phi.assign(n, 0.0);
    s.vel.assign(n, 0.0);
    s.I = 0.0;

    ctx.y_hist = init_history([](double) { return 0.0; }, -omega - 2.0 * dt, 0.0, dt,
                              omega + 4.0 * dt);
    ctx.v_hist = init_history([&](double) { return ctx.funnel.v_hat; }, -2.0 * omega - 2.0 * dt,
                              0.0, dt, 2.0 * omega + 4.0 * dt);

    const double psi_start = ctx.funnel.psi.eval(-omega);
    const double yref_start = cfg.reference.value(-omega);
    ctx.e0 = ctx.measured
                 ? compute_e_from_invariant(s.vel[0], ctx.funnel.v_hat, yref_start, 0.0,
                                            psi_start, c)
                 : compute_e_direct(ctx.y_hist.sample(-omega), yref_start, 0.0, psi_start);
    if (!(std::abs(ctx.e0) < 1.0)) throw FunnelViolation(0.0, ctx.e0);

    const int n_steps = run.n_steps;
    ClosedLoopResult out;
    out.steps.reserve(static_cast<std::size_t>(n_steps) + 1);
    if (fields) {
        fields->grid = grid;
        fields->times.clear();
        fields->vel_frames.clear();
        fields->times.reserve(static_cast<std::size_t>(n_steps) + 1);
        fields->vel_frames.reserve(static_cast<std::size_t>(n_steps) + 1);
    }

    const double inv_2dxi = 1.0 / (2.0 * grid.dxi);
    auto slope0 = [inv_2dxi](const std::vector<double>& phi) {
        return (-3.0 * phi[0] + 4.0 * phi[1] - phi[2]) * inv_2dxi;
    };

    auto record = [&](double t) {
        const CtrlEval ce = ctx.eval(t, s.I, s.vel[0], slope0(s.phi));
        out.steps.push(t, s.vel[n - 1], cfg.reference.value(t), ce.e, ctx.funnel.psi.eval(t - omega),
                       ce.v, ce.u, s.vel[0], s.I, discrete_energy(s, p, grid));
        if (fields) {
            fields->times.push_back(t);
            fields->vel_frames.push_back(s.vel);
        }
        return ce;
    };

    record(0.0);

    // Stage derivative at (t, phi, vel, I): controller first, then the wave
    // stencil with the resulting input.  Throws FunnelViolation when the
    // stage error leaves (-1, 1).
    std::vector<double> k1p(n), k1v(n), k2p(n), k2v(n), k3p(n), k3v(n), k4p(n), k4v(n);
    std::vector<double> tp(n), tv(n);
    double k1I, k2I, k3I, k4I;
    auto deriv = [&](double t, const std::vector<double>& ph, const std::vector<double>& ve,
                     double I, std::vector<double>& kp, std::vector<double>& kv, double& kI) {
        const CtrlEval ce = ctx.eval(t, I, ve[0], slope0(ph));
        wave_rhs(ph, ve, ce.u, p, cfg.damping, grid, kp, kv);
        kI = I_rhs(I, ce.v, ce.v_del2, ctx.funnel, ctx.i_sign);
    };

    if (cfg.time.integrator == Integrator::RK4) {
        for (int step = 0; step < n_steps; ++step) {
            const double t0 = step * dt;
            const double th = t0 + 0.5 * dt;
            const double t1 = (step + 1) * dt;

            deriv(t0, s.phi, s.vel, s.I, k1p, k1v, k1I);

            for (int i = 0; i < n; ++i) { tp[i] = s.phi[i] + 0.5 * dt * k1p[i]; tv[i] = s.vel[i] + 0.5 * dt * k1v[i]; }
            deriv(th, tp, tv, s.I + 0.5 * dt * k1I, k2p, k2v, k2I);

            for (int i = 0; i < n; ++i) { tp[i] = s.phi[i] + 0.5 * dt * k2p[i]; tv[i] = s.vel[i] + 0.5 * dt * k2v[i]; }
            deriv(th, tp, tv, s.I + 0.5 * dt * k2I, k3p, k3v, k3I);

            for (int i = 0; i < n; ++i) { tp[i] = s.phi[i] + dt * k3p[i]; tv[i] = s.vel[i] + dt * k3v[i]; }
            deriv(t1, tp, tv, s.I + dt * k3I, k4p, k4v, k4I);

            const double w = dt / 6.0;
            for (int i = 0; i < n; ++i) {
                s.phi[i] += w * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
                s.vel[i] += w * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
            }
            s.I += w * (k1I + 2.0 * k2I + 2.0 * k3I + k4I);
            s.t = t1;

            // Commit the new sample to the delayed-signal record, then log it.
            const CtrlEval cn = record(t1);
            ctx.y_hist.push(t1, s.vel[n - 1]);
            ctx.v_hist.push(t1, cn.v);
        }
        out.summary.steps_taken = n_steps;
    } else {
        // Embedded 2(3) pair (Bogacki-Shampine) with FSAL.  The error test
        // adapts the step to rtol/atol; the cap keeps the wave part inside
        // the explicit stability region, and a step never exceeds omega so
        // every delayed lookup stays behind the last committed history
        // sample (which also makes the FSAL reuse exact: pushing the new
        // sample cannot change interpolation at t - omega and earlier).
        const double t_end = cfg.time.t_end;
        const double dt_max =
            std::min({cfg.time.cfl_fraction * grid.dxi / c, omega, t_end});
        const double dt_min = 1e-10 * omega;
        const double rtol = cfg.time.rtol;
        const double atol = cfg.time.atol;

        // Candidate state (third-order) alongside the trial-stage storage.
        std::vector<double> hp(n), hv(n);
        double hI = 0.0;

        deriv(0.0, s.phi, s.vel, s.I, k1p, k1v, k1I);

        double t = 0.0;
        double dt_try = std::min(dt, dt_max);
        while (t < t_end - 1e-12 * t_end) {
            const double h = std::min(dt_try, t_end - t);
            bool leave = false;
            try {
                for (int i = 0; i < n; ++i) { tp[i] = s.phi[i] + 0.5 * h * k1p[i]; tv[i] = s.vel[i] + 0.5 * h * k1v[i]; }
                deriv(t + 0.5 * h, tp, tv, s.I + 0.5 * h * k1I, k2p, k2v, k2I);

                for (int i = 0; i < n; ++i) { tp[i] = s.phi[i] + 0.75 * h * k2p[i]; tv[i] = s.vel[i] + 0.75 * h * k2v[i]; }
                deriv(t + 0.75 * h, tp, tv, s.I + 0.75 * h * k2I, k3p, k3v, k3I);

                for (int i = 0; i < n; ++i) {
                    hp[i] = s.phi[i] + h * (2.0 / 9.0 * k1p[i] + 1.0 / 3.0 * k2p[i] + 4.0 / 9.0 * k3p[i]);
                    hv[i] = s.vel[i] + h * (2.0 / 9.0 * k1v[i] + 1.0 / 3.0 * k2v[i] + 4.0 / 9.0 * k3v[i]);
                }
                hI = s.I + h * (2.0 / 9.0 * k1I + 1.0 / 3.0 * k2I + 4.0 / 9.0 * k3I);
                deriv(t + h, hp, hv, hI, k4p, k4v, k4I);
            } catch (const FunnelViolation&) {
                // A trial stage left the funnel.  With a resolvable step that
                // is an integration artifact, not a verdict; only when the
                // step cannot shrink further is the violation real.
                if (h <= dt_min) throw;
                leave = true;
            }
            if (leave) {
                ++out.summary.steps_rejected;
                dt_try = 0.5 * h;
                continue;
            }

            // Difference of the 3rd- and embedded 2nd-order solutions,
            // measured in the usual weighted rms norm.
            double acc = 0.0;
            auto add = [&](double k1, double k2, double k3, double k4, double x0, double x1) {
                const double err = h * (-5.0 / 72.0 * k1 + 1.0 / 12.0 * k2 + 1.0 / 9.0 * k3 - 1.0 / 8.0 * k4);
                const double sc = atol + rtol * std::max(std::abs(x0), std::abs(x1));
                const double q = err / sc;
                acc += q * q;
            };
            for (int i = 0; i < n; ++i) {
                add(k1p[i], k2p[i], k3p[i], k4p[i], s.phi[i], hp[i]);
                add(k1v[i], k2v[i], k3v[i], k4v[i], s.vel[i], hv[i]);
            }
            add(k1I, k2I, k3I, k4I, s.I, hI);
            const double err_norm = std::sqrt(acc / (2.0 * n + 1.0));

            if (err_norm <= 1.0) {
                s.phi.swap(hp);
                s.vel.swap(hv);
                s.I = hI;
                t += h;
                s.t = t;
                k1p.swap(k4p);  // FSAL: the last stage is next step's first
                k1v.swap(k4v);
                k1I = k4I;

                const CtrlEval cn = record(t);
                ctx.y_hist.push(t, s.vel[n - 1]);
                ctx.v_hist.push(t, cn.v);
                ++out.summary.steps_taken;

                const double fac = (err_norm > 0.0)
                                       ? std::clamp(0.9 * std::pow(err_norm, -1.0 / 3.0), 0.2, 5.0)
                                       : 5.0;
                dt_try = std::min(h * fac, dt_max);
            } else {
                ++out.summary.steps_rejected;
                dt_try = h * std::clamp(0.9 * std::pow(err_norm, -1.0 / 3.0), 0.2, 1.0);
                if (dt_try <= dt_min)
                    throw NumericalError("adaptive step underflow at t=" + std::to_string(t));
            }
        }
    }

    out.final_state = s;
    out.trace = sample_uniform(out.steps, cfg.time.n_output_rows, cfg.time.t_end, omega);
    out.summary.engine = "explicit";
    out.summary.min_funnel_margin = out.trace.min_funnel_margin();
    out.summary.max_abs_e = out.trace.max_abs_e();
    for (std::size_t i = 0; i < out.steps.t.size(); ++i) {
        out.summary.max_abs_v = std::max(out.summary.max_abs_v, std::abs(out.steps.v[i]));
        out.summary.max_abs_u = std::max(out.summary.max_abs_u, std::abs(out.steps.u[i]));
        out.summary.max_abs_I = std::max(out.summary.max_abs_I, std::abs(out.steps.I[i]));
    }
    out.summary.terminal_tracking_error =
        std::abs(out.trace.rows.back().y - out.trace.rows.back().y_ref);
    out.summary.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    return out;
}

OpenLoopResult run_open_loop(const DrillParams& p, const DampingSpec& damping,
                             const std::function<double(double)>& phi0,
                             const std::function<double(double)>& v0, double t_end, double dxi,
                             double dt) {
    const int n = static_cast<int>(std::lround(p.ell / dxi)) + 1;
    if (n < 5) throw ConfigError("grid", "need at least 5 nodes for the boundary stencils");
    SpatialGrid grid{n, p.ell / (n - 1), p.ell};
    if (p.c() * dt / grid.dxi > 0.9 + 1e-12)
        throw ConfigError("time.dt", "CFL number exceeds 0.9");

    SimState s;
    s.phi.resize(n);
    s.vel.resize(n);
    for (int i = 0; i < n; ++i) {
        s.phi[i] = phi0(grid.node(i));
        s.vel[i] = v0(grid.node(i));
    }

    const int n_steps = static_cast<int>(std::lround(t_end / dt));
    OpenLoopResult out;
    out.fields.grid = grid;
    out.fields.times.reserve(n_steps + 1);
    out.fields.vel_frames.reserve(n_steps + 1);
    out.energy.reserve(n_steps + 1);

    auto snapshot = [&]() {
        out.fields.times.push_back(s.t);
        out.fields.vel_frames.push_back(s.vel);
        out.energy.push_back(discrete_energy(s, p, grid));
    };
    snapshot();

    std::vector<double> k1p(n), k1v(n), k2p(n), k2v(n), k3p(n), k3v(n), k4p(n), k4v(n), tp(n), tv(n);
    for (int step = 0; step < n_steps; ++step) {
        wave_rhs(s.phi, s.vel, 0.0, p, damping, grid, k1p, k1v);
        for (int i = 0; i < n; ++i) { tp[i] = s.phi[i] + 0.5 * dt * k1p[i]; tv[i] = s.vel[i] + 0.5 * dt * k1v[i]; }
        wave_rhs(tp, tv, 0.0, p, damping, grid, k2p, k2v);
        for (int i = 0; i < n; ++i) { tp[i] = s.phi[i] + 0.5 * dt * k2p[i]; tv[i] = s.vel[i] + 0.5 * dt * k2v[i]; }
        wave_rhs(tp, tv, 0.0, p, damping, grid, k3p, k3v);
        for (int i = 0; i < n; ++i) { tp[i] = s.phi[i] + dt * k3p[i]; tv[i] = s.vel[i] + dt * k3v[i]; }
        wave_rhs(tp, tv, 0.0, p, damping, grid, k4p, k4v);
        const double w = dt / 6.0;
        for (int i = 0; i < n; ++i) {
            s.phi[i] += w * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
            s.vel[i] += w * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        s.t = (step + 1) * dt;
        snapshot();
    }
    return out;
}

double dirichlet_energy(const std::vector<double>& phi, const std::vector<double>& vel,
                        const DrillParams& p, const SpatialGrid& grid) {
    const int n = grid.n;
    double kinetic = 0.0;
    for (int i = 1; i < n - 1; ++i) kinetic += vel[i] * vel[i];
    kinetic *= grid.dxi * p.rho;
    double strain = 0.0;
    for (int i = 0; i < n - 1; ++i) {
        const double d = phi[i + 1] - phi[i];
        strain += d * d;
    }
    strain *= p.G / grid.dxi;
    return kinetic + strain;
}

FreeWaveResult run_free_wave_dirichlet(const DrillParams& p, const DampingSpec* damping,
                                       const std::function<double(double)>& phi0,
                                       const std::function<double(double)>& v0, double t_end,
                                       double dxi, double dt) {
    const int n = static_cast<int>(std::lround(p.ell / dxi)) + 1;
    SpatialGrid grid{n, p.ell / (n - 1), p.ell};
    if (p.c() * dt / grid.dxi > 0.9 + 1e-12)
        throw ConfigError("time.dt", "CFL number exceeds 0.9");
    const double c2 = p.G / p.rho;
    const double inv_dxi2 = 1.0 / (grid.dxi * grid.dxi);

    std::vector<double> phi(n), vel(n);
    for (int i = 0; i < n; ++i) {
        phi[i] = phi0(grid.node(i));
        vel[i] = v0(grid.node(i));
    }
    phi[0] = phi[n - 1] = 0.0;  // pinned ends
    vel[0] = vel[n - 1] = 0.0;

    auto rhs = [&](const std::vector<double>& ph, const std::vector<double>& ve,
                   std::vector<double>& dph, std::vector<double>& dve) {
        dph = ve;
        dph[0] = dph[n - 1] = 0.0;
        dve[0] = dve[n - 1] = 0.0;
        for (int i = 1; i < n - 1; ++i) {
            dve[i] = c2 * (ph[i + 1] - 2.0 * ph[i] + ph[i - 1]) * inv_dxi2;
            if (damping && damping->has_distributed()) dve[i] -= damping->Fd(grid.node(i), ve[i]);
        }
    };

    const int n_steps = static_cast<int>(std::lround(t_end / dt));
    FreeWaveResult out;
    out.grid = grid;
    out.times.reserve(n_steps + 1);
    out.energy.reserve(n_steps + 1);
    out.times.push_back(0.0);
    out.energy.push_back(dirichlet_energy(phi, vel, p, grid));

    std::vector<double> k1p(n), k1v(n), k2p(n), k2v(n), k3p(n), k3v(n), k4p(n), k4v(n), tp(n), tv(n);
    for (int step = 0; step < n_steps; ++step) {
        rhs(phi, vel, k1p, k1v);
        for (int i = 0; i < n; ++i) { tp[i] = phi[i] + 0.5 * dt * k1p[i]; tv[i] = vel[i] + 0.5 * dt * k1v[i]; }
        rhs(tp, tv, k2p, k2v);
        for (int i = 0; i < n; ++i) { tp[i] = phi[i] + 0.5 * dt * k2p[i]; tv[i] = vel[i] + 0.5 * dt * k2v[i]; }
        rhs(tp, tv, k3p, k3v);
        for (int i = 0; i < n; ++i) { tp[i] = phi[i] + dt * k3p[i]; tv[i] = vel[i] + dt * k3v[i]; }
        rhs(tp, tv, k4p, k4v);
        const double w = dt / 6.0;
        for (int i = 0; i < n; ++i) {
            phi[i] += w * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
            vel[i] += w * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        out.times.push_back((step + 1) * dt);
        out.energy.push_back(dirichlet_energy(phi, vel, p, grid));
    }
    out.final_phi = std::move(phi);
    out.final_vel = std::move(vel);
    return out;
}

} // namespace drillwave
