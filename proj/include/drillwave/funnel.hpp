#pragma once

#include <limits>

namespace drillwave {

// Funnel boundary psi(t) = a * exp(-b t) + d, defined on [t_min, inf).
// t_min is -omega in the control loop: the error signal looks psi up at the
// delayed time t - omega, which starts at -omega when t = 0.
struct FunnelBoundary {
    double a = 8.0;
    double b = 1.0;
    double d = 0.1;
    double t_min = -std::numeric_limits<double>::infinity();

    double eval(double t) const;        // throws ConfigError for t < t_min
    double derivative(double t) const;  // -a b exp(-b t)
    double sup() const;                 // sup over [t_min, inf) = a exp(-b t_min) + d
    void validate() const;
};

// Controller gains and the startup-shaping horizon.  The integral-sign choice
// (i_sign) lives in the experiment config, not here, because it selects
// between two published forms of the same loop rather than shaping this
// controller's own contract.
struct FunnelConfig {
    FunnelBoundary psi;
    double k = 1.0;          // funnel gain
    double alpha = 1.0;      // integrator leak
    double beta = 1.0;       // delayed-difference coupling
    double v_hat = 1.0;      // initial controller output, held by shaping
    double t_shaping = 0.5;  // shaping support [0, t_shaping]

    void validate() const;
};

// C-infinity bump used to blend the controller from v_hat into pure funnel
// feedback: p(0) = 1, p(t) = 0 for t >= t_shaping, smooth in between.
// (exp(tau^2 / (tau^2 - 1)) with tau = t / t_shaping.)
double shaping_p(double t, double t_shaping);

// k * e / (1 - e^2).  Throws FunnelViolation when |e| >= 1; callers pass the
// current simulation time purely for the diagnostic.
double error_transform(double e, double k, double t_diag = 0.0);

// Full control offset v(t) = transform(e) + (v_hat - transform(e0)) * p(t).
// e0 is the error observed at t = 0.  At t = 0 this returns exactly v_hat.
double controller_v(double e, double e0, const FunnelConfig& cfg, double t);

// Normalized error from a direct delayed measurement of the bit velocity.
double compute_e_direct(double y_delayed, double yref_delayed, double I, double psi_delayed);

// Normalized error from the outgoing boundary invariant
//   W(t) = phi_t(0,t) + c phi_xi(0,t),
// which the control wave cannot excite (a right-moving wave carries
// phi_t + c phi_xi = 0).  The undamped reflection identity gives
//   y(t-omega) = W(t)/2 - (c/2) v(t-2omega),
// so e follows from the direct formula.  Grid simulators use this form: the
// algebraic z-based reconstruction assumes the boundary velocity absorbs the
// current input instantaneously, which a spatial grid only delivers over a
// cell-crossing time, and that lag destabilizes the loop.
double compute_e_from_invariant(double W, double v_del2, double yref_delayed, double I,
                                double psi_delayed, double c);

// Recovers e from boundary data only, by solving
//   psi_tmo * e - (c k / 2) * e / (1 - e^2) = R
// for the unique root in (-1, 1).  Requires the gain condition
// psi_tmo < c k / 2 (checked; ConfigError otherwise), which makes the left
// side a strictly decreasing bijection onto the reals.  Safeguarded Newton,
// residual tolerance 1e-12, bisection fallback.
struct MeasuredSolve {
    double e = 0.0;
    int iterations = 0;
    double residual = 0.0;
};
MeasuredSolve solve_e_measured(double R, double psi_tmo, double k, double c);

// Right-hand side of the compensator ODE
//   I' = -alpha I + i_sign * beta * (v_now - v_del2),
// with i_sign = -1 by default (the convention the closed-loop analysis uses).
double I_rhs(double I, double v_now, double v_del2, const FunnelConfig& cfg, int i_sign = -1);

// One classical RK4 step of the compensator ODE with the forcing held at the
// supplied values.  The full simulators carry I inside their own state and
// integrate it alongside the plant; this entry point exists for tests and
// bindings.
double update_I(double I, double v_now, double v_del2, const FunnelConfig& cfg, double dt,
                int i_sign = -1);

// Boundary input u(t) = z(t)/c + v(t).
double control_input_u(double z, double v, double c);

} // namespace drillwave
