#pragma once

#include "drillwave/config.hpp"
#include "drillwave/fdsolver.hpp"
#include "drillwave/model.hpp"

#include <functional>
#include <variant>
#include <vector>

namespace drillwave {

// --- initial data -----------------------------------------------------------

// Parametric initial profiles with analytic derivatives.  Sine and polynomial
// profiles are entire functions, so they double as their own smooth
// extensions beyond [0, ell].
struct ZeroProfile {};
struct SineProfile {
    double amplitude = 1.0;
    int mode = 1;      // k in sin(k pi xi / ell)
    double ell = 1.0;
};
struct PolyProfile {
    std::vector<double> coeffs;  // c0 + c1 xi + c2 xi^2 + ...
};
using Profile = std::variant<ZeroProfile, SineProfile, PolyProfile>;

double profile_eval(const Profile& f, double x);
double profile_derivative(const Profile& f, double x);

// How evaluation outside [0, ell] is treated: `InteriorOnly` raises a domain
// error whenever a characteristic would leave the strip (the caller must stay
// inside the domain of dependence); `SmoothExtension` evaluates the profile's
// own analytic extension.
enum class ExtensionPolicy { InteriorOnly, SmoothExtension };

struct InitialData {
    Profile phi0;
    Profile v0;
    double ell = 1.0;
    ExtensionPolicy policy = ExtensionPolicy::InteriorOnly;
};

// --- d'Alembert / Duhamel ----------------------------------------------------

// Angle solution of phi_tt = c^2 phi_xixi + h(xi, t) from the given data:
//   0.5 (phi0(xi-ct) + phi0(xi+ct)) + (1/2c) int v0 + (1/2c) Duhamel(h).
// Pass h = nullptr for the homogeneous equation.  Quadratures are adaptive
// Simpson with tolerance quad_tol.
double dalembert(const InitialData& data, const std::function<double(double, double)>* h,
                 double xi, double t, double c, double quad_tol = 1e-10);

// Time derivative of the above (the velocity field the solver comparisons
// use):
//   0.5 c (phi0'(xi+ct) - phi0'(xi-ct)) + 0.5 (v0(xi+ct) + v0(xi-ct))
//   + 0.5 int_0^t [h(xi+c(t-s), s) + h(xi-c(t-s), s)] ds.
double dalembert_velocity(const InitialData& data, const std::function<double(double, double)>* h,
                          double xi, double t, double c, double quad_tol = 1e-10);

// --- damped fixed point -------------------------------------------------------

// Velocity field phi_t on the unit-CFL grid (dt = dxi / c), where every
// characteristic passes through grid nodes exactly.  Values are valid on the
// triangle t_j <= min(xi_i, ell - xi_i) / c; the Picard integrals never leave
// it, matching the InteriorOnly policy.
struct TriangleField {
    SpatialGrid grid;
    double dt = 0.0;
    int n_levels = 0;                       // time levels 0 .. n_levels-1
    std::vector<std::vector<double>> vt;    // vt[j][i], level-major

    bool valid(int i, int j) const {
        return j <= std::min(i, grid.n - 1 - i) && j < n_levels;
    }
};

struct PicardResult {
    TriangleField field;
    int iterations = 0;
    std::vector<double> sup_deltas;  // sup-norm change per sweep, for contraction checks
};

// Picard iteration for phi_tt = c^2 phi_xixi - F_d(xi, phi_t): iterates the
// Duhamel velocity formula with the damping evaluated on the previous sweep.
// Converges geometrically for Lipschitz F_d on a short horizon.
PicardResult picard_damped(const InitialData& data, const DampingSpec& damping,
                           const DrillParams& params, int n_points, double horizon,
                           double tol = 1e-10, int max_sweeps = 50);

// --- the bit seen through the string ---------------------------------------

// Damping accumulated along the incoming characteristic:
//   D_phi(t) = int_{t-omega}^{t} F_d(ell - c(t-s), phi_t(ell - c(t-s), s)) ds.
double damping_line_integral(const std::function<double(double, double)>& phi_t, double t,
                             const DrillParams& params, const DampingSpec& damping,
                             double quad_tol = 1e-10);

// Right side of the retarded bit equation
//   J y' = -(G Gamma / c) (y + (c/G) u(t-omega) - z(t-omega) + D_phi(t)) + F_e(y).
double y_delay_rhs(double y, double u_delayed, double z_delayed, double d_phi,
                   const DrillParams& params, const DampingSpec& damping);

// Integrates the retarded bit equation over [omega, t_end] against harvested
// boundary signals and velocity field from a full run.  `u_of_t`, `z_of_t`
// interpolate the harvested boundary data; `phi_t` the harvested field.
// Returns (times, y) sampled at every internal step.
struct DelayOdeResult {
    std::vector<double> t;
    std::vector<double> y;
};
DelayOdeResult integrate_delay_ode(const std::function<double(double)>& u_of_t,
                                   const std::function<double(double)>& z_of_t,
                                   const std::function<double(double, double)>& phi_t, double y_start,
                                   double t_end, double dt, const DrillParams& params,
                                   const DampingSpec& damping);

// --- exact-transport closed loop --------------------------------------------

// Closed loop where the undamped string is represented exactly by its
// characteristic transport: with u = z/c + v the downgoing wave is -c v(t)/2,
// so  y(t - omega) = z(t) + (c/2)(v(t) - v(t - 2 omega))  holds identically
// and the bit obeys  J y' = -(G Gamma / c)(y + c v(t - omega)) + F_e(y).
// This is the reference loop on which the direct and the boundary-data error
// modes must agree to solver precision.  Requires F_d = 0 (the transport
// identity is an undamped statement); validated.
struct TransportLoopResult {
    std::vector<double> t;
    std::vector<double> y;
    std::vector<double> e_direct;
    std::vector<double> e_measured;
    double max_mode_gap = 0.0;  // max |e_direct - e_measured| over the run
};
TransportLoopResult run_transport_closed_loop(const ExperimentConfig& cfg, double dt);

} // namespace drillwave
