#pragma once

#include "drillwave/config.hpp"
#include "drillwave/model.hpp"
#include "drillwave/trace.hpp"

#include <functional>
#include <vector>

namespace drillwave {

// Uniform spatial grid over [0, ell]: n nodes, spacing dxi = ell / (n - 1).
struct SpatialGrid {
    int n = 0;
    double dxi = 0.0;
    double ell = 0.0;

    double node(int i) const { return (i == n - 1) ? ell : dxi * i; }
};

// Method-of-lines state of the closed-loop solver.  vel.back() is the bit
// velocity y, vel.front() is the top-boundary velocity z; I is the delay
// compensator state carried inside the RK4 state vector so it sees the same
// substage treatment as the plant.
struct SimState {
    std::vector<double> phi;
    std::vector<double> vel;
    double I = 0.0;
    double t = 0.0;

    double y() const { return vel.back(); }
    double z() const { return vel.front(); }
};

// Ghost node eliminating the inhomogeneous Neumann condition
// G * phi_xi(0) = u with a one-sided difference: phi_{-1} = phi_0 - dxi*u/G.
double ghost_value(double phi0, double u, double G, double dxi);

// Time derivative of (phi, vel) under the wave stencil:
//   interior: vel' = c^2 (phi_{i+1} - 2 phi_i + phi_{i-1}) / dxi^2 - F_d(xi_i, vel_i)
//   top:      same stencil with the ghost node carrying the input u
//   bit:      J vel' = -Gamma G phi_xi(ell) + F_e(vel),  phi_xi one-sided 2nd order
// Distributed damping acts on the string nodes (0 .. n-2); the bit node has
// its own friction law.  `u` is the boundary input at the evaluation time.
void wave_rhs(const std::vector<double>& phi, const std::vector<double>& vel, double u,
              const DrillParams& p, const DampingSpec& damping, const SpatialGrid& grid,
              std::vector<double>& dphi, std::vector<double>& dvel);

// Energy of a closed-loop state:
//   dxi * rho * sum_{i<n-1} vel_i^2  +  (G/dxi) * sum (phi_{i+1}-phi_i)^2  +  (J/Gamma) * y^2.
// The staggered strain sum and the end weights are chosen so this is the
// exact invariant of the semidiscrete free flow (drift comes from time
// integration only), not merely a second-order quadrature of the continuum
// energy.  The bit node's kinetic energy is carried by the J/Gamma term.
double discrete_energy(const SimState& s, const DrillParams& p, const SpatialGrid& grid);

// --- closed-loop run -------------------------------------------------------

// Per-step artifacts beyond the scalar series, for oracle harnesses: field
// snapshots of phi_t at every step (frame k belongs to time k * dt).
struct FieldHistory {
    SpatialGrid grid;
    std::vector<double> times;
    std::vector<std::vector<double>> vel_frames;

    // Bilinear interpolation (linear in xi and in t).
    double value(double xi, double t) const;
};

struct ClosedLoopResult {
    StepSeries steps;
    SimTrace trace;
    RunSummary summary;
    SimState final_state;
};

// Integrates the funnel-controlled loop: classical RK4 at the resolved fixed
// step by default, or the embedded 2(3) pair with error-adapted steps when
// cfg.time.integrator selects it.  Throws FunnelViolation if |e| reaches 1
// along the committed trajectory (the adaptive loop first retries a smaller
// step, since a too-large trial stage can leave the funnel spuriously).
// `fields` (optional) receives phi_t snapshots at every accepted step.
ClosedLoopResult run_closed_loop(const ExperimentConfig& cfg, const ResolvedRun& run,
                                 FieldHistory* fields = nullptr);

// --- open-loop / free-wave harnesses ---------------------------------------

// Open loop: the same boundary structure (Neumann top, bit dynamics) with
// u = 0 and no controller.  Used for oracle comparisons in the interior of
// the domain of dependence, where the boundary treatment cannot matter.
struct OpenLoopResult {
    FieldHistory fields;
    std::vector<double> energy;
};
OpenLoopResult run_open_loop(const DrillParams& p, const DampingSpec& damping,
                             const std::function<double(double)>& phi0,
                             const std::function<double(double)>& v0, double t_end, double dxi,
                             double dt);

// Free wave with homogeneous Dirichlet ends (both boundary angles pinned at
// zero, no bit dynamics, no input).  This is the configuration whose discrete
// energy the scheme conserves exactly in semidiscrete time, so it is what the
// conservation checks run on.
struct FreeWaveResult {
    SpatialGrid grid;
    std::vector<double> times;
    std::vector<double> energy;
    std::vector<double> final_phi;
    std::vector<double> final_vel;
};
FreeWaveResult run_free_wave_dirichlet(const DrillParams& p, const DampingSpec* damping,
                                       const std::function<double(double)>& phi0,
                                       const std::function<double(double)>& v0, double t_end,
                                       double dxi, double dt);

// Dirichlet-run energy (no bit term; end velocities are identically zero).
double dirichlet_energy(const std::vector<double>& phi, const std::vector<double>& vel,
                        const DrillParams& p, const SpatialGrid& grid);

} // namespace drillwave
