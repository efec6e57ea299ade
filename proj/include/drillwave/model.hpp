#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace drillwave {

// Physical constants of the string/bit system.  All of them must be strictly
// positive; `c` and `omega` are derived, not stored, so they can never drift
// out of sync with the primitives.
struct DrillParams {
    double ell = 1.0;    // string length
    double rho = 1.0;    // linear density
    double G = 1.0;      // shear stiffness
    double J = 1.0;      // bit inertia
    double Gamma = 1.0;  // bit coupling gain

    double c() const;      // wave speed sqrt(G / rho)
    double omega() const;  // one-way travel time ell / c

    // Throws ConfigError naming the offending field.
    void validate() const;
};

// --- distributed damping laws -------------------------------------------

// F_d(xi, v) = gain * atan(v), independent of position.
struct ArctanScale {
    double gain = 0.3;
};

// Tabulated law, piecewise linear in v and independent of position.  The
// table must be strictly increasing in v, nondecreasing in torque, and
// interpolate to zero at v = 0.  Outside the tabulated range the torque is
// clamped to the end values (keeps the law bounded and monotone).
struct DampingTable {
    std::vector<double> velocity;
    std::vector<double> torque;
};

using DistributedLaw = std::variant<std::monostate, ArctanScale, DampingTable>;

// --- boundary (bit) friction ---------------------------------------------

// Regularized Coulomb friction with a Stribeck bump:
//   F_e(v) = -A * v/s * (1 + h * exp(-s/Delta)),   s = sqrt(v^2 + eps^2).
// Dissipative (v * F_e <= 0) but not monotone when h > 0.
struct RegularizedCoulomb {
    double amplitude = 1.0;   // A
    double eps = 1e-3;        // regularization width
    double bump = 0.1;        // h, Stribeck overshoot
    double decay = 0.1;       // Delta, Stribeck decay length
};

using BoundaryLaw = std::variant<std::monostate, RegularizedCoulomb>;

// Bundle of both laws.  `ell` is carried along so position arguments can be
// range-checked where the damping is evaluated.
struct DampingSpec {
    DistributedLaw distributed;
    BoundaryLaw boundary;
    double ell = 1.0;

    bool has_distributed() const { return !std::holds_alternative<std::monostate>(distributed); }
    bool has_boundary() const { return !std::holds_alternative<std::monostate>(boundary); }

    // F_d(xi, v).  Throws ConfigError if xi lies outside [0, ell] (modulo a
    // relative 1e-12 slack for roundoff in characteristic tracing).
    double Fd(double xi, double v) const;
    // dF_d/dv, used by implicit solves.  Same domain check as Fd.
    double Fd_dv(double xi, double v) const;
    // Global bound sup |F_d|; 0 when no distributed law is set.
    double Fd_sup() const;
    // Lipschitz bound sup |dF_d/dv|; drives contraction estimates and the
    // explicit-engine step bound.
    double Fd_dv_sup() const;

    double Fe(double v) const;
    double Fe_dv(double v) const;
    // Global bound sup |F_e|.
    double Fe_sup() const;
    // Stiffness bound |dF_e/dv| at v = 0, where the regularized law is
    // steepest (A (1 + h) / eps); this is what limits explicit steps.
    double Fe_dv_sup() const;

    // Table sanity (monotone, zero at v=0).  Called by config loading.
    void validate() const;
};

// --- reference signal -----------------------------------------------------

// Reference bit velocity y_ref, defined on [-omega, inf).  Either a constant
// or a piecewise-linear table (clamped outside the tabulated range so the
// signal and its derivative stay bounded).
struct ReferenceSpec {
    struct Table {
        std::vector<double> t;
        std::vector<double> y;
    };
    std::variant<double, Table> signal = 5.0;

    double value(double t) const;
    double derivative(double t) const;  // piecewise constant for tables, 0 for constants
    double sup_abs() const;             // sup |y_ref|; bounds the static control demand
    void validate() const;
};

} // namespace drillwave
