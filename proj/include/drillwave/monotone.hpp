#pragma once

#include "drillwave/config.hpp"
#include "drillwave/fdsolver.hpp"
#include "drillwave/model.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace drillwave {

// First-order energy formulation of the string/bit system.  Full state
//   x = (tau_0..tau_{n-1}, L_0..L_{n-1}, L_b),
// with tau = G phi_xi (stress), L = rho phi_t (momentum density) and
// L_b = J y (bit angular momentum).  The weighted inner product
//   <x, x>_H = sum w_i tau_i^2 / G + sum w_i L_i^2 / rho + L_b^2 / (J Gamma)
// (w = trapezoid weights) doubles the physical energy, so the linear part
//   tau' = (G/rho) D1 L,   L' = D1 tau,   L_b' = -Gamma tau_{n-1}
// is exactly skew on the constraint subspace
//   V = { tau_0 = 0,  L_{n-1}/rho = L_b/J }
// by the summation-by-parts identity of the (2,1) difference pair.  The
// nonlinear friction terms are monotone in the same inner product whenever
// F_d is nondecreasing and F_e is nonincreasing.
//
// Reduced coordinates on V:
//   q = (tau_1..tau_{n-1}, L_0..L_{n-2}, L_b),  dim 2n-1,
// with the bit momentum representing both L_{n-1} = (rho/J) L_b and L_b.
// The inhomogeneous boundary condition tau_0 = u(t) is handled by the
// constant lift p = (1,...,1, 0,...,0, 0): z = x - u p lies in V and obeys
//   z' = D z + B(z) + f(t),   f(t) = -udot p - u Gamma e_{L_b},
// because D1 annihilates constants and B never reads the tau block.
class EnergySystem {
  public:
    EnergySystem(const DrillParams& params, const DampingSpec& damping, int n_points);

    int n() const { return n_; }
    int dim_full() const { return 2 * n_ + 1; }
    int dim_red() const { return 2 * n_ - 1; }
    double dxi() const { return dxi_; }
    const DrillParams& params() const { return params_; }
    const DampingSpec& damping() const { return damping_; }

    const Eigen::VectorXd& H_full() const { return H_full_; }
    const Eigen::VectorXd& H_red() const { return H_red_; }
    const Eigen::MatrixXd& D_red() const { return D_red_; }

    double inner_full(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
    double inner_red(const Eigen::VectorXd& q, const Eigen::VectorXd& r) const;
    double norm_red(const Eigen::VectorXd& q) const;

    // <x,x>_H of the physical state x = embed(q) + u p; same doubled-energy
    // convention as the grid engine's energy column.
    double energy_full(const Eigen::VectorXd& x) const;

    Eigen::VectorXd embed(const Eigen::VectorXd& q) const;
    // Reduced coordinates of the H-orthogonal projection onto V.
    Eigen::VectorXd reduce(const Eigen::VectorXd& x) const;
    Eigen::VectorXd lift_p() const;  // the constant-stress lift

    // Residual of the summation-by-parts boundary identity for arbitrary
    // full states (zero to rounding): <x,Dy>_H + <y,Dx>_H minus its boundary
    // closure.
    double skew_defect_full(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

    // Nonlinear part in reduced coordinates and its (diagonal) Jacobian.
    Eigen::VectorXd B_red(const Eigen::VectorXd& q) const;
    Eigen::VectorXd B_red_jacobian(const Eigen::VectorXd& q) const;
    Eigen::VectorXd f_red(double u, double udot) const;

    // Monotone operator orientation: A_t(q) = -(D q + B(q) + f_red(u, udot)).
    Eigen::VectorXd apply_A(const Eigen::VectorXd& q, double u, double udot) const;

    // Solves x - lambda (D x + B(x) + f) = rhs, i.e. x = (I + lambda A_t)^{-1} rhs,
    // by damped Newton (tol on the residual 2-norm, relative to |rhs|).
    Eigen::VectorXd resolvent(const Eigen::VectorXd& rhs, double lambda, double u, double udot,
                              double tol = 1e-12, int max_iter = 30) const;

    // Yosida approximation A_lambda = (I - (I + lambda A)^{-1}) / lambda.
    Eigen::VectorXd yosida(const Eigen::VectorXd& q, double lambda, double u, double udot,
                           double tol = 1e-12) const;

  private:
    int n_ = 0;
    double dxi_ = 0.0;
    DrillParams params_;
    DampingSpec damping_;
    Eigen::VectorXd w_;       // trapezoid weights, size n
    Eigen::VectorXd H_full_;  // diagonal metric, size 2n+1
    Eigen::VectorXd H_red_;   // diagonal metric on V, size 2n-1
    Eigen::MatrixXd D_full_;
    Eigen::MatrixXd D_red_;
    double m_b_ = 0.0;  // merged bit weight in H_red
};

// Max symmetrized form |<q1, D q2>_H + <q2, D q1>_H| over random reduced
// pairs, normalized by |q1|_H |q2|_H |D|_inf.  Machine-zero when the
// discrete structure is skew.
double check_skew(const EnergySystem& sys, int n_samples, std::uint64_t seed);

// Implicit closed-loop engine: backward Euler on the lifted reduced state
// with the funnel controller solved per step by a scalar Newton iteration
// (the integral term is advanced by backward Euler inside the same solve),
// and the input u = z/c + v converged by a short fixed-point pass on z.
ClosedLoopResult run_implicit(const ExperimentConfig& cfg, const ResolvedRun& run);

} // namespace drillwave
