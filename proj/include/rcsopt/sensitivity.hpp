#pragma once

#include "rcsopt/ocp.hpp"

namespace rcsopt {

/// A = df/dx and B = df/dp at (state, nominal_param, control, time).
struct JacobianPair {
  MatrixXd A;  // n x n
  MatrixXd B;  // n x l
};

enum class JacobianScheme { FiniteDiff, UserSupplied };

struct FdOptions {
  double step_scale = 1e-6;  // h = step_scale * max(1, |value|), central
};

JacobianPair jacobians(const OcpProblem& problem, const VectorXd& state,
                       const VectorXd& control, double time,
                       JacobianScheme scheme = JacobianScheme::FiniteDiff,
                       const FdOptions& fd = {});

/// dg/dx (k x n) and dg/dp (k x l) at (state, nominal_param, time).
std::pair<MatrixXd, MatrixXd> constraint_jacobians(const OcpProblem& problem,
                                                   const VectorXd& state,
                                                   double time,
                                                   const FdOptions& fd = {});

/// Time derivative of the coupled (x, S) system: xdot = f, Sdot = A S + B.
/// The A*S product is formed by directional differencing of f along the
/// columns of S, so no full Jacobian is built. With a sensitivity mask only
/// masked entries of Sdot are kept (the rest stay structurally zero).
struct AugmentedRhs {
  VectorXd xdot;  // n
  MatrixXd Sdot;  // n x l
};
AugmentedRhs augmented_rhs(const OcpProblem& problem, const VectorXd& x,
                           const MatrixXd& S, const VectorXd& u, double t,
                           const FdOptions& fd = {});

/// Piecewise-linear control over a time grid, clamped to the control box;
/// constant beyond the grid ends.
class ControlSignal {
 public:
  ControlSignal() = default;
  ControlSignal(VectorXd times, MatrixXd values, VectorXd lower, VectorXd upper);
  static ControlSignal from_trajectory(const OcpProblem& problem,
                                       const Trajectory& traj);
  VectorXd at(double t) const;
  double start_time() const { return times_[0]; }
  double end_time() const { return times_[times_.size() - 1]; }
  int dim() const { return static_cast<int>(values_.cols()); }
  int num_knots() const { return static_cast<int>(times_.size()); }

 private:
  VectorXd times_;
  MatrixXd values_;  // num_knots x m
  VectorXd lower_, upper_;
};

struct PropagateOptions {
  int substeps = 10;  // fixed RK4 substeps per grid interval
  FdOptions fd;
};

/// Integrates xdot = f(x, p0, u(t), t) and Sdot = A S + B from (x0, S=0)
/// over `grid` with fixed-step RK4. Returns a trajectory with sensitivities
/// and nominal constraint values populated.
Trajectory propagate_augmented(const OcpProblem& problem,
                               const ControlSignal& control,
                               const VectorXd& grid,
                               const PropagateOptions& options = {});

/// Plain state integration (no sensitivities) under an arbitrary parameter
/// vector, fixed-step RK4 on `grid`. Used by the finite-difference oracles.
MatrixXd integrate_states(const OcpProblem& problem, const ControlSignal& control,
                          const VectorXd& grid, const VectorXd& param,
                          int substeps = 10);

/// S_g = dg/dx * S + dg/dp at (state, nominal_param, time).
MatrixXd constraint_sensitivity(const OcpProblem& problem, const VectorXd& state,
                                const MatrixXd& S, double time,
                                const FdOptions& fd = {});

/// First-order state prediction x(p0 + delta_p, t) ~ x(p0, t) + S(t) delta_p
/// at every grid node. Requires sensitivities.
MatrixXd first_order_predict(const Trajectory& traj, const VectorXd& delta_p);

}  // namespace rcsopt
