#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rcsopt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using DynamicsFn = std::function<VectorXd(const VectorXd& x, const VectorXd& p,
                                          const VectorXd& u, double t)>;
using PathConstraintFn =
    std::function<VectorXd(const VectorXd& x, const VectorXd& p, double t)>;
using TerminalConditionFn = std::function<VectorXd(const VectorXd& x, double t)>;
using TerminalCostFn = std::function<double(const VectorXd& x, double t)>;
using RunningCostFn =
    std::function<double(const VectorXd& x, const VectorXd& u, double t)>;

/// Pairs of (state index, parameter index) whose sensitivity entries are
/// propagated. Everything outside the mask is structurally zero.
using SensitivityMask = std::vector<std::pair<int, int>>;

/// Continuous-time optimal control problem: minimize
/// terminal_cost(x(tf), tf) + integral of running_cost subject to
/// xdot = dynamics(x, p, u, t), path_constraints(x, p, t) <= 0 and
/// terminal_condition(x(tf), tf) = 0, with u boxed and tf free inside
/// final_time_bounds. Immutable after construction; all callbacks must be
/// pure functions.
struct OcpProblem {
  int state_dim = 0;       // n
  int param_dim = 0;       // l
  int control_dim = 0;     // m
  int constraint_dim = 0;  // k

  DynamicsFn dynamics;
  PathConstraintFn path_constraints;        // unused when constraint_dim == 0
  TerminalConditionFn terminal_condition;   // residual, satisfied when ~0
  TerminalCostFn terminal_cost;
  RunningCostFn running_cost;

  VectorXd initial_state;
  double initial_time = 0.0;
  VectorXd nominal_param;
  VectorXd control_lower, control_upper;
  std::pair<double, double> final_time_bounds{0.0, 0.0};

  /// Optional sparsity of the state-vs-parameter sensitivity matrix.
  std::optional<SensitivityMask> sensitivity_mask;

  /// Control indices that are angles (periodic in 2*pi). Kept unconstrained
  /// inside the solver; solutions are unwrapped to a continuous profile
  /// anchored in [0, 2*pi) at the first node.
  std::vector<int> angular_controls;

  // Optional analytic derivatives; finite differences are used when absent.
  std::function<MatrixXd(const VectorXd&, const VectorXd&, const VectorXd&, double)>
      dynamics_jac_state;  // df/dx, n x n
  std::function<MatrixXd(const VectorXd&, const VectorXd&, const VectorXd&, double)>
      dynamics_jac_param;  // df/dp, n x l
  std::function<MatrixXd(const VectorXd&, const VectorXd&, double)>
      constraint_jac_state;  // dg/dx, k x n
  std::function<MatrixXd(const VectorXd&, const VectorXd&, double)>
      constraint_jac_param;  // dg/dp, k x l

  int terminal_dim() const;  // q, probed from terminal_condition

  /// Throws std::invalid_argument when dimensions or bounds are inconsistent
  /// or a callback fails at the initial point.
  void validate() const;
};

/// Discrete trajectory on a strictly increasing time grid. `sensitivities`
/// is empty or holds one n x l matrix per node (dx/dp along the nominal
/// path, zero at the first node).
struct Trajectory {
  VectorXd times;
  MatrixXd states;    // num_nodes x n
  MatrixXd controls;  // num_nodes x m
  std::vector<MatrixXd> sensitivities;
  double final_time = 0.0;
  double nominal_cost = 0.0;
  double rcs_cost = 0.0;
  MatrixXd constraint_values;  // num_nodes x k

  int num_nodes() const { return static_cast<int>(times.size()); }
  bool has_sensitivities() const { return !sensitivities.empty(); }
};

struct FeasibilityReport {
  bool feasible = false;
  double worst_violation = 0.0;       // max over grid of max g component
  double worst_time = 0.0;
  int worst_component = -1;           // -1 when k == 0
  int worst_node = -1;
  double terminal_residual = 0.0;     // inf-norm of terminal condition
  bool terminal_ok = false;
  std::string describe() const;
};

/// phi(x(tf), tf) + trapezoidal quadrature of the running cost on traj.times.
double evaluate_cost(const OcpProblem& problem, const Trajectory& traj);

/// g(state, param, time); components > 0 are violations.
VectorXd evaluate_constraints(const OcpProblem& problem, const VectorXd& state,
                              const VectorXd& param, double time);

/// Feasible iff every g component <= tol on the grid and the terminal
/// residual inf-norm is <= tol.
FeasibilityReport check_feasibility(const OcpProblem& problem,
                                    const Trajectory& traj, double tol);

namespace detail {
void require(bool cond, const std::string& message);
}

}  // namespace rcsopt
