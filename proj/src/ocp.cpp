#include "rcsopt/ocp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rcsopt {

namespace detail {
void require(bool cond, const std::string& message) {
  if (!cond) throw std::invalid_argument(message);
}
}  // namespace detail

using detail::require;

int OcpProblem::terminal_dim() const {
  if (!terminal_condition) return 0;
  const VectorXd r = terminal_condition(initial_state, initial_time);
  return static_cast<int>(r.size());
}

void OcpProblem::validate() const {
  require(state_dim > 0, "state_dim must be positive");
  require(param_dim >= 0, "param_dim must be nonnegative");
  require(control_dim > 0, "control_dim must be positive");
  require(constraint_dim >= 0, "constraint_dim must be nonnegative");
  require(static_cast<int>(initial_state.size()) == state_dim,
          "initial_state size != state_dim");
  require(static_cast<int>(nominal_param.size()) == param_dim,
          "nominal_param size != param_dim");
  require(static_cast<int>(control_lower.size()) == control_dim &&
              static_cast<int>(control_upper.size()) == control_dim,
          "control bounds size != control_dim");
  for (int i = 0; i < control_dim; ++i)
    require(control_lower[i] <= control_upper[i],
            "control_lower must be <= control_upper componentwise");
  require(final_time_bounds.first <= final_time_bounds.second,
          "final_time_bounds must be ordered");
  require(final_time_bounds.first > initial_time,
          "final_time_bounds.min must exceed initial_time");
  require(static_cast<bool>(dynamics), "dynamics callback missing");
  if (constraint_dim > 0)
    require(static_cast<bool>(path_constraints),
            "path_constraints callback missing");
  if (sensitivity_mask) {
    for (const auto& [s, p] : *sensitivity_mask) {
      require(s >= 0 && s < state_dim && p >= 0 && p < param_dim,
              "sensitivity_mask entry out of range");
    }
  }

  // Callbacks must evaluate cleanly at the initial point with an in-box u.
  VectorXd u0(control_dim);
  for (int i = 0; i < control_dim; ++i) {
    double lo = control_lower[i], hi = control_upper[i];
    double v = 0.0;
    if (std::isfinite(lo) && std::isfinite(hi)) v = 0.5 * (lo + hi);
    else if (std::isfinite(lo)) v = lo;
    else if (std::isfinite(hi)) v = hi;
    u0[i] = v;
  }
  const VectorXd f0 = dynamics(initial_state, nominal_param, u0, initial_time);
  require(static_cast<int>(f0.size()) == state_dim,
          "dynamics returned wrong dimension");
  require(f0.allFinite(), "dynamics non-finite at initial point");
  if (constraint_dim > 0) {
    const VectorXd g0 =
        path_constraints(initial_state, nominal_param, initial_time);
    require(static_cast<int>(g0.size()) == constraint_dim,
            "path_constraints returned wrong dimension");
    require(g0.allFinite(), "path_constraints non-finite at initial point");
  }
}

std::string FeasibilityReport::describe() const {
  std::ostringstream os;
  os << (feasible ? "feasible" : "infeasible")
     << "; worst path violation " << worst_violation;
  if (worst_component >= 0)
    os << " (component " << worst_component << " at node " << worst_node
       << ", t=" << worst_time << ")";
  os << "; terminal residual " << terminal_residual;
  return os.str();
}

static void check_grid(const OcpProblem& problem, const Trajectory& traj) {
  require(traj.num_nodes() >= 2, "trajectory needs at least two nodes");
  require(traj.states.rows() == traj.num_nodes() &&
              traj.states.cols() == problem.state_dim,
          "trajectory state dimensions inconsistent with problem");
  require(traj.controls.rows() == traj.num_nodes() &&
              traj.controls.cols() == problem.control_dim,
          "trajectory control dimensions inconsistent with problem");
  for (int i = 1; i < traj.num_nodes(); ++i)
    require(traj.times[i] > traj.times[i - 1],
            "trajectory times must be strictly increasing");
}

double evaluate_cost(const OcpProblem& problem, const Trajectory& traj) {
  check_grid(problem, traj);
  const int N = traj.num_nodes();
  double integral = 0.0;
  double prev = problem.running_cost
                    ? problem.running_cost(traj.states.row(0).transpose(),
                                           traj.controls.row(0).transpose(),
                                           traj.times[0])
                    : 0.0;
  for (int i = 1; i < N; ++i) {
    const double cur = problem.running_cost
                           ? problem.running_cost(traj.states.row(i).transpose(),
                                                  traj.controls.row(i).transpose(),
                                                  traj.times[i])
                           : 0.0;
    integral += 0.5 * (traj.times[i] - traj.times[i - 1]) * (prev + cur);
    prev = cur;
  }
  const double tf = traj.times[N - 1];
  const double terminal =
      problem.terminal_cost
          ? problem.terminal_cost(traj.states.row(N - 1).transpose(), tf)
          : 0.0;
  return terminal + integral;
}

VectorXd evaluate_constraints(const OcpProblem& problem, const VectorXd& state,
                              const VectorXd& param, double time) {
  require(static_cast<int>(state.size()) == problem.state_dim,
          "state size != state_dim");
  require(static_cast<int>(param.size()) == problem.param_dim,
          "param size != param_dim");
  if (problem.constraint_dim == 0) return VectorXd(0);
  VectorXd g = problem.path_constraints(state, param, time);
  require(static_cast<int>(g.size()) == problem.constraint_dim,
          "path_constraints returned wrong dimension");
  return g;
}

FeasibilityReport check_feasibility(const OcpProblem& problem,
                                    const Trajectory& traj, double tol) {
  require(tol >= 0.0, "tolerance must be nonnegative");
  check_grid(problem, traj);
  FeasibilityReport report;
  report.worst_violation = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < traj.num_nodes(); ++i) {
    const VectorXd g = evaluate_constraints(
        problem, traj.states.row(i).transpose(), problem.nominal_param,
        traj.times[i]);
    for (int c = 0; c < g.size(); ++c) {
      if (g[c] > report.worst_violation) {
        report.worst_violation = g[c];
        report.worst_component = c;
        report.worst_node = i;
        report.worst_time = traj.times[i];
      }
    }
  }
  if (problem.constraint_dim == 0) report.worst_violation = 0.0;

  report.terminal_residual = 0.0;
  if (problem.terminal_condition) {
    const VectorXd r = problem.terminal_condition(
        traj.states.row(traj.num_nodes() - 1).transpose(),
        traj.times[traj.num_nodes() - 1]);
    report.terminal_residual = r.size() > 0 ? r.lpNorm<Eigen::Infinity>() : 0.0;
  }
  report.terminal_ok = report.terminal_residual <= tol;
  report.feasible = report.terminal_ok && report.worst_violation <= tol;
  return report;
}

}  // namespace rcsopt
