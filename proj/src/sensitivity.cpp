#include "rcsopt/sensitivity.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rcsopt {

using detail::require;

namespace {

double step_for(double value, const FdOptions& fd) {
  return fd.step_scale * std::max(1.0, std::abs(value));
}

void check_finite(const VectorXd& v, const char* what, double t) {
  for (int i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream os;
      os << what << " produced non-finite value at index " << i << " (t=" << t
         << ")";
      throw std::runtime_error(os.str());
    }
  }
}

// Which parameter columns carry any propagated sensitivity entry.
std::vector<int> active_params(const OcpProblem& problem) {
  std::vector<int> cols;
  if (!problem.sensitivity_mask) {
    cols.resize(problem.param_dim);
    for (int j = 0; j < problem.param_dim; ++j) cols[j] = j;
    return cols;
  }
  std::vector<bool> seen(problem.param_dim, false);
  for (const auto& [s, p] : *problem.sensitivity_mask) seen[p] = true;
  for (int j = 0; j < problem.param_dim; ++j)
    if (seen[j]) cols.push_back(j);
  return cols;
}

}  // namespace

JacobianPair jacobians(const OcpProblem& problem, const VectorXd& state,
                       const VectorXd& control, double time,
                       JacobianScheme scheme, const FdOptions& fd) {
  require(static_cast<int>(state.size()) == problem.state_dim,
          "jacobians: state size mismatch");
  require(static_cast<int>(control.size()) == problem.control_dim,
          "jacobians: control size mismatch");
  const int n = problem.state_dim;
  const int l = problem.param_dim;
  JacobianPair out;

  if (scheme == JacobianScheme::UserSupplied) {
    require(static_cast<bool>(problem.dynamics_jac_state) &&
                static_cast<bool>(problem.dynamics_jac_param),
            "jacobians: user scheme requested but callbacks missing");
    out.A = problem.dynamics_jac_state(state, problem.nominal_param, control, time);
    out.B = problem.dynamics_jac_param(state, problem.nominal_param, control, time);
    return out;
  }

  out.A.resize(n, n);
  VectorXd xp = state, xm = state;
  for (int j = 0; j < n; ++j) {
    const double h = step_for(state[j], fd);
    xp[j] = state[j] + h;
    xm[j] = state[j] - h;
    const VectorXd fp = problem.dynamics(xp, problem.nominal_param, control, time);
    const VectorXd fm = problem.dynamics(xm, problem.nominal_param, control, time);
    check_finite(fp, "dynamics", time);
    check_finite(fm, "dynamics", time);
    out.A.col(j) = (fp - fm) / (2.0 * h);
    xp[j] = state[j];
    xm[j] = state[j];
  }

  out.B.resize(n, l);
  VectorXd pp = problem.nominal_param, pm = problem.nominal_param;
  for (int j = 0; j < l; ++j) {
    const double h = step_for(problem.nominal_param[j], fd);
    pp[j] += h;
    pm[j] -= h;
    const VectorXd fp = problem.dynamics(state, pp, control, time);
    const VectorXd fm = problem.dynamics(state, pm, control, time);
    check_finite(fp, "dynamics", time);
    check_finite(fm, "dynamics", time);
    out.B.col(j) = (fp - fm) / (2.0 * h);
    pp[j] = problem.nominal_param[j];
    pm[j] = problem.nominal_param[j];
  }
  return out;
}

std::pair<MatrixXd, MatrixXd> constraint_jacobians(const OcpProblem& problem,
                                                   const VectorXd& state,
                                                   double time,
                                                   const FdOptions& fd) {
  const int n = problem.state_dim;
  const int l = problem.param_dim;
  const int k = problem.constraint_dim;
  MatrixXd dgdx(k, n), dgdp(k, l);
  if (k == 0) return {dgdx, dgdp};

  if (problem.constraint_jac_state) {
    dgdx = problem.constraint_jac_state(state, problem.nominal_param, time);
  } else {
    VectorXd xp = state, xm = state;
    for (int j = 0; j < n; ++j) {
      const double h = step_for(state[j], fd);
      xp[j] = state[j] + h;
      xm[j] = state[j] - h;
      dgdx.col(j) = (problem.path_constraints(xp, problem.nominal_param, time) -
                     problem.path_constraints(xm, problem.nominal_param, time)) /
                    (2.0 * h);
      xp[j] = state[j];
      xm[j] = state[j];
    }
  }
  if (problem.constraint_jac_param) {
    dgdp = problem.constraint_jac_param(state, problem.nominal_param, time);
  } else {
    VectorXd pp = problem.nominal_param, pm = problem.nominal_param;
    for (int j = 0; j < l; ++j) {
      const double h = step_for(problem.nominal_param[j], fd);
      pp[j] += h;
      pm[j] -= h;
      dgdp.col(j) = (problem.path_constraints(state, pp, time) -
                     problem.path_constraints(state, pm, time)) /
                    (2.0 * h);
      pp[j] = problem.nominal_param[j];
      pm[j] = problem.nominal_param[j];
    }
  }
  return {dgdx, dgdp};
}

AugmentedRhs augmented_rhs(const OcpProblem& problem, const VectorXd& x,
                           const MatrixXd& S, const VectorXd& u, double t,
                           const FdOptions& fd) {
  const int n = problem.state_dim;
  const int l = problem.param_dim;
  AugmentedRhs out;
  out.xdot = problem.dynamics(x, problem.nominal_param, u, t);
  check_finite(out.xdot, "dynamics", t);
  out.Sdot = MatrixXd::Zero(n, l);
  if (l == 0) return out;

  if (problem.dynamics_jac_state && problem.dynamics_jac_param) {
    const MatrixXd A = problem.dynamics_jac_state(x, problem.nominal_param, u, t);
    const MatrixXd B = problem.dynamics_jac_param(x, problem.nominal_param, u, t);
    out.Sdot = A * S + B;
    if (problem.sensitivity_mask) {
      MatrixXd filtered = MatrixXd::Zero(n, l);
      for (const auto& [s, p] : *problem.sensitivity_mask)
        filtered(s, p) = out.Sdot(s, p);
      out.Sdot.swap(filtered);
    }
    return out;
  }

  const double xscale = std::max(1.0, x.lpNorm<Eigen::Infinity>());
  VectorXd pp = problem.nominal_param, pm = problem.nominal_param;
  for (int j : active_params(problem)) {
    // A * S_col by directional differencing of f along the column.
    const VectorXd dir = S.col(j);
    VectorXd col = VectorXd::Zero(n);
    const double dscale = dir.lpNorm<Eigen::Infinity>();
    if (dscale > 0.0) {
      const double eps = fd.step_scale * xscale / std::max(1.0, dscale);
      const VectorXd fp = problem.dynamics(x + eps * dir, problem.nominal_param, u, t);
      const VectorXd fm = problem.dynamics(x - eps * dir, problem.nominal_param, u, t);
      check_finite(fp, "dynamics", t);
      check_finite(fm, "dynamics", t);
      col = (fp - fm) / (2.0 * eps);
    }
    // + B column.
    const double h = step_for(problem.nominal_param[j], fd);
    pp[j] += h;
    pm[j] -= h;
    const VectorXd fp = problem.dynamics(x, pp, u, t);
    const VectorXd fm = problem.dynamics(x, pm, u, t);
    check_finite(fp, "dynamics", t);
    check_finite(fm, "dynamics", t);
    col += (fp - fm) / (2.0 * h);
    pp[j] = problem.nominal_param[j];
    pm[j] = problem.nominal_param[j];
    out.Sdot.col(j) = col;
  }
  if (problem.sensitivity_mask) {
    MatrixXd filtered = MatrixXd::Zero(n, l);
    for (const auto& [s, p] : *problem.sensitivity_mask)
      filtered(s, p) = out.Sdot(s, p);
    out.Sdot.swap(filtered);
  }
  return out;
}

ControlSignal::ControlSignal(VectorXd times, MatrixXd values, VectorXd lower,
                             VectorXd upper)
    : times_(std::move(times)),
      values_(std::move(values)),
      lower_(std::move(lower)),
      upper_(std::move(upper)) {
  require(times_.size() >= 1 && values_.rows() == times_.size(),
          "ControlSignal: times/values mismatch");
}

ControlSignal ControlSignal::from_trajectory(const OcpProblem& problem,
                                             const Trajectory& traj) {
  return ControlSignal(traj.times, traj.controls, problem.control_lower,
                       problem.control_upper);
}

VectorXd ControlSignal::at(double t) const {
  const int N = static_cast<int>(times_.size());
  VectorXd u;
  if (t <= times_[0]) {
    u = values_.row(0).transpose();
  } else if (t >= times_[N - 1]) {
    u = values_.row(N - 1).transpose();
  } else {
    int hi = 1;
    while (times_[hi] < t) ++hi;
    const double w = (t - times_[hi - 1]) / (times_[hi] - times_[hi - 1]);
    u = ((1.0 - w) * values_.row(hi - 1) + w * values_.row(hi)).transpose();
  }
  for (int i = 0; i < u.size(); ++i)
    u[i] = std::min(std::max(u[i], lower_[i]), upper_[i]);
  return u;
}

Trajectory propagate_augmented(const OcpProblem& problem,
                               const ControlSignal& control,
                               const VectorXd& grid,
                               const PropagateOptions& options) {
  const int N = static_cast<int>(grid.size());
  require(N >= 2, "propagate_augmented: grid needs at least two nodes");
  require(std::abs(grid[0] - problem.initial_time) < 1e-12,
          "propagate_augmented: grid must start at initial_time");
  for (int i = 1; i < N; ++i)
    require(grid[i] > grid[i - 1],
            "propagate_augmented: grid must be strictly increasing");

  const int n = problem.state_dim;
  const int l = problem.param_dim;
  const int k = problem.constraint_dim;

  Trajectory traj;
  traj.times = grid;
  traj.states.resize(N, n);
  traj.controls.resize(N, problem.control_dim);
  traj.sensitivities.assign(N, MatrixXd::Zero(n, l));
  traj.constraint_values.resize(N, k);
  traj.final_time = grid[N - 1];

  VectorXd x = problem.initial_state;
  MatrixXd S = MatrixXd::Zero(n, l);

  auto record = [&](int i) {
    traj.states.row(i) = x.transpose();
    traj.controls.row(i) = control.at(grid[i]).transpose();
    traj.sensitivities[i] = S;
    if (k > 0)
      traj.constraint_values.row(i) =
          problem.path_constraints(x, problem.nominal_param, grid[i]).transpose();
  };
  record(0);

  const int sub = std::max(1, options.substeps);
  for (int i = 0; i < N - 1; ++i) {
    const double h = (grid[i + 1] - grid[i]) / sub;
    double t = grid[i];
    for (int s = 0; s < sub; ++s) {
      const auto k1 = augmented_rhs(problem, x, S, control.at(t), t, options.fd);
      const auto k2 = augmented_rhs(problem, x + 0.5 * h * k1.xdot,
                                    S + 0.5 * h * k1.Sdot,
                                    control.at(t + 0.5 * h), t + 0.5 * h,
                                    options.fd);
      const auto k3 = augmented_rhs(problem, x + 0.5 * h * k2.xdot,
                                    S + 0.5 * h * k2.Sdot,
                                    control.at(t + 0.5 * h), t + 0.5 * h,
                                    options.fd);
      const auto k4 =
          augmented_rhs(problem, x + h * k3.xdot, S + h * k3.Sdot,
                        control.at(t + h), t + h, options.fd);
      x += (h / 6.0) * (k1.xdot + 2.0 * k2.xdot + 2.0 * k3.xdot + k4.xdot);
      S += (h / 6.0) * (k1.Sdot + 2.0 * k2.Sdot + 2.0 * k3.Sdot + k4.Sdot);
      t += h;
      if (!x.allFinite() || !S.allFinite()) {
        std::ostringstream os;
        os << "propagation diverged at t=" << t;
        throw std::runtime_error(os.str());
      }
    }
    record(i + 1);
  }

  traj.nominal_cost = evaluate_cost(problem, traj);
  return traj;
}

MatrixXd integrate_states(const OcpProblem& problem, const ControlSignal& control,
                          const VectorXd& grid, const VectorXd& param,
                          int substeps) {
  const int N = static_cast<int>(grid.size());
  require(N >= 2, "integrate_states: grid needs at least two nodes");
  MatrixXd states(N, problem.state_dim);
  VectorXd x = problem.initial_state;
  states.row(0) = x.transpose();
  const int sub = std::max(1, substeps);
  for (int i = 0; i < N - 1; ++i) {
    const double h = (grid[i + 1] - grid[i]) / sub;
    double t = grid[i];
    for (int s = 0; s < sub; ++s) {
      const VectorXd k1 = problem.dynamics(x, param, control.at(t), t);
      const VectorXd k2 = problem.dynamics(x + 0.5 * h * k1, param,
                                           control.at(t + 0.5 * h), t + 0.5 * h);
      const VectorXd k3 = problem.dynamics(x + 0.5 * h * k2, param,
                                           control.at(t + 0.5 * h), t + 0.5 * h);
      const VectorXd k4 =
          problem.dynamics(x + h * k3, param, control.at(t + h), t + h);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += h;
    }
    if (!x.allFinite()) {
      std::ostringstream os;
      os << "integration diverged at t=" << t;
      throw std::runtime_error(os.str());
    }
    states.row(i + 1) = x.transpose();
  }
  return states;
}

MatrixXd constraint_sensitivity(const OcpProblem& problem, const VectorXd& state,
                                const MatrixXd& S, double time,
                                const FdOptions& fd) {
  require(S.rows() == problem.state_dim && S.cols() == problem.param_dim,
          "constraint_sensitivity: S dimensions mismatch");
  const auto [dgdx, dgdp] = constraint_jacobians(problem, state, time, fd);
  return dgdx * S + dgdp;
}

MatrixXd first_order_predict(const Trajectory& traj, const VectorXd& delta_p) {
  require(traj.has_sensitivities(),
          "first_order_predict requires sensitivities");
  const int N = traj.num_nodes();
  require(traj.sensitivities[0].cols() == delta_p.size(),
          "first_order_predict: delta_p size mismatch");
  MatrixXd out = traj.states;
  for (int i = 0; i < N; ++i)
    out.row(i) += (traj.sensitivities[i] * delta_p).transpose();
  return out;
}

}  // namespace rcsopt
