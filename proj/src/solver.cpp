#include "rcsopt/solver.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace rcsopt {

using detail::require;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double violation_of(const CollocationNlp::Eval& ev) {
  double v = 0.0;
  if (ev.ceq.size() > 0) v = ev.ceq.cwiseAbs().maxCoeff();
  if (ev.cineq.size() > 0) v = std::max(v, ev.cineq.maxCoeff());
  return std::max(v, 0.0);
}

double augmented_lagrangian(const CollocationNlp::Eval& ev, const VectorXd& lambda,
                            const VectorXd& mu, double rho) {
  double al = ev.objective;
  al += lambda.dot(ev.ceq) + 0.5 * rho * ev.ceq.squaredNorm();
  for (int i = 0; i < ev.cineq.size(); ++i) {
    const double t = std::max(0.0, mu[i] + rho * ev.cineq[i]);
    al += (t * t - mu[i] * mu[i]) / (2.0 * rho);
  }
  return al;
}

struct InnerResult {
  VectorXd z;
  double pg_norm = kInf;
  int iterations = 0;
  bool converged = false;
  std::string status;
};

// Projected damped Gauss-Newton on the augmented Lagrangian. The penalty
// part of the Hessian (the stiff part) is exact up to constraint curvature;
// Levenberg damping covers the rest. Variables pressed against an active
// bound are frozen for the step and re-examined every iteration.
InnerResult inner_minimize(const CollocationNlp& nlp, VectorXd z,
                           const VectorXd& lambda, const VectorXd& mu,
                           double rho, double tol, int max_iters) {
  const VectorXd& lo = nlp.lower();
  const VectorXd& hi = nlp.upper();
  const int dim = nlp.dim();
  z = z.cwiseMax(lo).cwiseMin(hi);

  const auto al_value = [&](const VectorXd& x) -> double {
    try {
      return augmented_lagrangian(nlp.evaluate(x), lambda, mu, rho);
    } catch (const std::runtime_error&) {
      return kInf;
    }
  };

  InnerResult res;
  MatrixXd H(dim, dim);
  double delta = 0.0;

  for (int it = 0; it < max_iters; ++it) {
    res.iterations = it + 1;
    const auto d = nlp.derivatives(z);
    const double al = augmented_lagrangian(d.eval, lambda, mu, rho);
    const VectorXd yeq = lambda + rho * d.eval.ceq;
    const VectorXd yineq = (mu + rho * d.eval.cineq).cwiseMax(0.0);
    VectorXd grad = nlp.objective_gradient(d);
    nlp.add_jacobian_transpose_product(d, yeq, yineq, grad);

    const VectorXd pg = z - (z - grad).cwiseMax(lo).cwiseMin(hi);
    res.pg_norm = pg.lpNorm<Eigen::Infinity>();
    if (res.pg_norm <= tol) {
      res.converged = true;
      res.status = "converged";
      break;
    }

    std::vector<std::uint8_t> active(nlp.num_ineq());
    for (int i = 0; i < nlp.num_ineq(); ++i) active[i] = yineq[i] > 0.0 ? 1 : 0;
    H.setZero();
    nlp.add_gauss_newton_hessian(d, active, rho, H);

    // Free set: strictly inside the box, or at a bound the gradient pulls
    // away from. Equal-bound variables are always frozen.
    std::vector<int> free_idx;
    free_idx.reserve(dim);
    for (int i = 0; i < dim; ++i) {
      if (lo[i] == hi[i]) continue;
      const double pad = 1e-10 * (1.0 + std::abs(z[i]));
      if (z[i] <= lo[i] + pad && grad[i] > 0.0) continue;
      if (z[i] >= hi[i] - pad && grad[i] < 0.0) continue;
      free_idx.push_back(i);
    }
    if (free_idx.empty()) {
      res.status = "all variables at active bounds";
      break;
    }
    const int nf = static_cast<int>(free_idx.size());
    MatrixXd Hff(nf, nf);
    VectorXd gf(nf);
    for (int a = 0; a < nf; ++a) {
      gf[a] = grad[free_idx[a]];
      for (int b = 0; b < nf; ++b) Hff(a, b) = H(free_idx[a], free_idx[b]);
    }
    const double diag_scale = std::max(1.0, Hff.diagonal().maxCoeff());
    if (delta <= 0.0) delta = 1e-10 * diag_scale;

    bool accepted = false;
    VectorXd z_new;
    double al_new = 0.0;
    for (int attempt = 0; attempt < 20 && !accepted; ++attempt) {
      MatrixXd Hd = Hff;
      Hd.diagonal().array() += delta;
      Eigen::LLT<MatrixXd> llt(Hd);
      if (llt.info() != Eigen::Success) {
        delta = std::max(delta * 100.0, 1e-12 * diag_scale);
        continue;
      }
      const VectorXd df = llt.solve(-gf);
      VectorXd dir = VectorXd::Zero(dim);
      for (int a = 0; a < nf; ++a) dir[free_idx[a]] = df[a];

      // Cap the step so angle-like variables cannot hop 2*pi branches of
      // periodic dynamics in a single iteration.
      const double dmax = dir.lpNorm<Eigen::Infinity>();
      double step = dmax > 2.0 ? 2.0 / dmax : 1.0;
      const double full_step = step;
      for (int ls = 0; ls < 40; ++ls) {
        const VectorXd zt = (z + step * dir).cwiseMax(lo).cwiseMin(hi);
        const VectorXd dz = zt - z;
        if (dz.lpNorm<Eigen::Infinity>() == 0.0) break;
        const double gd = grad.dot(dz);
        if (gd < 0.0) {
          const double alt = al_value(zt);
          if (std::isfinite(alt) && alt <= al + 1e-4 * gd) {
            z_new = zt;
            al_new = alt;
            accepted = true;
            if (step == full_step)
              delta = std::max(0.25 * delta, 1e-12 * diag_scale);
            else
              delta *= 2.0;
            break;
          }
        }
        step *= 0.5;
      }
      if (!accepted) delta = std::max(delta * 100.0, 1e-8 * diag_scale);
    }

    if (!accepted) {
      res.status = "step rejected";
      break;
    }
    const double dz_norm = (z_new - z).lpNorm<Eigen::Infinity>();
    const double dal = al - al_new;
    z = z_new;
    if (dz_norm <= 1e-14 * (1.0 + z.lpNorm<Eigen::Infinity>()) &&
        dal <= 1e-15 * std::max(1.0, std::abs(al))) {
      res.status = "stalled";
      break;
    }
  }
  if (res.status.empty()) res.status = "max inner iterations";
  res.z = std::move(z);
  return res;
}

}  // namespace

NlpSolution solve(const CollocationNlp& nlp, const Trajectory& initial_guess) {
  const TranscriptionOptions& opts = nlp.options();
  VectorXd z = nlp.initial_point(initial_guess);

  VectorXd lambda = VectorXd::Zero(nlp.num_eq());
  VectorXd mu = VectorXd::Zero(nlp.num_ineq());
  double rho = std::max(1.0, opts.initial_penalty);
  double eta = 1e-2;     // inner stationarity target, tightened over time
  double viol_ref = kInf;  // violation at the last multiplier update

  NlpSolution sol;
  sol.status = "max outer iterations";

  for (int outer = 0; outer < opts.max_outer_iterations; ++outer) {
    sol.outer_iterations = outer + 1;
    const InnerResult inner =
        inner_minimize(nlp, z, lambda, mu, rho,
                       std::max(eta, 0.5 * opts.kkt_tolerance),
                       opts.max_inner_iterations);
    z = inner.z;
    sol.inner_iterations += inner.iterations;

    const auto d = nlp.derivatives(z);
    const double viol = violation_of(d.eval);

    // Update multipliers only when the violation came down substantially
    // since the last update; raise the penalty otherwise. Unconditional
    // updates can blow the multipliers up and strand the inner solver at
    // spurious stationary points. At the penalty cap, update on any
    // non-worsening step so the loop cannot deadlock.
    bool updated = false;
    const bool at_cap = rho >= 1e7;
    if (viol <= std::max(0.25 * viol_ref, opts.path_constraint_tolerance) ||
        (at_cap && viol <= viol_ref)) {
      lambda = (lambda + rho * d.eval.ceq).cwiseMax(-1e8).cwiseMin(1e8);
      mu = (mu + rho * d.eval.cineq).cwiseMax(0.0).cwiseMin(1e8);
      eta = std::max(0.2 * eta, 0.1 * opts.kkt_tolerance);
      viol_ref = std::max(viol, 0.5 * opts.path_constraint_tolerance);
      // Once near-feasible, a stiffer penalty sharpens the multiplier
      // updates; the Newton inner loop is insensitive to the stiffness.
      if (viol <= 1e3 * opts.path_constraint_tolerance)
        rho = std::min(std::max(rho, 1e4), 1e7);
      updated = true;
    } else {
      rho = std::min(rho * 5.0, 1e7);
    }

    VectorXd gradL = nlp.objective_gradient(d);
    nlp.add_jacobian_transpose_product(d, lambda, mu, gradL);
    const VectorXd pg =
        z - (z - gradL).cwiseMax(nlp.lower()).cwiseMin(nlp.upper());
    sol.kkt_residual = pg.lpNorm<Eigen::Infinity>();
    sol.max_constraint_violation = viol;

    if (opts.verbosity >= 1)
      std::fprintf(stderr,
                   "[solver] outer=%d inner=%d obj=%.9g kkt=%.3e viol=%.3e "
                   "rho=%.1e %s (%s)\n",
                   outer + 1, inner.iterations, d.eval.objective,
                   sol.kkt_residual, viol, rho,
                   updated ? "update" : "penalty", inner.status.c_str());

    if (viol <= opts.path_constraint_tolerance &&
        sol.kkt_residual <= opts.kkt_tolerance) {
      sol.converged = true;
      sol.status = "converged";
      break;
    }
  }

  const auto ev = nlp.evaluate(z);
  sol.trajectory = nlp.decode(z);
  sol.trajectory.nominal_cost = ev.nominal_term;
  sol.trajectory.rcs_cost = ev.sens_term;
  sol.objective = ev.objective;
  sol.nominal_objective = ev.nominal_term;
  sol.sensitivity_objective = ev.sens_term;
  sol.smoothing_objective = ev.smooth_term;
  sol.max_constraint_violation = violation_of(ev);

  // Angles come back in arbitrary 2*pi branches; normalize to a continuous
  // profile so piecewise-linear control interpolation stays meaningful.
  for (int c : nlp.problem().angular_controls) {
    auto& u = sol.trajectory.controls;
    u(0, c) -= 2.0 * M_PI * std::floor(u(0, c) / (2.0 * M_PI));
    for (int i = 1; i < u.rows(); ++i)
      u(i, c) -= 2.0 * M_PI * std::round((u(i, c) - u(i - 1, c)) / (2.0 * M_PI));
  }
  return sol;
}

NlpSolution solve(const OcpProblem& problem, const TranscriptionOptions& options,
                  const Trajectory& initial_guess) {
  const CollocationNlp nlp(problem, options);
  return solve(nlp, initial_guess);
}

NlpSolution solve_desensitized(const OcpProblem& problem,
                               const TranscriptionOptions& options,
                               const std::vector<Trajectory>& seeds) {
  require(!seeds.empty(), "solve_desensitized needs at least one seed");
  const CollocationNlp nlp(problem, options);

  std::vector<NlpSolution> attempts;
  attempts.reserve(seeds.size());
  for (const auto& seed : seeds) attempts.push_back(solve(nlp, seed));

  int best = -1;
  for (int i = 0; i < static_cast<int>(attempts.size()); ++i) {
    if (!attempts[i].converged) continue;
    if (best < 0 || attempts[i].objective < attempts[best].objective ||
        (attempts[i].objective == attempts[best].objective &&
         attempts[i].max_constraint_violation <
             attempts[best].max_constraint_violation))
      best = i;
  }
  if (best >= 0) return attempts[best];

  // No seed converged: report the least-infeasible attempt with a summary.
  int fallback = 0;
  for (int i = 1; i < static_cast<int>(attempts.size()); ++i)
    if (attempts[i].max_constraint_violation <
        attempts[fallback].max_constraint_violation)
      fallback = i;
  std::ostringstream os;
  os << "all " << attempts.size() << " seeds failed:";
  for (size_t i = 0; i < attempts.size(); ++i)
    os << " [seed " << i << ": " << attempts[i].status
       << ", viol=" << attempts[i].max_constraint_violation << "]";
  attempts[fallback].status = os.str();
  return attempts[fallback];
}

Trajectory make_line_guess(const OcpProblem& problem, const VectorXd& final_state,
                           const VectorXd& constant_control, int num_nodes) {
  require(num_nodes >= 2, "make_line_guess: need at least two nodes");
  require(final_state.size() == problem.initial_state.size(),
          "make_line_guess: final_state dimension mismatch");
  double tf = 0.5 * (problem.final_time_bounds.first +
                     problem.final_time_bounds.second);
  if (!std::isfinite(tf)) tf = problem.final_time_bounds.first + 1.0;

  Trajectory traj;
  traj.times = VectorXd::LinSpaced(num_nodes, problem.initial_time, tf);
  traj.final_time = tf;
  traj.states.resize(num_nodes, problem.state_dim);
  traj.controls.resize(num_nodes, problem.control_dim);
  for (int i = 0; i < num_nodes; ++i) {
    const double w = static_cast<double>(i) / (num_nodes - 1);
    traj.states.row(i) =
        ((1.0 - w) * problem.initial_state + w * final_state).transpose();
    traj.controls.row(i) = constant_control.transpose();
  }
  return traj;
}

}  // namespace rcsopt
