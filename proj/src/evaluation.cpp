#include "rcsopt/evaluation.hpp"

#include "rcsopt/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rcsopt {

using detail::require;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Counter-based stream: value i of stream s depends only on (seed, s, i).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : base_(splitmix64(seed ^ splitmix64(0x51Au + stream))), counter_(0) {}

  double uniform01() {  // in (0, 1]
    const std::uint64_t bits = splitmix64(base_ + counter_++);
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t base_, counter_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace

std::pair<double, double> wilson_interval(int successes, int trials) {
  require(trials >= 1 && successes >= 0 && successes <= trials,
          "wilson_interval: bad counts");
  const double z = 1.959963984540054;  // 97.5th normal percentile
  const double n = trials;
  const double p = successes / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  // clamp to [0,1] and keep the point estimate inside despite roundoff
  return {std::min(std::max(0.0, center - half), p),
          std::max(std::min(1.0, center + half), p)};
}

MatrixXd draw_param_perturbations(const McConfig& mc, int param_dim) {
  require(mc.num_samples >= 1, "num_samples must be >= 1");
  require(mc.perturbation_std >= 0.0, "perturbation_std must be >= 0");
  MatrixXd deltas(mc.num_samples, param_dim);
  for (int i = 0; i < mc.num_samples; ++i) {
    CounterRng rng(mc.rng_seed, static_cast<std::uint64_t>(i));
    for (int j = 0; j < param_dim; ++j)
      deltas(i, j) = mc.perturbation_std * rng.normal();
  }
  return deltas;
}

OpenLoopResult simulate_open_loop(const OcpProblem& problem,
                                  const ControlSignal& control,
                                  const VectorXd& param_sample,
                                  const McConfig& mc) {
  require(static_cast<int>(param_sample.size()) == problem.param_dim,
          "simulate_open_loop: param_sample size mismatch");
  const double t0 = control.start_time();
  const double tf = control.end_time();
  require(tf > t0, "simulate_open_loop: degenerate control horizon");

  // Fine grid: factor x control knots (the control signal lives on the
  // solver grid, so its knot count stands in for the solver node count).
  const int Nf = std::max(2, mc.fine_grid_factor * control.num_knots());
  OpenLoopResult out;
  out.trajectory.times = VectorXd::LinSpaced(Nf, t0, tf);
  out.trajectory.final_time = tf;
  out.trajectory.states.resize(Nf, problem.state_dim);
  out.trajectory.controls.resize(Nf, problem.control_dim);
  out.trajectory.constraint_values.resize(Nf, problem.constraint_dim);

  VectorXd x = problem.initial_state;
  const int sub = std::max(1, mc.substeps);
  out.max_violation = -std::numeric_limits<double>::infinity();

  auto record = [&](int i) {
    out.trajectory.states.row(i) = x.transpose();
    out.trajectory.controls.row(i) =
        control.at(out.trajectory.times[i]).transpose();
    if (problem.constraint_dim > 0) {
      const VectorXd g = problem.path_constraints(x, param_sample,
                                                  out.trajectory.times[i]);
      out.trajectory.constraint_values.row(i) = g.transpose();
      const double worst = g.maxCoeff();
      out.max_violation = std::max(out.max_violation, worst);
      if (worst > mc.violation_tolerance) out.collided = true;
    }
  };
  record(0);

  for (int i = 0; i < Nf - 1 && !out.diverged; ++i) {
    const double h = (out.trajectory.times[i + 1] - out.trajectory.times[i]) / sub;
    double t = out.trajectory.times[i];
    for (int s = 0; s < sub; ++s) {
      const VectorXd k1 = problem.dynamics(x, param_sample, control.at(t), t);
      const VectorXd k2 = problem.dynamics(x + 0.5 * h * k1, param_sample,
                                           control.at(t + 0.5 * h), t + 0.5 * h);
      const VectorXd k3 = problem.dynamics(x + 0.5 * h * k2, param_sample,
                                           control.at(t + 0.5 * h), t + 0.5 * h);
      const VectorXd k4 =
          problem.dynamics(x + h * k3, param_sample, control.at(t + h), t + h);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += h;
      if (!x.allFinite()) {
        out.diverged = true;
        out.collided = true;
        break;
      }
    }
    if (!out.diverged) record(i + 1);
  }
  if (problem.constraint_dim == 0) out.max_violation = 0.0;
  return out;
}

namespace {
void run_sample(const OcpProblem& problem, const ControlSignal& control,
                const MatrixXd& deltas, const McConfig& mc, int i,
                McBatchResult& out) {
  const VectorXd p = problem.nominal_param + deltas.row(i).transpose();
  const OpenLoopResult r = simulate_open_loop(problem, control, p, mc);
  out.collided[i] = r.collided ? 1 : 0;
  out.max_violation[i] = r.max_violation;
}
}  // namespace

McBatchResult mc_collision_batch_serial(const OcpProblem& problem,
                                        const ControlSignal& control,
                                        const MatrixXd& deltas,
                                        const McConfig& mc) {
  const int n = static_cast<int>(deltas.rows());
  McBatchResult out;
  out.collided.assign(n, 0);
  out.max_violation.assign(n, 0.0);
  for (int i = 0; i < n; ++i) run_sample(problem, control, deltas, mc, i, out);
  return out;
}

McBatchResult mc_collision_batch_omp(const OcpProblem& problem,
                                     const ControlSignal& control,
                                     const MatrixXd& deltas, const McConfig& mc) {
  const int n = static_cast<int>(deltas.rows());
  McBatchResult out;
  out.collided.assign(n, 0);
  out.max_violation.assign(n, 0.0);
#pragma omp parallel for schedule(dynamic, 8)
  for (int i = 0; i < n; ++i) run_sample(problem, control, deltas, mc, i, out);
  return out;
}

CollisionEstimate collision_probability(const OcpProblem& problem,
                                        const ControlSignal& control,
                                        const McConfig& mc, ExecMode mode) {
  const MatrixXd deltas = draw_param_perturbations(mc, problem.param_dim);
  const McBatchResult batch =
      mode == ExecMode::OpenMp
          ? mc_collision_batch_omp(problem, control, deltas, mc)
          : mc_collision_batch_serial(problem, control, deltas, mc);
  CollisionEstimate est;
  est.num_samples = mc.num_samples;
  est.seed = mc.rng_seed;
  for (std::uint8_t c : batch.collided) est.num_collided += c;
  est.p_c = static_cast<double>(est.num_collided) / mc.num_samples;
  std::tie(est.ci_low, est.ci_high) =
      wilson_interval(est.num_collided, mc.num_samples);
  return est;
}

std::string TradeoffReport::to_csv() const {
  std::ostringstream os;
  os << "alpha,t_f,p_c,ci_low,ci_high,n_samples,seed\n";
  for (const auto& row : rows) {
    os << format_double(row.alpha) << ','
       << format_double(row.solved ? row.t_f
                                   : std::numeric_limits<double>::quiet_NaN())
       << ','
       << format_double(row.solved ? row.estimate.p_c
                                   : std::numeric_limits<double>::quiet_NaN())
       << ',' << format_double(row.estimate.ci_low) << ','
       << format_double(row.estimate.ci_high) << ',' << row.estimate.num_samples
       << ',' << row.estimate.seed << '\n';
  }
  return os.str();
}

std::string TradeoffReport::to_json() const {
  nlohmann::json j;
  j["num_samples"] = mc.num_samples;
  j["seed"] = mc.rng_seed;
  j["sigma"] = mc.perturbation_std;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r;
    r["alpha"] = row.alpha;
    r["solved"] = row.solved;
    r["t_f"] = row.t_f;
    r["p_c"] = row.estimate.p_c;
    r["ci_low"] = row.estimate.ci_low;
    r["ci_high"] = row.estimate.ci_high;
    r["n_samples"] = row.estimate.num_samples;
    r["seed"] = row.estimate.seed;
    r["num_collided"] = row.estimate.num_collided;
    r["solver_status"] = row.solver_status;
    j["rows"].push_back(r);
  }
  return j.dump(2) + "\n";
}

TradeoffReport tradeoff_sweep(const Scenario& scenario,
                              const TranscriptionOptions& base_options,
                              std::vector<double> alphas, const McConfig& mc,
                              std::vector<NlpSolution>* solutions) {
  require(!alphas.empty(), "tradeoff_sweep: alpha list must be nonempty");
  for (double a : alphas)
    require(a >= 0.0, "tradeoff_sweep: alphas must be nonnegative");
  std::sort(alphas.begin(), alphas.end());

  TradeoffReport report;
  report.mc = mc;
  std::vector<Trajectory> seeds = scenario.default_seeds(base_options.num_nodes);
  const size_t base_seed_count = seeds.size();

  for (double alpha : alphas) {
    TranscriptionOptions options = base_options;
    options.cost_mode = scenario.cost_mode;
    options.weights = RcsWeights(alpha);
    options.relevance = scenario.relevance;
    options.initial_penalty = scenario.initial_penalty;

    TradeoffRow row;
    row.alpha = alpha;
    const NlpSolution sol =
        solve_desensitized(scenario.problem, options, seeds);
    // Continuation: the best plan at this alpha seeds the next level, which
    // keeps the sweep from hopping between homotopy classes.
    if (sol.converged) {
      seeds.resize(base_seed_count);
      seeds.push_back(sol.trajectory);
    }
    row.solved = sol.converged;
    row.solver_status = sol.status;
    row.t_f = sol.trajectory.final_time;
    if (sol.converged) {
      const ControlSignal control =
          ControlSignal::from_trajectory(scenario.problem, sol.trajectory);
      row.estimate = collision_probability(scenario.problem, control, mc);
    } else {
      row.estimate.num_samples = mc.num_samples;
      row.estimate.seed = mc.rng_seed;
    }
    if (solutions) solutions->push_back(sol);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace rcsopt
