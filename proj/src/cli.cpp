#include "rcsopt/cli.hpp"

#include "rcsopt/evaluation.hpp"
#include "rcsopt/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

namespace rcsopt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string scenario_path;
  std::string out_dir = ".";
  std::vector<double> alphas;
  std::string relevance;
  double relevance_scale = 1.0;
  double lambda = 1.0;
  int gamma = 20;
  int nodes = 50;
  std::uint64_t seed = 0;
  int samples = 1000;
  double sigma = 0.31622776601683794;
  int verbose = 0;

  bool has_alpha = false, has_relevance = false, has_scale = false;
  bool has_lambda = false, has_gamma = false;
};

Scenario build_scenario(const Options& o) {
  Scenario sc = load_scenario_file(o.scenario_path);
  if (o.has_lambda) {
    if (sc.kind != ScenarioKind::Planar2d && sc.kind != ScenarioKind::LambdaForm)
      throw ConfigError("--lambda only applies to planar_2d/lambda_form");
    sc.planar.lambda = o.lambda;
    sc.problem = build_scenario_2d(sc.planar);
  }
  if (o.has_gamma) {
    if (sc.kind != ScenarioKind::CarTrain)
      throw ConfigError("--gamma only applies to car_train");
    sc.car_train.gamma = o.gamma;
    sc.problem = build_car_train(sc.car_train);
  }
  if (o.has_relevance) {
    try {
      sc.relevance.kind = relevance_kind_from_string(o.relevance);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (o.has_scale) {
    if (o.relevance_scale <= 0.0)
      throw ConfigError("--relevance-scale must be positive");
    sc.relevance.scale = o.relevance_scale;
  }
  return sc;
}

TranscriptionOptions make_solver_options(const Scenario& sc, const Options& o,
                                         double alpha) {
  TranscriptionOptions t;
  t.num_nodes = o.nodes;
  t.cost_mode = sc.cost_mode;
  t.relevance = sc.relevance;
  t.weights = RcsWeights(alpha);
  t.initial_penalty = sc.initial_penalty;
  t.verbosity = o.verbose;
  return t;
}

McConfig make_mc_config(const Options& o) {
  McConfig mc;
  mc.num_samples = o.samples;
  mc.perturbation_std = o.sigma;
  mc.rng_seed = o.seed;
  return mc;
}

// t, states, controls, g, S_r entries (row-major), weighted RCS integrand.
std::string trajectory_csv(const OcpProblem& p, const Trajectory& traj,
                           const RelevanceSpec& rel, const RcsWeights& w) {
  Trajectory full = traj;
  if (!full.has_sensitivities()) {
    const Trajectory prop = propagate_augmented(
        p, ControlSignal::from_trajectory(p, traj), traj.times);
    full.sensitivities = prop.sensitivities;
  }
  const int n = p.state_dim, m = p.control_dim, k = p.constraint_dim,
            l = p.param_dim;
  std::string out = "t";
  for (int i = 0; i < n; ++i) out += ",x" + std::to_string(i);
  for (int i = 0; i < m; ++i) out += ",u" + std::to_string(i);
  for (int i = 0; i < k; ++i) out += ",g" + std::to_string(i);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < l; ++j)
      out += ",sr_" + std::to_string(i) + "_" + std::to_string(j);
  out += ",rcs_integrand\n";

  for (int node = 0; node < traj.num_nodes(); ++node) {
    const VectorXd x = traj.states.row(node).transpose();
    const double t = traj.times[node];
    const VectorXd g = evaluate_constraints(p, x, p.nominal_param, t);
    const MatrixXd Sg =
        constraint_sensitivity(p, x, full.sensitivities[node], t);
    const MatrixXd Sr = rcs_matrix(g, Sg, rel);
    out += format_double(t);
    for (int i = 0; i < n; ++i) out += "," + format_double(traj.states(node, i));
    for (int i = 0; i < m; ++i)
      out += "," + format_double(traj.controls(node, i));
    for (int i = 0; i < k; ++i) out += "," + format_double(g[i]);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < l; ++j) out += "," + format_double(Sr(i, j));
    out += "," + format_double(rcs_running_cost(Sr, w));
    out += "\n";
  }
  return out;
}

json solution_json(const Scenario& sc, const TranscriptionOptions& topt,
                   double alpha, const NlpSolution& sol) {
  json j;
  j["scenario"] = to_string(sc.kind);
  j["converged"] = sol.converged;
  j["status"] = sol.status;
  j["objective"] = sol.objective;
  j["objective_breakdown"] = {{"nominal", sol.nominal_objective},
                              {"sensitivity", sol.sensitivity_objective},
                              {"control_smoothing", sol.smoothing_objective}};
  j["t_f"] = sol.trajectory.final_time;
  j["kkt_residual"] = sol.kkt_residual;
  j["max_constraint_violation"] = sol.max_constraint_violation;
  j["outer_iterations"] = sol.outer_iterations;
  j["inner_iterations"] = sol.inner_iterations;
  j["alpha"] = alpha;
  j["cost_mode"] = to_string(topt.cost_mode);
  j["relevance"] = {{"kind", to_string(topt.relevance.kind)},
                    {"scale", topt.relevance.scale}};
  j["nodes"] = topt.num_nodes;
  return j;
}

double effective_alpha(const Scenario& sc, const Options& o) {
  if (!o.has_alpha) return sc.default_alpha;
  if (o.alphas.size() != 1)
    throw ConfigError("this command expects a single --alpha value");
  if (o.alphas[0] < 0.0) throw ConfigError("--alpha must be nonnegative");
  return o.alphas[0];
}

int cmd_solve(const Options& o, bool with_montecarlo) {
  const Scenario sc = build_scenario(o);
  const double alpha = effective_alpha(sc, o);
  const TranscriptionOptions topt = make_solver_options(sc, o, alpha);
  const NlpSolution sol =
      solve_desensitized(sc.problem, topt, sc.default_seeds(topt.num_nodes));

  fs::create_directories(o.out_dir);
  write_text_file((fs::path(o.out_dir) / "trajectory.csv").string(),
                  trajectory_csv(sc.problem, sol.trajectory, topt.relevance,
                                 topt.weights));
  json js = solution_json(sc, topt, alpha, sol);

  if (with_montecarlo && sol.converged) {
    const McConfig mc = make_mc_config(o);
    const CollisionEstimate est = collision_probability(
        sc.problem, ControlSignal::from_trajectory(sc.problem, sol.trajectory),
        mc);
    json jm;
    jm["p_c"] = est.p_c;
    jm["ci_low"] = est.ci_low;
    jm["ci_high"] = est.ci_high;
    jm["num_collided"] = est.num_collided;
    jm["n_samples"] = est.num_samples;
    jm["seed"] = est.seed;
    jm["sigma"] = mc.perturbation_std;
    jm["t_f"] = sol.trajectory.final_time;
    write_text_file((fs::path(o.out_dir) / "montecarlo.json").string(),
                    jm.dump(2) + "\n");
    js["montecarlo"] = jm;
  }
  write_text_file((fs::path(o.out_dir) / "solution.json").string(),
                  js.dump(2) + "\n");
  std::printf("%s: objective %s (t_f %s), kkt %.3e, violation %.3e\n",
              sol.converged ? "converged" : "NOT converged",
              format_double(sol.objective).c_str(),
              format_double(sol.trajectory.final_time).c_str(),
              sol.kkt_residual, sol.max_constraint_violation);
  return sol.converged ? 0 : 3;
}

int cmd_sweep(const Options& o) {
  if (!o.has_alpha || o.alphas.empty())
    throw ConfigError("sweep requires a nonempty --alpha list");
  const Scenario sc = build_scenario(o);
  TranscriptionOptions topt = make_solver_options(sc, o, 0.0);
  const McConfig mc = make_mc_config(o);

  std::vector<NlpSolution> solutions;
  const TradeoffReport report =
      tradeoff_sweep(sc, topt, o.alphas, mc, &solutions);

  fs::create_directories(o.out_dir);
  write_text_file((fs::path(o.out_dir) / "tradeoff.csv").string(),
                  report.to_csv());
  write_text_file((fs::path(o.out_dir) / "tradeoff.json").string(),
                  report.to_json());
  bool all_solved = true;
  for (size_t i = 0; i < report.rows.size(); ++i) {
    if (!report.rows[i].solved) {
      all_solved = false;
      continue;
    }
    RelevanceSpec rel = sc.relevance;
    char name[64];
    std::snprintf(name, sizeof(name), "trajectory_alpha_%02zu.csv", i);
    write_text_file((fs::path(o.out_dir) / name).string(),
                    trajectory_csv(sc.problem, solutions[i].trajectory, rel,
                                   RcsWeights(report.rows[i].alpha)));
  }
  std::printf("sweep complete: %zu rows -> %s\n", report.rows.size(),
              (fs::path(o.out_dir) / "tradeoff.csv").string().c_str());
  return all_solved ? 0 : 3;
}

int cmd_sensitivity_check(const Options& o) {
  const Scenario sc = build_scenario(o);
  const OcpProblem& p = sc.problem;
  const std::vector<Trajectory> seeds = sc.default_seeds(std::max(o.nodes, 2));
  const Trajectory& seed = seeds.front();
  const ControlSignal control = ControlSignal::from_trajectory(p, seed);
  const Trajectory traj = propagate_augmented(p, control, seed.times);

  // Oracle 1: propagated S against central differences of re-integration.
  const double h = 1e-4;
  double max_rel_s = 0.0;
  std::vector<MatrixXd> xplus(p.param_dim), xminus(p.param_dim);
  for (int j = 0; j < p.param_dim; ++j) {
    VectorXd pp = p.nominal_param, pm = p.nominal_param;
    pp[j] += h;
    pm[j] -= h;
    xplus[j] = integrate_states(p, control, traj.times, pp);
    xminus[j] = integrate_states(p, control, traj.times, pm);
    for (int i = 0; i < traj.num_nodes(); ++i) {
      const VectorXd fd =
          (xplus[j].row(i) - xminus[j].row(i)).transpose() / (2.0 * h);
      const VectorXd sc_col = traj.sensitivities[i].col(j);
      const double denom = fd.lpNorm<Eigen::Infinity>();
      if (denom > 1e-8)
        max_rel_s = std::max(max_rel_s,
                             (sc_col - fd).lpNorm<Eigen::Infinity>() / denom);
    }
  }

  // Oracle 2: S_g from propagated S against the total-derivative difference
  // quotient of g along the perturbed trajectories (all scenarios; relative,
  // the quotient truncation grows like t^3 near obstacles), plus the closed
  // form for the planar distance-constraint family (absolute).
  double max_rel_sg_fd = 0.0;
  double max_abs_sg_closed = 0.0;
  const bool has_closed_form = sc.kind != ScenarioKind::CarTrain;
  for (int i = 0; i < traj.num_nodes(); ++i) {
    const VectorXd x = traj.states.row(i).transpose();
    const double t = traj.times[i];
    const MatrixXd Sg = constraint_sensitivity(p, x, traj.sensitivities[i], t);
    for (int j = 0; j < p.param_dim; ++j) {
      VectorXd pp = p.nominal_param, pm = p.nominal_param;
      pp[j] += h;
      pm[j] -= h;
      const VectorXd gp =
          p.path_constraints(xplus[j].row(i).transpose(), pp, t);
      const VectorXd gm =
          p.path_constraints(xminus[j].row(i).transpose(), pm, t);
      const VectorXd col = (gp - gm) / (2.0 * h);
      const double denom = col.lpNorm<Eigen::Infinity>();
      if (denom > 1e-8)
        max_rel_sg_fd = std::max(
            max_rel_sg_fd, (Sg.col(j) - col).lpNorm<Eigen::Infinity>() / denom);
    }
    if (has_closed_form) {
      if (sc.kind == ScenarioKind::MultiObstacle) {
        for (size_t ob = 0; ob < sc.multi.obstacles.size(); ++ob) {
          // dy_o/dv_o = -direction * t, so the reference flips sign with the
          // obstacle's travel direction.
          const double cf =
              sc.multi.obstacles[ob].direction *
              closed_form_sg_2d(x[0], x[1], sc.multi.obstacles[ob].x,
                                x[2 + ob], t, 1.0);
          max_abs_sg_closed = std::max(
              max_abs_sg_closed,
              std::abs(Sg(static_cast<int>(ob), static_cast<int>(ob)) - cf));
        }
      } else {
        const double cf = closed_form_sg_2d(x[0], x[1], sc.planar.obstacle_x,
                                            x[2], t, sc.planar.lambda);
        max_abs_sg_closed = std::max(max_abs_sg_closed, std::abs(Sg(0, 0) - cf));
      }
    }
  }

  const double tol_rel = 1e-3, tol_closed = 1e-6;
  const bool pass = max_rel_s < tol_rel && max_rel_sg_fd < tol_rel &&
                    (!has_closed_form || max_abs_sg_closed < tol_closed);
  json j;
  j["max_rel_error_S"] = max_rel_s;
  j["max_rel_error_Sg_fd"] = max_rel_sg_fd;
  if (has_closed_form) j["max_abs_error_Sg_closed_form"] = max_abs_sg_closed;
  j["tol_rel"] = tol_rel;
  j["tol_Sg_closed_form_abs"] = tol_closed;
  j["nodes"] = static_cast<int>(traj.num_nodes());
  j["pass"] = pass;
  fs::create_directories(o.out_dir);
  write_text_file((fs::path(o.out_dir) / "sensitivity_check.json").string(),
                  j.dump(2) + "\n");
  std::printf(
      "sensitivity check: S rel err %.3e, S_g fd rel err %.3e%s%s -> %s\n",
      max_rel_s, max_rel_sg_fd,
      has_closed_form ? ", closed-form abs err " : "",
      has_closed_form ? format_double(max_abs_sg_closed).c_str() : "",
      pass ? "PASS" : "FAIL");
  return pass ? 0 : 4;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Trajectory planning with relevance-weighted constraint "
               "sensitivity regularization"};
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  auto* opt_scenario = app.add_option("--scenario", o.scenario_path,
                                      "Scenario JSON file");
  opt_scenario->required()->check(CLI::ExistingFile);
  app.add_option("--out", o.out_dir, "Output directory");
  auto* opt_alpha =
      app.add_option("--alpha", o.alphas, "RCS weight(s), comma separated")
          ->delimiter(',');
  auto* opt_rel = app.add_option("--relevance", o.relevance,
                                 "Relevance kind (logistic-derivative, "
                                 "gaussian, hat, rational, rational-abs)");
  auto* opt_scale = app.add_option("--relevance-scale", o.relevance_scale,
                                   "Relevance argument scale (> 0)");
  auto* opt_lambda =
      app.add_option("--lambda", o.lambda, "Constraint form exponent");
  auto* opt_gamma =
      app.add_option("--gamma", o.gamma, "Super-Gaussian exponent (even)");
  app.add_option("--nodes", o.nodes, "Collocation nodes")->check(CLI::Range(10, 2000));
  app.add_option("--seed", o.seed, "Monte Carlo RNG seed");
  app.add_option("--samples", o.samples, "Monte Carlo samples")
      ->check(CLI::PositiveNumber);
  app.add_option("--sigma", o.sigma, "Perturbation standard deviation");
  app.add_flag("--verbose", o.verbose, "Solver diagnostics to stderr");

  auto* s_solve = app.add_subcommand("solve", "Single solve, export plan");
  auto* s_sweep =
      app.add_subcommand("sweep", "Alpha sweep with Monte Carlo trade-off");
  auto* s_mc = app.add_subcommand("montecarlo",
                                  "Solve then estimate collision probability");
  auto* s_check = app.add_subcommand("sensitivity-check",
                                     "Sensitivity propagation vs oracles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  o.has_alpha = opt_alpha->count() > 0;
  o.has_relevance = opt_rel->count() > 0;
  o.has_scale = opt_scale->count() > 0;
  o.has_lambda = opt_lambda->count() > 0;
  o.has_gamma = opt_gamma->count() > 0;

  try {
    if (s_solve->parsed()) return cmd_solve(o, false);
    if (s_mc->parsed()) return cmd_solve(o, true);
    if (s_sweep->parsed()) return cmd_sweep(o);
    if (s_check->parsed()) return cmd_sensitivity_check(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("rcsplan");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace rcsopt::cli
