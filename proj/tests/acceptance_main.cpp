// Acceptance suite: end-to-end checks of the planner against its contract,
// one PASS/FAIL line per criterion. Exits nonzero when any criterion fails.

#include "rcsopt/cli.hpp"
#include "rcsopt/evaluation.hpp"
#include "rcsopt/io.hpp"
#include "rcsopt/nlp.hpp"
#include "rcsopt/scenarios.hpp"
#include "rcsopt/sensitivity.hpp"
#include "rcsopt/solver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>
#include <vector>

using namespace rcsopt;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  int id;
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  std::string detail;
};

std::vector<Outcome> g_results;

std::string fmt(double v) { return format_double(v); }

template <typename Fn>
void run_criterion(int id, const std::string& name, Fn&& fn,
                   double budget_seconds = 0.0) {
  Outcome out;
  out.id = id;
  out.name = name;
  const auto t0 = Clock::now();
  try {
    fn(out);
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  if (budget_seconds > 0.0 && out.seconds > budget_seconds) {
    out.pass = false;
    out.detail += "; RUNTIME " + fmt(out.seconds) + " s over the " +
                  fmt(budget_seconds) + " s budget";
  }
  std::printf("[%s] criterion %2d: %s (%s) [%.1f s]\n",
              out.pass ? "PASS" : "FAIL", id, name.c_str(), out.detail.c_str(),
              out.seconds);
  std::fflush(stdout);
  g_results.push_back(std::move(out));
}

// The planar benchmark in the geometry that makes the obstacle active: the
// straight transit meets the obstacle dead on (see configs/planar_2d_active).
Scenario active_planar(double lambda = 1.0) {
  Scenario2DConfig cfg;
  cfg.obstacle_y0 = 1.25;
  cfg.lambda = lambda;
  return make_scenario(lambda == 1.0 ? ScenarioKind::Planar2d
                                     : ScenarioKind::LambdaForm,
                       cfg);
}

NlpSolution solve_scenario(const Scenario& sc, double alpha, int nodes,
                           CostMode mode = CostMode::Rcs,
                           double kkt_tol = 1e-6) {
  TranscriptionOptions opts;
  opts.num_nodes = nodes;
  opts.cost_mode = mode;
  opts.weights = RcsWeights(alpha);
  opts.relevance = sc.relevance;
  opts.initial_penalty = sc.initial_penalty;
  opts.kkt_tolerance = kkt_tol;
  return solve_desensitized(sc.problem, opts, sc.default_seeds(nodes));
}

}  // namespace

// --- criteria -------------------------------------------------------------

void criterion_1_sensitivity_oracle(Outcome& out) {
  Scenario sc = active_planar();
  const Trajectory seed = sc.default_seeds(50)[1];
  const ControlSignal control = ControlSignal::from_trajectory(sc.problem, seed);
  const Trajectory traj = propagate_augmented(sc.problem, control, seed.times);

  const double h = 1e-4;
  double max_rel_s = 0.0;
  VectorXd pp = sc.problem.nominal_param, pm = sc.problem.nominal_param;
  pp[0] += h;
  pm[0] -= h;
  const MatrixXd xp = integrate_states(sc.problem, control, seed.times, pp);
  const MatrixXd xm = integrate_states(sc.problem, control, seed.times, pm);
  for (int i = 0; i < traj.num_nodes(); ++i) {
    const VectorXd fd = (xp.row(i) - xm.row(i)).transpose() / (2.0 * h);
    const double denom = fd.lpNorm<Eigen::Infinity>();
    if (denom > 1e-8)
      max_rel_s = std::max(
          max_rel_s,
          (traj.sensitivities[i].col(0) - fd).lpNorm<Eigen::Infinity>() / denom);
  }

  double max_abs_sg = 0.0;
  for (int i = 0; i < traj.num_nodes(); ++i) {
    const VectorXd x = traj.states.row(i).transpose();
    const MatrixXd Sg = constraint_sensitivity(sc.problem, x,
                                               traj.sensitivities[i],
                                               traj.times[i]);
    const double cf = closed_form_sg_2d(x[0], x[1], sc.planar.obstacle_x, x[2],
                                        traj.times[i], 1.0);
    max_abs_sg = std::max(max_abs_sg, std::abs(Sg(0, 0) - cf));
  }

  out.pass = max_rel_s < 1e-3 && max_abs_sg < 1e-6;
  out.detail = "S rel err " + fmt(max_rel_s) + " < 1e-3, S_g closed-form abs err " +
               fmt(max_abs_sg) + " < 1e-6";
}

void criterion_2_grazing(Outcome& out) {
  Scenario sc = active_planar();
  const NlpSolution sol = solve_scenario(sc, 0.0, 80, CostMode::Nominal);
  const double clearance = min_agent_obstacle_distance(sc, sol.trajectory);
  const double err = std::abs(clearance - sc.planar.safe_distance);
  out.pass = sol.converged && err <= 1e-2;
  out.detail = "converged " + std::string(sol.converged ? "yes" : "NO") +
               ", |clearance - r_o| = " + fmt(err) + " <= 1e-2";
}

void criterion_3_monotone_conservatism(Outcome& out) {
  Scenario sc = active_planar();
  const double alphas[3] = {0.0, 0.33, 1.0};
  double clearance[3], tf[3], rcs[3];
  bool all_converged = true;
  for (int i = 0; i < 3; ++i) {
    const NlpSolution sol = solve_scenario(sc, alphas[i], 50);
    all_converged = all_converged && sol.converged;
    clearance[i] = min_agent_obstacle_distance(sc, sol.trajectory);
    tf[i] = sol.trajectory.final_time;
    Trajectory with_s = sol.trajectory;
    if (!with_s.has_sensitivities()) {
      with_s = propagate_augmented(
          sc.problem, ControlSignal::from_trajectory(sc.problem, sol.trajectory),
          sol.trajectory.times);
    }
    rcs[i] = rcs_cost_integral(sc.problem, with_s, sc.relevance, RcsWeights(1.0));
  }
  const double ctol = 1e-4;  // clearances sit on the constraint boundary
  const double tol = 1e-6;
  const bool mono = clearance[1] >= clearance[0] - ctol &&
                    clearance[2] >= clearance[1] - ctol &&
                    tf[1] >= tf[0] - tol && tf[2] >= tf[1] - tol &&
                    rcs[1] <= rcs[0] + tol && rcs[2] <= rcs[1] + tol;
  out.pass = all_converged && mono;
  std::ostringstream os;
  os << "clearance " << fmt(clearance[0]) << " -> " << fmt(clearance[1])
     << " -> " << fmt(clearance[2]) << "; t_f " << fmt(tf[0]) << " -> "
     << fmt(tf[1]) << " -> " << fmt(tf[2]) << "; RCS integral " << fmt(rcs[0])
     << " -> " << fmt(rcs[1]) << " -> " << fmt(rcs[2]);
  out.detail = os.str();
}

void criterion_4_lambda_forms(Outcome& out) {
  bool pass = true;
  std::ostringstream os;
  // feasible-set equivalence with lambda = 1 on 1e4 random points
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> pos(-3.0, 13.0);
  Scenario base = active_planar(1.0);
  int sign_mismatches = 0;
  for (double lambda : {0.5, 2.0, 4.0}) {
    Scenario scl = active_planar(lambda);
    for (int i = 0; i < 10000; ++i) {
      VectorXd x(3);
      x << pos(rng), pos(rng), pos(rng);
      const bool f1 =
          base.problem.path_constraints(x, base.problem.nominal_param, 0.0)[0] <=
          0.0;
      const bool fl =
          scl.problem.path_constraints(x, scl.problem.nominal_param, 0.0)[0] <=
          0.0;
      if (f1 != fl) ++sign_mismatches;
    }
  }
  pass = pass && sign_mismatches == 0;
  os << "feasible-set mismatches " << sign_mismatches << "/30000";

  for (double lambda : {0.5, 2.0, 4.0}) {
    Scenario scl = active_planar(lambda);
    const NlpSolution a0 = solve_scenario(scl, 0.0, 40);
    const NlpSolution a1 = solve_scenario(scl, 1.0, 40);
    const double c0 = min_agent_obstacle_distance(scl, a0.trajectory);
    const double c1 = min_agent_obstacle_distance(scl, a1.trajectory);
    const bool ok = a0.converged && a1.converged && c1 >= c0 - 1e-4 &&
                    a1.trajectory.final_time >=
                        a0.trajectory.final_time - 1e-6;
    pass = pass && ok;
    os << "; lambda " << fmt(lambda) << ": clearance " << fmt(c0) << " -> "
       << fmt(c1) << (ok ? "" : " (VIOLATED)");
  }
  out.pass = pass;
  out.detail = os.str();
}

void criterion_5_car_train(Outcome& out) {
  Scenario sc = load_scenario_file("configs/car_train.json");
  const double alphas[3] = {0.0, 1.0, 10.0};
  double sep[3], tf[3];
  bool all_converged = true;
  for (int i = 0; i < 3; ++i) {
    const NlpSolution sol = solve_scenario(sc, alphas[i], 50);
    all_converged = all_converged && sol.converged;
    sep[i] = car_train_crossing_separation(sc.car_train, sol.trajectory);
    tf[i] = sol.trajectory.final_time;
  }
  const double limit = sc.car_train.safe_distance + 0.1;
  const bool close_at_zero = sep[0] <= limit;
  const bool separated_at_max = sep[2] >= 1.25 * sep[0];
  out.pass = all_converged && close_at_zero && separated_at_max;
  std::ostringstream os;
  os << "separation at Q=0: " << fmt(sep[0]) << " <= " << fmt(limit)
     << (close_at_zero ? "" : " (VIOLATED)") << "; at Q=10: " << fmt(sep[2])
     << " >= " << fmt(1.25 * sep[0]) << (separated_at_max ? "" : " (VIOLATED)")
     << "; t_f " << fmt(tf[0]) << " -> " << fmt(tf[2]);
  out.detail = os.str();
}

void criterion_6_tradeoff(Outcome& out) {
  const std::vector<double> alphas = {0.0, 0.1, 0.33, 1.0};
  McConfig mc;
  mc.num_samples = 1000;
  mc.perturbation_std = std::sqrt(0.1);
  mc.rng_seed = 0;

  std::ostringstream os;
  bool pass = true;

  // N = 2: value-level claim.
  {
    Scenario sc = load_scenario_file("configs/multi_obstacle_n2.json");
    TranscriptionOptions opts;
    opts.num_nodes = 50;
    const TradeoffReport rep = tradeoff_sweep(sc, opts, alphas, mc);
    const auto& first = rep.rows.front();
    const auto& last = rep.rows.back();
    bool solved = true;
    for (const auto& row : rep.rows) solved = solved && row.solved;
    const bool pc_drop = last.estimate.p_c <= 0.10 * first.estimate.p_c;
    const bool tf_ok = last.t_f <= 1.15 * first.t_f;
    pass = pass && solved && pc_drop && tf_ok;
    os << "N=2: P_c " << fmt(first.estimate.p_c) << " -> "
       << fmt(last.estimate.p_c) << " (need <= " << fmt(0.1 * first.estimate.p_c)
       << (pc_drop ? ")" : ", VIOLATED)") << ", t_f " << fmt(first.t_f)
       << " -> " << fmt(last.t_f) << (tf_ok ? "" : " (t_f VIOLATED)");
  }

  // N in {3, 5}: trend-level, one CI-overlap inversion allowed.
  for (const char* name :
       {"configs/multi_obstacle_n3.json", "configs/multi_obstacle_n5.json"}) {
    Scenario sc = load_scenario_file(name);
    TranscriptionOptions opts;
    opts.num_nodes = 50;
    const TradeoffReport rep = tradeoff_sweep(sc, opts, alphas, mc);
    bool solved = true;
    for (const auto& row : rep.rows) solved = solved && row.solved;
    int pc_inversions = 0, tf_inversions = 0;
    bool inversion_within_ci = true;
    for (size_t i = 1; i < rep.rows.size(); ++i) {
      const auto& prev = rep.rows[i - 1];
      const auto& cur = rep.rows[i];
      if (cur.estimate.p_c > prev.estimate.p_c) {
        ++pc_inversions;
        if (cur.estimate.ci_low > prev.estimate.ci_high)
          inversion_within_ci = false;
      }
      if (cur.t_f < prev.t_f - 1e-6) ++tf_inversions;
    }
    const bool ok = solved && pc_inversions <= 1 && inversion_within_ci &&
                    tf_inversions == 0;
    pass = pass && ok;
    os << "; " << (std::string(name).find("n3") != std::string::npos ? "N=3"
                                                                     : "N=5")
       << ": P_c";
    for (const auto& row : rep.rows) os << " " << fmt(row.estimate.p_c);
    os << (ok ? "" : " (TREND VIOLATED)");
  }
  out.pass = pass;
  out.detail = os.str();
}

void criterion_7_cost_mode_consistency(Outcome& out) {
  Scenario sc = active_planar();
  const double tol = 1e-6;
  auto tight_solve = [&](CostMode mode) {
    TranscriptionOptions opts;
    opts.num_nodes = 40;
    opts.cost_mode = mode;
    opts.weights = RcsWeights(0.0);
    opts.relevance = sc.relevance;
    opts.kkt_tolerance = 1e-7;
    opts.path_constraint_tolerance = 1e-8;
    return solve_desensitized(sc.problem, opts, sc.default_seeds(40));
  };
  const NlpSolution nominal = tight_solve(CostMode::Nominal);
  bool pass = nominal.converged;
  std::ostringstream os;
  os << "nominal objective " << fmt(nominal.objective);
  for (CostMode mode : {CostMode::Rcs, CostMode::Naive, CostMode::Doc}) {
    const NlpSolution sol = tight_solve(mode);
    const double diff = std::abs(sol.objective - nominal.objective);
    const bool ok = sol.converged && diff < tol;
    pass = pass && ok;
    os << "; " << to_string(mode) << " diff " << fmt(diff)
       << (ok ? "" : " (VIOLATED)");
  }
  out.pass = pass;
  out.detail = os.str();
}

void criterion_8_gradient_check(Outcome& out) {
  Scenario sc = active_planar();
  TranscriptionOptions opts;
  opts.num_nodes = 25;
  opts.cost_mode = CostMode::Rcs;
  opts.weights = RcsWeights(0.5);
  const CollocationNlp nlp(sc.problem, opts);
  const auto seeds = sc.default_seeds(opts.num_nodes);

  double worst = 0.0;
  std::mt19937 rng(2718);
  std::uniform_real_distribution<double> dist(-0.05, 0.05);
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd z = nlp.initial_point(seeds[trial % seeds.size()]);
    for (int i = 0; i < z.size(); ++i)
      if (nlp.lower()[i] != nlp.upper()[i]) z[i] += dist(rng);
    z = z.cwiseMax(nlp.lower()).cwiseMin(nlp.upper());

    const auto d = nlp.derivatives(z);
    const VectorXd grad = nlp.objective_gradient(d);
    const MatrixXd Jeq = nlp.dense_eq_jacobian(d);
    const MatrixXd Jineq = nlp.dense_ineq_jacobian(d);

    VectorXd zp = z;
    VectorXd grad_fd(nlp.dim());
    MatrixXd Jeq_fd(nlp.num_eq(), nlp.dim());
    MatrixXd Jineq_fd(nlp.num_ineq(), nlp.dim());
    for (int j = 0; j < nlp.dim(); ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(z[j]));
      zp[j] = z[j] + h;
      const auto ep = nlp.evaluate(zp);
      zp[j] = z[j] - h;
      const auto em = nlp.evaluate(zp);
      zp[j] = z[j];
      grad_fd[j] = (ep.objective - em.objective) / (2.0 * h);
      Jeq_fd.col(j) = (ep.ceq - em.ceq) / (2.0 * h);
      Jineq_fd.col(j) = (ep.cineq - em.cineq) / (2.0 * h);
    }
    worst = std::max(worst, (grad - grad_fd).lpNorm<Eigen::Infinity>() /
                                std::max(1.0, grad_fd.lpNorm<Eigen::Infinity>()));
    worst = std::max(worst, (Jeq - Jeq_fd).cwiseAbs().maxCoeff() /
                                std::max(1.0, Jeq_fd.cwiseAbs().maxCoeff()));
    worst = std::max(worst, (Jineq - Jineq_fd).cwiseAbs().maxCoeff() /
                                std::max(1.0, Jineq_fd.cwiseAbs().maxCoeff()));
  }
  out.pass = worst < 1e-4;
  out.detail = "max relative error " + fmt(worst) + " < 1e-4 at 20 points";
}

void criterion_9_determinism(Outcome& out) {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "rcsopt_acceptance_determinism";
  fs::remove_all(base);
  const std::vector<std::string> common = {
      "sweep",   "--scenario", "configs/planar_2d_active.json",
      "--alpha", "0,1",        "--nodes",
      "40",      "--samples",  "200",
      "--seed",  "7"};
  auto run_once = [&](const std::string& dir) {
    auto args = common;
    args.push_back("--out");
    args.push_back(dir);
    return cli::run(args);
  };
  const int rc1 = run_once((base / "a").string());
  const int rc2 = run_once((base / "b").string());
  bool identical = rc1 == 0 && rc2 == 0;
  std::string which = "exit codes " + std::to_string(rc1) + "/" + std::to_string(rc2);
  if (identical) {
    for (const char* f :
         {"tradeoff.csv", "tradeoff.json", "trajectory_alpha_00.csv",
          "trajectory_alpha_01.csv"}) {
      const std::string a = read_text_file((base / "a" / f).string());
      const std::string b = read_text_file((base / "b" / f).string());
      if (a != b) {
        identical = false;
        which = std::string(f) + " differs";
        break;
      }
    }
  }
  fs::remove_all(base);
  out.pass = identical;
  out.detail = identical ? "byte-identical sweep outputs across reruns" : which;
}

void criterion_10_relevance(Outcome& out) {
  bool pass = relevance(RelevanceSpec{}, 0.0) == 0.25;
  std::string fail;
  for (RelevanceKind kind :
       {RelevanceKind::LogisticDerivative, RelevanceKind::Gaussian,
        RelevanceKind::Hat, RelevanceKind::Rational,
        RelevanceKind::RationalAbs}) {
    const RelevanceSpec spec{kind, 1.0};
    const double at0 = relevance(spec, 0.0);
    double prev = relevance(spec, -30.0);
    for (int i = 1; i <= 6000; ++i) {
      const double z = -30.0 + 60.0 * i / 6000.0;
      const double v = relevance(spec, z);
      if (z <= 0.0 && v < prev) {
        pass = false;
        fail = std::string(" monotonicity broken for ") + to_string(kind);
        break;
      }
      if (z > 0.0 && v != at0) {
        pass = false;
        fail = std::string(" plateau broken for ") + to_string(kind);
        break;
      }
      if (z <= 0.0) prev = v;
    }
  }
  out.pass = pass;
  out.detail = "rho(0) = 1/4 exact; monotone on (-inf,0], constant beyond" + fail;
}

int main() {
  std::printf("acceptance suite\n================\n");
  run_criterion(1, "sensitivity oracle", criterion_1_sensitivity_oracle, 10.0);
  run_criterion(2, "grazing optimum", criterion_2_grazing, 60.0);
  run_criterion(3, "monotone conservatism", criterion_3_monotone_conservatism);
  run_criterion(4, "constraint-form study", criterion_4_lambda_forms);
  run_criterion(5, "car vs train", criterion_5_car_train);
  run_criterion(6, "collision/travel-time trade-off", criterion_6_tradeoff, 900.0);
  run_criterion(7, "cost-mode consistency", criterion_7_cost_mode_consistency);
  run_criterion(8, "gradient check", criterion_8_gradient_check);
  run_criterion(9, "determinism", criterion_9_determinism);
  run_criterion(10, "relevance properties", criterion_10_relevance);

  int failures = 0;
  double total = 0.0;
  for (const auto& r : g_results) {
    if (!r.pass) ++failures;
    total += r.seconds;
  }
  std::printf("================\n%d/%zu criteria passed in %.1f s\n",
              static_cast<int>(g_results.size()) - failures, g_results.size(),
              total);
  return failures == 0 ? 0 : 1;
}
