#include "rcsopt/evaluation.hpp"
#include "rcsopt/nlp.hpp"
#include "rcsopt/scenarios.hpp"

#include <doctest.h>

#include <random>

using namespace rcsopt;

// The OpenMP kernels must be bit-identical to their serial references: every
// work item is independent and writes its own slot.

TEST_CASE("finite-difference derivative fill: serial == OpenMP") {
  Scenario2DConfig cfg;
  cfg.obstacle_y0 = 1.25;
  Scenario sc = make_scenario(ScenarioKind::Planar2d, cfg);
  TranscriptionOptions opts;
  opts.num_nodes = 25;
  opts.cost_mode = CostMode::Rcs;
  opts.weights = RcsWeights(0.4);
  CollocationNlp nlp(sc.problem, opts);

  VectorXd z = nlp.initial_point(sc.default_seeds(opts.num_nodes)[1]);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(-0.03, 0.03);
  for (int i = 0; i < z.size(); ++i)
    if (nlp.lower()[i] != nlp.upper()[i]) z[i] += dist(rng);
  z = z.cwiseMax(nlp.lower()).cwiseMin(nlp.upper());

  const auto ds = nlp.derivatives(z, ExecMode::Serial);
  const auto dp = nlp.derivatives(z, ExecMode::OpenMp);
  for (int i = 0; i < opts.num_nodes; ++i) {
    CHECK(ds.drhs[i] == dp.drhs[i]);
    CHECK(ds.dg[i] == dp.dg[i]);
    CHECK(ds.dell[i] == dp.dell[i]);
    CHECK(ds.drhs_tf[i] == dp.drhs_tf[i]);
    CHECK(ds.dg_tf[i] == dp.dg_tf[i]);
  }
  CHECK(ds.dell_tf == dp.dell_tf);
  CHECK(nlp.objective_gradient(ds) == nlp.objective_gradient(dp));
}

TEST_CASE("Monte Carlo batch: serial == OpenMP") {
  Scenario sc = load_scenario_file("configs/multi_obstacle_n2.json");
  const Trajectory seed = sc.default_seeds(30)[1];
  const ControlSignal control = ControlSignal::from_trajectory(sc.problem, seed);
  McConfig mc;
  mc.num_samples = 64;
  mc.rng_seed = 42;
  const MatrixXd deltas = draw_param_perturbations(mc, sc.problem.param_dim);

  const auto a = mc_collision_batch_serial(sc.problem, control, deltas, mc);
  const auto b = mc_collision_batch_omp(sc.problem, control, deltas, mc);
  CHECK(a.collided == b.collided);
  CHECK(a.max_violation == b.max_violation);

  const auto est_s =
      collision_probability(sc.problem, control, mc, ExecMode::Serial);
  const auto est_p =
      collision_probability(sc.problem, control, mc, ExecMode::OpenMp);
  CHECK(est_s.p_c == est_p.p_c);
  CHECK(est_s.num_collided == est_p.num_collided);
}
