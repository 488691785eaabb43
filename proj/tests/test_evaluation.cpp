#include "rcsopt/evaluation.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace rcsopt;

namespace {

// Stationary car parked on the crossing; the train arrives within the
// horizon only when its speed perturbation exceeds a known threshold.
// y(t) = 2 - (0.25 + dv) t over t in [0, 4]; collision iff |y| < 0.6
// somewhere, i.e. dv > 0.1.
Scenario parked_car_scenario() {
  CarTrainConfig cfg;
  cfg.start = 5.0;  // on the crossing
  cfg.max_speed = 1e-9;
  cfg.final_time_bounds = {3.999, 4.001};
  return make_scenario(cfg);
}

Trajectory parked_trajectory(const OcpProblem& p, int nodes) {
  Trajectory traj;
  traj.times = VectorXd::LinSpaced(nodes, 0.0, 4.0);
  traj.final_time = 4.0;
  traj.states.resize(nodes, 2);
  traj.controls = MatrixXd::Zero(nodes, 1);
  for (int i = 0; i < nodes; ++i) {
    traj.states(i, 0) = 5.0;
    traj.states(i, 1) = 2.0 - 0.25 * traj.times[i];
  }
  return traj;
}

}  // namespace

TEST_CASE("wilson_interval: frozen reference values") {
  const auto [lo, hi] = wilson_interval(50, 1000);
  CHECK(lo == doctest::Approx(0.03813026239274882).epsilon(1e-12));
  CHECK(hi == doctest::Approx(0.06531382024425081).epsilon(1e-12));
  const auto [lo0, hi0] = wilson_interval(0, 1000);
  CHECK(lo0 == 0.0);
  CHECK(hi0 == doctest::Approx(0.0038267584855551234).epsilon(1e-12));
  // the interval always contains the point estimate
  for (int c : {0, 1, 13, 500, 999, 1000}) {
    const auto [a, b] = wilson_interval(c, 1000);
    const double p = c / 1000.0;
    CHECK(a <= p);
    CHECK(b >= p);
  }
}

TEST_CASE("draw_param_perturbations: deterministic counter-based streams") {
  McConfig mc;
  mc.num_samples = 200;
  mc.rng_seed = 7;
  const MatrixXd a = draw_param_perturbations(mc, 3);
  const MatrixXd b = draw_param_perturbations(mc, 3);
  CHECK(a == b);

  // sample i is independent of how many samples are requested
  McConfig more = mc;
  more.num_samples = 400;
  const MatrixXd c = draw_param_perturbations(more, 3);
  CHECK(c.topRows(200) == a);

  // moments sanity at sigma = sqrt(0.1)
  const double mean = a.mean();
  const double var = (a.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.05);
  CHECK(var == doctest::Approx(0.1).epsilon(0.15));

  McConfig zero = mc;
  zero.perturbation_std = 0.0;
  CHECK(draw_param_perturbations(zero, 3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("simulate_open_loop on the parked-car problem") {
  Scenario sc = parked_car_scenario();
  const Trajectory plan = parked_trajectory(sc.problem, 21);
  const ControlSignal control = ControlSignal::from_trajectory(sc.problem, plan);
  McConfig mc;

  SUBCASE("nominal parameters: feasible plan does not collide") {
    const auto r = simulate_open_loop(sc.problem, control,
                                      sc.problem.nominal_param, mc);
    CHECK_FALSE(r.collided);
    CHECK(r.max_violation < 0.0);
  }
  SUBCASE("slower train never reaches the crossing window") {
    VectorXd p(1);
    p << 0.05;
    CHECK_FALSE(simulate_open_loop(sc.problem, control, p, mc).collided);
  }
  SUBCASE("a speed-up beyond the threshold closes the gap") {
    VectorXd p(1);
    p << 0.25 + 0.11;  // dv = 0.11 > c* = 0.1
    const auto r = simulate_open_loop(sc.problem, control, p, mc);
    CHECK(r.collided);
  }
  SUBCASE("fine grid covers at least factor x control knots") {
    const auto r = simulate_open_loop(sc.problem, control,
                                      sc.problem.nominal_param, mc);
    CHECK(r.trajectory.num_nodes() >= 4 * plan.num_nodes());
  }
}

TEST_CASE("collision_probability") {
  Scenario sc = parked_car_scenario();
  const Trajectory plan = parked_trajectory(sc.problem, 21);
  const ControlSignal control = ControlSignal::from_trajectory(sc.problem, plan);

  SUBCASE("zero perturbation keeps a feasible plan collision-free") {
    McConfig mc;
    mc.num_samples = 100;
    mc.perturbation_std = 0.0;
    const auto est = collision_probability(sc.problem, control, mc);
    CHECK(est.p_c == 0.0);
  }
  SUBCASE("near-certain collision when the plan sits on the track") {
    // train starts inside the crossing window band
    CarTrainConfig cfg;
    cfg.start = 5.0;
    cfg.max_speed = 1e-9;
    cfg.train_y0 = 0.5;
    cfg.final_time_bounds = {3.999, 4.001};
    Scenario bad = make_scenario(cfg);
    McConfig mc;
    mc.num_samples = 200;
    mc.perturbation_std = 1e-12;
    const auto est = collision_probability(
        bad.problem, ControlSignal::from_trajectory(bad.problem, plan), mc);
    CHECK(est.p_c == 1.0);
  }
  SUBCASE("deterministic for a fixed seed") {
    McConfig mc;
    mc.num_samples = 300;
    mc.rng_seed = 123;
    const auto a = collision_probability(sc.problem, control, mc);
    const auto b = collision_probability(sc.problem, control, mc);
    CHECK(a.p_c == b.p_c);
    CHECK(a.ci_low == b.ci_low);
    CHECK(a.ci_high == b.ci_high);
  }
  SUBCASE("empirical rate matches the normal tail probability") {
    McConfig mc;
    mc.num_samples = 1000;
    mc.rng_seed = 2024;
    const auto est = collision_probability(sc.problem, control, mc);
    // P(dv > 0.1) with dv ~ N(0, 0.1): 1 - Phi(0.1/sqrt(0.1)) = 0.37590
    const double truth = 0.3759148170229246;
    CHECK(est.ci_low <= truth);
    CHECK(est.ci_high >= truth);
  }
  SUBCASE("verdicts are stable under fine-grid refinement") {
    McConfig mc;
    mc.num_samples = 200;
    mc.rng_seed = 5;
    const auto a = collision_probability(sc.problem, control, mc);
    McConfig fine = mc;
    fine.fine_grid_factor = 8;
    const auto b = collision_probability(sc.problem, control, fine);
    CHECK(a.num_collided == b.num_collided);
  }
}

TEST_CASE("tradeoff_sweep input validation") {
  Scenario sc = parked_car_scenario();
  TranscriptionOptions opts;
  McConfig mc;
  CHECK_THROWS_AS(tradeoff_sweep(sc, opts, {}, mc), std::invalid_argument);
  CHECK_THROWS_AS(tradeoff_sweep(sc, opts, {-1.0}, mc), std::invalid_argument);
}

TEST_CASE("TradeoffReport serialization") {
  TradeoffReport report;
  report.mc.num_samples = 10;
  report.mc.rng_seed = 1;
  TradeoffRow row;
  row.alpha = 0.5;
  row.solved = true;
  row.t_f = 12.25;
  row.estimate.p_c = 0.1;
  row.estimate.ci_low = 0.05;
  row.estimate.ci_high = 0.2;
  row.estimate.num_samples = 10;
  row.estimate.seed = 1;
  report.rows.push_back(row);
  const std::string csv = report.to_csv();
  CHECK(csv.substr(0, csv.find('\n')) ==
        "alpha,t_f,p_c,ci_low,ci_high,n_samples,seed");
  CHECK(csv.find("0.5,12.25,0.1,0.05,0.2,10,1") != std::string::npos);
  CHECK(report.to_json().find("\"solved\": true") != std::string::npos);
}
