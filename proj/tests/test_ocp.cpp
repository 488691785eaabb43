#include "rcsopt/ocp.hpp"
#include "rcsopt/scenarios.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <random>

using namespace rcsopt;

namespace {

OcpProblem pure_time_problem() {
  OcpProblem p = testutil::scalar_rate_problem();
  p.terminal_cost = [](const VectorXd&, double tf) { return tf; };
  return p;
}

}  // namespace

TEST_CASE("evaluate_cost: pure final-time cost") {
  OcpProblem p = pure_time_problem();
  Trajectory traj = testutil::constant_control_trajectory(
      p, 10.0, 21, VectorXd::Zero(1));
  CHECK(evaluate_cost(p, traj) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("evaluate_cost: unit running cost integrates the horizon") {
  OcpProblem p = testutil::scalar_rate_problem();
  p.running_cost = [](const VectorXd&, const VectorXd&, double) { return 1.0; };
  Trajectory traj =
      testutil::constant_control_trajectory(p, 3.0, 16, VectorXd::Zero(1));
  CHECK(evaluate_cost(p, traj) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("evaluate_cost: quadratic control effort, constant control") {
  OcpProblem p = testutil::scalar_rate_problem();
  p.running_cost = [](const VectorXd&, const VectorXd& u, double) {
    return u.squaredNorm();
  };
  Trajectory traj = testutil::constant_control_trajectory(
      p, 2.0, 11, VectorXd::Constant(1, 0.5));
  // trapezoid is exact for a constant integrand: 0.25 * 2
  CHECK(evaluate_cost(p, traj) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("evaluate_cost: linear in the cost callbacks") {
  OcpProblem p = pure_time_problem();
  p.running_cost = [](const VectorXd& x, const VectorXd& u, double t) {
    return x.squaredNorm() + 0.3 * u[0] + 0.1 * t;
  };
  OcpProblem doubled = p;
  doubled.terminal_cost = [](const VectorXd&, double tf) { return 2.0 * tf; };
  doubled.running_cost = [](const VectorXd& x, const VectorXd& u, double t) {
    return 2.0 * (x.squaredNorm() + 0.3 * u[0] + 0.1 * t);
  };

  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Trajectory traj =
      testutil::constant_control_trajectory(p, 4.0, 13, VectorXd::Zero(1));
  for (int i = 0; i < traj.num_nodes(); ++i) {
    traj.states(i, 0) = dist(rng);
    traj.controls(i, 0) = dist(rng);
  }
  CHECK(evaluate_cost(doubled, traj) ==
        doctest::Approx(2.0 * evaluate_cost(p, traj)).epsilon(1e-12));
}

TEST_CASE("evaluate_cost: dimension mismatch is rejected") {
  OcpProblem p = pure_time_problem();
  Trajectory traj =
      testutil::constant_control_trajectory(p, 2.0, 12, VectorXd::Zero(1));
  traj.states.resize(12, 2);
  CHECK_THROWS_AS(evaluate_cost(p, traj), std::invalid_argument);
}

TEST_CASE("evaluate_constraints: planar distance constraint") {
  Scenario2DConfig cfg;
  cfg.obstacle_y0 = 1.0;
  OcpProblem p = build_scenario_2d(cfg);
  VectorXd x(3);

  SUBCASE("one safe-distance away from the boundary") {
    x << 0.0, 0.0, 1.0;  // agent at origin, obstacle at (5, 1)... use x_o = 0
    cfg.obstacle_x = 0.0;
    p = build_scenario_2d(cfg);
    const VectorXd g = evaluate_constraints(p, x, p.nominal_param, 0.0);
    CHECK(g[0] == doctest::Approx(0.6 - 1.0).epsilon(1e-12));
  }
  SUBCASE("coincident point violates by the full safe distance") {
    cfg.obstacle_x = 0.0;
    p = build_scenario_2d(cfg);
    x << 0.0, 1.0, 1.0;
    const VectorXd g = evaluate_constraints(p, x, p.nominal_param, 0.0);
    CHECK(g[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(g[0] > 0.0);
  }
  SUBCASE("exactly on the boundary") {
    cfg.obstacle_x = 0.0;
    p = build_scenario_2d(cfg);
    x << 0.6, 1.0, 1.0;
    const VectorXd g = evaluate_constraints(p, x, p.nominal_param, 0.0);
    CHECK(g[0] == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("evaluate_constraints is pure") {
  OcpProblem p = build_scenario_2d(Scenario2DConfig{});
  VectorXd x(3);
  x << 1.0, 2.0, 3.0;
  const VectorXd a = evaluate_constraints(p, x, p.nominal_param, 1.0);
  const VectorXd b = evaluate_constraints(p, x, p.nominal_param, 1.0);
  CHECK(a == b);
}

TEST_CASE("check_feasibility") {
  Scenario2DConfig cfg;
  OcpProblem p = build_scenario_2d(cfg);
  const int N = 9;
  Trajectory traj;
  traj.times = VectorXd::LinSpaced(N, 0.0, 8.0);
  traj.final_time = 8.0;
  traj.controls = MatrixXd::Zero(N, 1);
  traj.states = MatrixXd::Zero(N, 3);
  // Agent parked far below the obstacle track, obstacle drifting down.
  for (int i = 0; i < N; ++i) {
    traj.states(i, 0) = cfg.target_x;
    traj.states(i, 1) = -10.0;
    traj.states(i, 2) = cfg.obstacle_y0 - 0.25 * traj.times[i];
  }
  // Terminal condition wants (10, 0); park there instead so residual != 0.
  traj.states(N - 1, 1) = -10.0;

  SUBCASE("grazing the boundary counts as feasible") {
    OcpProblem q = p;
    q.terminal_condition = nullptr;
    // place one node exactly on the boundary
    traj.states(4, 0) = cfg.obstacle_x;
    traj.states(4, 1) = traj.states(4, 2) - cfg.safe_distance;
    const auto rep = check_feasibility(q, traj, 1e-6);
    CHECK(rep.feasible);
    CHECK(rep.worst_violation == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("violation is reported with its node") {
    OcpProblem q = p;
    q.terminal_condition = nullptr;
    traj.states(5, 0) = cfg.obstacle_x;
    traj.states(5, 1) = traj.states(5, 2) - (cfg.safe_distance - 0.01);
    const auto rep = check_feasibility(q, traj, 1e-6);
    CHECK_FALSE(rep.feasible);
    CHECK(rep.worst_node == 5);
    CHECK(rep.worst_component == 0);
    CHECK(rep.worst_violation == doctest::Approx(0.01).epsilon(1e-6));
  }
  SUBCASE("terminal residual within tolerance passes") {
    traj.states(N - 1, 0) = cfg.target_x;
    traj.states(N - 1, 1) = cfg.target_y + 1e-9;
    const auto rep = check_feasibility(p, traj, 1e-6);
    CHECK(rep.terminal_ok);
    CHECK(rep.feasible);
  }
  SUBCASE("tol=0 feasibility implies feasibility at any larger tol") {
    OcpProblem q = p;
    q.terminal_condition = nullptr;
    traj.states(4, 0) = cfg.obstacle_x;
    traj.states(4, 1) = traj.states(4, 2) - cfg.safe_distance - 1e-9;
    if (check_feasibility(q, traj, 0.0).feasible) {
      for (double tol : {1e-9, 1e-6, 1e-3, 1.0})
        CHECK(check_feasibility(q, traj, tol).feasible);
    }
  }
}
