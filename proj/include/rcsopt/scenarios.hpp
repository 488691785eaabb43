#pragma once

#include "rcsopt/nlp.hpp"
#include "rcsopt/ocp.hpp"

#include <stdexcept>

namespace rcsopt {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ScenarioKind { Planar2d, LambdaForm, CarTrain, MultiObstacle };
const char* to_string(ScenarioKind kind);

/// Planar time-optimal problem: heading-controlled agent, one circular
/// obstacle sliding down a vertical track, uncertain obstacle speed.
struct Scenario2DConfig {
  double start_x = 0.0, start_y = 0.0;
  double target_x = 10.0, target_y = 0.0;
  double obstacle_x = 5.0;
  double obstacle_y0 = 2.0;
  double agent_speed = 1.0;  // fixed speed, or v_max with speed_control
  bool speed_control = false;
  double nominal_obstacle_speed = 0.25;
  double safe_distance = 0.6;
  double lambda = 1.0;  // constraint form exponent
  std::pair<double, double> final_time_bounds{1.0, 25.0};
};

/// Car on the x-axis crossing a rail track on which a train approaches; the
/// avoidance constraint is active only inside the crossing window, modeled
/// by a super-Gaussian approximation of the boxcar indicator.
struct CarTrainConfig {
  double start = 0.0;
  double target = 10.0;
  double crossing = 5.0;          // track x position
  double track_half_width = 0.5;  // w_o
  double safe_distance = 0.6;     // r_o
  int gamma = 20;                 // even super-Gaussian exponent
  double max_speed = 1.0;
  double train_speed = 0.25;  // nominal, uncertain
  double train_y0 = 2.0;
  std::pair<double, double> final_time_bounds{1.0, 45.0};
};

struct ObstacleSpec {
  double x = 0.0;
  double y0 = 0.0;
  int direction = 1;  // +1 moves toward -y (like the single-obstacle case)
  double speed = 0.25;
  double safe_distance = 0.6;
};

struct MultiObstacleConfig {
  std::vector<ObstacleSpec> obstacles;
  double start_x = 0.0, start_y = 0.0;
  double target_x = 30.0, target_y = 0.0;
  double max_speed = 1.0;
  std::pair<double, double> final_time_bounds{5.0, 60.0};
};

OcpProblem build_scenario_2d(const Scenario2DConfig& cfg);
OcpProblem build_car_train(const CarTrainConfig& cfg);
OcpProblem build_multi_obstacle(const MultiObstacleConfig& cfg);

/// d(g_lambda)/d(v_o) along the nominal obstacle path:
/// -lambda (y_a - y_o) t [(x_a-x_o)^2 + (y_a-y_o)^2]^(lambda/2 - 1).
double closed_form_sg_2d(double agent_x, double agent_y, double obstacle_x,
                         double obstacle_y, double t, double lambda);

/// exp(-((x - x_o)/w_o)^gamma), gamma positive even.
double super_gaussian(double x, double x_o, double w_o, int gamma);

/// A loaded scenario: the problem plus defaults the CLI and sweeps use.
struct Scenario {
  ScenarioKind kind = ScenarioKind::Planar2d;
  OcpProblem problem;
  Scenario2DConfig planar;
  CarTrainConfig car_train;
  MultiObstacleConfig multi;

  double default_alpha = 0.0;
  CostMode cost_mode = CostMode::Rcs;
  RelevanceSpec relevance;
  double initial_penalty = 10.0;  // stiffer for the car-train wait basin

  VectorXd target_state() const;
  /// Straight-line seed plus laterally bent arcs (above/below); the
  /// car-train scenario gets a dash seed and a wait-then-cross seed.
  std::vector<Trajectory> default_seeds(int num_nodes) const;
};

Scenario make_scenario(ScenarioKind kind, const Scenario2DConfig& cfg);
Scenario make_scenario(const CarTrainConfig& cfg);
Scenario make_scenario(const MultiObstacleConfig& cfg);

/// Strict JSON loading: unknown keys are rejected by name; parse errors
/// report line and column.
Scenario load_scenario_json(const std::string& text);
Scenario load_scenario_file(const std::string& path);

/// Minimum agent-obstacle Euclidean distance over the grid (planar and
/// multi-obstacle scenarios).
double min_agent_obstacle_distance(const Scenario& scenario,
                                   const Trajectory& traj);

/// Minimum |y_train| over grid nodes inside the crossing window
/// |x_a - crossing| <= track_half_width; +inf when the window is never hit.
double car_train_crossing_separation(const CarTrainConfig& cfg,
                                     const Trajectory& traj);

/// Trapezoidal integral of ||vec S_r||_Q^2 along a trajectory that carries
/// sensitivities.
double rcs_cost_integral(const OcpProblem& problem, const Trajectory& traj,
                         const RelevanceSpec& relevance,
                         const RcsWeights& weights);

}  // namespace rcsopt
