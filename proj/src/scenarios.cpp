#include "rcsopt/scenarios.hpp"

#include "rcsopt/sensitivity.hpp"
#include "rcsopt/solver.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace rcsopt {

using detail::require;
using nlohmann::json;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_cfg(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}
}  // namespace

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Planar2d: return "planar_2d";
    case ScenarioKind::LambdaForm: return "lambda_form";
    case ScenarioKind::CarTrain: return "car_train";
    case ScenarioKind::MultiObstacle: return "multi_obstacle";
  }
  return "?";
}

double super_gaussian(double x, double x_o, double w_o, int gamma) {
  require(gamma >= 2 && gamma % 2 == 0,
          "super_gaussian: gamma must be a positive even integer");
  require(w_o > 0.0, "super_gaussian: w_o must be positive");
  const double r2 = ((x - x_o) / w_o) * ((x - x_o) / w_o);
  double arg = std::pow(r2, gamma / 2);
  if (!(arg < 1e300)) arg = 1e300;  // clamp; exp(-arg) underflows to 0
  return std::exp(-arg);
}

double closed_form_sg_2d(double agent_x, double agent_y, double obstacle_x,
                         double obstacle_y, double t, double lambda) {
  require(lambda > 0.0, "closed_form_sg_2d: lambda must be positive");
  const double dx = agent_x - obstacle_x;
  const double dy = agent_y - obstacle_y;
  const double d2 = dx * dx + dy * dy;
  if (d2 == 0.0) {
    if (lambda < 2.0)
      throw std::domain_error(
          "closed_form_sg_2d: singular at coincident points for lambda < 2");
    return 0.0;
  }
  return -lambda * dy * t * std::pow(d2, 0.5 * lambda - 1.0);
}

OcpProblem build_scenario_2d(const Scenario2DConfig& cfg) {
  require_cfg(cfg.safe_distance > 0.0, "safe_distance must be positive");
  require_cfg(cfg.lambda > 0.0, "lambda must be positive");
  require_cfg(cfg.agent_speed >= 0.0 && cfg.nominal_obstacle_speed >= 0.0,
              "speeds must be nonnegative");

  OcpProblem p;
  p.state_dim = 3;  // x_a, y_a, y_o
  p.param_dim = 1;  // v_o
  p.control_dim = cfg.speed_control ? 2 : 1;
  p.constraint_dim = 1;

  const double va = cfg.agent_speed;
  const bool vc = cfg.speed_control;
  p.dynamics = [va, vc](const VectorXd& x, const VectorXd& prm,
                        const VectorXd& u, double) -> VectorXd {
    (void)x;
    const double speed = vc ? u[1] : va;
    VectorXd f(3);
    f << speed * std::cos(u[0]), speed * std::sin(u[0]), -prm[0];
    return f;
  };

  const double ro = cfg.safe_distance;
  const double xo = cfg.obstacle_x;
  const double lam = cfg.lambda;
  p.path_constraints = [ro, xo, lam](const VectorXd& x, const VectorXd&,
                                     double) -> VectorXd {
    const double dx = x[0] - xo;
    const double dy = x[1] - x[2];
    VectorXd g(1);
    g[0] = std::pow(ro, lam) - std::pow(dx * dx + dy * dy, 0.5 * lam);
    return g;
  };

  p.dynamics_jac_state = [vc](const VectorXd&, const VectorXd&, const VectorXd&,
                              double) { return MatrixXd::Zero(3, 3).eval(); };
  p.dynamics_jac_param = [](const VectorXd&, const VectorXd&, const VectorXd&,
                            double) {
    MatrixXd B = MatrixXd::Zero(3, 1);
    B(2, 0) = -1.0;
    return B;
  };
  p.constraint_jac_state = [xo, lam](const VectorXd& x, const VectorXd&,
                                     double) {
    const double dx = x[0] - xo;
    const double dy = x[1] - x[2];
    const double d2 = std::max(dx * dx + dy * dy, 1e-18);
    const double f = lam * std::pow(d2, 0.5 * lam - 1.0);
    MatrixXd J(1, 3);
    J << -f * dx, -f * dy, f * dy;
    return J;
  };
  p.constraint_jac_param = [](const VectorXd&, const VectorXd&, double) {
    return MatrixXd::Zero(1, 1).eval();
  };

  const double ax = cfg.target_x, ay = cfg.target_y;
  p.terminal_condition = [ax, ay](const VectorXd& x, double) -> VectorXd {
    VectorXd r(2);
    r << x[0] - ax, x[1] - ay;
    return r;
  };
  p.terminal_cost = [](const VectorXd&, double tf) { return tf; };
  p.running_cost = nullptr;

  p.initial_state.resize(3);
  p.initial_state << cfg.start_x, cfg.start_y, cfg.obstacle_y0;
  p.initial_time = 0.0;
  p.nominal_param.resize(1);
  p.nominal_param << cfg.nominal_obstacle_speed;
  if (vc) {
    p.control_lower.resize(2);
    p.control_upper.resize(2);
    p.control_lower << -kInf, 0.0;
    p.control_upper << kInf, cfg.agent_speed;
  } else {
    p.control_lower = VectorXd::Constant(1, -kInf);
    p.control_upper = VectorXd::Constant(1, kInf);
  }
  p.final_time_bounds = cfg.final_time_bounds;
  p.angular_controls = {0};
  p.validate();
  return p;
}

OcpProblem build_car_train(const CarTrainConfig& cfg) {
  require_cfg(cfg.gamma >= 2 && cfg.gamma % 2 == 0,
              "gamma must be a positive even integer");
  require_cfg(cfg.track_half_width > 0.0, "track_half_width must be positive");
  require_cfg(cfg.safe_distance > 0.0, "safe_distance must be positive");
  require_cfg(cfg.max_speed > 0.0, "max_speed must be positive");

  OcpProblem p;
  p.state_dim = 2;  // x_a, y_o
  p.param_dim = 1;  // v_o
  p.control_dim = 1;
  p.constraint_dim = 1;

  p.dynamics = [](const VectorXd&, const VectorXd& prm, const VectorXd& u,
                  double) -> VectorXd {
    VectorXd f(2);
    f << u[0], -prm[0];
    return f;
  };

  const double xo = cfg.crossing, wo = cfg.track_half_width;
  const double ro = cfg.safe_distance;
  const int gamma = cfg.gamma;
  p.path_constraints = [xo, wo, ro, gamma](const VectorXd& x, const VectorXd&,
                                           double) -> VectorXd {
    VectorXd g(1);
    // y_a == 0: the car never leaves the axis.
    g[0] = super_gaussian(x[0], xo, wo, gamma) * (ro * ro - x[1] * x[1]);
    return g;
  };

  p.dynamics_jac_state = [](const VectorXd&, const VectorXd&, const VectorXd&,
                            double) { return MatrixXd::Zero(2, 2).eval(); };
  p.dynamics_jac_param = [](const VectorXd&, const VectorXd&, const VectorXd&,
                            double) {
    MatrixXd B = MatrixXd::Zero(2, 1);
    B(1, 0) = -1.0;
    return B;
  };
  p.constraint_jac_state = [xo, wo, ro, gamma](const VectorXd& x,
                                               const VectorXd&, double) {
    const double sg = super_gaussian(x[0], xo, wo, gamma);
    MatrixXd J = MatrixXd::Zero(1, 2);
    if (sg > 0.0) {
      const double u = (x[0] - xo) / wo;
      J(0, 0) = -(gamma / wo) * std::pow(u, gamma - 1) * sg *
                (ro * ro - x[1] * x[1]);
    }
    J(0, 1) = -2.0 * x[1] * sg;
    return J;
  };
  p.constraint_jac_param = [](const VectorXd&, const VectorXd&, double) {
    return MatrixXd::Zero(1, 1).eval();
  };

  const double target = cfg.target;
  p.terminal_condition = [target](const VectorXd& x, double) -> VectorXd {
    VectorXd r(1);
    r << x[0] - target;
    return r;
  };
  p.terminal_cost = [](const VectorXd&, double tf) { return tf; };
  p.running_cost = nullptr;

  p.initial_state.resize(2);
  p.initial_state << cfg.start, cfg.train_y0;
  p.initial_time = 0.0;
  p.nominal_param.resize(1);
  p.nominal_param << cfg.train_speed;
  p.control_lower = VectorXd::Constant(1, 0.0);
  p.control_upper = VectorXd::Constant(1, cfg.max_speed);
  p.final_time_bounds = cfg.final_time_bounds;
  p.validate();
  return p;
}

OcpProblem build_multi_obstacle(const MultiObstacleConfig& cfg) {
  const int N = static_cast<int>(cfg.obstacles.size());
  require_cfg(N >= 1, "multi_obstacle needs at least one obstacle");
  for (const auto& o : cfg.obstacles) {
    require_cfg(o.safe_distance > 0.0, "safe_distance must be positive");
    require_cfg(o.direction == 1 || o.direction == -1,
                "obstacle direction must be +1 or -1");
    require_cfg(o.speed >= 0.0, "obstacle speed must be nonnegative");
  }

  OcpProblem p;
  p.state_dim = 2 + N;  // x_a, y_a, y_o1..y_oN
  p.param_dim = N;
  p.control_dim = 2;  // theta, v_a
  p.constraint_dim = N;

  std::vector<double> dirs(N);
  for (int i = 0; i < N; ++i) dirs[i] = cfg.obstacles[i].direction;
  p.dynamics = [dirs, N](const VectorXd&, const VectorXd& prm,
                         const VectorXd& u, double) -> VectorXd {
    VectorXd f(2 + N);
    f[0] = u[1] * std::cos(u[0]);
    f[1] = u[1] * std::sin(u[0]);
    for (int i = 0; i < N; ++i) f[2 + i] = -dirs[i] * prm[i];
    return f;
  };

  std::vector<double> xs(N), ros(N);
  for (int i = 0; i < N; ++i) {
    xs[i] = cfg.obstacles[i].x;
    ros[i] = cfg.obstacles[i].safe_distance;
  }
  p.path_constraints = [xs, ros, N](const VectorXd& x, const VectorXd&,
                                    double) -> VectorXd {
    VectorXd g(N);
    for (int i = 0; i < N; ++i) {
      const double dx = x[0] - xs[i];
      const double dy = x[1] - x[2 + i];
      g[i] = ros[i] - std::sqrt(dx * dx + dy * dy);
    }
    return g;
  };

  p.dynamics_jac_state = [N](const VectorXd&, const VectorXd&, const VectorXd&,
                             double) { return MatrixXd::Zero(2 + N, 2 + N).eval(); };
  p.dynamics_jac_param = [dirs, N](const VectorXd&, const VectorXd&,
                                   const VectorXd&, double) {
    MatrixXd B = MatrixXd::Zero(2 + N, N);
    for (int i = 0; i < N; ++i) B(2 + i, i) = -dirs[i];
    return B;
  };
  p.constraint_jac_state = [xs, N](const VectorXd& x, const VectorXd&, double) {
    MatrixXd J = MatrixXd::Zero(N, 2 + N);
    for (int i = 0; i < N; ++i) {
      const double dx = x[0] - xs[i];
      const double dy = x[1] - x[2 + i];
      const double dist = std::max(std::sqrt(dx * dx + dy * dy), 1e-9);
      J(i, 0) = -dx / dist;
      J(i, 1) = -dy / dist;
      J(i, 2 + i) = dy / dist;
    }
    return J;
  };
  p.constraint_jac_param = [N](const VectorXd&, const VectorXd&, double) {
    return MatrixXd::Zero(N, N).eval();
  };

  const double ax = cfg.target_x, ay = cfg.target_y;
  p.terminal_condition = [ax, ay](const VectorXd& x, double) -> VectorXd {
    VectorXd r(2);
    r << x[0] - ax, x[1] - ay;
    return r;
  };
  p.terminal_cost = [](const VectorXd&, double tf) { return tf; };
  p.running_cost = nullptr;

  p.initial_state.resize(2 + N);
  p.initial_state[0] = cfg.start_x;
  p.initial_state[1] = cfg.start_y;
  for (int i = 0; i < N; ++i) p.initial_state[2 + i] = cfg.obstacles[i].y0;
  p.initial_time = 0.0;
  p.nominal_param.resize(N);
  for (int i = 0; i < N; ++i) p.nominal_param[i] = cfg.obstacles[i].speed;
  p.control_lower.resize(2);
  p.control_upper.resize(2);
  p.control_lower << -kInf, 0.0;
  p.control_upper << kInf, cfg.max_speed;
  p.final_time_bounds = cfg.final_time_bounds;

  p.angular_controls = {0};
  // Constraint i sees only obstacle i; everything else in S is zero.
  SensitivityMask mask;
  for (int i = 0; i < N; ++i) mask.emplace_back(2 + i, i);
  p.sensitivity_mask = mask;
  p.validate();
  return p;
}

VectorXd Scenario::target_state() const {
  const double tf_mid = 0.5 * (problem.final_time_bounds.first +
                               problem.final_time_bounds.second);
  VectorXd xf = problem.initial_state;
  switch (kind) {
    case ScenarioKind::Planar2d:
    case ScenarioKind::LambdaForm:
      xf[0] = planar.target_x;
      xf[1] = planar.target_y;
      xf[2] = planar.obstacle_y0 - planar.nominal_obstacle_speed * tf_mid;
      break;
    case ScenarioKind::CarTrain:
      xf[0] = car_train.target;
      xf[1] = car_train.train_y0 - car_train.train_speed * tf_mid;
      break;
    case ScenarioKind::MultiObstacle:
      xf[0] = multi.target_x;
      xf[1] = multi.target_y;
      for (size_t i = 0; i < multi.obstacles.size(); ++i)
        xf[2 + i] = multi.obstacles[i].y0 -
                    multi.obstacles[i].direction * multi.obstacles[i].speed *
                        tf_mid;
      break;
  }
  return xf;
}

namespace {

// Agent path bent sideways by bulge*sin(pi*tau); obstacle states follow
// their nominal motion so the dynamics defects start small.
Trajectory planar_seed(const Scenario& sc, int num_nodes, double bulge) {
  const OcpProblem& p = sc.problem;
  const double t0 = p.initial_time;
  const double tf = 0.5 * (p.final_time_bounds.first + p.final_time_bounds.second);
  const bool is_multi = sc.kind == ScenarioKind::MultiObstacle;
  const double sx = p.initial_state[0], sy = p.initial_state[1];
  double txv, tyv;
  if (is_multi) {
    txv = sc.multi.target_x;
    tyv = sc.multi.target_y;
  } else {
    txv = sc.planar.target_x;
    tyv = sc.planar.target_y;
  }
  const double chord_x = txv - sx, chord_y = tyv - sy;
  const double chord = std::max(1e-9, std::hypot(chord_x, chord_y));
  const double perp_x = -chord_y / chord, perp_y = chord_x / chord;

  Trajectory traj;
  traj.times = VectorXd::LinSpaced(num_nodes, t0, tf);
  traj.final_time = tf;
  traj.states.resize(num_nodes, p.state_dim);
  traj.controls.resize(num_nodes, p.control_dim);
  for (int i = 0; i < num_nodes; ++i) {
    const double tau = static_cast<double>(i) / (num_nodes - 1);
    const double off = bulge * std::sin(M_PI * tau);
    traj.states(i, 0) = sx + tau * chord_x + off * perp_x;
    traj.states(i, 1) = sy + tau * chord_y + off * perp_y;
    const double t = traj.times[i];
    if (is_multi) {
      for (size_t j = 0; j < sc.multi.obstacles.size(); ++j) {
        const auto& o = sc.multi.obstacles[j];
        traj.states(i, 2 + j) = o.y0 - o.direction * o.speed * t;
      }
    } else {
      traj.states(i, 2) =
          sc.planar.obstacle_y0 - sc.planar.nominal_obstacle_speed * t;
    }
  }
  for (int i = 0; i < num_nodes; ++i) {
    const int j = std::min(i + 1, num_nodes - 1);
    const int h = std::max(j - 1, 0);
    const double dx = traj.states(j, 0) - traj.states(h, 0);
    const double dy = traj.states(j, 1) - traj.states(h, 1);
    traj.controls(i, 0) = std::atan2(dy, dx);
    if (p.control_dim > 1)
      traj.controls(i, 1) = p.control_upper[1];  // max speed
  }
  return traj;
}

// Lateral offset tent peaking over the obstacle cluster; early obstacles
// need the deformation near the start, where a half-sine arc stays flat.
Trajectory multi_tent_seed(const Scenario& sc, int num_nodes, double amp) {
  Trajectory traj = planar_seed(sc, num_nodes, 0.0);
  double x_min = 1e300, x_max = -1e300;
  for (const auto& o : sc.multi.obstacles) {
    x_min = std::min(x_min, o.x);
    x_max = std::max(x_max, o.x);
  }
  const double apex = 0.5 * (x_min + x_max);
  const double x_end =
      std::min(sc.multi.target_x, x_max + std::max(4.0, apex));
  for (int i = 0; i < num_nodes; ++i) {
    const double x = traj.states(i, 0);
    double w = 0.0;
    if (x < apex)
      w = apex > 0 ? x / apex : 0.0;
    else if (x < x_end)
      w = (x_end - x) / std::max(x_end - apex, 1e-9);
    traj.states(i, 1) += amp * std::max(0.0, w);
  }
  for (int i = 0; i < num_nodes; ++i) {
    const int j = std::min(i + 1, num_nodes - 1);
    const int h = std::max(j - 1, 0);
    traj.controls(i, 0) = std::atan2(traj.states(j, 1) - traj.states(h, 1),
                                     traj.states(j, 0) - traj.states(h, 0));
  }
  return traj;
}

// Drive at full speed after an initial hold; hold = 0 is the plain dash.
Trajectory car_train_seed(const Scenario& sc, int num_nodes, double hold) {
  const OcpProblem& p = sc.problem;
  const auto& cfg = sc.car_train;
  const double t0 = p.initial_time;
  const double dist = cfg.target - cfg.start;
  const double t_go = std::abs(dist) / cfg.max_speed;
  const double tf =
      std::min(std::max(hold + 1.05 * t_go, p.final_time_bounds.first),
               p.final_time_bounds.second);

  Trajectory traj;
  traj.times = VectorXd::LinSpaced(num_nodes, t0, tf);
  traj.final_time = tf;
  traj.states.resize(num_nodes, 2);
  traj.controls.resize(num_nodes, 1);
  for (int i = 0; i < num_nodes; ++i) {
    const double t = traj.times[i];
    const double moving = std::min(std::max(t - hold, 0.0), t_go);
    traj.states(i, 0) = cfg.start + (dist >= 0 ? 1.0 : -1.0) * cfg.max_speed * moving;
    traj.states(i, 1) = cfg.train_y0 - cfg.train_speed * t;
    traj.controls(i, 0) = (t >= hold && t <= hold + t_go) ? cfg.max_speed : 0.0;
  }
  return traj;
}

}  // namespace

std::vector<Trajectory> Scenario::default_seeds(int num_nodes) const {
  std::vector<Trajectory> seeds;
  if (kind == ScenarioKind::CarTrain) {
    // Dash plus hold-then-cross seeds at a few wait levels; which one wins
    // depends on how strongly the sensitivity term is weighted.
    const double t_go =
        std::abs(car_train.target - car_train.start) / car_train.max_speed;
    for (double hold : {0.0, 0.4 * t_go, 1.0 * t_go, 1.6 * t_go})
      seeds.push_back(car_train_seed(*this, num_nodes, hold));
    return seeds;
  }
  double span;
  if (kind == ScenarioKind::MultiObstacle)
    span = std::hypot(multi.target_x - multi.start_x,
                      multi.target_y - multi.start_y);
  else
    span = std::hypot(planar.target_x - planar.start_x,
                      planar.target_y - planar.start_y);
  const double bulge = std::max(0.15 * span, 1.5);
  seeds.push_back(planar_seed(*this, num_nodes, 0.0));
  seeds.push_back(planar_seed(*this, num_nodes, bulge));
  seeds.push_back(planar_seed(*this, num_nodes, -bulge));
  if (kind == ScenarioKind::MultiObstacle) {
    seeds.push_back(multi_tent_seed(*this, num_nodes, bulge));
    seeds.push_back(multi_tent_seed(*this, num_nodes, -bulge));
  }
  return seeds;
}

Scenario make_scenario(ScenarioKind kind, const Scenario2DConfig& cfg) {
  require(kind == ScenarioKind::Planar2d || kind == ScenarioKind::LambdaForm,
          "make_scenario: kind/config mismatch");
  Scenario sc;
  sc.kind = kind;
  sc.planar = cfg;
  sc.problem = build_scenario_2d(cfg);
  return sc;
}

Scenario make_scenario(const CarTrainConfig& cfg) {
  Scenario sc;
  sc.kind = ScenarioKind::CarTrain;
  sc.car_train = cfg;
  sc.problem = build_car_train(cfg);
  sc.initial_penalty = 300.0;
  return sc;
}

Scenario make_scenario(const MultiObstacleConfig& cfg) {
  Scenario sc;
  sc.kind = ScenarioKind::MultiObstacle;
  sc.multi = cfg;
  sc.problem = build_multi_obstacle(cfg);
  return sc;
}

// ---------------------------------------------------------------------------
// JSON loading

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key \"" + it.key() + "\" in scenario config");
}

double get_num(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number())
    throw ConfigError("key \"" + key + "\": expected a number");
  return j[key].get<double>();
}

bool get_bool(const json& j, const std::string& key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean())
    throw ConfigError("key \"" + key + "\": expected a boolean");
  return j[key].get<bool>();
}

int get_int(const json& j, const std::string& key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer())
    throw ConfigError("key \"" + key + "\": expected an integer");
  return j[key].get<int>();
}

std::pair<double, double> get_pair(const json& j, const std::string& key,
                                   std::pair<double, double> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j[key];
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError("key \"" + key + "\": expected [number, number]");
  return {v[0].get<double>(), v[1].get<double>()};
}

void apply_solver_keys(Scenario& sc, const json& j) {
  sc.default_alpha = get_num(j, "alpha", 0.0);
  if (j.contains("relevance")) {
    if (!j["relevance"].is_string())
      throw ConfigError("key \"relevance\": expected a string");
    try {
      sc.relevance.kind =
          relevance_kind_from_string(j["relevance"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  sc.relevance.scale = get_num(j, "relevance_scale", 1.0);
  if (sc.relevance.scale <= 0.0)
    throw ConfigError("key \"relevance_scale\": must be positive");
  if (j.contains("cost_mode")) {
    if (!j["cost_mode"].is_string())
      throw ConfigError("key \"cost_mode\": expected a string");
    try {
      sc.cost_mode = cost_mode_from_string(j["cost_mode"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
}

const std::set<std::string> kSolverKeys = {"alpha", "relevance",
                                           "relevance_scale", "cost_mode"};

std::set<std::string> with_solver_keys(std::set<std::string> keys) {
  keys.insert(kSolverKeys.begin(), kSolverKeys.end());
  keys.insert("scenario");
  keys.insert("final_time_bounds");
  return keys;
}

}  // namespace

Scenario load_scenario_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    size_t line = 1, col = 1;
    for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << "JSON parse error at line " << line << ", column " << col << ": "
       << e.what();
    throw ConfigError(os.str());
  }
  if (!j.is_object() || !j.contains("scenario") || !j["scenario"].is_string())
    throw ConfigError("config must be an object with a \"scenario\" string key");
  const std::string kind = j["scenario"].get<std::string>();

  Scenario sc;
  if (kind == "planar_2d" || kind == "lambda_form") {
    check_keys(j, with_solver_keys({"start", "target", "obstacle_x",
                                    "obstacle_y0", "agent_speed",
                                    "speed_control", "nominal_obstacle_speed",
                                    "safe_distance", "lambda"}));
    Scenario2DConfig cfg;
    const auto start = get_pair(j, "start", {cfg.start_x, cfg.start_y});
    const auto target = get_pair(j, "target", {cfg.target_x, cfg.target_y});
    cfg.start_x = start.first;
    cfg.start_y = start.second;
    cfg.target_x = target.first;
    cfg.target_y = target.second;
    cfg.obstacle_x = get_num(j, "obstacle_x", cfg.obstacle_x);
    cfg.obstacle_y0 = get_num(j, "obstacle_y0", cfg.obstacle_y0);
    cfg.agent_speed = get_num(j, "agent_speed", cfg.agent_speed);
    cfg.speed_control = get_bool(j, "speed_control", cfg.speed_control);
    cfg.nominal_obstacle_speed =
        get_num(j, "nominal_obstacle_speed", cfg.nominal_obstacle_speed);
    cfg.safe_distance = get_num(j, "safe_distance", cfg.safe_distance);
    cfg.lambda = get_num(j, "lambda", cfg.lambda);
    cfg.final_time_bounds =
        get_pair(j, "final_time_bounds", cfg.final_time_bounds);
    try {
      sc = make_scenario(kind == "planar_2d" ? ScenarioKind::Planar2d
                                             : ScenarioKind::LambdaForm,
                         cfg);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (kind == "car_train") {
    check_keys(j, with_solver_keys({"start", "target", "crossing",
                                    "track_half_width", "safe_distance",
                                    "gamma", "max_speed", "train_speed",
                                    "train_y0"}));
    CarTrainConfig cfg;
    cfg.start = get_num(j, "start", cfg.start);
    cfg.target = get_num(j, "target", cfg.target);
    cfg.crossing = get_num(j, "crossing", cfg.crossing);
    cfg.track_half_width = get_num(j, "track_half_width", cfg.track_half_width);
    cfg.safe_distance = get_num(j, "safe_distance", cfg.safe_distance);
    cfg.gamma = get_int(j, "gamma", cfg.gamma);
    cfg.max_speed = get_num(j, "max_speed", cfg.max_speed);
    cfg.train_speed = get_num(j, "train_speed", cfg.train_speed);
    cfg.train_y0 = get_num(j, "train_y0", cfg.train_y0);
    cfg.final_time_bounds =
        get_pair(j, "final_time_bounds", cfg.final_time_bounds);
    try {
      sc = make_scenario(cfg);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (kind == "multi_obstacle") {
    check_keys(j, with_solver_keys({"start", "target", "max_speed",
                                    "obstacles"}));
    MultiObstacleConfig cfg;
    const auto start = get_pair(j, "start", {cfg.start_x, cfg.start_y});
    const auto target = get_pair(j, "target", {cfg.target_x, cfg.target_y});
    cfg.start_x = start.first;
    cfg.start_y = start.second;
    cfg.target_x = target.first;
    cfg.target_y = target.second;
    cfg.max_speed = get_num(j, "max_speed", cfg.max_speed);
    cfg.final_time_bounds =
        get_pair(j, "final_time_bounds", cfg.final_time_bounds);
    if (!j.contains("obstacles") || !j["obstacles"].is_array())
      throw ConfigError("multi_obstacle config needs an \"obstacles\" array");
    for (const auto& jo : j["obstacles"]) {
      if (!jo.is_object())
        throw ConfigError("key \"obstacles\": entries must be objects");
      check_keys(jo, {"x", "y0", "direction", "speed", "safe_distance"});
      ObstacleSpec o;
      o.x = get_num(jo, "x", 0.0);
      o.y0 = get_num(jo, "y0", 0.0);
      o.direction = get_int(jo, "direction", 1);
      o.speed = get_num(jo, "speed", 0.25);
      o.safe_distance = get_num(jo, "safe_distance", 0.6);
      cfg.obstacles.push_back(o);
    }
    try {
      sc = make_scenario(cfg);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else {
    throw ConfigError("unknown scenario \"" + kind + "\"");
  }
  apply_solver_keys(sc, j);
  return sc;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_scenario_json(ss.str());
}

double min_agent_obstacle_distance(const Scenario& scenario,
                                   const Trajectory& traj) {
  require(scenario.kind != ScenarioKind::CarTrain,
          "min_agent_obstacle_distance: not defined for car_train");
  double best = kInf;
  for (int i = 0; i < traj.num_nodes(); ++i) {
    const double xa = traj.states(i, 0), ya = traj.states(i, 1);
    if (scenario.kind == ScenarioKind::MultiObstacle) {
      for (size_t o = 0; o < scenario.multi.obstacles.size(); ++o) {
        const double d = std::hypot(xa - scenario.multi.obstacles[o].x,
                                    ya - traj.states(i, 2 + o));
        best = std::min(best, d);
      }
    } else {
      best = std::min(best, std::hypot(xa - scenario.planar.obstacle_x,
                                       ya - traj.states(i, 2)));
    }
  }
  return best;
}

double car_train_crossing_separation(const CarTrainConfig& cfg,
                                     const Trajectory& traj) {
  double best = kInf;
  for (int i = 0; i < traj.num_nodes(); ++i) {
    if (std::abs(traj.states(i, 0) - cfg.crossing) <= cfg.track_half_width)
      best = std::min(best, std::abs(traj.states(i, 1)));
  }
  return best;
}

double rcs_cost_integral(const OcpProblem& problem, const Trajectory& traj,
                         const RelevanceSpec& relevance,
                         const RcsWeights& weights) {
  require(traj.has_sensitivities(), "rcs_cost_integral needs sensitivities");
  const int N = traj.num_nodes();
  VectorXd integrand(N);
  for (int i = 0; i < N; ++i) {
    const VectorXd x = traj.states.row(i).transpose();
    const VectorXd g =
        evaluate_constraints(problem, x, problem.nominal_param, traj.times[i]);
    const MatrixXd Sg =
        constraint_sensitivity(problem, x, traj.sensitivities[i], traj.times[i]);
    integrand[i] = rcs_running_cost(rcs_matrix(g, Sg, relevance), weights);
  }
  double total = 0.0;
  for (int i = 1; i < N; ++i)
    total += 0.5 * (traj.times[i] - traj.times[i - 1]) *
             (integrand[i - 1] + integrand[i]);
  return total;
}

}  // namespace rcsopt
