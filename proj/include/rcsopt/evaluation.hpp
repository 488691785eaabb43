#pragma once

#include "rcsopt/parallel.hpp"
#include "rcsopt/scenarios.hpp"
#include "rcsopt/sensitivity.hpp"
#include "rcsopt/solver.hpp"

#include <cstdint>

namespace rcsopt {

struct McConfig {
  int num_samples = 1000;
  double perturbation_std = 0.31622776601683794;  // sqrt(0.1): the reference
                                                  // variance is 0.1, stored
                                                  // here as a std deviation
  std::uint64_t rng_seed = 0;
  double violation_tolerance = 0.0;
  int fine_grid_factor = 4;  // fine nodes per control knot
  int substeps = 4;          // RK4 substeps per fine interval
};

struct OpenLoopResult {
  Trajectory trajectory;  // fine grid; constraint_values under the sample
  bool collided = false;
  bool diverged = false;  // counted as a collision
  double max_violation = 0.0;
};

/// Re-integrates the true dynamics under `param_sample` with the solved
/// control held piecewise-linear (clamped to the control box) on a grid at
/// least fine_grid_factor times denser than the control knots.
OpenLoopResult simulate_open_loop(const OcpProblem& problem,
                                  const ControlSignal& control,
                                  const VectorXd& param_sample,
                                  const McConfig& mc = {});

struct CollisionEstimate {
  double p_c = 0.0;
  double ci_low = 0.0, ci_high = 0.0;  // Wilson 95%
  int num_collided = 0;
  int num_samples = 0;
  std::uint64_t seed = 0;
};

/// 95% Wilson score interval.
std::pair<double, double> wilson_interval(int successes, int trials);

/// i.i.d. N(0, sigma^2) perturbations, one row per sample, generated from
/// counter-based streams keyed by (rng_seed, sample index): the draw for a
/// sample never depends on evaluation order or concurrency.
MatrixXd draw_param_perturbations(const McConfig& mc, int param_dim);

/// Per-sample open-loop verdicts; `collided[i]` and `max_violation[i]` are
/// written independently. The OpenMP kernel is bit-identical to the serial
/// reference.
struct McBatchResult {
  std::vector<std::uint8_t> collided;
  std::vector<double> max_violation;
};
McBatchResult mc_collision_batch_serial(const OcpProblem& problem,
                                        const ControlSignal& control,
                                        const MatrixXd& deltas,
                                        const McConfig& mc);
McBatchResult mc_collision_batch_omp(const OcpProblem& problem,
                                     const ControlSignal& control,
                                     const MatrixXd& deltas, const McConfig& mc);

CollisionEstimate collision_probability(const OcpProblem& problem,
                                        const ControlSignal& control,
                                        const McConfig& mc,
                                        ExecMode mode = default_exec_mode());

struct TradeoffRow {
  double alpha = 0.0;
  bool solved = false;
  double t_f = 0.0;
  CollisionEstimate estimate;
  std::string solver_status;
};

struct TradeoffReport {
  std::vector<TradeoffRow> rows;  // sorted by alpha
  McConfig mc;
  std::string to_csv() const;   // alpha,t_f,p_c,ci_low,ci_high,n_samples,seed
  std::string to_json() const;  // structured mirror with solver status
};

/// For each alpha: solve_desensitized with Q = alpha I, then Monte Carlo
/// collision probability of the best plan. A failed solve is recorded in its
/// row and the sweep continues. Also returns the solved trajectories for
/// export (empty trajectory when the solve failed).
TradeoffReport tradeoff_sweep(const Scenario& scenario,
                              const TranscriptionOptions& base_options,
                              std::vector<double> alphas, const McConfig& mc,
                              std::vector<NlpSolution>* solutions = nullptr);

}  // namespace rcsopt
