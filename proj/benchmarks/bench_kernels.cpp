// Timing comparison of the serial reference kernels against their OpenMP
// variants: the finite-difference derivative fill over the decision vector
// and the Monte Carlo open-loop batch. Results must be bit-identical; only
// the wall time differs.

#include "rcsopt/evaluation.hpp"
#include "rcsopt/nlp.hpp"
#include "rcsopt/scenarios.hpp"

#include <chrono>
#include <cstdio>

using namespace rcsopt;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename F>
double time_best_of(int reps, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  const char* config =
      argc > 1 ? argv[1] : "configs/multi_obstacle_n5.json";
  const int reps = argc > 2 ? std::atoi(argv[2]) : 5;

  Scenario sc = load_scenario_file(config);
  TranscriptionOptions opts;
  opts.num_nodes = 50;
  opts.cost_mode = CostMode::Rcs;
  opts.weights = RcsWeights(1.0);
  const CollocationNlp nlp(sc.problem, opts);
  const Trajectory seed = sc.default_seeds(opts.num_nodes)[1];
  const VectorXd z = nlp.initial_point(seed);

  std::printf("scenario %s: decision dim %d, %d nodes\n", config, nlp.dim(),
              nlp.num_nodes());

  const double t_fd_serial = time_best_of(
      reps, [&] { (void)nlp.derivatives(z, ExecMode::Serial); });
  const double t_fd_omp = time_best_of(
      reps, [&] { (void)nlp.derivatives(z, ExecMode::OpenMp); });
  const auto ds = nlp.derivatives(z, ExecMode::Serial);
  const auto dp = nlp.derivatives(z, ExecMode::OpenMp);
  bool same = true;
  for (int i = 0; i < nlp.num_nodes() && same; ++i)
    same = ds.drhs[i] == dp.drhs[i] && ds.dg[i] == dp.dg[i] &&
           ds.dell[i] == dp.dell[i];
  std::printf("fd-derivative fill:  serial %8.3f ms | openmp %8.3f ms | "
              "speedup %.2fx | identical %s\n",
              1e3 * t_fd_serial, 1e3 * t_fd_omp, t_fd_serial / t_fd_omp,
              same ? "yes" : "NO");

  const ControlSignal control = ControlSignal::from_trajectory(sc.problem, seed);
  McConfig mc;
  mc.num_samples = 256;
  const MatrixXd deltas = draw_param_perturbations(mc, sc.problem.param_dim);
  const double t_mc_serial = time_best_of(std::max(2, reps / 2), [&] {
    (void)mc_collision_batch_serial(sc.problem, control, deltas, mc);
  });
  const double t_mc_omp = time_best_of(std::max(2, reps / 2), [&] {
    (void)mc_collision_batch_omp(sc.problem, control, deltas, mc);
  });
  const auto ms = mc_collision_batch_serial(sc.problem, control, deltas, mc);
  const auto mp = mc_collision_batch_omp(sc.problem, control, deltas, mc);
  std::printf("monte-carlo batch:   serial %8.3f ms | openmp %8.3f ms | "
              "speedup %.2fx | identical %s\n",
              1e3 * t_mc_serial, 1e3 * t_mc_omp, t_mc_serial / t_mc_omp,
              ms.collided == mp.collided && ms.max_violation == mp.max_violation
                  ? "yes"
                  : "NO");
  return 0;
}
