#pragma once

#include "rcsopt/nlp.hpp"

namespace rcsopt {

struct NlpSolution {
  Trajectory trajectory;
  bool converged = false;
  double kkt_residual = 0.0;
  double max_constraint_violation = 0.0;  // eq and positive ineq parts
  int outer_iterations = 0;
  int inner_iterations = 0;
  double objective = 0.0;
  double nominal_objective = 0.0;      // phi + quadrature(L)
  double sensitivity_objective = 0.0;  // quadrature of the weighted integrand
  double smoothing_objective = 0.0;    // control-smoothing regularizer
  std::string status;
};

/// Augmented-Lagrangian solve of a transcribed problem from one guess.
/// Non-convergence is reported through `converged`, not an exception;
/// non-finite callback values at accepted iterates throw.
NlpSolution solve(const CollocationNlp& nlp, const Trajectory& initial_guess);

/// Transcribe + solve.
NlpSolution solve(const OcpProblem& problem, const TranscriptionOptions& options,
                  const Trajectory& initial_guess);

/// Solves from every seed and returns the converged solution with the lowest
/// objective; ties break on lower violation, then seed order. When no seed
/// converges, returns the least-infeasible attempt with an aggregate status.
NlpSolution solve_desensitized(const OcpProblem& problem,
                               const TranscriptionOptions& options,
                               const std::vector<Trajectory>& seeds);

/// Straight-line state interpolation from the initial state to
/// `final_state`, constant controls, tf at the midpoint of the bounds.
Trajectory make_line_guess(const OcpProblem& problem, const VectorXd& final_state,
                           const VectorXd& constant_control, int num_nodes);

}  // namespace rcsopt
