#pragma once

#include "rcsopt/ocp.hpp"
#include "rcsopt/parallel.hpp"
#include "rcsopt/relevance.hpp"
#include "rcsopt/sensitivity.hpp"

#include <cstdint>

namespace rcsopt {

enum class CostMode { Nominal, Doc, Naive, Rcs };
enum class DefectScheme { Trapezoidal };

const char* to_string(CostMode mode);
CostMode cost_mode_from_string(const std::string& name);

struct TranscriptionOptions {
  int num_nodes = 50;  // >= 10
  DefectScheme defect_scheme = DefectScheme::Trapezoidal;
  CostMode cost_mode = CostMode::Nominal;
  RcsWeights weights;
  RelevanceSpec relevance;
  double path_constraint_tolerance = 1e-6;
  double kkt_tolerance = 1e-6;
  // Starting penalty for the augmented-Lagrangian loop. Soft starts let the
  // iterate tunnel between homotopy classes early on; stiff starts keep the
  // seed's structure. Scenario defaults pick this per problem.
  double initial_penalty = 10.0;
  int max_outer_iterations = 40;
  int max_inner_iterations = 200;
  double fd_step = 1e-6;
  // Tiny quadratic penalty on control differences between adjacent nodes.
  // Trapezoidal defects only see the average of neighboring dynamics, which
  // leaves an odd-even control oscillation null mode when controls do not
  // enter the cost; this regularizer gives that mode curvature.
  double control_smoothing = 1e-3;
  int verbosity = 0;
};

/// Trapezoidal direct collocation of the (optionally sensitivity-augmented)
/// problem on a uniform tau grid, tau in [0,1], t = t0 + tau (tf - t0).
///
/// Decision vector layout:
///   [x~_0, ..., x~_{N-1}, u_0, ..., u_{N-1}, tf]
/// where x~_i stacks the state and, for cost modes other than Nominal, the
/// propagated sensitivity entries (the full vec S or the masked subset).
///
/// Equalities: trapezoidal defects of the coupled dynamics per interval plus
/// the terminal residual. Inequalities: g <= 0 at every node. Variable
/// bounds: node 0 pinned to the initial condition, control box per node and
/// the final-time bounds.
class CollocationNlp {
 public:
  CollocationNlp(const OcpProblem& problem, const TranscriptionOptions& options);

  int dim() const { return dim_; }
  int num_eq() const { return num_eq_; }
  int num_ineq() const { return num_ineq_; }
  int num_nodes() const { return N_; }
  int node_stride() const { return ns_total_; }
  int sens_entries() const { return ns_; }
  const VectorXd& lower() const { return lower_; }
  const VectorXd& upper() const { return upper_; }
  const OcpProblem& problem() const { return problem_; }
  const TranscriptionOptions& options() const { return options_; }

  int state_index(int node) const { return node * ns_total_; }
  int control_index(int node) const { return N_ * ns_total_ + node * m_; }
  int tf_index() const { return N_ * ns_total_ + N_ * m_; }

  /// Resamples a guess onto the collocation grid (piecewise-linear in
  /// normalized time) and clamps it into the variable bounds.
  VectorXd initial_point(const Trajectory& guess) const;

  struct NodeEval {
    VectorXd rhs;    // node_stride: xdot and masked Sdot entries
    VectorXd g;      // k
    VectorXd sres;   // sqrt(Q)-scaled sensitivity residual; sens = |sres|^2
    double running;  // L
    double sens;     // sensitivity integrand for the active cost mode
  };

  struct Eval {
    std::vector<NodeEval> nodes;
    MatrixXd controls;  // N x m, echoed from z for the smoothing terms
    VectorXd ceq;       // defects then terminal residual
    VectorXd cineq;     // g at all nodes
    double objective = 0.0;
    double nominal_term = 0.0;
    double sens_term = 0.0;
    double smooth_term = 0.0;
    double tf = 0.0;
  };
  Eval evaluate(const VectorXd& z) const;

  double objective(const VectorXd& z) const { return evaluate(z).objective; }
  void constraints(const VectorXd& z, VectorXd& ceq, VectorXd& cineq) const;

  /// Central-difference derivative blocks over the decision vector: per-node
  /// local columns plus one tf column, assembled sparsely.
  struct Derivatives {
    Eval eval;
    std::vector<MatrixXd> drhs;  // node_stride x (node_stride + m)
    std::vector<MatrixXd> dg;    // k x (node_stride + m)
    std::vector<VectorXd> dell;  // node_stride + m (running + sens integrand)
    std::vector<MatrixXd> dsres;  // residual dim x (node_stride + m)
    std::vector<VectorXd> drhs_tf;
    std::vector<VectorXd> dg_tf;
    std::vector<VectorXd> dsres_tf;
    VectorXd dell_tf;  // N
    MatrixXd dpsi_x;   // q x n
    VectorXd dpsi_tf;  // q
    VectorXd dphi_x;   // n
    double dphi_tf = 0.0;
  };
  Derivatives derivatives(const VectorXd& z,
                          ExecMode mode = default_exec_mode()) const;

  VectorXd objective_gradient(const Derivatives& d) const;
  /// out += Jeq' yeq + Jineq' yineq.
  void add_jacobian_transpose_product(const Derivatives& d, const VectorXd& yeq,
                                      const VectorXd& yineq, VectorXd& out) const;
  /// H += rho (Jeq' Jeq + Jact' Jact) where Jact keeps inequality rows with
  /// active_ineq[row] != 0. Exploits the band structure: each constraint row
  /// touches one node pair (or node) plus tf.
  void add_gauss_newton_hessian(const Derivatives& d,
                                const std::vector<std::uint8_t>& active_ineq,
                                double rho, MatrixXd& H) const;

  // Dense assemblies for verification and the gradient-check harness.
  MatrixXd dense_eq_jacobian(const Derivatives& d) const;
  MatrixXd dense_ineq_jacobian(const Derivatives& d) const;

  Trajectory decode(const VectorXd& z) const;

  double node_tau(int i) const { return tau_[i]; }

 private:
  NodeEval eval_node(const VectorXd& xa, const VectorXd& u, double tf,
                     int node) const;
  int sens_residual_dim() const;
  MatrixXd expand_sens(const VectorXd& entries) const;  // masked -> n x l
  void assemble(Eval& ev, const VectorXd& z) const;
  void fill_node_blocks_serial(const VectorXd& z, Derivatives& d) const;
  void fill_node_blocks_omp(const VectorXd& z, Derivatives& d) const;
  void fill_local_column(const VectorXd& z, Derivatives& d, long item) const;

  OcpProblem problem_;
  TranscriptionOptions options_;
  int N_, n_, m_, l_, k_, q_;
  int ns_;        // sensitivity entries per node (0 in Nominal mode)
  int ns_total_;  // n + ns
  int dim_, num_eq_, num_ineq_;
  VectorXd lower_, upper_;
  VectorXd tau_;
  SensitivityMask mask_;  // explicit list, full when no mask given
  double sqrt_alpha_ = 0.0;
  MatrixXd sqrt_q_;  // symmetric square root when Q is a matrix
};

}  // namespace rcsopt
