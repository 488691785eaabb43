#include "rcsopt/nlp.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace rcsopt {

using detail::require;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

const char* to_string(CostMode mode) {
  switch (mode) {
    case CostMode::Nominal: return "nominal";
    case CostMode::Doc: return "doc";
    case CostMode::Naive: return "naive";
    case CostMode::Rcs: return "rcs";
  }
  return "?";
}

CostMode cost_mode_from_string(const std::string& name) {
  if (name == "nominal") return CostMode::Nominal;
  if (name == "doc") return CostMode::Doc;
  if (name == "naive") return CostMode::Naive;
  if (name == "rcs") return CostMode::Rcs;
  throw std::invalid_argument("unknown cost mode: " + name);
}

CollocationNlp::CollocationNlp(const OcpProblem& problem,
                               const TranscriptionOptions& options)
    : problem_(problem), options_(options) {
  problem_.validate();
  require(options.num_nodes >= 10, "num_nodes must be >= 10");
  require(options.path_constraint_tolerance > 0.0 && options.kkt_tolerance > 0.0,
          "tolerances must be positive");

  N_ = options.num_nodes;
  n_ = problem_.state_dim;
  m_ = problem_.control_dim;
  l_ = problem_.param_dim;
  k_ = problem_.constraint_dim;
  q_ = problem_.terminal_dim();

  if (options_.cost_mode == CostMode::Nominal) {
    if (!options_.weights.is_zero())
      std::fprintf(stderr,
                   "[transcribe] warning: nominal cost mode ignores nonzero "
                   "sensitivity weights\n");
    mask_.clear();
  } else if (problem_.sensitivity_mask) {
    mask_ = *problem_.sensitivity_mask;
  } else {
    mask_.reserve(static_cast<size_t>(n_) * l_);
    for (int p = 0; p < l_; ++p)
      for (int s = 0; s < n_; ++s) mask_.emplace_back(s, p);
  }
  ns_ = static_cast<int>(mask_.size());
  ns_total_ = n_ + ns_;

  if (options_.cost_mode != CostMode::Nominal) {
    if (options_.weights.is_scalar()) {
      sqrt_alpha_ = std::sqrt(options_.weights.alpha());
    } else {
      const MatrixXd& Q = options_.weights.matrix();
      require(static_cast<int>(Q.rows()) == sens_residual_dim(),
              "weights: Q dimension must match the vectorized sensitivity "
              "length for the chosen cost mode");
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(Q);
      sqrt_q_ = es.eigenvectors() *
                es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                es.eigenvectors().transpose();
    }
  }

  dim_ = N_ * ns_total_ + N_ * m_ + 1;
  num_eq_ = (N_ - 1) * ns_total_ + q_;
  num_ineq_ = N_ * k_;

  tau_ = VectorXd::LinSpaced(N_, 0.0, 1.0);

  lower_ = VectorXd::Constant(dim_, -kInf);
  upper_ = VectorXd::Constant(dim_, kInf);
  for (int i = 0; i < N_; ++i) {
    lower_.segment(control_index(i), m_) = problem_.control_lower;
    upper_.segment(control_index(i), m_) = problem_.control_upper;
  }
  // Node 0 is pinned: fixed initial state, zero initial sensitivity.
  lower_.segment(state_index(0), n_) = problem_.initial_state;
  upper_.segment(state_index(0), n_) = problem_.initial_state;
  lower_.segment(state_index(0) + n_, ns_).setZero();
  upper_.segment(state_index(0) + n_, ns_).setZero();
  lower_[tf_index()] = problem_.final_time_bounds.first;
  upper_[tf_index()] = problem_.final_time_bounds.second;
}

MatrixXd CollocationNlp::expand_sens(const VectorXd& entries) const {
  MatrixXd S = MatrixXd::Zero(n_, l_);
  for (int e = 0; e < ns_; ++e) S(mask_[e].first, mask_[e].second) = entries[e];
  return S;
}

int CollocationNlp::sens_residual_dim() const {
  switch (options_.cost_mode) {
    case CostMode::Nominal: return 0;
    case CostMode::Doc: return n_ * l_;
    case CostMode::Naive:
    case CostMode::Rcs: return k_ * l_;
  }
  return 0;
}

CollocationNlp::NodeEval CollocationNlp::eval_node(const VectorXd& xa,
                                                   const VectorXd& u, double tf,
                                                   int node) const {
  const double t0 = problem_.initial_time;
  const double t = t0 + tau_[node] * (tf - t0);
  const VectorXd x = xa.head(n_);
  const FdOptions fd{options_.fd_step};

  NodeEval ev;
  ev.rhs.resize(ns_total_);
  ev.g = k_ > 0 ? problem_.path_constraints(x, problem_.nominal_param, t)
                : VectorXd(0);
  ev.running = problem_.running_cost ? problem_.running_cost(x, u, t) : 0.0;
  ev.sens = 0.0;

  if (options_.cost_mode == CostMode::Nominal) {
    ev.rhs = problem_.dynamics(x, problem_.nominal_param, u, t);
    return ev;
  }

  const MatrixXd S = expand_sens(xa.tail(ns_));
  const AugmentedRhs rhs = augmented_rhs(problem_, x, S, u, t, fd);
  ev.rhs.head(n_) = rhs.xdot;
  for (int e = 0; e < ns_; ++e)
    ev.rhs[n_ + e] = rhs.Sdot(mask_[e].first, mask_[e].second);

  MatrixXd M;  // the penalized sensitivity matrix for the active mode
  switch (options_.cost_mode) {
    case CostMode::Doc:
      M = S;
      break;
    case CostMode::Naive:
      M = constraint_sensitivity(problem_, x, S, t, fd);
      break;
    case CostMode::Rcs:
      M = rcs_matrix(ev.g, constraint_sensitivity(problem_, x, S, t, fd),
                     options_.relevance);
      break;
    case CostMode::Nominal:
      return ev;
  }
  const Eigen::Map<const VectorXd> vec(M.data(), M.size());
  ev.sres = options_.weights.is_scalar() ? (sqrt_alpha_ * vec).eval()
                                         : (sqrt_q_ * vec).eval();
  ev.sens = ev.sres.squaredNorm();
  return ev;
}

void CollocationNlp::assemble(Eval& ev, const VectorXd& z) const {
  const double t0 = problem_.initial_time;
  const double tf = z[tf_index()];
  const double T = tf - t0;
  const double htau = 1.0 / (N_ - 1);
  ev.tf = tf;

  ev.ceq.resize(num_eq_);
  ev.cineq.resize(num_ineq_);

  double running_sum = 0.0, sens_sum = 0.0;
  for (int i = 0; i < N_; ++i) {
    const double w = (i == 0 || i == N_ - 1) ? 0.5 : 1.0;
    running_sum += w * ev.nodes[i].running;
    sens_sum += w * ev.nodes[i].sens;
    if (k_ > 0) ev.cineq.segment(i * k_, k_) = ev.nodes[i].g;
  }
  const double scale = htau * T;
  const VectorXd xf = z.segment(state_index(N_ - 1), n_);
  const double phi =
      problem_.terminal_cost ? problem_.terminal_cost(xf, tf) : 0.0;
  ev.nominal_term = phi + scale * running_sum;
  ev.sens_term = scale * sens_sum;

  ev.controls.resize(N_, m_);
  for (int i = 0; i < N_; ++i)
    ev.controls.row(i) = z.segment(control_index(i), m_).transpose();
  ev.smooth_term = 0.0;
  for (int i = 0; i < N_ - 1; ++i)
    ev.smooth_term += (ev.controls.row(i + 1) - ev.controls.row(i)).squaredNorm();
  ev.smooth_term *= options_.control_smoothing;

  ev.objective = ev.nominal_term + ev.sens_term + ev.smooth_term;

  for (int i = 0; i < N_ - 1; ++i) {
    const auto xa0 = z.segment(state_index(i), ns_total_);
    const auto xa1 = z.segment(state_index(i + 1), ns_total_);
    ev.ceq.segment(i * ns_total_, ns_total_) =
        xa1 - xa0 -
        0.5 * scale * (ev.nodes[i].rhs + ev.nodes[i + 1].rhs);
  }
  if (q_ > 0)
    ev.ceq.tail(q_) = problem_.terminal_condition(xf, tf);
}

CollocationNlp::Eval CollocationNlp::evaluate(const VectorXd& z) const {
  require(static_cast<int>(z.size()) == dim_, "evaluate: wrong decision size");
  Eval ev;
  ev.nodes.resize(N_);
  const double tf = z[tf_index()];
  for (int i = 0; i < N_; ++i)
    ev.nodes[i] = eval_node(z.segment(state_index(i), ns_total_),
                            z.segment(control_index(i), m_), tf, i);
  assemble(ev, z);
  return ev;
}

void CollocationNlp::constraints(const VectorXd& z, VectorXd& ceq,
                                 VectorXd& cineq) const {
  Eval ev = evaluate(z);
  ceq = std::move(ev.ceq);
  cineq = std::move(ev.cineq);
}

void CollocationNlp::fill_local_column(const VectorXd& z, Derivatives& d,
                                       long item) const {
  const int cols = ns_total_ + m_;
  const int i = static_cast<int>(item / cols);
  const int c = static_cast<int>(item % cols);
  const double tf = z[tf_index()];
  VectorXd xa = z.segment(state_index(i), ns_total_);
  VectorXd u = z.segment(control_index(i), m_);
  double& slot = c < ns_total_ ? xa[c] : u[c - ns_total_];
  const double v = slot;
  const double h = options_.fd_step * std::max(1.0, std::abs(v));
  slot = v + h;
  const NodeEval ep = eval_node(xa, u, tf, i);
  slot = v - h;
  const NodeEval em = eval_node(xa, u, tf, i);
  const double inv = 1.0 / (2.0 * h);
  d.drhs[i].col(c) = (ep.rhs - em.rhs) * inv;
  if (k_ > 0) d.dg[i].col(c) = (ep.g - em.g) * inv;
  d.dell[i][c] = (ep.running + ep.sens - em.running - em.sens) * inv;
  if (ep.sres.size() > 0) d.dsres[i].col(c) = (ep.sres - em.sres) * inv;
}

void CollocationNlp::fill_node_blocks_serial(const VectorXd& z,
                                             Derivatives& d) const {
  const long items = static_cast<long>(N_) * (ns_total_ + m_);
  for (long it = 0; it < items; ++it) fill_local_column(z, d, it);

  const double tf = z[tf_index()];
  const double h = options_.fd_step * std::max(1.0, std::abs(tf));
  const double inv = 1.0 / (2.0 * h);
  for (int i = 0; i < N_; ++i) {
    const VectorXd xa = z.segment(state_index(i), ns_total_);
    const VectorXd u = z.segment(control_index(i), m_);
    const NodeEval ep = eval_node(xa, u, tf + h, i);
    const NodeEval em = eval_node(xa, u, tf - h, i);
    d.drhs_tf[i] = (ep.rhs - em.rhs) * inv;
    if (k_ > 0) d.dg_tf[i] = (ep.g - em.g) * inv;
    d.dell_tf[i] = (ep.running + ep.sens - em.running - em.sens) * inv;
    if (ep.sres.size() > 0) d.dsres_tf[i] = (ep.sres - em.sres) * inv;
  }
}

void CollocationNlp::fill_node_blocks_omp(const VectorXd& z,
                                          Derivatives& d) const {
  const long items = static_cast<long>(N_) * (ns_total_ + m_);
#pragma omp parallel for schedule(dynamic, 4)
  for (long it = 0; it < items; ++it) fill_local_column(z, d, it);

  const double tf = z[tf_index()];
  const double h = options_.fd_step * std::max(1.0, std::abs(tf));
  const double inv = 1.0 / (2.0 * h);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < N_; ++i) {
    const VectorXd xa = z.segment(state_index(i), ns_total_);
    const VectorXd u = z.segment(control_index(i), m_);
    const NodeEval ep = eval_node(xa, u, tf + h, i);
    const NodeEval em = eval_node(xa, u, tf - h, i);
    d.drhs_tf[i] = (ep.rhs - em.rhs) * inv;
    if (k_ > 0) d.dg_tf[i] = (ep.g - em.g) * inv;
    d.dell_tf[i] = (ep.running + ep.sens - em.running - em.sens) * inv;
    if (ep.sres.size() > 0) d.dsres_tf[i] = (ep.sres - em.sres) * inv;
  }
}

CollocationNlp::Derivatives CollocationNlp::derivatives(const VectorXd& z,
                                                        ExecMode mode) const {
  Derivatives d;
  d.eval = evaluate(z);
  d.drhs.assign(N_, MatrixXd(ns_total_, ns_total_ + m_));
  d.dg.assign(N_, MatrixXd(k_, ns_total_ + m_));
  d.dell.assign(N_, VectorXd(ns_total_ + m_));
  d.dsres.assign(N_, MatrixXd(sens_residual_dim(), ns_total_ + m_));
  d.drhs_tf.assign(N_, VectorXd(ns_total_));
  d.dg_tf.assign(N_, VectorXd(k_));
  d.dsres_tf.assign(N_, VectorXd(sens_residual_dim()));
  d.dell_tf.resize(N_);

  if (mode == ExecMode::OpenMp)
    fill_node_blocks_omp(z, d);
  else
    fill_node_blocks_serial(z, d);

  // Terminal residual and terminal cost partials.
  const double tf = z[tf_index()];
  VectorXd xf = z.segment(state_index(N_ - 1), n_);
  d.dpsi_x.resize(q_, n_);
  d.dpsi_tf.resize(q_);
  d.dphi_x.resize(n_);
  for (int j = 0; j < n_; ++j) {
    const double v = xf[j];
    const double h = options_.fd_step * std::max(1.0, std::abs(v));
    xf[j] = v + h;
    const VectorXd rp = q_ > 0 ? problem_.terminal_condition(xf, tf) : VectorXd(0);
    const double pp = problem_.terminal_cost ? problem_.terminal_cost(xf, tf) : 0.0;
    xf[j] = v - h;
    const VectorXd rm = q_ > 0 ? problem_.terminal_condition(xf, tf) : VectorXd(0);
    const double pm = problem_.terminal_cost ? problem_.terminal_cost(xf, tf) : 0.0;
    xf[j] = v;
    if (q_ > 0) d.dpsi_x.col(j) = (rp - rm) / (2.0 * h);
    d.dphi_x[j] = (pp - pm) / (2.0 * h);
  }
  {
    const double h = options_.fd_step * std::max(1.0, std::abs(tf));
    const VectorXd rp =
        q_ > 0 ? problem_.terminal_condition(xf, tf + h) : VectorXd(0);
    const VectorXd rm =
        q_ > 0 ? problem_.terminal_condition(xf, tf - h) : VectorXd(0);
    if (q_ > 0) d.dpsi_tf = (rp - rm) / (2.0 * h);
    const double pp =
        problem_.terminal_cost ? problem_.terminal_cost(xf, tf + h) : 0.0;
    const double pm =
        problem_.terminal_cost ? problem_.terminal_cost(xf, tf - h) : 0.0;
    d.dphi_tf = (pp - pm) / (2.0 * h);
  }
  return d;
}

VectorXd CollocationNlp::objective_gradient(const Derivatives& d) const {
  const double t0 = problem_.initial_time;
  const double T = d.eval.tf - t0;
  const double htau = 1.0 / (N_ - 1);
  VectorXd grad = VectorXd::Zero(dim_);
  double& gtf = grad[tf_index()];
  for (int i = 0; i < N_; ++i) {
    const double c = (i == 0 || i == N_ - 1) ? 0.5 : 1.0;
    const double w = c * htau * T;
    grad.segment(state_index(i), ns_total_) += w * d.dell[i].head(ns_total_);
    grad.segment(control_index(i), m_) += w * d.dell[i].tail(m_);
    gtf += c * htau * (d.eval.nodes[i].running + d.eval.nodes[i].sens);
    gtf += w * d.dell_tf[i];
  }
  grad.segment(state_index(N_ - 1), n_) += d.dphi_x;
  gtf += d.dphi_tf;

  const double eps = 2.0 * options_.control_smoothing;
  for (int i = 0; i < N_ - 1; ++i) {
    const VectorXd du =
        (d.eval.controls.row(i + 1) - d.eval.controls.row(i)).transpose();
    grad.segment(control_index(i), m_) -= eps * du;
    grad.segment(control_index(i + 1), m_) += eps * du;
  }
  return grad;
}

void CollocationNlp::add_jacobian_transpose_product(const Derivatives& d,
                                                    const VectorXd& yeq,
                                                    const VectorXd& yineq,
                                                    VectorXd& out) const {
  const double t0 = problem_.initial_time;
  const double T = d.eval.tf - t0;
  const double htau = 1.0 / (N_ - 1);
  const double s = 0.5 * htau * T;
  double& gtf = out[tf_index()];

  for (int i = 0; i < N_ - 1; ++i) {
    const auto y = yeq.segment(i * ns_total_, ns_total_);
    out.segment(state_index(i), ns_total_) -=
        y + s * (d.drhs[i].leftCols(ns_total_).transpose() * y);
    out.segment(control_index(i), m_) -=
        s * (d.drhs[i].rightCols(m_).transpose() * y);
    out.segment(state_index(i + 1), ns_total_) +=
        y - s * (d.drhs[i + 1].leftCols(ns_total_).transpose() * y);
    out.segment(control_index(i + 1), m_) -=
        s * (d.drhs[i + 1].rightCols(m_).transpose() * y);
    gtf += y.dot(-0.5 * htau * (d.eval.nodes[i].rhs + d.eval.nodes[i + 1].rhs) -
                 s * (d.drhs_tf[i] + d.drhs_tf[i + 1]));
  }
  if (q_ > 0) {
    const auto y = yeq.tail(q_);
    out.segment(state_index(N_ - 1), n_) += d.dpsi_x.transpose() * y;
    gtf += d.dpsi_tf.dot(y);
  }
  if (k_ > 0) {
    for (int i = 0; i < N_; ++i) {
      const auto y = yineq.segment(i * k_, k_);
      out.segment(state_index(i), ns_total_) +=
          d.dg[i].leftCols(ns_total_).transpose() * y;
      out.segment(control_index(i), m_) += d.dg[i].rightCols(m_).transpose() * y;
      gtf += d.dg_tf[i].dot(y);
    }
  }
}

void CollocationNlp::add_gauss_newton_hessian(
    const Derivatives& d, const std::vector<std::uint8_t>& active_ineq,
    double rho, MatrixXd& H) const {
  const double t0 = problem_.initial_time;
  const double T = d.eval.tf - t0;
  const double htau = 1.0 / (N_ - 1);
  const double s = 0.5 * htau * T;

  const auto accumulate = [&](const MatrixXd& L, const std::vector<int>& cols) {
    const MatrixXd G = rho * (L.transpose() * L);
    for (size_t a = 0; a < cols.size(); ++a)
      for (size_t b = 0; b < cols.size(); ++b)
        H(cols[a], cols[b]) += G(a, b);
  };

  // Defect blocks: columns over both interval nodes plus tf.
  const int nc = 2 * (ns_total_ + m_) + 1;
  MatrixXd L(ns_total_, nc);
  std::vector<int> cols(nc);
  const MatrixXd I = MatrixXd::Identity(ns_total_, ns_total_);
  for (int i = 0; i < N_ - 1; ++i) {
    int c = 0;
    for (int j = 0; j < ns_total_; ++j) cols[c++] = state_index(i) + j;
    for (int j = 0; j < m_; ++j) cols[c++] = control_index(i) + j;
    for (int j = 0; j < ns_total_; ++j) cols[c++] = state_index(i + 1) + j;
    for (int j = 0; j < m_; ++j) cols[c++] = control_index(i + 1) + j;
    cols[c] = tf_index();
    L.block(0, 0, ns_total_, ns_total_) = -I - s * d.drhs[i].leftCols(ns_total_);
    L.block(0, ns_total_, ns_total_, m_) = -s * d.drhs[i].rightCols(m_);
    L.block(0, ns_total_ + m_, ns_total_, ns_total_) =
        I - s * d.drhs[i + 1].leftCols(ns_total_);
    L.block(0, 2 * ns_total_ + m_, ns_total_, m_) =
        -s * d.drhs[i + 1].rightCols(m_);
    L.col(nc - 1) = -0.5 * htau * (d.eval.nodes[i].rhs + d.eval.nodes[i + 1].rhs) -
                    s * (d.drhs_tf[i] + d.drhs_tf[i + 1]);
    accumulate(L, cols);
  }

  if (q_ > 0) {
    MatrixXd Lp(q_, n_ + 1);
    Lp.leftCols(n_) = d.dpsi_x;
    Lp.col(n_) = d.dpsi_tf;
    std::vector<int> pcols(n_ + 1);
    for (int j = 0; j < n_; ++j) pcols[j] = state_index(N_ - 1) + j;
    pcols[n_] = tf_index();
    accumulate(Lp, pcols);
  }

  // Gauss-Newton curvature of the sensitivity penalty: the integrand is a
  // weighted square of the residual, so its model is J_R' J_R with the
  // quadrature weight folded into the residual.
  if (sens_residual_dim() > 0 && options_.cost_mode != CostMode::Nominal) {
    const int rdim = sens_residual_dim();
    MatrixXd JR(rdim, ns_total_ + m_ + 1);
    std::vector<int> rcols(ns_total_ + m_ + 1);
    for (int i = 0; i < N_; ++i) {
      const double ci = (i == 0 || i == N_ - 1) ? 0.5 : 1.0;
      const double w = ci * htau * T;
      if (w <= 0.0) continue;
      const double sw = std::sqrt(w);
      JR.leftCols(ns_total_ + m_) = sw * d.dsres[i];
      JR.col(ns_total_ + m_) =
          sw * d.dsres_tf[i] + (ci * htau / (2.0 * sw)) * d.eval.nodes[i].sres;
      int c = 0;
      for (int j = 0; j < ns_total_; ++j) rcols[c++] = state_index(i) + j;
      for (int j = 0; j < m_; ++j) rcols[c++] = control_index(i) + j;
      rcols[c] = tf_index();
      const MatrixXd G = 2.0 * (JR.transpose() * JR);
      for (size_t a = 0; a < rcols.size(); ++a)
        for (size_t b = 0; b < rcols.size(); ++b)
          H(rcols[a], rcols[b]) += G(a, b);
    }
  }

  // Exact curvature of the control-smoothing regularizer.
  const double eps = 2.0 * options_.control_smoothing;
  for (int i = 0; i < N_ - 1; ++i) {
    for (int j = 0; j < m_; ++j) {
      const int a = control_index(i) + j;
      const int b = control_index(i + 1) + j;
      H(a, a) += eps;
      H(b, b) += eps;
      H(a, b) -= eps;
      H(b, a) -= eps;
    }
  }

  if (k_ > 0) {
    std::vector<int> gcols(ns_total_ + m_ + 1);
    for (int i = 0; i < N_; ++i) {
      int rows = 0;
      for (int r = 0; r < k_; ++r)
        if (active_ineq[i * k_ + r]) ++rows;
      if (rows == 0) continue;
      MatrixXd Lg(rows, ns_total_ + m_ + 1);
      int rr = 0;
      for (int r = 0; r < k_; ++r) {
        if (!active_ineq[i * k_ + r]) continue;
        Lg.block(rr, 0, 1, ns_total_ + m_) = d.dg[i].row(r);
        Lg(rr, ns_total_ + m_) = d.dg_tf[i][r];
        ++rr;
      }
      int c = 0;
      for (int j = 0; j < ns_total_; ++j) gcols[c++] = state_index(i) + j;
      for (int j = 0; j < m_; ++j) gcols[c++] = control_index(i) + j;
      gcols[c] = tf_index();
      accumulate(Lg, gcols);
    }
  }
}

MatrixXd CollocationNlp::dense_eq_jacobian(const Derivatives& d) const {
  const double t0 = problem_.initial_time;
  const double T = d.eval.tf - t0;
  const double htau = 1.0 / (N_ - 1);
  const double s = 0.5 * htau * T;
  MatrixXd J = MatrixXd::Zero(num_eq_, dim_);
  const MatrixXd I = MatrixXd::Identity(ns_total_, ns_total_);
  for (int i = 0; i < N_ - 1; ++i) {
    const int r = i * ns_total_;
    J.block(r, state_index(i), ns_total_, ns_total_) =
        -I - s * d.drhs[i].leftCols(ns_total_);
    J.block(r, control_index(i), ns_total_, m_) = -s * d.drhs[i].rightCols(m_);
    J.block(r, state_index(i + 1), ns_total_, ns_total_) =
        I - s * d.drhs[i + 1].leftCols(ns_total_);
    J.block(r, control_index(i + 1), ns_total_, m_) =
        -s * d.drhs[i + 1].rightCols(m_);
    J.block(r, tf_index(), ns_total_, 1) =
        -0.5 * htau * (d.eval.nodes[i].rhs + d.eval.nodes[i + 1].rhs) -
        s * (d.drhs_tf[i] + d.drhs_tf[i + 1]);
  }
  if (q_ > 0) {
    const int r = (N_ - 1) * ns_total_;
    J.block(r, state_index(N_ - 1), q_, n_) = d.dpsi_x;
    J.block(r, tf_index(), q_, 1) = d.dpsi_tf;
  }
  return J;
}

MatrixXd CollocationNlp::dense_ineq_jacobian(const Derivatives& d) const {
  MatrixXd J = MatrixXd::Zero(num_ineq_, dim_);
  for (int i = 0; i < N_ && k_ > 0; ++i) {
    const int r = i * k_;
    J.block(r, state_index(i), k_, ns_total_) = d.dg[i].leftCols(ns_total_);
    J.block(r, control_index(i), k_, m_) = d.dg[i].rightCols(m_);
    J.block(r, tf_index(), k_, 1) = d.dg_tf[i];
  }
  return J;
}

VectorXd CollocationNlp::initial_point(const Trajectory& guess) const {
  require(guess.num_nodes() >= 2, "initial guess needs at least two nodes");
  require(guess.states.cols() == n_ && guess.controls.cols() == m_,
          "initial guess dimensions inconsistent with problem");
  VectorXd z(dim_);

  double tf = guess.final_time > problem_.initial_time
                  ? guess.final_time
                  : 0.5 * (problem_.final_time_bounds.first +
                           problem_.final_time_bounds.second);
  tf = std::min(std::max(tf, problem_.final_time_bounds.first),
                problem_.final_time_bounds.second);
  z[tf_index()] = tf;

  // Piecewise-linear resampling in normalized time.
  const int Ng = guess.num_nodes();
  const double g0 = guess.times[0];
  const double gspan = std::max(guess.times[Ng - 1] - g0, 1e-12);
  const bool use_sens = ns_ > 0 && guess.has_sensitivities();
  for (int i = 0; i < N_; ++i) {
    const double tau = tau_[i];
    double pos = tau;  // normalized
    int hi = 1;
    while (hi < Ng - 1 && (guess.times[hi] - g0) / gspan < pos) ++hi;
    const double a = (guess.times[hi - 1] - g0) / gspan;
    const double b = (guess.times[hi] - g0) / gspan;
    const double w = std::min(1.0, std::max(0.0, (pos - a) / std::max(b - a, 1e-12)));
    z.segment(state_index(i), n_) =
        ((1.0 - w) * guess.states.row(hi - 1) + w * guess.states.row(hi))
            .transpose();
    z.segment(control_index(i), m_) =
        ((1.0 - w) * guess.controls.row(hi - 1) + w * guess.controls.row(hi))
            .transpose();
    if (ns_ > 0) {
      VectorXd entries = VectorXd::Zero(ns_);
      if (use_sens) {
        const MatrixXd S = (1.0 - w) * guess.sensitivities[hi - 1] +
                           w * guess.sensitivities[hi];
        for (int e = 0; e < ns_; ++e)
          entries[e] = S(mask_[e].first, mask_[e].second);
      }
      z.segment(state_index(i) + n_, ns_) = entries;
    }
  }
  // Clamp into bounds (also pins node 0).
  z = z.cwiseMax(lower_).cwiseMin(upper_);
  return z;
}

Trajectory CollocationNlp::decode(const VectorXd& z) const {
  Trajectory traj;
  const double t0 = problem_.initial_time;
  const double tf = z[tf_index()];
  traj.final_time = tf;
  traj.times = VectorXd(N_);
  traj.states.resize(N_, n_);
  traj.controls.resize(N_, m_);
  traj.constraint_values.resize(N_, k_);
  if (ns_ > 0) traj.sensitivities.assign(N_, MatrixXd::Zero(n_, l_));
  for (int i = 0; i < N_; ++i) {
    const double t = t0 + tau_[i] * (tf - t0);
    traj.times[i] = t;
    traj.states.row(i) = z.segment(state_index(i), n_).transpose();
    traj.controls.row(i) = z.segment(control_index(i), m_).transpose();
    if (ns_ > 0)
      traj.sensitivities[i] = expand_sens(z.segment(state_index(i) + n_, ns_));
    if (k_ > 0)
      traj.constraint_values.row(i) =
          problem_
              .path_constraints(traj.states.row(i).transpose(),
                                problem_.nominal_param, t)
              .transpose();
  }
  return traj;
}

}  // namespace rcsopt
