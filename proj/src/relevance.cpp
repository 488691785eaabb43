#include "rcsopt/relevance.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace rcsopt {

using detail::require;

const char* to_string(RelevanceKind kind) {
  switch (kind) {
    case RelevanceKind::LogisticDerivative: return "logistic-derivative";
    case RelevanceKind::Gaussian: return "gaussian";
    case RelevanceKind::Hat: return "hat";
    case RelevanceKind::Rational: return "rational";
    case RelevanceKind::RationalAbs: return "rational-abs";
  }
  return "?";
}

RelevanceKind relevance_kind_from_string(const std::string& name) {
  if (name == "logistic-derivative") return RelevanceKind::LogisticDerivative;
  if (name == "gaussian") return RelevanceKind::Gaussian;
  if (name == "hat") return RelevanceKind::Hat;
  if (name == "rational") return RelevanceKind::Rational;
  if (name == "rational-abs") return RelevanceKind::RationalAbs;
  throw std::invalid_argument("unknown relevance kind: " + name);
}

double relevance(const RelevanceSpec& spec, double z) {
  require(spec.scale > 0.0, "relevance scale must be positive");
  const double zs = std::min(z, 0.0) / spec.scale;
  switch (spec.kind) {
    case RelevanceKind::LogisticDerivative: {
      // zs <= 0, so exp(zs) <= 1; s(zs)(1-s(zs)) = e^zs / (1+e^zs)^2.
      const double e = std::exp(zs);
      const double d = 1.0 + e;
      return e / (d * d);
    }
    case RelevanceKind::Gaussian:
      return std::exp(-zs * zs);
    case RelevanceKind::Hat:
      return std::max(0.0, 1.0 + zs);
    case RelevanceKind::Rational:
      return 1.0 / (1.0 + zs * zs);
    case RelevanceKind::RationalAbs: {
      const double d = 1.0 - zs;  // 1 + |zs|
      return 1.0 / (d * d);
    }
  }
  return 0.0;
}

MatrixXd rcs_matrix(const VectorXd& g_values, const MatrixXd& S_g,
                    const RelevanceSpec& spec) {
  require(g_values.size() == S_g.rows(),
          "rcs_matrix: g/S_g row count mismatch");
  MatrixXd out(S_g.rows(), S_g.cols());
  for (int i = 0; i < S_g.rows(); ++i)
    out.row(i) = relevance(spec, g_values[i]) * S_g.row(i);
  return out;
}

RcsWeights::RcsWeights(double alpha) : alpha_(alpha) {
  require(alpha >= 0.0, "RcsWeights: alpha must be nonnegative");
}

RcsWeights::RcsWeights(MatrixXd Q) : alpha_(0.0) {
  require(Q.rows() == Q.cols(), "RcsWeights: Q must be square");
  const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  require((Q - Q.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
          "RcsWeights: Q must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Q, Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() >= -1e-9 * scale,
          "RcsWeights: Q must be positive semidefinite");
  Q_ = std::move(Q);
}

bool RcsWeights::is_zero() const {
  if (is_scalar()) return alpha_ == 0.0;
  return Q_->cwiseAbs().maxCoeff() == 0.0;
}

double rcs_running_cost(const MatrixXd& S_r, const RcsWeights& weights) {
  if (weights.is_scalar()) return weights.alpha() * S_r.squaredNorm();
  const auto& Q = weights.matrix();
  require(Q.rows() == S_r.size(),
          "rcs_running_cost: Q dimension must equal vec(S) length");
  const Eigen::Map<const VectorXd> v(S_r.data(), S_r.size());
  return v.dot(Q * v);
}

}  // namespace rcsopt
