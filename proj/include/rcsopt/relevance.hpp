#pragma once

#include "rcsopt/ocp.hpp"

namespace rcsopt {

/// Candidate shapes for the relevance weight rho. Each is continuous,
/// nonnegative, nondecreasing on (-inf, 0] and constant at its z=0 value for
/// z > 0 (the constraint is already violated there, so the weight plateaus).
enum class RelevanceKind {
  LogisticDerivative,  // s(z)(1-s(z)), s the logistic function
  Gaussian,            // exp(-z^2)
  Hat,                 // max(0, 1-|z|); continuous, not differentiable
  Rational,            // 1/(1+z^2)
  RationalAbs,         // 1/(1+|z|)^2
};

struct RelevanceSpec {
  RelevanceKind kind = RelevanceKind::LogisticDerivative;
  double scale = 1.0;  // argument pre-scaling, z -> z/scale; must be > 0
};

const char* to_string(RelevanceKind kind);
RelevanceKind relevance_kind_from_string(const std::string& name);

/// rho(z) per the spec'd shape: rho_tilde(min(z,0)/scale).
double relevance(const RelevanceSpec& spec, double z);

/// S_r = diag(rho(g_1), ..., rho(g_k)) * S_g.
MatrixXd rcs_matrix(const VectorXd& g_values, const MatrixXd& S_g,
                    const RelevanceSpec& spec);

/// Weight for the quadratic sensitivity penalty: either the scalar-diagonal
/// form Q = alpha*I or a full symmetric PSD matrix over vec(S).
class RcsWeights {
 public:
  RcsWeights() : alpha_(0.0) {}
  explicit RcsWeights(double alpha);
  explicit RcsWeights(MatrixXd Q);  // validates symmetry and PSD

  bool is_scalar() const { return !Q_.has_value(); }
  double alpha() const { return alpha_; }
  const MatrixXd& matrix() const { return *Q_; }
  bool is_zero() const;

 private:
  double alpha_;
  std::optional<MatrixXd> Q_;
};

/// vec(S)' Q vec(S); column-major vectorization. Scalar form gives
/// alpha * squared Frobenius norm.
double rcs_running_cost(const MatrixXd& S_r, const RcsWeights& weights);

}  // namespace rcsopt
