#include "multitreat/regress.hpp"

#include <sstream>

#include "multitreat/errors.hpp"

namespace multitreat {

namespace {

void check_design(const DesignMatrix& X) {
  if (X.rows() < X.cols()) {
    fail(ErrorCode::RankDeficient, "design has more columns (" + std::to_string(X.cols()) +
                                       ") than rows (" + std::to_string(X.rows()) + ")");
  }
  if (!X.values.allFinite()) {
    fail(ErrorCode::NonFinite, "design matrix contains NaN or Inf");
  }
  if (static_cast<Eigen::Index>(X.column_labels.size()) != X.cols()) {
    fail(ErrorCode::InvalidSpec, "design has " + std::to_string(X.cols()) + " columns but " +
                                     std::to_string(X.column_labels.size()) + " labels");
  }
}

std::string dependent_column_names(const DesignMatrix& X,
                                   const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr) {
  const auto& perm = qr.colsPermutation().indices();
  std::ostringstream names;
  for (Eigen::Index j = qr.rank(); j < X.cols(); ++j) {
    if (names.tellp() > 0) names << ", ";
    names << X.column_labels[static_cast<std::size_t>(perm[j])];
  }
  return names.str();
}

// Shared solve path. `scale` holds sqrt(w) for weighted fits, empty for OLS.
RegressionFit solve_least_squares(const Eigen::VectorXd& y, const DesignMatrix& X,
                                  const Eigen::VectorXd& scale) {
  const bool weighted = scale.size() > 0;
  Eigen::MatrixXd Xs = weighted ? (scale.asDiagonal() * X.values).eval() : X.values;
  Eigen::VectorXd ys = weighted ? (scale.asDiagonal() * y).eval() : y;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < X.cols()) {
    fail(ErrorCode::RankDeficient,
         "design is rank deficient; dependent columns: " + dependent_column_names(X, qr));
  }

  RegressionFit fit;
  fit.coefficients = qr.solve(ys);
  fit.fitted = X.values * fit.coefficients;
  fit.residuals = y - fit.fitted;
  fit.design = X.values;

  // (Xs' Xs)^-1 = P R^-1 R^-T P' from the factorization Xs P = Q R.
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd rinv = qr.matrixR()
                             .topLeftCorner(p, p)
                             .triangularView<Eigen::Upper>()
                             .solve(Eigen::MatrixXd::Identity(p, p));
  fit.gram_inverse = qr.colsPermutation() * (rinv * rinv.transpose()) *
                     qr.colsPermutation().transpose();
  return fit;
}

}  // namespace

RegressionFit ols_fit(const Eigen::VectorXd& y, const DesignMatrix& X) {
  check_design(X);
  if (!y.allFinite()) fail(ErrorCode::NonFinite, "outcome vector contains NaN or Inf");
  if (y.size() != X.rows()) {
    fail(ErrorCode::InvalidSpec, "outcome length " + std::to_string(y.size()) +
                                     " does not match design rows " + std::to_string(X.rows()));
  }
  return solve_least_squares(y, X, Eigen::VectorXd());
}

RegressionFit wls_fit(const Eigen::VectorXd& y, const DesignMatrix& X,
                      const Eigen::VectorXd& weights) {
  check_design(X);
  if (!y.allFinite()) fail(ErrorCode::NonFinite, "outcome vector contains NaN or Inf");
  if (weights.size() != X.rows()) {
    fail(ErrorCode::InvalidSpec, "weight length " + std::to_string(weights.size()) +
                                     " does not match design rows " + std::to_string(X.rows()));
  }
  if (!weights.allFinite() || (weights.array() <= 0.0).any()) {
    fail(ErrorCode::NonPositiveWeight, "observation weights must be strictly positive");
  }
  RegressionFit fit = solve_least_squares(y, X, weights.cwiseSqrt());
  fit.weights = weights;
  return fit;
}

Eigen::MatrixXd residualize(const Eigen::MatrixXd& targets, const DesignMatrix& controls) {
  check_design(controls);
  if (!targets.allFinite()) fail(ErrorCode::NonFinite, "targets contain NaN or Inf");
  if (targets.rows() != controls.rows()) {
    fail(ErrorCode::InvalidSpec, "target rows do not match control rows");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(controls.values);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < controls.cols()) {
    fail(ErrorCode::RankDeficient,
         "control block is rank deficient; dependent columns: " + dependent_column_names(controls, qr));
  }
  return targets - controls.values * qr.solve(targets);
}

Eigen::MatrixXd hc_variance(const RegressionFit& fit, HcFlavor flavor) {
  const Eigen::Index n = fit.design.rows();
  const Eigen::Index p = fit.design.cols();
  Eigen::VectorXd scaled = fit.residuals;
  if (fit.weights) scaled.array() *= fit.weights->array();
  // meat = X' diag(w*e)^2 X; with unit weights this is the usual HC0 filling.
  Eigen::MatrixXd half = scaled.asDiagonal() * fit.design;
  Eigen::MatrixXd meat = half.transpose() * half;
  Eigen::MatrixXd cov = fit.gram_inverse * meat * fit.gram_inverse;
  if (flavor == HcFlavor::HC1 && n > p) {
    cov *= static_cast<double>(n) / static_cast<double>(n - p);
  }
  return ((cov + cov.transpose()) / 2.0).eval();
}

}  // namespace multitreat
