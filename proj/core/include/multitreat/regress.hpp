#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace multitreat {

// Regressor block with labelled columns. N >= P, finite entries, unique labels.
struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> column_labels;
  bool has_intercept = false;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

// Result of a (weighted) least-squares fit. `gram_inverse` is (X' diag(w) X)^-1,
// materialized for sandwich variance formulas only; the solve itself goes
// through a column-pivoted QR factorization. Residuals are always on the
// original scale: residuals = y - fitted.
struct RegressionFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd gram_inverse;
  Eigen::VectorXd fitted;
  std::optional<Eigen::VectorXd> weights;
  Eigen::MatrixXd design;  // copy of the regressor values, kept for variance formulas
};

enum class HcFlavor { HC0, HC1 };

// Relative pivot threshold below which a design is treated as rank deficient.
inline constexpr double kRankTolerance = 1e-10;

RegressionFit ols_fit(const Eigen::VectorXd& y, const DesignMatrix& X);

RegressionFit wls_fit(const Eigen::VectorXd& y, const DesignMatrix& X,
                      const Eigen::VectorXd& weights);

// Residuals from projecting each column of `targets` on the control block.
Eigen::MatrixXd residualize(const Eigen::MatrixXd& targets, const DesignMatrix& controls);

// Heteroskedasticity-robust sandwich covariance of the fitted coefficients.
// HC1 applies the N/(N-P) degrees-of-freedom scaling; HC1 is the default
// reporting flavor throughout the library.
Eigen::MatrixXd hc_variance(const RegressionFit& fit, HcFlavor flavor = HcFlavor::HC1);

}  // namespace multitreat
