#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "multitreat/dataset.hpp"
#include "multitreat/design.hpp"

namespace multitreat {

// Conditional treatment-vs-control effect estimates by stratum, from the
// fully interacted regression. With strata dummies these reduce to
// within-stratum differences in arm means. Strata with an empty
// stratum-by-arm cell are excluded and reported; their tau rows are NaN.
struct ConditionalAtes {
  StrataIndex strata;
  Eigen::MatrixXd tau;     // S x K
  Eigen::MatrixXd tau_se;  // S x K, robust
  std::vector<int> excluded_strata;
  std::vector<std::string> warnings;

  bool included(long stratum) const;
};

ConditionalAtes conditional_ates(const Dataset& data, const DesignSpec& spec);

// Per-observation weight matrices (X_dot' X_dot)^-1 X_dot_i X_i' where X_dot
// is the treatment block residualized on the controls. They sum to the K x K
// identity across observations.
std::vector<Eigen::MatrixXd> lambda_matrices(const Eigen::MatrixXd& treatment_indicators,
                                             const DesignMatrix& controls);

// Exact split of each treatment coefficient from the uninteracted regression
// into an own-effect average and a cross-effect (contamination) term.
struct WeightDecomposition {
  int num_treatments = 0;
  StrataIndex strata;
  std::vector<Eigen::MatrixXd> lambda_per_obs;      // N of K x K, sums to identity
  std::vector<Eigen::MatrixXd> lambda_per_stratum;  // S of K x K, population scale
  Eigen::VectorXd beta_hat;        // uninteracted coefficients
  Eigen::VectorXd beta_se_robust;  // HC1 from the uninteracted fit
  Eigen::VectorXd own_component;
  Eigen::VectorXd contamination_component;
  Eigen::MatrixXd tau;     // S x K (NaN rows for excluded strata)
  Eigen::MatrixXd tau_se;  // S x K
  std::vector<int> excluded_strata;
  std::vector<std::string> warnings;

  bool included(long stratum) const;
};

WeightDecomposition decompose_beta(const Dataset& data, const DesignSpec& spec);

// Nonparametric i.i.d. bootstrap over rows, re-running the full
// decomposition. Replicates that produce an empty stratum-by-arm cell are
// redrawn; the total number of redraws is capped at 10x the replicate count.
// With `fixed_design` set, (W, D) stay fixed and outcomes are resampled
// within each stratum-by-arm cell instead, so cell shares never move.
struct BootstrapOptions {
  int replicates = 500;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool fixed_design = false;
};

struct DecompositionSe {
  Eigen::VectorXd beta_se;
  Eigen::VectorXd own_se;
  Eigen::VectorXd contamination_se;
  long redraws = 0;
};

DecompositionSe decomposition_se(const Dataset& data, const DesignSpec& spec,
                                 const BootstrapOptions& options);

// Mass-weighted Pearson correlation across strata between the (k, l) stratum
// weight and the arm-l conditional effect. Undefined (degenerate) series give
// an empty optional.
struct WeightEffectCorrelation {
  std::vector<std::vector<std::optional<double>>> corr;  // [k][l], zero-based
};

WeightEffectCorrelation weight_effect_correlation(const WeightDecomposition& decomp);

// One row per included stratum for external plotting.
struct ScatterRow {
  std::string stratum;
  long count = 0;
  Eigen::MatrixXd lambda;  // K x K
  Eigen::VectorXd tau;
  Eigen::VectorXd tau_se;
};

std::vector<ScatterRow> scatter_table(const WeightDecomposition& decomp);

// Extreme contamination attainable by permuting the arm-l conditional
// effects across strata within the observed cross-treatment weights. Each
// contaminating arm is permuted independently; the bounds sum over arms.
struct WorstCaseBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  // Stratum permutation (positions into included strata) attaining each
  // bound, per target arm k and contaminating arm l != k.
  std::vector<std::vector<std::vector<int>>> lower_order;
  std::vector<std::vector<std::vector<int>>> upper_order;
};

WorstCaseBounds worst_case_bounds(const WeightDecomposition& decomp);

// Noise-adjusted dispersion of conditional effects: the mass-weighted
// variance of tau_k(w) minus the mass-weighted mean squared standard error,
// clamped at zero (clamping flagged).
struct HeterogeneitySd {
  Eigen::VectorXd sd;
  std::vector<bool> clamped;
};

HeterogeneitySd heterogeneity_sd(const WeightDecomposition& decomp);

}  // namespace multitreat
