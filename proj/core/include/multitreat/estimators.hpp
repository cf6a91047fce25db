#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "multitreat/dataset.hpp"
#include "multitreat/design.hpp"

namespace multitreat {

enum class EstimatorKind { Uninteracted, ATEInteracted, OneAtATime, CommonWeights };

const char* estimator_kind_name(EstimatorKind kind);

struct WeightsSummary {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

// One estimator's coefficients with robust standard errors and, where the
// estimator admits them, plug-in standard errors treating the propensity
// scores as known (and, for the common-weights estimator, the variant that
// charges for estimating them).
struct EstimateSet {
  EstimatorKind kind = EstimatorKind::Uninteracted;
  Eigen::VectorXd beta;
  Eigen::VectorXd se_robust;
  std::optional<Eigen::VectorXd> se_known_pscore;
  std::optional<Eigen::VectorXd> se_estimated_pscore;
  long n_used = 0;
  std::optional<WeightsSummary> weights_summary;
  std::vector<std::string> warnings;
};

// Fitted arm-assignment probabilities from the linear projection of each
// treatment indicator on the controls; the control arm is the complement.
// Rows sum to one by construction, but individual entries may fall outside
// [0, 1] when controls are not saturated.
struct PropensityFit {
  Eigen::MatrixXd p_hat;  // N x (K+1), column 0 = control arm
  long out_of_range = 0;
};

// Plain regression of the outcome on treatments and controls.
EstimateSet uninteracted(const Dataset& data, const DesignSpec& spec);

// Unweighted average effects from the regression with demeaned
// treatment-by-control interactions.
EstimateSet ate_interacted(const Dataset& data, const DesignSpec& spec);

// Per-arm regressions restricted to that arm plus the control group.
EstimateSet one_at_a_time(const Dataset& data, const DesignSpec& spec);

PropensityFit estimate_propensity(const Dataset& data, const DesignSpec& spec);

// Weighted regression of the outcome on the treatments alone, weighting each
// observation by lambda_c(W) / p_hat_D(W) with lambda_c(W) = 1 / sum_k 1/p_hat_k(W).
// Rows with a nonpositive fitted propensity are excluded and counted.
EstimateSet common_weights(const Dataset& data, const DesignSpec& spec);

// Independent arithmetic route for the same estimator: explicit weighted
// arm means, never touching the weighted-least-squares solver.
Eigen::VectorXd common_weights_by_means(const Dataset& data, const DesignSpec& spec);

// Plug-in standard errors from the known-propensity variance bound, using
// within-cell outcome moments. Supported kinds: ATEInteracted, OneAtATime,
// CommonWeights.
Eigen::VectorXd known_pscore_se(const Dataset& data, const Eigen::MatrixXd& p_hat,
                                EstimatorKind kind);
Eigen::VectorXd known_pscore_se(const Dataset& data, const DesignSpec& spec, EstimatorKind kind);

// Common-weights standard errors including the propensity-estimation penalty
// term; `beta` is the common-weights point estimate.
Eigen::VectorXd estimated_pscore_se(const Dataset& data, const Eigen::MatrixXd& p_hat,
                                    const Eigen::VectorXd& beta);

}  // namespace multitreat
