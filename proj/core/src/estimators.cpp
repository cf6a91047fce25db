#include "multitreat/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "multitreat/errors.hpp"
#include "multitreat/regress.hpp"

namespace multitreat {

const char* estimator_kind_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Uninteracted: return "uninteracted";
    case EstimatorKind::ATEInteracted: return "ate_interacted";
    case EstimatorKind::OneAtATime: return "one_at_a_time";
    case EstimatorKind::CommonWeights: return "common_weights";
  }
  return "unknown";
}

namespace {

// Within-cell outcome moments keyed by (stratum, arm). Cells with fewer than
// two observations fall back to the arm's pooled within-cell variance.
struct CellMoments {
  StrataIndex strata;
  Eigen::MatrixXd mean;      // S x (K+1)
  Eigen::MatrixXd variance;  // S x (K+1), fallback-filled
  Eigen::MatrixXd count;     // S x (K+1)
};

CellMoments cell_moments(const Dataset& data) {
  CellMoments m;
  m.strata = index_strata(data);
  const long s_count = m.strata.num_strata();
  const int arms = data.num_treatments() + 1;
  m.mean = Eigen::MatrixXd::Zero(s_count, arms);
  m.count = Eigen::MatrixXd::Zero(s_count, arms);
  Eigen::MatrixXd ss = Eigen::MatrixXd::Zero(s_count, arms);

  for (long i = 0; i < data.rows(); ++i) {
    const long s = m.strata.stratum_of_row[static_cast<std::size_t>(i)];
    const int a = data.treatment[static_cast<std::size_t>(i)];
    m.count(s, a) += 1.0;
    m.mean(s, a) += data.outcome[i];
  }
  for (long s = 0; s < s_count; ++s) {
    for (int a = 0; a < arms; ++a) {
      if (m.count(s, a) > 0.0) m.mean(s, a) /= m.count(s, a);
    }
  }
  for (long i = 0; i < data.rows(); ++i) {
    const long s = m.strata.stratum_of_row[static_cast<std::size_t>(i)];
    const int a = data.treatment[static_cast<std::size_t>(i)];
    const double dev = data.outcome[i] - m.mean(s, a);
    ss(s, a) += dev * dev;
  }

  m.variance = Eigen::MatrixXd::Zero(s_count, arms);
  for (int a = 0; a < arms; ++a) {
    double pooled_ss = 0.0;
    double pooled_dof = 0.0;
    for (long s = 0; s < s_count; ++s) {
      if (m.count(s, a) >= 2.0) {
        pooled_ss += ss(s, a);
        pooled_dof += m.count(s, a) - 1.0;
      }
    }
    const double pooled = pooled_dof > 0.0 ? pooled_ss / pooled_dof : 0.0;
    for (long s = 0; s < s_count; ++s) {
      m.variance(s, a) =
          m.count(s, a) >= 2.0 ? ss(s, a) / (m.count(s, a) - 1.0) : pooled;
    }
  }
  return m;
}

Eigen::VectorXd gather(const Eigen::VectorXd& values, const std::vector<long>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = values[rows[i]];
  return out;
}

void require_all_cells(const Dataset& data, const char* who) {
  StrataIndex strata = index_strata(data);
  Eigen::MatrixXd cells = cell_counts(data, strata);
  for (long s = 0; s < strata.num_strata(); ++s) {
    for (Eigen::Index a = 0; a < cells.cols(); ++a) {
      if (cells(s, a) == 0.0) {
        fail(ErrorCode::EmptyCell,
             std::string(who) + ": stratum '" + strata.labels[static_cast<std::size_t>(s)] +
                 "' has no observations in arm '" +
                 data.arm_names[static_cast<std::size_t>(a)] + "'");
      }
    }
  }
}

}  // namespace

EstimateSet uninteracted(const Dataset& data, const DesignSpec& spec) {
  data.validate();
  DesignSpec plain = spec;
  plain.interaction = InteractionStyle::none;
  plain.subsample.reset();
  BuiltDesign built = build_design(data, plain);
  RegressionFit fit = ols_fit(data.outcome, built.design);
  Eigen::MatrixXd cov = hc_variance(fit, HcFlavor::HC1);

  EstimateSet out;
  out.kind = EstimatorKind::Uninteracted;
  out.beta = fit.coefficients.segment(built.treatment_begin, built.treatment_count);
  out.se_robust = cov.diagonal()
                      .segment(built.treatment_begin, built.treatment_count)
                      .cwiseMax(0.0)
                      .cwiseSqrt();
  out.n_used = data.rows();
  return out;
}

EstimateSet ate_interacted(const Dataset& data, const DesignSpec& spec) {
  data.validate();
  if (spec.control_style == ControlStyle::strata_dummies) {
    require_all_cells(data, "ate_interacted");
  }
  DesignSpec demeaned = spec;
  demeaned.interaction = InteractionStyle::demeaned;
  demeaned.subsample.reset();
  BuiltDesign built = build_design(data, demeaned);
  RegressionFit fit = ols_fit(data.outcome, built.design);
  Eigen::MatrixXd cov = hc_variance(fit, HcFlavor::HC1);

  EstimateSet out;
  out.kind = EstimatorKind::ATEInteracted;
  out.beta = fit.coefficients.segment(built.treatment_begin, built.treatment_count);
  out.se_robust = cov.diagonal()
                      .segment(built.treatment_begin, built.treatment_count)
                      .cwiseMax(0.0)
                      .cwiseSqrt();
  out.n_used = data.rows();
  try {
    out.se_known_pscore = known_pscore_se(data, spec, EstimatorKind::ATEInteracted);
  } catch (const Error& e) {
    out.warnings.push_back(std::string("known-propensity SE unavailable: ") + e.what());
  }
  return out;
}

EstimateSet one_at_a_time(const Dataset& data, const DesignSpec& spec) {
  data.validate();
  const int k = data.num_treatments();
  EstimateSet out;
  out.kind = EstimatorKind::OneAtATime;
  out.beta.resize(k);
  out.se_robust.resize(k);
  out.n_used = data.rows();

  StrataIndex strata = index_strata(data);
  Eigen::MatrixXd cells = cell_counts(data, strata);
  for (int arm = 1; arm <= k; ++arm) {
    for (long s = 0; s < strata.num_strata(); ++s) {
      const bool has_control = cells(s, 0) > 0.0;
      const bool has_arm = cells(s, arm) > 0.0;
      if (has_control != has_arm) {
        out.warnings.push_back("arm '" + data.arm_names[static_cast<std::size_t>(arm)] +
                               "': stratum '" + strata.labels[static_cast<std::size_t>(s)] +
                               "' lacks a control/treated comparison and gets zero weight");
      }
    }
    DesignSpec sub = spec;
    sub.interaction = InteractionStyle::none;
    sub.subsample = std::vector<int>{0, arm};
    BuiltDesign built = build_design(data, sub);
    RegressionFit fit = ols_fit(gather(data.outcome, built.rows), built.design);
    Eigen::MatrixXd cov = hc_variance(fit, HcFlavor::HC1);
    out.beta[arm - 1] = fit.coefficients[built.treatment_begin];
    out.se_robust[arm - 1] =
        std::sqrt(std::max(0.0, cov(built.treatment_begin, built.treatment_begin)));
  }
  try {
    out.se_known_pscore = known_pscore_se(data, spec, EstimatorKind::OneAtATime);
  } catch (const Error& e) {
    out.warnings.push_back(std::string("known-propensity SE unavailable: ") + e.what());
  }
  return out;
}

PropensityFit estimate_propensity(const Dataset& data, const DesignSpec& spec) {
  data.validate();
  Eigen::MatrixXd treat = encode_treatments(data);
  DesignMatrix controls = control_design(data, spec);
  Eigen::MatrixXd fitted = treat - residualize(treat, controls);

  PropensityFit out;
  const long n = data.rows();
  const int k = data.num_treatments();
  out.p_hat.resize(n, k + 1);
  out.p_hat.col(0) = Eigen::VectorXd::Ones(n) - fitted.rowwise().sum();
  out.p_hat.rightCols(k) = fitted;
  out.out_of_range = (out.p_hat.array() <= 0.0).count() + (out.p_hat.array() >= 1.0).count();
  return out;
}

namespace {

struct CommonWeightRows {
  std::vector<long> rows;      // kept dataset rows
  Eigen::VectorXd weights;     // lambda_c / p_D per kept row
  long excluded = 0;
};

CommonWeightRows common_weight_rows(const Dataset& data, const PropensityFit& propensity) {
  CommonWeightRows out;
  const long n = data.rows();
  std::vector<double> weights;
  for (long i = 0; i < n; ++i) {
    if ((propensity.p_hat.row(i).array() <= 0.0).any()) {
      ++out.excluded;
      continue;
    }
    const double lambda_c = 1.0 / propensity.p_hat.row(i).cwiseInverse().sum();
    const int arm = data.treatment[static_cast<std::size_t>(i)];
    weights.push_back(lambda_c / propensity.p_hat(i, arm));
    out.rows.push_back(i);
  }
  if (out.rows.empty()) {
    fail(ErrorCode::NonPositivePropensity, "every row has a nonpositive fitted propensity");
  }
  out.weights = Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return out;
}

}  // namespace

EstimateSet common_weights(const Dataset& data, const DesignSpec& spec) {
  data.validate();
  const int k = data.num_treatments();
  PropensityFit propensity = estimate_propensity(data, spec);
  CommonWeightRows kept = common_weight_rows(data, propensity);

  EstimateSet out;
  out.kind = EstimatorKind::CommonWeights;
  out.n_used = static_cast<long>(kept.rows.size());
  if (kept.excluded > 0) {
    out.warnings.push_back(std::to_string(kept.excluded) +
                           " row(s) with nonpositive fitted propensity excluded; the estimand "
                           "now averages over the retained support only");
  }

  const long n = static_cast<long>(kept.rows.size());
  DesignMatrix X;
  X.values.resize(n, k + 1);
  X.values.col(0).setOnes();
  X.column_labels.push_back("(intercept)");
  for (int a = 1; a <= k; ++a) {
    X.column_labels.push_back(data.arm_names[static_cast<std::size_t>(a)]);
  }
  Eigen::VectorXd y(n);
  Eigen::VectorXd arm_count = Eigen::VectorXd::Zero(k + 1);
  for (long i = 0; i < n; ++i) {
    const long src = kept.rows[static_cast<std::size_t>(i)];
    y[i] = data.outcome[src];
    const int arm = data.treatment[static_cast<std::size_t>(src)];
    arm_count[arm] += 1.0;
    for (int a = 1; a <= k; ++a) X.values(i, a) = (arm == a) ? 1.0 : 0.0;
  }
  X.has_intercept = true;
  for (int a = 0; a <= k; ++a) {
    if (arm_count[a] == 0.0) {
      fail(ErrorCode::EmptyCell, "arm '" + data.arm_names[static_cast<std::size_t>(a)] +
                                     "' vanished after propensity-based exclusions");
    }
  }

  RegressionFit fit = wls_fit(y, X, kept.weights);
  Eigen::MatrixXd cov = hc_variance(fit, HcFlavor::HC1);
  out.beta = fit.coefficients.tail(k);
  out.se_robust = cov.diagonal().tail(k).cwiseMax(0.0).cwiseSqrt();
  out.weights_summary =
      WeightsSummary{kept.weights.minCoeff(), kept.weights.mean(), kept.weights.maxCoeff()};

  // Plug-in variance bounds over the retained rows.
  Dataset kept_data = data;
  if (kept.excluded > 0) {
    kept_data.outcome = y;
    kept_data.treatment.resize(static_cast<std::size_t>(n));
    kept_data.controls.resize(n, data.controls.cols());
    for (long i = 0; i < n; ++i) {
      const long src = kept.rows[static_cast<std::size_t>(i)];
      kept_data.treatment[static_cast<std::size_t>(i)] = data.treatment[static_cast<std::size_t>(src)];
      kept_data.controls.row(i) = data.controls.row(src);
    }
  }
  Eigen::MatrixXd p_kept(n, k + 1);
  for (long i = 0; i < n; ++i) p_kept.row(i) = propensity.p_hat.row(kept.rows[static_cast<std::size_t>(i)]);
  try {
    out.se_known_pscore = known_pscore_se(kept_data, p_kept, EstimatorKind::CommonWeights);
    out.se_estimated_pscore = estimated_pscore_se(kept_data, p_kept, out.beta);
  } catch (const Error& e) {
    out.warnings.push_back(std::string("known-propensity SE unavailable: ") + e.what());
  }
  return out;
}

Eigen::VectorXd common_weights_by_means(const Dataset& data, const DesignSpec& spec) {
  data.validate();
  const int k = data.num_treatments();
  PropensityFit propensity = estimate_propensity(data, spec);
  CommonWeightRows kept = common_weight_rows(data, propensity);

  Eigen::VectorXd weight_sum = Eigen::VectorXd::Zero(k + 1);
  Eigen::VectorXd weighted_outcome = Eigen::VectorXd::Zero(k + 1);
  for (long i = 0; i < static_cast<long>(kept.rows.size()); ++i) {
    const long src = kept.rows[static_cast<std::size_t>(i)];
    const int arm = data.treatment[static_cast<std::size_t>(src)];
    weight_sum[arm] += kept.weights[i];
    weighted_outcome[arm] += kept.weights[i] * data.outcome[src];
  }
  for (int a = 0; a <= k; ++a) {
    if (weight_sum[a] <= 0.0) {
      fail(ErrorCode::EmptyCell, "arm '" + data.arm_names[static_cast<std::size_t>(a)] +
                                     "' carries no weight after exclusions");
    }
  }
  Eigen::VectorXd beta(k);
  const double control_mean = weighted_outcome[0] / weight_sum[0];
  for (int a = 1; a <= k; ++a) beta[a - 1] = weighted_outcome[a] / weight_sum[a] - control_mean;
  return beta;
}

Eigen::VectorXd known_pscore_se(const Dataset& data, const Eigen::MatrixXd& p_hat,
                                EstimatorKind kind) {
  data.validate();
  const long n = data.rows();
  const int k = data.num_treatments();
  if (p_hat.rows() != n || p_hat.cols() != k + 1) {
    fail(ErrorCode::InvalidSpec, "propensity matrix must be N x (K+1)");
  }
  if (kind == EstimatorKind::Uninteracted) {
    fail(ErrorCode::InvalidSpec, "no known-propensity variance bound for the uninteracted fit");
  }
  CellMoments cells = cell_moments(data);

  Eigen::VectorXd se(k);
  for (int arm = 1; arm <= k; ++arm) {
    double mean_weight = 0.0;
    double mean_term = 0.0;
    for (long i = 0; i < n; ++i) {
      const long s = cells.strata.stratum_of_row[static_cast<std::size_t>(i)];
      const double p0 = p_hat(i, 0);
      const double pk = p_hat(i, arm);
      if (p0 <= 0.0 || p0 >= 1.0 || pk <= 0.0 || pk >= 1.0) {
        fail(ErrorCode::NonPositivePropensity,
             "propensity outside (0, 1) at row " + std::to_string(i));
      }
      double lambda = 1.0;
      if (kind == EstimatorKind::OneAtATime) {
        lambda = p0 * pk / (p0 + pk);
      } else if (kind == EstimatorKind::CommonWeights) {
        if ((p_hat.row(i).array() <= 0.0).any()) {
          fail(ErrorCode::NonPositivePropensity,
               "propensity outside (0, 1) at row " + std::to_string(i));
        }
        lambda = 1.0 / p_hat.row(i).cwiseInverse().sum();
      }
      mean_weight += lambda;
      mean_term += lambda * lambda *
                   (cells.variance(s, 0) / p0 + cells.variance(s, arm) / pk);
    }
    mean_weight /= static_cast<double>(n);
    mean_term /= static_cast<double>(n);
    se[arm - 1] = std::sqrt(mean_term / (mean_weight * mean_weight) / static_cast<double>(n));
  }
  return se;
}

Eigen::VectorXd known_pscore_se(const Dataset& data, const DesignSpec& spec, EstimatorKind kind) {
  return known_pscore_se(data, estimate_propensity(data, spec).p_hat, kind);
}

Eigen::VectorXd estimated_pscore_se(const Dataset& data, const Eigen::MatrixXd& p_hat,
                                    const Eigen::VectorXd& beta) {
  data.validate();
  const long n = data.rows();
  const int k = data.num_treatments();
  if (p_hat.rows() != n || p_hat.cols() != k + 1) {
    fail(ErrorCode::InvalidSpec, "propensity matrix must be N x (K+1)");
  }
  if (beta.size() != k) fail(ErrorCode::InvalidSpec, "beta must have K entries");
  CellMoments cells = cell_moments(data);

  Eigen::VectorXd se(k);
  for (int arm = 1; arm <= k; ++arm) {
    double mean_weight = 0.0;
    double mean_term = 0.0;
    for (long i = 0; i < n; ++i) {
      const long s = cells.strata.stratum_of_row[static_cast<std::size_t>(i)];
      if ((p_hat.row(i).array() <= 0.0).any() || (p_hat.row(i).array() >= 1.0).any()) {
        fail(ErrorCode::NonPositivePropensity,
             "propensity outside (0, 1) at row " + std::to_string(i));
      }
      const double lambda = 1.0 / p_hat.row(i).cwiseInverse().sum();
      if (cells.count(s, 0) == 0.0 || cells.count(s, arm) == 0.0) {
        fail(ErrorCode::EmptyCell, "conditional effect undefined in stratum " +
                                       cells.strata.labels[static_cast<std::size_t>(s)]);
      }
      const double tau = cells.mean(s, arm) - cells.mean(s, 0);
      const double penalty_factor =
          (lambda * lambda * p_hat.row(i).array().pow(-3.0)).sum() - 1.0;
      const double dev = tau - beta[arm - 1];
      mean_weight += lambda;
      mean_term += lambda * lambda *
                   (cells.variance(s, 0) / p_hat(i, 0) + cells.variance(s, arm) / p_hat(i, arm) +
                    dev * dev * penalty_factor);
    }
    mean_weight /= static_cast<double>(n);
    mean_term /= static_cast<double>(n);
    se[arm - 1] = std::sqrt(std::max(0.0, mean_term / (mean_weight * mean_weight)) /
                            static_cast<double>(n));
  }
  return se;
}

}  // namespace multitreat
