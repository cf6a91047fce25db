#include "multitreat/decompose.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "multitreat/errors.hpp"
#include "multitreat/oracle.hpp"
#include "multitreat/regress.hpp"

namespace multitreat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool stratum_included(const std::vector<int>& excluded, long stratum) {
  return std::find(excluded.begin(), excluded.end(), static_cast<int>(stratum)) == excluded.end();
}

}  // namespace

bool ConditionalAtes::included(long stratum) const {
  return stratum_included(excluded_strata, stratum);
}

bool WeightDecomposition::included(long stratum) const {
  return stratum_included(excluded_strata, stratum);
}

ConditionalAtes conditional_ates(const Dataset& data, const DesignSpec& spec) {
  data.validate();
  ConditionalAtes result;
  result.strata = index_strata(data);
  const long s_count = result.strata.num_strata();
  const int k = data.num_treatments();
  result.tau = Eigen::MatrixXd::Constant(s_count, k, kNaN);
  result.tau_se = Eigen::MatrixXd::Constant(s_count, k, kNaN);

  // With saturated strata dummies any empty stratum-by-arm cell makes the
  // interacted design singular, so those strata are dropped up front and
  // reported. Linear control specifications pool across strata instead.
  Dataset fit_data = data;
  std::vector<int> kept_stratum_of_row = result.strata.stratum_of_row;
  if (spec.control_style == ControlStyle::strata_dummies) {
    Eigen::MatrixXd cells = cell_counts(data, result.strata);
    for (long s = 0; s < s_count; ++s) {
      if ((cells.row(s).array() == 0.0).any()) {
        result.excluded_strata.push_back(static_cast<int>(s));
        result.warnings.push_back("stratum '" + result.strata.labels[static_cast<std::size_t>(s)] +
                                  "' has an empty arm cell; excluded from conditional effects");
      }
    }
    if (static_cast<long>(result.excluded_strata.size()) == s_count) {
      fail(ErrorCode::EmptyCell, "every stratum has an empty stratum-by-arm cell");
    }
    if (!result.excluded_strata.empty()) {
      std::vector<long> keep;
      for (long i = 0; i < data.rows(); ++i) {
        if (result.included(result.strata.stratum_of_row[static_cast<std::size_t>(i)])) {
          keep.push_back(i);
        }
      }
      Dataset reduced;
      reduced.outcome.resize(static_cast<long>(keep.size()));
      reduced.treatment.resize(keep.size());
      reduced.controls.resize(static_cast<long>(keep.size()), data.controls.cols());
      kept_stratum_of_row.resize(keep.size());
      for (std::size_t i = 0; i < keep.size(); ++i) {
        reduced.outcome[static_cast<long>(i)] = data.outcome[keep[i]];
        reduced.treatment[i] = data.treatment[static_cast<std::size_t>(keep[i])];
        reduced.controls.row(static_cast<long>(i)) = data.controls.row(keep[i]);
        kept_stratum_of_row[i] =
            result.strata.stratum_of_row[static_cast<std::size_t>(keep[i])];
      }
      reduced.control_names = data.control_names;
      reduced.control_kinds = data.control_kinds;
      reduced.control_levels = data.control_levels;
      reduced.arm_names = data.arm_names;
      fit_data = std::move(reduced);
    }
  }

  DesignSpec interacted = spec;
  interacted.interaction = InteractionStyle::raw;
  interacted.subsample.reset();
  BuiltDesign built = build_design(fit_data, interacted);
  RegressionFit fit = ols_fit(fit_data.outcome, built.design);
  Eigen::MatrixXd cov = hc_variance(fit, HcFlavor::HC1);

  const int c = built.control_count;
  const Eigen::Index p = built.design.cols();
  for (long s = 0; s < s_count; ++s) {
    if (!result.included(s)) continue;
    Eigen::VectorXd w_values =
        built.control_row_values(result.strata.control_rows.row(s).transpose());
    for (int arm = 0; arm < k; ++arm) {
      // tau_k(w) = gamma_0k + w' gamma_Wk; the selector vector doubles as the
      // delta-method gradient for the standard error.
      Eigen::VectorXd pick = Eigen::VectorXd::Zero(p);
      pick[built.treatment_begin + arm] = 1.0;
      for (int j = 0; j < c; ++j) pick[built.interaction_begin + arm * c + j] = w_values[j];
      result.tau(s, arm) = pick.dot(fit.coefficients);
      result.tau_se(s, arm) = std::sqrt(std::max(0.0, pick.dot(cov * pick)));
    }
  }
  return result;
}

std::vector<Eigen::MatrixXd> lambda_matrices(const Eigen::MatrixXd& treatment_indicators,
                                             const DesignMatrix& controls) {
  const long n = treatment_indicators.rows();
  Eigen::MatrixXd resid = residualize(treatment_indicators, controls);
  Eigen::MatrixXd gram = resid.transpose() * resid;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  lu.setThreshold(kRankTolerance);
  if (!lu.isInvertible()) {
    fail(ErrorCode::RankDeficient,
         "residualized treatment block is singular (joint design not full rank)");
  }
  std::vector<Eigen::MatrixXd> lambda;
  lambda.reserve(static_cast<std::size_t>(n));
  Eigen::MatrixXd gram_inv = lu.inverse();
  for (long i = 0; i < n; ++i) {
    lambda.push_back((gram_inv * resid.row(i).transpose()) * treatment_indicators.row(i));
  }
  return lambda;
}

WeightDecomposition decompose_beta(const Dataset& data, const DesignSpec& spec) {
  data.validate();
  WeightDecomposition decomp;
  decomp.num_treatments = data.num_treatments();
  const int k = decomp.num_treatments;
  const long n = data.rows();

  Eigen::MatrixXd treat = encode_treatments(data);
  DesignMatrix controls = control_design(data, spec);
  decomp.lambda_per_obs = lambda_matrices(treat, controls);

  DesignSpec uninteracted = spec;
  uninteracted.interaction = InteractionStyle::none;
  uninteracted.subsample.reset();
  BuiltDesign built = build_design(data, uninteracted);
  RegressionFit fit = ols_fit(data.outcome, built.design);
  Eigen::MatrixXd cov = hc_variance(fit, HcFlavor::HC1);
  decomp.beta_hat = fit.coefficients.segment(built.treatment_begin, k);
  decomp.beta_se_robust =
      cov.diagonal().segment(built.treatment_begin, k).cwiseMax(0.0).cwiseSqrt();

  ConditionalAtes cates = conditional_ates(data, spec);
  decomp.strata = std::move(cates.strata);
  decomp.tau = std::move(cates.tau);
  decomp.tau_se = std::move(cates.tau_se);
  decomp.excluded_strata = std::move(cates.excluded_strata);
  decomp.warnings = std::move(cates.warnings);
  if (!decomp.excluded_strata.empty()) {
    decomp.warnings.push_back(
        "conditional effects exclude some strata; own + contamination will not reproduce the "
        "uninteracted coefficients exactly");
  }

  const long s_count = decomp.strata.num_strata();
  decomp.own_component = Eigen::VectorXd::Zero(k);
  decomp.contamination_component = Eigen::VectorXd::Zero(k);
  for (long i = 0; i < n; ++i) {
    const long s = decomp.strata.stratum_of_row[static_cast<std::size_t>(i)];
    if (!decomp.included(s)) continue;
    const Eigen::MatrixXd& li = decomp.lambda_per_obs[static_cast<std::size_t>(i)];
    for (int a = 0; a < k; ++a) {
      for (int l = 0; l < k; ++l) {
        const double term = li(a, l) * decomp.tau(s, l);
        if (a == l) {
          decomp.own_component[a] += term;
        } else {
          decomp.contamination_component[a] += term;
        }
      }
    }
  }

  // Stratum aggregates on the population scale: the mean of Lambda_i over the
  // stratum, times N, so that the mass-weighted diagonal averages to one.
  decomp.lambda_per_stratum.assign(static_cast<std::size_t>(s_count),
                                   Eigen::MatrixXd::Zero(k, k));
  for (long i = 0; i < n; ++i) {
    decomp.lambda_per_stratum[static_cast<std::size_t>(
        decomp.strata.stratum_of_row[static_cast<std::size_t>(i)])] +=
        decomp.lambda_per_obs[static_cast<std::size_t>(i)];
  }
  for (long s = 0; s < s_count; ++s) {
    decomp.lambda_per_stratum[static_cast<std::size_t>(s)] *=
        static_cast<double>(n) / static_cast<double>(decomp.strata.counts[static_cast<std::size_t>(s)]);
  }

  // Saturated strata dummies guarantee nonnegative own-effect weights; a
  // linear control specification does not, so flag any sign flips.
  if (spec.control_style == ControlStyle::linear) {
    for (long s = 0; s < s_count; ++s) {
      const double smallest =
          decomp.lambda_per_stratum[static_cast<std::size_t>(s)].diagonal().minCoeff();
      if (smallest < -1e-10) {
        decomp.warnings.push_back(
            "own-effect weight is negative (" + std::to_string(smallest) + ") in stratum '" +
            decomp.strata.labels[static_cast<std::size_t>(s)] +
            "'; the linear control specification may not span the assignment probabilities");
      }
    }
  }
  return decomp;
}

DecompositionSe decomposition_se(const Dataset& data, const DesignSpec& spec,
                                 const BootstrapOptions& options) {
  data.validate();
  if (options.replicates < 2) fail(ErrorCode::InvalidSpec, "bootstrap needs at least 2 replicates");
  const long n = data.rows();
  const int k = data.num_treatments();
  const int reps = options.replicates;
  const long max_redraws = 10L * reps;
  const long base_strata = index_strata(data).num_strata();
  const std::vector<int> base_excluded = decompose_beta(data, spec).excluded_strata;

  Eigen::MatrixXd beta(reps, k), own(reps, k), contamination(reps, k);
  std::atomic<long> redraws{0};
  std::atomic<bool> overflow{false};

  // Cell membership for the design-fixed variant.
  std::vector<std::vector<long>> cell_rows;
  std::vector<std::size_t> cell_of_row(static_cast<std::size_t>(n));
  if (options.fixed_design) {
    StrataIndex strata = index_strata(data);
    std::map<std::pair<int, int>, std::size_t> cell_ids;
    for (long i = 0; i < n; ++i) {
      const std::pair<int, int> key{strata.stratum_of_row[static_cast<std::size_t>(i)],
                                    data.treatment[static_cast<std::size_t>(i)]};
      auto [it, inserted] = cell_ids.emplace(key, cell_rows.size());
      if (inserted) cell_rows.emplace_back();
      cell_rows[it->second].push_back(i);
      cell_of_row[static_cast<std::size_t>(i)] = it->second;
    }
  }

  auto run_replicate = [&](int rep) {
    // Redraw until the resample keeps every stratum-by-arm cell occupied, so
    // each replicate runs the same decomposition as the point estimate.
    for (long attempt = 0;; ++attempt) {
      if (attempt > 0) {
        if (redraws.fetch_add(1) + 1 > max_redraws) {
          overflow.store(true);
          return;
        }
      }
      std::mt19937_64 rng(derive_seed(options.seed,
                                      static_cast<std::uint64_t>(rep) * 1000003ULL +
                                          static_cast<std::uint64_t>(attempt)));
      Dataset sample;
      sample.outcome.resize(n);
      sample.treatment.resize(static_cast<std::size_t>(n));
      sample.controls.resize(n, data.controls.cols());
      if (options.fixed_design) {
        sample.treatment = data.treatment;
        sample.controls = data.controls;
        for (long i = 0; i < n; ++i) {
          const auto& pool = cell_rows[cell_of_row[static_cast<std::size_t>(i)]];
          std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
          sample.outcome[i] = data.outcome[pool[pick(rng)]];
        }
      } else {
        std::uniform_int_distribution<long> pick(0, n - 1);
        for (long i = 0; i < n; ++i) {
          const long src = pick(rng);
          sample.outcome[i] = data.outcome[src];
          sample.treatment[static_cast<std::size_t>(i)] =
              data.treatment[static_cast<std::size_t>(src)];
          sample.controls.row(i) = data.controls.row(src);
        }
      }
      sample.control_names = data.control_names;
      sample.control_kinds = data.control_kinds;
      sample.control_levels = data.control_levels;
      sample.arm_names = data.arm_names;
      try {
        WeightDecomposition d = decompose_beta(sample, spec);
        // Accept only replicates with the same stratum layout and the same
        // exclusion pattern as the point estimate.
        if (d.strata.num_strata() != base_strata || d.excluded_strata != base_excluded) {
          continue;
        }
        beta.row(rep) = d.beta_hat.transpose();
        own.row(rep) = d.own_component.transpose();
        contamination.row(rep) = d.contamination_component.transpose();
        return;
      } catch (const Error&) {
        continue;
      }
    }
  };

  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    for (int rep = 0; rep < reps && !overflow.load(); ++rep) run_replicate(rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    for (int j = 0; j < jobs; ++j) {
      workers.emplace_back([&]() {
        for (;;) {
          const int rep = next.fetch_add(1);
          if (rep >= reps || overflow.load()) return;
          run_replicate(rep);
        }
      });
    }
    for (auto& w : workers) w.join();
  }
  if (overflow.load()) {
    fail(ErrorCode::BootstrapCellFailure,
         "bootstrap exceeded " + std::to_string(max_redraws) + " redraws due to empty cells");
  }

  auto column_sd = [&](const Eigen::MatrixXd& draws) {
    Eigen::VectorXd mean = draws.colwise().mean();
    Eigen::VectorXd out(draws.cols());
    for (Eigen::Index j = 0; j < draws.cols(); ++j) {
      out[j] = std::sqrt((draws.col(j).array() - mean[j]).square().sum() /
                         static_cast<double>(reps - 1));
    }
    return out;
  };

  DecompositionSe se;
  se.beta_se = column_sd(beta);
  se.own_se = column_sd(own);
  se.contamination_se = column_sd(contamination);
  se.redraws = redraws.load();
  return se;
}

WeightEffectCorrelation weight_effect_correlation(const WeightDecomposition& decomp) {
  const int k = decomp.num_treatments;
  std::vector<long> strata;
  for (long s = 0; s < decomp.strata.num_strata(); ++s) {
    if (decomp.included(s)) strata.push_back(s);
  }
  if (strata.size() < 2) {
    fail(ErrorCode::InvalidSpec, "weight-effect correlation needs at least two strata");
  }

  WeightEffectCorrelation result;
  result.corr.assign(static_cast<std::size_t>(k),
                     std::vector<std::optional<double>>(static_cast<std::size_t>(k)));
  double total = 0.0;
  for (long s : strata) total += static_cast<double>(decomp.strata.counts[static_cast<std::size_t>(s)]);

  for (int a = 0; a < k; ++a) {
    for (int l = 0; l < k; ++l) {
      double mean_w = 0.0, mean_t = 0.0;
      for (long s : strata) {
        const double mass = decomp.strata.counts[static_cast<std::size_t>(s)] / total;
        mean_w += mass * decomp.lambda_per_stratum[static_cast<std::size_t>(s)](a, l);
        mean_t += mass * decomp.tau(s, l);
      }
      double var_w = 0.0, var_t = 0.0, cov = 0.0;
      for (long s : strata) {
        const double mass = decomp.strata.counts[static_cast<std::size_t>(s)] / total;
        const double dw = decomp.lambda_per_stratum[static_cast<std::size_t>(s)](a, l) - mean_w;
        const double dt = decomp.tau(s, l) - mean_t;
        var_w += mass * dw * dw;
        var_t += mass * dt * dt;
        cov += mass * dw * dt;
      }
      // A numerically constant series has no defined correlation.
      const double w_floor = 1e-10 * (1.0 + std::abs(mean_w));
      const double t_floor = 1e-10 * (1.0 + std::abs(mean_t));
      if (var_w <= w_floor * w_floor || var_t <= t_floor * t_floor) continue;
      result.corr[static_cast<std::size_t>(a)][static_cast<std::size_t>(l)] =
          cov / std::sqrt(var_w * var_t);
    }
  }
  return result;
}

std::vector<ScatterRow> scatter_table(const WeightDecomposition& decomp) {
  std::vector<ScatterRow> rows;
  for (long s = 0; s < decomp.strata.num_strata(); ++s) {
    if (!decomp.included(s)) continue;
    ScatterRow row;
    row.stratum = decomp.strata.labels[static_cast<std::size_t>(s)];
    row.count = decomp.strata.counts[static_cast<std::size_t>(s)];
    row.lambda = decomp.lambda_per_stratum[static_cast<std::size_t>(s)];
    row.tau = decomp.tau.row(s).transpose();
    row.tau_se = decomp.tau_se.row(s).transpose();
    rows.push_back(std::move(row));
  }
  return rows;
}

WorstCaseBounds worst_case_bounds(const WeightDecomposition& decomp) {
  const int k = decomp.num_treatments;
  std::vector<long> strata;
  for (long s = 0; s < decomp.strata.num_strata(); ++s) {
    if (decomp.included(s)) strata.push_back(s);
  }
  const std::size_t s_count = strata.size();

  // Aggregate the per-observation weights into per-stratum sums so that the
  // rearrangement inequality applies directly: pairing the sorted sums with
  // sorted effects maximizes; opposite sorting minimizes.
  std::vector<Eigen::MatrixXd> sums(s_count, Eigen::MatrixXd::Zero(k, k));
  {
    std::vector<long> position(static_cast<std::size_t>(decomp.strata.num_strata()), -1);
    for (std::size_t idx = 0; idx < s_count; ++idx) position[static_cast<std::size_t>(strata[idx])] = static_cast<long>(idx);
    for (std::size_t i = 0; i < decomp.lambda_per_obs.size(); ++i) {
      const long s = decomp.strata.stratum_of_row[i];
      const long pos = position[static_cast<std::size_t>(s)];
      if (pos >= 0) sums[static_cast<std::size_t>(pos)] += decomp.lambda_per_obs[i];
    }
  }

  WorstCaseBounds bounds;
  bounds.lower = Eigen::VectorXd::Zero(k);
  bounds.upper = Eigen::VectorXd::Zero(k);
  bounds.lower_order.assign(static_cast<std::size_t>(k),
                            std::vector<std::vector<int>>(static_cast<std::size_t>(k)));
  bounds.upper_order.assign(static_cast<std::size_t>(k),
                            std::vector<std::vector<int>>(static_cast<std::size_t>(k)));

  for (int a = 0; a < k; ++a) {
    for (int l = 0; l < k; ++l) {
      if (l == a) continue;
      std::vector<int> weight_order(s_count);
      std::iota(weight_order.begin(), weight_order.end(), 0);
      std::sort(weight_order.begin(), weight_order.end(), [&](int x, int y) {
        return sums[static_cast<std::size_t>(x)](a, l) < sums[static_cast<std::size_t>(y)](a, l);
      });
      std::vector<int> tau_order(s_count);
      std::iota(tau_order.begin(), tau_order.end(), 0);
      std::sort(tau_order.begin(), tau_order.end(), [&](int x, int y) {
        return decomp.tau(strata[static_cast<std::size_t>(x)], l) <
               decomp.tau(strata[static_cast<std::size_t>(y)], l);
      });

      double hi = 0.0, lo = 0.0;
      std::vector<int> hi_perm(s_count), lo_perm(s_count);
      for (std::size_t r = 0; r < s_count; ++r) {
        const double weight = sums[static_cast<std::size_t>(weight_order[r])](a, l);
        hi += weight * decomp.tau(strata[static_cast<std::size_t>(tau_order[r])], l);
        lo += weight * decomp.tau(strata[static_cast<std::size_t>(tau_order[s_count - 1 - r])], l);
        hi_perm[static_cast<std::size_t>(weight_order[r])] = tau_order[r];
        lo_perm[static_cast<std::size_t>(weight_order[r])] = tau_order[s_count - 1 - r];
      }
      bounds.upper[a] += hi;
      bounds.lower[a] += lo;
      bounds.upper_order[static_cast<std::size_t>(a)][static_cast<std::size_t>(l)] = hi_perm;
      bounds.lower_order[static_cast<std::size_t>(a)][static_cast<std::size_t>(l)] = lo_perm;
    }
  }
  return bounds;
}

HeterogeneitySd heterogeneity_sd(const WeightDecomposition& decomp) {
  const int k = decomp.num_treatments;
  HeterogeneitySd result;
  result.sd = Eigen::VectorXd::Zero(k);
  result.clamped.assign(static_cast<std::size_t>(k), false);

  double total = 0.0;
  for (long s = 0; s < decomp.strata.num_strata(); ++s) {
    if (decomp.included(s)) total += static_cast<double>(decomp.strata.counts[static_cast<std::size_t>(s)]);
  }
  for (int a = 0; a < k; ++a) {
    double mean = 0.0;
    for (long s = 0; s < decomp.strata.num_strata(); ++s) {
      if (!decomp.included(s)) continue;
      mean += decomp.strata.counts[static_cast<std::size_t>(s)] / total * decomp.tau(s, a);
    }
    double var = 0.0, mean_se2 = 0.0;
    for (long s = 0; s < decomp.strata.num_strata(); ++s) {
      if (!decomp.included(s)) continue;
      const double mass = decomp.strata.counts[static_cast<std::size_t>(s)] / total;
      var += mass * (decomp.tau(s, a) - mean) * (decomp.tau(s, a) - mean);
      mean_se2 += mass * decomp.tau_se(s, a) * decomp.tau_se(s, a);
    }
    const double adjusted = var - mean_se2;
    if (adjusted < 0.0) result.clamped[static_cast<std::size_t>(a)] = true;
    result.sd[a] = std::sqrt(std::max(0.0, adjusted));
  }
  return result;
}

}  // namespace multitreat
