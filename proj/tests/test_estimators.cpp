#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "multitreat/decompose.hpp"
#include "multitreat/errors.hpp"
#include "multitreat/estimators.hpp"
#include "multitreat/oracle.hpp"
#include "support.hpp"

using namespace multitreat;

namespace {

PopulationSpec two_strata_spec(double sigma2 = 0.0) {
  PopulationSpec spec;
  PopulationStratum s0, s1;
  s0.mass = 0.5;
  s0.p = Eigen::Vector3d(0.50, 0.05, 0.45);
  s0.mu = Eigen::Vector3d(0.0, 0.0, 0.0);
  s0.sigma2 = Eigen::Vector3d::Constant(sigma2);
  s1.mass = 0.5;
  s1.p = Eigen::Vector3d(0.10, 0.45, 0.45);
  s1.mu = Eigen::Vector3d(0.0, 0.0, 1.0);
  s1.sigma2 = Eigen::Vector3d::Constant(sigma2);
  spec.strata = {s0, s1};
  return spec;
}

Eigen::VectorXd difference_in_means(const Dataset& data) {
  const int k = data.num_treatments();
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(k + 1);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k + 1);
  for (long i = 0; i < data.rows(); ++i) {
    sums[data.treatment[static_cast<std::size_t>(i)]] += data.outcome[i];
    counts[data.treatment[static_cast<std::size_t>(i)]] += 1.0;
  }
  Eigen::VectorXd out(k);
  for (int a = 1; a <= k; ++a) out[a - 1] = sums[a] / counts[a] - sums[0] / counts[0];
  return out;
}

}  // namespace

TEST_CASE("single stratum: every estimator collapses to difference in arm means") {
  std::mt19937_64 rng(107);
  PopulationSpec spec = testsupport::random_spec(rng, 1, 1, 2, 2);
  Dataset data = testsupport::occupied_dataset(spec, 500, 3);
  Eigen::VectorXd dim = difference_in_means(data);

  DesignSpec design;
  REQUIRE((uninteracted(data, design).beta - dim).cwiseAbs().maxCoeff() < 1e-8);
  REQUIRE((ate_interacted(data, design).beta - dim).cwiseAbs().maxCoeff() < 1e-8);
  REQUIRE((one_at_a_time(data, design).beta - dim).cwiseAbs().maxCoeff() < 1e-8);
  REQUIRE((common_weights(data, design).beta - dim).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("worked example: the interacted ATE averages the stratum effects") {
  Dataset data = enumerate_exact(two_strata_spec(), 2000);
  EstimateSet ate = ate_interacted(data, DesignSpec{});
  REQUIRE(std::abs(ate.beta[0]) < 1e-10);
  REQUIRE(std::abs(ate.beta[1] - 0.5) < 1e-10);
}

TEST_CASE("interacted ATE requires every stratum-by-arm cell") {
  Dataset data = enumerate_exact(two_strata_spec(), 400);
  for (long i = 0; i < data.rows(); ++i) {
    if (data.controls(i, 0) == 0.0 && data.treatment[static_cast<std::size_t>(i)] == 1) {
      data.treatment[static_cast<std::size_t>(i)] = 0;
    }
  }
  try {
    ate_interacted(data, DesignSpec{});
    FAIL("expected EmptyCell");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::EmptyCell);
  }
}

TEST_CASE("binary treatment: one-at-a-time and common weights equal the plain fit") {
  std::mt19937_64 rng(109);
  for (int round = 0; round < 8; ++round) {
    PopulationSpec spec = testsupport::random_spec(rng, 2, 4, 1, 1);
    Dataset data = testsupport::occupied_dataset(spec, 600, 40 + static_cast<std::uint64_t>(round));
    DesignSpec design;
    Eigen::VectorXd plain = uninteracted(data, design).beta;
    REQUIRE(std::abs(one_at_a_time(data, design).beta[0] - plain[0]) < 1e-8);
    REQUIRE(std::abs(common_weights(data, design).beta[0] - plain[0]) < 1e-8);
  }
}

TEST_CASE("propensity fit returns within-stratum shares under strata dummies") {
  Dataset data = enumerate_exact(two_strata_spec(), 2000);
  PropensityFit fit = estimate_propensity(data, DesignSpec{});
  for (long i = 0; i < data.rows(); ++i) {
    if (data.controls(i, 0) == 0.0) {
      REQUIRE(fit.p_hat(i, 0) == Catch::Approx(0.50).margin(1e-10));
      REQUIRE(fit.p_hat(i, 1) == Catch::Approx(0.05).margin(1e-10));
      REQUIRE(fit.p_hat(i, 2) == Catch::Approx(0.45).margin(1e-10));
    } else {
      REQUIRE(fit.p_hat(i, 0) == Catch::Approx(0.10).margin(1e-10));
      REQUIRE(fit.p_hat(i, 1) == Catch::Approx(0.45).margin(1e-10));
      REQUIRE(fit.p_hat(i, 2) == Catch::Approx(0.45).margin(1e-10));
    }
    REQUIRE(fit.p_hat.row(i).sum() == Catch::Approx(1.0).margin(1e-8));
  }

  // single stratum: shares are the overall arm frequencies
  std::mt19937_64 rng(113);
  PopulationSpec one = testsupport::random_spec(rng, 1, 1, 2, 2);
  Dataset flat = testsupport::occupied_dataset(one, 300, 6);
  PropensityFit flat_fit = estimate_propensity(flat, DesignSpec{});
  Eigen::MatrixXd treat = encode_treatments(flat);
  for (int a = 1; a <= 2; ++a) {
    REQUIRE(flat_fit.p_hat(0, a) == Catch::Approx(treat.col(a - 1).mean()).margin(1e-10));
  }
}

TEST_CASE("common weights agree with the explicit weighted-means route") {
  std::mt19937_64 rng(127);
  for (int round = 0; round < 10; ++round) {
    PopulationSpec spec = testsupport::random_spec(rng, 2, 5, 1, 3);
    Dataset data = testsupport::occupied_dataset(spec, 700, 60 + static_cast<std::uint64_t>(round));
    DesignSpec design;
    EstimateSet wls_route = common_weights(data, design);
    Eigen::VectorXd mean_route = common_weights_by_means(data, design);
    REQUIRE((wls_route.beta - mean_route).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE(wls_route.weights_summary.has_value());
    REQUIRE(wls_route.weights_summary->min > 0.0);
  }
}

TEST_CASE("completely random assignment: common weights equal difference in means") {
  // constant assignment shares make the observation weights constant per arm;
  // exact frequencies keep the fitted shares constant in the sample too
  PopulationSpec spec;
  for (int s = 0; s < 2; ++s) {
    PopulationStratum stratum;
    stratum.mass = 0.5;
    stratum.p = Eigen::Vector3d(0.2, 0.45, 0.35);  // same in both strata
    stratum.mu = Eigen::Vector3d(0.0, 1.0, s == 0 ? 2.0 : -1.0);
    stratum.sigma2 = Eigen::Vector3d::Zero();
    spec.strata.push_back(stratum);
  }
  Dataset data = enumerate_exact(spec, 400);
  EstimateSet common = common_weights(data, DesignSpec{});
  REQUIRE((common.beta - difference_in_means(data)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("known-propensity SE closed form on the balanced binary design") {
  // one stratum, two arms, 500/500 split, outcomes alternating +-1 around the
  // arm mean: cell variance n/(n-1), propensities exactly one half
  const long half = 500;
  Dataset data;
  data.outcome.resize(2 * half);
  data.treatment.resize(static_cast<std::size_t>(2 * half));
  data.controls = Eigen::MatrixXd::Zero(2 * half, 0);
  data.arm_names = {"0", "1"};
  for (long i = 0; i < 2 * half; ++i) {
    data.treatment[static_cast<std::size_t>(i)] = i < half ? 0 : 1;
    data.outcome[i] = (i % 2 == 0) ? 1.0 : -1.0;
  }
  Eigen::VectorXd se = known_pscore_se(data, DesignSpec{}, EstimatorKind::CommonWeights);
  const double var_scale = static_cast<double>(half) / (half - 1.0);
  const double expected = std::sqrt(var_scale * (1.0 / 0.5 + 1.0 / 0.5) / 1000.0);
  REQUIRE(se[0] == Catch::Approx(expected).margin(1e-12));
  REQUIRE(std::abs(se[0] - 0.0632) < 5e-4);
}

TEST_CASE("balanced multi-arm design: estimating the propensity costs nothing") {
  // equal cell counts -> fitted shares exactly uniform -> the penalty factor
  // sum(lambda^2 / p^3) - 1 vanishes identically
  const int arms = 3;
  const long per_cell = 40;
  Dataset data;
  const long n = arms * per_cell * 2;
  data.outcome.resize(n);
  data.treatment.resize(static_cast<std::size_t>(n));
  data.controls.resize(n, 1);
  data.control_names = {"g"};
  data.control_kinds = {ColumnKind::categorical};
  data.control_levels = {{"0", "1"}};
  data.arm_names = {"0", "1", "2"};
  std::mt19937_64 rng(131);
  std::normal_distribution<double> normal;
  long row = 0;
  for (int g = 0; g < 2; ++g) {
    for (int a = 0; a < arms; ++a) {
      for (long r = 0; r < per_cell; ++r, ++row) {
        data.controls(row, 0) = g;
        data.treatment[static_cast<std::size_t>(row)] = a;
        data.outcome[row] = a + 0.5 * g + normal(rng);
      }
    }
  }
  DesignSpec design;
  EstimateSet common = common_weights(data, design);
  REQUIRE(common.se_known_pscore.has_value());
  REQUIRE(common.se_estimated_pscore.has_value());
  REQUIRE((*common.se_known_pscore - *common.se_estimated_pscore).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("one-at-a-time reports strata without a usable comparison") {
  Dataset data = enumerate_exact(two_strata_spec(), 400);
  for (long i = 0; i < data.rows(); ++i) {
    if (data.controls(i, 0) == 0.0 && data.treatment[static_cast<std::size_t>(i)] == 1) {
      data.treatment[static_cast<std::size_t>(i)] = 2;
    }
  }
  EstimateSet fit = one_at_a_time(data, DesignSpec{});
  bool flagged = false;
  for (const std::string& w : fit.warnings) {
    if (w.find("lacks a control/treated comparison") != std::string::npos) flagged = true;
  }
  REQUIRE(flagged);
}

TEST_CASE("estimator JSON includes kind, coefficients, and both SE vectors") {
  Dataset data = enumerate_exact(two_strata_spec(1.0), 400);
  EstimateSet set = common_weights(data, DesignSpec{});
  REQUIRE(set.kind == EstimatorKind::CommonWeights);
  REQUIRE(set.beta.size() == 2);
  REQUIRE(set.se_robust.size() == 2);
  REQUIRE(set.se_known_pscore.has_value());
  REQUIRE(set.n_used == 400);
}
