#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "multitreat/errors.hpp"
#include "multitreat/regress.hpp"
#include "support.hpp"

using namespace multitreat;

namespace {

DesignMatrix make_design(const Eigen::MatrixXd& values, bool intercept = false) {
  DesignMatrix X;
  X.values = values;
  X.has_intercept = intercept;
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    X.column_labels.push_back("x" + std::to_string(j));
  }
  return X;
}

}  // namespace

TEST_CASE("ols recovers an exact linear system with zero residuals") {
  Eigen::MatrixXd values(6, 2);
  values << 1, 2, 3, 1, 0, 4, 2, 2, 5, 0, 1, 1;
  Eigen::VectorXd truth(2);
  truth << 1.0, 2.0;
  Eigen::VectorXd y = values * truth;

  RegressionFit fit = ols_fit(y, make_design(values));
  REQUIRE((fit.coefficients - truth).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE(fit.residuals.cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((fit.fitted - y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("intercept-only fit returns the mean") {
  Eigen::VectorXd y = Eigen::VectorXd::Constant(9, 5.0);
  RegressionFit fit = ols_fit(y, make_design(Eigen::MatrixXd::Ones(9, 1), true));
  REQUIRE(fit.coefficients[0] == Catch::Approx(5.0).margin(1e-14));
}

TEST_CASE("ols matches an independent Gram-Schmidt solve on a random system") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd values(50, 3);
  Eigen::VectorXd y(50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) values(i, j) = normal(rng);
    y[i] = normal(rng);
  }
  RegressionFit fit = ols_fit(y, make_design(values));
  Eigen::VectorXd oracle = testsupport::gram_schmidt_solve(values, y);
  REQUIRE((fit.coefficients - oracle).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("normal equations hold and the gram inverse is the real inverse") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd values(40, 4);
  Eigen::VectorXd y(40), w(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) values(i, j) = normal(rng);
    y[i] = normal(rng);
    w[i] = 0.5 + std::abs(normal(rng));
  }
  DesignMatrix X = make_design(values);
  RegressionFit fit = wls_fit(y, X, w);

  Eigen::VectorXd score = values.transpose() * (w.asDiagonal() * fit.residuals);
  const double scale = (values.transpose() * (w.asDiagonal() * y)).norm();
  REQUIRE(score.norm() < 1e-8 * scale);

  Eigen::MatrixXd gram = values.transpose() * w.asDiagonal() * values;
  REQUIRE((fit.gram_inverse * gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <
          1e-10);
}

TEST_CASE("unit weights reproduce ols and weight scale does not matter") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd values(30, 3);
  Eigen::VectorXd y(30);
  for (Eigen::Index i = 0; i < 30; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) values(i, j) = normal(rng);
    y[i] = normal(rng);
  }
  DesignMatrix X = make_design(values);
  RegressionFit plain = ols_fit(y, X);
  RegressionFit unit = wls_fit(y, X, Eigen::VectorXd::Ones(30));
  RegressionFit scaled = wls_fit(y, X, Eigen::VectorXd::Constant(30, 7.5));
  REQUIRE((plain.coefficients - unit.coefficients).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((unit.coefficients - scaled.coefficients).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("duplicating a row with halved weights leaves the fit unchanged") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd values(20, 2);
  Eigen::VectorXd y(20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) values(i, j) = normal(rng);
    y[i] = normal(rng);
  }
  RegressionFit base = wls_fit(y, make_design(values), Eigen::VectorXd::Ones(20));

  Eigen::MatrixXd dup(21, 2);
  Eigen::VectorXd y_dup(21), w_dup(21);
  dup.topRows(20) = values;
  y_dup.head(20) = y;
  w_dup.setOnes();
  dup.row(20) = values.row(0);
  y_dup[20] = y[0];
  w_dup[0] = 0.5;
  w_dup[20] = 0.5;
  RegressionFit doubled = wls_fit(y_dup, make_design(dup), w_dup);
  REQUIRE((base.coefficients - doubled.coefficients).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("residualize leaves orthogonal targets alone and kills spanned ones") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd controls(40, 2);
  for (Eigen::Index i = 0; i < 40; ++i) {
    controls(i, 0) = 1.0;
    controls(i, 1) = normal(rng);
  }
  DesignMatrix W = make_design(controls, true);

  Eigen::VectorXd raw(40);
  for (Eigen::Index i = 0; i < 40; ++i) raw[i] = normal(rng);
  Eigen::MatrixXd orthogonal = residualize(raw, W);
  REQUIRE((residualize(orthogonal, W) - orthogonal).cwiseAbs().maxCoeff() < 1e-10);

  // residuals are orthogonal to every control column
  Eigen::MatrixXd cross = orthogonal.transpose() * controls;
  const double scale = orthogonal.norm() * controls.norm();
  REQUIRE(cross.cwiseAbs().maxCoeff() < 1e-7 * scale);

  Eigen::MatrixXd spanned = controls * Eigen::Vector2d(2.0, -3.0);
  REQUIRE(residualize(spanned, W).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("residualizing a binary treatment on strata dummies demeans within strata") {
  std::mt19937_64 rng(17);
  std::bernoulli_distribution stratum_draw(0.4);
  const long n = 200;
  Eigen::MatrixXd controls(n, 2);
  Eigen::MatrixXd treat(n, 1);
  std::vector<int> stratum(n);
  for (long i = 0; i < n; ++i) {
    stratum[static_cast<std::size_t>(i)] = stratum_draw(rng) ? 1 : 0;
    controls(i, 0) = 1.0;
    controls(i, 1) = stratum[static_cast<std::size_t>(i)];
    std::bernoulli_distribution treat_draw(stratum[static_cast<std::size_t>(i)] == 0 ? 0.3 : 0.6);
    treat(i, 0) = treat_draw(rng) ? 1.0 : 0.0;
  }
  Eigen::MatrixXd resid = residualize(treat, make_design(controls, true));

  // group-mean oracle
  double sum0 = 0.0, count0 = 0.0, sum1 = 0.0, count1 = 0.0;
  for (long i = 0; i < n; ++i) {
    if (stratum[static_cast<std::size_t>(i)] == 0) {
      sum0 += treat(i, 0);
      count0 += 1.0;
    } else {
      sum1 += treat(i, 0);
      count1 += 1.0;
    }
  }
  for (long i = 0; i < n; ++i) {
    const double mean = stratum[static_cast<std::size_t>(i)] == 0 ? sum0 / count0 : sum1 / count1;
    REQUIRE(resid(i, 0) == Catch::Approx(treat(i, 0) - mean).margin(1e-10));
  }
}

TEST_CASE("FWL: joint coefficient equals the fully residualized univariate slope") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd values(60, 4);
  Eigen::VectorXd y(60);
  for (Eigen::Index i = 0; i < 60; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) values(i, j) = normal(rng);
    y[i] = normal(rng);
  }
  RegressionFit joint = ols_fit(y, make_design(values));

  DesignMatrix others = make_design(values.rightCols(3));
  Eigen::MatrixXd x_dot = residualize(values.col(0), others);
  const double slope = x_dot.col(0).dot(y) / x_dot.col(0).squaredNorm();
  REQUIRE(slope == Catch::Approx(joint.coefficients[0]).epsilon(1e-9));
}

TEST_CASE("hc variance: zero residuals give a zero matrix and HC1 rescales HC0") {
  Eigen::MatrixXd values(10, 2);
  values.col(0).setOnes();
  for (Eigen::Index i = 0; i < 10; ++i) values(i, 1) = static_cast<double>(i);
  Eigen::VectorXd y = values * Eigen::Vector2d(1.0, 2.0);
  RegressionFit exact = ols_fit(y, make_design(values, true));
  REQUIRE(hc_variance(exact, HcFlavor::HC0).cwiseAbs().maxCoeff() < 1e-20);

  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal;
  Eigen::VectorXd noisy = y;
  for (Eigen::Index i = 0; i < 10; ++i) noisy[i] += normal(rng);
  RegressionFit fit = ols_fit(noisy, make_design(values, true));
  Eigen::MatrixXd hc0 = hc_variance(fit, HcFlavor::HC0);
  Eigen::MatrixXd hc1 = hc_variance(fit, HcFlavor::HC1);
  REQUIRE((hc1 - hc0 * (10.0 / 8.0)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("hc0 approaches the analytic homoskedastic variance in large samples") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> normal;
  const long n = 20000;
  Eigen::MatrixXd values(n, 2);
  Eigen::VectorXd y(n);
  const double sigma = 1.5;
  for (Eigen::Index i = 0; i < n; ++i) {
    values(i, 0) = 1.0;
    values(i, 1) = normal(rng);
    y[i] = 2.0 - values(i, 1) + sigma * normal(rng);
  }
  RegressionFit fit = ols_fit(y, make_design(values, true));
  Eigen::MatrixXd robust = hc_variance(fit, HcFlavor::HC0);
  Eigen::MatrixXd analytic =
      sigma * sigma * (values.transpose() * values).inverse();
  for (Eigen::Index a = 0; a < 2; ++a) {
    REQUIRE(std::abs(robust(a, a) - analytic(a, a)) < 0.15 * analytic(a, a));
  }
  // off-diagonal terms are near zero for independent regressors
  REQUIRE(std::abs(robust(0, 1)) < 0.15 * std::sqrt(analytic(0, 0) * analytic(1, 1)));
}

TEST_CASE("rank-deficient designs are rejected with the offending column named") {
  Eigen::MatrixXd values(8, 3);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < 8; ++i) {
    values(i, 0) = 1.0;
    values(i, 1) = normal(rng);
    values(i, 2) = 2.0 * values(i, 1);
  }
  DesignMatrix X = make_design(values);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(8);
  try {
    ols_fit(y, X);
    FAIL("expected RankDeficient");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::RankDeficient);
    REQUIRE_THAT(e.what(), Catch::Matchers::ContainsSubstring("x"));
  }
}

TEST_CASE("non-finite inputs and nonpositive weights are rejected") {
  Eigen::MatrixXd values = Eigen::MatrixXd::Ones(4, 1);
  Eigen::VectorXd y(4);
  y << 1.0, 2.0, std::numeric_limits<double>::quiet_NaN(), 4.0;
  REQUIRE_THROWS_AS(ols_fit(y, make_design(values)), Error);

  y.setOnes();
  Eigen::VectorXd w(4);
  w << 1.0, 0.0, 1.0, 1.0;
  try {
    wls_fit(y, make_design(values), w);
    FAIL("expected NonPositiveWeight");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::NonPositiveWeight);
  }
}
