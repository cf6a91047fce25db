#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>

#include "multitreat/dataset.hpp"
#include "multitreat/oracle.hpp"

namespace testsupport {

inline std::string repo_file(const std::string& relative) {
#ifdef MULTITREAT_REPO_DIR
  return std::string(MULTITREAT_REPO_DIR) + "/" + relative;
#else
  return relative;
#endif
}

// Flat-Dirichlet population spec for property tests: strata 2-6, treatments
// 1-4, propensities floored at 0.02 and renormalized so every cell keeps
// usable variation.
inline multitreat::PopulationSpec random_spec(std::mt19937_64& rng, int min_strata = 2,
                                              int max_strata = 6, int min_treat = 1,
                                              int max_treat = 4) {
  std::uniform_int_distribution<int> strata_dist(min_strata, max_strata);
  std::uniform_int_distribution<int> treat_dist(min_treat, max_treat);
  std::exponential_distribution<double> expo(1.0);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::uniform_real_distribution<double> var_dist(0.25, 2.0);

  const int s_count = strata_dist(rng);
  const int arms = treat_dist(rng) + 1;
  multitreat::PopulationSpec spec;

  Eigen::VectorXd masses(s_count);
  for (int s = 0; s < s_count; ++s) masses[s] = expo(rng) + 0.1;
  masses /= masses.sum();

  for (int s = 0; s < s_count; ++s) {
    multitreat::PopulationStratum stratum;
    stratum.mass = masses[s];
    stratum.p.resize(arms);
    for (int a = 0; a < arms; ++a) stratum.p[a] = expo(rng);
    stratum.p /= stratum.p.sum();
    stratum.p = stratum.p.cwiseMax(0.02);
    stratum.p /= stratum.p.sum();
    stratum.mu.resize(arms);
    stratum.sigma2.resize(arms);
    for (int a = 0; a < arms; ++a) {
      stratum.mu[a] = normal(rng);
      stratum.sigma2[a] = var_dist(rng);
    }
    spec.strata.push_back(std::move(stratum));
  }
  return spec;
}

// Integer-cell population spec: empirical frequencies of the matching
// enumeration reproduce the population exactly at the returned scale.
struct RationalSpec {
  multitreat::PopulationSpec spec;
  long cell_scale = 0;
};

inline RationalSpec random_rational_spec(std::mt19937_64& rng, int min_strata = 2,
                                         int max_strata = 6, int min_treat = 1,
                                         int max_treat = 4) {
  std::uniform_int_distribution<int> strata_dist(min_strata, max_strata);
  std::uniform_int_distribution<int> treat_dist(min_treat, max_treat);
  std::uniform_int_distribution<int> cell_dist(1, 10);
  std::uniform_int_distribution<int> mass_dist(1, 4);
  std::normal_distribution<double> normal(0.0, 2.0);

  const int s_count = strata_dist(rng);
  const int arms = treat_dist(rng) + 1;
  std::vector<std::vector<long>> counts(static_cast<std::size_t>(s_count));
  long total = 0;
  for (int s = 0; s < s_count; ++s) {
    const long multiplier = mass_dist(rng);
    counts[static_cast<std::size_t>(s)].resize(static_cast<std::size_t>(arms));
    for (int a = 0; a < arms; ++a) {
      counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] =
          multiplier * cell_dist(rng);
      total += counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
    }
  }

  RationalSpec out;
  out.cell_scale = total;
  for (int s = 0; s < s_count; ++s) {
    multitreat::PopulationStratum stratum;
    long stratum_total = 0;
    for (int a = 0; a < arms; ++a) stratum_total += counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
    stratum.mass = static_cast<double>(stratum_total) / static_cast<double>(total);
    stratum.p.resize(arms);
    stratum.mu.resize(arms);
    stratum.sigma2 = Eigen::VectorXd::Zero(arms);
    for (int a = 0; a < arms; ++a) {
      stratum.p[a] = static_cast<double>(counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]) /
                     static_cast<double>(stratum_total);
      stratum.mu[a] = normal(rng);
    }
    out.spec.strata.push_back(std::move(stratum));
  }
  return out;
}

// Simulated dataset with every stratum-by-arm cell occupied (seeds advanced
// until the draw cooperates).
inline multitreat::Dataset occupied_dataset(const multitreat::PopulationSpec& spec, long n,
                                            std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    multitreat::Dataset data =
        multitreat::simulate(spec, n, multitreat::derive_seed(seed, attempt));
    multitreat::StrataIndex strata = multitreat::index_strata(data);
    if (strata.num_strata() != spec.num_strata()) continue;
    Eigen::MatrixXd cells = multitreat::cell_counts(data, strata);
    if ((cells.array() >= 2.0).all()) return data;
  }
}

// Independent least-squares oracle: modified Gram-Schmidt QR, no shared code
// with the library's solver.
inline Eigen::VectorXd gram_schmidt_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd q = X;
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      r(i, j) = q.col(i).dot(q.col(j));
      q.col(j) -= r(i, j) * q.col(i);
    }
    r(j, j) = q.col(j).norm();
    q.col(j) /= r(j, j);
  }
  Eigen::VectorXd qty = q.transpose() * y;
  Eigen::VectorXd beta(p);
  for (Eigen::Index j = p - 1; j >= 0; --j) {
    double acc = qty[j];
    for (Eigen::Index i = j + 1; i < p; ++i) acc -= r(j, i) * beta[i];
    beta[j] = acc / r(j, j);
  }
  return beta;
}

}  // namespace testsupport
