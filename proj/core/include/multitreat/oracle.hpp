#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "multitreat/dataset.hpp"

namespace multitreat {

// Discrete data-generating process over covariate strata. Vectors are indexed
// by arm with arm 0 the control: p holds assignment probabilities, mu the
// conditional mean outcomes, sigma2 the conditional outcome variances.
struct PopulationStratum {
  double mass = 0.0;
  Eigen::VectorXd p;
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma2;
};

struct PopulationSpec {
  std::vector<PopulationStratum> strata;

  int num_arms() const;        // K+1
  int num_treatments() const;  // K
  long num_strata() const { return static_cast<long>(strata.size()); }

  // Conditional treatment-vs-control contrasts mu_k(w) - mu_0(w), k = 1..K.
  Eigen::VectorXd tau(long stratum) const;

  void validate() const;
};

// Population weight matrices and the implied coefficient split.
struct OracleResult {
  std::vector<Eigen::MatrixXd> lambda;  // per stratum, K x K
  Eigen::VectorXd beta;
  Eigen::VectorXd own;
  Eigen::VectorXd contamination;
  std::optional<double> phi;  // two-strata single-treatment weight, when defined
};

// Lambda(w) = E[v]^-1 v(w) with v(w) = diag(p_1..K(w)) - p_1..K(w) p_1..K(w)'.
std::vector<Eigen::MatrixXd> population_lambda(const PopulationSpec& spec);

OracleResult population_beta(const PopulationSpec& spec);

// Variance-share weight on the first stratum for K=1 designs with two strata.
double population_phi(const PopulationSpec& spec);

struct WeightContrast {
  enum class Kind { single, all_pairs } kind = Kind::all_pairs;
  int arm = 1;  // treatment arm for Kind::single
};

// Homoskedastic variance-minimizing stratum weights: p0*pk/(p0+pk) for a
// single contrast, 1/sum(1/p_k) for the all-pairs average.
std::vector<double> optimal_weights(const PopulationSpec& spec, const WeightContrast& contrast);

// General variance-minimizing weights for an arbitrary contrast vector c of
// length K+1, using the population's conditional variances.
std::vector<double> optimal_weights_general(const PopulationSpec& spec, const Eigen::VectorXd& c);

// V = E[sum_k lambda(w)^2 c_k^2 sigma_k^2(w) / p_k(w)] / E[lambda(w)]^2, the
// minimal asymptotic variance of a regular estimator of the lambda-weighted,
// c-contrasted average of conditional mean outcomes under known propensities.
double efficiency_bound(const PopulationSpec& spec, const std::vector<double>& weights,
                        const Eigen::VectorXd& c);

// Finite dataset whose empirical (stratum, arm) frequencies match the
// population exactly and whose outcomes equal mu (zero variance), so
// population identities hold at machine precision on the sample side.
Dataset enumerate_exact(const PopulationSpec& spec, long cell_scale);

// I.i.d. draws: W ~ mass, D|W ~ p(W), Y|D,W ~ Normal(mu, sigma2).
Dataset simulate(const PopulationSpec& spec, long n, std::uint64_t seed);

// JSON document I/O; schema {"strata": [{"mass", "p": [], "mu": [], "sigma2": []}]}.
// Validation failures carry JSON-pointer style paths.
PopulationSpec parse_population_spec(const std::string& json_text);
PopulationSpec load_population_spec(const std::string& path);
std::string population_spec_to_json(const PopulationSpec& spec);

// Deterministic per-stream seed derivation (splitmix64 over seed and stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace multitreat
