#include "multitreat/oracle.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "multitreat/errors.hpp"

namespace multitreat {

int PopulationSpec::num_arms() const {
  return strata.empty() ? 0 : static_cast<int>(strata.front().p.size());
}

int PopulationSpec::num_treatments() const { return num_arms() - 1; }

Eigen::VectorXd PopulationSpec::tau(long stratum) const {
  const auto& s = strata[static_cast<std::size_t>(stratum)];
  return s.mu.tail(s.mu.size() - 1).array() - s.mu[0];
}

void PopulationSpec::validate() const {
  if (strata.empty()) fail(ErrorCode::InvalidSpec, "/strata: at least one stratum required");
  const Eigen::Index arms = strata.front().p.size();
  if (arms < 2) fail(ErrorCode::InvalidSpec, "/strata/0/p: need at least two arms");
  double total_mass = 0.0;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    const std::string at = "/strata/" + std::to_string(s);
    const auto& st = strata[s];
    if (st.mass < 0.0 || !std::isfinite(st.mass)) {
      fail(ErrorCode::InvalidSpec, at + "/mass: must be finite and nonnegative");
    }
    total_mass += st.mass;
    if (st.p.size() != arms || st.mu.size() != arms || st.sigma2.size() != arms) {
      fail(ErrorCode::InvalidSpec, at + ": p, mu, sigma2 must all have length " +
                                       std::to_string(arms));
    }
    if ((st.p.array() < 0.0).any() || (st.p.array() > 1.0).any()) {
      fail(ErrorCode::InvalidSpec, at + "/p: entries must lie in [0, 1]");
    }
    if (std::abs(st.p.sum() - 1.0) > 1e-8) {
      fail(ErrorCode::InvalidSpec, at + "/p: entries sum to " + std::to_string(st.p.sum()) +
                                       ", expected 1");
    }
    if ((st.sigma2.array() < 0.0).any()) {
      fail(ErrorCode::InvalidSpec, at + "/sigma2: entries must be nonnegative");
    }
    if (!st.mu.allFinite() || !st.sigma2.allFinite()) {
      fail(ErrorCode::InvalidSpec, at + ": mu and sigma2 must be finite");
    }
  }
  if (std::abs(total_mass - 1.0) > 1e-8) {
    fail(ErrorCode::InvalidSpec,
         "/strata: masses sum to " + std::to_string(total_mass) + ", expected 1");
  }
}

namespace {

// Treatment-block assignment covariance diag(p) - pp' over arms 1..K.
Eigen::MatrixXd stratum_variance(const PopulationStratum& s) {
  Eigen::VectorXd pt = s.p.tail(s.p.size() - 1);
  return Eigen::MatrixXd(pt.asDiagonal()) - pt * pt.transpose();
}

}  // namespace

std::vector<Eigen::MatrixXd> population_lambda(const PopulationSpec& spec) {
  spec.validate();
  const int k = spec.num_treatments();
  Eigen::MatrixXd vbar = Eigen::MatrixXd::Zero(k, k);
  std::vector<Eigen::MatrixXd> v;
  v.reserve(spec.strata.size());
  for (const auto& s : spec.strata) {
    v.push_back(stratum_variance(s));
    vbar += s.mass * v.back();
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(vbar);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    fail(ErrorCode::SingularAverageVariance,
         "average assignment variance is singular (some treatment has no variation)");
  }
  std::vector<Eigen::MatrixXd> lambda;
  lambda.reserve(v.size());
  for (const auto& vw : v) lambda.push_back(lu.solve(vw));
  return lambda;
}

OracleResult population_beta(const PopulationSpec& spec) {
  OracleResult result;
  result.lambda = population_lambda(spec);
  const int k = spec.num_treatments();
  result.beta = Eigen::VectorXd::Zero(k);
  result.own = Eigen::VectorXd::Zero(k);
  result.contamination = Eigen::VectorXd::Zero(k);
  for (long s = 0; s < spec.num_strata(); ++s) {
    const double mass = spec.strata[static_cast<std::size_t>(s)].mass;
    const Eigen::MatrixXd& lw = result.lambda[static_cast<std::size_t>(s)];
    const Eigen::VectorXd tau = spec.tau(s);
    result.own += mass * lw.diagonal().cwiseProduct(tau);
    Eigen::MatrixXd off = lw;
    off.diagonal().setZero();
    result.contamination += mass * (off * tau);
  }
  result.beta = result.own + result.contamination;
  if (k == 1 && spec.num_strata() == 2) result.phi = population_phi(spec);
  return result;
}

double population_phi(const PopulationSpec& spec) {
  spec.validate();
  if (spec.num_treatments() != 1 || spec.num_strata() != 2) {
    fail(ErrorCode::InvalidSpec, "phi requires exactly one treatment and two strata");
  }
  const double v0 = spec.strata[0].p[1] * (1.0 - spec.strata[0].p[1]);
  const double v1 = spec.strata[1].p[1] * (1.0 - spec.strata[1].p[1]);
  const double denom = v0 * spec.strata[0].mass + v1 * spec.strata[1].mass;
  if (denom <= 0.0) {
    fail(ErrorCode::ZeroVariance, "treatment has zero assignment variance in both strata");
  }
  return v0 * spec.strata[0].mass / denom;
}

std::vector<double> optimal_weights(const PopulationSpec& spec, const WeightContrast& contrast) {
  spec.validate();
  const int arms = spec.num_arms();
  std::vector<double> weights;
  weights.reserve(spec.strata.size());
  if (contrast.kind == WeightContrast::Kind::single) {
    if (contrast.arm < 1 || contrast.arm >= arms) {
      fail(ErrorCode::InvalidSpec, "contrast arm out of range");
    }
    for (const auto& s : spec.strata) {
      const double p0 = s.p[0];
      const double pk = s.p[contrast.arm];
      if (p0 + pk <= 0.0) fail(ErrorCode::ZeroPropensity, "control and contrast arm both have zero propensity");
      weights.push_back(p0 * pk / (p0 + pk));
    }
    return weights;
  }
  for (const auto& s : spec.strata) {
    double denom = 0.0;
    for (Eigen::Index a = 0; a < arms; ++a) {
      if (s.p[a] <= 0.0) fail(ErrorCode::ZeroPropensity, "all-pairs weights need every arm propensity positive");
      denom += 1.0 / s.p[a];
    }
    weights.push_back(1.0 / denom);
  }
  return weights;
}

std::vector<double> optimal_weights_general(const PopulationSpec& spec, const Eigen::VectorXd& c) {
  spec.validate();
  if (c.size() != spec.num_arms()) fail(ErrorCode::InvalidSpec, "contrast length must be K+1");
  std::vector<double> weights;
  weights.reserve(spec.strata.size());
  for (const auto& s : spec.strata) {
    double denom = 0.0;
    for (Eigen::Index a = 0; a < c.size(); ++a) {
      if (c[a] == 0.0) continue;
      if (s.p[a] <= 0.0) fail(ErrorCode::ZeroPropensity, "contrasted arm has zero propensity");
      denom += c[a] * c[a] * s.sigma2[a] / s.p[a];
    }
    if (denom <= 0.0) fail(ErrorCode::ZeroVariance, "contrast has zero variance everywhere in a stratum");
    weights.push_back(1.0 / denom);
  }
  return weights;
}

double efficiency_bound(const PopulationSpec& spec, const std::vector<double>& weights,
                        const Eigen::VectorXd& c) {
  spec.validate();
  if (static_cast<long>(weights.size()) != spec.num_strata()) {
    fail(ErrorCode::InvalidSpec, "weight count must match stratum count");
  }
  if (c.size() != spec.num_arms()) fail(ErrorCode::InvalidSpec, "contrast length must be K+1");
  double mean_weight = 0.0;
  double variance_term = 0.0;
  for (long s = 0; s < spec.num_strata(); ++s) {
    const auto& st = spec.strata[static_cast<std::size_t>(s)];
    const double lw = weights[static_cast<std::size_t>(s)];
    mean_weight += st.mass * lw;
    double inner = 0.0;
    for (Eigen::Index a = 0; a < c.size(); ++a) {
      if (c[a] == 0.0) continue;
      if (st.p[a] <= 0.0) fail(ErrorCode::ZeroPropensity, "contrasted arm has zero propensity");
      inner += c[a] * c[a] * st.sigma2[a] / st.p[a];
    }
    variance_term += st.mass * lw * lw * inner;
  }
  if (mean_weight == 0.0) fail(ErrorCode::ZeroMeanWeights, "weights average to zero");
  return variance_term / (mean_weight * mean_weight);
}

namespace {

Dataset dataset_skeleton(const PopulationSpec& spec) {
  Dataset data;
  data.control_names = {"stratum"};
  data.control_kinds = {ColumnKind::categorical};
  std::vector<std::string> levels;
  for (long s = 0; s < spec.num_strata(); ++s) levels.push_back(std::to_string(s));
  data.control_levels = {levels};
  data.arm_names.push_back("0");
  for (int a = 1; a < spec.num_arms(); ++a) data.arm_names.push_back(std::to_string(a));
  return data;
}

}  // namespace

Dataset enumerate_exact(const PopulationSpec& spec, long cell_scale) {
  spec.validate();
  if (cell_scale < 1) fail(ErrorCode::InvalidSpec, "cell_scale must be positive");
  const int arms = spec.num_arms();
  std::vector<std::vector<long>> counts(spec.strata.size());
  long total = 0;
  for (std::size_t s = 0; s < spec.strata.size(); ++s) {
    counts[s].resize(static_cast<std::size_t>(arms));
    for (int a = 0; a < arms; ++a) {
      const double exact = spec.strata[s].mass * spec.strata[s].p[a] *
                           static_cast<double>(cell_scale);
      const double rounded = std::round(exact);
      if (std::abs(exact - rounded) > 1e-6) {
        fail(ErrorCode::NonIntegralCells,
             "cell (stratum " + std::to_string(s) + ", arm " + std::to_string(a) + ") count " +
                 std::to_string(exact) + " is not integral at scale " +
                 std::to_string(cell_scale));
      }
      counts[s][static_cast<std::size_t>(a)] = static_cast<long>(rounded);
      total += counts[s][static_cast<std::size_t>(a)];
    }
  }

  Dataset data = dataset_skeleton(spec);
  data.outcome.resize(total);
  data.treatment.resize(static_cast<std::size_t>(total));
  data.controls.resize(total, 1);
  long row = 0;
  for (std::size_t s = 0; s < spec.strata.size(); ++s) {
    for (int a = 0; a < arms; ++a) {
      for (long r = 0; r < counts[s][static_cast<std::size_t>(a)]; ++r, ++row) {
        data.outcome[row] = spec.strata[s].mu[a];
        data.treatment[static_cast<std::size_t>(row)] = a;
        data.controls(row, 0) = static_cast<double>(s);
      }
    }
  }
  data.validate();
  return data;
}

Dataset simulate(const PopulationSpec& spec, long n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) fail(ErrorCode::InvalidSpec, "simulation size must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset data = dataset_skeleton(spec);
  data.outcome.resize(n);
  data.treatment.resize(static_cast<std::size_t>(n));
  data.controls.resize(n, 1);
  for (long i = 0; i < n; ++i) {
    double u = unif(rng);
    long s = 0;
    double acc = spec.strata[0].mass;
    while (u > acc && s + 1 < spec.num_strata()) acc += spec.strata[static_cast<std::size_t>(++s)].mass;
    const auto& st = spec.strata[static_cast<std::size_t>(s)];

    double v = unif(rng);
    int arm = 0;
    double pacc = st.p[0];
    while (v > pacc && arm + 1 < spec.num_arms()) pacc += st.p[++arm];

    data.controls(i, 0) = static_cast<double>(s);
    data.treatment[static_cast<std::size_t>(i)] = arm;
    data.outcome[i] = st.mu[arm] + std::sqrt(st.sigma2[arm]) * normal(rng);
  }
  return data;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined state.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace multitreat
