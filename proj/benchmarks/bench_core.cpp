#include <benchmark/benchmark.h>

#include <random>

#include "multitreat/decompose.hpp"
#include "multitreat/design.hpp"
#include "multitreat/estimators.hpp"
#include "multitreat/oracle.hpp"
#include "multitreat/regress.hpp"

using namespace multitreat;

namespace {

PopulationSpec benchmark_spec(int strata, int arms) {
  // lopsided but well-separated propensities; unit variances
  PopulationSpec spec;
  for (int s = 0; s < strata; ++s) {
    PopulationStratum stratum;
    stratum.mass = 1.0 / strata;
    stratum.p.resize(arms);
    for (int a = 0; a < arms; ++a) stratum.p[a] = 1.0 + ((s + a) % 3);
    stratum.p /= stratum.p.sum();
    stratum.mu.resize(arms);
    stratum.sigma2 = Eigen::VectorXd::Ones(arms);
    for (int a = 0; a < arms; ++a) stratum.mu[a] = 0.5 * a + 0.1 * s;
    spec.strata.push_back(std::move(stratum));
  }
  return spec;
}

void BM_OlsFit(benchmark::State& state) {
  const long n = state.range(0);
  const long p = state.range(1);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  DesignMatrix X;
  X.values.resize(n, p);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < p; ++j) X.values(i, j) = normal(rng);
  }
  for (long j = 0; j < p; ++j) X.column_labels.push_back("x" + std::to_string(j));
  Eigen::VectorXd y(n);
  for (long i = 0; i < n; ++i) y[i] = normal(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ols_fit(y, X));
  }
}
BENCHMARK(BM_OlsFit)->Args({2000, 10})->Args({6000, 80})->Args({6000, 240})
    ->Unit(benchmark::kMillisecond);

void BM_DecomposeBeta(benchmark::State& state) {
  PopulationSpec spec = benchmark_spec(static_cast<int>(state.range(0)), 3);
  Dataset data = simulate(spec, state.range(1), 5);
  DesignSpec design;
  for (auto _ : state) {
    benchmark::DoNotOptimize(decompose_beta(data, design));
  }
}
BENCHMARK(BM_DecomposeBeta)->Args({10, 5000})->Args({80, 6000})->Unit(benchmark::kMillisecond);

void BM_BootstrapSe(benchmark::State& state) {
  PopulationSpec spec = benchmark_spec(10, 3);
  Dataset data = simulate(spec, 2000, 7);
  DesignSpec design;
  BootstrapOptions options;
  options.replicates = static_cast<int>(state.range(0));
  options.jobs = static_cast<int>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(decomposition_se(data, design, options));
  }
}
BENCHMARK(BM_BootstrapSe)->Args({50, 1})->Args({50, 4})->Unit(benchmark::kMillisecond);

void BM_CommonWeights(benchmark::State& state) {
  PopulationSpec spec = benchmark_spec(static_cast<int>(state.range(0)), 3);
  Dataset data = simulate(spec, 6000, 11);
  DesignSpec design;
  for (auto _ : state) {
    benchmark::DoNotOptimize(common_weights(data, design));
  }
}
BENCHMARK(BM_CommonWeights)->Arg(10)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_PopulationLambda(benchmark::State& state) {
  PopulationSpec spec = benchmark_spec(static_cast<int>(state.range(0)), 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(population_lambda(spec));
  }
}
BENCHMARK(BM_PopulationLambda)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
