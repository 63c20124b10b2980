// Model-side hot paths: detector fits, per-sample scoring and the chi2
// selection sweep, all on matrices shaped like the real pipeline output.

#include <benchmark/benchmark.h>

#include <vector>

#include "keydyn/anomaly.hpp"
#include "keydyn/preprocess.hpp"
#include "keydyn/rng.hpp"
#include "keydyn/supervised.hpp"

namespace {

using Matrix = std::vector<std::vector<double>>;

Matrix gaussian_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  keydyn::Rng rng(seed);
  Matrix X(n, std::vector<double>(d));
  for (auto& row : X) {
    for (auto& v : row) v = rng.normal();
  }
  return X;
}

std::vector<keydyn::events::Label> half_labels(std::size_t n) {
  std::vector<keydyn::events::Label> y(n, keydyn::events::Label::normal);
  for (std::size_t i = n / 2; i < n; ++i) y[i] = keydyn::events::Label::stress;
  return y;
}

void BM_FitIForest(benchmark::State& state) {
  const auto X = gaussian_matrix(static_cast<std::size_t>(state.range(0)), 3, 1);
  for (auto _ : state) {
    auto model = keydyn::anomaly::fit_iforest(X, {100, 0, 42});
    benchmark::DoNotOptimize(model.trees.data());
  }
}
BENCHMARK(BM_FitIForest)->Arg(33)->Arg(256);

void BM_ScoreIForest(benchmark::State& state) {
  const auto X = gaussian_matrix(256, 3, 1);
  const auto model = keydyn::anomaly::fit_iforest(X, {100, 0, 42});
  const std::vector<double> x = {0.5, -0.25, 1.5};
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.score(x));
  }
}
BENCHMARK(BM_ScoreIForest);

void BM_FitRobustCov(benchmark::State& state) {
  const auto X = gaussian_matrix(static_cast<std::size_t>(state.range(0)), 3, 2);
  for (auto _ : state) {
    auto model = keydyn::anomaly::fit_robust_cov(X, {0.75, 50, 100, 0.975, 42});
    benchmark::DoNotOptimize(model.det);
  }
}
BENCHMARK(BM_FitRobustCov)->Arg(33)->Arg(100);

void BM_FitLof(benchmark::State& state) {
  const auto X = gaussian_matrix(static_cast<std::size_t>(state.range(0)), 3, 3);
  for (auto _ : state) {
    auto model = keydyn::anomaly::fit_lof(X, {10});
    benchmark::DoNotOptimize(model.lrd.data());
  }
}
BENCHMARK(BM_FitLof)->Arg(33)->Arg(200);

void BM_FitOcsvm(benchmark::State& state) {
  const auto X = gaussian_matrix(static_cast<std::size_t>(state.range(0)), 3, 4);
  for (auto _ : state) {
    auto model = keydyn::anomaly::fit_ocsvm(X, {});
    benchmark::DoNotOptimize(model.alpha.data());
  }
}
BENCHMARK(BM_FitOcsvm)->Arg(33)->Arg(100);

void BM_FitRandomForest(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  auto X = gaussian_matrix(n, 3, 5);
  const auto y = half_labels(n);
  for (std::size_t i = n / 2; i < n; ++i) {
    for (auto& v : X[i]) v += 3.0;  // separate the classes
  }
  for (auto _ : state) {
    auto model = keydyn::supervised::train_random_forest(X, y, {});
    benchmark::DoNotOptimize(model.trees.data());
  }
}
BENCHMARK(BM_FitRandomForest)->Arg(49)->Arg(200);

void BM_Chi2Scores(benchmark::State& state) {
  const std::size_t n = 100;
  const std::size_t d = static_cast<std::size_t>(state.range(0));
  keydyn::Rng rng(6);
  keydyn::table::FeatureTable t;
  for (std::size_t j = 0; j < d; ++j) {
    t.columns.push_back({"f" + std::to_string(j),
                         keydyn::features::FeatureGroup::global,
                         keydyn::features::FeatureKind::time});
  }
  const auto y = half_labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.session_ids.push_back("s" + std::to_string(i));
    t.labels.push_back(y[i]);
    std::vector<std::optional<double>> row(d);
    for (auto& cell : row) cell = rng.uniform(0.0, 100.0);
    t.rows.push_back(row);
  }
  for (auto _ : state) {
    auto scored = keydyn::preprocess::chi2_scores(t, y);
    benchmark::DoNotOptimize(scored.first.size());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d));
}
BENCHMARK(BM_Chi2Scores)->Arg(189);

}  // namespace

BENCHMARK_MAIN();
