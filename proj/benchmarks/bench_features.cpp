// Hot paths of the ingest side: session synthesis, normalization and the
// per-session feature sweep over the full 189-column schema.

#include <benchmark/benchmark.h>

#include "keydyn/events.hpp"
#include "keydyn/features.hpp"
#include "keydyn/synthgen.hpp"
#include "keydyn/table.hpp"

namespace {

keydyn::events::Session make_session(int target_keys, std::uint64_t seed) {
  return keydyn::synthgen::generate_session(keydyn::synthgen::default_profile(),
                                            false, target_keys, seed);
}

void BM_GenerateSession(benchmark::State& state) {
  const int keys = static_cast<int>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    auto session = make_session(keys, seed++);
    benchmark::DoNotOptimize(session.events.data());
  }
  state.SetItemsProcessed(state.iterations() * keys);
}
BENCHMARK(BM_GenerateSession)->Arg(500)->Arg(2000);

void BM_NormalizeSession(benchmark::State& state) {
  const auto session = make_session(static_cast<int>(state.range(0)), 7);
  for (auto _ : state) {
    auto repaired = keydyn::events::normalize_session(session);
    benchmark::DoNotOptimize(repaired.events.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(session.events.size()));
}
BENCHMARK(BM_NormalizeSession)->Arg(500)->Arg(2000);

void BM_ExtractFeatures(benchmark::State& state) {
  const auto schema = keydyn::features::default_schema();
  const auto session = make_session(static_cast<int>(state.range(0)), 11);
  for (auto _ : state) {
    auto fv = keydyn::features::extract_features(session, schema);
    benchmark::DoNotOptimize(fv.values.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(schema.size()));
}
BENCHMARK(BM_ExtractFeatures)->Arg(500)->Arg(2000);

void BM_ExtractTable(benchmark::State& state) {
  const auto schema = keydyn::features::default_schema();
  std::vector<keydyn::events::Session> sessions;
  for (int i = 0; i < state.range(0); ++i) {
    sessions.push_back(make_session(500, 100 + static_cast<std::uint64_t>(i)));
  }
  for (auto _ : state) {
    auto table = keydyn::table::extract_table(sessions, schema);
    benchmark::DoNotOptimize(table.rows.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ExtractTable)->Arg(20);

}  // namespace

BENCHMARK_MAIN();
