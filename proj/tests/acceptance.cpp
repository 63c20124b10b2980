// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. argv[1] names the CLI binary used by the end-to-end
// checks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "keydyn/anomaly.hpp"
#include "keydyn/errors.hpp"
#include "keydyn/events.hpp"
#include "keydyn/features.hpp"
#include "keydyn/preprocess.hpp"
#include "keydyn/rng.hpp"
#include "keydyn/supervised.hpp"
#include "keydyn/synthgen.hpp"
#include "keydyn/table.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace keydyn;
using events::Label;
using Matrix = std::vector<std::vector<double>>;

namespace {

bool all_passed = true;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void report(const std::string& label, bool pass, const std::string& detail) {
  all_passed = all_passed && pass;
  std::printf("%s: %s%s%s\n", label.c_str(), pass ? "PASS" : "FAIL",
              detail.empty() ? "" : " — ", detail.c_str());
  std::fflush(stdout);
}

void criterion(int num, const std::string& name,
               const std::function<std::pair<bool, std::string>()>& body) {
  std::pair<bool, std::string> result{false, ""};
  try {
    result = body();
  } catch (const std::exception& e) {
    result = {false, std::string("exception: ") + e.what()};
  }
  report("criterion " + std::to_string(num) + " (" + name + ")", result.first,
         result.second);
}

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

bool rel_close(double got, double want, double tol) {
  return std::abs(got - want) <= tol * std::max(1.0, std::abs(want));
}

// ---------------------------------------------------------------------------
// Criterion 1: timing identities on extracted pairs.

std::pair<bool, std::string> run_identities() {
  Timer t;
  keydyn::Rng rng(8101);
  std::size_t pairs_checked = 0;
  std::size_t bad = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    oracle::SessionOptions opts;
    opts.dirty = rep % 3 == 0;
    auto s = events::normalize_session(oracle::random_session(rng, opts));

    // Consecutive character-down pairs that actually occur in the stream.
    std::set<std::pair<std::string, std::string>> seen;
    std::string prev;
    for (const auto& e : s.events) {
      if (e.device != events::Device::keyboard ||
          e.action != events::Action::down ||
          !events::is_character_code(e.code))
        continue;
      if (!prev.empty()) seen.insert({prev, e.code});
      prev = e.code;
    }

    std::map<std::string, std::vector<double>> dwell_cache;
    const auto dwells_of = [&](const std::string& code)
        -> const std::vector<double>& {
      auto it = dwell_cache.find(code);
      if (it == dwell_cache.end())
        it = dwell_cache.emplace(code, features::dwell_times(s, code)).first;
      return it->second;
    };

    for (const auto& [first, second] : seen) {
      for (const auto& pt : features::pair_timings(s, first, second)) {
        ++pairs_checked;
        const double a = pt.flight_ms - pt.interval_ms;     // dwell of first
        const double b = pt.latency_ms - pt.up_up_ms;       // same, via ups
        const auto& dws = dwells_of(first);
        const bool member =
            std::find(dws.begin(), dws.end(), a) != dws.end();
        if (a != b || a < 0.0 || !member) ++bad;
      }
    }
  }
  const double secs = t.seconds();
  const bool pass = bad == 0 && pairs_checked > 10000 && secs < 5.0;
  return {pass, std::to_string(pairs_checked) + " pairs, " +
                    std::to_string(bad) + " violations, " + fmt(secs, 2) +
                    "s (limit 5s)"};
}

// ---------------------------------------------------------------------------
// Criterion 2: feature extraction equals a straight-line recomputation.

std::pair<bool, std::string> run_feature_oracle() {
  Timer t;
  keydyn::Rng rng(8202);
  const auto schema = features::default_schema();
  std::size_t cells = 0, mismatched = 0;
  for (int rep = 0; rep < 200; ++rep) {
    oracle::SessionOptions opts;
    opts.steps = 80 + static_cast<int>(rng.uniform_index(160));
    opts.dirty = rep % 2 == 0;
    const auto s = events::normalize_session(oracle::random_session(rng, opts));
    const auto got = features::extract_features(s, schema);
    const auto want = oracle::recompute_features(s);
    for (std::size_t i = 0; i < schema.size(); ++i) {
      ++cells;
      const auto& w = want.at(schema.at(i).name);
      const auto& g = got.values[i];
      if (w.has_value() != g.has_value() ||
          (w.has_value() && *w != *g))  // exact, including accumulation order
        ++mismatched;
    }
  }
  const double secs = t.seconds();
  const bool pass = mismatched == 0 && secs < 10.0;
  return {pass, std::to_string(cells) + " cells, " +
                    std::to_string(mismatched) + " mismatches, " +
                    fmt(secs, 2) + "s (limit 10s)"};
}

// ---------------------------------------------------------------------------
// Criterion 3: translation and scale laws.

events::Session scale_session(const events::Session& s, double a) {
  events::Session out = s;
  for (auto& e : out.events)
    e.t_ms = static_cast<std::int64_t>(
        std::llround(static_cast<double>(e.t_ms) * a));
  out.duration_ms = static_cast<std::int64_t>(
      std::llround(static_cast<double>(s.duration_ms) * a));
  return out;
}

std::pair<bool, std::string> run_scale_laws() {
  keydyn::Rng rng(8303);
  const auto schema = features::default_schema();
  std::size_t checked = 0, bad = 0;
  for (int rep = 0; rep < 50; ++rep) {
    oracle::SessionOptions opts;
    opts.even_timestamps = true;  // halving keeps integer milliseconds
    const auto s = events::normalize_session(oracle::random_session(rng, opts));
    const auto base = features::extract_features(s, schema);

    events::Session shifted = s;
    for (auto& e : shifted.events) e.t_ms += 98765;
    const auto moved = features::extract_features(shifted, schema);

    for (std::size_t i = 0; i < schema.size(); ++i) {
      ++checked;
      if (moved.values[i] != base.values[i]) ++bad;  // exact invariance
    }

    for (const double a : {0.5, 2.0}) {
      const auto scaled = features::extract_features(scale_session(s, a),
                                                     schema);
      for (std::size_t i = 0; i < schema.size(); ++i) {
        ++checked;
        const auto& b = base.values[i];
        const auto& g = scaled.values[i];
        if (b.has_value() != g.has_value()) {
          ++bad;
          continue;
        }
        if (!b.has_value()) continue;
        const double want =
            schema.at(i).kind == features::FeatureKind::time ? *b * a : *b / a;
        if (!rel_close(*g, want, 1e-9)) ++bad;
      }
    }
  }
  return {bad == 0, std::to_string(checked) + " cells over shift and a in "
                    "{0.5, 2}, " + std::to_string(bad) + " violations"};
}

// ---------------------------------------------------------------------------
// Criterion 4: chi-squared scoring against brute force; selection tie rule.

std::pair<bool, std::string> run_chi2_oracle() {
  keydyn::Rng rng(8404);
  std::size_t bad = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 4 + rng.uniform_index(17);  // 4..20
    const std::size_t d = 1 + rng.uniform_index(10);  // 1..10
    Matrix X(n, std::vector<double>(d));
    std::vector<int> is_stress(n);
    for (std::size_t i = 0; i < n; ++i) {
      is_stress[i] = i < 2 ? static_cast<int>(i) : rng.uniform01() < 0.5;
      for (auto& v : X[i])
        v = rng.uniform01() < 0.1 ? 0.0 : -5.0 + 20.0 * rng.uniform01();
    }
    const auto t = oracle::make_table(X, is_stress);
    const auto got = preprocess::chi2_scores(t, t.labels).first;
    const auto want = oracle::brute_chi2(X, is_stress);
    for (std::size_t j = 0; j < d; ++j)
      if (!rel_close(got.at("c" + std::to_string(j)), want[j], 1e-9)) ++bad;
  }

  // Tie rule: equal scores resolve to canonical (schema) order.
  const std::map<std::string, double> scores{
      {"alpha", 1.0}, {"beta", 1.0}, {"gamma", 2.0}};
  const std::vector<std::string> canon{"beta", "alpha", "gamma"};
  const auto top = preprocess::select_k_best(scores, canon, 2);
  const bool tie_ok =
      top == std::vector<std::string>{"gamma", "beta"};
  return {bad == 0 && tie_ok,
          "100 matrices, " + std::to_string(bad) +
              " score mismatches, tie rule " + (tie_ok ? "ok" : "broken")};
}

// ---------------------------------------------------------------------------
// Criterion 5: gradient checks.

std::pair<bool, std::string> run_gradient_checks() {
  keydyn::Rng rng(8505);
  const double h = 1e-5;
  double worst = 0.0;

  for (int rep = 0; rep < 20; ++rep) {  // logistic regression
    const std::size_t n = 4 + rng.uniform_index(12);
    const std::size_t d = 1 + rng.uniform_index(5);
    auto [X, is_stress] = oracle::blobs(rng, n / 2 + 1, n / 2 + 1, d, 1.0);
    std::vector<double> y01(is_stress.begin(), is_stress.end());
    std::vector<double> w(d);
    for (auto& v : w) v = rng.normal() * 0.7;
    const double b = rng.normal() * 0.7;
    const double l2 = rep % 2 == 0 ? 1e-3 : 1e-2;
    const auto g = supervised::logreg_loss_grad(w, b, X, y01, l2);
    for (std::size_t j = 0; j <= d; ++j) {
      auto wp = w, wm = w;
      double bp = b, bm = b;
      if (j < d) {
        wp[j] += h;
        wm[j] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double fd =
          (supervised::logreg_loss_grad(wp, bp, X, y01, l2).loss -
           supervised::logreg_loss_grad(wm, bm, X, y01, l2).loss) /
          (2 * h);
      const double an = j < d ? g.grad_w[j] : g.grad_b;
      worst = std::max(worst,
                       std::abs(fd - an) / std::max(1.0, std::abs(an)));
    }
  }

  for (int rep = 0; rep < 20; ++rep) {  // multilayer perceptron
    const std::size_t d = 2 + rng.uniform_index(3);
    auto [X, is_stress] = oracle::blobs(rng, 5, 5, d, 1.0);
    std::vector<double> y01(is_stress.begin(), is_stress.end());
    const std::vector<std::size_t> sizes{d, 3 + rng.uniform_index(3), 1};
    std::vector<double> params(supervised::mlp_param_count(sizes));
    for (auto& p : params) p = rng.normal() * 0.5;
    const auto [loss, grad] = supervised::mlp_loss_grad(sizes, params, X, y01);
    (void)loss;
    for (std::size_t j = 0; j < params.size(); ++j) {
      auto pp = params, pm = params;
      pp[j] += h;
      pm[j] -= h;
      const double fd = (supervised::mlp_loss(sizes, pp, X, y01) -
                         supervised::mlp_loss(sizes, pm, X, y01)) /
                        (2 * h);
      worst = std::max(worst,
                       std::abs(fd - grad[j]) /
                           std::max(1.0, std::abs(grad[j])));
    }
  }

  return {worst < 1e-5, "max relative error " + fmt(worst, 9) +
                            " over 20+20 instances (limit 1e-5)"};
}

// ---------------------------------------------------------------------------
// Criterion 6: kNN and LOF brute-force equivalence.

std::pair<bool, std::string> run_neighbour_oracles() {
  keydyn::Rng rng(8606);
  std::size_t knn_bad = 0;
  for (int rep = 0; rep < 15; ++rep) {
    const std::size_t half = 4 + rng.uniform_index(22);  // n up to 50
    const std::size_t d = 2 + rng.uniform_index(3);
    auto [X, is_stress] = oracle::blobs(rng, half, half, d, 0.8);
    std::vector<Label> y;
    for (int s : is_stress)
      y.push_back(s ? Label::stress : Label::normal);
    const int ks[] = {1, 3, 5, 7};
    const int k = ks[rep % 4];
    const auto m = supervised::train_knn(X, y, {.k = k});
    for (int q = 0; q < 20; ++q) {
      std::vector<double> probe(d);
      for (auto& v : probe) v = 2.0 * rng.normal();
      const int want = oracle::brute_knn(X, is_stress, k, probe);
      if (m.predict(probe) != (want ? Label::stress : Label::normal))
        ++knn_bad;
    }
  }

  std::size_t lof_bad = 0;
  for (int rep = 0; rep < 15; ++rep) {
    const std::size_t n = 10 + rng.uniform_index(31);  // n up to 40
    const std::size_t d = 2 + rng.uniform_index(2);
    Matrix X(n, std::vector<double>(d));
    for (auto& row : X)
      for (auto& v : row) v = rng.normal();
    const int k =
        2 + static_cast<int>(rng.uniform_index(std::min<std::size_t>(8, n - 2)));
    const auto m = anomaly::fit_lof(X, {.k = k});
    const auto fit_scores = oracle::brute_lof_fit(X, k);
    for (std::size_t i = 0; i < n; ++i)
      if (!rel_close(m.score(X[i]), fit_scores[i], 1e-9)) ++lof_bad;
    for (int q = 0; q < 10; ++q) {
      std::vector<double> probe(d);
      for (auto& v : probe) v = 2.5 * rng.normal();
      if (!rel_close(m.score(probe), oracle::brute_lof_query(X, k, probe),
                     1e-9))
        ++lof_bad;
    }
  }

  return {knn_bad == 0 && lof_bad == 0,
          "knn mismatches " + std::to_string(knn_bad) + ", lof mismatches " +
              std::to_string(lof_bad)};
}

// ---------------------------------------------------------------------------
// Criterion 7: OC-SVM dual feasibility and tiny-problem optimality.

std::pair<bool, std::string> run_ocsvm_dual() {
  keydyn::Rng rng(8707);
  std::size_t infeasible = 0;
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t n = 3 + rng.uniform_index(38);
    Matrix X(n, std::vector<double>(3));
    for (auto& row : X)
      for (auto& v : row) v = rng.normal();
    anomaly::OcsvmConfig cfg;
    cfg.nu = 0.05 + 0.95 * rng.uniform01();
    const auto m = anomaly::fit_ocsvm(X, cfg);
    double sum = 0.0;
    const double box = 1.0 / (cfg.nu * static_cast<double>(n));
    bool in_box = true;
    for (double a : m.alpha) {
      in_box = in_box && a >= 0.0 && a <= box + 1e-12;
      sum += a;
    }
    if (!in_box || std::abs(sum - 1.0) >= 1e-9) ++infeasible;
  }

  double worst_gap = 0.0;
  for (int rep = 0; rep < 9; ++rep) {
    const std::size_t n = 4 + rep % 3;  // 4..6
    Matrix X(n, std::vector<double>(2));
    for (auto& row : X)
      for (auto& v : row) v = rng.normal();
    anomaly::OcsvmConfig cfg;
    const double nus[] = {0.3, 0.6, 1.0};
    cfg.nu = nus[rep % 3];
    const auto m = anomaly::fit_ocsvm(X, cfg);
    oracle::Matrix K(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        K[i][j] = anomaly::rbf_kernel(X[i], X[j], m.gamma);
    const double got = oracle::ocsvm_objective(K, m.alpha);
    const double best = oracle::ocsvm_best_objective(K, cfg.nu, 24);
    worst_gap = std::max(worst_gap, got - best);
  }

  return {infeasible == 0 && worst_gap < 1e-6,
          std::to_string(infeasible) + " infeasible fits of 25; worst "
          "objective gap " + fmt(worst_gap, 9) + " (limit 1e-6)"};
}

// ---------------------------------------------------------------------------
// Criterion 8: FAST-MCD monotone C-steps and contamination recovery.

std::pair<bool, std::string> run_mcd_recovery() {
  std::size_t det_violations = 0;
  int robust_ok = 0;
  double worst_classical = 1e9;
  for (std::uint64_t seed = 42; seed < 52; ++seed) {
    keydyn::Rng rng(seed);
    Matrix X(400, std::vector<double>(2));
    for (auto& row : X)
      for (auto& v : row) v = rng.normal();
    for (int i = 0; i < 100; ++i)  // 20% planted far outliers
      X.push_back({8.0 + 0.1 * rng.normal(), 8.0 + 0.1 * rng.normal()});

    anomaly::RobustCovConfig cfg;
    cfg.seed = seed;
    const auto m = anomaly::fit_robust_cov(X, cfg);
    for (std::size_t i = 1; i < m.cstep_dets.size(); ++i)
      if (m.cstep_dets[i] > m.cstep_dets[i - 1] + 1e-12) ++det_violations;
    if (std::hypot(m.mean[0], m.mean[1]) < 0.2) ++robust_ok;

    std::vector<std::size_t> all(X.size());
    std::iota(all.begin(), all.end(), 0);
    const auto classical = anomaly::mean_cov(X, all);
    worst_classical = std::min(
        worst_classical, std::hypot(classical.mean[0], classical.mean[1]));
  }
  const bool pass =
      det_violations == 0 && robust_ok >= 9 && worst_classical > 1.0;
  return {pass, "robust mean within 0.2 on " + std::to_string(robust_ok) +
                    "/10 seeds (need 9); " + std::to_string(det_violations) +
                    " c-step det increases; classical mean off by >= " +
                    fmt(worst_classical, 2)};
}

// ---------------------------------------------------------------------------
// Criteria 9-11 share the dataset -> reduced-matrix protocol.

struct SeedMatrix {
  Matrix X;
  std::vector<Label> y;
};

SeedMatrix reduced_for(std::uint64_t seed, double separation) {
  synthgen::DatasetConfig cfg;
  cfg.separation = separation;
  cfg.seed = seed;
  const auto ds = synthgen::generate_dataset(cfg);
  const auto schema = features::default_schema();
  const auto t = table::extract_table(ds.sessions, schema);
  preprocess::PipelineConfig pc;  // defaults: k = 3
  const auto fit = preprocess::fit_pipeline(t, pc);
  SeedMatrix out;
  out.y = fit.reduced.labels;
  out.X.resize(fit.reduced.n_rows());
  for (std::size_t i = 0; i < fit.reduced.n_rows(); ++i)
    for (const auto& cell : fit.reduced.rows[i]) out.X[i].push_back(*cell);
  return out;
}

std::vector<SeedMatrix>& shared_datasets() {  // separation 1.6, seeds 42..51
  static std::vector<SeedMatrix> cache;
  if (cache.empty())
    for (std::uint64_t seed = 42; seed < 52; ++seed)
      cache.push_back(reduced_for(seed, 1.6));
  return cache;
}

std::pair<bool, std::string> run_supervised_floors() {
  Timer t;
  int seeds_ok = 0;
  double worst_rf = 1.0, worst_any = 1.0;
  for (std::size_t i = 0; i < 10; ++i) {
    const std::uint64_t seed = 42 + i;
    const auto& data = shared_datasets()[i];
    const auto sp = supervised::split_dataset(data.y, seed);
    Matrix Xtr;
    std::vector<Label> ytr;
    for (auto r : sp.train) {
      Xtr.push_back(data.X[r]);
      ytr.push_back(data.y[r]);
    }
    double rf_acc = 0.0, min_acc = 1.0;
    for (auto kind :
         {supervised::ModelKind::logreg, supervised::ModelKind::knn,
          supervised::ModelKind::random_forest, supervised::ModelKind::gboost,
          supervised::ModelKind::mlp}) {
      const auto model = supervised::fit_model(kind, Xtr, ytr, seed);
      std::size_t hit = 0;
      for (auto r : sp.test) hit += model.predict(data.X[r]) == data.y[r];
      const double acc =
          static_cast<double>(hit) / static_cast<double>(sp.test.size());
      if (kind == supervised::ModelKind::random_forest) rf_acc = acc;
      min_acc = std::min(min_acc, acc);
    }
    worst_rf = std::min(worst_rf, rf_acc);
    worst_any = std::min(worst_any, min_acc);
    if (rf_acc >= 0.85 && min_acc >= 0.70) ++seeds_ok;
  }
  const double secs = t.seconds();
  const bool pass = seeds_ok >= 8 && secs < 60.0;
  return {pass, std::to_string(seeds_ok) +
                    "/10 seeds ok (need 8): rf >= 0.85 (worst " +
                    fmt(worst_rf, 2) + "), all >= 0.70 (worst " +
                    fmt(worst_any, 2) + "), " + fmt(secs, 1) +
                    "s (limit 60s)"};
}

double detector_accuracy(const anomaly::AnyDetector& det, const Matrix& X,
                         const std::vector<Label>& y,
                         const std::vector<std::size_t>& test) {
  std::size_t hit = 0;
  for (auto r : test) hit += det.predict(X[r]) == y[r];
  return static_cast<double>(hit) / static_cast<double>(test.size());
}

std::pair<bool, std::string> run_anomaly_floors() {
  Timer t;
  int seeds_ok = 0;
  double ocsvm_mean = 0.0;
  double worst_if = 1.0, worst_lof = 1.0, worst_rc = 1.0;
  for (std::size_t i = 0; i < 10; ++i) {
    const std::uint64_t seed = 42 + i;
    const auto& data = shared_datasets()[i];
    const auto sp = anomaly::split_anomaly(data.y, seed);
    Matrix Xtr;
    for (auto r : sp.train) Xtr.push_back(data.X[r]);
    std::map<anomaly::DetectorKind, double> acc;
    for (auto kind :
         {anomaly::DetectorKind::iforest, anomaly::DetectorKind::ocsvm,
          anomaly::DetectorKind::robust_cov, anomaly::DetectorKind::lof}) {
      const auto det = anomaly::fit_detector(kind, Xtr, seed);
      acc[kind] = detector_accuracy(det, data.X, data.y, sp.test);
    }
    ocsvm_mean += acc[anomaly::DetectorKind::ocsvm] / 10.0;
    worst_if = std::min(worst_if, acc[anomaly::DetectorKind::iforest]);
    worst_lof = std::min(worst_lof, acc[anomaly::DetectorKind::lof]);
    worst_rc = std::min(worst_rc, acc[anomaly::DetectorKind::robust_cov]);
    if (acc[anomaly::DetectorKind::iforest] >= 0.90 &&
        acc[anomaly::DetectorKind::lof] >= 0.90 &&
        acc[anomaly::DetectorKind::robust_cov] >= 0.80)
      ++seeds_ok;
  }
  const double secs = t.seconds();
  const bool pass = seeds_ok >= 8 && secs < 60.0;
  // The OC-SVM failure mode is documented, not asserted: with one tight
  // normal training cloud it often scores everything as its own class, so
  // its not-stress precision collapses (mean accuracy reported here).
  return {pass, std::to_string(seeds_ok) +
                    "/10 seeds ok (need 8): iforest/lof >= 0.90 (worst " +
                    fmt(worst_if, 2) + "/" + fmt(worst_lof, 2) +
                    "), robust_cov >= 0.80 (worst " + fmt(worst_rc, 2) +
                    "); ocsvm unasserted mean " + fmt(ocsvm_mean, 2) + ", " +
                    fmt(secs, 1) + "s (limit 60s)"};
}

std::pair<bool, std::string> run_null_separation() {
  std::map<anomaly::DetectorKind, double> mean_acc;
  double mean_base = 0.0;
  for (std::uint64_t seed = 42; seed < 52; ++seed) {
    const auto data = reduced_for(seed, 1.0);
    const auto sp = anomaly::split_anomaly(data.y, seed);
    Matrix Xtr;
    for (auto r : sp.train) Xtr.push_back(data.X[r]);
    std::size_t stress = 0;
    for (auto r : sp.test) stress += data.y[r] == Label::stress;
    const double frac =
        static_cast<double>(stress) / static_cast<double>(sp.test.size());
    mean_base += std::max(frac, 1.0 - frac) / 10.0;
    for (auto kind :
         {anomaly::DetectorKind::iforest, anomaly::DetectorKind::ocsvm,
          anomaly::DetectorKind::robust_cov, anomaly::DetectorKind::lof}) {
      const auto det = anomaly::fit_detector(kind, Xtr, seed);
      mean_acc[kind] += detector_accuracy(det, data.X, data.y, sp.test) / 10.0;
    }
  }
  double worst = 0.0;
  for (const auto& [kind, acc] : mean_acc) {
    (void)kind;
    worst = std::max(worst, acc);
  }
  const bool pass = worst <= mean_base + 0.15;
  return {pass, "highest detector mean accuracy " + fmt(worst, 3) +
                    " vs base rate " + fmt(mean_base, 3) + " + 0.15"};
}

// ---------------------------------------------------------------------------
// Criterion 12 + score contract: drive the installed CLI end to end.

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = "\"" + cli + "\" " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(entry.path(), root).string()] = ss.str();
  }
  return out;
}

std::pair<bool, std::string> run_cli_determinism(const std::string& cli) {
  const fs::path base = fs::temp_directory_path() / "keydyn_acceptance";
  fs::remove_all(base);
  fs::create_directories(base);
  const fs::path run_dir = base / "run";
  const fs::path cfg_path = base / "config.json";
  {
    json cfg;
    cfg["out"] = run_dir.string();
    cfg["seed"] = 42;
    std::ofstream(cfg_path) << cfg.dump(2) << "\n";
  }
  const std::string common = "--config \"" + cfg_path.string() + "\" ";
  const auto chain = {"synth", "extract", "preprocess", "train", "eval"};

  for (const char* cmd : chain)
    if (run_cli(cli, common + cmd) != 0)
      return {false, std::string("first `") + cmd + "` run failed"};
  const auto first = snapshot_tree(run_dir);

  for (const char* cmd : chain)
    if (run_cli(cli, common + cmd) != 0)
      return {false, std::string("second `") + cmd + "` run failed"};
  const auto second = snapshot_tree(run_dir);

  if (first.size() != second.size())
    return {false, "artifact sets differ: " + std::to_string(first.size()) +
                       " vs " + std::to_string(second.size()) + " files"};
  std::size_t differing = 0;
  std::string example;
  for (const auto& [path, bytes] : first) {
    const auto it = second.find(path);
    if (it == second.end() || it->second != bytes) {
      ++differing;
      if (example.empty()) example = path;
    }
  }
  if (differing > 0)
    return {false, std::to_string(differing) +
                       " artifacts differ between runs (first: " + example +
                       ")"};
  return {true, std::to_string(first.size()) +
                    " artifacts byte-identical across two full runs"};
}

std::pair<bool, std::string> run_score_contract(const std::string& cli) {
  // Reuses the criterion-12 artifacts: models trained on the default
  // 50+50, separation-1.6 dataset.
  const fs::path base = fs::temp_directory_path() / "keydyn_acceptance";
  const fs::path run_dir = base / "run";
  const fs::path cfg_path = base / "config.json";
  const fs::path stress_dir = run_dir / "sessions" / "stress";
  if (!fs::exists(stress_dir))
    return {false, "no stress sessions on disk (criterion 12 must run first)"};
  fs::path session;
  for (const auto& entry : fs::directory_iterator(stress_dir)) {
    if (session.empty() || entry.path() < session) session = entry.path();
  }

  const fs::path verdict_path = base / "verdict.json";
  const std::string cmd = "\"" + cli + "\" --config \"" + cfg_path.string() +
                          "\" score \"" + session.string() + "\" > \"" +
                          verdict_path.string() + "\" 2>/dev/null";
  if (std::system(cmd.c_str()) != 0) return {false, "score command failed"};

  std::ifstream in(verdict_path);
  json verdict;
  try {
    in >> verdict;
  } catch (const json::exception& e) {
    return {false, std::string("verdict is not JSON: ") + e.what()};
  }
  for (const char* field : {"session_id", "config_hash", "pipeline_hash",
                            "features", "anomaly", "supervised",
                            "stress_votes", "detectors", "decision"}) {
    if (!verdict.contains(field))
      return {false, std::string("verdict lacks \"") + field + "\""};
  }
  if (verdict.at("detectors").get<int>() != 4 ||
      verdict.at("supervised").size() != 5 ||
      verdict.at("features").size() != 3)
    return {false, "verdict model/feature counts off"};
  for (const auto& item : verdict.at("anomaly").items()) {
    for (const char* key : {"score", "threshold", "decision"})
      if (!item.value().contains(key))
        return {false, "anomaly entry lacks \"" + std::string(key) + "\""};
  }
  const int votes = verdict.at("stress_votes").get<int>();
  const std::string decision = verdict.at("decision").get<std::string>();
  const bool pass = decision == "stress" && 2 * votes > 4;
  return {pass, "stress session scored: decision " + decision + ", " +
                    std::to_string(votes) + "/4 detector votes"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";

  criterion(1, "timing identities", run_identities);
  criterion(2, "feature oracle", run_feature_oracle);
  criterion(3, "scale and translation laws", run_scale_laws);
  criterion(4, "chi-squared oracle and tie rule", run_chi2_oracle);
  criterion(5, "gradient checks", run_gradient_checks);
  criterion(6, "knn and lof brute-force equivalence", run_neighbour_oracles);
  criterion(7, "oc-svm dual feasibility and optimality", run_ocsvm_dual);
  criterion(8, "fast-mcd recovery", run_mcd_recovery);
  criterion(9, "supervised accuracy floors", run_supervised_floors);
  criterion(10, "anomaly accuracy floors", run_anomaly_floors);
  criterion(11, "null-separation control", run_null_separation);
  if (cli.empty()) {
    report("criterion 12 (end-to-end determinism)", false,
           "usage: acceptance <path-to-cli>");
    report("score-contract", false, "usage: acceptance <path-to-cli>");
  } else {
    criterion(12, "end-to-end determinism",
              [&] { return run_cli_determinism(cli); });
    std::pair<bool, std::string> score{false, ""};
    try {
      score = run_score_contract(cli);
    } catch (const std::exception& e) {
      score = {false, std::string("exception: ") + e.what()};
    }
    report("score-contract", score.first, score.second);
  }

  return all_passed ? 0 : 1;
}
