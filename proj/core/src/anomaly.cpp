#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "keydyn/anomaly.hpp"
#include "keydyn/errors.hpp"
#include "keydyn/rng.hpp"

namespace keydyn::anomaly {

using json = nlohmann::json;

const char* detector_kind_name(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::iforest: return "iforest";
    case DetectorKind::ocsvm: return "ocsvm";
    case DetectorKind::robust_cov: return "robust_cov";
    case DetectorKind::lof: return "lof";
  }
  return "?";
}

DetectorKind detector_kind_from_name(const std::string& name) {
  if (name == "iforest") return DetectorKind::iforest;
  if (name == "ocsvm") return DetectorKind::ocsvm;
  if (name == "robust_cov") return DetectorKind::robust_cov;
  if (name == "lof") return DetectorKind::lof;
  throw Error(ErrorCode::InvalidConfig,
              "unknown detector kind '" + name + "'");
}

AnomalySplit split_anomaly(const std::vector<Label>& labels,
                           std::uint64_t seed, double frac_normal_train,
                           bool frac_of_normals) {
  if (!(frac_normal_train > 0.0) || frac_normal_train >= 1.0)
    throw Error(ErrorCode::InvalidConfig,
                "training fraction must lie in (0, 1)");
  std::vector<std::size_t> normals, stresses;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == Label::normal) normals.push_back(i);
    else if (labels[i] == Label::stress) stresses.push_back(i);
    else throw Error(ErrorCode::NonBinaryLabels, "unlabeled row in split");
  }
  const double base = static_cast<double>(
      frac_of_normals ? normals.size() : labels.size());
  const auto n_train =
      static_cast<std::size_t>(std::floor(frac_normal_train * base));
  if (n_train == 0 || normals.size() < n_train)
    throw Error(ErrorCode::NotEnoughNormals,
                "need " + std::to_string(n_train) + " normal sessions, have " +
                    std::to_string(normals.size()));

  Rng rng(seed);
  rng.shuffle(normals);
  AnomalySplit out;
  out.train.assign(normals.begin(),
                   normals.begin() + static_cast<long>(n_train));
  out.test.assign(normals.begin() + static_cast<long>(n_train),
                  normals.end());
  out.test.insert(out.test.end(), stresses.begin(), stresses.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

double calibrate_threshold(const std::vector<double>& train_scores,
                           double contamination) {
  if (train_scores.size() < 5)
    throw Error(ErrorCode::TooFewSamples,
                "threshold calibration needs >= 5 scores");
  if (contamination < 0.0 || contamination >= 1.0)
    throw Error(ErrorCode::InvalidConfig,
                "contamination must lie in [0, 1)");
  std::vector<double> s = train_scores;
  std::sort(s.begin(), s.end());
  const double pos =
      (1.0 - contamination) * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - std::floor(pos);
  if (lo + 1 >= s.size()) return s.back();
  return s[lo] + frac * (s[lo + 1] - s[lo]);
}

double AnyDetector::score(const std::vector<double>& x) const {
  return std::visit([&](const auto& m) { return m.score(x); }, impl);
}

double AnyDetector::threshold() const {
  return std::visit([](const auto& m) { return m.threshold; }, impl);
}

Label AnyDetector::predict(const std::vector<double>& x) const {
  return score(x) > threshold() ? Label::stress : Label::normal;
}

AnyDetector fit_detector(DetectorKind kind, const Matrix& X_train,
                         std::uint64_t seed, double contamination) {
  AnyDetector det;
  det.kind = kind;
  switch (kind) {
    case DetectorKind::iforest: {
      IForestConfig c;
      c.seed = seed;
      det.impl = fit_iforest(X_train, c);
      break;
    }
    case DetectorKind::ocsvm:
      det.impl = fit_ocsvm(X_train);
      break;
    case DetectorKind::robust_cov: {
      RobustCovConfig c;
      c.seed = seed;
      det.impl = fit_robust_cov(X_train, c);
      break;
    }
    case DetectorKind::lof: {
      LofConfig c;
      c.k = std::min<int>(c.k, static_cast<int>(X_train.size()) - 1);
      det.impl = fit_lof(X_train, c);
      break;
    }
  }
  // robust_cov keeps its chi-squared threshold when one was available
  const bool has_threshold =
      kind == DetectorKind::robust_cov &&
      std::get<RobustCovModel>(det.impl).threshold > 0.0;
  if (!has_threshold) {
    std::vector<double> scores;
    scores.reserve(X_train.size());
    for (const auto& row : X_train) scores.push_back(det.score(row));
    const double t = calibrate_threshold(scores, contamination);
    std::visit([&](auto& m) { m.threshold = t; }, det.impl);
  }
  return det;
}

metrics::ModelReport evaluate_anomaly(const AnyDetector& detector,
                                      const Matrix& X,
                                      const std::vector<Label>& y,
                                      const AnomalySplit& split) {
  if (split.test.empty())
    throw Error(ErrorCode::EmptySplit, "anomaly test split is empty");
  metrics::ModelReport rep;
  rep.model = detector_kind_name(detector.kind);
  rep.anomaly = true;
  const auto eval_subset = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return metrics::SplitMetrics{};
    std::vector<Label> truth, pred;
    truth.reserve(idx.size());
    pred.reserve(idx.size());
    for (std::size_t i : idx) {
      truth.push_back(y[i]);
      pred.push_back(detector.predict(X[i]));
    }
    return metrics::split_metrics(metrics::confusion(truth, pred));
  };
  rep.train = eval_subset(split.train);
  rep.test = eval_subset(split.test);
  return rep;
}

// ---- serialization ----

namespace {

json iso_tree_to_json(const IsoTree& t) {
  json j;
  auto& f = j["feature"] = json::array();
  auto& th = j["threshold"] = json::array();
  auto& l = j["left"] = json::array();
  auto& r = j["right"] = json::array();
  auto& n = j["n"] = json::array();
  for (const auto& nd : t.nodes) {
    f.push_back(nd.feature);
    th.push_back(nd.threshold);
    l.push_back(nd.left);
    r.push_back(nd.right);
    n.push_back(nd.n);
  }
  return j;
}

IsoTree iso_tree_from_json(const json& j) {
  IsoTree t;
  const std::size_t n = j.at("feature").size();
  for (std::size_t i = 0; i < n; ++i) {
    IsoNode nd;
    nd.feature = j.at("feature")[i].get<int>();
    nd.threshold = j.at("threshold")[i].get<double>();
    nd.left = j.at("left")[i].get<int>();
    nd.right = j.at("right")[i].get<int>();
    nd.n = j.at("n")[i].get<std::size_t>();
    t.nodes.push_back(nd);
  }
  return t;
}

}  // namespace

std::string detector_to_json(const AnyDetector& detector) {
  json j;
  j["kind"] = detector_kind_name(detector.kind);
  j["feature_order"] = detector.feature_order;
  j["pipeline_hash"] = detector.pipeline_hash;
  json cfg, params;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, IForestModel>) {
          cfg = {{"n_trees", m.config.n_trees},
                 {"subsample", m.config.subsample},
                 {"seed", m.config.seed}};
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(iso_tree_to_json(t));
          params = {{"trees", std::move(trees)},
                    {"subsample_used", m.subsample},
                    {"threshold", m.threshold}};
        } else if constexpr (std::is_same_v<T, OcsvmModel>) {
          cfg = {{"nu", m.config.nu},
                 {"gamma", m.config.gamma},
                 {"max_iter", m.config.max_iter},
                 {"tol", m.config.tol}};
          params = {{"sv", m.sv},           {"alpha", m.alpha},
                    {"gamma", m.gamma},     {"rho", m.rho},
                    {"threshold", m.threshold},
                    {"converged", m.converged},
                    {"gap", m.gap},         {"iters", m.iters}};
        } else if constexpr (std::is_same_v<T, RobustCovModel>) {
          cfg = {{"support_frac", m.config.support_frac},
                 {"n_starts", m.config.n_starts},
                 {"max_csteps", m.config.max_csteps},
                 {"quantile", m.config.quantile},
                 {"seed", m.config.seed}};
          params = {{"mean", m.mean},
                    {"cov", m.cov},
                    {"cov_inverse", m.cov_inverse},
                    {"det", m.det},
                    {"regularized", m.regularized},
                    {"threshold", m.threshold},
                    {"cstep_dets", m.cstep_dets}};
        } else {
          cfg = {{"k", m.config.k}};
          params = {{"X", m.X},
                    {"k_distance", m.k_distance},
                    {"lrd", m.lrd},
                    {"threshold", m.threshold},
                    {"capped", m.capped}};
        }
      },
      detector.impl);
  j["config"] = std::move(cfg);
  j["params"] = std::move(params);
  return j.dump(2);
}

AnyDetector detector_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedLine,
                std::string("bad detector json: ") + e.what());
  }
  try {
    AnyDetector det;
    det.kind = detector_kind_from_name(j.at("kind").get<std::string>());
    det.feature_order =
        j.at("feature_order").get<std::vector<std::string>>();
    det.pipeline_hash = j.at("pipeline_hash").get<std::string>();
    const json& cfg = j.at("config");
    const json& params = j.at("params");
    switch (det.kind) {
      case DetectorKind::iforest: {
        IForestModel m;
        m.config.n_trees = cfg.at("n_trees").get<int>();
        m.config.subsample = cfg.at("subsample").get<int>();
        m.config.seed = cfg.at("seed").get<std::uint64_t>();
        for (const auto& t : params.at("trees"))
          m.trees.push_back(iso_tree_from_json(t));
        m.subsample = params.at("subsample_used").get<std::size_t>();
        m.threshold = params.at("threshold").get<double>();
        det.impl = std::move(m);
        break;
      }
      case DetectorKind::ocsvm: {
        OcsvmModel m;
        m.config.nu = cfg.at("nu").get<double>();
        m.config.gamma = cfg.at("gamma").get<double>();
        m.config.max_iter = cfg.at("max_iter").get<int>();
        m.config.tol = cfg.at("tol").get<double>();
        m.sv = params.at("sv").get<Matrix>();
        m.alpha = params.at("alpha").get<std::vector<double>>();
        m.gamma = params.at("gamma").get<double>();
        m.rho = params.at("rho").get<double>();
        m.threshold = params.at("threshold").get<double>();
        m.converged = params.at("converged").get<bool>();
        m.gap = params.at("gap").get<double>();
        m.iters = params.at("iters").get<int>();
        det.impl = std::move(m);
        break;
      }
      case DetectorKind::robust_cov: {
        RobustCovModel m;
        m.config.support_frac = cfg.at("support_frac").get<double>();
        m.config.n_starts = cfg.at("n_starts").get<int>();
        m.config.max_csteps = cfg.at("max_csteps").get<int>();
        m.config.quantile = cfg.at("quantile").get<double>();
        m.config.seed = cfg.at("seed").get<std::uint64_t>();
        m.mean = params.at("mean").get<std::vector<double>>();
        m.cov = params.at("cov").get<Matrix>();
        m.cov_inverse = params.at("cov_inverse").get<Matrix>();
        m.det = params.at("det").get<double>();
        m.regularized = params.at("regularized").get<bool>();
        m.threshold = params.at("threshold").get<double>();
        m.cstep_dets =
            params.at("cstep_dets").get<std::vector<double>>();
        det.impl = std::move(m);
        break;
      }
      case DetectorKind::lof: {
        LofModel m;
        m.config.k = cfg.at("k").get<int>();
        m.X = params.at("X").get<Matrix>();
        m.k_distance = params.at("k_distance").get<std::vector<double>>();
        m.lrd = params.at("lrd").get<std::vector<double>>();
        m.threshold = params.at("threshold").get<double>();
        m.capped = params.at("capped").get<std::size_t>();
        det.impl = std::move(m);
        break;
      }
    }
    return det;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedLine,
                std::string("bad detector json: ") + e.what());
  }
}

}  // namespace keydyn::anomaly
