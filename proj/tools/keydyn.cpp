// keydyn: end-to-end driver for the keystroke-dynamics stress toolkit.
//
// Commands: synth | extract | preprocess | train | eval | score | report.
// Every stage reads its inputs from the output directory of the previous
// one, so stages are individually resumable. All artifacts embed the hash
// of the effective run configuration; eval and score refuse models whose
// pipeline hash does not match the pipeline parameters on disk.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 model error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "keydyn/anomaly.hpp"
#include "keydyn/detail/textio.hpp"
#include "keydyn/errors.hpp"
#include "keydyn/events.hpp"
#include "keydyn/features.hpp"
#include "keydyn/metrics.hpp"
#include "keydyn/preprocess.hpp"
#include "keydyn/supervised.hpp"
#include "keydyn/synthgen.hpp"
#include "keydyn/table.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace keydyn;

namespace {

const std::vector<std::string> kSupervisedNames = {
    "logreg", "knn", "random_forest", "gboost", "mlp"};
const std::vector<std::string> kDetectorNames = {"iforest", "ocsvm",
                                                 "robust_cov", "lof"};

// ---------------------------------------------------------------------------
// Run configuration: one JSON document drives every command; command-line
// flags override individual fields. The FNV-1a hash of the canonical dump
// is stamped into every artifact.

struct RunConfig {
  std::uint64_t seed = 42;
  std::string out = "out";
  std::string data;  // session dir for extract; empty means <out>/sessions
  synthgen::DatasetConfig synth;
  synthgen::TypistProfile profile = synthgen::default_profile();
  preprocess::PipelineConfig pipeline;
  double train_frac = 0.49;
  double val_frac = 0.21;
  double frac_normal_train = 0.33;
  bool frac_of_normals = false;
  std::vector<std::string> supervised_models = kSupervisedNames;
  std::vector<std::string> anomaly_models = kDetectorNames;
  bool grid_search = true;
  double contamination = 0.05;
  bool undefined_as_zero = false;

  RunConfig() { synth.separation = 1.6; }
};

json config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["data"] = c.data;
  j["synth"] = {{"n_normal", c.synth.n_normal},
                {"n_stress", c.synth.n_stress},
                {"separation", c.synth.separation},
                {"participants", c.synth.participants},
                {"participant_sigma", c.synth.participant_sigma},
                {"target_keys", c.synth.target_keys}};
  j["profile"] = {{"dwell_mean_ms", c.profile.dwell_mean_ms},
                  {"dwell_sigma", c.profile.dwell_sigma},
                  {"interval_mean_ms", c.profile.interval_mean_ms},
                  {"interval_sigma", c.profile.interval_sigma},
                  {"p_roll", c.profile.p_roll},
                  {"special_key_rates", c.profile.special_key_rates},
                  {"left_click_rate", c.profile.left_click_rate},
                  {"right_click_rate", c.profile.right_click_rate},
                  {"stress_error_factor", c.profile.stress_error_factor}};
  j["pipeline"] = {
      {"min_sessions", c.pipeline.min_sessions},
      {"min_std_time", c.pipeline.min_std_time},
      {"min_std_freq", c.pipeline.min_std_freq},
      {"drop_in_either_class", c.pipeline.drop_in_either_class},
      {"k", c.pipeline.k},
      {"impute", c.pipeline.inference_policy ==
                         preprocess::ImputePolicy::normal_median
                     ? "normal_median"
                     : "pooled_median"}};
  j["split"] = {{"train_frac", c.train_frac}, {"val_frac", c.val_frac}};
  j["anomaly_split"] = {{"frac_normal_train", c.frac_normal_train},
                        {"frac_of_normals", c.frac_of_normals}};
  j["models"] = {{"supervised", c.supervised_models},
                 {"anomaly", c.anomaly_models}};
  j["grid_search"] = c.grid_search;
  j["contamination"] = c.contamination;
  j["undefined_as_zero"] = c.undefined_as_zero;
  return j;
}

void expect_keys(const json& j, const std::vector<std::string>& allowed,
                 const std::string& where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const auto& k : allowed) known = known || item.key() == k;
    if (!known) {
      throw Error(ErrorCode::ConfigInvalid,
                  "unknown key \"" + item.key() + "\" in " + where);
    }
  }
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  expect_keys(j,
              {"seed", "out", "data", "synth", "profile", "pipeline", "split",
               "anomaly_split", "models", "grid_search", "contamination",
               "undefined_as_zero"},
              "config");
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out")) c.out = j.at("out").get<std::string>();
  if (j.contains("data")) c.data = j.at("data").get<std::string>();
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    expect_keys(s,
                {"n_normal", "n_stress", "separation", "participants",
                 "participant_sigma", "target_keys"},
                "config.synth");
    if (s.contains("n_normal")) c.synth.n_normal = s.at("n_normal").get<int>();
    if (s.contains("n_stress")) c.synth.n_stress = s.at("n_stress").get<int>();
    if (s.contains("separation"))
      c.synth.separation = s.at("separation").get<double>();
    if (s.contains("participants"))
      c.synth.participants = s.at("participants").get<int>();
    if (s.contains("participant_sigma"))
      c.synth.participant_sigma = s.at("participant_sigma").get<double>();
    if (s.contains("target_keys"))
      c.synth.target_keys = s.at("target_keys").get<int>();
  }
  if (j.contains("profile")) {
    const json& p = j.at("profile");
    expect_keys(p,
                {"dwell_mean_ms", "dwell_sigma", "interval_mean_ms",
                 "interval_sigma", "p_roll", "special_key_rates",
                 "left_click_rate", "right_click_rate", "stress_error_factor"},
                "config.profile");
    if (p.contains("dwell_mean_ms"))
      c.profile.dwell_mean_ms = p.at("dwell_mean_ms").get<double>();
    if (p.contains("dwell_sigma"))
      c.profile.dwell_sigma = p.at("dwell_sigma").get<double>();
    if (p.contains("interval_mean_ms"))
      c.profile.interval_mean_ms = p.at("interval_mean_ms").get<double>();
    if (p.contains("interval_sigma"))
      c.profile.interval_sigma = p.at("interval_sigma").get<double>();
    if (p.contains("p_roll")) c.profile.p_roll = p.at("p_roll").get<double>();
    if (p.contains("special_key_rates"))
      c.profile.special_key_rates =
          p.at("special_key_rates").get<std::map<std::string, double>>();
    if (p.contains("left_click_rate"))
      c.profile.left_click_rate = p.at("left_click_rate").get<double>();
    if (p.contains("right_click_rate"))
      c.profile.right_click_rate = p.at("right_click_rate").get<double>();
    if (p.contains("stress_error_factor"))
      c.profile.stress_error_factor =
          p.at("stress_error_factor").get<double>();
  }
  if (j.contains("pipeline")) {
    const json& p = j.at("pipeline");
    expect_keys(p,
                {"min_sessions", "min_std_time", "min_std_freq",
                 "drop_in_either_class", "k", "impute"},
                "config.pipeline");
    if (p.contains("min_sessions"))
      c.pipeline.min_sessions = p.at("min_sessions").get<int>();
    if (p.contains("min_std_time"))
      c.pipeline.min_std_time = p.at("min_std_time").get<double>();
    if (p.contains("min_std_freq"))
      c.pipeline.min_std_freq = p.at("min_std_freq").get<double>();
    if (p.contains("drop_in_either_class"))
      c.pipeline.drop_in_either_class =
          p.at("drop_in_either_class").get<bool>();
    if (p.contains("k")) c.pipeline.k = p.at("k").get<int>();
    if (p.contains("impute")) {
      const std::string name = p.at("impute").get<std::string>();
      if (name == "normal_median") {
        c.pipeline.inference_policy = preprocess::ImputePolicy::normal_median;
      } else if (name == "pooled_median") {
        c.pipeline.inference_policy = preprocess::ImputePolicy::pooled_median;
      } else {
        throw Error(ErrorCode::ConfigInvalid, "unknown impute policy " + name);
      }
    }
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    expect_keys(s, {"train_frac", "val_frac"}, "config.split");
    if (s.contains("train_frac"))
      c.train_frac = s.at("train_frac").get<double>();
    if (s.contains("val_frac")) c.val_frac = s.at("val_frac").get<double>();
  }
  if (j.contains("anomaly_split")) {
    const json& s = j.at("anomaly_split");
    expect_keys(s, {"frac_normal_train", "frac_of_normals"},
                "config.anomaly_split");
    if (s.contains("frac_normal_train"))
      c.frac_normal_train = s.at("frac_normal_train").get<double>();
    if (s.contains("frac_of_normals"))
      c.frac_of_normals = s.at("frac_of_normals").get<bool>();
  }
  if (j.contains("models")) {
    const json& m = j.at("models");
    expect_keys(m, {"supervised", "anomaly"}, "config.models");
    if (m.contains("supervised"))
      c.supervised_models =
          m.at("supervised").get<std::vector<std::string>>();
    if (m.contains("anomaly"))
      c.anomaly_models = m.at("anomaly").get<std::vector<std::string>>();
  }
  if (j.contains("grid_search")) c.grid_search = j.at("grid_search").get<bool>();
  if (j.contains("contamination"))
    c.contamination = j.at("contamination").get<double>();
  if (j.contains("undefined_as_zero"))
    c.undefined_as_zero = j.at("undefined_as_zero").get<bool>();
  return c;
}

void validate_config(const RunConfig& c) {
  if (c.out.empty()) {
    throw Error(ErrorCode::ConfigInvalid, "output directory must be set");
  }
  if (!(c.train_frac > 0 && c.val_frac >= 0 &&
        c.train_frac + c.val_frac < 1.0)) {
    throw Error(ErrorCode::ConfigInvalid,
                "split fractions must satisfy 0 < train, 0 <= val, "
                "train + val < 1");
  }
  if (!(c.contamination >= 0.0 && c.contamination < 1.0)) {
    throw Error(ErrorCode::ConfigInvalid, "contamination must be in [0, 1)");
  }
  if (c.pipeline.k < 1) {
    throw Error(ErrorCode::ConfigInvalid, "k must be at least 1");
  }
  for (const auto& name : c.supervised_models) {
    supervised::model_kind_from_name(name);  // throws on unknown names
  }
  for (const auto& name : c.anomaly_models) {
    anomaly::detector_kind_from_name(name);
  }
}

std::string config_hash(const RunConfig& c) {
  return detail::hex64(detail::fnv1a64(config_to_json(c).dump()));
}

// Splits a --models value and routes every name to its family.
void apply_models_flag(RunConfig& c, const std::string& flag) {
  std::vector<std::string> sup, anom;
  std::stringstream ss(flag);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    bool known = false;
    for (const auto& s : kSupervisedNames) {
      if (name == s) {
        sup.push_back(name);
        known = true;
      }
    }
    for (const auto& d : kDetectorNames) {
      if (name == d) {
        anom.push_back(name);
        known = true;
      }
    }
    if (!known) {
      throw Error(ErrorCode::ConfigInvalid, "unknown model \"" + name + "\"");
    }
  }
  c.supervised_models = sup;
  c.anomaly_models = anom;
}

// ---------------------------------------------------------------------------
// Small file helpers.

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
}

void require_input(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::MissingInput,
                path.string() + " not found; run `keydyn " + producer +
                    "` first");
  }
}

json parse_json_text(const std::string& text, const std::string& what,
                     ErrorCode code) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(code, what + ": " + e.what());
  }
}

void warn_stale(const std::string& artifact, const std::string& artifact_hash,
                const std::string& current_hash) {
  if (!artifact_hash.empty() && artifact_hash != current_hash) {
    std::cerr << "note: " << artifact << " was written under config "
              << artifact_hash << "; current config is " << current_hash
              << "\n";
  }
}

// Dense matrix + labels out of a reduced table; the reduced artifact never
// carries absent cells.
std::pair<std::vector<std::vector<double>>, std::vector<events::Label>>
dense_matrix(const table::FeatureTable& t) {
  std::vector<std::vector<double>> X(t.n_rows());
  for (std::size_t i = 0; i < t.n_rows(); ++i) {
    X[i].reserve(t.n_cols());
    for (std::size_t jx = 0; jx < t.n_cols(); ++jx) {
      if (!t.rows[i][jx]) {
        throw Error(ErrorCode::MalformedLine,
                    "absent cell in reduced matrix at row " +
                        std::to_string(i) + "; rerun `keydyn preprocess`");
      }
      X[i].push_back(*t.rows[i][jx]);
    }
  }
  return {std::move(X), t.labels};
}

template <typename T>
std::vector<T> take(const std::vector<T>& src,
                    const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(src[i]);
  return out;
}

std::vector<std::size_t> indices_field(const json& j, const char* key) {
  return j.at(key).get<std::vector<std::size_t>>();
}

// ---------------------------------------------------------------------------
// Commands.

void write_effective_config(const RunConfig& c) {
  write_text(fs::path(c.out) / "config.json",
             config_to_json(c).dump(2) + "\n");
}

int cmd_synth(const RunConfig& c, const std::string& hash) {
  synthgen::DatasetConfig dc = c.synth;
  dc.base = c.profile;
  dc.seed = c.seed;
  const auto dataset = synthgen::generate_dataset(dc);

  const fs::path root = fs::path(c.out) / "sessions";
  fs::remove_all(root);  // a smaller rerun must not leave stale sessions
  fs::create_directories(root / "normal");
  fs::create_directories(root / "stress");
  for (const auto& session : dataset.sessions) {
    const fs::path file = root / events::label_name(session.label) /
                          (session.id + ".jsonl");
    events::save_session(file, session);
  }
  json manifest = parse_json_text(dataset.manifest_json, "manifest",
                                  ErrorCode::ConfigInvalid);
  manifest["config_hash"] = hash;
  write_text(root / "manifest.json", manifest.dump(2) + "\n");
  write_effective_config(c);
  std::cerr << "synth: " << dataset.sessions.size() << " sessions -> "
            << root.string() << "\n";
  return 0;
}

int cmd_extract(const RunConfig& c, const std::string& hash) {
  const fs::path root =
      c.data.empty() ? fs::path(c.out) / "sessions" : fs::path(c.data);
  require_input(root, "synth");
  const auto sessions = events::load_session_dir(root);
  if (sessions.empty()) {
    throw Error(ErrorCode::MissingInput,
                "no sessions under " + root.string());
  }
  std::size_t repaired = 0;
  for (const auto& s : sessions) {
    if (!s.normalization.clean()) {
      ++repaired;
      std::cerr << events::normalization_summary_json(s) << "\n";
    }
  }
  const auto schema = features::default_schema();
  const auto t = table::extract_table(sessions, schema);
  table::write_csv(fs::path(c.out) / "features.csv", t, hash);
  table::write_schema_json(fs::path(c.out) / "schema.json", t.columns, hash);
  write_effective_config(c);
  std::cerr << "extract: " << t.n_rows() << " sessions x " << t.n_cols()
            << " features (" << repaired << " sessions repaired) -> "
            << (fs::path(c.out) / "features.csv").string() << "\n";
  return 0;
}

int cmd_preprocess(const RunConfig& c, const std::string& hash) {
  const fs::path features_csv = fs::path(c.out) / "features.csv";
  require_input(features_csv, "extract");
  warn_stale("features.csv", table::read_csv_config_hash(features_csv), hash);
  const auto t = table::read_csv(features_csv);

  const auto fit = preprocess::fit_pipeline(t, c.pipeline);
  table::write_csv(fs::path(c.out) / "reduced.csv", fit.reduced, hash);
  write_text(fs::path(c.out) / "pipeline.json",
             preprocess::params_to_json(fit.params, hash) + "\n");
  write_effective_config(c);

  std::cerr << fit.report.to_json() << "\n";
  std::cerr << "preprocess: selected";
  const auto schema = features::default_schema();
  for (const auto& name : fit.params.selected) {
    std::cerr << " " << schema.display_name(name);
  }
  std::cerr << " -> " << (fs::path(c.out) / "reduced.csv").string() << "\n";
  return 0;
}

// Loads reduced.csv + pipeline.json, refusing mixed-run artifacts.
struct Stage {
  table::FeatureTable reduced;
  preprocess::PipelineParams params;
  std::string pipeline_hash;  // hash of the fitted parameters
};

Stage load_stage(const RunConfig& c, const std::string& hash) {
  const fs::path reduced_csv = fs::path(c.out) / "reduced.csv";
  const fs::path pipeline_json = fs::path(c.out) / "pipeline.json";
  require_input(reduced_csv, "preprocess");
  require_input(pipeline_json, "preprocess");

  const std::string reduced_hash = table::read_csv_config_hash(reduced_csv);
  const json pj = parse_json_text(read_text(pipeline_json), "pipeline.json",
                                  ErrorCode::ModelMismatch);
  const std::string pipeline_cfg_hash = pj.value("config_hash", "");
  if (reduced_hash != pipeline_cfg_hash) {
    throw Error(ErrorCode::ModelMismatch,
                "reduced.csv and pipeline.json come from different runs");
  }
  warn_stale("reduced.csv", reduced_hash, hash);

  Stage s;
  s.reduced = table::read_csv(reduced_csv);
  s.params = preprocess::params_from_json(pj.dump());
  s.pipeline_hash = preprocess::params_hash(s.params);
  return s;
}

int cmd_train(const RunConfig& c, const std::string& hash) {
  const Stage stage = load_stage(c, hash);
  auto [X, y] = dense_matrix(stage.reduced);

  const fs::path models_dir = fs::path(c.out) / "models";
  fs::remove_all(models_dir);  // never mix model files across runs
  fs::create_directories(models_dir);

  json splits;
  splits["config_hash"] = hash;
  splits["seed"] = c.seed;
  splits["session_ids"] = stage.reduced.session_ids;

  if (!c.supervised_models.empty()) {
    const auto sp =
        supervised::split_dataset(y, c.seed, c.train_frac, c.val_frac);
    splits["supervised"] = {
        {"train", sp.train}, {"val", sp.val}, {"test", sp.test}};
    const auto Xtr = take(X, sp.train);
    const auto ytr = take(y, sp.train);
    const auto Xval = take(X, sp.val);
    const auto yval = take(y, sp.val);
    json notes = json::object();
    for (const auto& name : c.supervised_models) {
      const auto kind = supervised::model_kind_from_name(name);
      supervised::AnyModel model;
      if (c.grid_search) {
        auto [fitted, note] =
            supervised::fit_with_grid(kind, Xtr, ytr, Xval, yval, c.seed);
        model = std::move(fitted);
        notes[name] = parse_json_text(note, "grid note",
                                      ErrorCode::ConfigInvalid);
      } else {
        model = supervised::fit_model(kind, Xtr, ytr, c.seed);
      }
      model.feature_order = stage.params.selected;
      model.pipeline_hash = stage.pipeline_hash;
      write_text(models_dir / (name + ".json"),
                 supervised::model_to_json(model) + "\n");
    }
    if (c.grid_search) splits["grid"] = notes;
  }

  if (!c.anomaly_models.empty()) {
    const auto asp = anomaly::split_anomaly(y, c.seed, c.frac_normal_train,
                                            c.frac_of_normals);
    splits["anomaly"] = {{"train", asp.train}, {"test", asp.test}};
    const auto Xtr = take(X, asp.train);
    for (const auto& name : c.anomaly_models) {
      const auto kind = anomaly::detector_kind_from_name(name);
      auto det = anomaly::fit_detector(kind, Xtr, c.seed, c.contamination);
      det.feature_order = stage.params.selected;
      det.pipeline_hash = stage.pipeline_hash;
      if (const auto* m = std::get_if<anomaly::OcsvmModel>(&det.impl);
          m != nullptr && !m->converged) {
        std::cerr << "train: ocsvm stopped before convergence (gap "
                  << m->gap << " after " << m->iters << " iters)\n";
      }
      write_text(models_dir / ("anomaly_" + name + ".json"),
                 anomaly::detector_to_json(det) + "\n");
    }
  }

  write_text(fs::path(c.out) / "splits.json", splits.dump(2) + "\n");
  write_effective_config(c);
  std::cerr << "train: " << c.supervised_models.size() << " classifiers, "
            << c.anomaly_models.size() << " detectors -> "
            << models_dir.string() << "\n";
  return 0;
}

json counts_to_json(const metrics::ConfusionCounts& counts) {
  return {{"tp", counts.tp},
          {"tn", counts.tn},
          {"fp", counts.fp},
          {"fn", counts.fn}};
}

metrics::ConfusionCounts counts_from_json(const json& j) {
  metrics::ConfusionCounts counts;
  counts.tp = j.at("tp").get<std::size_t>();
  counts.tn = j.at("tn").get<std::size_t>();
  counts.fp = j.at("fp").get<std::size_t>();
  counts.fn = j.at("fn").get<std::size_t>();
  return counts;
}

int cmd_eval(const RunConfig& c, const std::string& hash) {
  const Stage stage = load_stage(c, hash);
  auto [X, y] = dense_matrix(stage.reduced);

  const fs::path splits_path = fs::path(c.out) / "splits.json";
  require_input(splits_path, "train");
  const json splits = parse_json_text(read_text(splits_path), "splits.json",
                                      ErrorCode::ModelMismatch);
  const std::string splits_hash = splits.value("config_hash", "");
  const json pj = parse_json_text(
      read_text(fs::path(c.out) / "pipeline.json"), "pipeline.json",
      ErrorCode::ModelMismatch);
  if (splits_hash != pj.value("config_hash", "")) {
    throw Error(ErrorCode::ModelMismatch,
                "splits.json and pipeline.json come from different runs");
  }
  warn_stale("splits.json", splits_hash, hash);

  const fs::path models_dir = fs::path(c.out) / "models";
  std::vector<metrics::ModelReport> sup_reports, anom_reports;

  if (!c.supervised_models.empty()) {
    if (!splits.contains("supervised")) {
      throw Error(ErrorCode::MissingInput,
                  "splits.json has no supervised section; rerun `keydyn "
                  "train`");
    }
    supervised::SplitIndices sp;
    sp.train = indices_field(splits.at("supervised"), "train");
    sp.val = indices_field(splits.at("supervised"), "val");
    sp.test = indices_field(splits.at("supervised"), "test");
    for (const auto& name : c.supervised_models) {
      const fs::path file = models_dir / (name + ".json");
      require_input(file, "train");
      const auto model = supervised::model_from_json(read_text(file));
      if (model.pipeline_hash != stage.pipeline_hash) {
        throw Error(ErrorCode::ModelMismatch,
                    name + ": model was fitted against a different "
                           "pipeline (hash mismatch)");
      }
      sup_reports.push_back(supervised::evaluate(model, X, y, sp));
    }
  }

  if (!c.anomaly_models.empty()) {
    if (!splits.contains("anomaly")) {
      throw Error(ErrorCode::MissingInput,
                  "splits.json has no anomaly section; rerun `keydyn "
                  "train`");
    }
    anomaly::AnomalySplit asp;
    asp.train = indices_field(splits.at("anomaly"), "train");
    asp.test = indices_field(splits.at("anomaly"), "test");
    for (const auto& name : c.anomaly_models) {
      const fs::path file = models_dir / ("anomaly_" + name + ".json");
      require_input(file, "train");
      const auto det = anomaly::detector_from_json(read_text(file));
      if (det.pipeline_hash != stage.pipeline_hash) {
        throw Error(ErrorCode::ModelMismatch,
                    name + ": detector was fitted against a different "
                           "pipeline (hash mismatch)");
      }
      anom_reports.push_back(anomaly::evaluate_anomaly(det, X, y, asp));
    }
  }

  const metrics::RenderOptions opts{c.undefined_as_zero, 2};
  const std::string hash_md = "<!-- config_hash: " + hash + " -->\n\n";
  const std::string hash_csv = "# config_hash=" + hash + "\n";

  std::ostringstream stdout_text;
  json eval_doc;
  eval_doc["config_hash"] = hash;
  eval_doc["pipeline_hash"] = stage.pipeline_hash;
  eval_doc["reports"] = json::array();
  auto record = [&eval_doc](const metrics::ModelReport& r) {
    eval_doc["reports"].push_back({{"model", r.model},
                                   {"anomaly", r.anomaly},
                                   {"train", counts_to_json(r.train.counts)},
                                   {"val", counts_to_json(r.val.counts)},
                                   {"test", counts_to_json(r.test.counts)}});
  };

  if (!sup_reports.empty()) {
    const std::string md = metrics::to_markdown(sup_reports, opts);
    write_text(fs::path(c.out) / "report_supervised.md", hash_md + md);
    write_text(fs::path(c.out) / "report_supervised.csv",
               hash_csv + metrics::to_csv(sup_reports, opts));
    stdout_text << "## Supervised classifiers\n\n" << md << "\n";
    for (const auto& r : sup_reports) record(r);
  }
  if (!anom_reports.empty()) {
    const std::string md = metrics::to_markdown(anom_reports, opts);
    write_text(fs::path(c.out) / "report_anomaly.md", hash_md + md);
    write_text(fs::path(c.out) / "report_anomaly.csv",
               hash_csv + metrics::to_csv(anom_reports, opts));
    stdout_text << "## Anomaly detectors\n\n" << md << "\n";
    for (const auto& r : anom_reports) record(r);
  }

  // Plot-ready scatter of the selected coordinates, one row per session.
  const auto schema = features::default_schema();
  std::ostringstream scatter;
  scatter << hash_csv << "session_id,label";
  for (const auto& col : stage.reduced.columns) {
    scatter << "," << schema.display_name(col.name);
  }
  scatter << "\n";
  for (std::size_t i = 0; i < stage.reduced.n_rows(); ++i) {
    scatter << stage.reduced.session_ids[i] << ","
            << events::label_name(stage.reduced.labels[i]);
    for (double v : X[i]) scatter << "," << detail::format_double(v);
    scatter << "\n";
  }
  write_text(fs::path(c.out) / "scatter.csv", scatter.str());

  write_text(fs::path(c.out) / "eval.json", eval_doc.dump(2) + "\n");
  write_effective_config(c);
  std::cout << stdout_text.str();
  std::cerr << "eval: " << sup_reports.size() + anom_reports.size()
            << " models -> " << (fs::path(c.out)).string()
            << "/report_*.{md,csv}\n";
  return 0;
}

int cmd_report(const RunConfig& c, const std::string& hash) {
  const fs::path eval_path = fs::path(c.out) / "eval.json";
  require_input(eval_path, "eval");
  const json doc = parse_json_text(read_text(eval_path), "eval.json",
                                   ErrorCode::ModelMismatch);
  warn_stale("eval.json", doc.value("config_hash", ""), hash);

  std::vector<metrics::ModelReport> sup, anom;
  for (const auto& entry : doc.at("reports")) {
    metrics::ModelReport r;
    r.model = entry.at("model").get<std::string>();
    r.anomaly = entry.at("anomaly").get<bool>();
    r.train = metrics::split_metrics(counts_from_json(entry.at("train")));
    r.val = metrics::split_metrics(counts_from_json(entry.at("val")));
    r.test = metrics::split_metrics(counts_from_json(entry.at("test")));
    (r.anomaly ? anom : sup).push_back(r);
  }
  const metrics::RenderOptions opts{c.undefined_as_zero, 2};
  if (!sup.empty()) {
    std::cout << "## Supervised classifiers\n\n"
              << metrics::to_markdown(sup, opts) << "\n";
  }
  if (!anom.empty()) {
    std::cout << "## Anomaly detectors\n\n"
              << metrics::to_markdown(anom, opts) << "\n";
  }
  return 0;
}

int cmd_score(const RunConfig& c, const std::string& hash,
              const std::string& session_path) {
  if (c.supervised_models.empty() && c.anomaly_models.empty()) {
    throw Error(ErrorCode::ConfigInvalid, "no models selected");
  }
  const fs::path pipeline_json = fs::path(c.out) / "pipeline.json";
  require_input(pipeline_json, "preprocess");
  const json pj = parse_json_text(read_text(pipeline_json), "pipeline.json",
                                  ErrorCode::ModelMismatch);
  const auto params = preprocess::params_from_json(pj.dump());
  const std::string pipeline_hash = preprocess::params_hash(params);
  warn_stale("pipeline.json", pj.value("config_hash", ""), hash);

  const auto schema = features::default_schema();
  const auto session =
      events::load_session(session_path, events::Label::unlabeled);
  const auto fv = features::extract_features(session, schema);
  const auto x = preprocess::apply_pipeline(fv, schema, params);

  json verdict;
  verdict["session_id"] = session.id;
  verdict["config_hash"] = hash;
  verdict["pipeline_hash"] = pipeline_hash;
  json feats = json::object();
  for (std::size_t i = 0; i < params.selected.size(); ++i) {
    feats[schema.display_name(params.selected[i])] = x[i];
  }
  verdict["features"] = feats;

  const fs::path models_dir = fs::path(c.out) / "models";
  int stress_votes = 0;
  int n_detectors = 0;
  if (!c.anomaly_models.empty()) {
    json anom = json::object();
    for (const auto& name : c.anomaly_models) {
      const fs::path file = models_dir / ("anomaly_" + name + ".json");
      require_input(file, "train");
      const auto det = anomaly::detector_from_json(read_text(file));
      if (det.pipeline_hash != pipeline_hash) {
        throw Error(ErrorCode::ModelMismatch,
                    name + ": detector was fitted against a different "
                           "pipeline (hash mismatch)");
      }
      const events::Label decided = det.predict(x);
      anom[name] = {{"score", det.score(x)},
                    {"threshold", det.threshold()},
                    {"decision", events::label_name(decided)}};
      ++n_detectors;
      if (decided == events::Label::stress) ++stress_votes;
    }
    verdict["anomaly"] = anom;
  }
  int sup_votes = 0;
  int n_sup = 0;
  if (!c.supervised_models.empty()) {
    json sup = json::object();
    for (const auto& name : c.supervised_models) {
      const fs::path file = models_dir / (name + ".json");
      require_input(file, "train");
      const auto model = supervised::model_from_json(read_text(file));
      if (model.pipeline_hash != pipeline_hash) {
        throw Error(ErrorCode::ModelMismatch,
                    name + ": model was fitted against a different "
                           "pipeline (hash mismatch)");
      }
      const events::Label decided = model.predict(x);
      sup[name] = events::label_name(decided);
      ++n_sup;
      if (decided == events::Label::stress) ++sup_votes;
    }
    verdict["supervised"] = sup;
  }

  // The headline decision is the anomaly-detector majority (ties read as
  // normal); purely supervised runs fall back to the classifier majority.
  const bool stress = n_detectors > 0 ? 2 * stress_votes > n_detectors
                                      : 2 * sup_votes > n_sup;
  verdict["stress_votes"] = stress_votes;
  verdict["detectors"] = n_detectors;
  verdict["decision"] = stress ? "stress" : "normal";
  std::cout << verdict.dump(2) << "\n";
  return 0;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidProfile:
    case ErrorCode::KTooLarge:
      return 1;  // usage
    case ErrorCode::DegenerateData:
    case ErrorCode::ModelMismatch:
      return 3;  // model
    default:
      return 2;  // data
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"keystroke/mouse-dynamics stress detection toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_flag, data_flag, models_flag;
  std::uint64_t seed_flag = 0;
  int k_flag = 0;
  double contamination_flag = 0.0;
  app.add_option("--config", config_path, "JSON run configuration file");
  app.add_option("--seed", seed_flag, "global seed override");
  app.add_option("--out", out_flag, "output directory override");
  app.add_option("--data", data_flag,
                 "session directory override for extract");
  app.add_option("--models", models_flag,
                 "comma-separated subset of models to use");
  app.add_option("--k", k_flag, "selected feature count override");
  app.add_option("--contamination", contamination_flag,
                 "threshold contamination override");

  auto* synth =
      app.add_subcommand("synth", "generate a labeled synthetic session set");
  auto* extract = app.add_subcommand(
      "extract", "parse sessions and extract the feature matrix");
  auto* preprocess_cmd = app.add_subcommand(
      "preprocess", "fit the reduction pipeline on extracted features");
  auto* train =
      app.add_subcommand("train", "fit classifiers and anomaly detectors");
  auto* eval =
      app.add_subcommand("eval", "evaluate trained models and write reports");
  auto* score =
      app.add_subcommand("score", "score one session file against the models");
  auto* report =
      app.add_subcommand("report", "re-render saved evaluation tables");
  std::string score_session;
  score->add_option("session", score_session, "JSONL session file")
      ->required();
  for (auto* sub :
       {synth, extract, preprocess_cmd, train, eval, score, report}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) {
      const json j = parse_json_text(read_text(config_path), config_path,
                                     ErrorCode::ConfigInvalid);
      try {
        config = config_from_json(j);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid,
                    config_path + ": " + e.what());
      }
    }
    if (app.count("--seed") > 0) config.seed = seed_flag;
    if (app.count("--out") > 0) config.out = out_flag;
    if (app.count("--data") > 0) config.data = data_flag;
    if (app.count("--k") > 0) config.pipeline.k = k_flag;
    if (app.count("--contamination") > 0)
      config.contamination = contamination_flag;
    if (app.count("--models") > 0) apply_models_flag(config, models_flag);
    validate_config(config);
    const std::string hash = config_hash(config);

    if (synth->parsed()) return cmd_synth(config, hash);
    if (extract->parsed()) return cmd_extract(config, hash);
    if (preprocess_cmd->parsed()) return cmd_preprocess(config, hash);
    if (train->parsed()) return cmd_train(config, hash);
    if (eval->parsed()) return cmd_eval(config, hash);
    if (score->parsed()) return cmd_score(config, hash, score_session);
    if (report->parsed()) return cmd_report(config, hash);
    return 1;
  } catch (const Error& e) {
    std::cerr << error_name(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
