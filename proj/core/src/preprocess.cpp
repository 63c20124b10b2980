#include "keydyn/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>

#include "json.hpp"

#include "keydyn/detail/textio.hpp"
#include "keydyn/errors.hpp"

namespace keydyn::preprocess {

using events::Label;
using json = nlohmann::json;
using table::FeatureTable;

namespace {

constexpr const char* kFitCaveat =
    "fit-time imputation fills gaps with medians of the row's true class; "
    "inference-time imputation is label-free and uses the configured median "
    "policy";

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

void require_binary_labels(const FeatureTable& t) {
  bool has_normal = false;
  bool has_stress = false;
  for (Label l : t.labels) {
    if (l == Label::normal) has_normal = true;
    else if (l == Label::stress) has_stress = true;
    else throw Error(ErrorCode::NonBinaryLabels,
                     "preprocessing requires normal/stress labels");
  }
  if (!has_normal || !has_stress)
    throw Error(ErrorCode::SingleClassInput,
                "preprocessing requires both classes");
}

// Population std-dev over the column's present values within one class;
// nullopt when fewer than one value is present.
std::optional<double> class_std(const FeatureTable& t, std::size_t col,
                                Label label) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    if (t.labels[r] != label || !t.rows[r][col]) continue;
    sum += *t.rows[r][col];
    ++n;
  }
  if (n == 0) return std::nullopt;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    if (t.labels[r] != label || !t.rows[r][col]) continue;
    const double d = *t.rows[r][col] - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(n));
}

std::vector<std::string> column_names(const FeatureTable& t) {
  std::vector<std::string> names;
  names.reserve(t.n_cols());
  for (const auto& c : t.columns) names.push_back(c.name);
  return names;
}

}  // namespace

std::string FitReport::to_json() const {
  json j;
  j["n_features_in"] = n_features_in;
  j["n_after_rare"] = n_after_rare;
  j["n_after_std"] = n_after_std;
  j["n_selected"] = n_selected;
  j["n_cells_imputed"] = n_cells_imputed;
  j["caveat"] = caveat;
  return j.dump();
}

std::pair<FeatureTable, std::vector<std::string>> drop_rare_features(
    const FeatureTable& input, int min_sessions) {
  if (min_sessions < 0)
    throw Error(ErrorCode::InvalidConfig, "min_sessions must be >= 0");
  std::vector<std::string> kept;
  for (std::size_t c = 0; c < input.n_cols(); ++c) {
    std::size_t present = 0;
    for (std::size_t r = 0; r < input.n_rows(); ++r)
      if (input.rows[r][c]) ++present;
    if (present >= static_cast<std::size_t>(min_sessions))
      kept.push_back(input.columns[c].name);
  }
  if (kept.empty())
    throw Error(ErrorCode::AllFeaturesDropped,
                "no feature occurs in at least " +
                    std::to_string(min_sessions) + " sessions");
  return {input.select_columns(kept), kept};
}

std::pair<FeatureTable, std::vector<std::string>> drop_low_std(
    const FeatureTable& input, const PipelineConfig& config) {
  require_binary_labels(input);
  std::vector<std::string> kept;
  for (std::size_t c = 0; c < input.n_cols(); ++c) {
    const double floor = input.columns[c].kind == features::FeatureKind::time
                             ? config.min_std_time
                             : config.min_std_freq;
    const auto sn = class_std(input, c, Label::normal);
    const auto ss = class_std(input, c, Label::stress);
    const bool below_n = !sn || *sn < floor;   // undefined counts as below
    const bool below_s = !ss || *ss < floor;
    const bool drop = config.drop_in_either_class ? (below_n || below_s)
                                                  : (below_n && below_s);
    if (!drop) kept.push_back(input.columns[c].name);
  }
  if (kept.empty())
    throw Error(ErrorCode::AllFeaturesDropped,
                "every feature is near-constant in some class");
  return {input.select_columns(kept), kept};
}

std::pair<FeatureTable, ClassMedians> impute_medians(
    const FeatureTable& input) {
  require_binary_labels(input);
  ClassMedians med;
  FeatureTable out = input;
  for (std::size_t c = 0; c < input.n_cols(); ++c) {
    std::vector<double> vals_n, vals_s, vals_all;
    for (std::size_t r = 0; r < input.n_rows(); ++r) {
      if (!input.rows[r][c]) continue;
      const double v = *input.rows[r][c];
      vals_all.push_back(v);
      (input.labels[r] == Label::normal ? vals_n : vals_s).push_back(v);
    }
    const std::string& name = input.columns[c].name;
    if (vals_n.empty() || vals_s.empty())
      throw Error(ErrorCode::EmptyClassFeature,
                  "feature '" + name + "' has no values in one class");
    med.normal[name] = median_of(vals_n);
    med.stress[name] = median_of(vals_s);
    med.pooled[name] = median_of(vals_all);
    for (std::size_t r = 0; r < input.n_rows(); ++r) {
      if (out.rows[r][c]) continue;
      out.rows[r][c] = input.labels[r] == Label::normal ? med.normal[name]
                                                        : med.stress[name];
      ++med.cells_imputed;
    }
  }
  return {out, med};
}

std::map<std::string, double> impute_for_inference(
    const std::map<std::string, std::optional<double>>& row,
    const PipelineParams& params, ImputePolicy policy) {
  const std::set<std::string> stage2(params.kept_stage2.begin(),
                                     params.kept_stage2.end());
  for (const auto& [name, _] : row)
    if (!stage2.count(name))
      throw Error(ErrorCode::UnknownFeature,
                  "feature '" + name + "' was not fitted");
  const auto& medians = policy == ImputePolicy::normal_median
                            ? params.medians_normal
                            : params.medians_pooled;
  std::map<std::string, double> out;
  for (const std::string& name : params.kept_stage2) {
    const auto it = row.find(name);
    out[name] = (it != row.end() && it->second) ? *it->second
                                                : medians.at(name);
  }
  return out;
}

std::pair<std::map<std::string, double>, std::map<std::string, double>>
chi2_scores(const FeatureTable& dense, const std::vector<Label>& labels) {
  if (labels.size() != dense.n_rows())
    throw Error(ErrorCode::LengthMismatch, "labels/rows size mismatch");
  std::size_t n_normal = 0;
  std::size_t n_stress = 0;
  for (Label l : labels) {
    if (l == Label::normal) ++n_normal;
    else if (l == Label::stress) ++n_stress;
    else throw Error(ErrorCode::NonBinaryLabels,
                     "chi2 requires normal/stress labels");
  }
  if (n_normal == 0 || n_stress == 0)
    throw Error(ErrorCode::SingleClassInput, "chi2 requires both classes");
  const double n = static_cast<double>(n_normal + n_stress);

  std::map<std::string, double> scores;
  std::map<std::string, double> offsets;
  for (std::size_t c = 0; c < dense.n_cols(); ++c) {
    const std::string& name = dense.columns[c].name;
    double lo = 0.0;
    for (std::size_t r = 0; r < dense.n_rows(); ++r) {
      if (!dense.rows[r][c])
        throw Error(ErrorCode::InvalidConfig,
                    "chi2 requires a dense (imputed) matrix");
      lo = std::min(lo, *dense.rows[r][c]);
    }
    const double offset = std::min(0.0, lo);
    offsets[name] = offset;
    double obs_n = 0.0;
    double obs_s = 0.0;
    for (std::size_t r = 0; r < dense.n_rows(); ++r) {
      const double shifted = *dense.rows[r][c] - offset;
      if (shifted < -1e-9)
        throw Error(ErrorCode::NegativeAfterShift,
                    "feature '" + name + "' negative after shift");
      (labels[r] == Label::normal ? obs_n : obs_s) += shifted;
    }
    const double total = obs_n + obs_s;
    if (total <= 0.0) {
      scores[name] = 0.0;
      continue;
    }
    const double exp_n = total * static_cast<double>(n_normal) / n;
    const double exp_s = total * static_cast<double>(n_stress) / n;
    scores[name] = (obs_n - exp_n) * (obs_n - exp_n) / exp_n +
                   (obs_s - exp_s) * (obs_s - exp_s) / exp_s;
  }
  return {scores, offsets};
}

std::vector<std::string> select_k_best(
    const std::map<std::string, double>& scores,
    const std::vector<std::string>& canonical_order, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
  if (static_cast<std::size_t>(k) > scores.size())
    throw Error(ErrorCode::KTooLarge,
                "k=" + std::to_string(k) + " exceeds " +
                    std::to_string(scores.size()) + " scored features");
  std::vector<std::string> ordered;
  ordered.reserve(scores.size());
  for (const std::string& name : canonical_order)
    if (scores.count(name)) ordered.push_back(name);
  if (ordered.size() != scores.size())
    throw Error(ErrorCode::UnknownFeature,
                "scored feature missing from canonical order");
  std::stable_sort(ordered.begin(), ordered.end(),
                   [&](const std::string& a, const std::string& b) {
                     return scores.at(a) > scores.at(b);
                   });
  ordered.resize(static_cast<std::size_t>(k));
  return ordered;
}

FitResult fit_pipeline(const FeatureTable& input,
                       const PipelineConfig& config) {
  require_binary_labels(input);
  FitResult res;
  res.params.config = config;
  res.report.n_features_in = input.n_cols();
  res.report.caveat = kFitCaveat;

  auto [t1, kept1] = drop_rare_features(input, config.min_sessions);
  res.params.kept_stage1 = std::move(kept1);
  res.report.n_after_rare = t1.n_cols();

  auto [t2, kept2] = drop_low_std(t1, config);
  res.params.kept_stage2 = std::move(kept2);
  res.params.stage2_columns = t2.columns;
  res.report.n_after_std = t2.n_cols();

  auto [dense, medians] = impute_medians(t2);
  res.params.medians_normal = std::move(medians.normal);
  res.params.medians_stress = std::move(medians.stress);
  res.params.medians_pooled = std::move(medians.pooled);
  res.report.n_cells_imputed = medians.cells_imputed;

  auto [scores, offsets] = chi2_scores(dense, dense.labels);
  res.params.chi2_scores = std::move(scores);
  res.params.shift_offsets = std::move(offsets);
  res.params.selected = select_k_best(res.params.chi2_scores,
                                      column_names(dense), config.k);
  res.report.n_selected = res.params.selected.size();

  FeatureTable shifted = dense;
  for (std::size_t c = 0; c < shifted.n_cols(); ++c) {
    const double offset = res.params.shift_offsets.at(shifted.columns[c].name);
    for (auto& row : shifted.rows) *row[c] -= offset;
  }
  res.reduced = shifted.select_columns(res.params.selected);
  return res;
}

std::vector<double> apply_pipeline(const features::FeatureVector& row,
                                   const features::FeatureSchema& schema,
                                   const PipelineParams& params) {
  if (row.values.size() != schema.size())
    throw Error(ErrorCode::LengthMismatch,
                "row does not match the feature schema");
  std::map<std::string, std::optional<double>> restricted;
  for (const std::string& name : params.kept_stage2)
    restricted[name] = row.values[schema.index_of(name)];
  const auto dense =
      impute_for_inference(restricted, params, params.config.inference_policy);
  std::vector<double> out;
  out.reserve(params.selected.size());
  for (const std::string& name : params.selected)
    out.push_back(dense.at(name) - params.shift_offsets.at(name));
  return out;
}

namespace {

json config_to_json(const PipelineConfig& c) {
  json j;
  j["min_sessions"] = c.min_sessions;
  j["min_std_time"] = c.min_std_time;
  j["min_std_freq"] = c.min_std_freq;
  j["drop_in_either_class"] = c.drop_in_either_class;
  j["k"] = c.k;
  j["inference_policy"] = c.inference_policy == ImputePolicy::normal_median
                              ? "normal_median"
                              : "pooled_median";
  return j;
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  c.min_sessions = j.at("min_sessions").get<int>();
  c.min_std_time = j.at("min_std_time").get<double>();
  c.min_std_freq = j.at("min_std_freq").get<double>();
  c.drop_in_either_class = j.at("drop_in_either_class").get<bool>();
  c.k = j.at("k").get<int>();
  const std::string policy = j.at("inference_policy").get<std::string>();
  if (policy == "normal_median") c.inference_policy = ImputePolicy::normal_median;
  else if (policy == "pooled_median") c.inference_policy = ImputePolicy::pooled_median;
  else throw Error(ErrorCode::InvalidConfig, "unknown inference_policy");
  return c;
}

json columns_to_json(const std::vector<features::FeatureInfo>& cols) {
  json arr = json::array();
  for (const auto& c : cols) {
    json j;
    j["name"] = c.name;
    j["group"] = table::group_name(c.group);
    j["kind"] = table::kind_name(c.kind);
    arr.push_back(j);
  }
  return arr;
}

std::vector<features::FeatureInfo> columns_from_json(const json& arr) {
  std::vector<features::FeatureInfo> cols;
  for (const auto& j : arr)
    cols.push_back({j.at("name").get<std::string>(),
                    table::group_from_name(j.at("group").get<std::string>()),
                    table::kind_from_name(j.at("kind").get<std::string>())});
  return cols;
}

}  // namespace

std::string params_to_json(const PipelineParams& params,
                           const std::string& config_hash) {
  json j;
  j["config"] = config_to_json(params.config);
  j["kept_stage1"] = params.kept_stage1;
  j["kept_stage2"] = params.kept_stage2;
  j["stage2_columns"] = columns_to_json(params.stage2_columns);
  j["medians_normal"] = params.medians_normal;
  j["medians_stress"] = params.medians_stress;
  j["medians_pooled"] = params.medians_pooled;
  j["shift_offsets"] = params.shift_offsets;
  j["chi2_scores"] = params.chi2_scores;
  j["selected"] = params.selected;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  return j.dump(2);
}

PipelineParams params_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedLine,
                std::string("bad pipeline json: ") + e.what());
  }
  try {
    PipelineParams p;
    p.config = config_from_json(j.at("config"));
    p.kept_stage1 = j.at("kept_stage1").get<std::vector<std::string>>();
    p.kept_stage2 = j.at("kept_stage2").get<std::vector<std::string>>();
    p.stage2_columns = columns_from_json(j.at("stage2_columns"));
    p.medians_normal =
        j.at("medians_normal").get<std::map<std::string, double>>();
    p.medians_stress =
        j.at("medians_stress").get<std::map<std::string, double>>();
    p.medians_pooled =
        j.at("medians_pooled").get<std::map<std::string, double>>();
    p.shift_offsets =
        j.at("shift_offsets").get<std::map<std::string, double>>();
    p.chi2_scores = j.at("chi2_scores").get<std::map<std::string, double>>();
    p.selected = j.at("selected").get<std::vector<std::string>>();
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedLine,
                std::string("bad pipeline json: ") + e.what());
  }
}

std::string params_hash(const PipelineParams& params) {
  return detail::hex64(detail::fnv1a64(params_to_json(params)));
}

}  // namespace keydyn::preprocess
