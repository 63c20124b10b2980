#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "keydyn/table.hpp"

namespace keydyn::preprocess {

enum class ImputePolicy { normal_median, pooled_median };

struct PipelineConfig {
  // Stage 1: drop features present in fewer than this many sessions.
  int min_sessions = 3;
  // Stage 2: per-class std-dev floors, by feature kind.
  double min_std_time = 1.0;
  double min_std_freq = 0.01;
  // true: drop when below the floor in either class; false: in both.
  bool drop_in_either_class = true;
  // Stage 4: number of features kept by chi2 selection.
  int k = 3;
  ImputePolicy inference_policy = ImputePolicy::normal_median;
};

// Everything fitted by the pipeline, reusable at inference.
struct PipelineParams {
  std::vector<std::string> kept_stage1;
  std::vector<std::string> kept_stage2;
  std::vector<features::FeatureInfo> stage2_columns;
  std::map<std::string, double> medians_normal;
  std::map<std::string, double> medians_stress;
  std::map<std::string, double> medians_pooled;
  std::map<std::string, double> shift_offsets;  // chi2 non-negativity shifts
  std::map<std::string, double> chi2_scores;
  std::vector<std::string> selected;  // k names, descending score
  PipelineConfig config;
};

struct FitReport {
  std::size_t n_features_in = 0;
  std::size_t n_after_rare = 0;
  std::size_t n_after_std = 0;
  std::size_t n_selected = 0;
  std::size_t n_cells_imputed = 0;
  std::string caveat;  // label-aware fit imputation notice
  std::string to_json() const;
};

struct FitResult {
  table::FeatureTable reduced;  // selected columns; imputed, shifted values
  PipelineParams params;
  FitReport report;
};

// Stage 1. Default threshold 3; 0 is the identity.
std::pair<table::FeatureTable, std::vector<std::string>> drop_rare_features(
    const table::FeatureTable& input, int min_sessions);

// Stage 2. A feature is dropped when its population std-dev over present
// values inside a class sits below the floor for its kind; a class with no
// present values counts as below. Requires both classes.
std::pair<table::FeatureTable, std::vector<std::string>> drop_low_std(
    const table::FeatureTable& input, const PipelineConfig& config);

struct ClassMedians {
  std::map<std::string, double> normal;
  std::map<std::string, double> stress;
  std::map<std::string, double> pooled;
  std::size_t cells_imputed = 0;
};

// Stage 3. Fills each absent cell with the median of present values of the
// same feature within the same class. Never changes a present value.
std::pair<table::FeatureTable, ClassMedians> impute_medians(
    const table::FeatureTable& input);

// Inference-time imputation: class labels are unknown, so absent cells take
// the normal-class (default) or pooled median. Keys outside the fitted
// stage-2 set are rejected.
std::map<std::string, double> impute_for_inference(
    const std::map<std::string, std::optional<double>>& row,
    const PipelineParams& params, ImputePolicy policy);

// Stage 4 scoring. Values are shifted per feature to be non-negative
// (offsets returned); score sums (observed - expected)^2 / expected over
// the two classes' value sums. A zero-sum feature scores 0.
std::pair<std::map<std::string, double>, std::map<std::string, double>>
chi2_scores(const table::FeatureTable& dense,
            const std::vector<events::Label>& labels);

// Top-k by score, ties broken by canonical (schema) order.
std::vector<std::string> select_k_best(
    const std::map<std::string, double>& scores,
    const std::vector<std::string>& canonical_order, int k);

// Runs stages 1-4 in order on a labeled matrix.
FitResult fit_pipeline(const table::FeatureTable& input,
                       const PipelineConfig& config);

// Replays drops, inference imputation, shift and selection on one
// schema-aligned row. Returns the k selected coordinates.
std::vector<double> apply_pipeline(const features::FeatureVector& row,
                                   const features::FeatureSchema& schema,
                                   const PipelineParams& params);

std::string params_to_json(const PipelineParams& params,
                           const std::string& config_hash = "");
PipelineParams params_from_json(const std::string& text);
// Stable content hash used to pair models with the pipeline they expect.
std::string params_hash(const PipelineParams& params);

}  // namespace keydyn::preprocess
