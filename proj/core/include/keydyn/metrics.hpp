#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "keydyn/events.hpp"

namespace keydyn::metrics {

// Stress is the positive class throughout.
struct ConfusionCounts {
  std::size_t tp = 0;  // stress predicted stress
  std::size_t tn = 0;  // normal predicted normal
  std::size_t fp = 0;  // normal predicted stress
  std::size_t fn = 0;  // stress predicted normal
  std::size_t total() const { return tp + tn + fp + fn; }
};

ConfusionCounts confusion(const std::vector<events::Label>& truth,
                          const std::vector<events::Label>& predicted);

// Per-split metrics; a ratio with a zero denominator stays unset.
struct SplitMetrics {
  ConfusionCounts counts;
  std::optional<double> accuracy;
  std::optional<double> precision_stress, recall_stress;
  std::optional<double> precision_normal, recall_normal;
};

SplitMetrics split_metrics(const ConfusionCounts& counts);

struct ModelReport {
  std::string model;
  SplitMetrics train, val, test;
  bool anomaly = false;  // anomaly runs train on normals only
};

struct RenderOptions {
  // When true, undefined ratios render as 0.00 instead of an em dash.
  bool undefined_as_zero = false;
  int precision = 2;
};

// Long-format CSV: model,split,metric,value (undefined -> empty cell).
std::string to_csv(const std::vector<ModelReport>& reports,
                   const RenderOptions& opts = {});

// Markdown table, one row per model: accuracy plus per-class precision and
// recall, each cell "train / test". Train-side stress cells of anomaly
// models are blanked since their fit never sees stress rows.
std::string to_markdown(const std::vector<ModelReport>& reports,
                        const RenderOptions& opts = {});

}  // namespace keydyn::metrics
