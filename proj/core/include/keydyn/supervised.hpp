#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "keydyn/events.hpp"
#include "keydyn/metrics.hpp"
#include "keydyn/tree.hpp"

namespace keydyn::supervised {

using events::Label;
using Matrix = std::vector<std::vector<double>>;

// ---- splitting ----

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Stratified shuffle split. Global sizes are floor(train_frac*n) and
// floor(val_frac*n) with the remainder as test; per-class counts follow
// largest-remainder apportionment of those totals.
SplitIndices split_dataset(const std::vector<Label>& labels,
                           std::uint64_t seed, double train_frac = 0.49,
                           double val_frac = 0.21);

// ---- logistic regression ----

struct LogRegConfig {
  double lr = 0.1;
  int epochs = 500;
  double l2 = 1e-3;
};

struct LogRegModel {
  std::vector<double> w;
  double b = 0.0;
  LogRegConfig config;
  std::vector<double> train_losses;  // recorded per epoch, non-increasing
  Label predict(const std::vector<double>& x) const;
  double decision(const std::vector<double>& x) const;  // P(stress)
};

struct LogRegGrad {
  double loss = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

// Mean cross-entropy plus (l2/2)*|w|^2; the bias is not penalized.
LogRegGrad logreg_loss_grad(const std::vector<double>& w, double b,
                            const Matrix& X, const std::vector<double>& y01,
                            double l2);
LogRegModel train_logreg(const Matrix& X, const std::vector<Label>& y,
                         const LogRegConfig& config = {});

// ---- k nearest neighbours ----

struct KnnConfig {
  int k = 3;
};

struct KnnModel {
  Matrix X;
  std::vector<Label> y;
  KnnConfig config;
  // Distance ties resolve to the lower row index; vote ties to normal.
  Label predict(const std::vector<double>& x) const;
};

KnnModel train_knn(const Matrix& X, const std::vector<Label>& y,
                   const KnnConfig& config = {});

// ---- random forest ----

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 8;
  int min_leaf = 1;
  int n_features = 0;  // 0: floor(sqrt(d)) per split
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct ForestModel {
  std::vector<tree::Tree> trees;
  ForestConfig config;
  // Majority vote; a tie goes to normal.
  Label predict(const std::vector<double>& x) const;
};

ForestModel train_random_forest(const Matrix& X, const std::vector<Label>& y,
                                const ForestConfig& config = {});

// ---- gradient boosting ----

struct BoostConfig {
  int n_stages = 100;
  double lr = 0.1;
  int max_depth = 2;
  int min_leaf = 1;
  std::uint64_t seed = 0;
};

struct BoostModel {
  double f0 = 0.0;  // prior log-odds
  std::vector<tree::Tree> trees;  // leaf values carry shrinkage already
  BoostConfig config;
  std::vector<double> train_losses;  // per accepted stage, non-increasing
  Label predict(const std::vector<double>& x) const;
  double decision(const std::vector<double>& x) const;  // raw log-odds
};

BoostModel train_gboost(const Matrix& X, const std::vector<Label>& y,
                        const BoostConfig& config = {});

// ---- multilayer perceptron ----

struct MlpConfig {
  std::vector<int> hidden = {16};
  double lr = 0.05;
  int epochs = 1000;
  std::uint64_t seed = 0;
};

struct MlpModel {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., 1
  std::vector<double> params;  // per layer: row-major W then b
  MlpConfig config;
  std::vector<double> train_losses;
  Label predict(const std::vector<double>& x) const;
  double decision(const std::vector<double>& x) const;  // P(stress)
};

std::size_t mlp_param_count(const std::vector<std::size_t>& layer_sizes);
double mlp_loss(const std::vector<std::size_t>& layer_sizes,
                const std::vector<double>& params, const Matrix& X,
                const std::vector<double>& y01);
std::pair<double, std::vector<double>> mlp_loss_grad(
    const std::vector<std::size_t>& layer_sizes,
    const std::vector<double>& params, const Matrix& X,
    const std::vector<double>& y01);
MlpModel train_mlp(const Matrix& X, const std::vector<Label>& y,
                   const MlpConfig& config = {});

// ---- common wrapper ----

enum class ModelKind { logreg, knn, random_forest, gboost, mlp };
const char* model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

struct AnyModel {
  ModelKind kind = ModelKind::logreg;
  std::variant<LogRegModel, KnnModel, ForestModel, BoostModel, MlpModel> impl;
  std::vector<std::string> feature_order;  // names the input vector must follow
  std::string pipeline_hash;
  Label predict(const std::vector<double>& x) const;
};

AnyModel fit_model(ModelKind kind, const Matrix& X,
                   const std::vector<Label>& y, std::uint64_t seed);

// Small per-kind hyperparameter sweep scored by validation accuracy
// (first grid entry wins ties). Returns the refit winner and a JSON note
// describing the chosen settings.
std::pair<AnyModel, std::string> fit_with_grid(
    ModelKind kind, const Matrix& X_train, const std::vector<Label>& y_train,
    const Matrix& X_val, const std::vector<Label>& y_val, std::uint64_t seed);

metrics::ModelReport evaluate(const AnyModel& model, const Matrix& X,
                              const std::vector<Label>& y,
                              const SplitIndices& split);

std::string model_to_json(const AnyModel& model);
AnyModel model_from_json(const std::string& text);

}  // namespace keydyn::supervised
