#include "keydyn/supervised.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "keydyn/errors.hpp"
#include "keydyn/rng.hpp"

namespace keydyn::supervised {

using json = nlohmann::json;

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow
double softplus(double z) {
  return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0);
}

std::vector<double> to01(const std::vector<Label>& y) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    out[i] = y[i] == Label::stress ? 1.0 : 0.0;
  return out;
}

void check_training_input(const Matrix& X, const std::vector<Label>& y) {
  if (X.size() != y.size())
    throw Error(ErrorCode::LengthMismatch, "rows/labels size mismatch");
  if (X.empty())
    throw Error(ErrorCode::TooFewSamples, "empty training set");
  const std::size_t d = X[0].size();
  if (d == 0) throw Error(ErrorCode::DegenerateData, "zero-width rows");
  for (const auto& row : X)
    if (row.size() != d)
      throw Error(ErrorCode::LengthMismatch, "ragged feature matrix");
  // Single-class data is allowed: every trainer degenerates to a constant
  // predictor for that class.
  for (Label l : y)
    if (l != Label::normal && l != Label::stress)
      throw Error(ErrorCode::NonBinaryLabels, "unlabeled training row");
}

}  // namespace

// ---- splitting ----

namespace {

// Largest-remainder apportionment of `target` across classes with the given
// ideal shares, never exceeding per-class capacity.
std::vector<std::size_t> apportion(std::size_t target,
                                   const std::vector<double>& ideal,
                                   const std::vector<std::size_t>& cap) {
  const std::size_t k = ideal.size();
  std::vector<std::size_t> out(k);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    out[c] = std::min(static_cast<std::size_t>(std::floor(ideal[c])), cap[c]);
    assigned += out[c];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     const double ra = ideal[a] - std::floor(ideal[a]);
                     const double rb = ideal[b] - std::floor(ideal[b]);
                     return ra > rb;
                   });
  while (assigned < target) {
    bool bumped = false;
    for (std::size_t c : order) {
      if (assigned == target) break;
      if (out[c] < cap[c]) {
        ++out[c];
        ++assigned;
        bumped = true;
      }
    }
    if (!bumped) break;  // every class at capacity
  }
  return out;
}

}  // namespace

SplitIndices split_dataset(const std::vector<Label>& labels,
                           std::uint64_t seed, double train_frac,
                           double val_frac) {
  if (!(train_frac > 0.0) || !(val_frac > 0.0) ||
      !(train_frac + val_frac < 1.0))
    throw Error(ErrorCode::InvalidConfig, "split fractions must be positive "
                                          "and sum below 1");
  const std::size_t n = labels.size();
  if (n < 10)
    throw Error(ErrorCode::TooFewSamples,
                "need at least 10 labeled sessions to split");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == Label::normal) by_class[0].push_back(i);
    else if (labels[i] == Label::stress) by_class[1].push_back(i);
    else throw Error(ErrorCode::NonBinaryLabels, "unlabeled row in split");
  }
  Rng rng(seed);
  rng.shuffle(by_class[0]);
  rng.shuffle(by_class[1]);

  const auto n_train = static_cast<std::size_t>(
      std::floor(train_frac * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(
      std::floor(val_frac * static_cast<double>(n)));
  std::vector<double> ideal_train(2), ideal_val(2);
  std::vector<std::size_t> cap_train(2), cap_val(2);
  for (int c = 0; c < 2; ++c) {
    const double share =
        static_cast<double>(by_class[c].size()) / static_cast<double>(n);
    ideal_train[c] = static_cast<double>(n_train) * share;
    ideal_val[c] = static_cast<double>(n_val) * share;
    cap_train[c] = by_class[c].size();
  }
  const auto t = apportion(n_train, ideal_train, cap_train);
  for (int c = 0; c < 2; ++c) cap_val[c] = by_class[c].size() - t[c];
  const auto v = apportion(n_val, ideal_val, cap_val);

  SplitIndices out;
  for (int c = 0; c < 2; ++c) {
    const auto& rows = by_class[c];
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i < t[c]) out.train.push_back(rows[i]);
      else if (i < t[c] + v[c]) out.val.push_back(rows[i]);
      else out.test.push_back(rows[i]);
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// ---- logistic regression ----

double LogRegModel::decision(const std::vector<double>& x) const {
  double z = b;
  for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * x[j];
  return sigmoid(z);
}

Label LogRegModel::predict(const std::vector<double>& x) const {
  return decision(x) >= 0.5 ? Label::stress : Label::normal;
}

LogRegGrad logreg_loss_grad(const std::vector<double>& w, double b,
                            const Matrix& X, const std::vector<double>& y01,
                            double l2) {
  const std::size_t n = X.size();
  const std::size_t d = w.size();
  LogRegGrad g;
  g.grad_w.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double z = b;
    for (std::size_t j = 0; j < d; ++j) z += w[j] * X[i][j];
    g.loss += softplus(z) - y01[i] * z;
    const double err = sigmoid(z) - y01[i];
    for (std::size_t j = 0; j < d; ++j) g.grad_w[j] += err * X[i][j];
    g.grad_b += err;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  g.loss *= inv_n;
  g.grad_b *= inv_n;
  double w2 = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    g.grad_w[j] = g.grad_w[j] * inv_n + l2 * w[j];
    w2 += w[j] * w[j];
  }
  g.loss += 0.5 * l2 * w2;
  return g;
}

LogRegModel train_logreg(const Matrix& X, const std::vector<Label>& y,
                         const LogRegConfig& config) {
  check_training_input(X, y);
  if (config.lr <= 0.0 || config.epochs < 1 || config.l2 < 0.0)
    throw Error(ErrorCode::InvalidConfig, "bad logreg settings");
  const auto y01 = to01(y);
  LogRegModel m;
  m.config = config;
  m.w.assign(X[0].size(), 0.0);
  m.b = 0.0;
  double lr = config.lr;
  double loss = logreg_loss_grad(m.w, m.b, X, y01, config.l2).loss;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto g = logreg_loss_grad(m.w, m.b, X, y01, config.l2);
    std::vector<double> w2 = m.w;
    for (std::size_t j = 0; j < w2.size(); ++j) w2[j] -= lr * g.grad_w[j];
    const double b2 = m.b - lr * g.grad_b;
    const double loss2 = logreg_loss_grad(w2, b2, X, y01, config.l2).loss;
    if (loss2 <= loss) {  // accept; otherwise halve the step and stay put
      m.w = std::move(w2);
      m.b = b2;
      loss = loss2;
    } else {
      lr *= 0.5;
    }
    m.train_losses.push_back(loss);
  }
  return m;
}

// ---- k nearest neighbours ----

Label KnnModel::predict(const std::vector<double>& x) const {
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = X[i][j] - x[j];
      d2 += d * d;
    }
    dist.emplace_back(d2, i);
  }
  const auto k = static_cast<std::size_t>(config.k);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k),
                    dist.end());
  std::size_t stress = 0;
  for (std::size_t i = 0; i < k; ++i)
    if (y[dist[i].second] == Label::stress) ++stress;
  return 2 * stress > k ? Label::stress : Label::normal;
}

KnnModel train_knn(const Matrix& X, const std::vector<Label>& y,
                   const KnnConfig& config) {
  check_training_input(X, y);
  if (config.k < 1)
    throw Error(ErrorCode::InvalidConfig, "k must be positive");
  if (static_cast<std::size_t>(config.k) > X.size())
    throw Error(ErrorCode::KTooLarge, "k exceeds training set size");
  return KnnModel{X, y, config};
}

// ---- random forest ----

Label ForestModel::predict(const std::vector<double>& x) const {
  std::size_t stress = 0;
  for (const auto& t : trees)
    if (t.predict(x) >= 0.5) ++stress;
  return 2 * stress > trees.size() ? Label::stress : Label::normal;
}

ForestModel train_random_forest(const Matrix& X, const std::vector<Label>& y,
                                const ForestConfig& config) {
  check_training_input(X, y);
  if (config.n_trees < 1 || config.max_depth < 1 || config.min_leaf < 1 ||
      config.n_features < 0)
    throw Error(ErrorCode::InvalidConfig, "bad forest settings");
  const auto y01 = to01(y);
  const std::size_t n = X.size();
  ForestModel m;
  m.config = config;
  if (m.config.n_features == 0)
    m.config.n_features = std::max(
        1, static_cast<int>(std::floor(std::sqrt(double(X[0].size())))));
  tree::GrowConfig gc;
  gc.max_depth = config.max_depth;
  gc.min_leaf = config.min_leaf;
  gc.n_features = m.config.n_features;
  gc.regression = false;
  for (int t = 0; t < config.n_trees; ++t) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> idx(n);
    if (config.bootstrap) {
      for (auto& i : idx) i = rng.uniform_index(n);
    } else {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
    }
    m.trees.push_back(tree::grow_tree(X, y01, idx, gc, rng));
  }
  return m;
}

// ---- gradient boosting ----

double BoostModel::decision(const std::vector<double>& x) const {
  double z = f0;
  for (const auto& t : trees) z += t.predict(x);
  return z;
}

Label BoostModel::predict(const std::vector<double>& x) const {
  return decision(x) >= 0.0 ? Label::stress : Label::normal;
}

BoostModel train_gboost(const Matrix& X, const std::vector<Label>& y,
                        const BoostConfig& config) {
  check_training_input(X, y);
  if (config.n_stages < 0 || config.lr <= 0.0 || config.max_depth < 1 ||
      config.min_leaf < 1)
    throw Error(ErrorCode::InvalidConfig, "bad boosting settings");
  const auto y01 = to01(y);
  const std::size_t n = X.size();
  BoostModel m;
  m.config = config;
  // Clamped so an all-one-class prior stays a finite logit; with zero stages
  // the model then predicts the majority class everywhere.
  const double prior = std::clamp(
      std::accumulate(y01.begin(), y01.end(), 0.0) / static_cast<double>(n),
      1e-12, 1.0 - 1e-12);
  m.f0 = std::log(prior / (1.0 - prior));

  std::vector<double> F(n, m.f0);
  const auto mean_loss = [&](const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += softplus(f[i]) - y01[i] * f[i];
    return s / static_cast<double>(n);
  };
  double loss = mean_loss(F);

  tree::GrowConfig gc;
  gc.max_depth = config.max_depth;
  gc.min_leaf = config.min_leaf;
  gc.regression = true;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  for (int stage = 0; stage < config.n_stages; ++stage) {
    std::vector<double> p(n), resid(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = sigmoid(F[i]);
      resid[i] = y01[i] - p[i];
    }
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(stage)));
    tree::Tree t = tree::grow_tree(X, resid, all, gc, rng);

    // Newton leaf values: sum(residual) / sum(p(1-p)) per leaf.
    std::vector<double> num(t.nodes.size(), 0.0), den(t.nodes.size(), 0.0);
    std::vector<std::size_t> leaf(n);
    for (std::size_t i = 0; i < n; ++i) {
      leaf[i] = t.leaf_of(X[i]);
      num[leaf[i]] += resid[i];
      den[leaf[i]] += p[i] * (1.0 - p[i]);
    }
    for (auto& nd : t.nodes)
      if (nd.feature < 0) {
        const std::size_t j = static_cast<std::size_t>(&nd - t.nodes.data());
        nd.value = den[j] > 1e-12 ? num[j] / den[j] : 0.0;
      }

    // Shrink, then halve further until the stage does not hurt the loss.
    double scale = config.lr;
    std::vector<double> F2(n);
    double loss2 = loss;
    while (true) {
      for (std::size_t i = 0; i < n; ++i)
        F2[i] = F[i] + scale * t.nodes[leaf[i]].value;
      loss2 = mean_loss(F2);
      if (loss2 <= loss || scale < 1e-9) break;
      scale *= 0.5;
    }
    if (loss2 <= loss) {
      F = std::move(F2);
      loss = loss2;
      for (auto& nd : t.nodes)
        if (nd.feature < 0) nd.value *= scale;
    } else {
      for (auto& nd : t.nodes)
        if (nd.feature < 0) nd.value = 0.0;
    }
    m.trees.push_back(std::move(t));
    m.train_losses.push_back(loss);
  }
  return m;
}

// ---- multilayer perceptron ----

std::size_t mlp_param_count(const std::vector<std::size_t>& layer_sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    n += layer_sizes[l + 1] * (layer_sizes[l] + 1);
  return n;
}

namespace {

// Forward pass; returns pre-sigmoid output z for each row and, when asked,
// the hidden activations needed for backprop.
std::vector<double> mlp_forward(const std::vector<std::size_t>& sizes,
                                const std::vector<double>& params,
                                const Matrix& X,
                                std::vector<Matrix>* activations) {
  const std::size_t n = X.size();
  const std::size_t n_layers = sizes.size() - 1;
  std::vector<double> z_out(n);
  if (activations) activations->assign(n_layers, Matrix(n));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> a = X[i];
    std::size_t off = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
      const std::size_t in = sizes[l];
      const std::size_t out = sizes[l + 1];
      std::vector<double> z(out);
      for (std::size_t r = 0; r < out; ++r) {
        double s = params[off + out * in + r];  // bias
        const double* wr = &params[off + r * in];
        for (std::size_t c = 0; c < in; ++c) s += wr[c] * a[c];
        z[r] = s;
      }
      off += out * (in + 1);
      if (l + 1 < n_layers) {
        for (auto& v : z) v = std::tanh(v);
        a = z;
        if (activations) (*activations)[l][i] = a;
      } else {
        z_out[i] = z[0];
        if (activations) (*activations)[l][i] = z;
      }
    }
  }
  return z_out;
}

}  // namespace

double mlp_loss(const std::vector<std::size_t>& sizes,
                const std::vector<double>& params, const Matrix& X,
                const std::vector<double>& y01) {
  const auto z = mlp_forward(sizes, params, X, nullptr);
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    s += softplus(z[i]) - y01[i] * z[i];
  return s / static_cast<double>(z.size());
}

std::pair<double, std::vector<double>> mlp_loss_grad(
    const std::vector<std::size_t>& sizes, const std::vector<double>& params,
    const Matrix& X, const std::vector<double>& y01) {
  const std::size_t n = X.size();
  const std::size_t n_layers = sizes.size() - 1;
  std::vector<Matrix> act;
  const auto z = mlp_forward(sizes, params, X, &act);
  std::vector<double> grad(params.size(), 0.0);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<std::size_t> offsets(n_layers);
  std::size_t off = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    offsets[l] = off;
    off += sizes[l + 1] * (sizes[l] + 1);
  }

  for (std::size_t i = 0; i < n; ++i) {
    loss += softplus(z[i]) - y01[i] * z[i];
    std::vector<double> delta{(sigmoid(z[i]) - y01[i]) * inv_n};
    for (std::size_t l = n_layers; l-- > 0;) {
      const std::size_t in = sizes[l];
      const std::size_t out = sizes[l + 1];
      const std::vector<double>& input = l == 0 ? X[i] : act[l - 1][i];
      double* gw = &grad[offsets[l]];
      for (std::size_t r = 0; r < out; ++r) {
        for (std::size_t c = 0; c < in; ++c)
          gw[r * in + c] += delta[r] * input[c];
        gw[out * in + r] += delta[r];
      }
      if (l == 0) break;
      std::vector<double> prev(in, 0.0);
      const double* w = &params[offsets[l]];
      for (std::size_t c = 0; c < in; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < out; ++r) s += w[r * in + c] * delta[r];
        prev[c] = s * (1.0 - input[c] * input[c]);  // tanh'
      }
      delta = std::move(prev);
    }
  }
  return {loss * inv_n, std::move(grad)};
}

double MlpModel::decision(const std::vector<double>& x) const {
  const auto z = mlp_forward(layer_sizes, params, {x}, nullptr);
  return sigmoid(z[0]);
}

Label MlpModel::predict(const std::vector<double>& x) const {
  return decision(x) >= 0.5 ? Label::stress : Label::normal;
}

MlpModel train_mlp(const Matrix& X, const std::vector<Label>& y,
                   const MlpConfig& config) {
  check_training_input(X, y);
  if (config.hidden.empty() || config.lr <= 0.0 || config.epochs < 1)
    throw Error(ErrorCode::InvalidConfig, "bad mlp settings");
  for (int h : config.hidden)
    if (h < 1) throw Error(ErrorCode::InvalidConfig, "bad hidden size");
  const auto y01 = to01(y);
  MlpModel m;
  m.config = config;
  m.layer_sizes.push_back(X[0].size());
  for (int h : config.hidden)
    m.layer_sizes.push_back(static_cast<std::size_t>(h));
  m.layer_sizes.push_back(1);

  Rng rng(config.seed);
  m.params.assign(mlp_param_count(m.layer_sizes), 0.0);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    const std::size_t in = m.layer_sizes[l];
    const std::size_t out = m.layer_sizes[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t k = 0; k < out * in; ++k)
      m.params[off + k] = rng.uniform(-1.0, 1.0) * scale;
    off += out * (in + 1);  // biases stay zero
  }

  double lr = config.lr;
  double loss = mlp_loss(m.layer_sizes, m.params, X, y01);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto [cur, grad] = mlp_loss_grad(m.layer_sizes, m.params, X, y01);
    std::vector<double> cand = m.params;
    for (std::size_t j = 0; j < cand.size(); ++j) cand[j] -= lr * grad[j];
    const double loss2 = mlp_loss(m.layer_sizes, cand, X, y01);
    if (loss2 <= loss) {
      m.params = std::move(cand);
      loss = loss2;
    } else {
      lr *= 0.5;
    }
    m.train_losses.push_back(loss);
  }
  return m;
}

// ---- common wrapper ----

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::logreg: return "logreg";
    case ModelKind::knn: return "knn";
    case ModelKind::random_forest: return "random_forest";
    case ModelKind::gboost: return "gboost";
    case ModelKind::mlp: return "mlp";
  }
  return "?";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "logreg") return ModelKind::logreg;
  if (name == "knn") return ModelKind::knn;
  if (name == "random_forest") return ModelKind::random_forest;
  if (name == "gboost") return ModelKind::gboost;
  if (name == "mlp") return ModelKind::mlp;
  throw Error(ErrorCode::InvalidConfig, "unknown model kind '" + name + "'");
}

Label AnyModel::predict(const std::vector<double>& x) const {
  return std::visit([&](const auto& m) { return m.predict(x); }, impl);
}

AnyModel fit_model(ModelKind kind, const Matrix& X,
                   const std::vector<Label>& y, std::uint64_t seed) {
  AnyModel m;
  m.kind = kind;
  switch (kind) {
    case ModelKind::logreg:
      m.impl = train_logreg(X, y);
      break;
    case ModelKind::knn:
      m.impl = train_knn(X, y);
      break;
    case ModelKind::random_forest: {
      ForestConfig c;
      c.seed = seed;
      m.impl = train_random_forest(X, y, c);
      break;
    }
    case ModelKind::gboost: {
      BoostConfig c;
      c.seed = seed;
      m.impl = train_gboost(X, y, c);
      break;
    }
    case ModelKind::mlp: {
      MlpConfig c;
      c.seed = seed;
      m.impl = train_mlp(X, y, c);
      break;
    }
  }
  return m;
}

namespace {

double accuracy_on(const AnyModel& m, const Matrix& X,
                   const std::vector<Label>& y) {
  if (y.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (m.predict(X[i]) == y[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

}  // namespace

std::pair<AnyModel, std::string> fit_with_grid(
    ModelKind kind, const Matrix& X_train, const std::vector<Label>& y_train,
    const Matrix& X_val, const std::vector<Label>& y_val,
    std::uint64_t seed) {
  struct Candidate {
    AnyModel model;
    json note;
  };
  std::vector<Candidate> grid;
  const auto add = [&](AnyModel m, json note) {
    grid.push_back({std::move(m), std::move(note)});
  };

  switch (kind) {
    case ModelKind::logreg:
      for (double lr : {0.3, 0.1, 0.03})
        for (double l2 : {1e-2, 1e-3, 1e-4}) {
          LogRegConfig c;
          c.lr = lr;
          c.l2 = l2;
          AnyModel m;
          m.kind = kind;
          m.impl = train_logreg(X_train, y_train, c);
          add(std::move(m), {{"lr", lr}, {"l2", l2}});
        }
      break;
    case ModelKind::knn:
      for (int k : {1, 3, 5, 7}) {
        if (static_cast<std::size_t>(k) > X_train.size()) continue;
        AnyModel m;
        m.kind = kind;
        m.impl = train_knn(X_train, y_train, KnnConfig{k});
        add(std::move(m), {{"k", k}});
      }
      break;
    case ModelKind::random_forest:
      for (int depth : {4, 8}) {
        ForestConfig c;
        c.max_depth = depth;
        c.seed = seed;
        AnyModel m;
        m.kind = kind;
        m.impl = train_random_forest(X_train, y_train, c);
        add(std::move(m), {{"max_depth", depth}});
      }
      break;
    case ModelKind::gboost:
      for (double lr : {0.1, 0.3})
        for (int depth : {2, 3}) {
          BoostConfig c;
          c.lr = lr;
          c.max_depth = depth;
          c.seed = seed;
          AnyModel m;
          m.kind = kind;
          m.impl = train_gboost(X_train, y_train, c);
          add(std::move(m), {{"lr", lr}, {"max_depth", depth}});
        }
      break;
    case ModelKind::mlp:
      for (int h : {8, 16})
        for (double lr : {0.05, 0.01}) {
          MlpConfig c;
          c.hidden = {h};
          c.lr = lr;
          c.seed = seed;
          AnyModel m;
          m.kind = kind;
          m.impl = train_mlp(X_train, y_train, c);
          add(std::move(m), {{"hidden", h}, {"lr", lr}});
        }
      break;
  }

  std::size_t best = 0;
  double best_acc = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double acc = accuracy_on(grid[i].model, X_val, y_val);
    if (acc > best_acc) {
      best_acc = acc;
      best = i;
    }
  }
  json note;
  note["kind"] = model_kind_name(kind);
  note["chosen"] = grid[best].note;
  note["val_accuracy"] = best_acc;
  return {std::move(grid[best].model), note.dump()};
}

metrics::ModelReport evaluate(const AnyModel& model, const Matrix& X,
                              const std::vector<Label>& y,
                              const SplitIndices& split) {
  metrics::ModelReport rep;
  rep.model = model_kind_name(model.kind);
  const auto eval_subset = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return metrics::SplitMetrics{};
    std::vector<Label> truth, pred;
    truth.reserve(idx.size());
    pred.reserve(idx.size());
    for (std::size_t i : idx) {
      truth.push_back(y[i]);
      pred.push_back(model.predict(X[i]));
    }
    return metrics::split_metrics(metrics::confusion(truth, pred));
  };
  rep.train = eval_subset(split.train);
  rep.val = eval_subset(split.val);
  rep.test = eval_subset(split.test);
  return rep;
}

// ---- serialization ----

namespace {

json tree_to_json(const tree::Tree& t) {
  json j;
  auto& f = j["feature"] = json::array();
  auto& th = j["threshold"] = json::array();
  auto& l = j["left"] = json::array();
  auto& r = j["right"] = json::array();
  auto& v = j["value"] = json::array();
  auto& n = j["n"] = json::array();
  for (const auto& nd : t.nodes) {
    f.push_back(nd.feature);
    th.push_back(nd.threshold);
    l.push_back(nd.left);
    r.push_back(nd.right);
    v.push_back(nd.value);
    n.push_back(nd.n);
  }
  return j;
}

tree::Tree tree_from_json(const json& j) {
  tree::Tree t;
  const auto& f = j.at("feature");
  for (std::size_t i = 0; i < f.size(); ++i) {
    tree::Node nd;
    nd.feature = j.at("feature")[i].get<int>();
    nd.threshold = j.at("threshold")[i].get<double>();
    nd.left = j.at("left")[i].get<int>();
    nd.right = j.at("right")[i].get<int>();
    nd.value = j.at("value")[i].get<double>();
    nd.n = j.at("n")[i].get<std::size_t>();
    t.nodes.push_back(nd);
  }
  return t;
}

std::vector<Label> labels_from_json(const json& arr) {
  std::vector<Label> out;
  for (const auto& s : arr)
    out.push_back(events::label_from_name(s.get<std::string>()));
  return out;
}

json labels_to_json(const std::vector<Label>& y) {
  json arr = json::array();
  for (Label l : y) arr.push_back(events::label_name(l));
  return arr;
}

}  // namespace

std::string model_to_json(const AnyModel& model) {
  json j;
  j["kind"] = model_kind_name(model.kind);
  j["feature_order"] = model.feature_order;
  j["pipeline_hash"] = model.pipeline_hash;
  json cfg, params;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LogRegModel>) {
          cfg = {{"lr", m.config.lr},
                 {"epochs", m.config.epochs},
                 {"l2", m.config.l2}};
          params = {{"w", m.w}, {"b", m.b}};
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          cfg = {{"k", m.config.k}};
          params = {{"X", m.X}, {"y", labels_to_json(m.y)}};
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          cfg = {{"n_trees", m.config.n_trees},
                 {"max_depth", m.config.max_depth},
                 {"min_leaf", m.config.min_leaf},
                 {"n_features", m.config.n_features},
                 {"bootstrap", m.config.bootstrap},
                 {"seed", m.config.seed}};
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
          params = {{"trees", std::move(trees)}};
        } else if constexpr (std::is_same_v<T, BoostModel>) {
          cfg = {{"n_stages", m.config.n_stages},
                 {"lr", m.config.lr},
                 {"max_depth", m.config.max_depth},
                 {"min_leaf", m.config.min_leaf},
                 {"seed", m.config.seed}};
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
          params = {{"f0", m.f0}, {"trees", std::move(trees)}};
        } else {
          cfg = {{"hidden", m.config.hidden},
                 {"lr", m.config.lr},
                 {"epochs", m.config.epochs},
                 {"seed", m.config.seed}};
          params = {{"layer_sizes", m.layer_sizes},
                    {"params", m.params}};
        }
      },
      model.impl);
  j["config"] = std::move(cfg);
  j["params"] = std::move(params);
  return j.dump(2);
}

AnyModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedLine,
                std::string("bad model json: ") + e.what());
  }
  try {
    AnyModel m;
    m.kind = model_kind_from_name(j.at("kind").get<std::string>());
    m.feature_order =
        j.at("feature_order").get<std::vector<std::string>>();
    m.pipeline_hash = j.at("pipeline_hash").get<std::string>();
    const json& cfg = j.at("config");
    const json& params = j.at("params");
    switch (m.kind) {
      case ModelKind::logreg: {
        LogRegModel lm;
        lm.config.lr = cfg.at("lr").get<double>();
        lm.config.epochs = cfg.at("epochs").get<int>();
        lm.config.l2 = cfg.at("l2").get<double>();
        lm.w = params.at("w").get<std::vector<double>>();
        lm.b = params.at("b").get<double>();
        m.impl = std::move(lm);
        break;
      }
      case ModelKind::knn: {
        KnnModel km;
        km.config.k = cfg.at("k").get<int>();
        km.X = params.at("X").get<Matrix>();
        km.y = labels_from_json(params.at("y"));
        m.impl = std::move(km);
        break;
      }
      case ModelKind::random_forest: {
        ForestModel fm;
        fm.config.n_trees = cfg.at("n_trees").get<int>();
        fm.config.max_depth = cfg.at("max_depth").get<int>();
        fm.config.min_leaf = cfg.at("min_leaf").get<int>();
        fm.config.n_features = cfg.at("n_features").get<int>();
        fm.config.bootstrap = cfg.at("bootstrap").get<bool>();
        fm.config.seed = cfg.at("seed").get<std::uint64_t>();
        for (const auto& t : params.at("trees"))
          fm.trees.push_back(tree_from_json(t));
        m.impl = std::move(fm);
        break;
      }
      case ModelKind::gboost: {
        BoostModel bm;
        bm.config.n_stages = cfg.at("n_stages").get<int>();
        bm.config.lr = cfg.at("lr").get<double>();
        bm.config.max_depth = cfg.at("max_depth").get<int>();
        bm.config.min_leaf = cfg.at("min_leaf").get<int>();
        bm.config.seed = cfg.at("seed").get<std::uint64_t>();
        bm.f0 = params.at("f0").get<double>();
        for (const auto& t : params.at("trees"))
          bm.trees.push_back(tree_from_json(t));
        m.impl = std::move(bm);
        break;
      }
      case ModelKind::mlp: {
        MlpModel mm;
        mm.config.hidden = cfg.at("hidden").get<std::vector<int>>();
        mm.config.lr = cfg.at("lr").get<double>();
        mm.config.epochs = cfg.at("epochs").get<int>();
        mm.config.seed = cfg.at("seed").get<std::uint64_t>();
        mm.layer_sizes =
            params.at("layer_sizes").get<std::vector<std::size_t>>();
        mm.params = params.at("params").get<std::vector<double>>();
        m.impl = std::move(mm);
        break;
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedLine,
                std::string("bad model json: ") + e.what());
  }
}

}  // namespace keydyn::supervised
