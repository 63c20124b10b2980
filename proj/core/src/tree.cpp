#include "keydyn/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace keydyn::tree {

std::size_t Tree::leaf_of(const std::vector<double>& x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const Node& nd = nodes[i];
    i = static_cast<std::size_t>(
        x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left
                                                                : nd.right);
  }
  return i;
}

double Tree::predict(const std::vector<double>& x) const {
  return nodes[leaf_of(x)].value;
}

double gini(std::size_t pos, std::size_t neg) {
  const double n = static_cast<double>(pos + neg);
  if (n == 0.0) return 0.0;
  const double p = static_cast<double>(pos) / n;
  const double q = static_cast<double>(neg) / n;
  return 1.0 - p * p - q * q;
}

namespace {

struct Builder {
  const std::vector<std::vector<double>>& X;
  const std::vector<double>& y;
  const GrowConfig& cfg;
  Rng& rng;
  std::vector<Node> nodes;

  std::vector<std::size_t> split_candidates() {
    const std::size_t d = X[0].size();
    std::vector<std::size_t> feats(d);
    std::iota(feats.begin(), feats.end(), std::size_t{0});
    const std::size_t m = static_cast<std::size_t>(cfg.n_features);
    if (m == 0 || m >= d) return feats;
    for (std::size_t i = 0; i < m; ++i)
      std::swap(feats[i], feats[i + rng.uniform_index(d - i)]);
    feats.resize(m);
    std::sort(feats.begin(), feats.end());
    return feats;
  }

  // Sum of child costs (weighted Gini or SSE) for a sorted prefix split.
  double split_cost(double n_l, double s1_l, double s2_l, double n_r,
                    double s1_r, double s2_r) const {
    if (cfg.regression)
      return (s2_l - s1_l * s1_l / n_l) + (s2_r - s1_r * s1_r / n_r);
    const auto gini_n = [](double n, double pos) {
      const double neg = n - pos;
      return n - (pos * pos + neg * neg) / n;
    };
    return gini_n(n_l, s1_l) + gini_n(n_r, s1_r);
  }

  int build(const std::vector<std::size_t>& idx, int depth) {
    const std::size_t n = idx.size();
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i : idx) {
      sum += y[i];
      lo = std::min(lo, y[i]);
      hi = std::max(hi, y[i]);
    }
    const int self = static_cast<int>(nodes.size());
    nodes.push_back({});
    nodes[self].value = sum / static_cast<double>(n);
    nodes[self].n = n;
    const bool pure = hi - lo == 0.0;
    if (depth >= cfg.max_depth ||
        n < 2 * static_cast<std::size_t>(cfg.min_leaf) || pure)
      return self;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> vt;  // (value, target)
    for (std::size_t f : split_candidates()) {
      vt.clear();
      for (std::size_t i : idx) vt.emplace_back(X[i][f], y[i]);
      std::sort(vt.begin(), vt.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double s1_l = 0.0;
      double s2_l = 0.0;
      double s1 = 0.0;
      double s2 = 0.0;
      for (const auto& [v, t] : vt) {
        s1 += t;
        s2 += t * t;
      }
      for (std::size_t p = 1; p < n; ++p) {
        s1_l += vt[p - 1].second;
        s2_l += vt[p - 1].second * vt[p - 1].second;
        if (p < static_cast<std::size_t>(cfg.min_leaf) ||
            n - p < static_cast<std::size_t>(cfg.min_leaf))
          continue;
        if (!(vt[p - 1].first < vt[p].first)) continue;
        const double cost = split_cost(
            static_cast<double>(p), s1_l, s2_l, static_cast<double>(n - p),
            s1 - s1_l, s2 - s2_l);
        if (cost < best_cost) {
          best_cost = cost;
          best_feature = static_cast<int>(f);
          best_threshold = vt[p - 1].first / 2.0 + vt[p].first / 2.0;
        }
      }
    }
    if (best_feature < 0) return self;

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx)
      (X[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left
                                                                      : right)
          .push_back(i);
    nodes[self].feature = best_feature;
    nodes[self].threshold = best_threshold;
    const int l = build(left, depth + 1);
    nodes[self].left = l;
    const int r = build(right, depth + 1);
    nodes[self].right = r;
    return self;
  }
};

}  // namespace

Tree grow_tree(const std::vector<std::vector<double>>& X,
               const std::vector<double>& y,
               const std::vector<std::size_t>& idx, const GrowConfig& config,
               Rng& rng) {
  Builder b{X, y, config, rng, {}};
  b.build(idx, 0);
  return Tree{std::move(b.nodes)};
}

}  // namespace keydyn::tree
