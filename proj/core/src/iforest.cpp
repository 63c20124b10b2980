#include <algorithm>
#include <cmath>
#include <numeric>

#include "keydyn/anomaly.hpp"
#include "keydyn/errors.hpp"
#include "keydyn/rng.hpp"

namespace keydyn::anomaly {

double average_path_length(std::size_t m) {
  if (m <= 1) return 0.0;
  if (m == 2) return 1.0;
  const double x = static_cast<double>(m - 1);
  const double harmonic = std::log(x) + 0.5772156649;
  return 2.0 * harmonic - 2.0 * x / static_cast<double>(m);
}

double IsoTree::path_length(const std::vector<double>& x) const {
  std::size_t i = 0;
  double depth = 0.0;
  while (nodes[i].feature >= 0) {
    const IsoNode& nd = nodes[i];
    i = static_cast<std::size_t>(
        x[static_cast<std::size_t>(nd.feature)] < nd.threshold ? nd.left
                                                               : nd.right);
    depth += 1.0;
  }
  return depth + average_path_length(nodes[i].n);
}

namespace {

struct IsoBuilder {
  const Matrix& X;
  int height_limit;
  Rng& rng;
  std::vector<IsoNode> nodes;

  int build(const std::vector<std::size_t>& idx, int depth) {
    const int self = static_cast<int>(nodes.size());
    nodes.push_back({});
    nodes[self].n = idx.size();
    if (depth >= height_limit || idx.size() <= 1) return self;

    // Split features must actually vary inside the node.
    const std::size_t d = X[0].size();
    std::vector<std::size_t> usable;
    std::vector<std::pair<double, double>> range(d);
    for (std::size_t f = 0; f < d; ++f) {
      double lo = X[idx[0]][f];
      double hi = lo;
      for (std::size_t i : idx) {
        lo = std::min(lo, X[i][f]);
        hi = std::max(hi, X[i][f]);
      }
      range[f] = {lo, hi};
      if (hi > lo) usable.push_back(f);
    }
    if (usable.empty()) return self;

    const std::size_t f = usable[rng.uniform_index(usable.size())];
    const double threshold = rng.uniform(range[f].first, range[f].second);
    std::vector<std::size_t> left, right;
    for (std::size_t i : idx)
      (X[i][f] < threshold ? left : right).push_back(i);
    if (left.empty() || right.empty()) {
      // threshold landed on the boundary; degenerate split, stop here
      return self;
    }
    nodes[self].feature = static_cast<int>(f);
    nodes[self].threshold = threshold;
    const int l = build(left, depth + 1);
    nodes[self].left = l;
    const int r = build(right, depth + 1);
    nodes[self].right = r;
    return self;
  }
};

}  // namespace

double IForestModel::score(const std::vector<double>& x) const {
  double total = 0.0;
  for (const auto& t : trees) total += t.path_length(x);
  const double mean = total / static_cast<double>(trees.size());
  return std::pow(2.0, -mean / average_path_length(subsample));
}

IForestModel fit_iforest(const Matrix& X, const IForestConfig& config) {
  const std::size_t n = X.size();
  if (n < 2)
    throw Error(ErrorCode::TooFewSamples, "isolation forest needs >= 2 rows");
  if (config.n_trees < 1 || config.subsample < 0 || config.subsample == 1)
    throw Error(ErrorCode::InvalidConfig, "bad isolation forest settings");
  bool all_same = true;
  for (const auto& row : X)
    if (row != X[0]) {
      all_same = false;
      break;
    }
  if (all_same)
    throw Error(ErrorCode::DegenerateData, "all training points identical");

  IForestModel m;
  m.config = config;
  m.subsample = config.subsample == 0
                    ? std::min<std::size_t>(256, n)
                    : std::min(static_cast<std::size_t>(config.subsample), n);
  const int height_limit = static_cast<int>(
      std::ceil(std::log2(static_cast<double>(m.subsample))));

  for (int t = 0; t < config.n_trees; ++t) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < m.subsample; ++i)
      std::swap(pool[i], pool[i + rng.uniform_index(n - i)]);
    pool.resize(m.subsample);
    IsoBuilder b{X, height_limit, rng, {}};
    b.build(pool, 0);
    m.trees.push_back(IsoTree{std::move(b.nodes)});
  }
  return m;
}

}  // namespace keydyn::anomaly
