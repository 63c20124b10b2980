#include <algorithm>
#include <cmath>

#include "keydyn/anomaly.hpp"
#include "keydyn/errors.hpp"

namespace keydyn::anomaly {

namespace {

constexpr double kLrdCap = 1e12;

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double d2 = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    d2 += d * d;
  }
  return std::sqrt(d2);
}

// k-distance neighborhood: every point within the k-th smallest distance.
// Ties therefore enlarge the neighborhood instead of being broken
// arbitrarily, which keeps the result order-independent.
struct Neighborhood {
  double k_dist = 0.0;
  std::vector<std::size_t> members;
};

Neighborhood neighborhood_of(const std::vector<double>& dists,
                             const std::vector<std::size_t>& candidates,
                             std::size_t k) {
  std::vector<double> sorted;
  sorted.reserve(candidates.size());
  for (std::size_t i : candidates) sorted.push_back(dists[i]);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(k - 1),
                   sorted.end());
  Neighborhood nb;
  nb.k_dist = sorted[k - 1];
  for (std::size_t i : candidates)
    if (dists[i] <= nb.k_dist) nb.members.push_back(i);
  return nb;
}

}  // namespace

LofModel fit_lof(const Matrix& X, const LofConfig& config) {
  const std::size_t n = X.size();
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "lof needs >= 2 rows");
  if (config.k < 1 || static_cast<std::size_t>(config.k) >= n)
    throw Error(ErrorCode::KTooLarge, "lof requires 1 <= k < n");
  const auto k = static_cast<std::size_t>(config.k);

  LofModel m;
  m.X = X;
  m.config = config;
  Matrix dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dist[i][j] = dist[j][i] = euclidean(X[i], X[j]);

  std::vector<Neighborhood> nb(n);
  m.k_distance.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    others.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) others.push_back(j);
    nb[i] = neighborhood_of(dist[i], others, k);
    m.k_distance[i] = nb[i].k_dist;
  }

  m.lrd.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double reach = 0.0;
    for (std::size_t j : nb[i].members)
      reach += std::max(m.k_distance[j], dist[i][j]);
    reach /= static_cast<double>(nb[i].members.size());
    if (reach > 0.0) {
      m.lrd[i] = 1.0 / reach;
    } else {
      m.lrd[i] = kLrdCap;  // duplicate points collapse reach to zero
      ++m.capped;
    }
  }
  return m;
}

double LofModel::score(const std::vector<double>& x) const {
  const std::size_t n = X.size();
  std::vector<double> dist(n);
  std::vector<std::size_t> candidates;
  candidates.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = euclidean(X[i], x);
    // Skip training rows that coincide with x: a training point then sees
    // exactly the neighbors it saw during fitting.
    if (dist[i] > 0.0) candidates.push_back(i);
  }
  if (candidates.empty()) return 1.0;  // x duplicates the whole set
  const auto k = std::min(static_cast<std::size_t>(config.k),
                          candidates.size());
  const Neighborhood nb = neighborhood_of(dist, candidates, k);

  double reach = 0.0;
  double lrd_sum = 0.0;
  for (std::size_t j : nb.members) {
    reach += std::max(k_distance[j], dist[j]);
    lrd_sum += lrd[j];
  }
  const double count = static_cast<double>(nb.members.size());
  reach /= count;
  const double lrd_x = reach > 0.0 ? 1.0 / reach : kLrdCap;
  return lrd_sum / count / lrd_x;
}

}  // namespace keydyn::anomaly
