#include <algorithm>
#include <cmath>
#include <limits>

#include "keydyn/anomaly.hpp"
#include "keydyn/errors.hpp"

namespace keydyn::anomaly {

double rbf_kernel(const std::vector<double>& a, const std::vector<double>& b,
                  double gamma) {
  double d2 = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

double OcsvmModel::score(const std::vector<double>& x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    if (alpha[i] == 0.0) continue;
    s += alpha[i] * rbf_kernel(sv[i], x, gamma);
  }
  return rho - s;
}

OcsvmModel fit_ocsvm(const Matrix& X, const OcsvmConfig& config) {
  const std::size_t n = X.size();
  if (n < 1) throw Error(ErrorCode::TooFewSamples, "empty training set");
  if (!(config.nu > 0.0) || config.nu > 1.0)
    throw Error(ErrorCode::InvalidConfig, "nu must lie in (0, 1]");
  if (config.max_iter < 1 || config.tol <= 0.0 || config.gamma < 0.0)
    throw Error(ErrorCode::InvalidConfig, "bad ocsvm settings");
  const std::size_t d = X[0].size();

  OcsvmModel m;
  m.sv = X;
  m.config = config;
  if (config.gamma > 0.0) {
    m.gamma = config.gamma;
  } else {
    // 1 / (d * pooled variance), the usual "scale" heuristic
    double mean = 0.0;
    for (const auto& row : X)
      for (double v : row) mean += v;
    mean /= static_cast<double>(n * d);
    double var = 0.0;
    for (const auto& row : X)
      for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n * d);
    m.gamma = var > 0.0 ? 1.0 / (static_cast<double>(d) * var) : 1.0;
  }

  const double box = 1.0 / (config.nu * static_cast<double>(n));
  m.alpha.assign(n, 1.0 / static_cast<double>(n));

  Matrix K(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      K[i][j] = K[j][i] = rbf_kernel(X[i], X[j], m.gamma);

  // gradient of (1/2) a^T K a
  std::vector<double> G(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) G[i] += K[i][j] * m.alpha[j];

  const double eps = 1e-12;
  m.converged = false;
  int it = 0;
  for (; it < config.max_iter; ++it) {
    // most-violating pair: mass can flow from the highest-gradient point
    // with alpha > 0 to the lowest-gradient point with alpha < box
    std::size_t up = n, down = n;
    double g_up = -std::numeric_limits<double>::infinity();
    double g_down = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (m.alpha[i] > eps && G[i] > g_up) {
        g_up = G[i];
        up = i;
      }
      if (m.alpha[i] < box - eps && G[i] < g_down) {
        g_down = G[i];
        down = i;
      }
    }
    if (up == n || down == n || up == down) {  // nothing movable remains
      m.gap = 0.0;
      m.converged = true;
      break;
    }
    m.gap = g_up - g_down;
    if (m.gap <= config.tol) {
      m.converged = true;
      break;
    }
    const double eta = K[up][up] + K[down][down] - 2.0 * K[up][down];
    double t = eta > 1e-15 ? (g_up - g_down) / eta
                           : std::numeric_limits<double>::infinity();
    t = std::min(t, m.alpha[up]);
    t = std::min(t, box - m.alpha[down]);
    if (t <= 0.0) {
      m.converged = true;
      break;
    }
    m.alpha[up] -= t;
    m.alpha[down] += t;
    for (std::size_t i = 0; i < n; ++i)
      G[i] += t * (K[i][down] - K[i][up]);
  }
  m.iters = it;

  // rho from margin support vectors, falling back to wider sets
  double sum = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (m.alpha[i] > eps && m.alpha[i] < box - eps) {
      sum += G[i];
      ++cnt;
    }
  if (cnt == 0)
    for (std::size_t i = 0; i < n; ++i)
      if (m.alpha[i] > eps) {
        sum += G[i];
        ++cnt;
      }
  m.rho = sum / static_cast<double>(cnt);
  return m;
}

}  // namespace keydyn::anomaly
