#include <algorithm>
#include <cmath>
#include <numeric>

#include "keydyn/anomaly.hpp"
#include "keydyn/errors.hpp"
#include "keydyn/rng.hpp"

namespace keydyn::anomaly {

namespace {

// Lower-triangular Cholesky factor; empty result when not positive definite.
Matrix cholesky(const Matrix& a) {
  const std::size_t d = a.size();
  Matrix L(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
      if (i == j) {
        if (s <= 0.0) return {};
        L[i][i] = std::sqrt(s);
      } else {
        L[i][j] = s / L[j][j];
      }
    }
  }
  return L;
}

// Squared Mahalanobis distance via forward substitution on L z = (x - mu).
double mahalanobis2(const std::vector<double>& x,
                    const std::vector<double>& mu, const Matrix& L) {
  const std::size_t d = x.size();
  std::vector<double> z(d);
  double d2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double s = x[i] - mu[i];
    for (std::size_t k = 0; k < i; ++k) s -= L[i][k] * z[k];
    z[i] = s / L[i][i];
    d2 += z[i] * z[i];
  }
  return d2;
}

// Cholesky with escalating ridge; flags when regularization was needed and
// reports the ridge that made the factorization succeed.
Matrix factor_or_regularize(const Matrix& cov, bool* regularized,
                            double* ridge_out = nullptr) {
  Matrix L = cholesky(cov);
  if (!L.empty()) return L;
  if (regularized) *regularized = true;
  const std::size_t d = cov.size();
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov[i][i];
  double eps = 1e-6 * (trace > 0.0 ? trace / static_cast<double>(d) : 1.0);
  for (int attempt = 0; attempt < 40; ++attempt) {
    Matrix c = cov;
    for (std::size_t i = 0; i < d; ++i) c[i][i] += eps;
    L = cholesky(c);
    if (!L.empty()) {
      if (ridge_out) *ridge_out = eps;
      return L;
    }
    eps *= 10.0;
  }
  throw Error(ErrorCode::DegenerateData,
              "covariance cannot be made positive definite");
}

double det_from_factor(const Matrix& L) {
  double det = 1.0;
  for (std::size_t i = 0; i < L.size(); ++i) det *= L[i][i] * L[i][i];
  return det;
}

Matrix inverse_from_factor(const Matrix& L) {
  const std::size_t d = L.size();
  // invert L by forward substitution, then Sigma^-1 = L^-T L^-1
  Matrix Li(d, std::vector<double>(d, 0.0));
  for (std::size_t j = 0; j < d; ++j) {
    Li[j][j] = 1.0 / L[j][j];
    for (std::size_t i = j + 1; i < d; ++i) {
      double s = 0.0;
      for (std::size_t k = j; k < i; ++k) s += L[i][k] * Li[k][j];
      Li[i][j] = -s / L[i][i];
    }
  }
  Matrix inv(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = std::max(i, j); k < d; ++k)
        s += Li[k][i] * Li[k][j];
      inv[i][j] = s;
    }
  return inv;
}

// chi-squared upper quantiles for d = 1..10
constexpr double kChi2_95[10] = {
    3.84145882069412,  5.99146454710798, 7.81472790325118, 9.48772903678115,
    11.0704976935164,  12.591587243744,  14.0671404493402, 15.5073130558655,
    16.9189776046204,  18.3070380532751};
constexpr double kChi2_975[10] = {
    5.02388618731489,  7.37775890822787, 9.34840360449615, 11.1432867818778,
    12.83250199403,    14.4493753354479, 16.0127642746293, 17.5345461394846,
    19.0227677986416,  20.4831773508074};
constexpr double kChi2_99[10] = {
    6.63489660102121,  9.21034037197618, 11.3448667301444, 13.2767041359876,
    15.086272469389,   16.8118938297709, 18.4753069065824, 20.0902350296632,
    21.6659943334619,  23.2092511589544};

}  // namespace

double chi2_quantile(std::size_t d, double q) {
  if (d < 1 || d > 10)
    throw Error(ErrorCode::InvalidConfig,
                "chi-squared table covers dimensions 1..10");
  if (q == 0.95) return kChi2_95[d - 1];
  if (q == 0.975) return kChi2_975[d - 1];
  if (q == 0.99) return kChi2_99[d - 1];
  throw Error(ErrorCode::InvalidConfig,
              "chi-squared table covers quantiles 0.95, 0.975, 0.99");
}

MeanCov mean_cov(const Matrix& X, const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw Error(ErrorCode::TooFewSamples, "empty support");
  const std::size_t d = X[0].size();
  const double m = static_cast<double>(idx.size());
  MeanCov out;
  out.mean.assign(d, 0.0);
  for (std::size_t i : idx)
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += X[i][j];
  for (auto& v : out.mean) v /= m;
  out.cov.assign(d, std::vector<double>(d, 0.0));
  for (std::size_t i : idx)
    for (std::size_t a = 0; a < d; ++a) {
      const double da = X[i][a] - out.mean[a];
      for (std::size_t b = a; b < d; ++b)
        out.cov[a][b] += da * (X[i][b] - out.mean[b]);
    }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b)
      out.cov[b][a] = out.cov[a][b] /= m;
  return out;
}

double cov_det(const Matrix& cov) {
  const Matrix L = cholesky(cov);
  if (L.empty()) return 0.0;  // singular or not PD
  return det_from_factor(L);
}

std::vector<std::size_t> c_step(const Matrix& X, const MeanCov& fit,
                                std::size_t h) {
  bool reg = false;
  const Matrix L = factor_or_regularize(fit.cov, &reg);
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(X.size());
  for (std::size_t i = 0; i < X.size(); ++i)
    dist.emplace_back(mahalanobis2(X[i], fit.mean, L), i);
  std::sort(dist.begin(), dist.end());
  std::vector<std::size_t> support;
  support.reserve(h);
  for (std::size_t i = 0; i < h; ++i) support.push_back(dist[i].second);
  std::sort(support.begin(), support.end());
  return support;
}

double RobustCovModel::score(const std::vector<double>& x) const {
  const std::size_t d = mean.size();
  double d2 = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    const double da = x[a] - mean[a];
    for (std::size_t b = 0; b < d; ++b)
      d2 += da * cov_inverse[a][b] * (x[b] - mean[b]);
  }
  return std::sqrt(std::max(0.0, d2));
}

RobustCovModel fit_robust_cov(const Matrix& X,
                              const RobustCovConfig& config) {
  const std::size_t n = X.size();
  if (n == 0) throw Error(ErrorCode::TooFewSamples, "empty training set");
  const std::size_t d = X[0].size();
  if (n <= d + 1)
    throw Error(ErrorCode::TooFewSamples,
                "robust covariance needs more than d + 1 rows");
  if (!(config.support_frac > 0.0) || config.support_frac > 1.0 ||
      config.n_starts < 1 || config.max_csteps < 1)
    throw Error(ErrorCode::InvalidConfig, "bad robust covariance settings");

  const std::size_t h =
      std::min(n, std::max<std::size_t>(
                      d + 1, static_cast<std::size_t>(std::floor(
                                 config.support_frac *
                                 static_cast<double>(n)))));

  double best_det = -1.0;
  std::vector<std::size_t> best_support;
  std::vector<double> best_dets;
  for (int start = 0; start < config.n_starts; ++start) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(start)));
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < d + 1; ++i)
      std::swap(pool[i], pool[i + rng.uniform_index(n - i)]);
    pool.resize(d + 1);

    std::vector<std::size_t> support = c_step(X, mean_cov(X, pool), h);
    std::vector<double> dets;
    for (int step = 0; step < config.max_csteps; ++step) {
      const MeanCov fit = mean_cov(X, support);
      dets.push_back(cov_det(fit.cov));
      std::vector<std::size_t> next = c_step(X, fit, h);
      if (next == support) break;
      support = std::move(next);
    }
    const double det = dets.back();
    if (best_det < 0.0 || det < best_det) {
      best_det = det;
      best_support = support;
      best_dets = std::move(dets);
    }
  }

  RobustCovModel m;
  m.config = config;
  m.cstep_dets = std::move(best_dets);
  MeanCov fit = mean_cov(X, best_support);
  m.mean = std::move(fit.mean);
  m.cov = std::move(fit.cov);
  double ridge = 0.0;
  const Matrix L = factor_or_regularize(m.cov, &m.regularized, &ridge);
  if (m.regularized)
    for (std::size_t i = 0; i < d; ++i) m.cov[i][i] += ridge;
  m.det = det_from_factor(L);
  m.cov_inverse = inverse_from_factor(L);
  if (d <= 10 &&
      (config.quantile == 0.95 || config.quantile == 0.975 ||
       config.quantile == 0.99))
    m.threshold = std::sqrt(chi2_quantile(d, config.quantile));
  return m;
}

}  // namespace keydyn::anomaly
