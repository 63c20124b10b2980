#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "keydyn/events.hpp"
#include "keydyn/metrics.hpp"

namespace keydyn::anomaly {

using events::Label;
using Matrix = std::vector<std::vector<double>>;

enum class DetectorKind { iforest, ocsvm, robust_cov, lof };
const char* detector_kind_name(DetectorKind kind);
DetectorKind detector_kind_from_name(const std::string& name);

// Detectors train on normal behaviour only: `train` holds
// floor(frac_normal_train * n_total) normal rows (or a fraction of the
// normal class when frac_of_normals is set); everything else is test.
struct AnomalySplit {
  std::vector<std::size_t> train, test;
};
AnomalySplit split_anomaly(const std::vector<Label>& labels,
                           std::uint64_t seed,
                           double frac_normal_train = 0.33,
                           bool frac_of_normals = false);

// ---- isolation forest ----

struct IForestConfig {
  int n_trees = 100;
  int subsample = 0;  // 0: min(256, n); must end up >= 2
  std::uint64_t seed = 0;
};

struct IsoNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::size_t n = 0;  // rows that reached the node during fitting
};

struct IsoTree {
  std::vector<IsoNode> nodes;
  double path_length(const std::vector<double>& x) const;
};

// Expected path length of an unsuccessful search in a BST of m nodes.
double average_path_length(std::size_t m);

struct IForestModel {
  std::vector<IsoTree> trees;
  std::size_t subsample = 0;
  IForestConfig config;
  double threshold = 0.5;
  // 2^(-mean path length / c(subsample)), in (0, 1].
  double score(const std::vector<double>& x) const;
};

IForestModel fit_iforest(const Matrix& X, const IForestConfig& config = {});

// ---- one-class svm ----

struct OcsvmConfig {
  double nu = 0.1;
  double gamma = 0.0;  // 0: 1/(d * pooled variance)
  int max_iter = 100000;
  double tol = 1e-8;
};

struct OcsvmModel {
  Matrix sv;  // the full training set; zero alphas contribute nothing
  std::vector<double> alpha;
  double gamma = 0.0;
  double rho = 0.0;
  OcsvmConfig config;
  double threshold = 0.0;
  bool converged = true;  // when false the model is still usable
  double gap = 0.0;
  int iters = 0;
  double score(const std::vector<double>& x) const;  // rho - sum a_i K(x_i,x)
};

double rbf_kernel(const std::vector<double>& a, const std::vector<double>& b,
                  double gamma);

// Minimizes (1/2) a^T K a over the box [0, 1/(nu n)]^n intersected with
// sum(a) = 1, via pairwise coordinate steps that stay feasible throughout.
OcsvmModel fit_ocsvm(const Matrix& X, const OcsvmConfig& config = {});

// ---- robust covariance ----

struct RobustCovConfig {
  double support_frac = 0.75;
  int n_starts = 50;
  int max_csteps = 100;
  double quantile = 0.975;
  std::uint64_t seed = 0;
};

struct RobustCovModel {
  std::vector<double> mean;
  Matrix cov;
  Matrix cov_inverse;
  double det = 0.0;
  bool regularized = false;
  RobustCovConfig config;
  double threshold = 0.0;  // sqrt of a chi-squared quantile when d <= 10
  std::vector<double> cstep_dets;  // winning start's determinant path
  double score(const std::vector<double>& x) const;  // Mahalanobis distance
};

struct MeanCov {
  std::vector<double> mean;
  Matrix cov;  // maximum-likelihood scaling (divide by m)
};
MeanCov mean_cov(const Matrix& X, const std::vector<std::size_t>& idx);
double cov_det(const Matrix& cov);
// One concentration step: keep the h rows with the smallest Mahalanobis
// distance under `fit` (ties to the lower index), sorted ascending.
std::vector<std::size_t> c_step(const Matrix& X, const MeanCov& fit,
                                std::size_t h);
// Embedded table, d in 1..10, q in {0.95, 0.975, 0.99}.
double chi2_quantile(std::size_t d, double q);

RobustCovModel fit_robust_cov(const Matrix& X,
                              const RobustCovConfig& config = {});

// ---- local outlier factor ----

struct LofConfig {
  int k = 10;
};

struct LofModel {
  Matrix X;
  std::vector<double> k_distance;
  std::vector<double> lrd;
  LofConfig config;
  double threshold = 0.0;
  std::size_t capped = 0;  // rows whose lrd hit the duplicate-point cap
  // Novelty score against the stored set; training points that coincide
  // with x are left out, so scoring a training row replays its fit value.
  double score(const std::vector<double>& x) const;
};

LofModel fit_lof(const Matrix& X, const LofConfig& config = {});

// ---- shared plumbing ----

// Linear-interpolated (1 - contamination) quantile of the training scores;
// contamination 0 picks the maximum.
double calibrate_threshold(const std::vector<double>& train_scores,
                           double contamination = 0.05);

struct AnyDetector {
  DetectorKind kind = DetectorKind::iforest;
  std::variant<IForestModel, OcsvmModel, RobustCovModel, LofModel> impl;
  std::vector<std::string> feature_order;
  std::string pipeline_hash;
  double score(const std::vector<double>& x) const;
  double threshold() const;
  // Higher score = more anomalous; above threshold reads as stress.
  Label predict(const std::vector<double>& x) const;
};

AnyDetector fit_detector(DetectorKind kind, const Matrix& X_train,
                         std::uint64_t seed, double contamination = 0.05);

metrics::ModelReport evaluate_anomaly(const AnyDetector& detector,
                                      const Matrix& X,
                                      const std::vector<Label>& y,
                                      const AnomalySplit& split);

std::string detector_to_json(const AnyDetector& detector);
AnyDetector detector_from_json(const std::string& text);

}  // namespace keydyn::anomaly
