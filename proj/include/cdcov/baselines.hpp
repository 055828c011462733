#pragma once

// Comparator estimators: entry-adaptive hard thresholding of the sample
// covariance with the tuning constant chosen by K-fold cross-validation, and a
// simplified POET (top-K spectral part plus thresholded residual).

#include "cdcov/matrix_core.hpp"

#include <vector>

namespace cdcov {

/// 50 log-spaced values on [0.05, 5].
std::vector<double> default_delta_grid(std::size_t count = 50, double lo = 0.05, double hi = 5.0);

struct AtConfig {
  std::vector<double> delta_grid = default_delta_grid();
  Index folds = 5;
  RngSeed cv_seed{};

  void validate() const;
};

struct PoetConfig {
  Index factors = 1;  // K; 0 reduces POET to plain adaptive thresholding
  AtConfig residual_threshold;
};

/// Per-entry threshold scale sqrt(theta_ij log p / n), where theta_ij is the
/// empirical variance of x_i x_j about s_ij (MLE sample covariance of the
/// centred data). Multiply by delta to get the threshold. Entries with zero
/// theta get a zero scale and are never thresholded.
struct ThresholdScales {
  SymMat sample;  // MLE sample covariance of the data the scales came from
  SymMat scale;
  Index zero_variance_entries = 0;
};

ThresholdScales threshold_scales(const DataMatrix& x);

/// Hard rule: off-diagonal s_ij survives iff |s_ij| > delta * scale_ij. The
/// diagonal is kept as is.
SymMat hard_threshold(const SymMat& s, const SymMat& scale, double delta);

struct AtResult {
  SymMat estimate;
  double delta = 0.0;
  Index zero_variance_entries = 0;
};

/// Grid delta minimising the mean over folds of
/// ||hard_threshold(train) - S_validation||_F^2. Folds are a seeded
/// permutation of the observations split into near-equal parts; each part is
/// re-centred on its own mean. Ties go to the smaller delta.
double cross_validate_delta(const DataMatrix& x, const AtConfig& cfg, RngSeed seed);

AtResult adaptive_threshold(const DataMatrix& x, const AtConfig& cfg);

struct PoetResult {
  SymMat estimate;
  double delta = 0.0;
  Index factors = 0;
};

PoetResult poet(const DataMatrix& x, const PoetConfig& cfg);

}  // namespace cdcov
