#include "cdcov/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cdcov {

std::vector<double> default_delta_grid(std::size_t count, double lo, double hi) {
  if (count == 0 || !(lo > 0.0) || !(hi >= lo)) {
    throw InvalidInput("default_delta_grid: need count > 0 and 0 < lo <= hi");
  }
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double step = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) grid[i] = lo * std::exp(step * static_cast<double>(i));
  grid.back() = hi;
  return grid;
}

void AtConfig::validate() const {
  if (folds < 2) throw InvalidInput("AtConfig: folds must be >= 2");
  if (delta_grid.empty()) throw InvalidInput("AtConfig: delta grid is empty");
  for (std::size_t i = 0; i < delta_grid.size(); ++i) {
    if (!(delta_grid[i] >= 0.0) || !std::isfinite(delta_grid[i]))
      throw InvalidInput("AtConfig: delta values must be finite and non-negative");
    if (i > 0 && !(delta_grid[i] > delta_grid[i - 1]))
      throw InvalidInput("AtConfig: delta grid must be increasing");
  }
}

namespace {

Eigen::MatrixXd centred(const Eigen::MatrixXd& x) {
  return x.colwise() - x.rowwise().mean();
}

Eigen::MatrixXd columns(const Eigen::MatrixXd& x, const std::vector<Index>& idx) {
  Eigen::MatrixXd out(x.rows(), static_cast<Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Index>(j)) = x.col(idx[j]);
  return out;
}

bool survives(double value, double scale, double delta, bool diagonal) {
  return diagonal || scale == 0.0 || std::abs(value) > delta * scale;
}

// Sum of squared differences without materialising the thresholded matrix.
double thresholded_loss(const SymMat& s, const SymMat& scale, double delta,
                        const SymMat& target) {
  const auto& sm = s.matrix();
  const auto& sc = scale.matrix();
  const auto& tm = target.matrix();
  double loss = 0.0;
  for (Index j = 0; j < sm.cols(); ++j)
    for (Index i = 0; i < sm.rows(); ++i) {
      const double kept = survives(sm(i, j), sc(i, j), delta, i == j) ? sm(i, j) : 0.0;
      const double d = kept - tm(i, j);
      loss += d * d;
    }
  return loss;
}

}  // namespace

ThresholdScales threshold_scales(const DataMatrix& x) {
  if (x.n() < 2) throw InvalidInput("threshold_scales: need n >= 2");
  const Eigen::MatrixXd xc = centred(x.matrix());
  const double n = static_cast<double>(x.n());
  const double p = static_cast<double>(x.p());
  const Eigen::MatrixXd s = xc * xc.transpose() / n;
  const Eigen::MatrixXd sq = xc.cwiseProduct(xc);
  Eigen::MatrixXd theta = sq * sq.transpose() / n - s.cwiseProduct(s);
  const double log_p = std::log(std::max(p, 2.0));

  ThresholdScales out;
  Eigen::MatrixXd scale(theta.rows(), theta.cols());
  for (Index j = 0; j < theta.cols(); ++j)
    for (Index i = 0; i < theta.rows(); ++i) {
      const double th = std::max(theta(i, j), 0.0);
      if (th == 0.0 && i < j) ++out.zero_variance_entries;
      scale(i, j) = std::sqrt(th * log_p / n);
    }
  out.sample = SymMat(s);
  out.scale = SymMat(scale);
  return out;
}

SymMat hard_threshold(const SymMat& s, const SymMat& scale, double delta) {
  if (s.dim() != scale.dim()) throw InvalidInput("hard_threshold: dimension mismatch");
  Eigen::MatrixXd out = s.matrix();
  const auto& sc = scale.matrix();
  for (Index j = 0; j < out.cols(); ++j)
    for (Index i = 0; i < out.rows(); ++i)
      if (!survives(out(i, j), sc(i, j), delta, i == j)) out(i, j) = 0.0;
  return SymMat(out);
}

double cross_validate_delta(const DataMatrix& x, const AtConfig& cfg, RngSeed seed) {
  cfg.validate();
  if (cfg.delta_grid.size() == 1) return cfg.delta_grid.front();
  const Index n = x.n();
  if (n < 2 * cfg.folds) {
    throw InvalidInput("cross_validate_delta: need at least two observations per fold (n=" +
                       std::to_string(n) + ", folds=" + std::to_string(cfg.folds) + ")");
  }

  // Fisher-Yates with the portable generator.
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[i], perm[j]);
  }

  std::vector<double> loss(cfg.delta_grid.size(), 0.0);
  for (Index f = 0; f < cfg.folds; ++f) {
    const Index begin = f * n / cfg.folds;
    const Index end = (f + 1) * n / cfg.folds;
    std::vector<Index> train, valid;
    for (Index i = 0; i < n; ++i) (i >= begin && i < end ? valid : train).push_back(perm[i]);

    const ThresholdScales fit = threshold_scales(DataMatrix(columns(x.matrix(), train)));
    const Eigen::MatrixXd xv = centred(columns(x.matrix(), valid));
    const SymMat target(xv * xv.transpose() / static_cast<double>(xv.cols()));
    for (std::size_t d = 0; d < cfg.delta_grid.size(); ++d)
      loss[d] += thresholded_loss(fit.sample, fit.scale, cfg.delta_grid[d], target);
  }
  const auto best = std::min_element(loss.begin(), loss.end()) - loss.begin();
  return cfg.delta_grid[static_cast<std::size_t>(best)];
}

AtResult adaptive_threshold(const DataMatrix& x, const AtConfig& cfg) {
  cfg.validate();
  const double delta = cross_validate_delta(x, cfg, cfg.cv_seed);
  const ThresholdScales full = threshold_scales(x);
  return AtResult{hard_threshold(full.sample, full.scale, delta), delta,
                  full.zero_variance_entries};
}

PoetResult poet(const DataMatrix& x, const PoetConfig& cfg) {
  if (cfg.factors < 0) throw InvalidInput("poet: number of factors must be non-negative");
  if (cfg.factors == 0) {
    AtResult at = adaptive_threshold(x, cfg.residual_threshold);
    return PoetResult{std::move(at.estimate), at.delta, 0};
  }
  if (x.n() < 2) throw InvalidInput("poet: need n >= 2");
  const Eigen::MatrixXd xc = centred(x.matrix());
  const Eigen::MatrixXd s = xc * xc.transpose() / static_cast<double>(x.n());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success) throw NumericalFailure("poet: eigensolver failed", 0.0);
  const Index p = s.rows();
  const double top = es.eigenvalues()(p - 1);
  Index rank = 0;
  for (Index i = 0; i < p; ++i)
    if (es.eigenvalues()(i) > 1e-10 * top) ++rank;
  if (cfg.factors > rank) {
    throw InvalidInput("poet: " + std::to_string(cfg.factors) +
                       " factors exceed the sample covariance rank " + std::to_string(rank));
  }

  // Eigen orders eigenvalues ascending; the leading K sit in the last columns.
  const Eigen::MatrixXd v = es.eigenvectors().rightCols(cfg.factors);
  const Eigen::VectorXd lambda = es.eigenvalues().tail(cfg.factors);
  const Eigen::MatrixXd low_rank = v * lambda.asDiagonal() * v.transpose();
  const Eigen::MatrixXd residual_data = xc - v * (v.transpose() * xc);

  AtResult at = adaptive_threshold(DataMatrix(residual_data), cfg.residual_threshold);
  return PoetResult{SymMat(low_rank, 1e-8) + at.estimate, at.delta, cfg.factors};
}

}  // namespace cdcov
