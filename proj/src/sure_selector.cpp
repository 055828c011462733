#include "cdcov/sure_selector.hpp"

#include "cdcov/parallel.hpp"

#include <cmath>

namespace cdcov {

MomentCoeffs moment_coeffs(Index n, MomentRule rule) {
  if (n < 3) throw InvalidInput("moment_coeffs: need n >= 3, got n=" + std::to_string(n));
  const double m = static_cast<double>(n);
  const double n2 = m * m;
  MomentCoeffs c;
  c.n = n;
  if (rule == MomentRule::kCubicDenominator) {
    const double q = m * m * m + m * m - 2.0 * m - 4.0;
    if (q == 0.0) throw InvalidInput("moment_coeffs: zero denominator");
    c.a = n2 * (n2 - m - 4.0) / ((m - 1.0) * (m - 1.0) * q);
    c.b = n2 * m / ((m - 1.0) * q);
    c.c = n2 * (2.0 * n2 - 2.0 * m - 4.0) / ((m - 1.0) * (m - 1.0) * q);
    c.d = 2.0 * n2 * (m + 2.0) / ((m - 1.0) * q);
    c.e = 2.0 * (m - 2.0) * n2 / ((m - 1.0) * q);
    return c;
  }
  // (n-1) S ~ Wishart(n-1, Sigma). Solving the second moments of s_ij^2 and
  // s_ii s_jj for unbiased estimates of sigma_ij^2 and sigma_ii sigma_jj, then
  // substituting S = n/(n-1) * MLE, gives:
  const double q = (m + 1.0) * (m - 2.0);
  const double nm1 = m - 1.0;
  c.a = n2 * (m - 3.0) / (nm1 * nm1 * q);
  c.b = n2 / (nm1 * q);
  c.c = 2.0 * n2 / (nm1 * nm1 * (m + 1.0));
  c.d = 2.0 * n2 / (nm1 * q);
  c.e = -2.0 * n2 / (nm1 * nm1 * q);
  return c;
}

double var_hat_off(double s_ij, double s_ii, double s_jj, const MomentCoeffs& c) {
  return c.a * s_ij * s_ij + c.b * s_ii * s_jj;
}

double var_hat_diag(double s_ii, const MomentCoeffs& c) { return c.c * s_ii * s_ii; }

double cov_hat_diag_pair(double s_il, double s_ii, double s_ll, const MomentCoeffs& c) {
  return c.d * s_il * s_il + c.e * s_ii * s_ll;
}

namespace {

void check_sure_args(const CovPair& cov, Index k) {
  if (cov.n < 3) throw InvalidInput("SURE: need n >= 3, got n=" + std::to_string(cov.n));
  if (cov.mle.dim() != cov.unbiased.dim()) throw InvalidInput("SURE: CovPair dimension mismatch");
  // cd_coeffs validates p and k.
  (void)cd_coeffs(cov.unbiased.dim(), k);
}

}  // namespace

SureTerms sure_direct_terms(const CovPair& cov, Index k, MomentRule rule) {
  check_sure_args(cov, k);
  const CdCoeffs cd = cd_coeffs(cov.unbiased.dim(), k);
  const MomentCoeffs mc = moment_coeffs(cov.n, rule);
  const Index p = cov.unbiased.dim();
  const auto& s = cov.unbiased.matrix();
  const auto& t = cov.mle.matrix();

  // Estimator on the n - 1 covariance, so A - S vanishes at k = p.
  const Eigen::MatrixXd a = cd_estimate(cov.unbiased, cd).matrix();

  SureTerms out;
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < p; ++i) {
      const double diff = a(i, j) - s(i, j);
      out.discrepancy += diff * diff;
    }

  // cov(a_ij, s_ij) = eta var(s_ij) off the diagonal; on it,
  // a_ii = eta s_ii + gamma sum_l s_ll adds gamma [var(s_ii) + sum_{l != i} cov(s_ll, s_ii)].
  double optimism = 0.0;
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      if (i == j) continue;
      optimism += cd.eta * var_hat_off(t(i, j), t(i, i), t(j, j), mc);
    }
    double diag = (cd.eta + cd.gamma) * var_hat_diag(t(i, i), mc);
    for (Index l = 0; l < p; ++l) {
      if (l == i) continue;
      diag += cd.gamma * cov_hat_diag_pair(t(i, l), t(i, i), t(l, l), mc);
    }
    optimism += diag;
  }
  out.optimism = optimism;
  return out;
}

double sure_direct(const CovPair& cov, Index k, MomentRule rule) {
  return sure_direct_terms(cov, k, rule).value();
}

SureTerms sure_closed_terms(const CovPair& cov, Index k, MomentRule rule) {
  check_sure_args(cov, k);
  const CdCoeffs cd = cd_coeffs(cov.unbiased.dim(), k);
  const MomentCoeffs mc = moment_coeffs(cov.n, rule);
  const double p = static_cast<double>(cov.unbiased.dim());
  const double eta = cd.eta, gamma = cd.gamma;

  const auto& s = cov.unbiased.matrix();
  const double tr_s = s.trace();
  const double sum_sq_s = s.squaredNorm();  // entry sum of S o S

  const auto& t = cov.mle.matrix();
  const double tr_t = t.trace();
  const double sum_sq_t = t.squaredNorm();                // entry sum of T o T
  const double tr_schur_t = t.diagonal().squaredNorm();   // Tr(T o T)

  SureTerms out;
  out.discrepancy = (eta - 1.0) * (eta - 1.0) * sum_sq_s + p * gamma * gamma * tr_s * tr_s +
                    2.0 * gamma * (eta - 1.0) * tr_s * tr_s;
  out.optimism = (mc.a * eta + mc.d * gamma) * (sum_sq_t - tr_schur_t) +
                 (mc.b * eta + mc.e * gamma) * (tr_t * tr_t - tr_schur_t) +
                 mc.c * (eta + gamma) * tr_schur_t;
  return out;
}

double sure_closed(const CovPair& cov, Index k, MomentRule rule) {
  return sure_closed_terms(cov, k, rule).value();
}

double variance_offset(const CovPair& cov, MomentRule rule) {
  const MomentCoeffs mc = moment_coeffs(cov.n, rule);
  const auto& t = cov.mle.matrix();
  const Index p = cov.mle.dim();
  double total = 0.0;
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      total += i == j ? var_hat_diag(t(i, i), mc) : var_hat_off(t(i, j), t(i, i), t(j, j), mc);
  return total;
}

std::vector<Index> make_k_grid(Index lo, Index hi, Index step) {
  if (lo < 1 || hi < lo || step < 1) {
    throw InvalidInput("make_k_grid: need 1 <= lo <= hi and step >= 1");
  }
  std::vector<Index> grid;
  for (Index k = lo; k <= hi; k += step) grid.push_back(k);
  return grid;
}

std::vector<Index> default_k_grid(Index p, Index step) {
  if (p < 1 || step < 1) throw InvalidInput("default_k_grid: need p >= 1 and step >= 1");
  if (p < step) return {p};
  return make_k_grid(step, p, step);
}

namespace {

void check_grid(std::span<const Index> grid, Index p) {
  if (grid.empty()) throw InvalidInput("k grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 1 || grid[i] > p) {
      throw InvalidInput("k grid value " + std::to_string(grid[i]) + " outside [1, " +
                         std::to_string(p) + "]");
    }
    if (i > 0 && grid[i] <= grid[i - 1]) throw InvalidInput("k grid must be increasing");
  }
}

Index argmin_first(std::span<const Index> grid, const std::vector<double>& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[best]) best = i;
  return grid[best];
}

}  // namespace

SureCurve select_k(const CovPair& cov, std::span<const Index> k_grid, MomentRule rule) {
  check_grid(k_grid, cov.unbiased.dim());
  SureCurve curve;
  curve.p = cov.unbiased.dim();
  curve.n = cov.n;
  curve.k_grid.assign(k_grid.begin(), k_grid.end());
  for (Index k : k_grid) {
    curve.terms.push_back(sure_direct_terms(cov, k, rule));
    curve.sure_values.push_back(curve.terms.back().value());
  }
  curve.k_hat = argmin_first(k_grid, curve.sure_values);
  curve.variance_offset = variance_offset(cov, rule);
  return curve;
}

RiskCurve risk_oracle(const SymMat& sigma0, Index n, std::span<const Index> k_grid, Index reps,
                      RngSeed seed, int threads) {
  if (reps < 1) throw InvalidInput("risk_oracle: need reps >= 1");
  if (n < 2) throw InvalidInput("risk_oracle: need n >= 2");
  check_grid(k_grid, sigma0.dim());
  const GaussianSampler sampler(sigma0);
  const std::size_t nk = k_grid.size();

  std::vector<std::vector<double>> losses(reps);
  parallel_for(reps, threads, [&](std::int64_t r) {
    Rng rng(seed.child(static_cast<std::uint64_t>(r)));
    const CovPair cov = cov_pair(center_columns(sampler.draw(n, rng)));
    auto& row = losses[r];
    row.reserve(nk);
    for (Index k : k_grid) {
      row.push_back((cd_estimate(cov.unbiased, k).matrix() - sigma0.matrix()).squaredNorm());
    }
  });

  RiskCurve curve;
  curve.k_grid.assign(k_grid.begin(), k_grid.end());
  curve.replicates = reps;
  curve.risk_values.assign(nk, 0.0);
  curve.risk_se.assign(nk, 0.0);
  for (std::size_t j = 0; j < nk; ++j) {
    double sum = 0.0;
    for (Index r = 0; r < reps; ++r) sum += losses[r][j];
    const double mean = sum / static_cast<double>(reps);
    double ss = 0.0;
    for (Index r = 0; r < reps; ++r) ss += (losses[r][j] - mean) * (losses[r][j] - mean);
    curve.risk_values[j] = mean;
    curve.risk_se[j] =
        reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1) / static_cast<double>(reps)) : 0.0;
  }
  curve.k_opt = argmin_first(k_grid, curve.risk_values);
  return curve;
}

}  // namespace cdcov
