#pragma once

// Stein unbiased risk estimate for the C-D estimator and selection of the
// compressed dimension.
//
// With S = sample covariance (denominator n - 1) and A = S_cd(k) built from S,
//
//   E||A - Sigma||_F^2 = E||A - S||_F^2 - sum var(s_ij) + 2 sum cov(a_ij, s_ij),
//
// so SURE(k) = ||A - S||_F^2 + 2 * optimism_hat(k) estimates the risk plus the
// k-free constant sum var(s_ij). optimism_hat is built from unbiased
// estimators of var(s_ij), var(s_ii) and cov(s_ll, s_ii), all expressed in the
// maximum-likelihood entries (denominator n).

#include "cdcov/cd_estimator.hpp"
#include "cdcov/matrix_core.hpp"

#include <span>
#include <vector>

namespace cdcov {

enum class MomentRule {
  /// Exact unbiased estimators for Gaussian data centred by the sample mean
  /// (Wishart with n - 1 degrees of freedom).
  kWishartUnbiased,
  /// The closed forms with denominator n^3 + n^2 - 2n - 4. Kept for
  /// comparison; they are biased (see tests).
  kCubicDenominator,
};

/// var_hat_off  = a s_ij^2 + b s_ii s_jj
/// var_hat_diag = c s_ii^2
/// cov_hat      = d s_il^2 + e s_ii s_ll
/// with s the maximum-likelihood entries.
struct MomentCoeffs {
  Index n = 0;
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0, e = 0.0;
};

MomentCoeffs moment_coeffs(Index n, MomentRule rule = MomentRule::kWishartUnbiased);

double var_hat_off(double s_ij, double s_ii, double s_jj, const MomentCoeffs& c);
double var_hat_diag(double s_ii, const MomentCoeffs& c);
double cov_hat_diag_pair(double s_il, double s_ii, double s_ll, const MomentCoeffs& c);

struct SureTerms {
  double discrepancy = 0.0;  // ||S_cd(k) - S||_F^2
  double optimism = 0.0;     // estimate of sum cov(S_cd(k)_ij, s_ij)
  double value() const { return discrepancy + 2.0 * optimism; }
};

/// Reference path: explicit sums over entries.
SureTerms sure_direct_terms(const CovPair& cov, Index k,
                            MomentRule rule = MomentRule::kWishartUnbiased);
double sure_direct(const CovPair& cov, Index k, MomentRule rule = MomentRule::kWishartUnbiased);

/// Fast path: traces and entry sums of Schur squares.
SureTerms sure_closed_terms(const CovPair& cov, Index k,
                            MomentRule rule = MomentRule::kWishartUnbiased);
double sure_closed(const CovPair& cov, Index k, MomentRule rule = MomentRule::kWishartUnbiased);

/// Estimate of sum_ij var(s_ij), the constant SURE carries on top of the risk.
double variance_offset(const CovPair& cov, MomentRule rule = MomentRule::kWishartUnbiased);

struct SureCurve {
  Index p = 0;
  Index n = 0;
  std::vector<Index> k_grid;
  std::vector<double> sure_values;
  std::vector<SureTerms> terms;
  Index k_hat = 0;
  double variance_offset = 0.0;
};

/// Increasing grid lo, lo + step, ... up to hi (inclusive when reached).
std::vector<Index> make_k_grid(Index lo, Index hi, Index step);
/// Multiples of `step` in [step, p]; {p} when p < step.
std::vector<Index> default_k_grid(Index p, Index step = 10);

/// Argmin of sure_direct over the grid; ties go to the smaller k.
SureCurve select_k(const CovPair& cov, std::span<const Index> k_grid,
                   MomentRule rule = MomentRule::kWishartUnbiased);

struct RiskCurve {
  std::vector<Index> k_grid;
  std::vector<double> risk_values;  // mean of ||S_cd(k) - Sigma0||_F^2
  std::vector<double> risk_se;
  Index replicates = 0;
  Index k_opt = 0;
};

/// Monte-Carlo Frobenius risk of the C-D estimator (built on the n - 1
/// sample covariance of centred Gaussian draws) against a known Sigma0.
RiskCurve risk_oracle(const SymMat& sigma0, Index n, std::span<const Index> k_grid, Index reps,
                      RngSeed seed, int threads = 1);

}  // namespace cdcov
