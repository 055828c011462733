#pragma once

// Compression-decompression covariance estimator.
//
// For a k x p matrix phi with orthonormal rows, the compress/decompress map is
// S -> phi^* (phi S phi^*) phi. Averaging it over the Haar measure on such
// matrices gives the closed form
//
//   S_cd(k) = eta * S + gamma * Tr(S) * I,
//   eta   = k (p k - 1) / (p (p^2 - 1)),
//   gamma = k (p - k)   / (p (p^2 - 1)),
//
// which cd_estimate evaluates. haar_mc_oracle averages the same map over
// sampled unitaries and reports how far the sample mean lands from it.

#include "cdcov/matrix_core.hpp"

#include <complex>
#include <optional>

namespace cdcov {

enum class GammaRule {
  kEstimator,  // k (p - k) / (p (p^2 - 1)); what the Haar average produces
  kWithoutK,  // (p - k) / (p (p^2 - 1)); the variant missing the factor k
};

struct CdCoeffs {
  Index p = 0;
  Index k = 0;
  double eta = 0.0;
  double gamma = 0.0;
};

CdCoeffs cd_coeffs(Index p, Index k, GammaRule rule = GammaRule::kEstimator);

SymMat cd_estimate(const SymMat& s, Index k);
SymMat cd_estimate(const SymMat& s, const CdCoeffs& c);

/// One k x p Haar-distributed matrix with orthonormal rows: complex Gaussian
/// draw, Householder QR of its adjoint, then each column of Q is rotated so
/// R has a positive real diagonal. Rank-deficient draws are redrawn and
/// counted in `redraws`.
Eigen::MatrixXcd haar_rows(Index k, Index p, Rng& rng, Index* redraws = nullptr);

struct HaarSampleReport {
  Index p = 0;
  Index k = 0;
  Index samples = 0;   // unitary draws actually averaged (always even)
  Index redraws = 0;   // rank-deficient Gaussian draws that were discarded
  SymMat mc_estimate;  // real part of the Monte-Carlo average
  SymMat closed_form;
  double rel_frob_gap = 0.0;  // ||mc - closed||_F / ||closed||_F
  double max_imag = 0.0;      // largest |Im| entry of the average before it is dropped
  double fitted_eta = 0.0;    // least-squares fit of mc on {S, Tr(S) I}
  double fitted_gamma = 0.0;
};

struct HaarOptions {
  int threads = 1;
  /// The run fails when max_imag exceeds imag_tol * ||mc_estimate||_F.
  double imag_tol = 1e-6;
  /// Draws per RNG stream; fixes the reduction tree independent of threads.
  Index chunk_pairs = 256;
};

/// Monte-Carlo average of phi^* (phi S phi^*) phi over `samples` Haar draws.
/// Draws come in conjugate pairs (phi, conj(phi)); both members are Haar
/// distributed and, S being real, their images are complex conjugates, so the
/// imaginary part of the average cancels up to rounding. An odd request is
/// rounded up to the next pair.
HaarSampleReport haar_mc_oracle(const SymMat& s, Index k, Index samples, RngSeed seed,
                                const HaarOptions& opts = {});

/// Least-squares coefficients (eta, gamma) of `estimate` on the basis
/// {S, Tr(S) I} in the Frobenius inner product.
std::pair<double, double> fit_shrinkage_basis(const SymMat& estimate, const SymMat& s);

struct ShrinkagePair {
  SymMat cd;
  SymMat linear;  // a S + (1 - a) I
  double weight = 0.0;
};

/// Side-by-side C-D estimate and the linear a S + (1 - a) I form. Without a
/// caller-supplied weight, a = eta / (eta + gamma Tr(S) / p), i.e. the linear
/// form matches the C-D estimate's ratio of S to identity loading when
/// Tr(S)/p is rescaled to 1.
ShrinkagePair shrinkage_compare(const SymMat& s, Index k,
                                std::optional<double> weight = std::nullopt);

}  // namespace cdcov
