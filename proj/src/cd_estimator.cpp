#include "cdcov/cd_estimator.hpp"

#include "cdcov/parallel.hpp"

#include <cmath>
#include <vector>

namespace cdcov {

CdCoeffs cd_coeffs(Index p, Index k, GammaRule rule) {
  if (p < 2) throw InvalidInput("cd_coeffs: need p >= 2, got p=" + std::to_string(p));
  if (k < 1 || k > p) {
    throw InvalidInput("cd_coeffs: need 1 <= k <= p, got k=" + std::to_string(k) +
                       " p=" + std::to_string(p));
  }
  // Integer numerators keep k = p exact: eta == 1.0, gamma == 0.0.
  const double denom = static_cast<double>(p * (p * p - 1));
  const double eta = static_cast<double>(k * (p * k - 1)) / denom;
  const Index gamma_num = rule == GammaRule::kEstimator ? k * (p - k) : (p - k);
  return CdCoeffs{p, k, eta, static_cast<double>(gamma_num) / denom};
}

SymMat cd_estimate(const SymMat& s, const CdCoeffs& c) {
  if (s.dim() != c.p) throw InvalidInput("cd_estimate: coefficient dimension mismatch");
  if (c.eta == 1.0 && c.gamma == 0.0) return s;
  return c.eta * s + (c.gamma * s.trace()) * SymMat::identity(s.dim());
}

SymMat cd_estimate(const SymMat& s, Index k) { return cd_estimate(s, cd_coeffs(s.dim(), k)); }

Eigen::MatrixXcd haar_rows(Index k, Index p, Rng& rng, Index* redraws) {
  if (k < 1 || k > p) throw InvalidInput("haar_rows: need 1 <= k <= p");
  using C = std::complex<double>;
  const double scale = std::sqrt(0.5);
  while (true) {
    Eigen::MatrixXcd g(p, k);
    for (Index j = 0; j < k; ++j)
      for (Index i = 0; i < p; ++i) {
        const double re = rng.normal();
        const double im = rng.normal();
        g(i, j) = C(scale * re, scale * im);
      }
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    const auto& packed = qr.matrixQR();
    const double rmax = packed.diagonal().cwiseAbs().maxCoeff();
    bool deficient = !(rmax > 0.0);
    Eigen::VectorXcd phase(k);
    for (Index j = 0; j < k && !deficient; ++j) {
      const C r = packed(j, j);
      if (std::abs(r) <= 1e-12 * rmax) {
        deficient = true;
      } else {
        phase(j) = r / std::abs(r);
      }
    }
    if (deficient) {
      if (redraws) ++*redraws;
      continue;
    }
    Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(p, k);
    q = q * phase.asDiagonal();
    return q.adjoint();
  }
}

namespace {

void accumulate_image(const Eigen::MatrixXcd& phi, const Eigen::MatrixXcd& s,
                      Eigen::MatrixXcd& acc) {
  const Eigen::MatrixXcd compressed = phi * s * phi.adjoint();
  acc.noalias() += phi.adjoint() * compressed * phi;
}

}  // namespace

HaarSampleReport haar_mc_oracle(const SymMat& s, Index k, Index samples, RngSeed seed,
                                const HaarOptions& opts) {
  if (samples < 1) throw InvalidInput("haar_mc_oracle: need at least one sample");
  if (opts.chunk_pairs < 1) throw InvalidInput("haar_mc_oracle: chunk_pairs must be positive");
  const Index p = s.dim();
  const CdCoeffs coeffs = cd_coeffs(p, k);

  const Index pairs = (samples + 1) / 2;
  const Index chunks = (pairs + opts.chunk_pairs - 1) / opts.chunk_pairs;
  const Eigen::MatrixXcd s_c = s.matrix().cast<std::complex<double>>();

  std::vector<Eigen::MatrixXcd> partial(chunks);
  std::vector<Index> chunk_redraws(chunks, 0);
  parallel_for(chunks, opts.threads, [&](std::int64_t c) {
    Rng rng(seed.child(static_cast<std::uint64_t>(c)));
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(p, p);
    const Index begin = c * opts.chunk_pairs;
    const Index end = std::min(pairs, begin + opts.chunk_pairs);
    for (Index i = begin; i < end; ++i) {
      const Eigen::MatrixXcd phi = haar_rows(k, p, rng, &chunk_redraws[c]);
      accumulate_image(phi, s_c, acc);
      accumulate_image(phi.conjugate(), s_c, acc);
    }
    partial[c] = std::move(acc);
  });

  Eigen::MatrixXcd total = Eigen::MatrixXcd::Zero(p, p);
  HaarSampleReport report;
  for (Index c = 0; c < chunks; ++c) {
    total += partial[c];
    report.redraws += chunk_redraws[c];
  }
  total /= static_cast<double>(2 * pairs);

  report.p = p;
  report.k = k;
  report.samples = 2 * pairs;
  report.max_imag = total.imag().cwiseAbs().maxCoeff();
  // Hermitian average: its real part is symmetric up to rounding.
  report.mc_estimate = SymMat(total.real(), 1e-8);
  const double scale = frob_norm(report.mc_estimate);
  if (report.max_imag > opts.imag_tol * scale) {
    throw NumericalFailure("haar_mc_oracle: imaginary residue " +
                               std::to_string(report.max_imag) + " exceeds tolerance",
                           report.max_imag);
  }
  report.closed_form = cd_estimate(s, coeffs);
  const double ref = frob_norm(report.closed_form);
  report.rel_frob_gap = ref > 0.0 ? frob_norm(report.mc_estimate - report.closed_form) / ref
                                  : frob_norm(report.mc_estimate);
  if (s.trace() != 0.0 && p >= 2) {
    try {
      std::tie(report.fitted_eta, report.fitted_gamma) =
          fit_shrinkage_basis(report.mc_estimate, s);
    } catch (const InvalidInput&) {
      // S proportional to I: eta and gamma are not separately identifiable.
      report.fitted_eta = report.fitted_gamma = std::nan("");
    }
  }
  return report;
}

std::pair<double, double> fit_shrinkage_basis(const SymMat& estimate, const SymMat& s) {
  if (estimate.dim() != s.dim()) throw InvalidInput("fit_shrinkage_basis: dimension mismatch");
  const double p = static_cast<double>(s.dim());
  const double t = s.trace();
  const double ss = s.matrix().squaredNorm();
  const double g11 = ss, g12 = t * t, g22 = t * t * p;
  const double det = g11 * g22 - g12 * g12;
  if (!(std::abs(det) > 1e-12 * g11 * g22)) {
    throw InvalidInput("fit_shrinkage_basis: S is proportional to the identity");
  }
  const double r1 = estimate.matrix().cwiseProduct(s.matrix()).sum();
  const double r2 = t * estimate.trace();
  return {(g22 * r1 - g12 * r2) / det, (g11 * r2 - g12 * r1) / det};
}

ShrinkagePair shrinkage_compare(const SymMat& s, Index k, std::optional<double> weight) {
  const CdCoeffs c = cd_coeffs(s.dim(), k);
  const double p = static_cast<double>(s.dim());
  double a;
  if (weight) {
    a = *weight;
  } else {
    const double denom = c.eta + c.gamma * s.trace() / p;
    if (!(denom > 0.0)) throw InvalidInput("shrinkage_compare: degenerate weight");
    a = c.eta / denom;
  }
  SymMat linear = a * s + (1.0 - a) * SymMat::identity(s.dim());
  return ShrinkagePair{cd_estimate(s, c), std::move(linear), a};
}

}  // namespace cdcov
