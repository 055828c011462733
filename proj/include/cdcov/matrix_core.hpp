#pragma once

// Dense symmetric matrices, data matrices, sample covariances, norms and the
// deterministic RNG shared by every module.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>

namespace cdcov {

using Index = std::int64_t;

class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative numerical routine did not meet its tolerance. Carries the best
/// value seen so callers can decide whether it is usable.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, double best_iterate)
      : std::runtime_error(what), best_iterate_(best_iterate) {}
  double best_iterate() const noexcept { return best_iterate_; }

 private:
  double best_iterate_;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::filesystem::path path)
      : std::runtime_error(what + ": " + path.string()), path_(std::move(path)) {}
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

/// Dense symmetric p x p matrix. Entries are finite and entry (i,j) equals
/// entry (j,i) bit for bit.
class SymMat {
 public:
  SymMat() = default;
  /// Zero matrix.
  explicit SymMat(Index p);
  /// Accepts `a` if it is symmetric to within `tol` relative to its largest
  /// entry; stores the exact average of `a` and its transpose.
  explicit SymMat(const Eigen::MatrixXd& a, double tol = 1e-10);

  static SymMat identity(Index p);

  Index dim() const noexcept { return static_cast<Index>(m_.rows()); }
  double operator()(Index i, Index j) const { return m_(i, j); }
  const Eigen::MatrixXd& matrix() const noexcept { return m_; }
  double trace() const { return m_.trace(); }

  friend SymMat operator+(const SymMat& a, const SymMat& b);
  friend SymMat operator-(const SymMat& a, const SymMat& b);
  friend SymMat operator*(double c, const SymMat& a);

 private:
  Eigen::MatrixXd m_;
};

/// p x n matrix; row i is variable i, column j is observation x_j.
class DataMatrix {
 public:
  DataMatrix() = default;
  explicit DataMatrix(Eigen::MatrixXd x);

  Index p() const noexcept { return static_cast<Index>(x_.rows()); }
  Index n() const noexcept { return static_cast<Index>(x_.cols()); }
  const Eigen::MatrixXd& matrix() const noexcept { return x_; }

 private:
  Eigen::MatrixXd x_;
};

/// Sample covariance under both denominators, kept together so callers never
/// have to guess which one they hold.
struct CovPair {
  Index n = 0;
  SymMat mle;       // XX^T / n
  SymMat unbiased;  // XX^T / (n - 1)
};

struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  /// Independent child stream, e.g. one per replicate or per chunk.
  RngSeed child(std::uint64_t index) const;
  friend bool operator==(const RngSeed&, const RngSeed&) = default;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Portable generator: mt19937_64 is fully specified by the standard and the
/// variate transforms below are written out, so a given RngSeed produces the
/// same draws with any conforming standard library.
class Rng {
 public:
  explicit Rng(RngSeed seed);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal (Marsaglia polar method).
  double normal();
  /// Uniform on {0, ..., bound - 1}; bound > 0.
  std::uint64_t uniform_index(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

Eigen::MatrixXd standard_normal_matrix(Index rows, Index cols, Rng& rng);

/// Draws N(0, sigma) columns as L z with L = V diag(sqrt(lambda)) from the
/// symmetric eigendecomposition of sigma. Eigenvalues below 1e-12 * lambda_max
/// are clamped to zero; clearly negative ones make sigma invalid.
class GaussianSampler {
 public:
  explicit GaussianSampler(const SymMat& sigma);

  Index dim() const noexcept { return static_cast<Index>(factor_.rows()); }
  DataMatrix draw(Index n, Rng& rng) const;
  const Eigen::MatrixXd& factor() const noexcept { return factor_; }

 private:
  Eigen::MatrixXd factor_;
};

DataMatrix center_columns(const DataMatrix& x);
CovPair cov_pair(const DataMatrix& x);

double frob_norm(const SymMat& a);
/// Largest absolute eigenvalue, verified to relative accuracy `tol` through
/// the eigenpair residual.
double op_norm(const SymMat& a, double tol = 1e-8);
SymMat schur(const SymMat& a, const SymMat& b);

/// Locale-independent, 17 significant digits; parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

/// Rows are variables, columns observations.
DataMatrix read_data_csv(const std::filesystem::path& path, bool has_header = false);
void write_data_csv(const std::filesystem::path& path, const DataMatrix& x);
SymMat read_symmat_csv(const std::filesystem::path& path);
void write_symmat_csv(const std::filesystem::path& path, const SymMat& a);

}  // namespace cdcov
