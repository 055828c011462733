#include "cdcov/matrix_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace cdcov {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

}  // namespace

SymMat::SymMat(Index p) {
  if (p < 1) throw InvalidInput("SymMat: dimension must be positive");
  m_ = Eigen::MatrixXd::Zero(p, p);
}

SymMat::SymMat(const Eigen::MatrixXd& a, double tol) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw InvalidInput("SymMat: expected a non-empty square matrix, got " +
                       std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  require_finite(a, "SymMat");
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1.0);
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol * scale) {
    throw InvalidInput("SymMat: matrix is not symmetric (max |a_ij - a_ji| = " +
                       std::to_string(asym) + ")");
  }
  m_ = 0.5 * (a + a.transpose());
}

SymMat SymMat::identity(Index p) {
  SymMat out(p);
  out.m_.diagonal().setOnes();
  return out;
}

SymMat operator+(const SymMat& a, const SymMat& b) {
  if (a.dim() != b.dim()) throw InvalidInput("SymMat +: dimension mismatch");
  SymMat out;
  out.m_ = a.m_ + b.m_;
  return out;
}

SymMat operator-(const SymMat& a, const SymMat& b) {
  if (a.dim() != b.dim()) throw InvalidInput("SymMat -: dimension mismatch");
  SymMat out;
  out.m_ = a.m_ - b.m_;
  return out;
}

SymMat operator*(double c, const SymMat& a) {
  if (!std::isfinite(c)) throw InvalidInput("SymMat *: non-finite scalar");
  SymMat out;
  out.m_ = c * a.m_;
  return out;
}

DataMatrix::DataMatrix(Eigen::MatrixXd x) : x_(std::move(x)) {
  if (x_.rows() < 1 || x_.cols() < 1) throw InvalidInput("DataMatrix: empty matrix");
  require_finite(x_, "DataMatrix");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngSeed RngSeed::child(std::uint64_t index) const {
  return RngSeed{seed, splitmix64(stream ^ splitmix64(index + 0x5851F42D4C957F2DULL))};
}

Rng::Rng(RngSeed seed) : engine_(splitmix64(seed.seed ^ splitmix64(seed.stream))) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  cached_normal_ = v * f;
  has_cached_ = true;
  return u * f;
}

std::uint64_t Rng::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw InvalidInput("uniform_index: bound must be positive");
  // Rejection keeps the result exactly uniform.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return r % bound;
}

Eigen::MatrixXd standard_normal_matrix(Index rows, Index cols, Rng& rng) {
  Eigen::MatrixXd z(rows, cols);
  // Column-major fill order is part of the reproducibility contract.
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) z(i, j) = rng.normal();
  return z;
}

GaussianSampler::GaussianSampler(const SymMat& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma.matrix());
  if (es.info() != Eigen::Success) {
    throw InvalidInput("GaussianSampler: eigendecomposition of sigma failed");
  }
  Eigen::VectorXd lambda = es.eigenvalues();
  const double top = lambda.cwiseAbs().maxCoeff();
  if (lambda.minCoeff() < -1e-8 * top) {
    throw InvalidInput("GaussianSampler: sigma is indefinite (min eigenvalue " +
                       std::to_string(lambda.minCoeff()) + ")");
  }
  for (Index i = 0; i < lambda.size(); ++i)
    lambda(i) = lambda(i) < 1e-12 * top ? 0.0 : std::sqrt(lambda(i));
  factor_ = es.eigenvectors() * lambda.asDiagonal();
}

DataMatrix GaussianSampler::draw(Index n, Rng& rng) const {
  if (n < 1) throw InvalidInput("GaussianSampler: need n >= 1");
  return DataMatrix(factor_ * standard_normal_matrix(dim(), n, rng));
}

DataMatrix center_columns(const DataMatrix& x) {
  if (x.n() < 2) throw InvalidInput("center_columns: need n >= 2 observations");
  const Eigen::VectorXd mean = x.matrix().rowwise().mean();
  return DataMatrix(x.matrix().colwise() - mean);
}

CovPair cov_pair(const DataMatrix& x) {
  if (x.n() < 2) throw InvalidInput("cov_pair: need n >= 2 observations");
  const double n = static_cast<double>(x.n());
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(x.p(), x.p());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(x.matrix());
  gram = gram.selfadjointView<Eigen::Lower>();
  return CovPair{x.n(), SymMat(gram / n), SymMat(gram / (n - 1.0))};
}

double frob_norm(const SymMat& a) { return a.matrix().norm(); }

double op_norm(const SymMat& a, double tol) {
  if (!(tol > 0.0)) throw InvalidInput("op_norm: tol must be positive");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.matrix());
  const double fallback = frob_norm(a);
  if (es.info() != Eigen::Success) {
    throw NumericalFailure("op_norm: symmetric eigensolver did not converge", fallback);
  }
  const auto& ev = es.eigenvalues();
  const Index last = ev.size() - 1;
  const Index top = std::abs(ev(0)) > std::abs(ev(last)) ? 0 : last;
  const double lambda = std::abs(ev(top));
  if (lambda == 0.0) return 0.0;
  const Eigen::VectorXd v = es.eigenvectors().col(top);
  const double residual = (a.matrix() * v - ev(top) * v).norm();
  if (residual > tol * lambda) {
    throw NumericalFailure("op_norm: eigenpair residual above tolerance", lambda);
  }
  return lambda;
}

SymMat schur(const SymMat& a, const SymMat& b) {
  if (a.dim() != b.dim()) throw InvalidInput("schur: dimension mismatch");
  return SymMat(a.matrix().cwiseProduct(b.matrix()));
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw InvalidInput("cannot parse number '" + std::string(text) + "'");
  }
  return v;
}

namespace {

std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path,
                                                  bool has_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file", path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool skip = has_header;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skip) {
      skip = false;
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view cell(line.data() + start,
                                  (comma == std::string::npos ? line.size() : comma) - start);
      try {
        row.push_back(parse_double(cell));
      } catch (const InvalidInput& e) {
        throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) +
                         ": ragged row (expected " + std::to_string(rows.front().size()) +
                         " fields)");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidInput(path.string() + ": no data rows");
  return rows;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file", path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed", path);
}

}  // namespace

DataMatrix read_data_csv(const std::filesystem::path& path, bool has_header) {
  return DataMatrix(to_matrix(read_numeric_csv(path, has_header)));
}

void write_data_csv(const std::filesystem::path& path, const DataMatrix& x) {
  write_matrix_csv(path, x.matrix());
}

SymMat read_symmat_csv(const std::filesystem::path& path) {
  return SymMat(to_matrix(read_numeric_csv(path, false)));
}

void write_symmat_csv(const std::filesystem::path& path, const SymMat& a) {
  write_matrix_csv(path, a.matrix());
}

}  // namespace cdcov
