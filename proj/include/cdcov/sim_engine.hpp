#pragma once

// Synthetic factor-model experiments: covariance generation, Gaussian data,
// replicate execution and aggregation of normalised error metrics.

#include "cdcov/baselines.hpp"
#include "cdcov/matrix_core.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cdcov {

enum class Method { kSample, kCd, kAt, kPoet };

std::string method_name(Method m);
Method parse_method(std::string_view name);
std::vector<Method> parse_method_list(std::string_view csv);

struct SimConfig {
  int setting = 1;  // 1: Lambda Lambda^T + sigma0_sq I; 2: Lambda Lambda^T + AR(1) Omega
  Index n = 100;
  Index p = 250;
  Index ktr = 10;
  double s = 0.5;  // fraction of loading entries set to zero
  double sigma0_sq = 1.0;
  double ar_error_var = 0.4;
  double ar_coef = 0.1;
  /// When set, ar_error_var is the marginal variance of the AR(1) sequence
  /// instead of its innovation variance.
  bool ar_marginal_variance = false;
  Index replicates = 20;
  RngSeed seed{};
  Index grid_step = 10;
  /// Replicates used by the risk oracle for k_opt in each cell replicate;
  /// 0 skips the oracle.
  Index oracle_reps = 0;
  Index folds = 5;
  Index delta_grid_size = 50;

  void validate() const;
};

/// Draws Lambda (p x ktr) with exactly floor(s p ktr) zero entries at
/// uniformly chosen positions and i.i.d. N(0, 1) elsewhere.
Eigen::MatrixXd draw_loadings(const SimConfig& cfg, Rng& rng);
/// AR(1) covariance Omega_ij = v rho^|i-j| with v the marginal variance.
SymMat ar1_covariance(Index p, double marginal_variance, double rho);

SymMat make_sigma0(const SimConfig& cfg, RngSeed seed);
SymMat make_sigma0(const SimConfig& cfg, const Eigen::MatrixXd& loadings);

/// n i.i.d. N(0, sigma0) observations as columns (not centred).
DataMatrix draw_data(const SymMat& sigma0, Index n, RngSeed seed);

struct BenchRecord {
  Method method = Method::kCd;
  SimConfig config;
  double op_err_mean = 0.0;
  double op_err_se = 0.0;
  double fro_err_mean = 0.0;
  double fro_err_se = 0.0;
  std::optional<Index> k_hat_mode;  // C-D only
  std::optional<Index> k_opt;       // C-D only, when the oracle ran
  Index used_replicates = 0;
  Index skipped = 0;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // sample standard deviation / sqrt(count)
};

MeanSe mean_se(std::span<const double> values);
/// Most frequent value; ties go to the smaller one.
Index mode_of(std::span<const Index> values);

struct RunOptions {
  int threads = 1;
};

/// One record per method, in the order given. Each replicate draws its own
/// Sigma0 and data from streams derived from (cfg.seed, replicate index).
/// A replicate whose method throws is skipped for that method; more than 10%
/// skipped replicates fails the cell.
std::vector<BenchRecord> run_cell(const SimConfig& cfg, std::span<const Method> methods,
                                  const RunOptions& opts = {});

/// run_cell for each s in turn; records are grouped by s, then method.
std::vector<BenchRecord> sparsity_sweep(const SimConfig& base, std::span<const double> s_values,
                                        std::span<const Method> methods,
                                        const RunOptions& opts = {});

}  // namespace cdcov
