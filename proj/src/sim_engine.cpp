#include "cdcov/sim_engine.hpp"

#include "cdcov/cd_estimator.hpp"
#include "cdcov/parallel.hpp"
#include "cdcov/sure_selector.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <numeric>

namespace cdcov {

std::string method_name(Method m) {
  switch (m) {
    case Method::kSample: return "sample";
    case Method::kCd: return "cd";
    case Method::kAt: return "at";
    case Method::kPoet: return "poet";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "sample") return Method::kSample;
  if (name == "cd") return Method::kCd;
  if (name == "at") return Method::kAt;
  if (name == "poet") return Method::kPoet;
  throw InvalidInput("unknown method '" + std::string(name) + "' (expected cd, at, poet, sample)");
}

std::vector<Method> parse_method_list(std::string_view csv) {
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::size_t stop = comma == std::string_view::npos ? csv.size() : comma;
    out.push_back(parse_method(csv.substr(start, stop - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void SimConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidInput("SimConfig: " + msg); };
  if (setting != 1 && setting != 2) fail("setting must be 1 or 2");
  if (n < 2) fail("n must be >= 2");
  if (p < 2) fail("p must be >= 2");
  if (ktr < 1 || ktr >= p) fail("need 1 <= ktr < p");
  if (!(s > 0.0 && s < 1.0)) fail("sparsity s must lie in (0, 1)");
  if (!(sigma0_sq >= 0.0)) fail("sigma0_sq must be non-negative");
  if (!(ar_error_var > 0.0)) fail("ar_error_var must be positive");
  if (!(std::abs(ar_coef) < 1.0)) fail("|ar_coef| must be < 1");
  if (replicates < 1) fail("replicates must be >= 1");
  if (grid_step < 1) fail("grid_step must be >= 1");
  if (oracle_reps < 0) fail("oracle_reps must be >= 0");
  if (folds < 2) fail("folds must be >= 2");
  if (delta_grid_size < 1) fail("delta_grid_size must be >= 1");
}

Eigen::MatrixXd draw_loadings(const SimConfig& cfg, Rng& rng) {
  Eigen::MatrixXd lambda = standard_normal_matrix(cfg.p, cfg.ktr, rng);
  const Index total = cfg.p * cfg.ktr;
  const auto zeros = static_cast<Index>(std::floor(cfg.s * static_cast<double>(total)));
  // Partial Fisher-Yates: the first `zeros` slots of the permutation are zeroed.
  std::vector<Index> slots(total);
  std::iota(slots.begin(), slots.end(), Index{0});
  for (Index i = 0; i < zeros; ++i) {
    const auto j = i + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(total - i)));
    std::swap(slots[i], slots[j]);
    lambda(slots[i] % cfg.p, slots[i] / cfg.p) = 0.0;
  }
  return lambda;
}

SymMat ar1_covariance(Index p, double marginal_variance, double rho) {
  Eigen::MatrixXd omega(p, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < p; ++i)
      omega(i, j) = marginal_variance * std::pow(rho, static_cast<double>(std::abs(i - j)));
  return SymMat(omega);
}

SymMat make_sigma0(const SimConfig& cfg, const Eigen::MatrixXd& loadings) {
  cfg.validate();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(cfg.p, cfg.p);
  sigma.selfadjointView<Eigen::Lower>().rankUpdate(loadings);
  sigma = sigma.selfadjointView<Eigen::Lower>();
  if (cfg.setting == 1) {
    sigma.diagonal().array() += cfg.sigma0_sq;
    return SymMat(sigma);
  }
  const double marginal = cfg.ar_marginal_variance
                              ? cfg.ar_error_var
                              : cfg.ar_error_var / (1.0 - cfg.ar_coef * cfg.ar_coef);
  return SymMat(sigma) + ar1_covariance(cfg.p, marginal, cfg.ar_coef);
}

SymMat make_sigma0(const SimConfig& cfg, RngSeed seed) {
  cfg.validate();
  Rng rng(seed);
  return make_sigma0(cfg, draw_loadings(cfg, rng));
}

DataMatrix draw_data(const SymMat& sigma0, Index n, RngSeed seed) {
  Rng rng(seed);
  return GaussianSampler(sigma0).draw(n, rng);
}

MeanSe mean_se(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("mean_se: no values");
  const double count = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / count;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (count - 1.0)) / std::sqrt(count)};
}

Index mode_of(std::span<const Index> values) {
  if (values.empty()) throw InvalidInput("mode_of: no values");
  std::map<Index, Index> counts;
  for (Index v : values) ++counts[v];
  Index best = counts.begin()->first, best_count = 0;
  for (const auto& [value, count] : counts)
    if (count > best_count) {
      best = value;
      best_count = count;
    }
  return best;
}

namespace {

struct MethodOutcome {
  bool ok = false;
  double op_err = 0.0;
  double fro_err = 0.0;
  Index k_hat = 0;
  std::string failure;
};

struct ReplicateOutcome {
  std::vector<MethodOutcome> methods;
  std::optional<Index> k_opt;
};

SymMat estimate_with(Method m, const SimConfig& cfg, const DataMatrix& xc, const CovPair& cov,
                     std::span<const Index> grid, RngSeed cv_seed, Index* k_hat) {
  AtConfig at;
  at.folds = cfg.folds;
  at.delta_grid = default_delta_grid(static_cast<std::size_t>(cfg.delta_grid_size));
  at.cv_seed = cv_seed;
  switch (m) {
    case Method::kSample:
      return cov.unbiased;
    case Method::kCd: {
      const SureCurve curve = select_k(cov, grid);
      *k_hat = curve.k_hat;
      return cd_estimate(cov.mle, curve.k_hat);
    }
    case Method::kAt:
      return adaptive_threshold(xc, at).estimate;
    case Method::kPoet:
      return poet(xc, PoetConfig{cfg.ktr, at}).estimate;
  }
  throw InvalidInput("unhandled method");
}

}  // namespace

std::vector<BenchRecord> run_cell(const SimConfig& cfg, std::span<const Method> methods,
                                  const RunOptions& opts) {
  cfg.validate();
  if (methods.empty()) throw InvalidInput("run_cell: no methods requested");
  const std::vector<Index> grid = default_k_grid(cfg.p, cfg.grid_step);
  const bool want_oracle =
      cfg.oracle_reps > 0 && std::find(methods.begin(), methods.end(), Method::kCd) != methods.end();
  const double p = static_cast<double>(cfg.p);

  std::vector<ReplicateOutcome> reps(cfg.replicates);
  parallel_for(cfg.replicates, opts.threads, [&](std::int64_t r) {
    const RngSeed rep_seed = cfg.seed.child(static_cast<std::uint64_t>(r));
    const SymMat sigma0 = make_sigma0(cfg, rep_seed.child(0));
    const DataMatrix xc = center_columns(draw_data(sigma0, cfg.n, rep_seed.child(1)));
    const CovPair cov = cov_pair(xc);
    ReplicateOutcome& out = reps[r];
    for (Method m : methods) {
      MethodOutcome mo;
      try {
        const SymMat est = estimate_with(m, cfg, xc, cov, grid, rep_seed.child(2), &mo.k_hat);
        const SymMat err = est - sigma0;
        mo.op_err = op_norm(err) / p;
        mo.fro_err = frob_norm(err) / p;
        mo.ok = true;
      } catch (const std::exception& e) {
        mo.failure = e.what();
      }
      out.methods.push_back(std::move(mo));
    }
    if (want_oracle) {
      out.k_opt = risk_oracle(sigma0, cfg.n, grid, cfg.oracle_reps, rep_seed.child(3)).k_opt;
    }
  });

  std::vector<BenchRecord> records;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    BenchRecord rec;
    rec.method = methods[mi];
    rec.config = cfg;
    std::vector<double> op, fro;
    std::vector<Index> k_hats, k_opts;
    for (Index r = 0; r < cfg.replicates; ++r) {
      const MethodOutcome& mo = reps[r].methods[mi];
      if (!mo.ok) {
        ++rec.skipped;
        std::cerr << "warning: replicate " << r << " skipped for " << method_name(rec.method)
                  << ": " << mo.failure << '\n';
        continue;
      }
      op.push_back(mo.op_err);
      fro.push_back(mo.fro_err);
      if (rec.method == Method::kCd) {
        k_hats.push_back(mo.k_hat);
        if (reps[r].k_opt) k_opts.push_back(*reps[r].k_opt);
      }
    }
    if (static_cast<double>(rec.skipped) > 0.1 * static_cast<double>(cfg.replicates) ||
        op.empty()) {
      throw std::runtime_error("run_cell: " + std::to_string(rec.skipped) + " of " +
                               std::to_string(cfg.replicates) + " replicates failed for " +
                               method_name(rec.method));
    }
    rec.used_replicates = static_cast<Index>(op.size());
    const MeanSe o = mean_se(op), f = mean_se(fro);
    rec.op_err_mean = o.mean;
    rec.op_err_se = o.se;
    rec.fro_err_mean = f.mean;
    rec.fro_err_se = f.se;
    if (!k_hats.empty()) rec.k_hat_mode = mode_of(k_hats);
    if (!k_opts.empty()) rec.k_opt = mode_of(k_opts);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<BenchRecord> sparsity_sweep(const SimConfig& base, std::span<const double> s_values,
                                        std::span<const Method> methods, const RunOptions& opts) {
  if (s_values.empty()) throw InvalidInput("sparsity_sweep: no s values");
  std::vector<BenchRecord> out;
  for (double s : s_values) {
    if (!(s > 0.0 && s < 1.0)) throw InvalidInput("sparsity_sweep: s values must lie in (0, 1)");
    SimConfig cfg = base;
    cfg.s = s;
    auto cell = run_cell(cfg, methods, opts);
    out.insert(out.end(), cell.begin(), cell.end());
  }
  return out;
}

}  // namespace cdcov
