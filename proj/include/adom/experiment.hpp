#ifndef ADOM_EXPERIMENT_HPP
#define ADOM_EXPERIMENT_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "accel.hpp"
#include "io.hpp"
#include "solver.hpp"

namespace adom {

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

inline FitResult fit_ols(const std::vector<double>& xs, const std::vector<double>& ys) {
  const int n = static_cast<int>(xs.size());
  if (n < 2) throw std::invalid_argument("fit_ols: need at least two points");
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += xs[static_cast<std::size_t>(i)];
    my += ys[static_cast<std::size_t>(i)];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, tss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double dx = xs[static_cast<std::size_t>(i)] - mx;
    const double dy = ys[static_cast<std::size_t>(i)] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    tss += dy * dy;
  }
  if (sxx <= 0.0) throw std::invalid_argument("fit_ols: degenerate abscissa");
  FitResult f;
  f.points = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = ys[static_cast<std::size_t>(i)] - (f.intercept + f.slope * xs[static_cast<std::size_t>(i)]);
    rss += r * r;
  }
  f.stderr_slope = n > 2 ? std::sqrt(std::max(0.0, rss / (n - 2)) / sxx) : 0.0;
  f.r_squared = tss > 0.0 ? std::max(0.0, 1.0 - rss / tss) : (rss <= 1e-30 ? 1.0 : 0.0);
  return f;
}

// Log-linear rate over the last half of a trace; kappa = -slope. Records at
// or below the precision floor are cut from the window before fitting.
inline FitResult fit_rate(const Trace& trace) {
  const auto n = static_cast<std::int64_t>(trace.rows.size());
  if (n < 4) throw std::invalid_argument("fit_rate: trace too short");
  const std::int64_t start = n - (n + 1) / 2;
  double err_max = 0.0;
  for (const auto& r : trace.rows) err_max = std::max(err_max, r.err);
  const double floor = 1e-13 * err_max;

  std::vector<double> xs, ys;
  for (std::int64_t i = start; i < n; ++i) {
    const auto& r = trace.rows[static_cast<std::size_t>(i)];
    if (r.err <= floor) break;  // converged below floor: truncate window
    xs.push_back(static_cast<double>(r.k));
    ys.push_back(std::log(r.err));
  }
  if (xs.size() < 2) throw std::runtime_error("fit_rate: converged below floor");
  return fit_ols(xs, ys);
}

inline double kappa_of(const FitResult& f) { return -f.slope; }

// Log-log regression of kappa against the condition ratio; the measured decay
// exponent nu is |slope|. Non-positive kappa entries are dropped.
struct ExponentFit {
  FitResult fit;
  double nu = 0.0;
  int dropped = 0;
};

inline ExponentFit fit_exponent(const std::vector<std::pair<double, double>>& pairs) {
  std::vector<double> xs, ys;
  int dropped = 0;
  for (const auto& [ratio, kappa] : pairs) {
    if (!(ratio > 0.0) || !(kappa > 0.0)) {
      ++dropped;
      continue;
    }
    xs.push_back(std::log(ratio));
    ys.push_back(std::log(kappa));
  }
  if (xs.size() < 3) throw std::invalid_argument("fit_exponent: need at least 3 positive pairs");
  ExponentFit out;
  out.fit = fit_ols(xs, ys);
  out.nu = std::abs(out.fit.slope);
  out.dropped = dropped;
  return out;
}

struct ExperimentConfig {
  int d = 20;
  int p = 10;
  int n = 10;
  double chi_A = 20.0;
  double mu_F = 1.0;
  std::vector<double> lf_grid = {2, 5, 10, 20, 50, 100, 200, 500};
  std::int64_t iters = 2500;
  std::uint64_t seed = 1;
  bool exact_oracle = false;
  int t_inner = 10;
  std::string graph = "ring";  // ring | star
  bool chebyshev = false;
  bool multi_consensus = false;
  std::string out_dir = "out";
  int threads = 0;  // 0: hardware concurrency
  bool record_wall = false;

  void validate() const {
    if (iters < 4) throw std::invalid_argument("config: need at least 4 iterations");
    if (lf_grid.empty()) throw std::invalid_argument("config: L_F grid must be non-empty");
    for (double lf : lf_grid)
      if (lf < mu_F) throw std::invalid_argument("config: grid entries must be >= mu_F");
    if (graph != "ring" && graph != "star") throw std::invalid_argument("config: unknown graph family");
    if (!exact_oracle && t_inner < 1) throw std::invalid_argument("config: T_inner must be positive");
  }
};

inline json config_to_json(const ExperimentConfig& c) {
  return json{{"d", c.d},
              {"p", c.p},
              {"n", c.n},
              {"chi_A", c.chi_A},
              {"mu_F", c.mu_F},
              {"lf_grid", c.lf_grid},
              {"iters", c.iters},
              {"seed", c.seed},
              {"oracle", c.exact_oracle ? "exact" : "inexact"},
              {"t_inner", c.t_inner},
              {"graph", c.graph},
              {"chebyshev", c.chebyshev},
              {"multi_consensus", c.multi_consensus},
              {"out", c.out_dir}};
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("d")) c.d = j.at("d").get<int>();
  if (j.contains("p")) c.p = j.at("p").get<int>();
  if (j.contains("n")) c.n = j.at("n").get<int>();
  if (j.contains("chi_A")) c.chi_A = j.at("chi_A").get<double>();
  if (j.contains("mu_F")) c.mu_F = j.at("mu_F").get<double>();
  if (j.contains("lf_grid")) c.lf_grid = j.at("lf_grid").get<std::vector<double>>();
  if (j.contains("iters")) c.iters = j.at("iters").get<std::int64_t>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("oracle")) c.exact_oracle = j.at("oracle").get<std::string>() == "exact";
  if (j.contains("t_inner")) c.t_inner = j.at("t_inner").get<int>();
  if (j.contains("graph")) c.graph = j.at("graph").get<std::string>();
  if (j.contains("chebyshev")) c.chebyshev = j.at("chebyshev").get<bool>();
  if (j.contains("multi_consensus")) c.multi_consensus = j.at("multi_consensus").get<bool>();
  if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
  c.validate();
  return c;
}

struct RunRecord {
  double L_F = 0.0;
  bool ok = false;
  std::string error;
  double kappa = 0.0;
  double kappa_stderr = 0.0;
  double r_squared = 0.0;
  std::string csv_path;
};

struct ExperimentReport {
  std::vector<RunRecord> runs;
  std::optional<double> nu, nu_stderr, nu_r_squared;
};

namespace detail {

inline std::string lf_tag(double lf) {
  std::ostringstream os;
  os << lf;
  return os.str();
}

}  // namespace detail

// Builds a seeded problem for one grid point, applies the acceleration
// toggles, and assembles the dual problem.
inline DualProblem build_configured_dual(const ExperimentConfig& cfg, double L_F) {
  QuadraticProblem qp =
      make_quadratic_problem(cfg.n, cfg.d, cfg.p, cfg.chi_A, cfg.mu_F, L_F, cfg.seed);
  int cost = 1;
  if (cfg.chebyshev && cfg.p > 0) {
    auto gram_spec = spectrum(qp.A * qp.A.transpose());
    auto tc = transform_constraints(qp.A, qp.b, gram_spec.lam_min_plus_or_throw(),
                                    gram_spec.lam_max);
    qp.A = tc.A;
    qp.b = tc.b;
    qp.chi_A = condition_of(tc.A);
    cost = tc.degree;
    qp.validate();
  }
  GossipSourcePtr src = cfg.graph == "ring" ? random_ring_source(cfg.n, cfg.seed)
                                            : star_source(cfg.n);
  if (cfg.multi_consensus) src = multi_consensus_source(normalized_source(std::move(src)));
  return build_dual(std::move(qp), std::move(src), cost);
}

// The L_F sweep: one seeded run per grid value, per-run trace CSV, rate fit,
// then the exponent regression across the grid. Per-run failures land in the
// report without aborting the sweep.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  ExperimentReport report;
  report.runs.resize(cfg.lf_grid.size());

  auto one_run = [&](std::size_t idx) {
    RunRecord& rec = report.runs[idx];
    rec.L_F = cfg.lf_grid[idx];
    try {
      DualProblem dual = build_configured_dual(cfg, rec.L_F);
      AdomParams params = default_params(dual);
      DualGradOracle oracle = cfg.exact_oracle ? DualGradOracle::make_exact()
                                               : DualGradOracle::make_inexact(cfg.t_inner);
      RunOptions opts;
      opts.count_costs = true;
      opts.record_wall = cfg.record_wall;
      RunResult rr = run(dual, params, std::move(oracle), cfg.iters, opts);

      std::ostringstream name;
      name << "run_LF" << detail::lf_tag(rec.L_F) << "_seed" << cfg.seed << ".csv";
      rec.csv_path = (std::filesystem::path(cfg.out_dir) / name.str()).string();
      std::ofstream os(rec.csv_path);
      if (!os) throw std::runtime_error("cannot write " + rec.csv_path);
      rr.trace.write_csv(os);

      FitResult fit = fit_rate(rr.trace);
      rec.kappa = kappa_of(fit);
      rec.kappa_stderr = fit.stderr_slope;
      rec.r_squared = fit.r_squared;
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
  };

  int threads = cfg.threads > 0 ? cfg.threads
                                : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, static_cast<int>(cfg.lf_grid.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < cfg.lf_grid.size(); ++i) one_run(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic_size_t next{0};
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < cfg.lf_grid.size(); i = next.fetch_add(1))
          one_run(i);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<std::pair<double, double>> pairs;
  for (const auto& r : report.runs)
    if (r.ok) pairs.push_back({r.L_F / cfg.mu_F, r.kappa});
  if (pairs.size() >= 3) {
    auto ef = fit_exponent(pairs);
    report.nu = ef.nu;
    report.nu_stderr = ef.fit.stderr_slope;
    report.nu_r_squared = ef.fit.r_squared;
  }

  json summary;
  summary["config"] = config_to_json(cfg);
  summary["runs"] = json::array();
  for (const auto& r : report.runs) {
    json jr{{"L_F", r.L_F}, {"ok", r.ok}};
    if (r.ok) {
      jr["kappa"] = r.kappa;
      jr["kappa_stderr"] = r.kappa_stderr;
      jr["r_squared"] = r.r_squared;
      jr["csv"] = r.csv_path;
    } else {
      jr["error"] = r.error;
    }
    summary["runs"].push_back(jr);
  }
  if (report.nu) {
    summary["nu"] = *report.nu;
    summary["nu_stderr"] = *report.nu_stderr;
    summary["nu_r_squared"] = *report.nu_r_squared;
  } else {
    summary["nu"] = nullptr;
  }
  std::ofstream os(std::filesystem::path(cfg.out_dir) / "summary.json");
  os << summary.dump(2) << "\n";
  return report;
}

struct CertifyConfig {
  int n = 5;
  int d = 4;
  int p = 2;
  double chi_A = 5.0;
  double mu_F = 1.0;
  double L_F = 10.0;
  std::uint64_t seed = 1;
  std::int64_t iters = 500;
  // schedule perturbations; anything != 1 leaves the theorem's hypotheses
  double theta_scale = 1.0;
  double tau_scale = 1.0;
  double eta_scale = 1.0;
};

struct CertifyReport {
  bool pass = false;
  bool within_hypotheses = true;
  double rho = 0.0;
  std::int64_t iters = 0;
  LemmaReport lemmas;
};

// Drives the per-iteration lemma assertions on a small instance with the
// exact oracle and z* from the dual linear solve.
inline CertifyReport lyapunov_certify(const CertifyConfig& cc) {
  QuadraticProblem qp =
      make_quadratic_problem(cc.n, cc.d, cc.p, cc.chi_A, cc.mu_F, cc.L_F, cc.seed);
  DualProblem dual = build_dual(std::move(qp), random_ring_source(cc.n, cc.seed));
  AdomParams params = default_params(dual);
  params.theta *= cc.theta_scale;
  params.tau *= cc.tau_scale;
  params.eta *= cc.eta_scale;
  validate_params(params, dual.L_H, dual.lam_max);

  CertifyReport report;
  report.within_hypotheses =
      cc.theta_scale == 1.0 && cc.tau_scale == 1.0 && cc.eta_scale == 1.0;
  report.rho = contraction_rate(dual.mu_H, dual.L_H, dual.lam_min_plus, dual.lam_max);
  report.iters = cc.iters;

  VectorXd z_star = dual_optimum(dual);
  RunOptions opts;
  opts.track_lyapunov = true;
  opts.check_lemmas = true;
  RunResult rr = run(dual, params, DualGradOracle::make_exact(), cc.iters, opts, &z_star);
  report.lemmas = *rr.lemmas;
  report.pass = report.within_hypotheses ? report.lemmas.pass() : true;
  return report;
}

}  // namespace adom

#endif  // ADOM_EXPERIMENT_HPP
