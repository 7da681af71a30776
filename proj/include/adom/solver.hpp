#ifndef ADOM_SOLVER_HPP
#define ADOM_SOLVER_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "problems.hpp"

namespace adom {

struct AdomParams {
  double alpha = 0.0;
  double eta = 0.0;
  double theta = 0.0;
  double sigma = 0.0;
  double tau = 0.0;
};

inline void validate_params(const AdomParams& p, double L_H, double lam_max) {
  const double eps = 1e-12;
  if (!(p.alpha > 0.0 && p.eta > 0.0 && p.theta > 0.0 && p.sigma > 0.0))
    throw std::invalid_argument("params: alpha, eta, theta, sigma must be positive");
  if (!(p.tau > 0.0 && p.tau < 1.0)) throw std::invalid_argument("params: tau must lie in (0,1)");
  if (p.theta > (1.0 + eps) / (L_H * lam_max))
    throw std::invalid_argument("params: theta exceeds 1/(L_H lam_max)");
  if (p.sigma > (1.0 + eps) / lam_max)
    throw std::invalid_argument("params: sigma exceeds 1/lam_max");
}

// Theorem-prescribed schedule.
inline AdomParams default_params(double mu_H, double L_H, double lam_min_plus, double lam_max) {
  if (!(mu_H > 0.0) || mu_H > L_H) throw std::invalid_argument("params: need 0 < mu_H <= L_H");
  if (!(lam_min_plus > 0.0) || lam_min_plus > lam_max)
    throw std::invalid_argument("params: need 0 < lam_min_plus <= lam_max");
  AdomParams p;
  p.alpha = mu_H / 2.0;
  p.eta = 2.0 * lam_min_plus / (7.0 * lam_max * std::sqrt(mu_H * L_H));
  p.theta = 1.0 / (L_H * lam_max);
  p.sigma = 1.0 / lam_max;
  p.tau = lam_min_plus / (7.0 * lam_max) * std::sqrt(mu_H / L_H);
  validate_params(p, L_H, lam_max);
  return p;
}

inline AdomParams default_params(const DualProblem& dp) {
  return default_params(dp.mu_H, dp.L_H, dp.lam_min_plus, dp.lam_max);
}

// Certified per-iteration contraction factor rho of the Lyapunov function.
inline double contraction_rate(double mu_H, double L_H, double lam_min_plus, double lam_max) {
  return lam_min_plus / (7.0 * lam_max) * std::sqrt(mu_H / L_H);
}

struct AdomState {
  std::int64_t k = 0;
  VectorXd z, z_f, m;
  VectorXd g;  // current primal estimate
};

inline AdomState initial_state(const DualProblem& dp) {
  AdomState s;
  s.z = VectorXd::Zero(dp.zdim());
  s.z_f = VectorXd::Zero(dp.zdim());
  s.m = VectorXd::Zero(dp.zdim());
  s.g = VectorXd::Zero(dp.n() * dp.d());
  return s;
}

struct StepDiagnostics {
  VectorXd z_g;
  VectorXd grad;     // grad H(z_g)
  double h_zg = 0.0; // H(z_g), exact closed form
};

// One iteration of the dual method:
//   z_g = tau z + (1-tau) z_f
//   Delta = sigma W(k) (m - eta grad H(z_g))
//   m+  = m - eta grad H(z_g) - Delta
//   z+  = z + eta alpha (z_g - z) + Delta
//   z_f+ = z_g - theta W(k) grad H(z_g)
inline void step(AdomState& s, const MatrixXd& w_k, const AdomParams& p, const DualProblem& dp,
                 DualGradOracle& oracle, CostCounter* cost = nullptr,
                 StepDiagnostics* diag = nullptr) {
  VectorXd z_g = p.tau * s.z + (1.0 - p.tau) * s.z_f;
  GradResult gr = grad_H(dp, z_g, oracle, cost);
  VectorXd drift = s.m - p.eta * gr.grad;
  VectorXd delta = p.sigma * dp.apply_W(w_k, drift, cost);
  VectorXd m_next = drift - delta;
  VectorXd z_next = s.z + p.eta * p.alpha * (z_g - s.z) + delta;
  VectorXd zf_next = z_g - p.theta * dp.apply_W(w_k, gr.grad, cost);

  if (!z_next.allFinite() || !zf_next.allFinite() || !m_next.allFinite())
    throw std::runtime_error("adom: non-finite iterate at k=" + std::to_string(s.k));

  if (diag) {
    diag->z_g = std::move(z_g);
    diag->grad = std::move(gr.grad);
    diag->h_zg = dp.H(diag->z_g);
  }
  s.g = std::move(gr.g);
  s.m = std::move(m_next);
  s.z = std::move(z_next);
  s.z_f = std::move(zf_next);
  ++s.k;
}

// Lyapunov function of the convergence proof, with zhat = z + P m and the
// dual suboptimality measured through H. The dual optimum is an affine set
// (z* plus the flat directions of H), so the distance term is the distance
// to that set; components of zhat - z* along the flats are excluded. When a
// flat basis is not supplied it is computed on the fly.
inline double lyapunov(const AdomState& s, const VectorXd& z_star, const AdomParams& p,
                       const DualProblem& dp, const MatrixXd* flats = nullptr) {
  MatrixXd local;
  if (!flats) {
    local = dual_flat_basis(dp);
    flats = &local;
  }
  VectorXd dev = s.z + dp.apply_P(s.m) - z_star;
  double dist_sq = dev.squaredNorm();
  if (flats->cols() > 0) dist_sq -= (flats->transpose() * dev).squaredNorm();
  const double gap = dp.H(s.z_f) - dp.H(z_star);
  return dist_sq + (2.0 * p.eta * (1.0 - p.eta * p.alpha) / p.tau) * gap +
         6.0 * dp.norm_P_sq(s.m);
}

struct TraceRow {
  std::int64_t k = 0;
  double err = 0.0;
  std::optional<double> psi;
  std::int64_t wall_ns = 0;
  long long comms = 0;
  long long mults = 0;
};

struct Trace {
  std::vector<TraceRow> rows;
  bool has_psi = false;
  bool has_cost = false;
  bool emit_wall = true;  // blanked for bit-reproducible sweep output

  void write_csv(std::ostream& os) const {
    os << "k,err,psi,wall_ns";
    if (has_cost) os << ",comms,mults";
    os << "\n";
    char buf[64];
    for (const auto& r : rows) {
      os << r.k << ',';
      std::snprintf(buf, sizeof buf, "%.17g", r.err);
      os << buf << ',';
      if (r.psi) {
        std::snprintf(buf, sizeof buf, "%.17g", *r.psi);
        os << buf;
      }
      os << ',';
      if (emit_wall) os << r.wall_ns;
      if (has_cost) os << ',' << r.comms << ',' << r.mults;
      os << "\n";
    }
  }
};

// Per-iteration checks of the three proof inequalities; violations carry the
// worst slack actually observed (positive = inequality broken by that much).
struct LemmaReport {
  long violations_descent = 0;
  long violations_error = 0;
  long violations_main = 0;
  double worst_descent = 0.0;
  double worst_error = 0.0;
  double worst_main = 0.0;
  std::int64_t first_violation = -1;
  bool advisory_only = false;  // inexact oracle: hypotheses not satisfied

  bool pass() const {
    return violations_descent == 0 && violations_error == 0 && violations_main == 0;
  }
};

struct RunOptions {
  bool track_lyapunov = false;
  bool check_lemmas = false;   // requires track_lyapunov
  bool count_costs = false;
  bool record_wall = false;
  double divergence_limit = 1e12;
};

struct RunResult {
  Trace trace;
  AdomState final_state;
  std::optional<LemmaReport> lemmas;
};

// Runs Algorithm 1 from z0 = z_f0 = m0 = 0, recording err = |g - x*| each
// iteration. Lyapunov tracking needs z* and is certified only under the
// exact oracle; slack on every lemma assertion is 1e-9 * (1 + magnitudes).
inline RunResult run(const DualProblem& dp, const AdomParams& p, DualGradOracle oracle,
                     std::int64_t iterations, const RunOptions& opts = {},
                     const VectorXd* z_star = nullptr) {
  if (iterations < 1) throw std::invalid_argument("run: need at least one iteration");
  if (opts.track_lyapunov && z_star == nullptr)
    throw std::invalid_argument("run: Lyapunov tracking requires z*");

  RunResult out;
  out.trace.has_psi = opts.track_lyapunov;
  out.trace.has_cost = opts.count_costs;
  out.trace.emit_wall = opts.record_wall;
  out.trace.rows.reserve(static_cast<std::size_t>(iterations));

  AdomState s = initial_state(dp);
  CostCounter cost;
  LemmaReport lemmas;
  lemmas.advisory_only = oracle.mode != DualGradOracle::Mode::exact;
  const double rho = contraction_rate(dp.mu_H, dp.L_H, dp.lam_min_plus, dp.lam_max);
  MatrixXd flats;
  double psi_prev = 0.0;
  if (opts.track_lyapunov) {
    flats = dual_flat_basis(dp);
    psi_prev = lyapunov(s, *z_star, p, dp, &flats);
  }

  const auto t0 = std::chrono::steady_clock::now();
  for (std::int64_t k = 0; k < iterations; ++k) {
    MatrixXd w_k = dp.gossip->matrix(k);
    const bool want_diag = opts.track_lyapunov && opts.check_lemmas;
    StepDiagnostics diag;
    const double m_p_before = want_diag ? dp.norm_P_sq(s.m) : 0.0;
    step(s, w_k, p, dp, oracle, opts.count_costs ? &cost : nullptr,
         want_diag ? &diag : nullptr);

    TraceRow row;
    row.k = s.k;
    row.err = (s.g - dp.x_star_lift).norm();
    if (opts.record_wall)
      row.wall_ns =
          std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
              .count();
    row.comms = cost.comms;
    row.mults = cost.mults;

    if (!std::isfinite(row.err) || row.err > opts.divergence_limit)
      throw std::runtime_error("adom: divergence detected at k=" + std::to_string(s.k));

    if (opts.track_lyapunov) {
      const double psi = lyapunov(s, *z_star, p, dp, &flats);
      row.psi = psi;
      if (opts.check_lemmas) {
        // descent: H(z_f+) <= H(z_g) - theta lam_min_plus / 2 |grad|_P^2
        const double grad_p_sq = dp.norm_P_sq(diag.grad);
        const double h_zf_next = dp.H(s.z_f);
        const double descent_rhs = diag.h_zg - 0.5 * p.theta * dp.lam_min_plus * grad_p_sq;
        const double slack_d = 1e-9 * (1.0 + std::abs(h_zf_next) + std::abs(descent_rhs));
        if (h_zf_next > descent_rhs + slack_d) {
          ++lemmas.violations_descent;
          lemmas.worst_descent = std::max(lemmas.worst_descent, h_zf_next - descent_rhs);
          if (lemmas.first_violation < 0) lemmas.first_violation = s.k;
        }
        // error feedback: |m+|_P^2 <= (1 - sigma lam/2)|m|_P^2 + (2 eta^2/(sigma lam))|grad|_P^2
        const double m_p_after = dp.norm_P_sq(s.m);
        const double err_rhs = (1.0 - 0.5 * p.sigma * dp.lam_min_plus) * m_p_before +
                               (2.0 * p.eta * p.eta / (p.sigma * dp.lam_min_plus)) * grad_p_sq;
        const double slack_e = 1e-9 * (1.0 + std::abs(err_rhs) + m_p_after);
        if (m_p_after > err_rhs + slack_e) {
          ++lemmas.violations_error;
          lemmas.worst_error = std::max(lemmas.worst_error, m_p_after - err_rhs);
          if (lemmas.first_violation < 0) lemmas.first_violation = s.k;
        }
        // main recurrence: psi+ <= (1 - rho) psi
        const double main_rhs = (1.0 - rho) * psi_prev;
        const double slack_m = 1e-9 * (1.0 + std::abs(main_rhs) + std::abs(psi));
        if (psi > main_rhs + slack_m) {
          ++lemmas.violations_main;
          lemmas.worst_main = std::max(lemmas.worst_main, psi - main_rhs);
          if (lemmas.first_violation < 0) lemmas.first_violation = s.k;
        }
      }
      psi_prev = psi;
    }
    out.trace.rows.push_back(std::move(row));
  }

  out.final_state = std::move(s);
  if (opts.track_lyapunov && opts.check_lemmas) out.lemmas = lemmas;
  return out;
}

}  // namespace adom

#endif  // ADOM_SOLVER_HPP
