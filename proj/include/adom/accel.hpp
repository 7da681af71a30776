#ifndef ADOM_ACCEL_HPP
#define ADOM_ACCEL_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "graphs.hpp"
#include "linalg.hpp"
#include "problems.hpp"

namespace adom {

// Shifted-scaled Chebyshev polynomial of the constraint Gram matrix:
//   P(x) = 1 - T_K(-nu + 2x/(hi - lo)) / T_K(-nu),  nu = (chi+1)/(chi-1),
//   K = floor(sqrt(chi)),  chi = hi / lo.
// P(0) = 0, and on [lo, hi] the values stay within a factor-4 band, so
// replacing A'A by P(A'A) compresses the constraint spectrum.
class ChebyshevOperator {
 public:
  // base applies M = A'A; lo/hi bound its positive spectrum
  ChebyshevOperator(std::function<VectorXd(const VectorXd&)> base, double lam_lo, double lam_hi)
      : base_(std::move(base)), lo_(lam_lo), hi_(lam_hi) {
    if (!(lam_lo > 0.0) || lam_hi < lam_lo)
      throw std::invalid_argument("chebyshev: need 0 < lam_lo <= lam_hi");
    degenerate_ = (lam_hi - lam_lo) <= 1e-14 * lam_hi;
    if (degenerate_) {
      k_ = 1;  // fallback P(x) = x / lam_hi
      nu_ = 0.0;
      tk_ref_ = 1.0;
      return;
    }
    const double chi = lam_hi / lam_lo;
    k_ = std::max(1, static_cast<int>(std::floor(std::sqrt(chi))));
    nu_ = (chi + 1.0) / (chi - 1.0);
    tk_ref_ = cheb_scalar(k_, -nu_);
  }

  int degree() const { return k_; }
  double lam_lo() const { return lo_; }
  double lam_hi() const { return hi_; }
  bool degenerate() const { return degenerate_; }

  // P(M) x via the three-term recurrence; exactly K applications of M.
  VectorXd apply(const VectorXd& x, long* base_applications = nullptr) const {
    long count = 0;
    VectorXd out;
    if (degenerate_) {
      out = base_(x) / hi_;
      count = 1;
    } else {
      const double beta = 2.0 / (hi_ - lo_);
      auto mapped = [&](const VectorXd& v) {
        ++count;
        return (beta * base_(v) - nu_ * v).eval();
      };
      VectorXd t_prev = x;
      VectorXd t_cur = mapped(x);
      for (int j = 2; j <= k_; ++j) {
        VectorXd t_next = 2.0 * mapped(t_cur) - t_prev;
        t_prev = std::move(t_cur);
        t_cur = std::move(t_next);
      }
      out = x - t_cur / tk_ref_;
    }
    if (base_applications) *base_applications = count;
    return out;
  }

  // Monomial coefficients c_1..c_K of P (c_0 = 0 by construction), used to
  // evaluate P'(x) = P(x)/x by synthetic division. Safe for K up to ~60.
  std::vector<double> prime_coefficients() const {
    if (degenerate_) return {1.0 / hi_};
    const double beta = 2.0 / (hi_ - lo_);
    std::vector<double> t_prev{1.0};         // T_0 in x
    std::vector<double> t_cur{-nu_, beta};   // T_1(-nu + beta x)
    for (int j = 2; j <= k_; ++j) {
      std::vector<double> t_next(static_cast<std::size_t>(j) + 1, 0.0);
      for (std::size_t i = 0; i < t_cur.size(); ++i) {
        t_next[i] += 2.0 * -nu_ * t_cur[i];
        t_next[i + 1] += 2.0 * beta * t_cur[i];
      }
      for (std::size_t i = 0; i < t_prev.size(); ++i) t_next[i] -= t_prev[i];
      t_prev = std::move(t_cur);
      t_cur = std::move(t_next);
    }
    // P = 1 - T_K(...)/T_K(-nu); constant term cancels exactly
    std::vector<double> prime(static_cast<std::size_t>(k_), 0.0);
    for (int j = 1; j <= k_; ++j)
      prime[static_cast<std::size_t>(j - 1)] = -t_cur[static_cast<std::size_t>(j)] / tk_ref_;
    return prime;
  }

  static double cheb_scalar(int k, double x) {
    double t0 = 1.0, t1 = x;
    if (k == 0) return t0;
    for (int j = 2; j <= k; ++j) {
      double t2 = 2.0 * x * t1 - t0;
      t0 = t1;
      t1 = t2;
    }
    return t1;
  }

 private:
  std::function<VectorXd(const VectorXd&)> base_;
  double lo_, hi_;
  int k_ = 1;
  double nu_ = 0.0;
  double tk_ref_ = 1.0;
  bool degenerate_ = false;
};

inline ChebyshevOperator chebyshev_for_gram(const MatrixXd& a, double lam_lo, double lam_hi) {
  MatrixXd gram = a.transpose() * a;
  return ChebyshevOperator([gram](const VectorXd& v) { return (gram * v).eval(); }, lam_lo,
                           lam_hi);
}

struct TransformedConstraints {
  MatrixXd A;  // P(A'A), symmetric d x d
  VectorXd b;  // P'(A'A) A' b
  int degree = 1;
};

// Equivalent reformulation of Ax = b with the constraint operator replaced by
// P(A'A); the solution set is preserved and the spectrum compressed.
inline TransformedConstraints transform_constraints(const MatrixXd& a, const VectorXd& b,
                                                    double lam_lo, double lam_hi) {
  if (b.size() > 0 && image_residual(a, b) > 1e-8)
    throw std::invalid_argument("transform_constraints: b not in image(A)");
  ChebyshevOperator op = chebyshev_for_gram(a, lam_lo, lam_hi);
  const auto d = a.cols();
  MatrixXd gram = a.transpose() * a;

  TransformedConstraints out;
  out.degree = op.degree();
  out.A.resize(d, d);
  for (Eigen::Index c = 0; c < d; ++c) out.A.col(c) = op.apply(VectorXd::Unit(d, c));
  out.A = 0.5 * (out.A + out.A.transpose().eval());  // symmetrize roundoff

  auto prime = op.prime_coefficients();
  VectorXd atb = a.transpose() * b;
  VectorXd acc = VectorXd::Zero(d);  // Horner on the operator
  for (auto it = prime.rbegin(); it != prime.rend(); ++it) acc = gram * acc + *it * atb;
  out.b = acc;

  // a feasible point of the original system must satisfy the new one
  if (b.size() > 0) {
    VectorXd x0 = a.completeOrthogonalDecomposition().solve(b);
    if ((out.A * x0 - out.b).norm() > 1e-8 * std::max(1.0, out.b.norm()))
      throw std::runtime_error("transform_constraints: reformulation equivalence failed");
  }
  return out;
}

// Positive-spectrum condition number of a symmetric PSD operator.
inline double condition_of(const MatrixXd& m) {
  auto spec = spectrum(m);
  return spec.lam_max / spec.lam_min_plus_or_throw();
}

// Multi-consensus: one gossip round replaced by K = ceil(chi ln 2) rounds of
// D(W) = I - (I - W)^K over a normalized source (lam_max <= 1), making the
// effective mixing operator's condition O(1).
struct MultiConsensusOperator {
  GossipSourcePtr source;  // normalized
  int k_mc = 1;

  explicit MultiConsensusOperator(GossipSourcePtr normalized) : source(std::move(normalized)) {
    if (source->lam_max() > 1.0 + 1e-9)
      throw std::invalid_argument("multi_consensus: source not normalized to lam_max <= 1");
    const double chi = source->lam_max() / source->lam_min_plus();
    k_mc = static_cast<int>(std::ceil(chi * std::log(2.0)));
    if (k_mc < 1) k_mc = 1;
  }
};

// D(W(k)) x by K repeated applications of (I - W(k)); K communication rounds.
inline VectorXd multi_consensus_apply(const MultiConsensusOperator& mc, std::int64_t k,
                                      const VectorXd& x, CostCounter* cost = nullptr) {
  MatrixXd w = mc.source->matrix(k);
  if (x.size() != w.rows()) throw std::invalid_argument("multi_consensus_apply: size mismatch");
  VectorXd s = x;
  for (int r = 0; r < mc.k_mc; ++r) s -= (w * s).eval();
  if (cost) cost->comms += mc.k_mc;
  return x - s;
}

namespace detail {

class MultiConsensusSource final : public GossipSource {
 public:
  explicit MultiConsensusSource(MultiConsensusOperator mc)
      : GossipSource(bound_low(mc), 1.0), mc_(std::move(mc)) {}
  int nodes() const override { return mc_.source->nodes(); }
  MatrixXd matrix(std::int64_t k) const override {
    MatrixXd w = mc_.source->matrix(k);
    const auto n = w.rows();
    MatrixXd pw = MatrixXd::Identity(n, n) - w;
    MatrixXd acc = pw;
    for (int r = 1; r < mc_.k_mc; ++r) acc = pw * acc;
    return MatrixXd::Identity(n, n) - acc;
  }
  int rounds() const override { return mc_.k_mc; }

 private:
  static double bound_low(const MultiConsensusOperator& mc) {
    return 1.0 - std::pow(1.0 - mc.source->lam_min_plus(), mc.k_mc);
  }
  MultiConsensusOperator mc_;
};

}  // namespace detail

inline GossipSourcePtr multi_consensus_source(GossipSourcePtr normalized) {
  MultiConsensusOperator mc(std::move(normalized));
  return std::make_shared<detail::MultiConsensusSource>(std::move(mc));
}

}  // namespace adom

#endif  // ADOM_ACCEL_HPP
