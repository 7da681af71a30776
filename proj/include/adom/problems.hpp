#ifndef ADOM_PROBLEMS_HPP
#define ADOM_PROBLEMS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "graphs.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace adom {

// Communication / matrix-multiplication tallies for one run. One comm per
// gossip application (times the round count), one mult per application of
// the constraint operator or its adjoint (times its polynomial degree).
struct CostCounter {
  long long comms = 0;
  long long mults = 0;
};

// Per-node quadratics f_i(x) = x'C_i x / 2 + d_i'x with shared constraint
// data A x = b, lifted as A = I (x) A, b = 1 (x) b.
struct QuadraticProblem {
  int n = 0;
  int d = 0;
  std::vector<MatrixXd> C;
  std::vector<VectorXd> lin;
  double mu_F = 0.0;
  double L_F = 0.0;
  MatrixXd A;  // p x d, p may be zero
  VectorXd b;

  std::uint64_t seed = 0;  // generation provenance, serialized
  double chi_A = 0.0;

  int p() const { return static_cast<int>(A.rows()); }

  void validate() const {
    if (n < 1 || d < 1) throw std::invalid_argument("problem: n and d must be >= 1");
    if (!(mu_F > 0.0) || mu_F > L_F) throw std::invalid_argument("problem: need 0 < mu_F <= L_F");
    if (static_cast<int>(C.size()) != n || static_cast<int>(lin.size()) != n)
      throw std::invalid_argument("problem: per-node data size mismatch");
    if (A.rows() > 0 && A.cols() != d) throw std::invalid_argument("problem: A column mismatch");
    if (b.size() != A.rows()) throw std::invalid_argument("problem: b size mismatch");
    const double tol = 1e-8;
    for (int i = 0; i < n; ++i) {
      if (C[static_cast<std::size_t>(i)].rows() != d || lin[static_cast<std::size_t>(i)].size() != d)
        throw std::invalid_argument("problem: node block dimension mismatch");
      auto eig = jacobi_eigh(C[static_cast<std::size_t>(i)]);
      if (eig.values(0) < mu_F - tol * std::max(1.0, mu_F) ||
          eig.values(eig.values.size() - 1) > L_F + tol * std::max(1.0, L_F))
        throw std::invalid_argument("problem: C_i eigenvalues escape [mu_F, L_F]");
    }
    if (b.size() > 0 && image_residual(A, b) > 1e-8)
      throw std::invalid_argument("problem: b not in image(A)");
  }
};

namespace detail {

inline MatrixXd seeded_orthogonal(int n, Rng& rng) {
  MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, n);
  MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace detail

// C_i = Q' diag(lambda) Q with seeded random orthogonal Q and lambda uniform
// in [mu_F, L_F]; both endpoints are forced present across the node set.
inline std::pair<std::vector<MatrixXd>, std::vector<VectorXd>> generate_quadratic(
    int n, int d, double mu_F, double L_F, std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("generate_quadratic: n, d must be >= 1");
  if (!(mu_F > 0.0) || mu_F > L_F)
    throw std::invalid_argument("generate_quadratic: need 0 < mu_F <= L_F");
  std::vector<MatrixXd> C;
  std::vector<VectorXd> lin;
  C.reserve(static_cast<std::size_t>(n));
  lin.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rq(seed, 0x100 + static_cast<std::uint64_t>(i));
    Rng rl(seed, 0x200 + static_cast<std::uint64_t>(i));
    Rng rd(seed, 0x300 + static_cast<std::uint64_t>(i));
    MatrixXd q = detail::seeded_orthogonal(d, rq);
    VectorXd lam(d);
    for (int j = 0; j < d; ++j) lam(j) = rl.uniform(mu_F, L_F);
    if (i == 0) lam(0) = mu_F;
    if (i == n - 1) lam(d - 1) = L_F;  // n == 1 needs d >= 2 to carry both
    C.push_back(q.transpose() * lam.asDiagonal() * q);
    VectorXd di(d);
    for (int j = 0; j < d; ++j) di(j) = rd.normal();
    lin.push_back(std::move(di));
  }
  return {std::move(C), std::move(lin)};
}

// A = U S V' with singular values log-uniform in [1, sqrt(chi_A)], endpoints
// forced, and b = A x0 for a seeded Gaussian x0 (feasible by construction).
inline std::pair<MatrixXd, VectorXd> generate_constraints(int p, int d, double chi_A,
                                                          std::uint64_t seed) {
  if (p < 1 || p > d) throw std::invalid_argument("generate_constraints: need 1 <= p <= d");
  if (chi_A < 1.0) throw std::invalid_argument("generate_constraints: chi_A must be >= 1");
  if (p == 1 && chi_A != 1.0)
    throw std::invalid_argument("generate_constraints: a single row cannot carry chi_A > 1");
  Rng ru(seed, 0x400);
  Rng rv(seed, 0x500);
  Rng rs(seed, 0x600);
  Rng rx(seed, 0x700);
  MatrixXd u = detail::seeded_orthogonal(p, ru);
  MatrixXd v = detail::seeded_orthogonal(d, rv).leftCols(p);
  VectorXd sig(p);
  const double smax = std::sqrt(chi_A);
  for (int j = 0; j < p; ++j) sig(j) = std::exp(rs.uniform(0.0, std::log(smax)));
  sig(0) = smax;
  sig(p - 1) = 1.0;
  MatrixXd a = u * sig.asDiagonal() * v.transpose();
  VectorXd x0(d);
  for (int j = 0; j < d; ++j) x0(j) = rx.normal();
  VectorXd b = a * x0;
  return {std::move(a), std::move(b)};
}

inline QuadraticProblem make_quadratic_problem(int n, int d, int p, double chi_A, double mu_F,
                                               double L_F, std::uint64_t seed) {
  QuadraticProblem qp;
  qp.n = n;
  qp.d = d;
  qp.mu_F = mu_F;
  qp.L_F = L_F;
  qp.seed = seed;
  qp.chi_A = chi_A;
  auto [c, lin] = generate_quadratic(n, d, mu_F, L_F, seed);
  qp.C = std::move(c);
  qp.lin = std::move(lin);
  if (p > 0) {
    auto [a, b] = generate_constraints(p, d, chi_A, seed);
    qp.A = std::move(a);
    qp.b = std::move(b);
  } else {
    qp.A = MatrixXd(0, d);
    qp.b = VectorXd(0);
  }
  qp.validate();
  return qp;
}

// Reference solution of min x'(sum C_i)x/2 + (sum d_i)'x s.t. Ax = b via the
// symmetric KKT system with partial pivoting.
inline VectorXd kkt_solve(const QuadraticProblem& qp) {
  const int d = qp.d;
  const int p = qp.p();
  MatrixXd h = MatrixXd::Zero(d, d);
  VectorXd g = VectorXd::Zero(d);
  for (int i = 0; i < qp.n; ++i) {
    h += qp.C[static_cast<std::size_t>(i)];
    g += qp.lin[static_cast<std::size_t>(i)];
  }
  VectorXd x;
  if (p == 0) {
    x = h.llt().solve(-g);
  } else {
    MatrixXd kkt = MatrixXd::Zero(d + p, d + p);
    kkt.topLeftCorner(d, d) = h;
    kkt.topRightCorner(d, p) = qp.A.transpose();
    kkt.bottomLeftCorner(p, d) = qp.A;
    VectorXd rhs(d + p);
    rhs.head(d) = -g;
    rhs.tail(p) = qp.b;
    VectorXd sol = kkt.partialPivLu().solve(rhs);
    x = sol.head(d);
    if ((qp.A * x - qp.b).norm() > 1e-9 * (1.0 + qp.b.norm()))
      throw std::runtime_error("kkt_solve: degenerate instance (feasibility residual)");
  }
  // stationarity against the constraint null space
  VectorXd grad = h * x + g;
  if (p == 0) {
    if (grad.norm() > 1e-9 * (1.0 + grad.norm() + g.norm()))
      throw std::runtime_error("kkt_solve: stationarity residual");
  } else {
    auto eig = jacobi_eigh(qp.A.transpose() * qp.A);
    const double tol = 1e-10 * std::max(1.0, eig.values(eig.values.size() - 1));
    double null_resid = 0.0;
    for (Eigen::Index j = 0; j < eig.values.size(); ++j)
      if (eig.values(j) <= tol) {
        const double c = eig.vectors.col(j).dot(grad);
        null_resid += c * c;
      }
    if (std::sqrt(null_resid) > 1e-9 * (1.0 + grad.norm()))
      throw std::runtime_error("kkt_solve: stationarity residual");
  }
  return x;
}

// Dual reformulation data: z = (p-block, s-block) stored node-major,
//   B'z = A'p_i + s_i,    B x = (A x_i, x),
//   P  = blockdiag(I, centering),   W(k) = blockdiag(I, W(k) (x) I_d),
//   H(z) = F*(B'z) - <z, q>,        q = (1 (x) b, 0).
// The iterate subspaces image(B) and image(P B) are carried in their product
// form image(A)^n x R^{nd} and image(A)^n x L-perp, which is the subspace the
// iterates provably inhabit.
struct DualProblem {
  QuadraticProblem base;
  GossipSourcePtr gossip;
  int constraint_cost = 1;  // mults charged per A / A' application

  double mu_H = 0.0;
  double L_H = 0.0;
  double sigma_min_plus_A = 0.0;
  double sigma_max_A = 0.0;
  // spectrum bounds of the lifted W(k) = blockdiag(I, W(k) (x) I_d)
  double lam_min_plus = 0.0;
  double lam_max = 0.0;

  VectorXd x_star;       // R^d
  VectorXd x_star_lift;  // R^{nd}
  VectorXd q;            // dual space

  MatrixXd image_A_basis;                   // p x rank(A), orthonormal
  std::vector<Eigen::LLT<MatrixXd>> c_llt;  // per-node factors of C_i

  int n() const { return base.n; }
  int d() const { return base.d; }
  int p() const { return base.p(); }
  int pn() const { return p() * n(); }
  int zdim() const { return pn() + n() * d(); }

  // --- block access -------------------------------------------------------
  auto p_block(const VectorXd& z, int i) const { return z.segment(i * p(), p()); }
  auto s_block(const VectorXd& z, int i) const { return z.segment(pn() + i * d(), d()); }

  // --- operators ----------------------------------------------------------
  VectorXd apply_Bt(const VectorXd& z, CostCounter* cost = nullptr) const {
    VectorXd y(n() * d());
    for (int i = 0; i < n(); ++i)
      y.segment(i * d(), d()) = base.A.transpose() * p_block(z, i) + s_block(z, i);
    if (cost && p() > 0) cost->mults += constraint_cost;
    return y;
  }

  VectorXd apply_B(const VectorXd& x, CostCounter* cost = nullptr) const {
    VectorXd z(zdim());
    for (int i = 0; i < n(); ++i) z.segment(i * p(), p()) = base.A * x.segment(i * d(), d());
    z.tail(n() * d()) = x;
    if (cost && p() > 0) cost->mults += constraint_cost;
    return z;
  }

  VectorXd apply_P(const VectorXd& v) const {
    VectorXd out = v;
    VectorXd mean = VectorXd::Zero(d());
    for (int i = 0; i < n(); ++i) mean += s_block(v, i);
    mean /= static_cast<double>(n());
    for (int i = 0; i < n(); ++i) out.segment(pn() + i * d(), d()) -= mean;
    return out;
  }

  // blockdiag(I, W (x) I_d) with W = gossip->matrix(k)
  VectorXd apply_W(const MatrixXd& w, const VectorXd& v, CostCounter* cost = nullptr) const {
    VectorXd out = v;
    out.tail(n() * d()) = lift_apply(w, d(), v.tail(n() * d()));
    if (cost) cost->comms += gossip->rounds();
    return out;
  }

  double inner_q(const VectorXd& z) const { return q.dot(z); }

  double norm_P_sq(const VectorXd& v) const {
    VectorXd pv = apply_P(v);
    return pv.squaredNorm();
  }

  // --- objective pieces ---------------------------------------------------
  VectorXd grad_F(const VectorXd& g) const {
    VectorXd out(n() * d());
    for (int i = 0; i < n(); ++i)
      out.segment(i * d(), d()) =
          base.C[static_cast<std::size_t>(i)] * g.segment(i * d(), d()) +
          base.lin[static_cast<std::size_t>(i)];
    return out;
  }

  VectorXd grad_Fstar(const VectorXd& y) const {
    VectorXd g(n() * d());
    for (int i = 0; i < n(); ++i)
      g.segment(i * d(), d()) = c_llt[static_cast<std::size_t>(i)].solve(
          y.segment(i * d(), d()) - base.lin[static_cast<std::size_t>(i)]);
    return g;
  }

  double Fstar(const VectorXd& y) const {
    double v = 0.0;
    for (int i = 0; i < n(); ++i) {
      VectorXd r = y.segment(i * d(), d()) - base.lin[static_cast<std::size_t>(i)];
      v += 0.5 * r.dot(c_llt[static_cast<std::size_t>(i)].solve(r));
    }
    return v;
  }

  double H(const VectorXd& z) const { return Fstar(apply_Bt(z)) - inner_q(z); }

  // --- subspace residuals (product form, see above) ------------------------
  double image_B_residual(const VectorXd& v) const {
    if (p() == 0) return 0.0;
    double sq = 0.0;
    for (int i = 0; i < n(); ++i) {
      VectorXd pi = p_block(v, i);
      VectorXd proj = image_A_basis * (image_A_basis.transpose() * pi);
      sq += (pi - proj).squaredNorm();
    }
    return std::sqrt(sq);
  }

  double image_PB_residual(const VectorXd& v) const {
    VectorXd mean = VectorXd::Zero(d());
    for (int i = 0; i < n(); ++i) mean += s_block(v, i);
    mean /= static_cast<double>(n());
    const double br = image_B_residual(v);
    return std::sqrt(br * br + static_cast<double>(n()) * mean.squaredNorm());
  }
};

// Dual gradient oracle: exact closed-form conjugate, or T_inner primal
// gradient steps warm-started across outer iterations.
struct DualGradOracle {
  enum class Mode { exact, inexact };
  Mode mode = Mode::exact;
  int t_inner = 10;
  VectorXd warm;

  static DualGradOracle make_exact() { return {Mode::exact, 0, {}}; }
  static DualGradOracle make_inexact(int t_inner) {
    if (t_inner < 1) throw std::invalid_argument("oracle: T_inner must be positive");
    return {Mode::inexact, t_inner, {}};
  }
};

struct GradResult {
  VectorXd grad;  // always lies in image(B)
  VectorXd g;     // primal estimate of grad F*(B'z)
};

inline GradResult grad_H(const DualProblem& dp, const VectorXd& z, DualGradOracle& oracle,
                         CostCounter* cost = nullptr) {
  VectorXd y = dp.apply_Bt(z, cost);
  VectorXd g;
  if (oracle.mode == DualGradOracle::Mode::exact) {
    g = dp.grad_Fstar(y);
  } else {
    if (oracle.warm.size() != dp.n() * dp.d()) oracle.warm = VectorXd::Zero(dp.n() * dp.d());
    g = oracle.warm;
    const double step = 1.0 / dp.base.L_F;
    for (int t = 0; t < oracle.t_inner; ++t) g -= step * (dp.grad_F(g) - y);
    oracle.warm = g;
  }
  GradResult out;
  out.g = g;
  out.grad = dp.apply_B(g, cost) - dp.q;
  return out;
}

// Assembles the dual problem; constraint_cost carries the mult tally per
// operator application for polynomially transformed constraints.
inline DualProblem build_dual(QuadraticProblem qp, GossipSourcePtr gossip,
                              int constraint_cost = 1) {
  qp.validate();
  if (!gossip) throw std::invalid_argument("build_dual: missing gossip source");
  if (gossip->nodes() != qp.n) throw std::invalid_argument("build_dual: gossip node mismatch");

  DualProblem dp;
  dp.base = std::move(qp);
  dp.gossip = std::move(gossip);
  dp.constraint_cost = constraint_cost;

  const int n = dp.n(), d = dp.d(), p = dp.p();
  if (p > 0) {
    auto spec = spectrum(dp.base.A * dp.base.A.transpose());
    dp.sigma_max_A = std::sqrt(std::max(0.0, spec.lam_max));
    dp.sigma_min_plus_A = std::sqrt(spec.lam_min_plus_or_throw());
    dp.image_A_basis = range_basis(dp.base.A * dp.base.A.transpose());
  } else {
    dp.image_A_basis = MatrixXd(0, 0);
  }
  dp.mu_H = (1.0 + dp.sigma_min_plus_A * dp.sigma_min_plus_A) / dp.base.L_F;
  dp.L_H = (1.0 + dp.sigma_max_A * dp.sigma_max_A) / dp.base.mu_F;
  dp.lam_min_plus = std::min(1.0, dp.gossip->lam_min_plus());
  dp.lam_max = std::max(1.0, dp.gossip->lam_max());

  dp.c_llt.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) dp.c_llt.emplace_back(dp.base.C[static_cast<std::size_t>(i)].llt());

  dp.x_star = kkt_solve(dp.base);
  dp.x_star_lift.resize(n * d);
  for (int i = 0; i < n; ++i) dp.x_star_lift.segment(i * d, d) = dp.x_star;

  dp.q = VectorXd::Zero(dp.zdim());
  for (int i = 0; i < n; ++i) dp.q.segment(i * p, p) = dp.base.b;
  return dp;
}

// Orthonormal basis of the iterate subspace image(A)^n x L-perp.
inline MatrixXd iterate_subspace_basis(const DualProblem& dp) {
  const int n = dp.n(), d = dp.d(), p = dp.p();
  const int r = static_cast<int>(dp.image_A_basis.cols());
  MatrixXd helmert = MatrixXd::Zero(n, std::max(0, n - 1));
  for (int k = 1; k < n; ++k) {
    const double s = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
    for (int i = 0; i < k; ++i) helmert(i, k - 1) = s;
    helmert(k, k - 1) = -s * k;
  }
  MatrixXd q = MatrixXd::Zero(dp.zdim(), n * r + (n - 1) * d);
  int col = 0;
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < r; ++a, ++col) q.col(col).segment(i * p, p) = dp.image_A_basis.col(a);
  for (int t = 0; t + 1 < n; ++t)
    for (int e = 0; e < d; ++e, ++col)
      for (int i = 0; i < n; ++i) q(dp.pn() + i * d + e, col) = helmert(i, t);
  return q;
}

// Orthonormal basis of the flat subspace of H inside the iterate subspace:
// directions v with B'v = 0. H is constant along them (their p-blocks sum to
// zero, so <v, q> = 0 as well), hence the dual optimum is the affine set
// z* + flats and iterates may settle anywhere on it.
inline MatrixXd dual_flat_basis(const DualProblem& dp) {
  MatrixXd q = iterate_subspace_basis(dp);
  if (q.cols() == 0) return MatrixXd(dp.zdim(), 0);
  MatrixXd m(dp.n() * dp.d(), q.cols());
  for (Eigen::Index c = 0; c < q.cols(); ++c) m.col(c) = dp.apply_Bt(q.col(c));
  auto eig = jacobi_eigh(m.transpose() * m);
  const double tol = 1e-12 * std::max(1.0, eig.values(eig.values.size() - 1));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < eig.values.size(); ++j)
    if (eig.values(j) <= tol) keep.push_back(j);
  MatrixXd flats(dp.zdim(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    flats.col(static_cast<Eigen::Index>(j)) = q * eig.vectors.col(keep[j]);
  return flats;
}

// z* from the dual linear system, restricted to the iterate subspace; flat
// directions (where B' vanishes on the subspace) are resolved by pseudoinverse.
inline VectorXd dual_optimum(const DualProblem& dp) {
  MatrixXd q = iterate_subspace_basis(dp);
  const auto dim = q.cols();
  const int nd = dp.n() * dp.d();
  MatrixXd m(nd, dim);
  for (Eigen::Index c = 0; c < dim; ++c) m.col(c) = dp.apply_Bt(q.col(c));
  MatrixXd cm(nd, dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (int i = 0; i < dp.n(); ++i)
      cm.col(c).segment(i * dp.d(), dp.d()) = dp.c_llt[static_cast<std::size_t>(i)].solve(
          m.col(c).segment(i * dp.d(), dp.d()));
  }
  MatrixXd hred = m.transpose() * cm;
  VectorXd dvec(nd);
  for (int i = 0; i < dp.n(); ++i)
    dvec.segment(i * dp.d(), dp.d()) = dp.base.lin[static_cast<std::size_t>(i)];
  VectorXd rhs = q.transpose() * dp.q + cm.transpose() * dvec;

  auto eig = jacobi_eigh(hred);
  const double tol = 1e-10 * std::max(1.0, eig.values(eig.values.size() - 1));
  VectorXd y = VectorXd::Zero(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    if (eig.values(j) > tol) {
      const double c = eig.vectors.col(j).dot(rhs) / eig.values(j);
      y += c * eig.vectors.col(j);
    }
  }
  return q * y;
}

}  // namespace adom

#endif  // ADOM_PROBLEMS_HPP
