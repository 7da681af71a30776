#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include "adom/io.hpp"
#include "adom/problems.hpp"

using namespace adom;

namespace {

VectorXd ref_eigenvalues(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  return es.eigenvalues();
}

DualProblem small_dual(std::uint64_t seed = 1) {
  auto qp = make_quadratic_problem(4, 3, 2, 6.0, 1.0, 8.0, seed);
  return build_dual(std::move(qp), random_ring_source(4, seed));
}

GossipSourcePtr two_node_source() {
  return fixed_source(laplacian(WeightedGraph{2, {{0, 1, 1.0}}}));
}

VectorXd random_z(const DualProblem& dp, std::uint64_t seed) {
  Rng rng(seed);
  VectorXd z(dp.zdim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return z;
}

}  // namespace

TEST_CASE("generated quadratics satisfy the eigenvalue sandwich") {
  SECTION("mu == L forces the identity scaling") {
    auto [c, lin] = generate_quadratic(3, 4, 1.0, 1.0, 9);
    for (const auto& ci : c) REQUIRE(max_abs(ci - MatrixXd::Identity(4, 4)) < 1e-12);
    (void)lin;
  }
  SECTION("endpoints forced present") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      auto [c, lin] = generate_quadratic(5, 6, 1.0, 10.0, seed);
      double lo = 1e300, hi = -1e300;
      for (const auto& ci : c) {
        VectorXd ev = ref_eigenvalues(ci);  // eigendecomposition oracle
        lo = std::min(lo, ev(0));
        hi = std::max(hi, ev(ev.size() - 1));
        REQUIRE(ev(0) > 1.0 - 1e-8);
        REQUIRE(ev(ev.size() - 1) < 10.0 + 1e-8);
      }
      REQUIRE(lo == Catch::Approx(1.0).margin(1e-8));
      REQUIRE(hi == Catch::Approx(10.0).margin(1e-8));
      (void)lin;
    }
  }
  SECTION("determinism") {
    auto a = generate_quadratic(3, 4, 1.0, 5.0, 77);
    auto b = generate_quadratic(3, 4, 1.0, 5.0, 77);
    for (int i = 0; i < 3; ++i) {
      REQUIRE(max_abs(a.first[static_cast<std::size_t>(i)] -
                      b.first[static_cast<std::size_t>(i)]) == 0.0);
      REQUIRE((a.second[static_cast<std::size_t>(i)] -
               b.second[static_cast<std::size_t>(i)]).norm() == 0.0);
    }
  }
  REQUIRE_THROWS_AS(generate_quadratic(2, 2, 0.0, 1.0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(generate_quadratic(2, 2, 2.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("generated constraints hit the target conditioning") {
  SECTION("chi = 1 makes the restricted Gram a scaled identity") {
    auto [a, b] = generate_constraints(3, 5, 1.0, 4);
    auto spec = spectrum(a * a.transpose());
    REQUIRE(spec.lam_max / spec.lam_min_plus_or_throw() == Catch::Approx(1.0).epsilon(1e-9));
    (void)b;
  }
  SECTION("chi = 20 measured within 1e-6") {
    auto [a, b] = generate_constraints(10, 20, 20.0, 3);
    auto spec = spectrum(a.transpose() * a);
    REQUIRE(spec.lam_max / spec.lam_min_plus_or_throw() == Catch::Approx(20.0).margin(1e-6));
    (void)b;
  }
  SECTION("b constructed in the image") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      auto [a, b] = generate_constraints(4, 7, 12.0, seed);
      REQUIRE(image_residual(a, b) <= 1e-10);
    }
  }
  REQUIRE_THROWS_AS(generate_constraints(3, 5, 0.5, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(generate_constraints(6, 5, 2.0, 1), std::invalid_argument);
}

TEST_CASE("kkt solve") {
  SECTION("unconstrained limit") {
    QuadraticProblem qp;
    qp.n = 2;
    qp.d = 3;
    qp.mu_F = 0.5;
    qp.L_F = 4.0;
    auto [c, lin] = generate_quadratic(2, 3, 0.5, 4.0, 5);
    qp.C = c;
    qp.lin = lin;
    qp.A = MatrixXd(0, 3);
    qp.b = VectorXd(0);
    VectorXd x = kkt_solve(qp);
    MatrixXd h = qp.C[0] + qp.C[1];
    VectorXd g = qp.lin[0] + qp.lin[1];
    REQUIRE((h * x + g).norm() < 1e-9);
  }
  SECTION("identity objective gives the least-norm solution") {
    QuadraticProblem qp;
    qp.n = 1;
    qp.d = 4;
    qp.mu_F = 1.0;
    qp.L_F = 1.0;
    qp.C = {MatrixXd::Identity(4, 4)};
    qp.lin = {VectorXd::Zero(4)};
    auto [a, b] = generate_constraints(2, 4, 3.0, 8);
    qp.A = a;
    qp.b = b;
    VectorXd x = kkt_solve(qp);
    VectorXd least_norm = a.completeOrthogonalDecomposition().solve(b);
    REQUIRE((x - least_norm).norm() < 1e-9 * (1.0 + least_norm.norm()));
  }
  SECTION("random instance agrees with the penalty-method oracle") {
    auto qp = make_quadratic_problem(3, 6, 3, 10.0, 1.0, 7.0, 21);
    VectorXd x = kkt_solve(qp);
    // penalty oracle: minimize objective + rho |Ax-b|^2 at rho = 1e8
    MatrixXd h = MatrixXd::Zero(6, 6);
    VectorXd g = VectorXd::Zero(6);
    for (int i = 0; i < 3; ++i) {
      h += qp.C[static_cast<std::size_t>(i)];
      g += qp.lin[static_cast<std::size_t>(i)];
    }
    const double rho = 1e8;
    MatrixXd hp = h + 2.0 * rho * qp.A.transpose() * qp.A;
    VectorXd xp = hp.ldlt().solve(-g + 2.0 * rho * qp.A.transpose() * qp.b);
    REQUIRE((x - xp).norm() < 1e-6 * (1.0 + x.norm()));
  }
}

TEST_CASE("problem json round trip re-validates") {
  auto qp = make_quadratic_problem(3, 4, 2, 5.0, 1.0, 6.0, 13);
  json j = problem_to_json(qp);
  QuadraticProblem back = problem_from_json(j);
  REQUIRE(back.n == qp.n);
  REQUIRE(max_abs(back.A - qp.A) == 0.0);
  for (int i = 0; i < 3; ++i)
    REQUIRE(max_abs(back.C[static_cast<std::size_t>(i)] - qp.C[static_cast<std::size_t>(i)]) == 0.0);
  // corrupting a C block out of the [mu_F, L_F] sandwich must fail validation
  j["C"][0][0] = 1e4;
  REQUIRE_THROWS_AS(problem_from_json(j), std::invalid_argument);
}

TEST_CASE("dual constants from the closed-form estimates") {
  // A = I_d, L_F = 2 -> mu_H = (1 + 1)/2 = 1
  QuadraticProblem qp;
  qp.n = 2;
  qp.d = 3;
  qp.mu_F = 1.0;
  qp.L_F = 2.0;
  qp.C = {1.5 * MatrixXd::Identity(3, 3), 1.5 * MatrixXd::Identity(3, 3)};
  qp.lin = {VectorXd::Zero(3), VectorXd::Zero(3)};
  qp.A = MatrixXd::Identity(3, 3);
  qp.b = VectorXd::Zero(3);
  auto dp = build_dual(std::move(qp), two_node_source());
  REQUIRE(dp.mu_H == Catch::Approx(1.0).epsilon(1e-12));
  REQUIRE(dp.L_H == Catch::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("dual operators") {
  auto dp = small_dual();
  const int n = dp.n(), d = dp.d();

  SECTION("P is idempotent and annihilates consensual s-blocks") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      VectorXd v = random_z(dp, seed);
      VectorXd pv = dp.apply_P(v);
      REQUIRE((dp.apply_P(pv) - pv).norm() <= 1e-10 * std::max(1.0, v.norm()));
    }
    VectorXd v = VectorXd::Zero(dp.zdim());
    Rng rng(3);
    VectorXd block(d);
    for (int j = 0; j < d; ++j) block(j) = rng.normal();
    for (int i = 0; i < n; ++i) v.segment(dp.pn() + i * d, d) = block;
    VectorXd pv = dp.apply_P(v);
    REQUIRE(pv.tail(n * d).norm() < 1e-12);
  }

  SECTION("P W = W P = W on random vectors") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      MatrixXd w = dp.gossip->matrix(static_cast<std::int64_t>(seed));
      VectorXd v = random_z(dp, 100 + seed);
      VectorXd wv = dp.apply_W(w, v);
      REQUIRE((dp.apply_P(wv) - wv).norm() < 1e-10 * std::max(1.0, wv.norm()));
      REQUIRE((dp.apply_W(w, dp.apply_P(v)) - wv).norm() < 1e-10 * std::max(1.0, wv.norm()));
    }
  }

  SECTION("q lies in the constraint image and reproduces <p, b>") {
    REQUIRE(dp.image_B_residual(dp.q) < 1e-10);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      VectorXd z = random_z(dp, 200 + seed);
      double direct = 0.0;  // unlifted inner product oracle
      for (int i = 0; i < n; ++i) direct += dp.p_block(z, i).dot(dp.base.b);
      REQUIRE(dp.inner_q(z) == Catch::Approx(direct).epsilon(1e-12));
    }
  }

  SECTION("B and B-transpose are adjoint") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(300 + seed);
      VectorXd x(n * d);
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
      VectorXd z = random_z(dp, 400 + seed);
      REQUIRE(dp.apply_B(x).dot(z) == Catch::Approx(x.dot(dp.apply_Bt(z))).epsilon(1e-10));
    }
  }
}

TEST_CASE("exact dual gradient") {
  auto dp = small_dual(7);

  SECTION("identity conjugate when C = I, lin = 0") {
    QuadraticProblem qp;
    qp.n = 2;
    qp.d = 2;
    qp.mu_F = 1.0;
    qp.L_F = 1.0;
    qp.C = {MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)};
    qp.lin = {VectorXd::Zero(2), VectorXd::Zero(2)};
    auto [a, b] = generate_constraints(1, 2, 1.0, 2);
    qp.A = a;
    qp.b = b;
    auto dpi = build_dual(std::move(qp), two_node_source());
    VectorXd z = random_z(dpi, 5);
    auto oracle = DualGradOracle::make_exact();
    auto res = grad_H(dpi, z, oracle);
    REQUIRE((res.g - dpi.apply_Bt(z)).norm() < 1e-12);
    // inexact with T=1 already lands on B'z when L_F = 1
    auto o1 = DualGradOracle::make_inexact(1);
    o1.warm = random_z(dpi, 6).head(dpi.n() * dpi.d());
    auto res1 = grad_H(dpi, z, o1);
    REQUIRE((res1.g - dpi.apply_Bt(z)).norm() < 1e-12);
  }

  SECTION("gradient satisfies grad F(g) = B'z within 1e-10") {
    auto oracle = DualGradOracle::make_exact();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      VectorXd z = random_z(dp, seed);
      auto res = grad_H(dp, z, oracle);
      REQUIRE((dp.grad_F(res.g) - dp.apply_Bt(z)).norm() < 1e-10 * (1.0 + z.norm()));
    }
  }

  SECTION("gradient lies in image(B)") {
    auto oracle = DualGradOracle::make_exact();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      VectorXd z = random_z(dp, 50 + seed);
      auto res = grad_H(dp, z, oracle);
      REQUIRE(dp.image_B_residual(res.grad) <= 1e-9 * res.grad.norm());
    }
  }

  SECTION("finite differences of H confirm the gradient") {
    auto oracle = DualGradOracle::make_exact();
    Rng rng(11);
    const double step = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
      VectorXd z = random_z(dp, 600 + static_cast<std::uint64_t>(trial));
      auto res = grad_H(dp, z, oracle);
      VectorXd dir(dp.zdim());
      for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = rng.normal();
      dir.normalize();
      VectorXd zp = z + step * dir, zm = z - step * dir;
      const double fd = (dp.H(zp) - dp.H(zm)) / (2.0 * step);
      const double an = res.grad.dot(dir);
      REQUIRE(fd == Catch::Approx(an).epsilon(1e-5).margin(1e-8));
    }
  }

  SECTION("inexact oracle with T=200 matches the exact one") {
    auto exact = DualGradOracle::make_exact();
    auto inexact = DualGradOracle::make_inexact(200);
    VectorXd z = random_z(dp, 2);
    auto a = grad_H(dp, z, exact);
    auto b = grad_H(dp, z, inexact);
    REQUIRE((a.grad - b.grad).norm() <= 1e-8 * (1.0 + a.grad.norm()));
  }

  SECTION("inexact oracle runs exactly T_inner steps from the warm start") {
    auto o = DualGradOracle::make_inexact(3);
    VectorXd z = random_z(dp, 4);
    VectorXd warm = VectorXd::Zero(dp.n() * dp.d());
    o.warm = warm;
    auto res = grad_H(dp, z, o);
    // replay the recursion by hand
    VectorXd y = dp.apply_Bt(z);
    VectorXd g = warm;
    for (int t = 0; t < 3; ++t) g -= (dp.grad_F(g) - y) / dp.base.L_F;
    REQUIRE((res.g - g).norm() == 0.0);
    REQUIRE((o.warm - g).norm() == 0.0);
  }
}

TEST_CASE("strong duality linkage at z*") {
  for (std::uint64_t seed : {1ull, 5ull, 9ull}) {
    auto dp = small_dual(seed);
    VectorXd z_star = dual_optimum(dp);
    // grad F*(B'z*) equals the lifted primal solution
    VectorXd g = dp.grad_Fstar(dp.apply_Bt(z_star));
    REQUIRE((g - dp.x_star_lift).norm() < 1e-6 * (1.0 + dp.x_star_lift.norm()));
    // first-order optimality of the dual on image(P)
    auto oracle = DualGradOracle::make_exact();
    auto res = grad_H(dp, z_star, oracle);
    REQUIRE(dp.apply_P(res.grad).norm() < 1e-8 * (1.0 + res.grad.norm()));
    // z* itself lives in the iterate subspace
    REQUIRE(dp.image_PB_residual(z_star) < 1e-8 * (1.0 + z_star.norm()));
  }
}

TEST_CASE("dual Hessian sandwich on the iterate subspace") {
  auto dp = small_dual(3);
  // explicit dual Hessian B C^{-1} B'
  const int nd = dp.n() * dp.d();
  MatrixXd cinv = MatrixXd::Zero(nd, nd);
  for (int i = 0; i < dp.n(); ++i)
    cinv.block(i * dp.d(), i * dp.d(), dp.d(), dp.d()) =
        dp.base.C[static_cast<std::size_t>(i)].inverse();
  MatrixXd b(dp.zdim(), nd);
  for (int c = 0; c < nd; ++c) b.col(c) = dp.apply_B(VectorXd::Unit(nd, c));
  MatrixXd hess = b * cinv * b.transpose();

  MatrixXd q = iterate_subspace_basis(dp);
  MatrixXd restricted = q.transpose() * hess * q;
  VectorXd ev = ref_eigenvalues(restricted);

  // upper bound L_H holds as stated
  REQUIRE(ev(ev.size() - 1) <= dp.L_H * (1.0 + 1e-9));

  // H is flat along directions of the iterate subspace where B' vanishes;
  // there are (n-1) * rank(A) of them, so the estimate mu_H cannot be a
  // strong-convexity constant of H on this subspace
  const int rank_a = static_cast<int>(dp.image_A_basis.cols());
  const int expected_flats = (dp.n() - 1) * rank_a;
  int flats = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) < 1e-9 * ev(ev.size() - 1)) ++flats;
  REQUIRE(flats == expected_flats);

  // on the narrower subspace spanned by P B itself, the Hessian is positive
  // definite; its smallest eigenvalue still undercuts mu_H because consensual
  // p-block directions carry Rayleigh quotients near sigma_min_plus^2 / L_F
  MatrixXd pb(dp.zdim(), nd);
  for (int c = 0; c < nd; ++c) pb.col(c) = dp.apply_P(dp.apply_B(VectorXd::Unit(nd, c)));
  MatrixXd qpb = range_basis(pb * pb.transpose());
  MatrixXd on_pb = qpb.transpose() * hess * qpb;
  VectorXd ev_pb = ref_eigenvalues(on_pb);
  const double smin2 = dp.sigma_min_plus_A * dp.sigma_min_plus_A;
  const double attainable = std::min(smin2, 1.0) / dp.base.L_F;
  REQUIRE(ev_pb(0) >= attainable * (1.0 - 1e-6));
  REQUIRE(ev_pb(0) < dp.mu_H);
  REQUIRE(ev_pb(ev_pb.size() - 1) <= dp.L_H * (1.0 + 1e-9));
}

TEST_CASE("dual gradient cost accounting") {
  auto dp = small_dual(2);
  CostCounter cost;
  auto oracle = DualGradOracle::make_exact();
  VectorXd z = random_z(dp, 1);
  grad_H(dp, z, oracle, &cost);
  REQUIRE(cost.mults == 2);  // one adjoint, one forward application
  REQUIRE(cost.comms == 0);
}
