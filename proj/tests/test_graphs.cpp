#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <set>

#include "adom/graphs.hpp"

using namespace adom;

namespace {

VectorXd reference_eigenvalues(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  return es.eigenvalues();
}

void require_gossip_invariants(const MatrixXd& w, const WeightedGraph& g) {
  REQUIRE(asymmetry(w) < 1e-10);
  VectorXd ev = reference_eigenvalues(w);
  REQUIRE(ev(0) > -1e-10 * std::max(1.0, ev(ev.size() - 1)));
  REQUIRE((w * VectorXd::Ones(w.rows())).norm() < 1e-10 * std::max(1.0, w.norm()));
  std::set<std::pair<int, int>> allowed;
  for (const auto& e : g.edges) allowed.insert(std::minmax(e.i, e.j));
  for (int i = 0; i < w.rows(); ++i)
    for (int j = i + 1; j < w.cols(); ++j)
      if (w(i, j) != 0.0) REQUIRE(allowed.count({i, j}) == 1);
}

}  // namespace

TEST_CASE("laplacian of a single unit edge") {
  WeightedGraph g{2, {{0, 1, 1.0}}};
  auto gm = laplacian(g);
  MatrixXd expect(2, 2);
  expect << 1, -1, -1, 1;
  REQUIRE(max_abs(gm.W - expect) == 0.0);
  VectorXd ev = reference_eigenvalues(gm.W);
  REQUIRE(ev(0) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(ev(1) == Catch::Approx(2.0));
}

TEST_CASE("path-3 laplacian spectrum and spectral ratio gamma_3") {
  auto gm = laplacian(WeightedGraph::path(3));
  MatrixXd expect(3, 3);
  expect << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  REQUIRE(max_abs(gm.W - expect) == 0.0);
  // eigendecomposition oracle on the 3x3 matrix
  VectorXd ev = reference_eigenvalues(gm.W);
  REQUIRE(gm.lam_min_plus == Catch::Approx(ev(1)).epsilon(1e-12));
  REQUIRE(gm.lam_max == Catch::Approx(ev(2)).epsilon(1e-12));
  REQUIRE(gm.lam_min_plus / gm.lam_max == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  REQUIRE(gm.lam_min_plus / gm.lam_max == Catch::Approx(gamma_n(3)).epsilon(1e-12));
}

TEST_CASE("disconnected graphs are legal and flagged") {
  WeightedGraph g{4, {{0, 1, 1.0}, {2, 3, 1.0}}};
  auto gm = laplacian(g);
  REQUIRE(gm.kernel_dim == 2);
}

TEST_CASE("random ring source spectrum") {
  auto src = random_ring_source(4, 11);
  // every emitted Laplacian has eigenvalues {0, 2, 2, 4}
  for (std::int64_t k = 0; k < 5; ++k) {
    VectorXd ev = reference_eigenvalues(src->matrix(k));
    REQUIRE(ev(0) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(ev(1) == Catch::Approx(2.0).epsilon(1e-12));
    REQUIRE(ev(2) == Catch::Approx(2.0).epsilon(1e-12));
    REQUIRE(ev(3) == Catch::Approx(4.0).epsilon(1e-12));
  }
  REQUIRE(src->lam_min_plus() == Catch::Approx(2.0).epsilon(1e-12));
  REQUIRE(src->lam_max() == Catch::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("ring source determinism and permutation similarity") {
  auto src = random_ring_source(7, 5);
  REQUIRE(max_abs(src->matrix(3) - src->matrix(3)) == 0.0);
  // spectrum identical across k
  VectorXd base = reference_eigenvalues(src->matrix(0));
  for (std::int64_t k = 1; k < 20; ++k) {
    VectorXd ev = reference_eigenvalues(src->matrix(k));
    REQUIRE((ev - base).cwiseAbs().maxCoeff() < 1e-8);
  }
  // certified bounds hold for every emitted matrix
  for (std::int64_t k = 0; k < 20; ++k) {
    auto spec = spectrum(src->matrix(k));
    REQUIRE(spec.lam_min_plus_or_throw() >= src->lam_min_plus() - 1e-9);
    REQUIRE(spec.lam_max <= src->lam_max() + 1e-9);
  }
}

TEST_CASE("ring of 3 nodes is the complete graph") {
  auto src = random_ring_source(3, 2);
  VectorXd ev = reference_eigenvalues(src->matrix(0));
  REQUIRE(ev(0) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(ev(1) == Catch::Approx(3.0).epsilon(1e-12));
  REQUIRE(ev(2) == Catch::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("ring source rejects n < 3") {
  REQUIRE_THROWS_AS(random_ring_source(2, 1), std::invalid_argument);
}

TEST_CASE("star source cycles centers and has ratio n") {
  REQUIRE_THROWS_AS(star_source(4), std::invalid_argument);
  auto s3 = star_source(3);
  VectorXd ev = reference_eigenvalues(s3->matrix(0));
  REQUIRE(ev(0) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(ev(1) == Catch::Approx(1.0).epsilon(1e-12));
  REQUIRE(ev(2) == Catch::Approx(3.0).epsilon(1e-12));

  auto s6 = star_source(6);
  // centers alternate between the two middle nodes with period 2
  REQUIRE(max_abs(s6->matrix(0) - s6->matrix(2)) == 0.0);
  REQUIRE(max_abs(s6->matrix(1) - s6->matrix(3)) == 0.0);
  REQUIRE(max_abs(s6->matrix(0) - s6->matrix(1)) > 0.0);
  for (std::int64_t k = 0; k < 4; ++k) {
    auto spec = spectrum(s6->matrix(k));
    REQUIRE(spec.lam_max / spec.lam_min_plus_or_throw() == Catch::Approx(6.0).epsilon(1e-9));
  }
}

TEST_CASE("metropolis on a single edge") {
  WeightedGraph g{2, {{0, 1, 1.0}}};
  auto gm = metropolis_gossip(g);
  MatrixXd expect(2, 2);
  expect << 0.5, -0.5, -0.5, 0.5;  // I - M with M = [[.5,.5],[.5,.5]]
  REQUIRE(max_abs(gm.W - expect) < 1e-15);
  VectorXd ev = reference_eigenvalues(gm.W);
  REQUIRE(ev(0) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(ev(1) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("metropolis on K3") {
  WeightedGraph g{3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}}};
  auto gm = metropolis_gossip(g);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) REQUIRE(gm.W(i, j) == Catch::Approx(-1.0 / 3.0));
  VectorXd ev = reference_eigenvalues(gm.W);
  REQUIRE(ev(1) == Catch::Approx(1.0).epsilon(1e-12));
  REQUIRE(ev(2) == Catch::Approx(1.0).epsilon(1e-12));
  // kernel property: rows of M sum to 1
  REQUIRE((gm.W * VectorXd::Ones(3)).norm() < 1e-14);
  REQUIRE(gm.lam_max <= 1.0 + 1e-9);
}

TEST_CASE("metropolis rejects disconnected graphs") {
  WeightedGraph g{4, {{0, 1, 1.0}, {2, 3, 1.0}}};
  REQUIRE_THROWS_AS(metropolis_gossip(g), std::invalid_argument);
}

TEST_CASE("gossip invariants over random seeded instances") {
  // rings, stars and metropolis variants across 100 seeds
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int n = 3 + static_cast<int>(seed % 8);
    auto src = random_ring_source(n, seed);
    MatrixXd w = src->matrix(static_cast<std::int64_t>(seed) % 7);
    std::vector<int> order(static_cast<std::size_t>(n));
    // recover the ring edges from the matrix pattern for the sparsity check
    WeightedGraph g;
    g.node_count = n;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (w(i, j) != 0.0) g.edges.push_back({i, j, -w(i, j)});
    require_gossip_invariants(w, g);
    (void)order;

    auto mg = metropolis_gossip(g);
    require_gossip_invariants(mg.W, g);
    // I - M stays PSD with the kernel property; lam_max <= 1 holds only when
    // M itself is PSD, which rings beyond K3 break (see below)
    REQUIRE(mg.lam_max <= 2.0 + 1e-9);
  }
}

TEST_CASE("metropolis on an even ring exceeds lam_max = 1") {
  // ring of 4: degrees 2, weights 1/3, I - M = L/3 with L eigenvalues
  // {0,2,2,4}, so lam_max(I - M) = 4/3; M has eigenvalue -1/3
  WeightedGraph g{4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {0, 3, 1.0}}};
  auto mg = metropolis_gossip(g);
  REQUIRE(mg.lam_max == Catch::Approx(4.0 / 3.0).epsilon(1e-12));
  // the explicit normalization wrapper restores lam_max = 1
  auto norm = normalized_source(fixed_source(mg));
  auto spec = spectrum(norm->matrix(0));
  REQUIRE(spec.lam_max == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lift applies the Kronecker product implicitly") {
  WeightedGraph g{2, {{0, 1, 1.0}}};
  auto gm = laplacian(g);
  // explicit 4x4 Kronecker product oracle
  MatrixXd kron(4, 4);
  kron << 1, 0, -1, 0, 0, 1, 0, -1, -1, 0, 1, 0, 0, -1, 0, 1;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    VectorXd x(4);
    for (int i = 0; i < 4; ++i) x(i) = rng.normal();
    REQUIRE((lift_apply(gm.W, 2, x) - kron * x).norm() < 1e-14);
  }
  VectorXd unit = VectorXd::Unit(4, 0);
  VectorXd expect(4);
  expect << 1, 0, -1, 0;
  REQUIRE((lift_apply(gm.W, 2, unit) - expect).norm() < 1e-15);

  // consensual input vanishes
  VectorXd cons(4);
  cons << 0.3, -0.7, 0.3, -0.7;
  REQUIRE(lift_apply(gm.W, 2, cons).norm() < 1e-14);

  // d = 1 degenerates to the plain product
  VectorXd y(2);
  y << 2.0, -1.0;
  REQUIRE((lift_apply(gm.W, 1, y) - gm.W * y).norm() < 1e-14);

  REQUIRE_THROWS_AS(lift_apply(gm.W, 2, VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("gamma sequence decreasing with gamma_2 = 1") {
  REQUIRE(gamma_n(2) == Catch::Approx(1.0));
  REQUIRE(gamma_n(3) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  REQUIRE(gamma_n(4) == Catch::Approx((1 - std::sqrt(0.5)) / (1 + std::sqrt(0.5))).epsilon(1e-12));
  for (int n = 2; n < 64; ++n) REQUIRE(gamma_n(n) > gamma_n(n + 1));
  REQUIRE_THROWS_AS(gamma_n(1), std::invalid_argument);
}

TEST_CASE("select size brackets the target") {
  REQUIRE(select_size(1.0) == 2);
  REQUIRE(select_size(0.2) == 3);  // gamma_3 = 1/3 >= 0.2 > gamma_4
  // scan oracle: gamma_15 ~ 0.011047 >= 0.01 > gamma_16 ~ 0.009701
  int scan = 2;
  while (gamma_n(scan + 1) >= 0.01) ++scan;
  REQUIRE(scan == 15);
  REQUIRE(select_size(0.01) == scan);
  REQUIRE_THROWS_AS(select_size(0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(select_size(1.5), std::invalid_argument);
}

TEST_CASE("reweighted line graph hits the target ratio") {
  SECTION("target 0.2 selects n = 3") {
    auto r = reweighted_line_graph(0.2);
    REQUIRE(r.n == 3);
    auto spec = spectrum(laplacian(r.graph).W);
    REQUIRE(spec.lam_min_plus_or_throw() / spec.lam_max == Catch::Approx(0.2).margin(2e-8));
  }
  SECTION("target gamma_3 exactly gives the unweighted path") {
    auto r = reweighted_line_graph(1.0 / 3.0);
    REQUIRE(r.n == 3);
    REQUIRE(r.a == Catch::Approx(0.0).margin(1e-7));
    auto spec = spectrum(laplacian(r.graph).W);
    REQUIRE(spec.lam_min_plus_or_throw() / spec.lam_max == Catch::Approx(1.0 / 3.0).margin(1e-8));
  }
  SECTION("target 1 takes the complete 3-node branch with a = 1") {
    auto r = reweighted_line_graph(1.0);
    REQUIRE(r.n == 2);
    REQUIRE(r.graph.node_count == 3);
    REQUIRE(r.a == Catch::Approx(1.0));
    auto spec = spectrum(laplacian(r.graph).W);
    REQUIRE(spec.lam_min_plus_or_throw() / spec.lam_max == Catch::Approx(1.0).epsilon(1e-9));
  }
  SECTION("bracketing endpoints for the line branch") {
    // gamma(a) is gamma_n at a = 0 and collapses to 0 at a = 1
    auto g0 = laplacian(WeightedGraph::path(5, 1.0));
    REQUIRE(g0.lam_min_plus / g0.lam_max == Catch::Approx(gamma_n(5)).epsilon(1e-9));
    auto eig = jacobi_eigh(laplacian(WeightedGraph::path(5, 0.0)).W);
    REQUIRE(eig.values(1) < 1e-12);
  }
  SECTION("intermediate targets across the range") {
    for (double target : {0.9, 0.5, 0.34, 0.25, 0.12, 0.05}) {
      auto r = reweighted_line_graph(target);
      auto eig = jacobi_eigh(laplacian(r.graph).W);
      const double ratio = eig.values(1) / eig.values(eig.values.size() - 1);
      REQUIRE(ratio == Catch::Approx(target).margin(2e-8));
    }
  }
  REQUIRE_THROWS_AS(reweighted_line_graph(0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(reweighted_line_graph(1.0001), std::invalid_argument);
}

TEST_CASE("graph validation") {
  REQUIRE_THROWS_AS(WeightedGraph({2, {{0, 0, 1.0}}}).validate(), std::invalid_argument);
  REQUIRE_THROWS_AS(WeightedGraph({2, {{0, 1, 1.0}, {1, 0, 2.0}}}).validate(),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(WeightedGraph({2, {{0, 2, 1.0}}}).validate(), std::invalid_argument);
  REQUIRE_THROWS_AS(WeightedGraph({2, {{0, 1, 0.0}}}).validate(), std::invalid_argument);
  REQUIRE_NOTHROW(WeightedGraph({2, {{0, 1, 0.0}}}).validate(true));
}
