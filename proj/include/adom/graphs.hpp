#ifndef ADOM_GRAPHS_HPP
#define ADOM_GRAPHS_HPP

#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <numeric>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "linalg.hpp"
#include "rng.hpp"

namespace adom {

struct WeightedGraph {
  struct Edge {
    int i, j;
    double w;
  };

  int node_count = 0;
  std::vector<Edge> edges;  // undirected, each pair stored once

  void validate(bool allow_zero_weights = false) const {
    if (node_count < 1) throw std::invalid_argument("graph: node_count must be positive");
    std::set<std::pair<int, int>> seen;
    for (const auto& e : edges) {
      if (e.i < 0 || e.j < 0 || e.i >= node_count || e.j >= node_count)
        throw std::invalid_argument("graph: edge index out of range");
      if (e.i == e.j) throw std::invalid_argument("graph: self-loop");
      if (e.w < 0.0 || (!allow_zero_weights && e.w == 0.0))
        throw std::invalid_argument("graph: nonpositive edge weight");
      auto key = std::minmax(e.i, e.j);
      if (!seen.insert(key).second) throw std::invalid_argument("graph: duplicate edge");
    }
  }

  // neighbor lists over edges with positive weight
  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(node_count));
    for (const auto& e : edges) {
      if (e.w <= 0.0) continue;
      adj[static_cast<std::size_t>(e.i)].push_back(e.j);
      adj[static_cast<std::size_t>(e.j)].push_back(e.i);
    }
    return adj;
  }

  std::vector<int> degrees() const {
    std::vector<int> deg(static_cast<std::size_t>(node_count), 0);
    for (const auto& e : edges) {
      if (e.w <= 0.0) continue;
      ++deg[static_cast<std::size_t>(e.i)];
      ++deg[static_cast<std::size_t>(e.j)];
    }
    return deg;
  }

  bool connected() const {
    if (node_count == 0) return false;
    auto adj = adjacency();
    std::vector<char> vis(static_cast<std::size_t>(node_count), 0);
    std::deque<int> q{0};
    vis[0] = 1;
    int count = 1;
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      for (int v : adj[static_cast<std::size_t>(u)])
        if (!vis[static_cast<std::size_t>(v)]) {
          vis[static_cast<std::size_t>(v)] = 1;
          ++count;
          q.push_back(v);
        }
    }
    return count == node_count;
  }

  // minimal hop distance between two node sets; -1 when unreachable
  int bfs_distance(const std::vector<int>& from, const std::vector<int>& to) const {
    std::vector<char> target(static_cast<std::size_t>(node_count), 0);
    for (int t : to) target[static_cast<std::size_t>(t)] = 1;
    auto adj = adjacency();
    std::vector<int> dist(static_cast<std::size_t>(node_count), -1);
    std::deque<int> q;
    for (int s : from) {
      if (dist[static_cast<std::size_t>(s)] == -1) {
        dist[static_cast<std::size_t>(s)] = 0;
        q.push_back(s);
      }
    }
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      if (target[static_cast<std::size_t>(u)]) return dist[static_cast<std::size_t>(u)];
      for (int v : adj[static_cast<std::size_t>(u)])
        if (dist[static_cast<std::size_t>(v)] == -1) {
          dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
          q.push_back(v);
        }
    }
    return -1;
  }

  static WeightedGraph path(int n, double first_edge_weight = 1.0) {
    WeightedGraph g;
    g.node_count = n;
    for (int i = 0; i + 1 < n; ++i) g.edges.push_back({i, i + 1, i == 0 ? first_edge_weight : 1.0});
    return g;
  }

  static WeightedGraph ring(const std::vector<int>& order) {
    WeightedGraph g;
    g.node_count = static_cast<int>(order.size());
    for (std::size_t i = 0; i < order.size(); ++i)
      g.edges.push_back({order[i], order[(i + 1) % order.size()], 1.0});
    return g;
  }

  static WeightedGraph star(int n, int center) {
    WeightedGraph g;
    g.node_count = n;
    for (int i = 0; i < n; ++i)
      if (i != center) g.edges.push_back({center, i, 1.0});
    return g;
  }
};

// Symmetric PSD matrix compatible with a graph, kernel containing 1.
struct GossipMatrix {
  MatrixXd W;
  double lam_min_plus = 0.0;
  double lam_max = 0.0;
  int kernel_dim = 1;  // >1 flags a disconnected graph
};

namespace detail {

inline void check_gossip_invariants(const MatrixXd& w, const WeightedGraph& g) {
  const double scale = std::max(1.0, max_abs(w));
  if (asymmetry(w) > 1e-10 * scale) throw std::logic_error("gossip: matrix not symmetric");
  const double ones_residual = (w * VectorXd::Ones(w.rows())).norm();
  if (ones_residual > 1e-10 * std::max(1.0, w.norm()))
    throw std::logic_error("gossip: ones vector not in kernel");
  std::set<std::pair<int, int>> allowed;
  for (const auto& e : g.edges) allowed.insert(std::minmax(e.i, e.j));
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = i + 1; j < w.cols(); ++j)
      if (w(i, j) != 0.0 &&
          !allowed.count({static_cast<int>(i), static_cast<int>(j)}))
        throw std::logic_error("gossip: sparsity pattern violates the graph");
}

inline GossipMatrix make_gossip(MatrixXd w, const WeightedGraph& g) {
  check_gossip_invariants(w, g);
  auto spec = spectrum(w);
  if (spec.eigenvalues.size() && spec.eigenvalues(0) < -1e-10 * std::max(1.0, spec.lam_max))
    throw std::logic_error("gossip: matrix not positive semidefinite");
  GossipMatrix out;
  out.W = std::move(w);
  out.lam_max = spec.lam_max;
  out.lam_min_plus = spec.lam_min_plus.value_or(0.0);
  out.kernel_dim = spec.kernel_dim;
  return out;
}

}  // namespace detail

// Weighted graph Laplacian: off-diagonal -w_ij, diagonal row weight sum.
// Disconnected graphs are legal; the larger kernel is flagged in kernel_dim.
inline GossipMatrix laplacian(const WeightedGraph& g) {
  g.validate(/*allow_zero_weights=*/true);
  MatrixXd w = MatrixXd::Zero(g.node_count, g.node_count);
  for (const auto& e : g.edges) {
    w(e.i, e.j) -= e.w;
    w(e.j, e.i) -= e.w;
    w(e.i, e.i) += e.w;
    w(e.j, e.j) += e.w;
  }
  return detail::make_gossip(std::move(w), g);
}

// I - M with M the Metropolis weight matrix. Requires a connected graph so
// the kernel property holds for consensus use; lam_max stays <= 1.
inline GossipMatrix metropolis_gossip(const WeightedGraph& g) {
  g.validate();
  if (!g.connected()) throw std::invalid_argument("metropolis_gossip: graph must be connected");
  auto deg = g.degrees();
  MatrixXd w = MatrixXd::Zero(g.node_count, g.node_count);
  for (const auto& e : g.edges) {
    const double mij = 1.0 / (1.0 + std::max(deg[static_cast<std::size_t>(e.i)],
                                             deg[static_cast<std::size_t>(e.j)]));
    w(e.i, e.j) = -mij;
    w(e.j, e.i) = -mij;
    w(e.i, e.i) += mij;
    w(e.j, e.j) += mij;
  }
  return detail::make_gossip(std::move(w), g);
}

// Applies (W (x) I_d) x without materializing the Kronecker product.
// Blocks are node-major: x = (x_1; ...; x_n), x_i in R^d.
inline VectorXd lift_apply(const MatrixXd& w, int d, const VectorXd& x) {
  const auto n = w.rows();
  if (d < 1) throw std::invalid_argument("lift_apply: block dimension must be >= 1");
  if (x.size() != n * d) throw std::invalid_argument("lift_apply: dimension mismatch");
  Eigen::Map<const MatrixXd> cols(x.data(), d, n);
  VectorXd y(n * d);
  Eigen::Map<MatrixXd>(y.data(), d, n) = cols * w;  // W symmetric
  return y;
}

// A sequence of gossip matrices W(k) with certified spectrum bounds valid
// for every emitted matrix. Emission is a pure function of (seed, k).
class GossipSource {
 public:
  virtual ~GossipSource() = default;
  virtual int nodes() const = 0;
  virtual MatrixXd matrix(std::int64_t k) const = 0;
  // communication rounds charged per application of W(k)
  virtual int rounds() const { return 1; }
  double lam_min_plus() const { return lam_min_plus_; }
  double lam_max() const { return lam_max_; }

 protected:
  GossipSource(double lmin, double lmax) : lam_min_plus_(lmin), lam_max_(lmax) {}
  double lam_min_plus_;
  double lam_max_;
};

using GossipSourcePtr = std::shared_ptr<const GossipSource>;

namespace detail {

class FixedSource final : public GossipSource {
 public:
  explicit FixedSource(GossipMatrix w)
      : GossipSource(w.lam_min_plus, w.lam_max), w_(std::move(w)) {}
  int nodes() const override { return static_cast<int>(w_.W.rows()); }
  MatrixXd matrix(std::int64_t) const override { return w_.W; }

 private:
  GossipMatrix w_;
};

class RandomRingSource final : public GossipSource {
 public:
  RandomRingSource(int n, std::uint64_t seed)
      : GossipSource(2.0 - 2.0 * std::cos(2.0 * kPi / n),
                     2.0 - 2.0 * std::cos(2.0 * kPi * (n / 2) / n)),
        n_(n),
        seed_(seed) {}
  int nodes() const override { return n_; }
  MatrixXd matrix(std::int64_t k) const override {
    std::vector<int> order(static_cast<std::size_t>(n_));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed_, static_cast<std::uint64_t>(k));
    rng.shuffle(order.begin(), order.end());
    return laplacian(WeightedGraph::ring(order)).W;
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  int n_;
  std::uint64_t seed_;
};

class CyclingStarSource final : public GossipSource {
 public:
  explicit CyclingStarSource(int n) : GossipSource(1.0, static_cast<double>(n)), n_(n) {}
  int nodes() const override { return n_; }
  MatrixXd matrix(std::int64_t k) const override {
    return laplacian(WeightedGraph::star(n_, center(k))).W;
  }
  int center(std::int64_t k) const {
    const int third = n_ / 3;
    return third + static_cast<int>(k % third);  // cycles through V2
  }

 private:
  int n_;
};

// Divides every emitted matrix by the certified lam_max of the inner source.
class NormalizedSource final : public GossipSource {
 public:
  explicit NormalizedSource(GossipSourcePtr inner)
      : GossipSource(inner->lam_min_plus() / inner->lam_max(), 1.0), inner_(std::move(inner)) {}
  int nodes() const override { return inner_->nodes(); }
  MatrixXd matrix(std::int64_t k) const override {
    return inner_->matrix(k) / scale_factor();
  }
  double scale_factor() const { return inner_->lam_max(); }

 private:
  GossipSourcePtr inner_;
};

}  // namespace detail

// Ring over a seeded random permutation of the nodes at every step. All ring
// Laplacians are permutation-similar, so the certified bounds are exact.
inline GossipSourcePtr random_ring_source(int n, std::uint64_t seed) {
  if (n < 3) throw std::invalid_argument("random_ring_source: a ring needs >= 3 nodes");
  return std::make_shared<detail::RandomRingSource>(n, seed);
}

// Star over n nodes whose center cycles through the middle third V2.
// Every emitted Laplacian has spectral ratio exactly n.
inline GossipSourcePtr star_source(int n) {
  if (n < 3 || n % 3 != 0)
    throw std::invalid_argument("star_source: node count must be divisible by 3");
  return std::make_shared<detail::CyclingStarSource>(n);
}

inline GossipSourcePtr fixed_source(GossipMatrix w) {
  return std::make_shared<detail::FixedSource>(std::move(w));
}

inline GossipSourcePtr normalized_source(GossipSourcePtr inner) {
  return std::make_shared<detail::NormalizedSource>(std::move(inner));
}

// gamma_n = (1 - cos(pi/n)) / (1 + cos(pi/n)): spectral ratio of the unit
// path Laplacian on n nodes; strictly decreasing with gamma_2 = 1.
inline double gamma_n(int n) {
  if (n < 2) throw std::invalid_argument("gamma_n: n must be >= 2");
  const double c = std::cos(3.14159265358979323846 / n);
  return (1.0 - c) / (1.0 + c);
}

// The unique n with gamma_n >= gamma > gamma_{n+1}. Exact boundaries such as
// gamma = gamma_3 = 1/3 are honored up to a relative rounding margin.
inline int select_size(double gamma) {
  if (!(gamma > 0.0) || gamma > 1.0)
    throw std::invalid_argument("select_size: gamma must lie in (0, 1]");
  int n = 2;
  while (gamma_n(n + 1) >= gamma * (1.0 - 1e-12)) ++n;
  return n;
}

struct ReweightedLineGraph {
  WeightedGraph graph;
  int n = 0;     // gamma-sequence index (graph has 3 nodes when n == 2)
  double a = 0;  // reweighting found by bisection
};

namespace detail {

inline MatrixXd laplacian_matrix_raw(const WeightedGraph& g) {
  MatrixXd w = MatrixXd::Zero(g.node_count, g.node_count);
  for (const auto& e : g.edges) {
    w(e.i, e.j) -= e.w;
    w(e.j, e.i) -= e.w;
    w(e.i, e.i) += e.w;
    w(e.j, e.j) += e.w;
  }
  return w;
}

}  // namespace detail

// Line graph (or the 3-node complete graph for n = 2) with one edge
// reweighted so that the Laplacian spectral ratio hits target_gamma.
inline ReweightedLineGraph reweighted_line_graph(double target_gamma) {
  if (!(target_gamma > 0.0) || target_gamma > 1.0)
    throw std::invalid_argument("reweighted_line_graph: target must lie in (0, 1]");
  const int n = select_size(target_gamma);

  auto build = [&](double a) {
    if (n >= 3) return WeightedGraph::path(n, 1.0 - a);
    WeightedGraph g;  // complete graph on 3 nodes, edge (0,2) carries weight a
    g.node_count = 3;
    g.edges = {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, a}};
    return g;
  };
  auto gamma_at = [&](double a) {
    auto eig = jacobi_eigh(detail::laplacian_matrix_raw(build(a)));
    return eig.values(1) / eig.values(eig.values.size() - 1);
  };

  // bracketing: gamma(a) runs from gamma_n down to 0 on the line graph and
  // from gamma_3 up to 1 on the 3-node complete graph
  double lo = 0.0, hi = 1.0;
  double glo = gamma_at(lo), ghi = gamma_at(hi);
  const double tol = 1e-8;
  if (std::abs(glo - target_gamma) <= tol) return {build(lo), n, lo};
  if (std::abs(ghi - target_gamma) <= tol) return {build(hi), n, hi};
  if ((glo - target_gamma) * (ghi - target_gamma) > 0.0)
    throw std::logic_error("reweighted_line_graph: bisection bracket failed");

  double a = 0.5;
  for (int iter = 0; iter < 200; ++iter) {
    a = 0.5 * (lo + hi);
    const double g = gamma_at(a);
    if (std::abs(g - target_gamma) <= tol) return {build(a), n, a};
    if ((g - target_gamma) * (glo - target_gamma) > 0.0) {
      lo = a;
      glo = g;
    } else {
      hi = a;
    }
  }
  throw std::runtime_error("reweighted_line_graph: bisection did not converge");
}

}  // namespace adom

#endif  // ADOM_GRAPHS_HPP
