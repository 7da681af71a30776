#ifndef ADOM_LOWERBOUND_HPP
#define ADOM_LOWERBOUND_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "graphs.hpp"
#include "problems.hpp"

namespace adom {

// Tail of the squared distance to the chain function's minimizer, whose
// coordinates decay as q^k with q = (sqrt(kappa)-1)/(sqrt(kappa)+1):
//   sum_{k >= N+2} q^(2k) = q^(2(N+2)) / (1 - q^2).
inline double nesterov_residual(double kappa_g, std::int64_t n_steps) {
  if (n_steps < 0) throw std::invalid_argument("nesterov_residual: N must be >= 0");
  if (kappa_g <= 1.0) return 0.0;  // degenerate conditioning
  const double q = (std::sqrt(kappa_g) - 1.0) / (std::sqrt(kappa_g) + 1.0);
  return std::pow(q, 2.0 * static_cast<double>(n_steps + 2)) / (1.0 - q * q);
}

inline double nesterov_solution_coord(double kappa_g, std::int64_t k) {
  if (kappa_g <= 1.0) return k == 0 ? 1.0 : 0.0;
  const double q = (std::sqrt(kappa_g) - 1.0) / (std::sqrt(kappa_g) + 1.0);
  return std::pow(q, static_cast<double>(k));
}

using SubnodeSet = std::vector<std::pair<int, int>>;  // (outer node, inner subnode)

// Two-level worst-case instance: outer communication graph G (static line or
// cycling star), inner graph G' realized through A = sqrt(W' (x) I), and the
// three-way chain-function splitting across S1, S2, S3.
struct WorstCaseInstance {
  bool time_varying = false;
  WeightedGraph outer;  // for the time-varying case: the star template's node set
  WeightedGraph inner;
  int n = 0;    // outer node count
  int m = 0;    // inner subnode count
  int dim = 0;  // chain truncation
  SubnodeSet S1, S2, S3;
  double alpha_nb = 0.0;
  double beta_nb = 0.0;
  double kappa_g = 0.0;
  int delta_A = 0;  // inner hop distance between S1 and S2 inner sets
  int delta_W = 0;  // outer transport distance between S2 and S3 (temporal when time-varying)
  double mu_F = 0.0, L_F = 0.0, chi_W = 0.0, chi_A = 0.0;
  double a_outer = 0.0, a_inner = 0.0;

  std::vector<int> s2g, s3g;    // outer index sets (s3g doubles as V3 when time-varying)
  std::vector<int> s1gp, s2gp;  // inner index sets

  GossipSourcePtr outer_source() const {
    if (time_varying) return star_source(n);
    return fixed_source(laplacian(outer));
  }

  QuadraticProblem to_quadratic() const;
};

namespace detail {

// Chain pair starting at 0-based coordinate s belongs to: M2 for s = 0 mod 3,
// M3 for s = 1, M1 for s = 2. Coordinate 0 itself is unlocked by the linear
// term carried by S1 functions.
inline int extension_class(int prefix) {
  if (prefix == 0) return 1;
  switch (prefix % 3) {
    case 1: return 2;
    case 2: return 3;
    default: return 1;
  }
}

// Truncated block matrices of the three-way splitting; a pair straddling the
// truncation boundary keeps its diagonal remnant.
inline MatrixXd split_matrix(int which, int dim) {
  MatrixXd m = MatrixXd::Zero(dim, dim);
  if (which == 1) m(0, 0) = 1.0;
  const int start = which == 2 ? 0 : (which == 3 ? 1 : 2);
  for (int s = start; s < dim; s += 3) {
    m(s, s) += 1.0;
    if (s + 1 < dim) {
      m(s + 1, s + 1) += 1.0;
      m(s, s + 1) -= 1.0;
      m(s + 1, s) -= 1.0;
    }
  }
  return m;
}

struct LevelSets {
  std::vector<int> near_set;  // first ceil(n/32) nodes
  std::vector<int> far_set;
  int delta = 0;
};

// Set prescription of the line-graph construction; the gamma-index-2 branch
// uses the 3-node complete graph with singleton sets at distance 1.
inline LevelSets level_sets(int gamma_index, int node_count) {
  LevelSets out;
  if (gamma_index == 2) {
    out.near_set = {0};
    out.far_set = {1};
    out.delta = 1;
    return out;
  }
  const int n = node_count;
  const int near = (n + 31) / 32;  // ceil(n/32)
  const double delta_real = (1.0 - 1.0 / 16.0) * n - 1.0;
  out.delta = static_cast<int>(std::ceil(delta_real));
  for (int i = 0; i < near; ++i) out.near_set.push_back(i);
  for (int i = near + out.delta - 1; i < n; ++i) out.far_set.push_back(i);
  if (out.far_set.empty()) throw std::logic_error("level_sets: far set empty");
  return out;
}

}  // namespace detail

// Lifted quadratic over the stacked subnode chunks. The stacked problem's own
// convexity constants are the per-chunk ones (a factor m below the design
// targets, which hold for the per-node functions of the consensus variable).
inline QuadraticProblem WorstCaseInstance::to_quadratic() const {
  QuadraticProblem qp;
  qp.n = n;
  qp.d = m * dim;
  const double base = alpha_nb / (2.0 * m * n);  // |x|^2 coefficient per subnode
  const double wsplit = (beta_nb - alpha_nb) / 8.0;

  std::vector<std::vector<int>> cls(static_cast<std::size_t>(n),
                                    std::vector<int>(static_cast<std::size_t>(m), 0));
  auto mark = [&](const SubnodeSet& s, int c) {
    for (auto [i, j] : s) cls[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = c;
  };
  mark(S1, 1);
  mark(S2, 2);
  mark(S3, 3);
  const double sizes[4] = {0.0, static_cast<double>(S1.size()), static_cast<double>(S2.size()),
                           static_cast<double>(S3.size())};

  double chunk_max = 2.0 * base;
  for (int i = 0; i < n; ++i) {
    MatrixXd ci = MatrixXd::Zero(qp.d, qp.d);
    VectorXd li = VectorXd::Zero(qp.d);
    for (int j = 0; j < m; ++j) {
      const int c = cls[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      MatrixXd chunk = 2.0 * base * MatrixXd::Identity(dim, dim);
      if (c != 0) {
        chunk += (2.0 * wsplit / sizes[c]) * detail::split_matrix(c, dim);
        if (c == 1) li(j * dim) = -2.0 * wsplit / sizes[1];
        auto eig = jacobi_eigh(chunk);
        chunk_max = std::max(chunk_max, eig.values(eig.values.size() - 1));
      }
      ci.block(j * dim, j * dim, dim, dim) = chunk;
    }
    qp.C.push_back(std::move(ci));
    qp.lin.push_back(std::move(li));
  }
  qp.mu_F = 2.0 * base;
  qp.L_F = chunk_max * (1.0 + 1e-12);

  // A = sqrt(W' (x) I_dim); multiplications by A'A realize inner communication
  MatrixXd wp = laplacian(inner).W;
  auto eig = jacobi_eigh(wp);
  MatrixXd sq = MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < eig.values.size(); ++j) {
    const double lam = std::max(0.0, eig.values(j));
    sq += std::sqrt(lam) * eig.vectors.col(j) * eig.vectors.col(j).transpose();
  }
  qp.A = MatrixXd::Zero(qp.d, qp.d);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c)
      qp.A.block(r * dim, c * dim, dim, dim) = sq(r, c) * MatrixXd::Identity(dim, dim);
  qp.b = VectorXd::Zero(qp.d);
  qp.validate();
  return qp;
}

namespace detail {

inline WorstCaseInstance build_common(double L_F, double mu_F, double chi_A, int dim) {
  if (!(mu_F > 0.0) || L_F < mu_F)
    throw std::invalid_argument("instance: need L_F >= mu_F > 0");
  if (chi_A < 1.0) throw std::invalid_argument("instance: chi_A must be >= 1");
  if (dim < 4) throw std::invalid_argument("instance: dim must be >= 4");
  WorstCaseInstance inst;
  inst.mu_F = mu_F;
  inst.L_F = L_F;
  inst.chi_A = chi_A;
  inst.dim = dim;
  auto inner = reweighted_line_graph(1.0 / chi_A);
  inst.inner = inner.graph;
  inst.a_inner = inner.a;
  inst.m = inner.graph.node_count;
  auto sets = level_sets(inner.n, inst.m);
  inst.s2gp = sets.near_set;
  inst.s1gp = sets.far_set;
  inst.delta_A = sets.delta;
  return inst;
}

inline void finish_instance(WorstCaseInstance& inst) {
  const double n = inst.n, m = inst.m;
  inst.alpha_nb = inst.mu_F * n;
  inst.beta_nb = 2.0 * static_cast<double>(inst.S2.size()) * (inst.L_F - inst.mu_F) / m +
                 inst.mu_F * n;
  inst.kappa_g = inst.beta_nb / inst.alpha_nb;

  // distance certification
  const int dist_inner = inst.inner.bfs_distance(inst.s1gp, inst.s2gp);
  if (dist_inner < inst.delta_A) throw std::logic_error("instance: inner distance shortfall");
  if (!inst.time_varying) {
    const int dist_outer = inst.outer.bfs_distance(inst.s2g, inst.s3g);
    if (dist_outer < inst.delta_W) throw std::logic_error("instance: outer distance shortfall");
  }

  // per-node effective Hessian (all chunks at the consensus variable) must
  // stay within the design sandwich [mu_F, L_F]
  std::vector<std::vector<int>> count(static_cast<std::size_t>(inst.n),
                                      std::vector<int>(4, 0));
  for (const auto& s : inst.S1) ++count[static_cast<std::size_t>(s.first)][1];
  for (const auto& s : inst.S2) ++count[static_cast<std::size_t>(s.first)][2];
  for (const auto& s : inst.S3) ++count[static_cast<std::size_t>(s.first)][3];
  const double sizes[4] = {1.0, static_cast<double>(inst.S1.size()),
                           static_cast<double>(inst.S2.size()),
                           static_cast<double>(inst.S3.size())};
  const double wsplit = (inst.beta_nb - inst.alpha_nb) / 4.0;
  for (int i = 0; i < inst.n; ++i) {
    MatrixXd h = (inst.alpha_nb / n) * MatrixXd::Identity(inst.dim, inst.dim);
    for (int c = 1; c <= 3; ++c) {
      const int cnt = count[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
      if (cnt > 0) h += (wsplit * cnt / sizes[c]) * split_matrix(c, inst.dim);
    }
    auto eig = jacobi_eigh(h);
    const double tol = 1e-9 * std::max(1.0, inst.L_F);
    if (eig.values(0) < inst.mu_F - tol ||
        eig.values(eig.values.size() - 1) > inst.L_F + tol)
      throw std::logic_error("instance: effective node Hessian escapes [mu_F, L_F]");
  }
}

}  // namespace detail

// Static two-level instance of the line-graph construction.
inline WorstCaseInstance build_static_instance(double L_F, double mu_F, double chi_W,
                                               double chi_A, int dim) {
  if (chi_W < 1.0) throw std::invalid_argument("instance: chi_W must be >= 1");
  WorstCaseInstance inst = detail::build_common(L_F, mu_F, chi_A, dim);
  inst.chi_W = chi_W;
  auto outer = reweighted_line_graph(1.0 / chi_W);
  inst.outer = outer.graph;
  inst.a_outer = outer.a;
  inst.n = outer.graph.node_count;
  auto sets = detail::level_sets(outer.n, inst.n);
  inst.s2g = sets.near_set;
  inst.s3g = sets.far_set;
  inst.delta_W = sets.delta;

  for (int i : inst.s2g)
    for (int j : inst.s1gp) inst.S1.push_back({i, j});
  for (int i : inst.s2g)
    for (int j : inst.s2gp) inst.S2.push_back({i, j});
  for (int i : inst.s3g)
    for (int j : inst.s2gp) inst.S3.push_back({i, j});
  detail::finish_instance(inst);
  return inst;
}

// Time-varying instance: stars with the center cycling through V2, the inner
// graph as in the static case, and S3 covering the subnodes of V3 incident to
// an inner edge.
inline WorstCaseInstance build_tv_instance(double L_F, double mu_F, double chi_W, double chi_A,
                                           int dim) {
  if (chi_W < 3.0) throw std::invalid_argument("instance: time-varying case needs chi_W >= 3");
  WorstCaseInstance inst = detail::build_common(L_F, mu_F, chi_A, dim);
  inst.time_varying = true;
  inst.chi_W = chi_W;
  const int third = static_cast<int>(std::floor(chi_W / 3.0));
  inst.n = 3 * third;
  inst.outer = WeightedGraph::star(inst.n, third);  // template; centers cycle at runtime
  for (int i = 0; i < third; ++i) inst.s2g.push_back(i);              // V1
  for (int i = 2 * third; i < inst.n; ++i) inst.s3g.push_back(i);     // V3
  inst.delta_W = third + 1;  // temporal transport time through the cycling stars

  std::vector<char> incident(static_cast<std::size_t>(inst.m), 0);
  for (const auto& e : inst.inner.edges)
    if (e.w > 0.0) {
      incident[static_cast<std::size_t>(e.i)] = 1;
      incident[static_cast<std::size_t>(e.j)] = 1;
    }
  for (int i : inst.s2g) {
    for (int j : inst.s1gp) inst.S1.push_back({i, j});
    for (int j : inst.s2gp) inst.S2.push_back({i, j});
  }
  for (int i : inst.s3g)
    for (int j = 0; j < inst.m; ++j)
      if (incident[static_cast<std::size_t>(j)]) inst.S3.push_back({i, j});
  detail::finish_instance(inst);

  // temporal certification: pure communication diffusion from V1 must not
  // reach V3 in fewer than delta_W rounds
  std::vector<char> marked(static_cast<std::size_t>(inst.n), 0);
  for (int i : inst.s2g) marked[static_cast<std::size_t>(i)] = 1;
  int rounds = 0;
  const int limit = 4 * inst.n + 8;
  while (rounds < limit) {
    bool reached = false;
    for (int i : inst.s3g) reached |= marked[static_cast<std::size_t>(i)] != 0;
    if (reached) break;
    const int center = third + rounds % third;
    std::vector<char> next = marked;
    if (marked[static_cast<std::size_t>(center)]) {
      for (int i = 0; i < inst.n; ++i) next[static_cast<std::size_t>(i)] = 1;
    } else {
      for (int i = 0; i < inst.n; ++i)
        if (marked[static_cast<std::size_t>(i)]) next[static_cast<std::size_t>(center)] = 1;
    }
    marked = std::move(next);
    ++rounds;
  }
  if (rounds < inst.delta_W) throw std::logic_error("instance: temporal distance shortfall");
  return inst;
}

struct SpanBudget {
  int computes = 0;
  int comms = 0;
  int mults = 0;
};

struct SpanReport {
  SpanBudget budget;
  int prefix = 0;
  double certified_bound = 0.0;  // err^2 lower bound at N = prefix
};

// Exhaustive layered search over action schedules (local computation rounds,
// outer communications, inner multiplications) for the largest reachable
// nonzero prefix under the span-propagation semantics. Adversary-optimal by
// construction: every interleaving within the budget is explored.
inline SpanReport span_progress(const WorstCaseInstance& inst, const SpanBudget& budget) {
  if (budget.computes < 0 || budget.comms < 0 || budget.mults < 0)
    throw std::invalid_argument("span_progress: budgets must be >= 0");
  if (inst.dim > 12 || inst.n * inst.m > 30)
    throw std::invalid_argument("span_progress: instance too large for exhaustive search (dim <= 12, nm <= 30)");

  const int n = inst.n, m = inst.m, dim = inst.dim;
  using State = std::vector<signed char>;

  std::vector<int> cls(static_cast<std::size_t>(n * m), 0);
  for (auto [i, j] : inst.S1) cls[static_cast<std::size_t>(i * m + j)] = 1;
  for (auto [i, j] : inst.S2) cls[static_cast<std::size_t>(i * m + j)] = 2;
  for (auto [i, j] : inst.S3) cls[static_cast<std::size_t>(i * m + j)] = 3;

  auto inner_adj = inst.inner.adjacency();
  std::vector<std::vector<int>> outer_adj_static;
  if (!inst.time_varying) outer_adj_static = inst.outer.adjacency();
  const int third = inst.time_varying ? n / 3 : 0;

  auto do_compute = [&](const State& s) {
    State t = s;
    for (int u = 0; u < n * m; ++u) {
      const int c = cls[static_cast<std::size_t>(u)];
      if (c != 0 && t[static_cast<std::size_t>(u)] < dim &&
          detail::extension_class(t[static_cast<std::size_t>(u)]) == c)
        ++t[static_cast<std::size_t>(u)];
    }
    return t;
  };
  auto do_mult = [&](const State& s) {
    State t = s;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        signed char best = s[static_cast<std::size_t>(i * m + j)];
        for (int jj : inner_adj[static_cast<std::size_t>(j)])
          best = std::max(best, s[static_cast<std::size_t>(i * m + jj)]);
        t[static_cast<std::size_t>(i * m + j)] = best;
      }
    return t;
  };
  auto do_comm = [&](const State& s, int comm_index) {
    State t = s;
    if (inst.time_varying) {
      const int center = third + comm_index % third;
      for (int j = 0; j < m; ++j) {
        signed char center_val = s[static_cast<std::size_t>(center * m + j)];
        signed char best = center_val;
        for (int i = 0; i < n; ++i)
          best = std::max(best, s[static_cast<std::size_t>(i * m + j)]);
        t[static_cast<std::size_t>(center * m + j)] = best;
        for (int i = 0; i < n; ++i)
          if (i != center)
            t[static_cast<std::size_t>(i * m + j)] = std::max(
                s[static_cast<std::size_t>(i * m + j)], center_val);
      }
    } else {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
          signed char best = s[static_cast<std::size_t>(i * m + j)];
          for (int ii : outer_adj_static[static_cast<std::size_t>(i)])
            best = std::max(best, s[static_cast<std::size_t>(ii * m + j)]);
          t[static_cast<std::size_t>(i * m + j)] = best;
        }
    }
    return t;
  };

  auto dominated = [](const State& a, const State& b) {  // a <= b componentwise
    for (std::size_t u = 0; u < a.size(); ++u)
      if (a[u] > b[u]) return false;
    return true;
  };

  std::map<std::tuple<int, int, int>, std::vector<State>> cells;
  cells[{0, 0, 0}] = {State(static_cast<std::size_t>(n * m), 0)};
  int best_prefix = 0;

  auto insert_state = [&](std::vector<State>& cell, State&& s) {
    for (const auto& existing : cell)
      if (dominated(s, existing)) return;
    cell.erase(std::remove_if(cell.begin(), cell.end(),
                              [&](const State& e) { return dominated(e, s); }),
               cell.end());
    cell.push_back(std::move(s));
  };

  for (int total = 0; total <= budget.computes + budget.comms + budget.mults; ++total) {
    for (int cu = std::min(total, budget.computes); cu >= 0; --cu) {
      for (int qu = std::min(total - cu, budget.comms); qu >= 0; --qu) {
        const int tu = total - cu - qu;
        if (tu > budget.mults) continue;
        auto it = cells.find({cu, qu, tu});
        if (it == cells.end()) continue;
        for (const auto& s : it->second) {
          for (signed char v : s) best_prefix = std::max(best_prefix, static_cast<int>(v));
          if (cu < budget.computes) insert_state(cells[{cu + 1, qu, tu}], do_compute(s));
          if (qu < budget.comms) insert_state(cells[{cu, qu + 1, tu}], do_comm(s, qu));
          if (tu < budget.mults) insert_state(cells[{cu, qu, tu + 1}], do_mult(s));
        }
      }
    }
  }

  SpanReport report;
  report.budget = budget;
  report.prefix = best_prefix;
  report.certified_bound = nesterov_residual(inst.kappa_g, best_prefix);
  return report;
}

}  // namespace adom

#endif  // ADOM_LOWERBOUND_HPP
