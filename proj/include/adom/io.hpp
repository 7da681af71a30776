#ifndef ADOM_IO_HPP
#define ADOM_IO_HPP

#include <json.hpp>

#include <cstdio>
#include <ostream>
#include <string>

#include "graphs.hpp"
#include "lowerbound.hpp"
#include "problems.hpp"

namespace adom {

using nlohmann::json;

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- graphs: {n, edges: [[i, j, w], ...]} ----------------------------------

inline json graph_to_json(const WeightedGraph& g) {
  json edges = json::array();
  for (const auto& e : g.edges) edges.push_back({e.i, e.j, e.w});
  return json{{"n", g.node_count}, {"edges", edges}};
}

inline WeightedGraph graph_from_json(const json& j) {
  WeightedGraph g;
  g.node_count = j.at("n").get<int>();
  for (const auto& e : j.at("edges"))
    g.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
  g.validate(/*allow_zero_weights=*/true);
  return g;
}

// row-major, 17 significant digits
inline void matrix_to_csv(std::ostream& os, const MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << fmt17(m(r, c));
    }
    os << "\n";
  }
}

// ---- problems ---------------------------------------------------------------

inline json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) rows.push_back(m(r, c));
  return rows;
}

inline MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(j.size()) != rows * cols)
    throw std::invalid_argument("matrix_from_json: size mismatch");
  MatrixXd m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(k++).get<double>();
  return m;
}

inline json vector_to_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline VectorXd vector_from_json(const json& j) {
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

inline json problem_to_json(const QuadraticProblem& qp) {
  json c = json::array();
  json lin = json::array();
  for (const auto& ci : qp.C) c.push_back(matrix_to_json(ci));
  for (const auto& li : qp.lin) lin.push_back(vector_to_json(li));
  return json{{"n", qp.n},         {"d", qp.d},       {"mu_F", qp.mu_F}, {"L_F", qp.L_F},
              {"seed", qp.seed},   {"p", qp.p()},     {"chi_A", qp.chi_A},
              {"A", matrix_to_json(qp.A)},            {"b", vector_to_json(qp.b)},
              {"C", c},            {"lin", lin}};
}

inline QuadraticProblem problem_from_json(const json& j) {
  QuadraticProblem qp;
  qp.n = j.at("n").get<int>();
  qp.d = j.at("d").get<int>();
  qp.mu_F = j.at("mu_F").get<double>();
  qp.L_F = j.at("L_F").get<double>();
  qp.seed = j.at("seed").get<std::uint64_t>();
  qp.chi_A = j.at("chi_A").get<double>();
  const int p = j.at("p").get<int>();
  qp.A = matrix_from_json(j.at("A"), p, qp.d);
  qp.b = vector_from_json(j.at("b"));
  for (const auto& cj : j.at("C")) qp.C.push_back(matrix_from_json(cj, qp.d, qp.d));
  for (const auto& lj : j.at("lin")) qp.lin.push_back(vector_from_json(lj));
  qp.validate();
  return qp;
}

// ---- lower-bound instances --------------------------------------------------

inline json subnode_set_to_json(const SubnodeSet& s) {
  json out = json::array();
  for (const auto& p : s) out.push_back({p.first, p.second});
  return out;
}

inline json instance_to_json(const WorstCaseInstance& inst) {
  return json{{"time_varying", inst.time_varying},
              {"outer", graph_to_json(inst.outer)},
              {"inner", graph_to_json(inst.inner)},
              {"n", inst.n},
              {"m", inst.m},
              {"dim", inst.dim},
              {"S1", subnode_set_to_json(inst.S1)},
              {"S2", subnode_set_to_json(inst.S2)},
              {"S3", subnode_set_to_json(inst.S3)},
              {"alpha", inst.alpha_nb},
              {"beta", inst.beta_nb},
              {"kappa_g", inst.kappa_g},
              {"delta_A", inst.delta_A},
              {"delta_W", inst.delta_W},
              {"mu_F", inst.mu_F},
              {"L_F", inst.L_F},
              {"chi_W", inst.chi_W},
              {"chi_A", inst.chi_A},
              {"a_outer", inst.a_outer},
              {"a_inner", inst.a_inner}};
}

inline json span_report_to_json(const SpanReport& r) {
  return json{{"budget",
               {{"computes", r.budget.computes}, {"comms", r.budget.comms}, {"mults", r.budget.mults}}},
              {"prefix", r.prefix},
              {"certified_bound", r.certified_bound}};
}

}  // namespace adom

#endif  // ADOM_IO_HPP
