#include "qmix/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

namespace qmix {

CorrelationGraph CorrelationGraph::from_edges(int n_nodes,
                                              std::set<std::pair<int, int>> edges) {
  CorrelationGraph g;
  g.n_nodes = n_nodes;
  std::vector<int> degree(n_nodes, 0);
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n_nodes || b >= n_nodes || a >= b)
      throw ValidationError("CorrelationGraph: bad edge");
    ++degree[a];
    ++degree[b];
  }
  g.edges = std::move(edges);
  g.max_degree = degree.empty() ? 0 : *std::max_element(degree.begin(), degree.end());
  return g;
}

bool CorrelationGraph::has_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  return edges.count({a, b}) > 0;
}

bool is_product(const DensityMatrix& rho_ab) {
  if (rho_ab.n_qubits() != 2) throw ValidationError("is_product: expected a 2-qubit state");
  CMatrix a = partial_trace(rho_ab.mat(), QubitIndexSet(2, {0}));
  CMatrix b = partial_trace(rho_ab.mat(), QubitIndexSet(2, {1}));
  return trace_norm(rho_ab.mat() - kron(a, b)) <= tol::corr;
}

CorrelationGraph correlation_graph(const DensityMatrix& rho) {
  const int n = rho.n_qubits();
  std::set<std::pair<int, int>> edges;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      DensityMatrix pair = reduce(rho, QubitIndexSet(n, {a, b}));
      if (!is_product(pair)) edges.insert({a, b});
    }
  return CorrelationGraph::from_edges(n, std::move(edges));
}

CorrelationGraph function_correlation_graph(const ProbFunction& f, Index input) {
  if (input < 0 || input >= f.rows())
    throw ValidationError("function_correlation_graph: input out of range");
  const int p = f.p_bits;
  const Eigen::VectorXd dist = f.table.row(input).transpose();
  auto bit = [&](Index word, int q) { return (word >> (p - 1 - q)) & 1; };
  std::set<std::pair<int, int>> edges;
  for (int a = 0; a < p; ++a)
    for (int b = a + 1; b < p; ++b) {
      double joint[2][2] = {{0, 0}, {0, 0}};
      for (Index w = 0; w < dist.size(); ++w) joint[bit(w, a)][bit(w, b)] += dist(w);
      const double pa = joint[1][0] + joint[1][1];
      const double pb = joint[0][1] + joint[1][1];
      double dev = 0.0;
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
          const double px = x ? pa : 1 - pa, py = y ? pb : 1 - pb;
          dev += std::abs(joint[x][y] - px * py);
        }
      if (dev > tol::corr) edges.insert({a, b});
    }
  return CorrelationGraph::from_edges(p, std::move(edges));
}

int circuit_depth(const Circuit& c) {
  std::map<int, std::size_t> producer_of;  // wire -> node index
  for (std::size_t i = 0; i < c.nodes().size(); ++i)
    for (int w : c.nodes()[i].out_wires) producer_of[w] = i;
  std::map<int, std::size_t> index_of_id;
  for (std::size_t i = 0; i < c.nodes().size(); ++i) index_of_id[c.nodes()[i].id] = i;

  std::vector<int> depth(c.nodes().size(), 0);
  int best = 0;
  for (int id : topo_sort(c)) {
    const std::size_t i = index_of_id[id];
    const Node& node = c.nodes()[i];
    int in_depth = 0;
    for (int w : node.in_wires) {
      auto it = producer_of.find(w);
      if (it != producer_of.end()) in_depth = std::max(in_depth, depth[it->second]);
    }
    const int own = std::holds_alternative<TraceOutGate>(node.op) ? 0 : 1;
    depth[i] = in_depth + own;
    best = std::max(best, depth[i]);
  }
  return best;
}

namespace {

DepthReport report_from_graph(const Circuit& c, const CorrelationGraph& g, int max_fanin) {
  if (max_fanin < 2) throw ValidationError("depth_bound_check: fan-in must be at least 2");
  DepthReport r;
  r.circuit_depth = circuit_depth(c);
  r.max_fanin = max_fanin;
  r.degree = g.max_degree;
  if (g.max_degree > 0) {
    r.bound_state_form = 0.5 * std::log2(g.max_degree) / std::log2(max_fanin);
    r.bound_function_form = 2.0 * r.bound_state_form;
  }
  r.satisfied = r.circuit_depth >= r.bound_state_form;
  return r;
}

}  // namespace

DepthReport depth_bound_check(const Circuit& c, const DensityMatrix& rho_in, int max_fanin) {
  return report_from_graph(c, correlation_graph(evaluate(c, rho_in)), max_fanin);
}

DepthReport depth_bound_check(const Circuit& c, const ProbFunction& f, Index input,
                              int max_fanin) {
  return report_from_graph(c, function_correlation_graph(f, input), max_fanin);
}

std::optional<int> causality_witness(const Circuit& c, int output_wire_a, int output_wire_b) {
  std::map<int, std::size_t> producer_of;
  for (std::size_t i = 0; i < c.nodes().size(); ++i)
    for (int w : c.nodes()[i].out_wires) producer_of[w] = i;

  // Backward closure of nodes from an output wire.
  auto ancestors = [&](int wire) {
    std::set<std::size_t> seen;
    std::vector<int> frontier{wire};
    while (!frontier.empty()) {
      const int w = frontier.back();
      frontier.pop_back();
      auto it = producer_of.find(w);
      if (it == producer_of.end() || !seen.insert(it->second).second) continue;
      for (int in : c.nodes()[it->second].in_wires) frontier.push_back(in);
    }
    return seen;
  };

  std::set<std::size_t> from_a = ancestors(output_wire_a);
  std::set<std::size_t> from_b = ancestors(output_wire_b);
  std::optional<int> witness;
  for (std::size_t i : from_a)
    if (from_b.count(i)) {
      const int id = c.nodes()[i].id;
      if (!witness || id < *witness) witness = id;
    }
  return witness;
}

}  // namespace qmix
