#pragma once

#include <optional>
#include <set>
#include <utility>

#include "qmix/circuits.hpp"

namespace qmix {

/// Undirected graph over qubits (or output bits) with an edge wherever the
/// two-party reduced state (or joint marginal) fails to factorize.
struct CorrelationGraph {
  int n_nodes = 0;
  std::set<std::pair<int, int>> edges;  // ordered pairs a < b
  int max_degree = 0;

  static CorrelationGraph from_edges(int n_nodes, std::set<std::pair<int, int>> edges);
  bool has_edge(int a, int b) const;
};

/// True iff the two-qubit state factorizes as the product of its marginals
/// within tol::corr (for two parties this characterizes product states).
bool is_product(const DensityMatrix& rho_ab);

CorrelationGraph correlation_graph(const DensityMatrix& rho);

/// Correlation graph of the output distribution f[input]: nodes are the p
/// output bits, with an edge where a pair's joint marginal is not the
/// product of the single-bit marginals.
CorrelationGraph function_correlation_graph(const ProbFunction& f, Index input);

/// Longest gate path; trace-out nodes count as depth 0 (discarding does not
/// correlate anything).
int circuit_depth(const Circuit& c);

struct DepthReport {
  int circuit_depth = 0;
  int max_fanin = 0;        // k
  int degree = 0;           // c, from the correlation graph
  double bound_state_form = 0.0;     // (1/2) log_k(c)
  double bound_function_form = 0.0;  // log_k(c)
  bool satisfied = false;   // depth >= (1/2) log_k(c), the asserted form
};

/// Depth lower-bound check against the final state's correlation graph.
DepthReport depth_bound_check(const Circuit& c, const DensityMatrix& rho_in, int max_fanin);
/// Same, against a probabilistic function's correlation graph at one input.
DepthReport depth_bound_check(const Circuit& c, const ProbFunction& f, Index input,
                              int max_fanin);

/// A gate with directed paths to both output wires, if one exists. Whenever
/// the pair is correlated on a basic input such a common ancestor must
/// exist; shared ancestry does not imply correlation, so none may also be
/// returned for uncorrelated pairs.
std::optional<int> causality_witness(const Circuit& c, int output_wire_a, int output_wire_b);

}  // namespace qmix
