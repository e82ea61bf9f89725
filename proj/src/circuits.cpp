#include "qmix/circuits.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <queue>

namespace qmix {

namespace {

constexpr int kMaxNesting = 8;

CMatrix cnot_matrix() {
  CMatrix m = CMatrix::Zero(4, 4);
  m(0, 0) = m(1, 1) = m(3, 2) = m(2, 3) = 1;
  return m;
}

CMatrix toffoli_matrix() {
  CMatrix m = CMatrix::Identity(8, 8);
  m(6, 6) = m(7, 7) = 0;
  m(6, 7) = m(7, 6) = 1;
  return m;
}

}  // namespace

ProbFunction ProbFunction::make(int m_bits, int p_bits, Eigen::MatrixXd table) {
  if (m_bits < 0 || p_bits < 0) throw ValidationError("ProbFunction: negative bit count");
  const Index rows = Index{1} << m_bits, cols = Index{1} << p_bits;
  if (table.rows() != rows || table.cols() != cols)
    throw ValidationError("ProbFunction: table is " + std::to_string(table.rows()) + "x" +
                          std::to_string(table.cols()) + ", expected " + std::to_string(rows) +
                          "x" + std::to_string(cols));
  for (Index i = 0; i < rows; ++i) {
    double sum = 0;
    for (Index j = 0; j < cols; ++j) {
      if (table(i, j) < -1e-12 || table(i, j) > 1.0 + 1e-12)
        throw ValidationError("ProbFunction: entry outside [0, 1]");
      sum += table(i, j);
    }
    if (std::abs(sum - 1.0) > tol::tr)
      throw ValidationError("ProbFunction: row " + std::to_string(i) + " sums to " +
                            std::to_string(sum));
  }
  ProbFunction f;
  f.m_bits = m_bits;
  f.p_bits = p_bits;
  f.table = std::move(table);
  return f;
}

int gate_arity_in(const GateOp& op) {
  return std::visit(
      [](const auto& g) -> int {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, UnitaryGate>)
          return qubit_count(g.u.rows(), "unitary gate");
        else if constexpr (std::is_same_v<T, ChannelGate>)
          return g.op.n_in();
        else if constexpr (std::is_same_v<T, MeasureGate>)
          return g.n_qubits;
        else if constexpr (std::is_same_v<T, TraceOutGate>)
          return g.n_qubits;
        else
          return g.f.m_bits + g.f.p_bits;
      },
      op);
}

int gate_arity_out(const GateOp& op) {
  return std::visit(
      [](const auto& g) -> int {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, UnitaryGate>)
          return qubit_count(g.u.rows(), "unitary gate");
        else if constexpr (std::is_same_v<T, ChannelGate>)
          return g.op.n_out();
        else if constexpr (std::is_same_v<T, MeasureGate>)
          return g.record ? 2 * g.n_qubits : g.n_qubits;
        else if constexpr (std::is_same_v<T, TraceOutGate>)
          return 0;
        else
          return g.f.m_bits + g.f.p_bits;
      },
      op);
}

CMatrix gate_matrix(const std::string& name, int arity, double theta) {
  const Index dim = Index{1} << arity;
  if (name == "I") return CMatrix::Identity(dim, dim);
  if (name == "X" || name == "Y" || name == "Z" || name == "H" || name == "PHASE") {
    if (arity != 1) throw ValidationError("gate " + name + " takes 1 qubit");
    CMatrix m(2, 2);
    if (name == "X") m << 0, 1, 1, 0;
    if (name == "Y") m << 0, Complex(0, -1), Complex(0, 1), 0;
    if (name == "Z") m << 1, 0, 0, -1;
    if (name == "H") {
      const double s = 1.0 / std::sqrt(2.0);
      m << s, s, s, -s;
    }
    if (name == "PHASE") m << 1, 0, 0, std::exp(Complex(0, theta));
    return m;
  }
  if (name == "CNOT") {
    if (arity != 2) throw ValidationError("gate CNOT takes 2 qubits");
    return cnot_matrix();
  }
  if (name == "TOFFOLI") {
    if (arity != 3) throw ValidationError("gate TOFFOLI takes 3 qubits");
    return toffoli_matrix();
  }
  if (name == "GARBAGE_DETECT") {
    // |x, c> -> |x, c ^ [x != 0]> over (work, control).
    if (arity < 2) throw ValidationError("gate GARBAGE_DETECT needs work + control qubits");
    CMatrix m = CMatrix::Zero(dim, dim);
    for (Index x = 0; x < dim / 2; ++x)
      for (Index c = 0; c < 2; ++c) {
        const Index flipped = (x != 0) ? (c ^ 1) : c;
        m(x * 2 + flipped, x * 2 + c) = 1;
      }
    return m;
  }
  if (name == "COND_COPY") {
    // |c, i, a> -> |c, i, a ^ (c ? i : 0)> over (control, input, copies).
    if (arity < 3 || arity % 2 == 0)
      throw ValidationError("gate COND_COPY takes control + 2m qubits");
    const int m_bits = (arity - 1) / 2;
    const Index dm = Index{1} << m_bits;
    CMatrix m = CMatrix::Zero(dim, dim);
    for (Index c = 0; c < 2; ++c)
      for (Index i = 0; i < dm; ++i)
        for (Index a = 0; a < dm; ++a) {
          const Index a2 = c ? (a ^ i) : a;
          m((c * dm + i) * dm + a2, (c * dm + i) * dm + a) = 1;
        }
    return m;
  }
  throw ParseError("unknown gate name '" + name + "'");
}

namespace {

NodeKernel prepare_kernel(const GateOp& op) {
  return std::visit(
      [](const auto& g) -> NodeKernel {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, UnitaryGate>) {
          const int n = qubit_count(g.u.rows(), "unitary gate");
          require_register(n, "unitary gate");
          if ((g.u.adjoint() * g.u - CMatrix::Identity(g.u.rows(), g.u.rows()))
                  .cwiseAbs()
                  .maxCoeff() > tol::eig)
            throw ValidationError("Circuit: unitary gate matrix is not unitary");
          return NodeKernel{n, n, {g.u}};
        } else if constexpr (std::is_same_v<T, ChannelGate>) {
          return NodeKernel{g.op.n_in(), g.op.n_out(), g.op.kraus()};
        } else if constexpr (std::is_same_v<T, MeasureGate>) {
          // Direct Kraus assembly; a recorded wide measurement would overflow
          // the Choi route long before the register cap matters.
          require_register(g.record ? 2 * g.n_qubits : g.n_qubits, "measure gate");
          std::vector<int> all(g.n_qubits);
          for (int q = 0; q < g.n_qubits; ++q) all[q] = q;
          std::vector<CMatrix> ps = basis_measurement_projectors(g.n_qubits, all);
          if (!g.record) return NodeKernel{g.n_qubits, g.n_qubits, std::move(ps)};
          const Index d = Index{1} << g.n_qubits;
          std::vector<CMatrix> ks;
          for (std::size_t m = 0; m < ps.size(); ++m) {
            CMatrix k = CMatrix::Zero(d * d, d);
            for (Index a = 0; a < d; ++a)
              for (Index i = 0; i < d; ++i) k(a * d + static_cast<Index>(m), i) = ps[m](a, i);
            ks.push_back(std::move(k));
          }
          return NodeKernel{g.n_qubits, 2 * g.n_qubits, std::move(ks)};
        } else if constexpr (std::is_same_v<T, TraceOutGate>) {
          require_register(g.n_qubits, "trace-out gate");
          const Index d = Index{1} << g.n_qubits;
          std::vector<CMatrix> ks;
          for (Index x = 0; x < d; ++x) {
            CMatrix k = CMatrix::Zero(1, d);
            k(0, x) = 1.0;
            ks.push_back(std::move(k));
          }
          return NodeKernel{g.n_qubits, 0, std::move(ks)};
        } else {
          SuperOperator t = subroutine_gate(g.f);
          return NodeKernel{t.n_in(), t.n_out(), t.kraus()};
        }
      },
      op);
}

}  // namespace

Circuit Circuit::make(int n_wires_in, std::set<int> blank_inputs,
                      std::vector<int> result_outputs, std::vector<Node> nodes) {
  Circuit c;
  c.n_wires_in_ = n_wires_in;
  c.blank_inputs_ = std::move(blank_inputs);
  c.result_outputs_ = std::move(result_outputs);
  c.nodes_ = std::move(nodes);

  if (n_wires_in < 0) throw ValidationError("Circuit: negative wire count");
  for (int b : c.blank_inputs_)
    if (b < 0 || b >= n_wires_in) throw ValidationError("Circuit: blank input out of range");

  std::map<int, int> producer;  // wire -> node index (-1 for circuit inputs)
  std::map<int, int> consumer;  // wire -> node index
  for (int w = 0; w < n_wires_in; ++w) producer[w] = -1;

  std::set<int> ids;
  for (std::size_t idx = 0; idx < c.nodes_.size(); ++idx) {
    const Node& node = c.nodes_[idx];
    if (!ids.insert(node.id).second)
      throw ValidationError("Circuit: duplicate node id " + std::to_string(node.id));
    if (static_cast<int>(node.in_wires.size()) != gate_arity_in(node.op) ||
        static_cast<int>(node.out_wires.size()) != gate_arity_out(node.op))
      throw ValidationError("Circuit: node " + std::to_string(node.id) +
                            " arity does not match its gate order");
    std::set<int> seen;
    for (int w : node.in_wires)
      if (!seen.insert(w).second)
        throw ValidationError("Circuit: node consumes a wire twice");
    for (int w : node.out_wires) {
      if (!producer.emplace(w, static_cast<int>(idx)).second)
        throw ValidationError("Circuit: wire " + std::to_string(w) + " has two producers");
    }
    for (int w : node.in_wires)
      if (!consumer.emplace(w, static_cast<int>(idx)).second)
        throw ValidationError("Circuit: wire " + std::to_string(w) + " has two consumers");

    if (const auto* sub = std::get_if<SubroutineRef>(&node.op)) {
      for (int j = 0; j < sub->f.p_bits; ++j) {
        const int w = node.in_wires[sub->f.m_bits + j];
        if (!c.blank_inputs_.count(w))
          throw ValidationError("Circuit: subroutine output wire " + std::to_string(w) +
                                " must be a blank input");
      }
    }
  }
  for (const auto& [w, idx] : consumer)
    if (!producer.count(w))
      throw ValidationError("Circuit: wire " + std::to_string(w) + " has no producer");

  std::set<int> outputs;
  for (const auto& [w, p] : producer)
    if (!consumer.count(w)) outputs.insert(w);
  {
    std::set<int> seen;
    for (int w : c.result_outputs_) {
      if (!outputs.count(w))
        throw ValidationError("Circuit: result wire " + std::to_string(w) +
                              " is not a circuit output");
      if (!seen.insert(w).second) throw ValidationError("Circuit: duplicate result wire");
    }
  }

  // Cycle check and peak register size (blanks join lazily when first used).
  std::vector<int> order = topo_sort(c);
  std::map<int, std::size_t> index_of_id;
  for (std::size_t i = 0; i < c.nodes_.size(); ++i) index_of_id[c.nodes_[i].id] = i;
  int live = n_wires_in - static_cast<int>(c.blank_inputs_.size());
  std::set<int> joined;
  int peak = live;
  for (int id : order) {
    const Node& node = c.nodes_[index_of_id[id]];
    for (int w : node.in_wires)
      if (c.blank_inputs_.count(w) && joined.insert(w).second) ++live;
    peak = std::max(peak, live);
    const int delta = static_cast<int>(node.out_wires.size()) -
                      static_cast<int>(node.in_wires.size());
    live += delta;
    peak = std::max(peak, live);
  }
  peak = std::max(peak, live + static_cast<int>(c.blank_inputs_.size() - joined.size()));
  c.max_live_wires_ = peak;

  c.node_kernels_.reserve(c.nodes_.size());
  for (const Node& node : c.nodes_) c.node_kernels_.push_back(prepare_kernel(node.op));
  return c;
}

std::vector<int> Circuit::data_inputs() const {
  std::vector<int> out;
  for (int w = 0; w < n_wires_in_; ++w)
    if (!blank_inputs_.count(w)) out.push_back(w);
  return out;
}

std::vector<int> Circuit::output_wires() const {
  std::set<int> produced, consumed;
  for (int w = 0; w < n_wires_in_; ++w) produced.insert(w);
  for (const Node& node : nodes_) {
    for (int w : node.out_wires) produced.insert(w);
    for (int w : node.in_wires) consumed.insert(w);
  }
  std::vector<int> out;
  for (int w : produced)
    if (!consumed.count(w)) out.push_back(w);
  return out;
}

bool Circuit::unitary_only() const {
  for (const Node& node : nodes_)
    if (!std::holds_alternative<UnitaryGate>(node.op)) return false;
  return true;
}

const NodeKernel& Circuit::node_kernel(std::size_t node_index) const {
  return node_kernels_.at(node_index);
}

std::vector<int> topo_sort(const Circuit& c) {
  const auto& nodes = c.nodes();
  std::map<int, std::size_t> producer_of;  // wire -> node index
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (int w : nodes[i].out_wires) producer_of[w] = i;

  std::vector<int> indegree(nodes.size(), 0);
  std::vector<std::vector<std::size_t>> dependents(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (int w : nodes[i].in_wires) {
      auto it = producer_of.find(w);
      if (it != producer_of.end()) {
        ++indegree[i];
        dependents[it->second].push_back(i);
      }
    }

  std::priority_queue<std::pair<int, std::size_t>, std::vector<std::pair<int, std::size_t>>,
                      std::greater<>> ready;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (indegree[i] == 0) ready.emplace(nodes[i].id, i);

  std::vector<int> order;
  order.reserve(nodes.size());
  while (!ready.empty()) {
    auto [id, i] = ready.top();
    ready.pop();
    order.push_back(id);
    for (std::size_t dep : dependents[i])
      if (--indegree[dep] == 0) ready.emplace(nodes[dep].id, dep);
  }
  if (order.size() != nodes.size()) throw ValidationError("topo_sort: circuit has a cycle");
  return order;
}

namespace {

struct Register {
  CMatrix mat;             // 2^k square over `wires`
  std::vector<int> wires;  // kept ascending between nodes
};

std::vector<int> ascending_permutation(const std::vector<int>& wires) {
  std::vector<int> order(wires.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return wires[a] < wires[b]; });
  return order;
}

bool is_identity_perm(const std::vector<int>& p) {
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] != static_cast<int>(i)) return false;
  return true;
}

void permute_register(Register& reg, const std::vector<int>& new_to_old) {
  if (is_identity_perm(new_to_old)) return;
  reg.mat = permute_qubits(reg.mat, new_to_old);
  std::vector<int> wires(new_to_old.size());
  for (std::size_t i = 0; i < new_to_old.size(); ++i) wires[i] = reg.wires[new_to_old[i]];
  reg.wires = std::move(wires);
}

void sort_register(Register& reg) { permute_register(reg, ascending_permutation(reg.wires)); }

// Tensor |0...0><0...0| for blank wires that this node touches first.
void join_blanks(const Circuit& c, const std::vector<int>& needed, Register& reg) {
  std::vector<int> missing;
  for (int w : needed)
    if (std::find(reg.wires.begin(), reg.wires.end(), w) == reg.wires.end()) {
      if (!c.blank_inputs().count(w))
        throw ValidationError("evaluate: wire " + std::to_string(w) + " not live");
      missing.push_back(w);
    }
  if (missing.empty()) return;
  require_register(static_cast<int>(reg.wires.size() + missing.size()), "circuit register");
  const Index dm = Index{1} << missing.size();
  CMatrix blanks = CMatrix::Zero(dm, dm);
  blanks(0, 0) = 1;
  reg.mat = kron(reg.mat, blanks);
  for (int w : missing) reg.wires.push_back(w);
  sort_register(reg);
}

void run_node(const Circuit& c, std::size_t node_index, Register& reg) {
  const Node& node = c.nodes()[node_index];
  const NodeKernel& t = c.node_kernel(node_index);
  join_blanks(c, node.in_wires, reg);

  // Bring the consumed wires to the front, in the node's wire order.
  std::vector<int> new_to_old;
  new_to_old.reserve(reg.wires.size());
  for (int w : node.in_wires) {
    auto it = std::find(reg.wires.begin(), reg.wires.end(), w);
    if (it == reg.wires.end())
      throw ValidationError("evaluate: wire " + std::to_string(w) + " not live");
    new_to_old.push_back(static_cast<int>(it - reg.wires.begin()));
  }
  for (std::size_t i = 0; i < reg.wires.size(); ++i)
    if (std::find(node.in_wires.begin(), node.in_wires.end(), reg.wires[i]) ==
        node.in_wires.end())
      new_to_old.push_back(static_cast<int>(i));
  permute_register(reg, new_to_old);

  const int rest = static_cast<int>(reg.wires.size()) - t.n_in;
  require_register(t.n_out + rest, "circuit register");
  reg.mat = apply_on_prefix(t.kraus, reg.mat, rest);
  std::vector<int> wires = node.out_wires;
  wires.insert(wires.end(), reg.wires.begin() + t.n_in, reg.wires.end());
  reg.wires = std::move(wires);
  sort_register(reg);
}

Register run_circuit(const Circuit& c, const CMatrix& input, const std::vector<int>& node_order) {
  require_register(c.max_live_wires(), "circuit register");
  std::vector<int> data = c.data_inputs();
  const Index d_data = Index{1} << data.size();
  if (input.rows() != d_data || input.cols() != d_data)
    throw ValidationError("evaluate: input covers " + std::to_string(input.rows()) +
                          " dims, circuit has " + std::to_string(data.size()) +
                          " data input wires");
  Register reg{input, data};

  std::map<int, std::size_t> index_of_id;
  for (std::size_t i = 0; i < c.nodes().size(); ++i) index_of_id[c.nodes()[i].id] = i;
  if (node_order.size() != c.nodes().size())
    throw ValidationError("evaluate: node order size mismatch");
  for (int id : node_order) {
    auto it = index_of_id.find(id);
    if (it == index_of_id.end()) throw ValidationError("evaluate: unknown node id in order");
    run_node(c, it->second, reg);
  }
  // Dangling blank inputs are still part of the final state.
  join_blanks(c, c.output_wires(), reg);
  return reg;
}

}  // namespace

DensityMatrix evaluate(const Circuit& c, const DensityMatrix& rho_in) {
  return evaluate(c, rho_in, topo_sort(c));
}

DensityMatrix evaluate(const Circuit& c, const DensityMatrix& rho_in,
                       const std::vector<int>& node_order) {
  if (rho_in.n_qubits() != static_cast<int>(c.data_inputs().size()))
    throw ValidationError("evaluate: state has " + std::to_string(rho_in.n_qubits()) +
                          " qubits, circuit has " + std::to_string(c.data_inputs().size()) +
                          " data inputs");
  Register reg = run_circuit(c, rho_in.mat(), node_order);
  return DensityMatrix::make(std::move(reg.mat), Validate::repair);
}

ProbFunction computed_function(const Circuit& c) {
  const int m = static_cast<int>(c.data_inputs().size());
  if (m > 10) throw ResourceError("computed_function: 2^" + std::to_string(m) + " inputs");
  const int p = static_cast<int>(c.result_outputs().size());
  const std::vector<int> order = topo_sort(c);

  Eigen::MatrixXd table(Index{1} << m, Index{1} << p);
  for (Index i = 0; i < (Index{1} << m); ++i) {
    DensityMatrix final_state = evaluate(c, basis_state(m, i), order);
    if (p == 0) {
      table(i, 0) = 1.0;
      continue;
    }
    const std::vector<int> outs = c.output_wires();
    std::vector<int> sorted_results = c.result_outputs();
    std::sort(sorted_results.begin(), sorted_results.end());
    std::vector<int> positions;
    for (int w : sorted_results)
      positions.push_back(static_cast<int>(
          std::find(outs.begin(), outs.end(), w) - outs.begin()));
    DensityMatrix reduced =
        reduce(final_state, QubitIndexSet(static_cast<int>(outs.size()), positions));
    // Reorder to the declared result order.
    std::vector<int> new_to_old(p);
    for (int j = 0; j < p; ++j)
      new_to_old[j] = static_cast<int>(
          std::find(sorted_results.begin(), sorted_results.end(), c.result_outputs()[j]) -
          sorted_results.begin());
    CMatrix arranged = permute_qubits(reduced.mat(), new_to_old);
    RVector row = arranged.diagonal().real();
    table.row(i) = row.cwiseMax(0.0).transpose();
    table.row(i) /= table.row(i).sum();
  }
  return ProbFunction::make(m, p, std::move(table));
}

SuperOperator circuit_channel(const Circuit& c) {
  const int m = static_cast<int>(c.data_inputs().size());
  const Index d_in = Index{1} << m;
  const std::vector<int> order = topo_sort(c);
  const std::vector<int> outs = c.output_wires();
  const int n_out = static_cast<int>(outs.size());
  require_register(m + n_out, "circuit_channel Choi matrix");

  // Output order: result wires first in declared order, then the rest ascending.
  std::vector<int> out_order = c.result_outputs();
  for (int w : outs)
    if (std::find(out_order.begin(), out_order.end(), w) == out_order.end())
      out_order.push_back(w);
  std::vector<int> new_to_old(n_out);
  for (int q = 0; q < n_out; ++q)
    new_to_old[q] = static_cast<int>(
        std::find(outs.begin(), outs.end(), out_order[q]) - outs.begin());

  const Index d_out = Index{1} << n_out;
  CMatrix choi = CMatrix::Zero(d_in * d_out, d_in * d_out);
  for (Index i = 0; i < d_in; ++i)
    for (Index j = 0; j < d_in; ++j) {
      CMatrix e = CMatrix::Zero(d_in, d_in);
      e(i, j) = 1.0;
      Register reg = run_circuit(c, e, order);
      CMatrix arranged = permute_qubits(reg.mat, new_to_old);
      for (Index a = 0; a < d_out; ++a)
        for (Index b = 0; b < d_out; ++b) choi(a * d_in + i, b * d_in + j) = arranged(a, b);
    }
  return SuperOperator::from_choi(m, n_out, std::move(choi));
}

SuperOperator subroutine_gate(const ProbFunction& f) {
  const Index dm = f.rows(), dp = f.cols();
  const Index d = dm * dp;
  require_register(2 * (f.m_bits + f.p_bits), "subroutine_gate Choi matrix");
  CMatrix choi = CMatrix::Zero(d * d, d * d);
  for (Index i1 = 0; i1 < dm; ++i1)
    for (Index i2 = 0; i2 < dm; ++i2)
      for (Index y1 = 0; y1 < dp; ++y1)
        for (Index x1 = 0; x1 < dp; ++x1)
          for (Index y2 = 0; y2 < dp; ++y2)
            for (Index x2 = 0; x2 < dp; ++x2) {
              const Index j1 = y1 ^ x1, j2 = y2 ^ x2;
              double v;
              if (i1 == i2)
                v = (j1 == j2) ? f.table(i1, j1) : 0.0;
              else
                v = f.table(i1, j1) * f.table(i2, j2);
              if (v == 0.0) continue;
              const Index row = (i1 * dp + y1) * d + (i1 * dp + x1);
              const Index col = (i2 * dp + y2) * d + (i2 * dp + x2);
              choi(row, col) = v;
            }
  return SuperOperator::from_choi(f.m_bits + f.p_bits, f.m_bits + f.p_bits, std::move(choi));
}

SuperOperator subroutine_gate_bruteforce(const ProbFunction& f) {
  const Index dm = f.rows(), dp = f.cols();
  const Index d = dm * dp;
  if (f.p_bits * (Index{1} << f.m_bits) > 16)
    throw ResourceError("subroutine_gate_bruteforce: 2^(p*2^m) enumeration too large");
  require_register(2 * (f.m_bits + f.p_bits), "subroutine_gate Choi matrix");

  CMatrix choi = CMatrix::Zero(d * d, d * d);
  std::vector<Index> digits(dm, 0);  // d(i) for each input word
  while (true) {
    double pr = 1.0;
    for (Index i = 0; i < dm; ++i) pr *= f.table(i, digits[i]);
    if (pr > 0.0) {
      // U_d |i, x> = |i, x ^ d(i)>; vec(U_d) has d nonzero slots.
      std::vector<Index> slot(d);
      for (Index i = 0; i < dm; ++i)
        for (Index x = 0; x < dp; ++x) {
          const Index in = i * dp + x;
          const Index out = i * dp + (x ^ digits[i]);
          slot[in] = out * d + in;
        }
      for (Index a = 0; a < d; ++a)
        for (Index b = 0; b < d; ++b) choi(slot[a], slot[b]) += pr;
    }
    // Next deterministic function.
    Index pos = 0;
    while (pos < dm && ++digits[pos] == dp) digits[pos++] = 0;
    if (pos == dm) break;
  }
  return SuperOperator::from_choi(f.m_bits + f.p_bits, f.m_bits + f.p_bits, std::move(choi));
}

// ---------------------------------------------------------------------------
// Compilation
// ---------------------------------------------------------------------------

namespace {

Circuit rewrite_subroutines(const Circuit& host, bool strip_traceouts, bool require_unitary_rest,
                            int depth);

// Unitary-only equivalent of an impl circuit: inner subroutine nodes are
// compiled with their trace-outs deferred (kept as garbage wires).
Circuit unitarize_impl(const Circuit& impl, int depth) {
  if (depth > kMaxNesting) throw ValidationError("compile_subroutine: nesting too deep");
  bool has_sub = false;
  for (const Node& node : impl.nodes()) {
    if (std::holds_alternative<SubroutineRef>(node.op)) has_sub = true;
    else if (!std::holds_alternative<UnitaryGate>(node.op))
      throw ValidationError("compile_subroutine: impl is not unitary-only");
  }
  if (!has_sub) return impl;
  return rewrite_subroutines(impl, /*strip_traceouts=*/true, /*require_unitary_rest=*/true,
                             depth);
}

CompileResult compile_subroutine_impl(const SubroutineRef& s, int depth) {
  if (depth > kMaxNesting) throw ValidationError("compile_subroutine: nesting too deep");
  if (!s.impl) throw ValidationError("compile_subroutine: subroutine has no impl circuit");
  const int m = s.f.m_bits, p = s.f.p_bits;

  Circuit impl = unitarize_impl(*s.impl, depth);
  if (static_cast<int>(impl.data_inputs().size()) != m)
    throw ValidationError("compile_subroutine: impl has " +
                          std::to_string(impl.data_inputs().size()) + " data inputs, f takes " +
                          std::to_string(m) + " bits");
  if (static_cast<int>(impl.result_outputs().size()) != p)
    throw ValidationError("compile_subroutine: impl result register does not match f");
  {
    ProbFunction computed = computed_function(impl);
    for (Index i = 0; i < computed.rows(); ++i) {
      const double dist = (computed.table.row(i) - s.f.table.row(i)).cwiseAbs().sum();
      if (dist > 1e-6)
        throw ValidationError("compile_subroutine: impl computes a different function "
                              "(row t.v.d. " + std::to_string(dist) + ")");
    }
  }

  const int b = static_cast<int>(impl.blank_inputs().size());
  const int total = 3 * m + p + b + 1;
  if (total > max_qubits())
    throw ResourceError("compile_subroutine: needs " + std::to_string(total) +
                        " qubits (m=" + std::to_string(m) + ", r=" + std::to_string(p) +
                        ", impl blanks=" + std::to_string(b) + "), cap is " +
                        std::to_string(max_qubits()));

  // Register layout: [I(m) | J(p) | shadow S(m) | impl work B(b) | copies A(m) | control C].
  const int S0 = m + p, B0 = S0 + m, A0 = B0 + b, C = A0 + m;
  std::set<int> blanks;
  for (int w = m + p; w < total; ++w) blanks.insert(w);

  std::vector<Node> nodes;
  int next_wire = total, next_id = 0;
  std::vector<int> cur(total);
  for (int w = 0; w < total; ++w) cur[w] = w;

  auto emit = [&](GateOp op, const std::vector<int>& slots) {
    Node node;
    node.id = next_id++;
    node.op = std::move(op);
    for (int slot : slots) node.in_wires.push_back(cur[slot]);
    for (int slot : slots) node.out_wires.push_back(cur[slot] = next_wire++);
    nodes.push_back(std::move(node));
  };

  // Map impl wires to register slots: data inputs onto the shadow, blanks
  // onto the work register; unitary nodes keep slots positionally.
  std::map<int, int> slot_of;
  {
    int k = 0;
    for (int w : impl.data_inputs()) slot_of[w] = S0 + k++;
    k = 0;
    for (int w : impl.blank_inputs()) slot_of[w] = B0 + k++;
  }

  // The compute block U is the shadow copy followed by the impl on
  // shadow + work; both halves are uncomputed together later.
  std::vector<std::pair<UnitaryGate, std::vector<int>>> forward;
  for (int k = 0; k < m; ++k)
    forward.emplace_back(UnitaryGate{gate_matrix("CNOT", 2), "CNOT", 0.0, false},
                         std::vector<int>{k, S0 + k});
  std::vector<int> impl_order = topo_sort(impl);
  std::map<int, std::size_t> impl_index;
  for (std::size_t i = 0; i < impl.nodes().size(); ++i) impl_index[impl.nodes()[i].id] = i;
  for (int id : impl_order) {
    const Node& node = impl.nodes()[impl_index[id]];
    const auto& gate = std::get<UnitaryGate>(node.op);
    std::vector<int> slots;
    for (int w : node.in_wires) slots.push_back(slot_of.at(w));
    for (std::size_t t = 0; t < node.out_wires.size(); ++t)
      slot_of[node.out_wires[t]] = slots[t];
    forward.emplace_back(gate, slots);
  }

  // 1+2. Apply U.
  for (const auto& [gate, slots] : forward)
    emit(UnitaryGate{gate.u, gate.name, gate.theta, gate.dagger}, slots);

  // 3. Copy the result bits out.
  std::vector<int> result_slots;
  for (int w : impl.result_outputs()) result_slots.push_back(slot_of.at(w));
  for (int j = 0; j < p; ++j)
    emit(UnitaryGate{gate_matrix("CNOT", 2), "CNOT", 0.0, false}, {result_slots[j], m + j});

  // 4. Uncompute: the impl's gates reversed and daggered. The stored (name,
  // theta, dagger) triple always reconstructs u as gate_matrix(name, theta)
  // followed by an adjoint when dagger is set.
  for (auto it = forward.rbegin(); it != forward.rend(); ++it)
    emit(UnitaryGate{it->first.u.adjoint(), it->first.name, it->first.theta,
                     !it->first.dagger},
         it->second);

  // 5. Garbage detect on (shadow + work) -> control.
  std::vector<int> work_slots;
  for (int k = 0; k < m; ++k) work_slots.push_back(S0 + k);
  for (int k = 0; k < b; ++k) work_slots.push_back(B0 + k);
  {
    std::vector<int> slots = work_slots;
    slots.push_back(C);
    emit(UnitaryGate{gate_matrix("GARBAGE_DETECT", static_cast<int>(slots.size())),
                     "GARBAGE_DETECT", 0.0, false},
         slots);
  }

  // 6. Conditioned on control, copy the input register to the ancillas.
  {
    std::vector<int> slots{C};
    for (int k = 0; k < m; ++k) slots.push_back(k);
    for (int k = 0; k < m; ++k) slots.push_back(A0 + k);
    emit(UnitaryGate{gate_matrix("COND_COPY", 2 * m + 1), "COND_COPY", 0.0, false}, slots);
  }

  // 7. Discard work, control and copies.
  auto emit_traceout = [&](const std::vector<int>& slots) {
    Node node;
    node.id = next_id++;
    node.op = TraceOutGate{static_cast<int>(slots.size())};
    for (int slot : slots) node.in_wires.push_back(cur[slot]);
    nodes.push_back(std::move(node));
  };
  emit_traceout(work_slots);
  emit_traceout({C});
  {
    std::vector<int> a_slots;
    for (int k = 0; k < m; ++k) a_slots.push_back(A0 + k);
    emit_traceout(a_slots);
  }

  std::vector<int> results;
  for (int k = 0; k < m; ++k) results.push_back(cur[k]);
  for (int j = 0; j < p; ++j) results.push_back(cur[m + j]);

  CompileResult out{Circuit::make(total, std::move(blanks), std::move(results),
                                  std::move(nodes)),
                    {}};
  const int w = m + b;
  out.stats.register_qubits = total;
  out.stats.impl_gates = static_cast<int>(forward.size()) - m;
  out.stats.shadow_cnots = m;
  out.stats.result_cnots = p;
  out.stats.detect_arity = w + 1;
  out.stats.detect_decomposed = 3 * w + 1;
  out.stats.cond_copy_decomposed = m;
  out.stats.total_decomposed = 2 * (out.stats.impl_gates + m) + p +
                               out.stats.detect_decomposed + out.stats.cond_copy_decomposed;
  out.stats.choi_residual =
      trace_norm(circuit_channel(out.circuit).choi() - subroutine_gate(s.f).choi());
  if (out.stats.choi_residual > 1e-9)
    throw ValidationError("compile_subroutine: compiled channel residual " +
                          std::to_string(out.stats.choi_residual) + " exceeds 1e-9");
  return out;
}

Circuit rewrite_subroutines(const Circuit& host, bool strip_traceouts, bool require_unitary_rest,
                            int depth) {
  // Compile every subroutine node first so the appended blank count is known.
  std::map<int, Circuit> replacements;  // host node id -> compiled circuit
  for (const Node& node : host.nodes()) {
    if (const auto* sub = std::get_if<SubroutineRef>(&node.op))
      replacements.emplace(node.id, compile_subroutine_impl(*sub, depth + 1).circuit);
    else if (require_unitary_rest && !std::holds_alternative<UnitaryGate>(node.op))
      throw ValidationError("compile_subroutine: impl is not unitary-only");
  }

  int extra_blanks = 0;
  for (const auto& [id, rep] : replacements)
    extra_blanks += static_cast<int>(rep.blank_inputs().size());

  const int n_in = host.n_wires_in() + extra_blanks;
  std::set<int> blanks = host.blank_inputs();
  int next_blank = host.n_wires_in();
  for (int w = next_blank; w < n_in; ++w) blanks.insert(w);

  std::map<int, int> wire_map;  // host wire -> new wire
  for (int w = 0; w < host.n_wires_in(); ++w) wire_map[w] = w;
  int next_wire = n_in, next_id = 0;
  std::vector<Node> nodes;

  std::map<int, std::size_t> host_index;
  for (std::size_t i = 0; i < host.nodes().size(); ++i) host_index[host.nodes()[i].id] = i;
  for (int id : topo_sort(host)) {
    const Node& node = host.nodes()[host_index[id]];
    auto rep_it = replacements.find(node.id);
    if (rep_it == replacements.end()) {
      Node copy;
      copy.id = next_id++;
      copy.op = node.op;
      for (int w : node.in_wires) copy.in_wires.push_back(wire_map.at(w));
      for (int w : node.out_wires) copy.out_wires.push_back(wire_map[w] = next_wire++);
      nodes.push_back(std::move(copy));
      continue;
    }
    const Circuit& rep = rep_it->second;
    std::map<int, int> rep_map;  // rep wire -> new wire
    {
      int t = 0;
      for (int w = 0; w < rep.n_wires_in(); ++w) {
        if (rep.blank_inputs().count(w)) rep_map[w] = next_blank++;
        else rep_map[w] = wire_map.at(node.in_wires[t++]);
      }
    }
    std::map<int, std::size_t> rep_index;
    for (std::size_t i = 0; i < rep.nodes().size(); ++i) rep_index[rep.nodes()[i].id] = i;
    for (int rid : topo_sort(rep)) {
      const Node& rnode = rep.nodes()[rep_index[rid]];
      if (strip_traceouts && std::holds_alternative<TraceOutGate>(rnode.op)) continue;
      Node copy;
      copy.id = next_id++;
      copy.op = rnode.op;
      for (int w : rnode.in_wires) copy.in_wires.push_back(rep_map.at(w));
      for (int w : rnode.out_wires) copy.out_wires.push_back(rep_map[w] = next_wire++);
      nodes.push_back(std::move(copy));
    }
    for (std::size_t t = 0; t < node.out_wires.size(); ++t)
      wire_map[node.out_wires[t]] = rep_map.at(rep.result_outputs()[t]);
  }

  std::vector<int> results;
  for (int w : host.result_outputs()) results.push_back(wire_map.at(w));
  return Circuit::make(n_in, std::move(blanks), std::move(results), std::move(nodes));
}

}  // namespace

CompileResult compile_subroutine(const SubroutineRef& s) { return compile_subroutine_impl(s, 0); }

Circuit inline_subroutines(const Circuit& c, InlineMode mode) {
  if (mode == InlineMode::compiled)
    return rewrite_subroutines(c, /*strip_traceouts=*/false, /*require_unitary_rest=*/false, 0);
  std::vector<Node> nodes = c.nodes();
  for (Node& node : nodes)
    if (const auto* sub = std::get_if<SubroutineRef>(&node.op))
      node.op = ChannelGate{subroutine_gate(sub->f)};
  return Circuit::make(c.n_wires_in(), c.blank_inputs(), c.result_outputs(), std::move(nodes));
}

namespace {

Circuit ghz_circuit(int r, bool tree) {
  if (r < 1) throw ValidationError("ghz circuit: need at least one qubit");
  require_register(r, "ghz circuit");
  std::set<int> blanks;
  for (int w = 0; w < r; ++w) blanks.insert(w);
  std::vector<Node> nodes;
  std::vector<int> cur(r);
  for (int w = 0; w < r; ++w) cur[w] = w;
  int next_wire = r, next_id = 0;
  auto emit = [&](const std::string& name, const std::vector<int>& lines) {
    Node node;
    node.id = next_id++;
    node.op = UnitaryGate{gate_matrix(name, static_cast<int>(lines.size())), name, 0.0, false};
    for (int l : lines) node.in_wires.push_back(cur[l]);
    for (int l : lines) node.out_wires.push_back(cur[l] = next_wire++);
    nodes.push_back(std::move(node));
  };
  emit("H", {0});
  if (tree) {
    int have = 1;
    while (have < r) {
      const int add = std::min(have, r - have);
      for (int k = 0; k < add; ++k) emit("CNOT", {k, have + k});
      have += add;
    }
  } else {
    for (int k = 0; k + 1 < r; ++k) emit("CNOT", {k, k + 1});
  }
  std::vector<int> results(cur.begin(), cur.end());
  return Circuit::make(r, std::move(blanks), std::move(results), std::move(nodes));
}

}  // namespace

Circuit ghz_fanout_circuit(int r) { return ghz_circuit(r, true); }
Circuit ghz_chain_circuit(int r) { return ghz_circuit(r, false); }

}  // namespace qmix
