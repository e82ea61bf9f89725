#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "qmix/channels.hpp"

namespace qmix {

class Circuit;

/// Row-stochastic table f[i][j]: for input word i, the probability of output
/// word j. Words are indexed most-significant bit first, like basis states.
struct ProbFunction {
  int m_bits = 0;
  int p_bits = 0;
  Eigen::MatrixXd table;  // 2^m x 2^p, rows sum to 1

  static ProbFunction make(int m_bits, int p_bits, Eigen::MatrixXd table);
  Index rows() const { return table.rows(); }
  Index cols() const { return table.cols(); }
};

/// A probabilistic function used as a gate, optionally with a unitary circuit
/// that computes it (consumed by the compiler).
struct SubroutineRef {
  ProbFunction f;
  std::shared_ptr<const Circuit> impl;
};

struct UnitaryGate {
  CMatrix u;
  std::string name;  // optional: I,X,Y,Z,H,CNOT,TOFFOLI,PHASE,GARBAGE_DETECT,COND_COPY
  double theta = 0.0;
  bool dagger = false;
};

struct ChannelGate {
  SuperOperator op;
};

/// Computational-basis measurement of the node's qubits; with record, the
/// outcome register (same width) is appended after the state qubits.
struct MeasureGate {
  int n_qubits = 0;
  bool record = true;
};

struct TraceOutGate {
  int n_qubits = 0;
};

using GateOp = std::variant<UnitaryGate, ChannelGate, MeasureGate, TraceOutGate, SubroutineRef>;

int gate_arity_in(const GateOp& op);
int gate_arity_out(const GateOp& op);

/// Matrix of a named standard gate. Arity is the qubit count of the node
/// (fixed for most names; GARBAGE_DETECT and COND_COPY are sized by it).
CMatrix gate_matrix(const std::string& name, int arity, double theta = 0.0);

struct Node {
  int id = 0;
  GateOp op;
  std::vector<int> in_wires;
  std::vector<int> out_wires;
};

/// Kraus form of a node's action. Kept instead of a full SuperOperator so
/// wide local gates (composite detect/copy unitaries, multi-qubit measures)
/// never materialize a Choi matrix.
struct NodeKernel {
  int n_in = 0;
  int n_out = 0;
  std::vector<CMatrix> kraus;
};

/// A DAG of gates over wires. Every wire has exactly one producer and one
/// consumer, counting circuit inputs as producers and circuit outputs as
/// consumers. A subset of the inputs is blank (initialized to |0>); an
/// ordered subset of the outputs is the result register.
///
/// Subroutine nodes consume m+p wires; the trailing p wires must be blank
/// circuit inputs (the subroutine gate is defined on |i,0> inputs; feeding
/// anything else is rejected at validation).
class Circuit {
 public:
  static Circuit make(int n_wires_in, std::set<int> blank_inputs,
                      std::vector<int> result_outputs, std::vector<Node> nodes);

  int n_wires_in() const { return n_wires_in_; }
  const std::set<int>& blank_inputs() const { return blank_inputs_; }
  const std::vector<int>& result_outputs() const { return result_outputs_; }
  const std::vector<Node>& nodes() const { return nodes_; }

  std::vector<int> data_inputs() const;   // non-blank input wires, ascending
  std::vector<int> output_wires() const;  // unconsumed wires, ascending
  int max_live_wires() const { return max_live_wires_; }
  bool unitary_only() const;
  const NodeKernel& node_kernel(std::size_t node_index) const;

 private:
  Circuit() = default;
  int n_wires_in_ = 0;
  std::set<int> blank_inputs_;
  std::vector<int> result_outputs_;
  std::vector<Node> nodes_;
  std::vector<NodeKernel> node_kernels_;  // prepared at make(); immutable
  int max_live_wires_ = 0;
};

/// Node ids in execution order; deterministic under the node-id tiebreak
/// (Kahn's algorithm with a min-id ready queue). Throws on cycles.
std::vector<int> topo_sort(const Circuit& c);

/// Final density matrix: gates applied in topological order, each extended to
/// the full register. rho_in covers the non-blank inputs in ascending wire
/// order; blanks start as |0>. The returned state's qubits are the surviving
/// wires in ascending id order (see output_wires()).
DensityMatrix evaluate(const Circuit& c, const DensityMatrix& rho_in);
DensityMatrix evaluate(const Circuit& c, const DensityMatrix& rho_in,
                       const std::vector<int>& node_order);

/// The probabilistic function the circuit computes: row i is the diagonal of
/// the final state reduced to the result wires (in declared order) for the
/// basis input |i> on the data inputs.
ProbFunction computed_function(const Circuit& c);

/// Total super-operator of the circuit: data inputs (ascending) to outputs,
/// result wires first (declared order) then other surviving wires ascending.
SuperOperator circuit_channel(const Circuit& c);

/// Subroutine gate per the compact form: the channel on m+p qubits assembled
/// directly from products of table entries, with deterministic maps extended
/// reversibly as |i,x> -> |i, x xor d(i)>.
SuperOperator subroutine_gate(const ProbFunction& f);

/// Same channel by explicit enumeration of all 2^(p 2^m) deterministic
/// functions (guarded at 2^16), each applied with probability prod_i f[i][d(i)].
SuperOperator subroutine_gate_bruteforce(const ProbFunction& f);

struct CompileStats {
  int register_qubits = 0;
  int impl_gates = 0;       // k: gates of the (unitarized) impl, applied twice
  int shadow_cnots = 0;     // input copy to the shadow register
  int result_cnots = 0;     // result copy
  int detect_arity = 0;     // garbage-detect acts on work + control
  int detect_decomposed = 0;  // O(|work|) two/three-qubit gate estimate
  int cond_copy_decomposed = 0;  // m Toffolis
  int total_decomposed = 0;
  double choi_residual = 0.0;  // trace-norm distance to subroutine_gate(f)
};

struct CompileResult {
  Circuit circuit;
  CompileStats stats;
};

/// Garbage-controlled compilation of a subroutine into a circuit over the
/// gates of the impl, their adjoints, CNOT copies, one garbage-detect gate,
/// one conditional-input-copy gate, and trace-outs. The compiled circuit
/// takes m+p data inputs [I, J] and its channel equals subroutine_gate(f)
/// within 1e-9 (verified at compile time).
///
/// The impl must be unitary-only; subroutine nodes inside it are first
/// compiled recursively with their trace-outs deferred (kept as garbage).
/// Because an arbitrary unitary impl need not preserve its input register,
/// the compiler copies the input to a shadow register and runs the impl on
/// the shadow, which restores the structural assumption the construction
/// needs.
CompileResult compile_subroutine(const SubroutineRef& s);

enum class InlineMode { semantic, compiled };

/// Replace every subroutine node: semantic mode swaps in the subroutine_gate
/// channel; compiled mode splices the compiled circuit (its ancilla blanks
/// are appended as new blank inputs at the high end of the register).
Circuit inline_subroutines(const Circuit& c, InlineMode mode);

/// GHZ preparation on r blank qubits: H then a CNOT fan-out tree (depth
/// 1 + ceil(log2 r)) or a linear chain (depth r). All wires are results.
Circuit ghz_fanout_circuit(int r);
Circuit ghz_chain_circuit(int r);

}  // namespace qmix
