#include <gtest/gtest.h>

#include <memory>

#include "qmix/circuits.hpp"
#include "test_util.hpp"

using namespace qmix;
using qtest::max_abs;

namespace {

ProbFunction table_1x1(double f00, double f10) {
  Eigen::MatrixXd t(2, 2);
  t << f00, 1 - f00, f10, 1 - f10;
  return ProbFunction::make(1, 1, t);
}

ProbFunction fair_coin() { return table_1x1(0.5, 0.5); }

ProbFunction random_table(int m, int p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  Eigen::MatrixXd t(Index{1} << m, Index{1} << p);
  for (Index i = 0; i < t.rows(); ++i) {
    double sum = 0;
    for (Index j = 0; j < t.cols(); ++j) sum += (t(i, j) = unif(rng));
    t.row(i) /= sum;
  }
  return ProbFunction::make(m, p, std::move(t));
}

// Fair-coin impl: wire 0 carries the input, wire 1 (blank) gets an H.
std::shared_ptr<const Circuit> fair_coin_impl() {
  std::vector<Node> nodes;
  Node h;
  h.id = 0;
  h.op = UnitaryGate{gate_matrix("H", 1), "H", 0.0, false};
  h.in_wires = {1};
  h.out_wires = {2};
  nodes.push_back(h);
  return std::make_shared<const Circuit>(Circuit::make(2, {1}, {2}, std::move(nodes)));
}

// Biased m=2, r=1 impl: one 3-qubit controlled-rotation unitary writing
// outcome probabilities q[i] onto the blank third qubit.
std::shared_ptr<const Circuit> biased_impl(const std::array<double, 4>& q) {
  CMatrix u = CMatrix::Zero(8, 8);
  for (Index i = 0; i < 4; ++i) {
    const double c = std::sqrt(1.0 - q[i]), s = std::sqrt(q[i]);
    u(2 * i, 2 * i) = c;
    u(2 * i + 1, 2 * i) = s;
    u(2 * i, 2 * i + 1) = -s;
    u(2 * i + 1, 2 * i + 1) = c;
  }
  std::vector<Node> nodes;
  Node g;
  g.id = 0;
  g.op = UnitaryGate{u, "", 0.0, false};
  g.in_wires = {0, 1, 2};
  g.out_wires = {3, 4, 5};
  nodes.push_back(g);
  return std::make_shared<const Circuit>(Circuit::make(3, {2}, {5}, std::move(nodes)));
}

ProbFunction biased_table(const std::array<double, 4>& q) {
  Eigen::MatrixXd t(4, 2);
  for (int i = 0; i < 4; ++i) {
    t(i, 0) = 1.0 - q[i];
    t(i, 1) = q[i];
  }
  return ProbFunction::make(2, 1, std::move(t));
}

TEST(BruteForce, DeterministicTableIsUnitaryChannel) {
  // f = the NOT permutation: single deterministic summand with Pr = 1.
  ProbFunction f = table_1x1(0.0, 1.0);
  SuperOperator g = subroutine_gate_bruteforce(f);
  EXPECT_EQ(kraus_decompose(g).size(), 1u);
  // On |i, 0> it writes i xor 1 to the output wire.
  EXPECT_MATRIX_NEAR(apply_matrix(g, basis_state("00").mat()), basis_state("01").mat(), 1e-12);
  EXPECT_MATRIX_NEAR(apply_matrix(g, basis_state("10").mat()), basis_state("10").mat(), 1e-12);
}

TEST(BruteForce, FairCoinEnumeratesFourMaps) {
  // m=p=1 fair coin: 4 deterministic functions, each with Pr = 1/4; by hand,
  // g(|0,0><1,0|) = (1/4) sum_{j1,j2} |0,j1><1,j2|.
  SuperOperator g = subroutine_gate_bruteforce(fair_coin());
  CMatrix e = CMatrix::Zero(4, 4);
  e(0, 2) = 1.0;  // |0,0><1,0|
  CMatrix got = apply_matrix(g, e);
  for (Index j1 = 0; j1 < 2; ++j1)
    for (Index j2 = 0; j2 < 2; ++j2)
      EXPECT_NEAR(std::abs(got(j1, 2 + j2) - 0.25), 0.0, 1e-12);
}

TEST(BruteForce, ProbabilitiesSumToOne) {
  // Tr of the Choi equals d_in iff the enumerated weights sum to one.
  std::mt19937_64 rng(51);
  ProbFunction f = random_table(2, 1, rng);
  SuperOperator g = subroutine_gate_bruteforce(f);
  EXPECT_NEAR(g.choi().trace().real(), 8.0, 1e-9);
}

TEST(BruteForce, EnumerationGuard) {
  std::mt19937_64 rng(52);
  ProbFunction f = random_table(3, 3, rng);
  EXPECT_THROW(subroutine_gate_bruteforce(f), ResourceError);
}

TEST(SubroutineGate, DiagonalActionMatchesTable) {
  std::mt19937_64 rng(53);
  ProbFunction f = random_table(2, 1, rng);
  SuperOperator g = subroutine_gate(f);
  for (Index i = 0; i < 4; ++i) {
    DensityMatrix in = basis_state(3, i << 1);  // |i, 0>
    RVector out = diagonal_distribution(apply(g, in));
    for (Index j = 0; j < 2; ++j) EXPECT_NEAR(out(2 * i + j), f.table(i, j), 1e-12);
  }
}

TEST(SubroutineGate, CrossBlockProducts) {
  // f[0] = (1/2, 1/2), f[1] = (1, 0):
  // g(|0,0><1,0|) = 1/2 |0,0><1,0| + 1/2 |0,1><1,0|.
  SuperOperator g = subroutine_gate(table_1x1(0.5, 1.0));
  CMatrix e = CMatrix::Zero(4, 4);
  e(0, 2) = 1.0;
  CMatrix got = apply_matrix(g, e);
  CMatrix want = CMatrix::Zero(4, 4);
  want(0, 2) = 0.5;
  want(1, 2) = 0.5;
  EXPECT_MATRIX_NEAR(got, want, 1e-12);
}

TEST(SubroutineGate, FairCoinCrossBlockMagnitudes) {
  SuperOperator g = subroutine_gate(fair_coin());
  CMatrix e = CMatrix::Zero(4, 4);
  e(0, 2) = 1.0;
  CMatrix got = apply_matrix(g, e);
  int quarter_entries = 0;
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 4; ++c)
      if (std::abs(got(r, c)) > 1e-14) {
        EXPECT_NEAR(std::abs(got(r, c)), 0.25, 1e-12);
        ++quarter_entries;
      }
  EXPECT_EQ(quarter_entries, 4);
}

TEST(SubroutineGate, MatchesBruteForce) {
  std::mt19937_64 rng(54);
  struct Shape {
    int m, p;
  };
  for (Shape s : {Shape{1, 1}, Shape{1, 2}, Shape{2, 1}}) {
    for (int rep = 0; rep < 5; ++rep) {
      ProbFunction f = random_table(s.m, s.p, rng);
      SuperOperator compact = subroutine_gate(f);
      SuperOperator brute = subroutine_gate_bruteforce(f);
      EXPECT_LE(trace_norm(compact.choi() - brute.choi()), 1e-12);
    }
  }
}

TEST(SubroutineGate, ClassicalInputsReproduceTableExactly) {
  std::mt19937_64 rng(55);
  ProbFunction f = random_table(1, 2, rng);
  SuperOperator g = subroutine_gate(f);
  for (Index i = 0; i < 2; ++i) {
    DensityMatrix in = basis_state(3, i << 2);
    DensityMatrix out = apply(g, in);
    DensityMatrix result_reg = reduce(out, QubitIndexSet(3, {1, 2}));
    RVector dist = diagonal_distribution(result_reg);
    for (Index j = 0; j < 4; ++j) EXPECT_NEAR(dist(j), f.table(i, j), 1e-12);
  }
}

TEST(Compile, DeterministicSubroutineIsComputeCopyUncompute) {
  // Deterministic NOT: impl is an X on the shadow of the input... here the
  // impl computes j = i via a CNOT onto the blank result wire.
  std::vector<Node> nodes;
  Node cn;
  cn.id = 0;
  cn.op = UnitaryGate{gate_matrix("CNOT", 2), "CNOT", 0.0, false};
  cn.in_wires = {0, 1};
  cn.out_wires = {2, 3};
  nodes.push_back(cn);
  auto impl = std::make_shared<const Circuit>(Circuit::make(2, {1}, {3}, std::move(nodes)));
  Eigen::MatrixXd t(2, 2);
  t << 1, 0, 0, 1;
  SubroutineRef s{ProbFunction::make(1, 1, t), impl};
  CompileResult res = compile_subroutine(s);
  EXPECT_LE(res.stats.choi_residual, 1e-9);
  // No garbage branch fires: |i,0> -> |i,i> exactly.
  SuperOperator t_c = circuit_channel(res.circuit);
  EXPECT_MATRIX_NEAR(apply_matrix(t_c, basis_state("10").mat()), basis_state("11").mat(), 1e-9);
}

TEST(Compile, FairCoin) {
  SubroutineRef s{fair_coin(), fair_coin_impl()};
  CompileResult res = compile_subroutine(s);
  EXPECT_LE(res.stats.choi_residual, 1e-9);
  EXPECT_LE(trace_norm(circuit_channel(res.circuit).choi() - subroutine_gate(s.f).choi()), 1e-9);
  EXPECT_EQ(res.stats.register_qubits, 6);  // 3m + p + b + 1 = 3+1+1+1
  EXPECT_EQ(res.stats.impl_gates, 1);
}

TEST(Compile, BiasedTwoBitSubroutine) {
  const std::array<double, 4> q{0.1, 0.35, 0.6, 0.95};
  SubroutineRef s{biased_table(q), biased_impl(q)};
  CompileResult res = compile_subroutine(s);
  EXPECT_LE(res.stats.choi_residual, 1e-9);
  EXPECT_EQ(res.stats.register_qubits, 9);  // 3*2 + 1 + 1 + 1
}

TEST(Compile, Errors) {
  SubroutineRef no_impl{fair_coin(), nullptr};
  EXPECT_THROW(compile_subroutine(no_impl), ValidationError);

  // Non-unitary impl: a measure node.
  std::vector<Node> nodes;
  Node h;
  h.id = 0;
  h.op = UnitaryGate{gate_matrix("H", 1), "H", 0.0, false};
  h.in_wires = {1};
  h.out_wires = {2};
  nodes.push_back(h);
  Node m;
  m.id = 1;
  m.op = MeasureGate{1, false};
  m.in_wires = {2};
  m.out_wires = {3};
  nodes.push_back(m);
  auto measured =
      std::make_shared<const Circuit>(Circuit::make(2, {1}, {3}, std::move(nodes)));
  EXPECT_THROW(compile_subroutine(SubroutineRef{fair_coin(), measured}),
               ValidationError);

  // Function mismatch: impl computes the fair coin, table says NOT.
  SubroutineRef wrong{table_1x1(0.0, 1.0), fair_coin_impl()};
  EXPECT_THROW(compile_subroutine(wrong), ValidationError);
}

Circuit one_subroutine_circuit(const SubroutineRef& s) {
  // X on the input, then the subroutine on (input, blank).
  std::vector<Node> nodes;
  Node x;
  x.id = 0;
  x.op = UnitaryGate{gate_matrix("X", 1), "X", 0.0, false};
  x.in_wires = {0};
  x.out_wires = {2};
  nodes.push_back(x);
  Node sub;
  sub.id = 1;
  sub.op = s;
  sub.in_wires = {2, 1};
  sub.out_wires = {3, 4};
  nodes.push_back(sub);
  return Circuit::make(2, {1}, {3, 4}, std::move(nodes));
}

TEST(Inline, NoSubroutinesUnchanged) {
  Circuit c = ghz_fanout_circuit(2);
  Circuit inlined = inline_subroutines(c, InlineMode::compiled);
  EXPECT_EQ(inlined.nodes().size(), c.nodes().size());
  EXPECT_LE((computed_function(inlined).table - computed_function(c).table)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(Inline, SemanticAndCompiledAgree) {
  SubroutineRef s{fair_coin(), fair_coin_impl()};
  Circuit c = one_subroutine_circuit(s);
  ProbFunction sem = computed_function(inline_subroutines(c, InlineMode::semantic));
  ProbFunction com = computed_function(inline_subroutines(c, InlineMode::compiled));
  for (Index i = 0; i < sem.rows(); ++i)
    EXPECT_LE((sem.table.row(i) - com.table.row(i)).cwiseAbs().sum(), 1e-7);
  // Semantic inlining also agrees with direct evaluation of the subroutine node.
  ProbFunction direct = computed_function(c);
  EXPECT_LE((sem.table - direct.table).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Inline, NestedSubroutines) {
  // Outer subroutine whose impl contains the fair-coin subroutine: the result
  // is a fair coin regardless of input.
  SubroutineRef inner{fair_coin(), fair_coin_impl()};
  std::vector<Node> impl_nodes;
  Node sub;
  sub.id = 0;
  sub.op = inner;
  sub.in_wires = {0, 1};
  sub.out_wires = {2, 3};
  impl_nodes.push_back(sub);
  auto outer_impl =
      std::make_shared<const Circuit>(Circuit::make(2, {1}, {3}, std::move(impl_nodes)));
  SubroutineRef outer{fair_coin(), outer_impl};

  CompileResult res = compile_subroutine(outer);
  EXPECT_LE(res.stats.choi_residual, 1e-9);

  Circuit c = one_subroutine_circuit(outer);
  ProbFunction sem = computed_function(inline_subroutines(c, InlineMode::semantic));
  ProbFunction com = computed_function(inline_subroutines(c, InlineMode::compiled));
  for (Index i = 0; i < sem.rows(); ++i)
    EXPECT_LE((sem.table.row(i) - com.table.row(i)).cwiseAbs().sum(), 1e-7);
}

TEST(SubroutineNode, OutputWiresMustBeBlank) {
  SubroutineRef s{fair_coin(), nullptr};
  std::vector<Node> nodes;
  Node sub;
  sub.id = 0;
  sub.op = s;
  sub.in_wires = {0, 1};
  sub.out_wires = {2, 3};
  nodes.push_back(sub);
  // Wire 1 is a data input, not blank: rejected.
  EXPECT_THROW(Circuit::make(2, {}, {2, 3}, std::move(nodes)), ValidationError);
}

}  // namespace
