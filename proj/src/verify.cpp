#include "qmix/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <queue>

namespace qmix {

namespace {

struct SuiteBuilder {
  SuiteReport report;
  std::optional<double> override_threshold;

  void add(const std::string& name, double residual, double threshold) {
    PropertyResult r;
    r.name = name;
    r.residual = residual;
    r.threshold = override_threshold.value_or(threshold);
    r.pass = residual <= r.threshold;
    report.all_pass = report.all_pass && r.pass;
    report.results.push_back(std::move(r));
  }
};

ProbFunction random_table(int m, int p, Rng& rng) {
  Eigen::MatrixXd t(Index{1} << m, Index{1} << p);
  for (Index i = 0; i < t.rows(); ++i) {
    double sum = 0;
    for (Index j = 0; j < t.cols(); ++j) sum += (t(i, j) = 0.05 + rng.uniform());
    t.row(i) /= sum;
  }
  return ProbFunction::make(m, p, std::move(t));
}

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

ProbFunction fair_coin_table() {
  Eigen::MatrixXd t(2, 2);
  t << 0.5, 0.5, 0.5, 0.5;
  return ProbFunction::make(1, 1, std::move(t));
}

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

Circuit circuit_with_subroutine(const SubroutineRef& s) {
  const int m = s.f.m_bits, p = s.f.p_bits;
  std::vector<Node> nodes;
  int next_wire = m + p, next_id = 0;
  std::vector<int> sub_in;
  for (int k = 0; k < m; ++k) {
    Node h;
    h.id = next_id++;
    h.op = UnitaryGate{gate_matrix("H", 1), "H", 0.0, false};
    h.in_wires = {k};
    h.out_wires = {next_wire};
    nodes.push_back(std::move(h));
    sub_in.push_back(next_wire++);
  }
  std::set<int> blanks;
  for (int k = 0; k < p; ++k) {
    blanks.insert(m + k);
    sub_in.push_back(m + k);
  }
  Node sub;
  sub.id = next_id++;
  sub.op = s;
  sub.in_wires = sub_in;
  for (int k = 0; k < m + p; ++k) sub.out_wires.push_back(next_wire++);
  std::vector<int> results = sub.out_wires;
  nodes.push_back(std::move(sub));
  return Circuit::make(m + p, std::move(blanks), std::move(results), std::move(nodes));
}

double max_function_gap(const ProbFunction& a, const ProbFunction& b) {
  return function_distance(a, b).max;
}

}  // namespace

Circuit random_circuit(Rng& rng, int n_wires, int n_gates, bool unitary_only) {
  std::vector<Node> nodes;
  std::vector<int> cur(n_wires);
  for (int w = 0; w < n_wires; ++w) cur[w] = w;
  int next_wire = n_wires, next_id = 0;
  for (int g = 0; g < n_gates; ++g) {
    const int a = static_cast<int>(rng.next_u64() % n_wires);
    int b = static_cast<int>(rng.next_u64() % n_wires);
    const double kind = rng.uniform();
    Node node;
    node.id = next_id++;
    if (!unitary_only && kind < 0.25) {
      node.op = ChannelGate{random_cptp(1, 1, rng.next_u64())};
      node.in_wires = {cur[a]};
      node.out_wires = {cur[a] = next_wire++};
    } else if (kind < 0.55 || a == b) {
      const char* names[] = {"H", "X", "Z", "PHASE"};
      const std::string name = names[rng.next_u64() % 4];
      const double theta = (name == "PHASE") ? 2.0 * M_PI * rng.uniform() : 0.0;
      node.op = UnitaryGate{gate_matrix(name, 1, theta), name, theta, false};
      node.in_wires = {cur[a]};
      node.out_wires = {cur[a] = next_wire++};
    } else {
      node.op = UnitaryGate{gate_matrix("CNOT", 2), "CNOT", 0.0, false};
      node.in_wires = {cur[a], cur[b]};
      node.out_wires = {cur[a] = next_wire++, cur[b] = next_wire++};
    }
    nodes.push_back(std::move(node));
  }
  std::vector<int> results(cur.begin(), cur.end());
  return Circuit::make(n_wires, {}, std::move(results), std::move(nodes));
}

std::vector<int> topo_sort_max_tiebreak(const Circuit& c) {
  const auto& nodes = c.nodes();
  std::map<int, std::size_t> producer_of;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (int w : nodes[i].out_wires) producer_of[w] = i;
  std::vector<int> indegree(nodes.size(), 0);
  std::vector<std::vector<std::size_t>> dependents(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (int w : nodes[i].in_wires)
      if (auto it = producer_of.find(w); it != producer_of.end()) {
        ++indegree[i];
        dependents[it->second].push_back(i);
      }
  std::priority_queue<std::pair<int, std::size_t>> ready;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (indegree[i] == 0) ready.emplace(nodes[i].id, i);
  std::vector<int> order;
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

SuiteReport suite_gs(const VerifyOptions& opts) {
  SuiteBuilder b;
  b.report.suite = "gs";
  b.override_threshold = opts.tolerance_override;
  Rng rng(opts.seed);

  double worst = 0.0;
  struct Shape {
    int m, p;
  };
  for (Shape s : {Shape{1, 1}, Shape{1, 2}, Shape{2, 1}})
    for (int rep = 0; rep < 6; ++rep) {
      ProbFunction f = random_table(s.m, s.p, rng);
      worst = std::max(worst,
                       trace_norm(subroutine_gate(f).choi() - subroutine_gate_bruteforce(f).choi()));
    }
  b.add("gs.compact_equals_bruteforce", worst, 1e-12);

  double classical = 0.0;
  for (int rep = 0; rep < 4; ++rep) {
    ProbFunction f = random_table(1, 2, rng);
    SuperOperator g = subroutine_gate(f);
    for (Index i = 0; i < f.rows(); ++i) {
      DensityMatrix out = apply(g, basis_state(3, i << 2));
      RVector dist = diagonal_distribution(reduce(out, QubitIndexSet(3, {1, 2})));
      for (Index j = 0; j < f.cols(); ++j)
        classical = std::max(classical, std::abs(dist(j) - f.table(i, j)));
    }
  }
  b.add("gs.classical_inputs_reproduce_table", classical, 1e-12);
  return b.report;
}

SuiteReport suite_theorem2(const VerifyOptions& opts) {
  SuiteBuilder b;
  b.report.suite = "theorem2";
  b.override_threshold = opts.tolerance_override;

  SubroutineRef coin{fair_coin_table(), fair_coin_impl()};
  b.add("theorem2.fair_coin_choi_residual", compile_subroutine(coin).stats.choi_residual, 1e-9);

  const std::array<double, 4> q{0.15, 0.4, 0.65, 0.9};
  SubroutineRef biased{biased_table(q), biased_impl(q)};
  b.add("theorem2.biased_m2_choi_residual", compile_subroutine(biased).stats.choi_residual, 1e-9);

  {
    Circuit host = circuit_with_subroutine(coin);
    ProbFunction sem = computed_function(inline_subroutines(host, InlineMode::semantic));
    ProbFunction com = computed_function(inline_subroutines(host, InlineMode::compiled));
    b.add("theorem2.inline_modes_agree", max_function_gap(sem, com), 1e-7);
  }
  {
    // Nested: outer impl contains the fair-coin subroutine node.
    std::vector<Node> impl_nodes;
    Node sub;
    sub.id = 0;
    sub.op = coin;
    sub.in_wires = {0, 1};
    sub.out_wires = {2, 3};
    impl_nodes.push_back(sub);
    auto outer_impl =
        std::make_shared<const Circuit>(Circuit::make(2, {1}, {3}, std::move(impl_nodes)));
    SubroutineRef outer{fair_coin_table(), outer_impl};
    Circuit host = circuit_with_subroutine(outer);
    ProbFunction sem = computed_function(inline_subroutines(host, InlineMode::semantic));
    ProbFunction com = computed_function(inline_subroutines(host, InlineMode::compiled));
    b.add("theorem2.nested_inline_modes_agree", max_function_gap(sem, com), 1e-7);
  }
  return b.report;
}

SuiteReport suite_errors(const VerifyOptions& opts) {
  SuiteBuilder b;
  b.report.suite = "errors";
  b.override_threshold = opts.tolerance_override;
  Rng rng(opts.seed);
  DiamondOptions dopts;
  dopts.seed = opts.seed;
  dopts.restarts = 12;

  double chain_violation = 0.0, function_violation = 0.0;
  for (int chain = 0; chain < 6; ++chain) {
    std::vector<std::pair<SuperOperator, SuperOperator>> pairs;
    for (int j = 0; j < 4; ++j) {
      CMatrix v = random_unitary(2, rng);
      CMatrix w = v * gate_matrix("PHASE", 1, 0.05 * rng.uniform());
      pairs.emplace_back(SuperOperator::from_unitary(v), SuperOperator::from_unitary(w));
    }
    AccumulationReport rep = verify_error_accumulation(pairs, 0.0, dopts);
    for (const auto& step : rep.steps)
      chain_violation = std::max(chain_violation, step.prefix_delta - step.prefix_bound);
    function_violation =
        std::max(function_violation, rep.function_error - rep.function_bound);
  }
  b.add("errors.additive_chain_bound", chain_violation, 1e-3);
  b.add("errors.function_error_bound", function_violation, 1e-3);

  double ersub_violation = 0.0;
  for (int rep = 0; rep < 6; ++rep) {
    ProbFunction f = random_table(1, 1, rng);
    ProbFunction g = random_table(1, 1, rng);
    SubroutineErrorReport r = verify_subroutine_error(f, g, 0.0, dopts);
    ersub_violation = std::max(ersub_violation, r.lhs - r.rhs);
  }
  b.add("errors.subroutine_5eps_bound", ersub_violation, 1e-3);
  return b.report;
}

SuiteReport suite_norms(const VerifyOptions& opts) {
  SuiteBuilder b;
  b.report.suite = "norms";
  b.override_threshold = opts.tolerance_override;
  Rng rng(opts.seed);
  DiamondOptions dopts;
  dopts.seed = opts.seed;
  dopts.restarts = 12;

  {
    double worst = 0.0;
    for (int rep = 0; rep < 6; ++rep) {
      CMatrix a = random_gaussian_matrix(3, 3, rng);
      CMatrix c = random_gaussian_matrix(4, 4, rng);
      worst = std::max(worst, std::abs(op_norm(kron(a, c)) - op_norm(a) * op_norm(c)));
      worst = std::max(worst, std::abs(trace_norm(kron(a, c)) - trace_norm(a) * trace_norm(c)));
      worst = std::max(worst, std::max(0.0, trace_norm(a * c.topLeftCorner(3, 3)) -
                                                op_norm(a) * trace_norm(c.topLeftCorner(3, 3))));
      worst = std::max(worst, std::max(0.0, std::abs(a.trace()) - trace_norm(a)));
    }
    b.add("norms.tensor_and_product_rules", worst, 1e-9);
  }
  {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 3; ++s) {
      worst = std::max(worst,
                       std::abs(diamond_norm(random_cptp(1, 1, opts.seed + s), dopts).value - 1.0));
    }
    worst = std::max(worst,
                     std::abs(diamond_norm(random_cptp(1, 2, opts.seed + 9), dopts).value - 1.0));
    b.add("norms.cptp_diamond_is_one", worst, 1e-6);
  }
  {
    double worst = 0.0;
    for (int rep = 0; rep < 4; ++rep) {
      CMatrix v = random_unitary(2, rng);
      CMatrix w = random_unitary(2, rng);
      const double exact = unitary_pair_diamond(v, w);
      const double est = diamond_norm(
          HermMap::delta(SuperOperator::from_unitary(v), SuperOperator::from_unitary(w)), dopts)
                             .value;
      worst = std::max(worst, std::abs(est - exact));
    }
    b.add("norms.unitary_polygon_formula", worst, 1e-3);
  }
  {
    double worst = 0.0;
    for (double theta : {0.3, 1.1, 2.4})
      worst = std::max(worst, std::abs(unitary_pair_diamond(CMatrix::Identity(2, 2),
                                                            gate_matrix("PHASE", 1, theta)) -
                                       2.0 * std::sin(theta / 2.0)));
    b.add("norms.phase_closed_form", worst, 1e-12);
  }
  {
    double worst = 0.0;
    for (int rep = 0; rep < 4; ++rep) {
      CMatrix v = random_unitary(4, rng);
      CMatrix delta = 0.08 * random_gaussian_matrix(4, 4, rng);
      Eigen::JacobiSVD<CMatrix> svd(v + delta, Eigen::ComputeFullU | Eigen::ComputeFullV);
      CMatrix w = svd.matrixU() * svd.matrixV().adjoint();
      worst = std::max(worst, unitary_pair_diamond(v, w) - 2.0 * op_norm(v - w));
    }
    b.add("norms.two_norm_perturbation_bound", worst, 1e-9);
  }
  {
    SuperOperator a1 = random_cptp(1, 1, opts.seed + 21), a2 = random_cptp(1, 1, opts.seed + 22);
    SuperOperator r1 = random_cptp(1, 1, opts.seed + 23), r2 = random_cptp(1, 1, opts.seed + 24);
    HermMap da = HermMap::delta(a1, a2), dr = HermMap::delta(r1, r2);
    const double na = diamond_norm(da, dopts).value;
    const double nr = diamond_norm(dr, dopts).value;
    const double nar = diamond_norm(herm_tensor(da, dr), dopts).value;
    b.add("norms.diamond_tensor_multiplicative", std::abs(nar - na * nr), 1e-3);

    double worst = 0.0;
    for (int rep = 0; rep < 6; ++rep) {
      CMatrix g = random_gaussian_matrix(2, 2, rng);
      CMatrix x = (g + g.adjoint()) / 2.0;
      worst = std::max(worst, trace_norm(apply_herm(da, x)) - na * trace_norm(x));
    }
    b.add("norms.output_trace_norm_bound", worst, 1e-9);

    const double lhs = diamond_norm(HermMap::delta(compose(a1, r1), compose(a2, r1)), dopts).value;
    b.add("norms.composition_submultiplicative", std::max(0.0, lhs - na), 1e-3);
  }
  {
    double worst = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
      DensityMatrix rho = from_mixture([&] {
        Mixture m;
        CVector v1 = random_gaussian_matrix(4, 1, rng);
        CVector v2 = random_gaussian_matrix(4, 1, rng);
        m.items.emplace_back(0.5, v1 / v1.norm());
        m.items.emplace_back(0.5, v2 / v2.norm());
        return m;
      }());
      DensityMatrix sigma = from_mixture([&] {
        Mixture m;
        CVector v = random_gaussian_matrix(4, 1, rng);
        m.items.emplace_back(1.0, v / v.norm());
        return m;
      }());
      MeasurementTvd best = max_measurement_tvd(rho, sigma);
      worst = std::max(worst, std::abs(best.value - trace_distance(rho, sigma)));
      for (int trial = 0; trial < 25; ++trial) {
        CMatrix u = random_unitary(4, rng);
        RVector p(4), q(4);
        for (Index k = 0; k < 4; ++k) {
          CVector v = u.col(k);
          p(k) = std::real((v.adjoint() * rho.mat() * v)(0, 0));
          q(k) = std::real((v.adjoint() * sigma.mat() * v)(0, 0));
        }
        worst = std::max(worst, tvd(p, q) - best.value);
      }
    }
    b.add("norms.measurement_tvd_achieves_trace_distance", worst, 1e-9);
  }
  {
    HermMap t = transpose_map(1);
    const double naive = naive_norm_estimate(t, dopts);
    const double dia = diamond_norm(t, dopts).value;
    b.add("norms.transpose_naive_at_most_one", std::max(0.0, naive - 1.0), 1e-6);
    b.add("norms.transpose_diamond_at_least_two", std::max(0.0, 2.0 - dia), 1e-3);
  }
  return b.report;
}

SuiteReport suite_causality(const VerifyOptions& opts) {
  SuiteBuilder b;
  b.report.suite = "causality";
  b.override_threshold = opts.tolerance_override;
  Rng rng(opts.seed);

  {
    // Topological-sort invariance over random circuits, two orders each.
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      Rng sub = rng.fork(rep);
      Circuit c = random_circuit(sub, 3, 6, /*unitary_only=*/false);
      DensityMatrix rho = basis_state(3, static_cast<Index>(sub.next_u64() % 8));
      DensityMatrix r1 = evaluate(c, rho, topo_sort(c));
      DensityMatrix r2 = evaluate(c, rho, topo_sort_max_tiebreak(c));
      worst = std::max(worst, (r1.mat() - r2.mat()).cwiseAbs().maxCoeff());
    }
    b.add("causality.topological_sort_invariance", worst, 1e-12);
  }
  {
    // Off-register gates never change the reduced state.
    double worst = 0.0;
    for (int rep = 0; rep < 6; ++rep) {
      Rng sub = rng.fork(100 + rep);
      std::vector<Node> base;
      Node cn;
      cn.id = 0;
      cn.op = UnitaryGate{gate_matrix("CNOT", 2), "CNOT", 0.0, false};
      cn.in_wires = {0, 1};
      cn.out_wires = {3, 4};
      base.push_back(cn);
      std::vector<Node> with = base;
      Node g;
      g.id = 1;
      g.op = ChannelGate{random_cptp(1, 1, sub.next_u64())};
      g.in_wires = {2};
      g.out_wires = {5};
      with.push_back(g);
      Circuit c0 = Circuit::make(3, {}, {3, 4}, std::move(base));
      Circuit c1 = Circuit::make(3, {}, {3, 4}, std::move(with));
      DensityMatrix rho = basis_state(3, static_cast<Index>(sub.next_u64() % 8));
      auto reduce_to_cnot_wires = [](const Circuit& c, const DensityMatrix& state) {
        std::vector<int> outs = c.output_wires();
        std::vector<int> pos;
        for (int w : {3, 4})
          pos.push_back(static_cast<int>(std::find(outs.begin(), outs.end(), w) - outs.begin()));
        std::sort(pos.begin(), pos.end());
        return partial_trace(state.mat(), QubitIndexSet(3, pos));
      };
      CMatrix red0 = reduce_to_cnot_wires(c0, evaluate(c0, rho));
      CMatrix red1 = reduce_to_cnot_wires(c1, evaluate(c1, rho));
      worst = std::max(worst, (red0 - red1).cwiseAbs().maxCoeff());
    }
    b.add("causality.off_register_gates_commute", worst, 1e-11);
  }
  {
    // Correlated output pairs always have a common-ancestor gate, and the
    // depth bound holds for every circuit evaluated.
    int witness_violations = 0;
    int depth_violations = 0;
    for (int rep = 0; rep < 30; ++rep) {
      Rng sub = rng.fork(200 + rep);
      Circuit c = random_circuit(sub, 4, 6, /*unitary_only=*/true);
      DensityMatrix input = basis_state(4, static_cast<Index>(sub.next_u64() % 16));
      CorrelationGraph graph = correlation_graph(evaluate(c, input));
      const std::vector<int> outs = c.output_wires();
      for (const auto& [a, bnode] : graph.edges)
        if (!causality_witness(c, outs[a], outs[bnode])) ++witness_violations;
      if (!depth_bound_check(c, input, 2).satisfied) ++depth_violations;
    }
    b.add("causality.correlated_pairs_have_witness", witness_violations, 0.5);
    b.add("causality.depth_bound_universal", depth_violations, 0.5);
  }
  {
    // GHZ tree family depth bounds and the half/half function's graph.
    double worst = 0.0;
    for (int r : {2, 4, 8}) {
      DepthReport rep = depth_bound_check(ghz_fanout_circuit(r), basis_state(0, 0), 2);
      if (!rep.satisfied) worst = 1.0;
      if (rep.degree != r - 1) worst = 1.0;
    }
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(1, 16);
    t(0, 0) = t(0, 15) = 0.5;
    CorrelationGraph g = function_correlation_graph(ProbFunction::make(0, 4, t), 0);
    if (g.max_degree != 3 || g.edges.size() != 6) worst = 1.0;
    b.add("causality.ghz_family_bounds", worst, 0.5);
  }
  return b.report;
}

}  // namespace

SuiteReport verify_suite(const std::string& name, const VerifyOptions& opts) {
  if (name == "gs") return suite_gs(opts);
  if (name == "theorem2") return suite_theorem2(opts);
  if (name == "errors") return suite_errors(opts);
  if (name == "norms") return suite_norms(opts);
  if (name == "causality") return suite_causality(opts);
  throw ValidationError("verify: unknown suite '" + name + "'");
}

std::vector<SuiteReport> verify_all(const VerifyOptions& opts) {
  std::vector<SuiteReport> out;
  for (const char* name : {"gs", "theorem2", "errors", "norms", "causality"})
    out.push_back(verify_suite(name, opts));
  return out;
}

}  // namespace qmix
