#include "qmix/io.hpp"

#include <filesystem>
#include <fstream>

namespace qmix::io {

namespace {

[[noreturn]] void fail(const std::string& context, const std::string& what) {
  throw ParseError(context + ": " + what);
}

int require_int(const Json& j, const std::string& field, const std::string& context) {
  const Json& v = require_field(j, field, context);
  if (!v.is_number_integer()) fail(context, "field '" + field + "' must be an integer");
  return v.get<int>();
}

std::vector<int> int_list(const Json& j, const std::string& field, const std::string& context) {
  const Json& v = require_field(j, field, context);
  if (!v.is_array()) fail(context, "field '" + field + "' must be an array");
  std::vector<int> out;
  for (const Json& e : v) {
    if (!e.is_number_integer()) fail(context, "field '" + field + "' must hold integers");
    out.push_back(e.get<int>());
  }
  return out;
}

}  // namespace

const Json& require_field(const Json& j, const std::string& field, const std::string& context) {
  auto it = j.find(field);
  if (it == j.end()) fail(context, "missing field '" + field + "'");
  return *it;
}

double require_number(const Json& j, const std::string& field, const std::string& context) {
  const Json& v = require_field(j, field, context);
  if (!v.is_number()) fail(context, "field '" + field + "' must be a number");
  return v.get<double>();
}

Json matrix_record(const CMatrix& m) {
  Json j;
  j["version"] = kFormatVersion;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  Json entries = Json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      entries.push_back(Json::array({m(r, c).real(), m(r, c).imag()}));
  j["entries"] = std::move(entries);
  return j;
}

CMatrix parse_matrix_record(const Json& j) {
  const std::string ctx = "matrix record";
  const Index rows = require_int(j, "rows", ctx);
  const Index cols = require_int(j, "cols", ctx);
  if (rows < 1 || cols < 1) fail(ctx, "dimensions must be positive");
  const Json& entries = require_field(j, "entries", ctx);
  if (!entries.is_array() || static_cast<Index>(entries.size()) != rows * cols)
    fail(ctx, "expected " + std::to_string(rows * cols) + " entries");
  CMatrix m(rows, cols);
  Index k = 0;
  for (const Json& e : entries) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      fail(ctx, "entry " + std::to_string(k) + " must be [re, im]");
    m(k / cols, k % cols) = Complex(e[0].get<double>(), e[1].get<double>());
    ++k;
  }
  return m;
}

Json state_record(const DensityMatrix& rho) {
  Json j;
  j["version"] = kFormatVersion;
  j["n_qubits"] = rho.n_qubits();
  j["mat"] = matrix_record(rho.mat());
  return j;
}

DensityMatrix parse_state_record(const Json& j) {
  const std::string ctx = "state record";
  const int n = require_int(j, "n_qubits", ctx);
  CMatrix m = parse_matrix_record(require_field(j, "mat", ctx));
  if (m.rows() != (Index{1} << n)) fail(ctx, "n_qubits does not match the matrix dimension");
  return DensityMatrix::make(std::move(m));
}

Json channel_record(const SuperOperator& t, const std::string& repr) {
  Json j;
  j["version"] = kFormatVersion;
  j["n_in"] = t.n_in();
  j["n_out"] = t.n_out();
  j["repr"] = repr;
  if (repr == "choi") {
    j["data"] = matrix_record(t.choi());
  } else if (repr == "kraus") {
    Json list = Json::array();
    for (const CMatrix& k : t.kraus()) list.push_back(matrix_record(k));
    j["data"] = std::move(list);
  } else if (repr == "unitary") {
    if (!t.is_unitary_channel())
      throw ValidationError("channel_record: channel is not unitary");
    j["data"] = matrix_record(t.kraus().front());
  } else {
    throw ValidationError("channel_record: unknown repr '" + repr + "'");
  }
  return j;
}

SuperOperator parse_channel_record(const Json& j) {
  const std::string ctx = "channel record";
  const int n_in = require_int(j, "n_in", ctx);
  const int n_out = require_int(j, "n_out", ctx);
  const Json& repr_field = require_field(j, "repr", ctx);
  if (!repr_field.is_string()) fail(ctx, "field 'repr' must be a string");
  const std::string repr = repr_field.get<std::string>();
  const Json& data = require_field(j, "data", ctx);
  if (repr == "choi") return SuperOperator::from_choi(n_in, n_out, parse_matrix_record(data));
  if (repr == "kraus") {
    if (!data.is_array() || data.empty()) fail(ctx, "kraus data must be a non-empty array");
    std::vector<CMatrix> ks;
    for (const Json& e : data) ks.push_back(parse_matrix_record(e));
    SuperOperator t = SuperOperator::from_kraus(std::move(ks));
    if (t.n_in() != n_in || t.n_out() != n_out) fail(ctx, "kraus shapes disagree with n_in/n_out");
    return t;
  }
  if (repr == "unitary") {
    SuperOperator t = SuperOperator::from_unitary(parse_matrix_record(data));
    if (t.n_in() != n_in || t.n_out() != n_out) fail(ctx, "unitary shape disagrees with n_in/n_out");
    return t;
  }
  fail(ctx, "unknown repr '" + repr + "'");
}

Json prob_function_record(const ProbFunction& f) {
  Json j;
  j["version"] = kFormatVersion;
  j["m"] = f.m_bits;
  j["p"] = f.p_bits;
  Json table = Json::array();
  for (Index i = 0; i < f.rows(); ++i) {
    Json row = Json::array();
    for (Index k = 0; k < f.cols(); ++k) row.push_back(f.table(i, k));
    table.push_back(std::move(row));
  }
  j["table"] = std::move(table);
  return j;
}

ProbFunction parse_prob_function_record(const Json& j) {
  const std::string ctx = "prob function record";
  const int m = require_int(j, "m", ctx);
  const int p = require_int(j, "p", ctx);
  const Json& table = require_field(j, "table", ctx);
  if (!table.is_array() || static_cast<Index>(table.size()) != (Index{1} << m))
    fail(ctx, "table must have 2^m rows");
  Eigen::MatrixXd t(Index{1} << m, Index{1} << p);
  Index i = 0;
  for (const Json& row : table) {
    if (!row.is_array() || static_cast<Index>(row.size()) != (Index{1} << p))
      fail(ctx, "row " + std::to_string(i) + " must have 2^p entries");
    Index k = 0;
    for (const Json& e : row) {
      if (!e.is_number()) fail(ctx, "table entries must be numbers");
      t(i, k++) = e.get<double>();
    }
    ++i;
  }
  return ProbFunction::make(m, p, std::move(t));
}

namespace {

Json node_record(const Node& node) {
  Json j;
  j["id"] = node.id;
  Json params = Json::object();
  std::visit(
      [&](const auto& g) {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, UnitaryGate>) {
          j["kind"] = "unitary";
          if (!g.name.empty()) {
            params["name"] = g.name;
            if (g.name == "PHASE") params["theta"] = g.theta;
            if (g.dagger) params["dagger"] = true;
          } else {
            params["matrix"] = matrix_record(g.u);
          }
        } else if constexpr (std::is_same_v<T, ChannelGate>) {
          j["kind"] = "channel";
          params["channel"] = channel_record(g.op);
        } else if constexpr (std::is_same_v<T, MeasureGate>) {
          j["kind"] = "measure";
          params["record"] = g.record;
        } else if constexpr (std::is_same_v<T, TraceOutGate>) {
          j["kind"] = "traceout";
        } else {
          j["kind"] = "subroutine";
          params["m"] = g.f.m_bits;
          params["p"] = g.f.p_bits;
          Json table = Json::array();
          for (Index i = 0; i < g.f.rows(); ++i) {
            Json row = Json::array();
            for (Index k = 0; k < g.f.cols(); ++k) row.push_back(g.f.table(i, k));
            table.push_back(std::move(row));
          }
          params["table"] = std::move(table);
          if (g.impl) params["impl"] = circuit_record(*g.impl);
        }
      },
      node.op);
  j["params"] = std::move(params);
  j["in_wires"] = node.in_wires;
  j["out_wires"] = node.out_wires;
  return j;
}

Node parse_node_record(const Json& j, const std::string& base_dir) {
  const std::string ctx = "circuit node";
  Node node;
  node.id = require_int(j, "id", ctx);
  node.in_wires = int_list(j, "in_wires", ctx);
  node.out_wires = int_list(j, "out_wires", ctx);
  const Json& kind_field = require_field(j, "kind", ctx);
  if (!kind_field.is_string()) fail(ctx, "field 'kind' must be a string");
  const std::string kind = kind_field.get<std::string>();
  const Json params = j.value("params", Json::object());

  if (kind == "unitary") {
    UnitaryGate g;
    if (params.contains("name")) {
      g.name = params["name"].get<std::string>();
      g.theta = params.value("theta", 0.0);
      g.dagger = params.value("dagger", false);
      g.u = gate_matrix(g.name, static_cast<int>(node.in_wires.size()), g.theta);
      if (g.dagger) g.u = CMatrix(g.u.adjoint());
    } else if (params.contains("matrix")) {
      g.u = parse_matrix_record(params["matrix"]);
    } else {
      fail(ctx, "unitary node needs 'name' or 'matrix'");
    }
    node.op = std::move(g);
  } else if (kind == "channel") {
    node.op = ChannelGate{parse_channel_record(require_field(params, "channel", ctx))};
  } else if (kind == "measure") {
    node.op = MeasureGate{static_cast<int>(node.in_wires.size()), params.value("record", true)};
  } else if (kind == "traceout") {
    node.op = TraceOutGate{static_cast<int>(node.in_wires.size())};
  } else if (kind == "subroutine") {
    Json spec = params;
    Json wrapped;
    wrapped["version"] = kFormatVersion;
    wrapped["m"] = require_field(spec, "m", ctx);
    wrapped["p"] = require_field(spec, "p", ctx);
    wrapped["table"] = require_field(spec, "table", ctx);
    if (spec.contains("impl")) wrapped["impl"] = spec["impl"];
    if (spec.contains("impl_path")) wrapped["impl_path"] = spec["impl_path"];
    node.op = parse_subroutine_record(wrapped, base_dir);
  } else {
    fail(ctx, "unknown node kind '" + kind + "'");
  }
  return node;
}

}  // namespace

Json circuit_record(const Circuit& c) {
  Json j;
  j["version"] = kFormatVersion;
  j["n_wires_in"] = c.n_wires_in();
  j["blank_inputs"] = std::vector<int>(c.blank_inputs().begin(), c.blank_inputs().end());
  j["result_outputs"] = c.result_outputs();
  Json nodes = Json::array();
  for (const Node& node : c.nodes()) nodes.push_back(node_record(node));
  j["nodes"] = std::move(nodes);
  return j;
}

Circuit parse_circuit_record(const Json& j, const std::string& base_dir) {
  const std::string ctx = "circuit record";
  const int n = require_int(j, "n_wires_in", ctx);
  std::vector<int> blanks = int_list(j, "blank_inputs", ctx);
  std::vector<int> results = int_list(j, "result_outputs", ctx);
  const Json& node_list = require_field(j, "nodes", ctx);
  if (!node_list.is_array()) fail(ctx, "field 'nodes' must be an array");
  std::vector<Node> nodes;
  for (const Json& e : node_list) nodes.push_back(parse_node_record(e, base_dir));
  return Circuit::make(n, std::set<int>(blanks.begin(), blanks.end()), std::move(results),
                       std::move(nodes));
}

Json subroutine_record(const SubroutineRef& s) {
  Json j = prob_function_record(s.f);
  if (s.impl) j["impl"] = circuit_record(*s.impl);
  return j;
}

SubroutineRef parse_subroutine_record(const Json& j, const std::string& base_dir) {
  const std::string ctx = "subroutine record";
  SubroutineRef s;
  s.f = parse_prob_function_record(j);
  if (j.contains("impl")) {
    s.impl = std::make_shared<const Circuit>(parse_circuit_record(j["impl"], base_dir));
  } else if (j.contains("impl_path")) {
    const Json& path_field = j["impl_path"];
    if (!path_field.is_string()) fail(ctx, "impl_path must be a string");
    std::filesystem::path p(path_field.get<std::string>());
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    Json impl_json = load_json(p.string());
    s.impl = std::make_shared<const Circuit>(
        parse_circuit_record(impl_json, p.parent_path().string()));
  }
  return s;
}

Json distance_record(const std::string& kind, double value, std::optional<CVector> witness,
                     double tolerance, int restarts, double spread) {
  Json j;
  j["version"] = kFormatVersion;
  j["kind"] = kind;
  j["value"] = value;
  if (witness) {
    Json w = Json::array();
    for (Index i = 0; i < witness->size(); ++i)
      w.push_back(Json::array({(*witness)(i).real(), (*witness)(i).imag()}));
    j["witness"] = std::move(w);
  }
  j["tolerance"] = tolerance;
  j["restarts"] = restarts;
  j["spread"] = spread;
  return j;
}

Json analysis_record(const DepthReport& report, const CorrelationGraph& graph) {
  Json j;
  j["version"] = kFormatVersion;
  j["depth"] = report.circuit_depth;
  j["k"] = report.max_fanin;
  j["c"] = report.degree;
  j["bound_state_form"] = report.bound_state_form;
  j["bound_function_form"] = report.bound_function_form;
  j["satisfied"] = report.satisfied;
  Json edges = Json::array();
  for (const auto& [a, b] : graph.edges) edges.push_back(Json::array({a, b}));
  j["edges"] = std::move(edges);
  return j;
}

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError(path + ": cannot open for writing");
  out << j.dump(2) << "\n";
}

}  // namespace qmix::io
