#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "qmix/io.hpp"
#include "qmix/verify.hpp"

using namespace qmix;
using qmix::io::Json;

namespace {

constexpr std::uint64_t kDefaultSeed = 1729;

struct GlobalOpts {
  std::uint64_t seed = kDefaultSeed;
  std::optional<double> tol;
  std::string format = "text";
  std::string out;
  int max_qubits = kMaxQubitsHardCap;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void emit(const GlobalOpts& g, const Json& record, const std::string& text) {
  std::string payload = (g.format == "record") ? record.dump(2) + "\n" : text;
  if (g.out.empty()) {
    std::cout << payload;
  } else {
    std::ofstream file(g.out);
    if (!file) throw ValidationError(g.out + ": cannot open for writing");
    file << payload;
  }
}

DensityMatrix input_state(const Circuit& c, const std::string& bits,
                          const std::string& state_path) {
  const int m = static_cast<int>(c.data_inputs().size());
  if (!state_path.empty()) return io::parse_state_record(io::load_json(state_path));
  if (m == 0) return basis_state(0, 0);
  if (bits.empty())
    throw ValidationError("circuit has " + std::to_string(m) +
                          " data inputs; provide --input BITS or --state FILE");
  if (static_cast<int>(bits.size()) != m)
    throw ValidationError("--input needs " + std::to_string(m) + " bits, got '" + bits + "'");
  return basis_state(bits);
}

int cmd_run(const GlobalOpts& g, const std::string& circuit_path, const std::string& bits,
            const std::string& state_path) {
  Circuit c = io::parse_circuit_record(
      io::load_json(circuit_path),
      std::filesystem::path(circuit_path).parent_path().string());
  DensityMatrix rho = input_state(c, bits, state_path);
  DensityMatrix final_state = evaluate(c, rho);

  const std::vector<int> outs = c.output_wires();
  RVector distribution;
  if (!c.result_outputs().empty()) {
    std::vector<int> sorted_results = c.result_outputs();
    std::sort(sorted_results.begin(), sorted_results.end());
    std::vector<int> pos;
    for (int w : sorted_results)
      pos.push_back(static_cast<int>(std::find(outs.begin(), outs.end(), w) - outs.begin()));
    DensityMatrix reduced =
        reduce(final_state, QubitIndexSet(static_cast<int>(outs.size()), pos));
    std::vector<int> new_to_old;
    for (int w : c.result_outputs())
      new_to_old.push_back(static_cast<int>(
          std::find(sorted_results.begin(), sorted_results.end(), w) - sorted_results.begin()));
    distribution = permute_qubits(reduced.mat(), new_to_old).diagonal().real().cwiseMax(0.0);
  }

  Json record;
  record["version"] = io::kFormatVersion;
  record["output_wires"] = outs;
  record["result_wires"] = c.result_outputs();
  Json dist = Json::array();
  for (Index i = 0; i < distribution.size(); ++i) dist.push_back(distribution(i));
  record["distribution"] = std::move(dist);
  record["final_state"] = io::state_record(final_state);

  std::string text = "qmix run v" + std::to_string(io::kFormatVersion) + "\n";
  text += "final register: " + std::to_string(final_state.n_qubits()) + " qubits\n";
  for (Index i = 0; i < distribution.size(); ++i) {
    std::string word;
    for (std::size_t q = 0; q < c.result_outputs().size(); ++q)
      word += ((i >> (c.result_outputs().size() - 1 - q)) & 1) ? '1' : '0';
    text += word + " " + fmt(distribution(i)) + "\n";
  }
  emit(g, record, text);
  return 0;
}

int cmd_dilate(const GlobalOpts& g, const std::string& channel_path) {
  SuperOperator t = io::parse_channel_record(io::load_json(channel_path));
  UnitaryDilation d = dilate_to_unitary(t);
  const double residual = trace_norm(dilation_channel(d).choi() - t.choi());

  Json record;
  record["version"] = io::kFormatVersion;
  record["n_in"] = d.n_in();
  record["n_out"] = d.n_out();
  record["total_qubits"] = d.total_qubits;
  record["blank_qubits"] = d.blank_qubits;
  record["env_qubits"] = d.env_qubits;
  record["residual"] = residual;
  record["u"] = io::matrix_record(d.u);

  std::string text = "qmix dilate v" + std::to_string(io::kFormatVersion) + "\n";
  text += "total_qubits " + std::to_string(d.total_qubits) + "\n";
  text += "blank_qubits " + std::to_string(d.blank_qubits) + "\n";
  text += "env_qubits " + std::to_string(d.env_qubits) + "\n";
  text += "residual " + fmt(residual) + "\n";
  emit(g, record, text);
  return residual > 1e-9 ? 5 : 0;
}

int cmd_compile(const GlobalOpts& g, const std::string& sub_path,
                const std::string& circuit_out) {
  SubroutineRef s = io::parse_subroutine_record(
      io::load_json(sub_path), std::filesystem::path(sub_path).parent_path().string());
  CompileResult res = compile_subroutine(s);

  Json record;
  record["version"] = io::kFormatVersion;
  Json stats;
  stats["register_qubits"] = res.stats.register_qubits;
  stats["impl_gates"] = res.stats.impl_gates;
  stats["shadow_cnots"] = res.stats.shadow_cnots;
  stats["result_cnots"] = res.stats.result_cnots;
  stats["detect_arity"] = res.stats.detect_arity;
  stats["detect_decomposed"] = res.stats.detect_decomposed;
  stats["cond_copy_decomposed"] = res.stats.cond_copy_decomposed;
  stats["total_decomposed"] = res.stats.total_decomposed;
  record["gate_counts"] = std::move(stats);
  record["choi_residual"] = res.stats.choi_residual;
  if (!circuit_out.empty()) {
    io::save_json(circuit_out, io::circuit_record(res.circuit));
    record["circuit_path"] = circuit_out;
  } else {
    record["circuit"] = io::circuit_record(res.circuit);
  }

  std::string text = "qmix compile v" + std::to_string(io::kFormatVersion) + "\n";
  text += "register_qubits " + std::to_string(res.stats.register_qubits) + "\n";
  text += "total_decomposed_gates " + std::to_string(res.stats.total_decomposed) + "\n";
  text += "choi_residual " + fmt(res.stats.choi_residual) + "\n";
  if (!circuit_out.empty()) text += "circuit_path " + circuit_out + "\n";
  emit(g, record, text);
  return res.stats.choi_residual > 1e-9 ? 5 : 0;
}

int cmd_distance(const GlobalOpts& g, const std::string& kind, const std::string& path_a,
                 const std::string& path_b) {
  DiamondOptions dopts;
  dopts.seed = g.seed;
  if (g.tol) dopts.tol = *g.tol;

  double value = 0.0, spread = 0.0;
  int restarts = 0;
  std::optional<CVector> witness;

  if (kind == "tvd") {
    if (path_b.empty()) throw ValidationError("distance tvd needs two operands");
    ProbFunction f = io::parse_prob_function_record(io::load_json(path_a));
    ProbFunction h = io::parse_prob_function_record(io::load_json(path_b));
    value = function_distance(f, h).max;
  } else if (kind == "trace") {
    if (path_b.empty()) throw ValidationError("distance trace needs two operands");
    DensityMatrix a = io::parse_state_record(io::load_json(path_a));
    DensityMatrix b = io::parse_state_record(io::load_json(path_b));
    value = trace_distance(a, b);
  } else if (kind == "diamond") {
    SuperOperator a = io::parse_channel_record(io::load_json(path_a));
    DiamondResult res;
    if (path_b.empty()) {
      res = diamond_norm(a, dopts);
    } else {
      SuperOperator b = io::parse_channel_record(io::load_json(path_b));
      res = diamond_norm(HermMap::delta(a, b), dopts);
    }
    value = res.value;
    spread = res.spread;
    restarts = res.restarts_used;
    witness = res.witness;
  } else if (kind == "unitary-pair") {
    if (path_b.empty()) throw ValidationError("distance unitary-pair needs two operands");
    SuperOperator a = io::parse_channel_record(io::load_json(path_a));
    SuperOperator b = io::parse_channel_record(io::load_json(path_b));
    if (!a.is_unitary_channel() || !b.is_unitary_channel())
      throw ValidationError("distance unitary-pair needs unitary channels");
    value = unitary_pair_diamond(a.kraus().front(), b.kraus().front());
  } else {
    throw ValidationError("unknown distance kind '" + kind + "'");
  }

  Json record = io::distance_record(kind, value, witness, dopts.tol, restarts, spread);
  std::string text = "qmix distance v" + std::to_string(io::kFormatVersion) + "\n";
  text += "kind " + kind + "\n";
  text += "value " + fmt(value) + "\n";
  if (restarts > 0) {
    text += "restarts " + std::to_string(restarts) + "\n";
    text += "spread " + fmt(spread) + "\n";
  }
  emit(g, record, text);
  return 0;
}

int cmd_analyze(const GlobalOpts& g, const std::string& circuit_path, const std::string& bits,
                const std::string& state_path, int fanin) {
  Circuit c = io::parse_circuit_record(
      io::load_json(circuit_path),
      std::filesystem::path(circuit_path).parent_path().string());
  DensityMatrix rho = input_state(c, bits, state_path);
  CorrelationGraph graph = correlation_graph(evaluate(c, rho));
  DepthReport report = depth_bound_check(c, rho, fanin);
  Json record = io::analysis_record(report, graph);

  std::string text = "qmix analyze v" + std::to_string(io::kFormatVersion) + "\n";
  text += "depth " + std::to_string(report.circuit_depth) + "\n";
  text += "k " + std::to_string(report.max_fanin) + "\n";
  text += "c " + std::to_string(report.degree) + "\n";
  text += "bound_state_form " + fmt(report.bound_state_form) + "\n";
  text += "bound_function_form " + fmt(report.bound_function_form) + "\n";
  text += std::string("satisfied ") + (report.satisfied ? "true" : "false") + "\n";
  for (const auto& [a, b] : graph.edges)
    text += "edge " + std::to_string(a) + " " + std::to_string(b) + "\n";
  emit(g, record, text);
  return 0;
}

int cmd_verify(const GlobalOpts& g, const std::string& suite) {
  VerifyOptions opts;
  opts.seed = g.seed;
  opts.tolerance_override = g.tol;
  std::vector<SuiteReport> reports;
  if (suite == "all") {
    reports = verify_all(opts);
  } else {
    reports.push_back(verify_suite(suite, opts));
  }

  bool all_pass = true;
  Json record = Json::array();
  std::string text = "qmix verify v" + std::to_string(io::kFormatVersion) + "\n";
  for (const SuiteReport& rep : reports) {
    all_pass = all_pass && rep.all_pass;
    for (const PropertyResult& r : rep.results) {
      Json row;
      row["property"] = r.name;
      row["residual"] = r.residual;
      row["threshold"] = r.threshold;
      row["pass"] = r.pass;
      record.push_back(std::move(row));
      text += std::string(r.pass ? "PASS " : "FAIL ") + r.name + " residual=" + fmt(r.residual) +
              " threshold=" + fmt(r.threshold) + "\n";
    }
  }
  text += std::string("overall ") + (all_pass ? "PASS" : "FAIL") + "\n";
  emit(g, record, text);
  return all_pass ? 0 : 5;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"density-matrix circuit simulator and verifier"};
  app.require_subcommand(1);
  // Global flags may appear after the subcommand.
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--seed", g.seed, "seed for randomized commands");
  double tol_value = 0.0;
  CLI::Option* tol_opt = app.add_option("--tol", tol_value, "tolerance override");
  app.add_option("--format", g.format, "output format")
      ->check(CLI::IsMember({"text", "record"}));
  app.add_option("--out", g.out, "write the report to a file instead of stdout");
  app.add_option("--max-qubits", g.max_qubits, "register size cap")
      ->check(CLI::Range(1, kMaxQubitsHardCap));

  std::string circuit_path, channel_path, sub_path, path_a, path_b;
  std::string bits, state_path, kind, suite, circuit_out;
  int fanin = 2;

  CLI::App* run = app.add_subcommand("run", "evaluate a circuit on a basis or state input");
  run->add_option("circuit", circuit_path, "circuit file")->required();
  run->add_option("--input", bits, "basis input bits over the data wires");
  run->add_option("--state", state_path, "state file for the data wires");

  CLI::App* dilate = app.add_subcommand("dilate", "compile a channel to a unitary");
  dilate->add_option("channel", channel_path, "channel file")->required();

  CLI::App* compile = app.add_subcommand("compile", "compile a subroutine to a circuit");
  compile->add_option("subroutine", sub_path, "subroutine spec file")->required();
  compile->add_option("--circuit-out", circuit_out, "write the compiled circuit here");

  CLI::App* distance = app.add_subcommand("distance", "distances between states/channels");
  distance->add_option("--kind", kind, "tvd|trace|diamond|unitary-pair")->required();
  distance->add_option("a", path_a, "first operand")->required();
  distance->add_option("b", path_b, "second operand");

  CLI::App* analyze = app.add_subcommand("analyze", "correlation graph and depth bounds");
  analyze->add_option("circuit", circuit_path, "circuit file")->required();
  analyze->add_option("--input", bits, "basis input bits");
  analyze->add_option("--state", state_path, "state file");
  analyze->add_option("--fanin", fanin, "max gate fan-in k")->check(CLI::Range(2, 16));

  CLI::App* verify = app.add_subcommand("verify", "run a verification suite");
  verify->add_option("suite", suite, "gs|theorem2|errors|norms|causality|all")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "qmix-error kind=parse message=\"" << e.what() << "\"\n";
    return 2;
  }

  try {
    set_max_qubits(g.max_qubits);
    if (*tol_opt) g.tol = tol_value;
    if (run->parsed()) return cmd_run(g, circuit_path, bits, state_path);
    if (dilate->parsed()) return cmd_dilate(g, channel_path);
    if (compile->parsed()) return cmd_compile(g, sub_path, circuit_out);
    if (distance->parsed()) return cmd_distance(g, kind, path_a, path_b);
    if (analyze->parsed()) return cmd_analyze(g, circuit_path, bits, state_path, fanin);
    if (verify->parsed()) return cmd_verify(g, suite);
  } catch (const ParseError& e) {
    std::cerr << "qmix-error kind=parse message=\"" << e.what() << "\"\n";
    return 2;
  } catch (const ResourceError& e) {
    std::cerr << "qmix-error kind=resource-cap message=\"" << e.what() << "\"\n";
    return 4;
  } catch (const VerificationError& e) {
    std::cerr << "qmix-error kind=verification message=\"" << e.what() << "\"\n";
    return 5;
  } catch (const ValidationError& e) {
    std::cerr << "qmix-error kind=validation message=\"" << e.what() << "\"\n";
    return 3;
  }
  return 0;
}
