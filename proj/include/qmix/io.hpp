#pragma once

#include <json.hpp>

#include <optional>
#include <string>

#include "qmix/analysis.hpp"
#include "qmix/circuits.hpp"
#include "qmix/metrics.hpp"

namespace qmix::io {

using Json = nlohmann::ordered_json;

// Every record carries this version so golden outputs survive evolution.
inline constexpr int kFormatVersion = 1;

// Matrix record: {version, rows, cols, entries: [[re, im], ...]} row-major.
Json matrix_record(const CMatrix& m);
CMatrix parse_matrix_record(const Json& j);

// State file: {version, n_qubits, mat}.
Json state_record(const DensityMatrix& rho);
DensityMatrix parse_state_record(const Json& j);

// Channel file: {version, n_in, n_out, repr: "choi"|"kraus"|"unitary", data}.
Json channel_record(const SuperOperator& t, const std::string& repr = "choi");
SuperOperator parse_channel_record(const Json& j);

Json prob_function_record(const ProbFunction& f);
ProbFunction parse_prob_function_record(const Json& j);

// Circuit file: {version, n_wires_in, blank_inputs, result_outputs, nodes:
// [{id, kind, params, in_wires, out_wires}]} with kind one of
// unitary|channel|measure|traceout|subroutine. Named unitaries serialize as
// {name, theta?, dagger?}; anything else embeds the matrix. Subroutine params
// hold {m, p, table} plus either an inline impl or an impl_path relative to
// the circuit file.
Json circuit_record(const Circuit& c);
Circuit parse_circuit_record(const Json& j, const std::string& base_dir = "");

// Subroutine spec file: {version, m, p, table, impl | impl_path}.
Json subroutine_record(const SubroutineRef& s);
SubroutineRef parse_subroutine_record(const Json& j, const std::string& base_dir = "");

Json distance_record(const std::string& kind, double value, std::optional<CVector> witness,
                     double tolerance, int restarts, double spread);
Json analysis_record(const DepthReport& report, const CorrelationGraph& graph);

Json load_json(const std::string& path);
void save_json(const std::string& path, const Json& j);

double require_number(const Json& j, const std::string& field, const std::string& context);
const Json& require_field(const Json& j, const std::string& field, const std::string& context);

}  // namespace qmix::io
