#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qmix/analysis.hpp"
#include "qmix/metrics.hpp"

namespace qmix {

struct PropertyResult {
  std::string name;
  double residual = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct SuiteReport {
  std::string suite;
  std::vector<PropertyResult> results;
  bool all_pass = true;
};

struct VerifyOptions {
  std::uint64_t seed = 1729;
  // Replaces every property threshold when set; a negative-control run with
  // an absurdly small value must fail and name the property.
  std::optional<double> tolerance_override;
};

/// Seeded random circuit over `n_wires` lines: named one/two-qubit unitaries,
/// plus (unless unitary_only) random single-qubit channels.
Circuit random_circuit(Rng& rng, int n_wires, int n_gates, bool unitary_only);

/// A second valid topological order obtained with the opposite tiebreak.
std::vector<int> topo_sort_max_tiebreak(const Circuit& c);

// Suites: gs, theorem2, errors, norms, causality.
SuiteReport verify_suite(const std::string& name, const VerifyOptions& opts = {});
std::vector<SuiteReport> verify_all(const VerifyOptions& opts = {});

}  // namespace qmix
