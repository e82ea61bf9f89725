#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "qmix/circuits.hpp"

namespace qmix {

/// Total variation distance sum_j |p_j - q_j|, in [0, 2].
double tvd(const RVector& p, const RVector& q);

struct FunctionDistance {
  RVector per_input;  // t.v.d. per input word
  double max = 0.0;
};

FunctionDistance function_distance(const ProbFunction& f, const ProbFunction& g);

/// Trace norm of rho - sigma, in [0, 2].
double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma);

struct MeasurementTvd {
  double value = 0.0;
  std::vector<CMatrix> projectors;  // eigenprojectors of rho - sigma
};

/// The measurement achieving the trace distance: projectors onto the
/// eigenvectors of rho - sigma. No other measurement's t.v.d. exceeds it.
MeasurementTvd max_measurement_tvd(const DensityMatrix& rho, const DensityMatrix& sigma);

/// A Hermitian-preserving super-operator (a channel, a difference of two
/// channels, or anything else with a Hermitian Choi matrix). The signed
/// spectral Kraus form backs application and the norm optimizers.
struct HermMap {
  int n_in = 0;
  int n_out = 0;
  CMatrix choi;

  static HermMap make(int n_in, int n_out, CMatrix choi);
  static HermMap from(const SuperOperator& t);
  static HermMap delta(const SuperOperator& a, const SuperOperator& b);  // a - b
};

CMatrix apply_herm(const HermMap& t, const CMatrix& x);
HermMap herm_tensor(const HermMap& a, const HermMap& b);

/// The transpose map |i><j| -> |j><i| on n qubits; Hermitian preserving but
/// not completely positive, the standard stabilization counterexample.
HermMap transpose_map(int n_qubits);

struct DiamondOptions {
  int restarts = 32;
  double tol = 1e-4;
  std::uint64_t seed = 1729;
  int max_iters = 400;
};

struct DiamondResult {
  double value = 0.0;   // best trace norm found; certified lower bound
  CVector witness;      // unit vector on the input (x) reference space
  int restarts_used = 0;
  double spread = 0.0;  // max - min over restart results
};

/// Estimate of ||T||_diamond = ||T (x) I||_1 for Hermitian-preserving T,
/// maximizing ||(T (x) I)(|xi><xi|)||_1 over unit |xi> on the doubled space
/// (rank-one extreme points suffice for Hermitian-preserving maps). The
/// optimizer alternates between the trace-norm subgradient and the top
/// eigenvector of the pulled-back objective; each restart's ascent is
/// monotone, and the result is exactly the value at the returned witness.
/// Deterministic for a fixed seed; input capped at 4 qubits.
DiamondResult diamond_norm(const HermMap& t, const DiamondOptions& opts = {});
DiamondResult diamond_norm(const SuperOperator& t, const DiamondOptions& opts = {});

/// Estimate of the unstabilized norm sup_X ||T X||_1 / ||X||_1, maximized
/// over rank-one X = u v^dagger. Underestimates the diamond norm whenever
/// stabilization matters (the point of the transpose counterexample).
double naive_norm_estimate(const HermMap& t, const DiamondOptions& opts = {});

/// Distance from the origin to the convex hull of a point set in the plane.
/// Exact: the support function optimum is attained at a vertex direction or
/// an edge normal, all of which are enumerated.
double origin_to_hull_distance(const std::vector<Complex>& points);

/// Closed form for the diamond distance of two unitary channels: 2 sqrt(1-d^2)
/// with d the distance from 0 to the hull of the eigenvalues of v w^dagger.
double unitary_pair_diamond(const CMatrix& v, const CMatrix& w);

/// The probabilistic function a channel computes on classical inputs:
/// f[i][j] = <j| T(|i><i|) |j>.
ProbFunction channel_prob_function(const SuperOperator& t);

struct AccumulationStep {
  double eps = 0.0;          // per-gate diamond error
  bool eps_exact = false;    // true when the unitary closed form applied
  double prefix_delta = 0.0; // diamond distance of the composed prefixes
  double prefix_bound = 0.0; // sum of eps so far
  bool ok = false;
};

struct AccumulationReport {
  std::vector<AccumulationStep> steps;
  double function_error = 0.0;
  double function_bound = 0.0;
  bool ok = false;
};

/// Error-accumulation check: for each prefix of the chain, the diamond
/// distance between the perturbed and ideal compositions is bounded by the
/// sum of per-gate errors (plus tol), and the end-to-end computed functions
/// differ by no more than the same bound.
AccumulationReport verify_error_accumulation(
    const std::vector<std::pair<SuperOperator, SuperOperator>>& ideal_and_perturbed,
    double tol = 1e-3, const DiamondOptions& opts = {});

struct SubroutineErrorReport {
  double function_dist = 0.0;  // ||f - f'||
  double lhs = 0.0;            // ||g_f' - g_f||_diamond estimate
  double rhs = 0.0;            // 5 ||f - f'||
  bool ok = false;
};

/// ||g_f' - g_f||_diamond <= 5 ||f - f'|| (plus tol).
SubroutineErrorReport verify_subroutine_error(const ProbFunction& f, const ProbFunction& fp,
                                              double tol = 1e-3, const DiamondOptions& opts = {});

}  // namespace qmix
