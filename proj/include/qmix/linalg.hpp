#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "qmix/errors.hpp"

namespace qmix {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

// Tolerances used across the library. The contract, not the algorithm,
// is normative: every consumer states which gate it applies.
namespace tol {
inline constexpr double herm = 1e-9;   // Hermiticity gate
inline constexpr double eig = 1e-10;   // eigendecomposition / unitarity residual
inline constexpr double psd = 1e-8;    // admissible negative-eigenvalue dust
inline constexpr double tp = 1e-9;     // trace-preservation / projector completeness
inline constexpr double tr = 1e-9;     // trace-one / probability-sum gate
inline constexpr double corr = 1e-8;   // product-state test in correlation graphs
}  // namespace tol

// Registers are capped at 12 qubits (4096-dimensional states); density
// matrices cost 16^n-scale memory. The CLI may lower the cap, never raise it.
inline constexpr int kMaxQubitsHardCap = 12;
int max_qubits();
void set_max_qubits(int n);
void require_register(int n_qubits, const std::string& what);

// ---------------------------------------------------------------------------
// Qubit indexing convention
//
// Qubit 0 is the most-significant bit of the basis index: the basis state
// |i1 i2 ... in> has index i1*2^(n-1) + i2*2^(n-2) + ... + in, so tensoring
// A (on qubit 0) with B (on qubit 1) is kron(A, B). Every module uses this
// convention; nothing else in the library reorders bits.
// ---------------------------------------------------------------------------

/// Number of qubits n with 2^n == dim; throws ValidationError otherwise.
int qubit_count(Index dim, const std::string& what);

/// An ordered selection of `kept` qubits out of `total`.
/// Kept indices are strictly increasing and all < total.
struct QubitIndexSet {
  int total = 0;
  std::vector<int> kept;

  QubitIndexSet(int total_qubits, std::vector<int> kept_qubits);
  int n_kept() const { return static_cast<int>(kept.size()); }
  static QubitIndexSet range(int total_qubits, int first, int count);
};

/// Kronecker product; dimensions multiply.
template <typename DerivedA, typename DerivedB>
auto kron(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = decltype(typename DerivedA::Scalar{} * typename DerivedB::Scalar{});
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.rows() * b.rows(),
                                                            a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b.derived();
  return out;
}

bool is_hermitian(const CMatrix& m, double tolerance = tol::herm);

/// Partial trace over the qubits not in `keep`. `m` must be 2^n x 2^n with
/// n = keep.total. Tracing out everything yields the 1x1 matrix [Tr m].
CMatrix partial_trace(const CMatrix& m, const QubitIndexSet& keep);

/// Reorder the qubits of a 2^n square matrix: new qubit position q holds what
/// was at position new_to_old[q]. Conjugation by the corresponding
/// permutation unitary, computed by index arithmetic.
CMatrix permute_qubits(const CMatrix& m, const std::vector<int>& new_to_old);

struct HermEig {
  RVector values;   // descending
  CMatrix vectors;  // columns, unitary; m = V diag(values) V^dagger
};

/// Hermitian eigendecomposition. Input must be Hermitian within tol::herm;
/// the reconstruction residual meets tol::eig at the supported sizes.
HermEig herm_eig(const CMatrix& m);

/// Sum of singular values; for Hermitian input, sum |lambda_i|.
double trace_norm(const CMatrix& m);

/// Largest singular value.
double op_norm(const CMatrix& m);

// Small deterministic RNG used everywhere randomness is contracted to be
// seed-stable. Gaussian variates are hand-rolled (Box-Muller over explicit
// 53-bit uniforms) so outputs do not depend on the standard library's
// distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}
  std::uint64_t next_u64();
  double uniform();         // [0, 1)
  double gaussian();        // standard normal
  Complex gaussian_complex();
  /// Derive an independent stream, e.g. one per optimizer restart.
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

CMatrix random_gaussian_matrix(Index rows, Index cols, Rng& rng);

/// Haar-ish random unitary from the QR of a Gaussian matrix, with the
/// R-diagonal phase fix that makes the distribution well defined.
CMatrix random_unitary(Index dim, Rng& rng);

}  // namespace qmix
