#pragma once

#include <cstdint>
#include <vector>

#include "qmix/states.hpp"

namespace qmix {

// ---------------------------------------------------------------------------
// Choi matrix convention
//
// A super-operator T from n_in to n_out qubits is stored canonically as its
// Choi matrix J on the (output x input) space, input system second:
//
//   J = sum_{i,j} T(|i><j|) (x) |i><j|,   dim J = 2^(n_out + n_in)
//
// so J[(a, i), (b, j)] = <a| T(|i><j|) |b>* ... concretely, with composite
// row index a*2^n_in + i and column index b*2^n_in + j,
// J(a*d_in + i, b*d_in + j) = T(|i><j|)(a, b).
//
// Worked one-qubit example, the bit flip X: T(E_ij) = X E_ij X, so
// T(E_00) = E_11, T(E_01) = E_10, T(E_10) = E_01, T(E_11) = E_00, and
//
//        in:  00   01   10   11        (column = b*2 + j)
//   J =     [ 0    0    0    0 ]  row 00  (a=0, i=0)
//           [ 0    1    1    0 ]  row 01  (a=0, i=1)
//           [ 0    1    1    0 ]  row 10  (a=1, i=0)
//           [ 0    0    0    0 ]  row 11
//
// equal to vec(X) vec(X)^dagger with the row-major vec(K)[a*d_in + i] = K(a,i).
// T is completely positive iff J is PSD; trace preserving iff the partial
// trace of J over the output (first) factor is the identity on the input.
// ---------------------------------------------------------------------------

/// Trace-preserving completely positive map between qubit registers.
/// The Choi matrix is canonical (channel equality = matrix equality); the
/// Kraus list is a cache computed at construction, so values are immutable
/// and thread-safe afterwards.
class SuperOperator {
 public:
  static SuperOperator from_choi(int n_in, int n_out, CMatrix choi);
  static SuperOperator from_kraus(std::vector<CMatrix> ks);
  static SuperOperator from_unitary(const CMatrix& u);
  static SuperOperator identity(int n_qubits);

  int n_in() const { return n_in_; }
  int n_out() const { return n_out_; }
  Index d_in() const { return Index{1} << n_in_; }
  Index d_out() const { return Index{1} << n_out_; }
  const CMatrix& choi() const { return choi_; }
  const std::vector<CMatrix>& kraus() const { return kraus_; }
  bool is_unitary_channel() const { return kraus_.size() == 1; }

 private:
  SuperOperator(int n_in, int n_out, CMatrix choi, std::vector<CMatrix> kraus)
      : n_in_(n_in), n_out_(n_out), choi_(std::move(choi)), kraus_(std::move(kraus)) {}
  int n_in_ = 0, n_out_ = 0;
  CMatrix choi_;
  std::vector<CMatrix> kraus_;
};

/// Row-major vec: vec(K)[a*cols + i] = K(a, i), the convention under which
/// J = sum_k vec(K_k) vec(K_k)^dagger.
CVector vec_kraus(const CMatrix& k);
CMatrix unvec_kraus(const CVector& v, Index rows, Index cols);
CMatrix choi_from_kraus(const std::vector<CMatrix>& ks);

/// Spectral Kraus extraction from the Choi matrix: eigenvalues above tol::psd
/// are kept, so the count equals the Choi rank.
std::vector<CMatrix> kraus_decompose(const SuperOperator& t);

DensityMatrix apply(const SuperOperator& t, const DensityMatrix& rho);

/// sum_k K_k X K_k^dagger on an arbitrary matrix (no state validation);
/// linear-algebra workhorse behind apply, circuit channels and metrics.
CMatrix apply_matrix(const SuperOperator& t, const CMatrix& x);

/// Apply sum_k c_k (K_k (x) I_rest) X (K_k (x) I_rest)^dagger where the K_k act
/// on the most-significant block of a register and `rest` qubits trail.
/// X must be 2^(k_in + rest) square with K_k of shape 2^k_out x 2^k_in.
CMatrix apply_on_prefix(const std::vector<std::pair<double, CMatrix>>& terms, const CMatrix& x,
                        int rest_qubits);
CMatrix apply_on_prefix(const std::vector<CMatrix>& kraus, const CMatrix& x, int rest_qubits);

enum class ExtendPosition { before, after };

/// T (x) I (extra qubits after) or I (x) T (extra qubits before).
SuperOperator extend(const SuperOperator& t, int extra_qubits, ExtendPosition pos);

/// compose(t2, t1) acts as t2 after t1.
SuperOperator compose(const SuperOperator& t2, const SuperOperator& t1);

/// Projection measurement as a channel. The projectors must be an orthogonal
/// family summing to the identity. With record_outcome the output register
/// gains ceil(log2(#projectors)) qubits at the low end holding the classical
/// outcome diagonally: T(rho) = sum_m (P_m rho P_m) (x) |m><m|. Without it,
/// T(rho) = sum_m P_m rho P_m.
SuperOperator measurement_channel(const std::vector<CMatrix>& projectors, bool record_outcome);

/// The 2^|qubits| projectors of a computational-basis measurement of the
/// given qubits of an n-qubit register, ordered by measured word.
std::vector<CMatrix> basis_measurement_projectors(int n_qubits, const std::vector<int>& qubits);

/// Discard a whole k-qubit register: the (k -> 0) channel with Kraus <x|.
SuperOperator trace_out_channel(int n_qubits);

/// Unitary realization of a channel per the dilation scheme: a unitary u on
/// total_qubits = n + m + max(n, m) qubits (n = n_in, m = n_out) such that
/// feeding rho on the first n qubits with the remaining blank_qubits = total-n
/// qubits blank and tracing out the last env_qubits = total-m qubits of the
/// output reproduces apply(t, rho). Equals the literal 2n+m register with
/// n+m blanks whenever n >= m.
struct UnitaryDilation {
  SuperOperator gate;    // the channel this dilation realizes
  CMatrix u;
  int total_qubits = 0;
  int blank_qubits = 0;  // appended to the input, initialized |0...0>
  int env_qubits = 0;    // traced out of the output; >= n_in + n_out

  int n_in() const { return gate.n_in(); }
  int n_out() const { return gate.n_out(); }
};

/// Stinespring-style dilation: isometry columns V|psi> = sum_k (K_k|psi>)(x)|k>
/// from the spectral Kraus set (padded with zero operators up to 2^(n+m)),
/// completed to a unitary by Gram-Schmidt over standard-basis candidates in
/// index order (near-dependent candidates skipped at residual 1e-6).
/// The construction is verified at build time: unitarity within tol::eig and
/// reconstruction residual within 1e-9.
UnitaryDilation dilate_to_unitary(const SuperOperator& t);

/// The channel realized by a dilation (used for residual reporting/tests).
SuperOperator dilation_channel(const UnitaryDilation& d);

/// Seed-deterministic random CPTP channel: Gaussian Kraus stack K_k
/// right-multiplied by (sum_k K_k^dagger K_k)^(-1/2).
SuperOperator random_cptp(int n_in, int n_out, std::uint64_t seed);

}  // namespace qmix
