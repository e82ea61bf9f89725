#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qmix/linalg.hpp"

namespace qmix {

enum class Validate {
  strict,  // reject anything outside tolerance
  repair,  // clamp eigenvalue dust in [-tol::psd, 0) to 0 and renormalize
};

/// Hermitian, positive semi-definite, trace-one matrix over a qubit register.
class DensityMatrix {
 public:
  static DensityMatrix make(CMatrix mat, Validate mode = Validate::strict);

  int n_qubits() const { return n_qubits_; }
  Index dim() const { return mat_.rows(); }
  const CMatrix& mat() const { return mat_; }

 private:
  DensityMatrix(int n, CMatrix m) : n_qubits_(n), mat_(std::move(m)) {}
  int n_qubits_ = 0;
  CMatrix mat_;
};

/// A probability distribution over pure states. Many mixtures share one
/// density matrix; the representation is not unique.
struct Mixture {
  std::vector<std::pair<double, CVector>> items;
  void validate() const;
};

DensityMatrix pure(const CVector& v);
DensityMatrix from_mixture(const Mixture& m);

/// Spectral mixture of a state: eigenvectors with their eigenvalues as
/// probabilities. Terms with eigenvalue <= 1e-12 are dropped; each vector's
/// largest-magnitude component is made real positive so output is
/// reproducible. Under degenerate eigenvalues only the reconstructed matrix
/// is promised, not the vectors.
Mixture eigen_mixture(const DensityMatrix& rho);

DensityMatrix reduce(const DensityMatrix& rho, const QubitIndexSet& keep);

/// Computational-basis projector |bits><bits|, bits given most significant
/// qubit first ("01" is qubit0=0, qubit1=1).
DensityMatrix basis_state(const std::string& bits);
DensityMatrix basis_state(int n_qubits, Index index);

/// Real diagonal of the state, clamped to [0, 1]; for diagonal states this is
/// exactly the classical distribution the state represents.
RVector diagonal_distribution(const DensityMatrix& rho);

}  // namespace qmix
