#include "qmix/states.hpp"

#include <algorithm>
#include <cmath>

namespace qmix {

DensityMatrix DensityMatrix::make(CMatrix mat, Validate mode) {
  if (mat.rows() != mat.cols()) throw ValidationError("DensityMatrix: matrix not square");
  const int n = qubit_count(mat.rows(), "DensityMatrix");
  require_register(n, "DensityMatrix");
  if (!is_hermitian(mat, tol::herm))
    throw ValidationError("DensityMatrix: not Hermitian within tolerance");
  const double trace = mat.trace().real();
  if (std::abs(trace - 1.0) > (mode == Validate::repair ? 1e-6 : tol::tr))
    throw ValidationError("DensityMatrix: trace is " + std::to_string(trace) + ", expected 1");

  HermEig eig = herm_eig(mat);
  const double min_eig = eig.values.minCoeff();
  if (min_eig < -tol::psd)
    throw ValidationError("DensityMatrix: eigenvalue " + std::to_string(min_eig) +
                          " below -" + std::to_string(tol::psd));
  if (mode == Validate::repair) {
    RVector clamped = eig.values.cwiseMax(0.0);
    clamped /= clamped.sum();
    mat = eig.vectors * clamped.asDiagonal() * eig.vectors.adjoint();
    mat = (mat + mat.adjoint()) / 2.0;
  }
  return DensityMatrix(n, std::move(mat));
}

void Mixture::validate() const {
  if (items.empty()) throw ValidationError("Mixture: empty");
  double total = 0.0;
  const Index dim = items.front().second.size();
  for (const auto& [p, v] : items) {
    if (p < -tol::tr) throw ValidationError("Mixture: negative probability");
    if (v.size() != dim) throw ValidationError("Mixture: inconsistent vector dimensions");
    if (std::abs(v.norm() - 1.0) > tol::herm)
      throw ValidationError("Mixture: state vector not unit norm");
    total += p;
  }
  if (std::abs(total - 1.0) > tol::tr)
    throw ValidationError("Mixture: probabilities sum to " + std::to_string(total));
}

DensityMatrix pure(const CVector& v) {
  if (std::abs(v.norm() - 1.0) > tol::herm)
    throw ValidationError("pure: vector norm is " + std::to_string(v.norm()));
  qubit_count(v.size(), "pure");
  CMatrix rho = v * v.adjoint();
  return DensityMatrix::make(std::move(rho));
}

DensityMatrix from_mixture(const Mixture& m) {
  m.validate();
  const Index dim = m.items.front().second.size();
  CMatrix rho = CMatrix::Zero(dim, dim);
  for (const auto& [p, v] : m.items) rho += p * (v * v.adjoint());
  return DensityMatrix::make(std::move(rho));
}

Mixture eigen_mixture(const DensityMatrix& rho) {
  HermEig eig = herm_eig(rho.mat());
  Mixture out;
  for (Index i = 0; i < eig.values.size(); ++i) {
    const double p = eig.values(i);
    if (p <= 1e-12) continue;
    CVector v = eig.vectors.col(i);
    // Phase fix: largest-magnitude component real positive.
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    const Complex lead = v(arg);
    if (std::abs(lead) > 0) v *= std::conj(lead) / std::abs(lead);
    out.items.emplace_back(p, std::move(v));
  }
  // Renormalize away the dropped dust so the mixture itself validates.
  double total = 0.0;
  for (auto& [p, v] : out.items) total += p;
  for (auto& [p, v] : out.items) p /= total;
  return out;
}

DensityMatrix reduce(const DensityMatrix& rho, const QubitIndexSet& keep) {
  if (keep.total != rho.n_qubits())
    throw ValidationError("reduce: index set is over " + std::to_string(keep.total) +
                          " qubits, state has " + std::to_string(rho.n_qubits()));
  if (keep.n_kept() == 0)
    throw ValidationError("reduce: keeping zero qubits does not yield a state");
  return DensityMatrix::make(partial_trace(rho.mat(), keep), Validate::repair);
}

DensityMatrix basis_state(const std::string& bits) {
  if (bits.empty()) throw ValidationError("basis_state: empty bitstring");
  Index index = 0;
  for (char c : bits) {
    if (c != '0' && c != '1') throw ValidationError("basis_state: bad bit '" + std::string(1, c) + "'");
    index = (index << 1) | (c == '1' ? 1 : 0);
  }
  return basis_state(static_cast<int>(bits.size()), index);
}

DensityMatrix basis_state(int n_qubits, Index index) {
  require_register(n_qubits, "basis_state");
  const Index dim = Index{1} << n_qubits;
  if (index < 0 || index >= dim) throw ValidationError("basis_state: index out of range");
  CMatrix rho = CMatrix::Zero(dim, dim);
  rho(index, index) = 1.0;
  return DensityMatrix::make(std::move(rho));
}

RVector diagonal_distribution(const DensityMatrix& rho) {
  RVector p = rho.mat().diagonal().real();
  for (Index i = 0; i < p.size(); ++i) p(i) = std::clamp(p(i), 0.0, 1.0);
  return p;
}

}  // namespace qmix
