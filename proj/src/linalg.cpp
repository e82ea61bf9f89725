#include "qmix/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <cmath>

namespace qmix {

namespace {
std::atomic<int> g_max_qubits{kMaxQubitsHardCap};
}

int max_qubits() { return g_max_qubits.load(); }

void set_max_qubits(int n) {
  if (n < 1 || n > kMaxQubitsHardCap)
    throw ValidationError("max-qubits must be in [1, " + std::to_string(kMaxQubitsHardCap) +
                          "], got " + std::to_string(n));
  g_max_qubits.store(n);
}

void require_register(int n_qubits, const std::string& what) {
  if (n_qubits > max_qubits())
    throw ResourceError(what + " needs " + std::to_string(n_qubits) +
                        " qubits, over the cap of " + std::to_string(max_qubits()));
}

int qubit_count(Index dim, const std::string& what) {
  if (dim < 1 || (dim & (dim - 1)) != 0)
    throw ValidationError(what + ": dimension " + std::to_string(dim) +
                          " is not a power of two");
  int n = 0;
  while ((Index{1} << n) < dim) ++n;
  return n;
}

QubitIndexSet::QubitIndexSet(int total_qubits, std::vector<int> kept_qubits)
    : total(total_qubits), kept(std::move(kept_qubits)) {
  if (total < 0) throw ValidationError("QubitIndexSet: negative total");
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i] < 0 || kept[i] >= total)
      throw ValidationError("QubitIndexSet: index " + std::to_string(kept[i]) +
                            " out of range for " + std::to_string(total) + " qubits");
    if (i > 0 && kept[i] <= kept[i - 1])
      throw ValidationError("QubitIndexSet: kept indices must be strictly increasing");
  }
}

QubitIndexSet QubitIndexSet::range(int total_qubits, int first, int count) {
  std::vector<int> kept(count);
  for (int i = 0; i < count; ++i) kept[i] = first + i;
  return QubitIndexSet(total_qubits, std::move(kept));
}

bool is_hermitian(const CMatrix& m, double tolerance) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tolerance;
}

CMatrix partial_trace(const CMatrix& m, const QubitIndexSet& keep) {
  const int n = keep.total;
  const Index dim = Index{1} << n;
  if (m.rows() != dim || m.cols() != dim)
    throw ValidationError("partial_trace: matrix is " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", expected 2^" + std::to_string(n));
  const int k = keep.n_kept();
  std::vector<int> traced;
  {
    std::vector<bool> is_kept(n, false);
    for (int q : keep.kept) is_kept[q] = true;
    for (int q = 0; q < n; ++q)
      if (!is_kept[q]) traced.push_back(q);
  }
  const Index dk = Index{1} << k;
  const Index de = Index{1} << (n - k);

  // Scatter tables: basis index contribution of the kept / traced sub-words.
  std::vector<Index> kept_bits(dk, 0), traced_bits(de, 0);
  for (Index a = 0; a < dk; ++a)
    for (int j = 0; j < k; ++j)
      if ((a >> (k - 1 - j)) & 1) kept_bits[a] |= Index{1} << (n - 1 - keep.kept[j]);
  for (Index e = 0; e < de; ++e)
    for (int l = 0; l < n - k; ++l)
      if ((e >> (n - k - 1 - l)) & 1) traced_bits[e] |= Index{1} << (n - 1 - traced[l]);

  CMatrix out = CMatrix::Zero(dk, dk);
  for (Index a = 0; a < dk; ++a)
    for (Index b = 0; b < dk; ++b) {
      Complex s = 0;
      for (Index e = 0; e < de; ++e) s += m(kept_bits[a] | traced_bits[e], kept_bits[b] | traced_bits[e]);
      out(a, b) = s;
    }
  return out;
}

CMatrix permute_qubits(const CMatrix& m, const std::vector<int>& new_to_old) {
  const int n = static_cast<int>(new_to_old.size());
  const Index dim = Index{1} << n;
  if (m.rows() != dim || m.cols() != dim)
    throw ValidationError("permute_qubits: dimension mismatch");
  {
    std::vector<bool> seen(n, false);
    for (int q : new_to_old) {
      if (q < 0 || q >= n || seen[q]) throw ValidationError("permute_qubits: not a permutation");
      seen[q] = true;
    }
  }
  std::vector<Index> map(dim, 0);
  for (Index x = 0; x < dim; ++x) {
    Index y = 0;
    for (int q = 0; q < n; ++q)
      if ((x >> (n - 1 - new_to_old[q])) & 1) y |= Index{1} << (n - 1 - q);
    map[x] = y;
  }
  CMatrix out(dim, dim);
  for (Index r = 0; r < dim; ++r)
    for (Index c = 0; c < dim; ++c) out(map[r], map[c]) = m(r, c);
  return out;
}

HermEig herm_eig(const CMatrix& m) {
  if (m.rows() != m.cols()) throw ValidationError("herm_eig: matrix not square");
  if (!is_hermitian(m, tol::herm))
    throw ValidationError("herm_eig: input not Hermitian within " + std::to_string(tol::herm));
  CMatrix sym = (m + m.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym);
  if (solver.info() != Eigen::Success) throw ValidationError("herm_eig: solver failed");
  // Eigen sorts ascending; the contract is descending.
  HermEig out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

double trace_norm(const CMatrix& m) {
  if (m.rows() == m.cols() && m.size() > 0) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale) {
      Eigen::SelfAdjointEigenSolver<CMatrix> solver((m + m.adjoint()) / 2.0,
                                                    Eigen::EigenvaluesOnly);
      return solver.eigenvalues().cwiseAbs().sum();
    }
  }
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues().sum();
}

double op_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == m.cols()) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale) {
      Eigen::SelfAdjointEigenSolver<CMatrix> solver((m + m.adjoint()) / 2.0,
                                                    Eigen::EigenvaluesOnly);
      return solver.eigenvalues().cwiseAbs().maxCoeff();
    }
  }
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

std::uint64_t Rng::next_u64() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

Complex Rng::gaussian_complex() {
  const double re = gaussian();
  const double im = gaussian();
  return Complex(re, im) / std::sqrt(2.0);
}

Rng Rng::fork(std::uint64_t stream) const {
  Rng copy = *this;
  std::uint64_t mixed = copy.next_u64() ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  return Rng(mixed);
}

CMatrix random_gaussian_matrix(Index rows, Index cols, Rng& rng) {
  CMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian_complex();
  return m;
}

CMatrix random_unitary(Index dim, Rng& rng) {
  CMatrix g = random_gaussian_matrix(dim, dim, rng);
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ();
  CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index i = 0; i < dim; ++i) {
    Complex d = r(i, i);
    q.col(i) *= (std::abs(d) > 0) ? d / std::abs(d) : Complex(1, 0);
  }
  return q;
}

}  // namespace qmix
