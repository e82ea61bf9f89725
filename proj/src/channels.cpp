#include "qmix/channels.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace qmix {

namespace {

void check_channel_register(int n_in, int n_out) {
  require_register(n_in, "SuperOperator input");
  require_register(n_out, "SuperOperator output");
  require_register(n_in + n_out, "SuperOperator Choi matrix");
}

// Partial trace of a Choi matrix over the output (first) factor.
CMatrix choi_trace_out_output(const CMatrix& choi, Index d_out, Index d_in) {
  CMatrix out = CMatrix::Zero(d_in, d_in);
  for (Index a = 0; a < d_out; ++a)
    out += choi.block(a * d_in, a * d_in, d_in, d_in);
  return out;
}

}  // namespace

CVector vec_kraus(const CMatrix& k) {
  CVector v(k.rows() * k.cols());
  for (Index a = 0; a < k.rows(); ++a)
    for (Index i = 0; i < k.cols(); ++i) v(a * k.cols() + i) = k(a, i);
  return v;
}

CMatrix unvec_kraus(const CVector& v, Index rows, Index cols) {
  CMatrix k(rows, cols);
  for (Index a = 0; a < rows; ++a)
    for (Index i = 0; i < cols; ++i) k(a, i) = v(a * cols + i);
  return k;
}

CMatrix choi_from_kraus(const std::vector<CMatrix>& ks) {
  const Index d = ks.front().rows() * ks.front().cols();
  CMatrix j = CMatrix::Zero(d, d);
  for (const CMatrix& k : ks) {
    CVector v = vec_kraus(k);
    j.noalias() += v * v.adjoint();
  }
  return j;
}

SuperOperator SuperOperator::from_choi(int n_in, int n_out, CMatrix choi) {
  check_channel_register(n_in, n_out);
  const Index d_in = Index{1} << n_in, d_out = Index{1} << n_out;
  if (choi.rows() != d_in * d_out || choi.cols() != d_in * d_out)
    throw ValidationError("SuperOperator: Choi matrix has wrong dimension");
  if (!is_hermitian(choi, tol::herm))
    throw ValidationError("SuperOperator: Choi matrix not Hermitian");

  HermEig eig = herm_eig(choi);
  if (eig.values.minCoeff() < -tol::psd)
    throw ValidationError("SuperOperator: Choi matrix not PSD (not completely positive), "
                          "min eigenvalue " + std::to_string(eig.values.minCoeff()));
  CMatrix marginal = choi_trace_out_output(choi, d_out, d_in);
  if ((marginal - CMatrix::Identity(d_in, d_in)).cwiseAbs().maxCoeff() > tol::tp)
    throw ValidationError("SuperOperator: not trace preserving");

  std::vector<CMatrix> kraus;
  for (Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values(i) <= tol::psd) continue;
    kraus.push_back(std::sqrt(eig.values(i)) * unvec_kraus(eig.vectors.col(i), d_out, d_in));
  }
  if (kraus.empty()) throw ValidationError("SuperOperator: Choi matrix is zero");
  return SuperOperator(n_in, n_out, std::move(choi), std::move(kraus));
}

SuperOperator SuperOperator::from_kraus(std::vector<CMatrix> ks) {
  if (ks.empty()) throw ValidationError("from_kraus: empty Kraus list");
  const Index rows = ks.front().rows(), cols = ks.front().cols();
  for (const CMatrix& k : ks)
    if (k.rows() != rows || k.cols() != cols)
      throw ValidationError("from_kraus: inconsistent Kraus shapes");
  const int n_out = qubit_count(rows, "from_kraus output");
  const int n_in = qubit_count(cols, "from_kraus input");
  check_channel_register(n_in, n_out);

  CMatrix sum = CMatrix::Zero(cols, cols);
  for (const CMatrix& k : ks) sum.noalias() += k.adjoint() * k;
  if ((sum - CMatrix::Identity(cols, cols)).cwiseAbs().maxCoeff() > tol::tp)
    throw ValidationError("from_kraus: sum K^dagger K differs from identity");

  CMatrix choi = choi_from_kraus(ks);
  return SuperOperator(n_in, n_out, std::move(choi), std::move(ks));
}

SuperOperator SuperOperator::from_unitary(const CMatrix& u) {
  if (u.rows() != u.cols()) throw ValidationError("from_unitary: matrix not square");
  const int n = qubit_count(u.rows(), "from_unitary");
  check_channel_register(n, n);
  if ((u.adjoint() * u - CMatrix::Identity(u.rows(), u.rows())).cwiseAbs().maxCoeff() > tol::eig)
    throw ValidationError("from_unitary: matrix not unitary within tolerance");
  CVector v = vec_kraus(u);
  CMatrix choi = v * v.adjoint();
  return SuperOperator(n, n, std::move(choi), {u});
}

SuperOperator SuperOperator::identity(int n_qubits) {
  return from_unitary(CMatrix::Identity(Index{1} << n_qubits, Index{1} << n_qubits));
}

std::vector<CMatrix> kraus_decompose(const SuperOperator& t) {
  HermEig eig = herm_eig(t.choi());
  std::vector<CMatrix> out;
  for (Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values(i) <= tol::psd) continue;
    out.push_back(std::sqrt(eig.values(i)) * unvec_kraus(eig.vectors.col(i), t.d_out(), t.d_in()));
  }
  return out;
}

CMatrix apply_matrix(const SuperOperator& t, const CMatrix& x) {
  if (x.rows() != t.d_in() || x.cols() != t.d_in())
    throw ValidationError("apply: state dimension mismatch");
  CMatrix out = CMatrix::Zero(t.d_out(), t.d_out());
  for (const CMatrix& k : t.kraus()) out.noalias() += k * x * k.adjoint();
  return out;
}

DensityMatrix apply(const SuperOperator& t, const DensityMatrix& rho) {
  if (rho.n_qubits() != t.n_in())
    throw ValidationError("apply: channel takes " + std::to_string(t.n_in()) +
                          " qubits, state has " + std::to_string(rho.n_qubits()));
  return DensityMatrix::make(apply_matrix(t, rho.mat()), Validate::repair);
}

CMatrix apply_on_prefix(const std::vector<std::pair<double, CMatrix>>& terms, const CMatrix& x,
                        int rest_qubits) {
  const Index dr = Index{1} << rest_qubits;
  const Index k_in = terms.front().second.cols();
  const Index k_out = terms.front().second.rows();
  if (x.rows() != k_in * dr || x.cols() != k_in * dr)
    throw ValidationError("apply_on_prefix: dimension mismatch");
  CMatrix out = CMatrix::Zero(k_out * dr, k_out * dr);
  CMatrix mid(k_out * dr, k_in * dr);
  for (const auto& [coeff, k] : terms) {
    mid.setZero();
    for (Index a = 0; a < k_out; ++a)
      for (Index b = 0; b < k_in; ++b) {
        if (k(a, b) == Complex(0, 0)) continue;
        mid.middleRows(a * dr, dr).noalias() += k(a, b) * x.middleRows(b * dr, dr);
      }
    for (Index a = 0; a < k_out; ++a)
      for (Index b = 0; b < k_in; ++b) {
        if (k(a, b) == Complex(0, 0)) continue;
        out.middleCols(a * dr, dr).noalias() +=
            (coeff * std::conj(k(a, b))) * mid.middleCols(b * dr, dr);
      }
  }
  return out;
}

CMatrix apply_on_prefix(const std::vector<CMatrix>& kraus, const CMatrix& x, int rest_qubits) {
  std::vector<std::pair<double, CMatrix>> terms;
  terms.reserve(kraus.size());
  for (const CMatrix& k : kraus) terms.emplace_back(1.0, k);
  return apply_on_prefix(terms, x, rest_qubits);
}

SuperOperator extend(const SuperOperator& t, int extra_qubits, ExtendPosition pos) {
  if (extra_qubits < 0) throw ValidationError("extend: negative qubit count");
  if (extra_qubits == 0) return t;
  const Index de = Index{1} << extra_qubits;
  CMatrix eye = CMatrix::Identity(de, de);
  std::vector<CMatrix> ks;
  ks.reserve(t.kraus().size());
  for (const CMatrix& k : t.kraus())
    ks.push_back(pos == ExtendPosition::after ? CMatrix(kron(k, eye)) : CMatrix(kron(eye, k)));
  return SuperOperator::from_kraus(std::move(ks));
}

SuperOperator compose(const SuperOperator& t2, const SuperOperator& t1) {
  if (t1.n_out() != t2.n_in())
    throw ValidationError("compose: inner output is " + std::to_string(t1.n_out()) +
                          " qubits, outer input " + std::to_string(t2.n_in()));
  std::vector<CMatrix> ks;
  ks.reserve(t1.kraus().size() * t2.kraus().size());
  for (const CMatrix& k2 : t2.kraus())
    for (const CMatrix& k1 : t1.kraus()) ks.push_back(k2 * k1);
  // Compress through the Choi when the product list outgrows the rank bound.
  if (static_cast<Index>(ks.size()) > (Index{1} << (t1.n_in() + t2.n_out())))
    return SuperOperator::from_choi(t1.n_in(), t2.n_out(), choi_from_kraus(ks));
  return SuperOperator::from_kraus(std::move(ks));
}

SuperOperator measurement_channel(const std::vector<CMatrix>& projectors, bool record_outcome) {
  if (projectors.empty()) throw ValidationError("measurement_channel: empty family");
  const Index d = projectors.front().rows();
  const int n = qubit_count(d, "measurement_channel");
  CMatrix sum = CMatrix::Zero(d, d);
  for (const CMatrix& p : projectors) {
    if (p.rows() != d || p.cols() != d)
      throw ValidationError("measurement_channel: inconsistent projector shapes");
    if (!is_hermitian(p, tol::herm))
      throw ValidationError("measurement_channel: projector not Hermitian");
    if ((p * p - p).cwiseAbs().maxCoeff() > tol::tp)
      throw ValidationError("measurement_channel: operator is not a projector");
    sum += p;
  }
  if ((sum - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff() > tol::tp)
    throw ValidationError("measurement_channel: projectors do not sum to identity");

  if (!record_outcome) return SuperOperator::from_kraus(projectors);

  int extra = 0;
  while ((std::size_t{1} << extra) < projectors.size()) ++extra;
  require_register(n + extra, "measurement_channel output");
  const Index de = Index{1} << extra;
  std::vector<CMatrix> ks;
  for (std::size_t m = 0; m < projectors.size(); ++m) {
    CMatrix k = CMatrix::Zero(d * de, d);
    for (Index a = 0; a < d; ++a)
      for (Index i = 0; i < d; ++i) k(a * de + static_cast<Index>(m), i) = projectors[m](a, i);
    ks.push_back(std::move(k));
  }
  return SuperOperator::from_kraus(std::move(ks));
}

std::vector<CMatrix> basis_measurement_projectors(int n_qubits, const std::vector<int>& qubits) {
  const Index dim = Index{1} << n_qubits;
  for (int q : qubits)
    if (q < 0 || q >= n_qubits) throw ValidationError("basis_measurement_projectors: bad qubit");
  const int r = static_cast<int>(qubits.size());
  std::vector<CMatrix> ps(std::size_t{1} << r, CMatrix::Zero(dim, dim));
  for (Index x = 0; x < dim; ++x) {
    Index word = 0;
    for (int j = 0; j < r; ++j)
      if ((x >> (n_qubits - 1 - qubits[j])) & 1) word |= Index{1} << (r - 1 - j);
    ps[word](x, x) = 1.0;
  }
  return ps;
}

SuperOperator trace_out_channel(int n_qubits) {
  const Index d = Index{1} << n_qubits;
  std::vector<CMatrix> ks;
  ks.reserve(d);
  for (Index x = 0; x < d; ++x) {
    CMatrix k = CMatrix::Zero(1, d);
    k(0, x) = 1.0;
    ks.push_back(std::move(k));
  }
  return SuperOperator::from_kraus(std::move(ks));
}

UnitaryDilation dilate_to_unitary(const SuperOperator& t) {
  const int n = t.n_in(), m = t.n_out();
  const int total = n + m + std::max(n, m);
  require_register(total, "dilate_to_unitary");
  const Index d_total = Index{1} << total;
  const Index d_env = Index{1} << (total - m);
  const Index d_blank = Index{1} << (total - n);

  std::vector<CMatrix> kraus = kraus_decompose(t);

  // Isometry columns: V|i> = sum_k (K_k|i>) (x) |k> on the (out (x) env) space.
  CMatrix u = CMatrix::Zero(d_total, d_total);
  for (Index i = 0; i < t.d_in(); ++i) {
    CVector col = CVector::Zero(d_total);
    for (std::size_t k = 0; k < kraus.size(); ++k)
      for (Index a = 0; a < t.d_out(); ++a) col(a * d_env + static_cast<Index>(k)) = kraus[k](a, i);
    u.col(i * d_blank) = col;
  }

  // Complete with Gram-Schmidt over standard-basis candidates in index order.
  std::vector<Index> filled;
  for (Index i = 0; i < t.d_in(); ++i) filled.push_back(i * d_blank);
  Index candidate = 0;
  for (Index slot = 0; slot < d_total; ++slot) {
    if (std::find(filled.begin(), filled.end(), slot) != filled.end()) continue;
    while (true) {
      if (candidate >= d_total)
        throw ValidationError("dilate_to_unitary: basis completion exhausted candidates");
      CVector v = CVector::Unit(d_total, candidate++);
      for (int pass = 0; pass < 2; ++pass)
        for (Index f : filled) v -= u.col(f).dot(v) * u.col(f);
      const double residual = v.norm();
      if (residual > 1e-6) {
        u.col(slot) = v / residual;
        filled.push_back(slot);
        break;
      }
    }
  }

  UnitaryDilation d{t, std::move(u), total, total - n, total - m};
  if ((d.u.adjoint() * d.u - CMatrix::Identity(d_total, d_total)).cwiseAbs().maxCoeff() > tol::eig)
    throw ValidationError("dilate_to_unitary: completion is not unitary");
  SuperOperator realized = dilation_channel(d);
  if (trace_norm(realized.choi() - t.choi()) > 1e-9)
    throw ValidationError("dilate_to_unitary: reconstruction residual above 1e-9");
  return d;
}

SuperOperator dilation_channel(const UnitaryDilation& d) {
  const Index d_in = Index{1} << d.n_in();
  const Index d_out = Index{1} << d.n_out();
  const Index d_blank = Index{1} << d.blank_qubits;
  QubitIndexSet keep = QubitIndexSet::range(d.total_qubits, 0, d.n_out());
  CMatrix choi = CMatrix::Zero(d_in * d_out, d_in * d_out);
  for (Index i = 0; i < d_in; ++i)
    for (Index j = 0; j < d_in; ++j) {
      // U (E_ij (x) |0><0|) U^dagger is an outer product of two U columns.
      CMatrix big = d.u.col(i * d_blank) * d.u.col(j * d_blank).adjoint();
      CMatrix small = partial_trace(big, keep);
      for (Index a = 0; a < d_out; ++a)
        for (Index b = 0; b < d_out; ++b) choi(a * d_in + i, b * d_in + j) = small(a, b);
    }
  return SuperOperator::from_choi(d.n_in(), d.n_out(), std::move(choi));
}

SuperOperator random_cptp(int n_in, int n_out, std::uint64_t seed) {
  check_channel_register(n_in, n_out);
  const Index d_in = Index{1} << n_in, d_out = Index{1} << n_out;
  Rng rng(seed);
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::vector<CMatrix> ks;
    ks.reserve(d_in * d_out);
    for (Index k = 0; k < d_in * d_out; ++k)
      ks.push_back(random_gaussian_matrix(d_out, d_in, rng));
    CMatrix s = CMatrix::Zero(d_in, d_in);
    for (const CMatrix& k : ks) s.noalias() += k.adjoint() * k;
    HermEig eig = herm_eig(s);
    if (eig.values.minCoeff() < 1e-10 * eig.values.maxCoeff()) continue;  // resample
    CMatrix s_inv_sqrt = eig.vectors * eig.values.cwiseSqrt().cwiseInverse().asDiagonal() *
                         eig.vectors.adjoint();
    for (CMatrix& k : ks) k = k * s_inv_sqrt;
    return SuperOperator::from_kraus(std::move(ks));
  }
  throw ValidationError("random_cptp: degenerate Gaussian stack after 16 attempts");
}

}  // namespace qmix
