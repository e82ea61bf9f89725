#include "qmix/metrics.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace qmix {

double tvd(const RVector& p, const RVector& q) {
  if (p.size() != q.size()) throw ValidationError("tvd: distribution sizes differ");
  return (p - q).cwiseAbs().sum();
}

FunctionDistance function_distance(const ProbFunction& f, const ProbFunction& g) {
  if (f.m_bits != g.m_bits || f.p_bits != g.p_bits)
    throw ValidationError("function_distance: table shapes differ");
  FunctionDistance out;
  out.per_input.resize(f.rows());
  for (Index i = 0; i < f.rows(); ++i)
    out.per_input(i) = (f.table.row(i) - g.table.row(i)).cwiseAbs().sum();
  out.max = out.per_input.size() ? out.per_input.maxCoeff() : 0.0;
  return out;
}

double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.n_qubits() != sigma.n_qubits())
    throw ValidationError("trace_distance: register sizes differ");
  return trace_norm(rho.mat() - sigma.mat());
}

MeasurementTvd max_measurement_tvd(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.n_qubits() != sigma.n_qubits())
    throw ValidationError("max_measurement_tvd: register sizes differ");
  HermEig eig = herm_eig(rho.mat() - sigma.mat());
  MeasurementTvd out;
  RVector p(eig.values.size()), q(eig.values.size());
  for (Index i = 0; i < eig.values.size(); ++i) {
    CVector v = eig.vectors.col(i);
    out.projectors.push_back(v * v.adjoint());
    p(i) = std::real((v.adjoint() * rho.mat() * v)(0, 0));
    q(i) = std::real((v.adjoint() * sigma.mat() * v)(0, 0));
  }
  out.value = tvd(p, q);
  return out;
}

HermMap HermMap::make(int n_in, int n_out, CMatrix choi) {
  require_register(n_in, "HermMap input");
  require_register(n_out, "HermMap output");
  const Index d = (Index{1} << n_in) * (Index{1} << n_out);
  if (choi.rows() != d || choi.cols() != d)
    throw ValidationError("HermMap: Choi matrix has wrong dimension");
  if (!is_hermitian(choi, tol::herm))
    throw ValidationError("HermMap: Choi matrix not Hermitian (map is not Hermitian-preserving)");
  return HermMap{n_in, n_out, std::move(choi)};
}

HermMap HermMap::from(const SuperOperator& t) { return make(t.n_in(), t.n_out(), t.choi()); }

HermMap HermMap::delta(const SuperOperator& a, const SuperOperator& b) {
  if (a.n_in() != b.n_in() || a.n_out() != b.n_out())
    throw ValidationError("HermMap::delta: channel shapes differ");
  return make(a.n_in(), a.n_out(), a.choi() - b.choi());
}

namespace {

// Signed spectral Kraus terms of a Hermitian Choi: T(X) = sum_k c_k L_k X L_k†.
std::vector<std::pair<double, CMatrix>> signed_terms(const HermMap& t) {
  HermEig eig = herm_eig(t.choi);
  std::vector<std::pair<double, CMatrix>> terms;
  const Index d_in = Index{1} << t.n_in, d_out = Index{1} << t.n_out;
  for (Index k = 0; k < eig.values.size(); ++k) {
    if (std::abs(eig.values(k)) < 1e-14) continue;
    terms.emplace_back(eig.values(k), unvec_kraus(eig.vectors.col(k), d_out, d_in));
  }
  if (terms.empty()) terms.emplace_back(0.0, CMatrix::Zero(d_out, d_in));
  return terms;
}

std::vector<std::pair<double, CMatrix>> adjoint_terms(
    const std::vector<std::pair<double, CMatrix>>& terms) {
  std::vector<std::pair<double, CMatrix>> adj;
  adj.reserve(terms.size());
  for (const auto& [c, l] : terms) adj.emplace_back(c, l.adjoint());
  return adj;
}

CVector random_unit_vector(Index dim, Rng& rng) {
  CVector v(dim);
  for (Index i = 0; i < dim; ++i) v(i) = rng.gaussian_complex();
  return v / v.norm();
}

}  // namespace

CMatrix apply_herm(const HermMap& t, const CMatrix& x) {
  const Index d_in = Index{1} << t.n_in;
  if (x.rows() != d_in || x.cols() != d_in) throw ValidationError("apply_herm: dimension mismatch");
  return apply_on_prefix(signed_terms(t), x, 0);
}

HermMap herm_tensor(const HermMap& a, const HermMap& b) {
  const Index ai = Index{1} << a.n_in, ao = Index{1} << a.n_out;
  const Index bi = Index{1} << b.n_in, bo = Index{1} << b.n_out;
  const Index d = ai * bi * ao * bo;
  CMatrix choi = CMatrix::Zero(d, d);
  auto row_of = [&](Index oa, Index ob, Index ia, Index ib) {
    return ((oa * bo + ob) * ai + ia) * bi + ib;
  };
  for (Index oa = 0; oa < ao; ++oa)
    for (Index ia = 0; ia < ai; ++ia)
      for (Index oa2 = 0; oa2 < ao; ++oa2)
        for (Index ia2 = 0; ia2 < ai; ++ia2) {
          const Complex va = a.choi(oa * ai + ia, oa2 * ai + ia2);
          if (va == Complex(0, 0)) continue;
          for (Index ob = 0; ob < bo; ++ob)
            for (Index ib = 0; ib < bi; ++ib)
              for (Index ob2 = 0; ob2 < bo; ++ob2)
                for (Index ib2 = 0; ib2 < bi; ++ib2)
                  choi(row_of(oa, ob, ia, ib), row_of(oa2, ob2, ia2, ib2)) =
                      va * b.choi(ob * bi + ib, ob2 * bi + ib2);
        }
  return HermMap::make(a.n_in + b.n_in, a.n_out + b.n_out, std::move(choi));
}

HermMap transpose_map(int n_qubits) {
  const Index d = Index{1} << n_qubits;
  CMatrix choi = CMatrix::Zero(d * d, d * d);
  // T(E_ij) = E_ji, so J[(j,i),(i... J = sum_ij E_ji (x) E_ij: the swap operator.
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) choi(j * d + i, i * d + j) = 1.0;
  return HermMap::make(n_qubits, n_qubits, std::move(choi));
}

namespace {

struct AscentResult {
  double value = 0.0;
  CVector witness;
};

// One restart of the alternating ascent for || (T (x) I)(|xi><xi|) ||_1.
AscentResult diamond_ascent(const std::vector<std::pair<double, CMatrix>>& terms,
                            const std::vector<std::pair<double, CMatrix>>& adj, int n_in,
                            CVector xi, double inner_tol, int max_iters) {
  double f_prev = -1.0;
  for (int iter = 0; iter < max_iters; ++iter) {
    CMatrix m = apply_on_prefix(terms, xi * xi.adjoint(), n_in);
    HermEig em = herm_eig(m);
    const double f = em.values.cwiseAbs().sum();
    if (f - f_prev <= inner_tol && iter > 0) break;
    f_prev = f;
    RVector sign = em.values.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
    CMatrix s = em.vectors * sign.asDiagonal() * em.vectors.adjoint();
    CMatrix g = apply_on_prefix(adj, s, n_in);
    xi = herm_eig(g).vectors.col(0);
  }
  CMatrix m = apply_on_prefix(terms, xi * xi.adjoint(), n_in);
  return {trace_norm(m), std::move(xi)};
}

}  // namespace

DiamondResult diamond_norm(const HermMap& t, const DiamondOptions& opts) {
  if (t.n_in > 4)
    throw ResourceError("diamond_norm: input register of " + std::to_string(t.n_in) +
                        " qubits exceeds the 4-qubit cap");
  const Index d_in = Index{1} << t.n_in;
  auto terms = signed_terms(t);
  auto adj = adjoint_terms(terms);
  const double inner_tol = std::max(opts.tol * 1e-3, 1e-13);

  DiamondResult out;
  out.restarts_used = opts.restarts;
  double worst = 0.0;
  Rng master(opts.seed);
  for (int r = 0; r < opts.restarts; ++r) {
    Rng rng = master.fork(static_cast<std::uint64_t>(r));
    AscentResult res = diamond_ascent(terms, adj, t.n_in, random_unit_vector(d_in * d_in, rng),
                                      inner_tol, opts.max_iters);
    if (r == 0 || res.value < worst) worst = res.value;
    if (r == 0 || res.value > out.value) {
      out.value = res.value;
      out.witness = res.witness;
    }
  }
  out.spread = out.value - worst;
  return out;
}

DiamondResult diamond_norm(const SuperOperator& t, const DiamondOptions& opts) {
  return diamond_norm(HermMap::from(t), opts);
}

double naive_norm_estimate(const HermMap& t, const DiamondOptions& opts) {
  if (t.n_in > 4) throw ResourceError("naive_norm_estimate: input over the 4-qubit cap");
  const Index d_in = Index{1} << t.n_in;
  auto terms = signed_terms(t);
  const double inner_tol = std::max(opts.tol * 1e-3, 1e-13);

  double best = 0.0;
  Rng master(opts.seed);
  for (int r = 0; r < opts.restarts; ++r) {
    Rng rng = master.fork(0x7000 + static_cast<std::uint64_t>(r));
    CVector u = random_unit_vector(d_in, rng);
    CVector v = random_unit_vector(d_in, rng);
    double f_prev = -1.0, f = 0.0;
    for (int iter = 0; iter < opts.max_iters; ++iter) {
      CMatrix m = CMatrix::Zero(terms.front().second.rows(), terms.front().second.rows());
      for (const auto& [c, l] : terms) m.noalias() += c * (l * u) * (l * v).adjoint();
      Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
      f = svd.singularValues().sum();
      if (f - f_prev <= inner_tol && iter > 0) break;
      f_prev = f;
      CMatrix s = svd.matrixV() * svd.matrixU().adjoint();
      CMatrix g = CMatrix::Zero(d_in, d_in);
      for (const auto& [c, l] : terms) g.noalias() += c * l.adjoint() * s * l;
      // f = <v| G |u> for fixed subgradient; the top singular pair maximizes it.
      Eigen::JacobiSVD<CMatrix> gsvd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
      u = gsvd.matrixV().col(0);
      v = gsvd.matrixU().col(0);
    }
    best = std::max(best, f);
  }
  return best;
}

double origin_to_hull_distance(const std::vector<Complex>& points) {
  if (points.empty()) throw ValidationError("origin_to_hull_distance: no points");
  auto support_min = [&](Complex u) {
    double m = std::numeric_limits<double>::infinity();
    for (Complex z : points) m = std::min(m, z.real() * u.real() + z.imag() * u.imag());
    return m;
  };
  double best = 0.0;
  for (Complex z : points) {
    const double r = std::abs(z);
    if (r > 1e-15) best = std::max(best, support_min(z / r));
  }
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      Complex edge = points[j] - points[i];
      const double len = std::abs(edge);
      if (len < 1e-15) continue;
      const Complex normal = Complex(0, 1) * (edge / len);
      best = std::max(best, support_min(normal));
      best = std::max(best, support_min(-normal));
    }
  return std::max(best, 0.0);
}

double unitary_pair_diamond(const CMatrix& v, const CMatrix& w) {
  if (v.rows() != v.cols() || w.rows() != w.cols() || v.rows() != w.rows())
    throw ValidationError("unitary_pair_diamond: shapes differ");
  const Index d = v.rows();
  if ((v.adjoint() * v - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff() > tol::eig ||
      (w.adjoint() * w - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff() > tol::eig)
    throw ValidationError("unitary_pair_diamond: inputs must be unitary");
  Eigen::ComplexEigenSolver<CMatrix> solver(v * w.adjoint());
  std::vector<Complex> eigs(solver.eigenvalues().data(),
                            solver.eigenvalues().data() + solver.eigenvalues().size());
  const double dist = std::min(origin_to_hull_distance(eigs), 1.0);
  return 2.0 * std::sqrt(1.0 - dist * dist);
}

ProbFunction channel_prob_function(const SuperOperator& t) {
  const Index d_in = t.d_in(), d_out = t.d_out();
  Eigen::MatrixXd table(d_in, d_out);
  for (Index i = 0; i < d_in; ++i) {
    CMatrix e = CMatrix::Zero(d_in, d_in);
    e(i, i) = 1.0;
    RVector diag = apply_matrix(t, e).diagonal().real();
    table.row(i) = diag.cwiseMax(0.0).transpose();
    table.row(i) /= table.row(i).sum();
  }
  return ProbFunction::make(t.n_in(), t.n_out(), std::move(table));
}

AccumulationReport verify_error_accumulation(
    const std::vector<std::pair<SuperOperator, SuperOperator>>& ideal_and_perturbed, double tol,
    const DiamondOptions& opts) {
  if (ideal_and_perturbed.empty())
    throw ValidationError("verify_error_accumulation: empty chain");
  AccumulationReport report;
  report.ok = true;

  auto pair_diamond = [&](const SuperOperator& a, const SuperOperator& b,
                          bool* exact) -> double {
    if (a.is_unitary_channel() && b.is_unitary_channel()) {
      if (exact) *exact = true;
      return unitary_pair_diamond(a.kraus().front(), b.kraus().front());
    }
    if (exact) *exact = false;
    return diamond_norm(HermMap::delta(a, b), opts).value;
  };

  double eps_sum = 0.0;
  SuperOperator ideal = ideal_and_perturbed.front().first;
  SuperOperator perturbed = ideal_and_perturbed.front().second;
  for (std::size_t j = 0; j < ideal_and_perturbed.size(); ++j) {
    const auto& [tj, tjp] = ideal_and_perturbed[j];
    if (j > 0) {
      ideal = compose(tj, ideal);
      perturbed = compose(tjp, perturbed);
    }
    AccumulationStep step;
    step.eps = pair_diamond(tj, tjp, &step.eps_exact);
    eps_sum += step.eps;
    step.prefix_delta = pair_diamond(ideal, perturbed, nullptr);
    step.prefix_bound = eps_sum;
    step.ok = step.prefix_delta <= step.prefix_bound + tol;
    report.ok = report.ok && step.ok;
    report.steps.push_back(step);
  }

  report.function_error =
      function_distance(channel_prob_function(perturbed), channel_prob_function(ideal)).max;
  report.function_bound = eps_sum;
  report.ok = report.ok && report.function_error <= report.function_bound + tol;
  return report;
}

SubroutineErrorReport verify_subroutine_error(const ProbFunction& f, const ProbFunction& fp,
                                              double tol, const DiamondOptions& opts) {
  SubroutineErrorReport report;
  report.function_dist = function_distance(f, fp).max;
  report.lhs = diamond_norm(HermMap::delta(subroutine_gate(fp), subroutine_gate(f)), opts).value;
  report.rhs = 5.0 * report.function_dist;
  report.ok = report.lhs <= report.rhs + tol;
  return report;
}

}  // namespace qmix
