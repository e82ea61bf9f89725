#include "qmix/channels.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace qmix;
using qtest::max_abs;

namespace {

CMatrix pauli_x() {
  CMatrix x(2, 2);
  x << 0, 1, 1, 0;
  return x;
}

CMatrix pauli_z() {
  CMatrix z(2, 2);
  z << 1, 0, 0, -1;
  return z;
}

CMatrix hadamard() {
  CMatrix h(2, 2);
  const double s = 1.0 / std::sqrt(2.0);
  h << s, s, s, -s;
  return h;
}

TEST(FromUnitary, IdentityChannel) {
  std::mt19937_64 rng(31);
  SuperOperator id = SuperOperator::identity(2);
  DensityMatrix rho = qtest::random_density(2, rng);
  EXPECT_MATRIX_NEAR(apply(id, rho).mat(), rho.mat(), 1e-12);
}

TEST(FromUnitary, BitFlip) {
  SuperOperator x = SuperOperator::from_unitary(pauli_x());
  DensityMatrix rho = basis_state("0");
  CMatrix want(2, 2);
  want << 0, 0, 0, 1;
  EXPECT_MATRIX_NEAR(apply(x, rho).mat(), want, 1e-15);
}

TEST(FromUnitary, HadamardOnZero) {
  // H|0><0|H by hand: every entry 1/2.
  SuperOperator h = SuperOperator::from_unitary(hadamard());
  EXPECT_MATRIX_NEAR(apply(h, basis_state("0")).mat(), CMatrix::Constant(2, 2, 0.5), 1e-12);
}

TEST(FromUnitary, RejectsNonUnitary) {
  CMatrix m = CMatrix::Identity(2, 2) * 2.0;
  EXPECT_THROW(SuperOperator::from_unitary(m), ValidationError);
  EXPECT_THROW(SuperOperator::from_unitary(CMatrix::Identity(3, 3)), ValidationError);
}

TEST(FromKraus, IdentityList) {
  SuperOperator t = SuperOperator::from_kraus({CMatrix::Identity(2, 2)});
  EXPECT_MATRIX_NEAR(t.choi(), SuperOperator::identity(1).choi(), 1e-15);
}

TEST(FromKraus, FullDephasing) {
  // (1/2) rho + (1/2) Z rho Z zeroes the off-diagonal entries.
  const double s = 1.0 / std::sqrt(2.0);
  SuperOperator t = SuperOperator::from_kraus({s * CMatrix::Identity(2, 2), s * pauli_z()});
  std::mt19937_64 rng(32);
  CMatrix rho = qtest::random_density(1, rng).mat();
  CMatrix got = apply_matrix(t, rho);
  CMatrix want = rho;
  want(0, 1) = want(1, 0) = 0;
  EXPECT_MATRIX_NEAR(got, want, 1e-14);
  EXPECT_EQ(kraus_decompose(t).size(), 2u);
}

TEST(FromKraus, ProjectorPairEqualsBasicMeasurementChannel) {
  CMatrix p0 = CMatrix::Zero(2, 2), p1 = CMatrix::Zero(2, 2);
  p0(0, 0) = 1;
  p1(1, 1) = 1;
  SuperOperator via_kraus = SuperOperator::from_kraus({p0, p1});
  SuperOperator via_measurement = measurement_channel({p0, p1}, /*record_outcome=*/false);
  EXPECT_MATRIX_NEAR(via_kraus.choi(), via_measurement.choi(), 1e-15);
}

TEST(FromKraus, RejectsNonTracePreserving) {
  EXPECT_THROW(SuperOperator::from_kraus({0.5 * CMatrix::Identity(2, 2)}), ValidationError);
}

TEST(FromChoi, RejectsNonPositive) {
  // A Hermitian Choi with a negative eigenvalue is not completely positive.
  CMatrix j = SuperOperator::identity(1).choi();
  j(1, 1) = 0.5;
  j(2, 2) = -0.5;
  EXPECT_THROW(SuperOperator::from_choi(1, 1, j), ValidationError);
}

TEST(Apply, TraceOutSecondQubitOfProduct) {
  std::mt19937_64 rng(33);
  CMatrix rho_a = qtest::random_density(1, rng).mat();
  CMatrix rho_b = qtest::random_density(1, rng).mat();
  // Keep-first channel: Kraus I (x) <x|.
  std::vector<CMatrix> ks;
  for (Index x = 0; x < 2; ++x) {
    CMatrix bra = CMatrix::Zero(1, 2);
    bra(0, x) = 1;
    ks.push_back(kron(CMatrix::Identity(2, 2), bra));
  }
  SuperOperator keep_first = SuperOperator::from_kraus(ks);
  DensityMatrix joint = DensityMatrix::make(kron(rho_a, rho_b));
  EXPECT_MATRIX_NEAR(apply(keep_first, joint).mat(), rho_a, 1e-12);
}

TEST(Apply, LinearOverMixtures) {
  std::mt19937_64 rng(34);
  SuperOperator t = random_cptp(2, 1, 77);
  CMatrix r1 = qtest::random_density(2, rng).mat();
  CMatrix r2 = qtest::random_density(2, rng).mat();
  const double p = 0.3;
  CMatrix lhs = apply_matrix(t, p * r1 + (1 - p) * r2);
  CMatrix rhs = p * apply_matrix(t, r1) + (1 - p) * apply_matrix(t, r2);
  EXPECT_MATRIX_NEAR(lhs, rhs, 1e-12);
}

TEST(Apply, DimensionMismatchThrows) {
  SuperOperator t = SuperOperator::identity(1);
  EXPECT_THROW(apply(t, basis_state("00")), ValidationError);
}

TEST(Extend, IdentityGrows) {
  SuperOperator t = extend(SuperOperator::identity(1), 1, ExtendPosition::after);
  EXPECT_MATRIX_NEAR(t.choi(), SuperOperator::identity(2).choi(), 1e-14);
}

TEST(Extend, UnitaryCase) {
  SuperOperator lhs = extend(SuperOperator::from_unitary(hadamard()), 1, ExtendPosition::after);
  SuperOperator rhs = SuperOperator::from_unitary(kron(hadamard(), CMatrix::Identity(2, 2)));
  EXPECT_MATRIX_NEAR(lhs.choi(), rhs.choi(), 1e-14);
}

TEST(Extend, ProductInputFactorizes) {
  std::mt19937_64 rng(35);
  SuperOperator t = random_cptp(1, 1, 55);
  CMatrix rho_a = qtest::random_density(1, rng).mat();
  CMatrix rho_b = qtest::random_density(1, rng).mat();
  CMatrix got = apply_matrix(extend(t, 1, ExtendPosition::after), kron(rho_a, rho_b));
  CMatrix want = kron(apply_matrix(t, rho_a), rho_b);
  EXPECT_MATRIX_NEAR(got, want, 1e-12);
  CMatrix got_before = apply_matrix(extend(t, 1, ExtendPosition::before), kron(rho_b, rho_a));
  EXPECT_MATRIX_NEAR(got_before, kron(rho_b, apply_matrix(t, rho_a)), 1e-12);
}

TEST(Compose, IdentityIsNeutral) {
  SuperOperator t = random_cptp(1, 1, 99);
  EXPECT_MATRIX_NEAR(compose(t, SuperOperator::identity(1)).choi(), t.choi(), 1e-12);
  EXPECT_MATRIX_NEAR(compose(SuperOperator::identity(1), t).choi(), t.choi(), 1e-12);
}

TEST(Compose, UnitaryProduct) {
  std::mt19937_64 rng(36);
  CMatrix u = qtest::random_unitary(4, rng);
  CMatrix v = qtest::random_unitary(4, rng);
  SuperOperator lhs = compose(SuperOperator::from_unitary(u), SuperOperator::from_unitary(v));
  SuperOperator rhs = SuperOperator::from_unitary(u * v);
  EXPECT_MATRIX_NEAR(lhs.choi(), rhs.choi(), 1e-12);
}

TEST(Compose, MatchesSequentialApplication) {
  std::mt19937_64 rng(37);
  SuperOperator t1 = random_cptp(1, 2, 11);
  SuperOperator t2 = random_cptp(2, 1, 12);
  SuperOperator both = compose(t2, t1);
  for (int rep = 0; rep < 5; ++rep) {
    CMatrix rho = qtest::random_density(1, rng).mat();
    EXPECT_MATRIX_NEAR(apply_matrix(both, rho), apply_matrix(t2, apply_matrix(t1, rho)), 1e-10);
  }
}

TEST(Compose, ChoiMatchesKrausProductConstruction) {
  // Two independent routes to the composite: Kraus products assembled here by
  // hand vs the library composition.
  SuperOperator t1 = random_cptp(1, 1, 21);
  SuperOperator t2 = random_cptp(1, 1, 22);
  std::vector<CMatrix> products;
  for (const CMatrix& k2 : t2.kraus())
    for (const CMatrix& k1 : t1.kraus()) products.push_back(k2 * k1);
  EXPECT_MATRIX_NEAR(compose(t2, t1).choi(), choi_from_kraus(products), 1e-12);
}

TEST(MeasurementChannel, PlusStateBasicMeasurement) {
  // P0 rho P0 + P1 rho P1 on |+><+| by hand: diag(1/2, 1/2), and the recorded
  // outcome register carries the same distribution.
  std::vector<CMatrix> ps = basis_measurement_projectors(1, {0});
  SuperOperator t = measurement_channel(ps, /*record_outcome=*/true);
  EXPECT_EQ(t.n_out(), 2);
  const double s = 1.0 / std::sqrt(2.0);
  CVector plus(2);
  plus << s, s;
  CMatrix out = apply_matrix(t, plus * plus.adjoint());
  CMatrix want = CMatrix::Zero(4, 4);
  want(0, 0) = 0.5;  // state |0>, outcome 0
  want(3, 3) = 0.5;  // state |1>, outcome 1
  EXPECT_MATRIX_NEAR(out, want, 1e-14);
}

TEST(MeasurementChannel, DiagonalIsFixedPoint) {
  CMatrix rho = CMatrix::Zero(2, 2);
  rho(0, 0) = 0.3;
  rho(1, 1) = 0.7;
  SuperOperator t = measurement_channel(basis_measurement_projectors(1, {0}), false);
  EXPECT_MATRIX_NEAR(apply_matrix(t, rho), rho, 1e-15);
}

TEST(MeasurementChannel, Idempotent) {
  SuperOperator t = measurement_channel(basis_measurement_projectors(2, {0, 1}), false);
  EXPECT_MATRIX_NEAR(compose(t, t).choi(), t.choi(), 1e-12);
}

TEST(MeasurementChannel, RejectsBadFamilies) {
  CMatrix p0 = CMatrix::Zero(2, 2);
  p0(0, 0) = 1;
  EXPECT_THROW(measurement_channel({p0}, false), ValidationError);  // incomplete
  CMatrix half = CMatrix::Identity(2, 2) * 0.5;
  EXPECT_THROW(measurement_channel({half, half}, false), ValidationError);  // not projectors
}

TEST(KrausCache, InvariantsHoldOnBothConstructionRoutes) {
  // Sum K†K = I and the Choi rebuilt from the cache matches, whether the
  // cache came from the caller (from_kraus) or from the spectral split
  // (from_choi).
  SuperOperator via_kraus = random_cptp(1, 2, 321);
  SuperOperator via_choi = SuperOperator::from_choi(1, 2, via_kraus.choi());
  for (const SuperOperator* t : {&via_kraus, &via_choi}) {
    CMatrix sum = CMatrix::Zero(t->d_in(), t->d_in());
    for (const CMatrix& k : t->kraus()) sum += k.adjoint() * k;
    EXPECT_LE(max_abs(sum - CMatrix::Identity(t->d_in(), t->d_in())), tol::tp);
    EXPECT_LE(trace_norm(choi_from_kraus(t->kraus()) - t->choi()), 1e-9);
  }
}

TEST(KrausDecompose, UnitaryHasOneOperator) {
  SuperOperator t = SuperOperator::from_unitary(hadamard());
  auto ks = kraus_decompose(t);
  ASSERT_EQ(ks.size(), 1u);
  EXPECT_MATRIX_NEAR(choi_from_kraus(ks), t.choi(), 1e-12);
}

TEST(KrausDecompose, RoundTrip) {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    SuperOperator t = random_cptp(1, 2, seed);
    SuperOperator back = SuperOperator::from_kraus(kraus_decompose(t));
    EXPECT_LE(trace_norm(back.choi() - t.choi()), 1e-9);
  }
}

TEST(RandomCptp, ValidAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SuperOperator t = random_cptp(seed % 2 ? 1 : 2, seed % 3 ? 1 : 2, seed);
    // Constructors validate CPTP; spot-check trace preservation on a state.
    std::mt19937_64 rng(seed);
    CMatrix rho = qtest::random_density(t.n_in(), rng).mat();
    EXPECT_NEAR(apply_matrix(t, rho).trace().real(), 1.0, 1e-10);
  }
}

TEST(RandomCptp, SeedStability) {
  SuperOperator a = random_cptp(1, 1, 42);
  SuperOperator b = random_cptp(1, 1, 42);
  EXPECT_EQ(max_abs(a.choi() - b.choi()), 0.0);
}

TEST(RandomCptp, ZeroQubitEdge) {
  SuperOperator t = random_cptp(0, 0, 7);
  ASSERT_EQ(t.choi().rows(), 1);
  EXPECT_NEAR(std::abs(t.choi()(0, 0) - 1.0), 0.0, 1e-12);
}

TEST(Dilation, UnitaryChannel) {
  SuperOperator t = SuperOperator::from_unitary(hadamard());
  UnitaryDilation d = dilate_to_unitary(t);
  EXPECT_EQ(d.total_qubits, 3);
  EXPECT_EQ(d.blank_qubits, 2);
  EXPECT_EQ(d.env_qubits, 2);
  EXPECT_LE(trace_norm(dilation_channel(d).choi() - t.choi()), 1e-9);
}

TEST(Dilation, ResetChannel) {
  // Trace out then replace with |0>: Kraus |0><x|.
  CMatrix k0 = CMatrix::Zero(2, 2), k1 = CMatrix::Zero(2, 2);
  k0(0, 0) = 1;
  k1(0, 1) = 1;
  SuperOperator reset = SuperOperator::from_kraus({k0, k1});
  UnitaryDilation d = dilate_to_unitary(reset);
  EXPECT_LE(trace_norm(dilation_channel(d).choi() - reset.choi()), 1e-9);
}

TEST(Dilation, RandomChannelsAllShapes) {
  struct Shape {
    int n, m;
  };
  for (Shape s : {Shape{1, 1}, Shape{1, 2}, Shape{2, 1}}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      SuperOperator t = random_cptp(s.n, s.m, 1000 + seed);
      UnitaryDilation d = dilate_to_unitary(t);
      const Index dim = Index{1} << d.total_qubits;
      EXPECT_LE(max_abs(d.u.adjoint() * d.u - CMatrix::Identity(dim, dim)), 1e-9);
      EXPECT_LE(trace_norm(dilation_channel(d).choi() - t.choi()), 1e-9);
      EXPECT_EQ(d.total_qubits, s.n + s.m + std::max(s.n, s.m));
    }
  }
}

TEST(Dilation, ReconstructionOnStates) {
  std::mt19937_64 rng(38);
  SuperOperator t = random_cptp(1, 1, 5);
  UnitaryDilation d = dilate_to_unitary(t);
  for (int rep = 0; rep < 5; ++rep) {
    CMatrix rho = qtest::random_density(1, rng).mat();
    CMatrix blanks = CMatrix::Zero(Index{1} << d.blank_qubits, Index{1} << d.blank_qubits);
    blanks(0, 0) = 1;
    CMatrix big = d.u * kron(rho, blanks) * d.u.adjoint();
    CMatrix kept = partial_trace(big, QubitIndexSet::range(d.total_qubits, 0, d.n_out()));
    EXPECT_MATRIX_NEAR(kept, apply_matrix(t, rho), 1e-9);
  }
}

TEST(Dilation, Deterministic) {
  SuperOperator t = random_cptp(1, 1, 9);
  EXPECT_EQ(max_abs(dilate_to_unitary(t).u - dilate_to_unitary(t).u), 0.0);
}

TEST(DisjointGates, Commute) {
  std::mt19937_64 rng(39);
  SuperOperator g1 = random_cptp(1, 1, 61);
  SuperOperator g2 = random_cptp(1, 1, 62);
  SuperOperator first_then_second =
      compose(extend(g2, 1, ExtendPosition::before), extend(g1, 1, ExtendPosition::after));
  SuperOperator second_then_first =
      compose(extend(g1, 1, ExtendPosition::after), extend(g2, 1, ExtendPosition::before));
  for (int rep = 0; rep < 5; ++rep) {
    CMatrix rho = qtest::random_density(2, rng).mat();
    EXPECT_MATRIX_NEAR(apply_matrix(first_then_second, rho),
                       apply_matrix(second_then_first, rho), 1e-11);
  }
}

TEST(Contractivity, TraceDistanceNeverGrows) {
  std::mt19937_64 rng(40);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SuperOperator t = random_cptp(2, 1, 200 + seed);
    CMatrix a = qtest::random_density(2, rng).mat();
    CMatrix b = qtest::random_density(2, rng).mat();
    EXPECT_LE(trace_norm(apply_matrix(t, a) - apply_matrix(t, b)), trace_norm(a - b) + 1e-9);
  }
}

}  // namespace
