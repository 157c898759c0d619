#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qlif/ed.hpp"

using namespace qlif;

namespace {

std::vector<double> grid(double t_end, double step) {
  std::vector<double> t;
  for (long k = 0; k <= std::lround(t_end / step); ++k) t.push_back(k * step);
  return t;
}

}  // namespace

TEST(States, NeelAmplitudesForTwoSites) {
  const auto s = ed::neel_state(2);
  ASSERT_EQ(s.amplitudes.size(), 4);
  EXPECT_EQ(s.amplitudes(0), oracle::cplx(0));
  EXPECT_EQ(s.amplitudes(1), oracle::cplx(1));
  EXPECT_EQ(s.amplitudes(2), oracle::cplx(0));
  EXPECT_EQ(s.amplitudes(3), oracle::cplx(0));
}

TEST(States, ProductStateMatchesKronecker) {
  const std::vector<int> spins{1, 0, 0, 1, 1};
  EXPECT_LT((ed::product_state(spins).amplitudes - oracle::product(spins)).norm(), 1e-15);
  EXPECT_LT((ed::neel_state(6).amplitudes - oracle::neel(6)).norm(), 1e-15);
}

TEST(Capacity, RejectsChainsAboveCap) {
  EXPECT_THROW(ed::check_capacity(13, ed::kDefaultCapacity), CapacityError);
  EXPECT_NO_THROW(ed::check_capacity(12, ed::kDefaultCapacity));
  EXPECT_THROW(ed::Propagator(build_hamiltonian({13, 1.0, 0.8, 0.5})), CapacityError);
}

TEST(Apply, MatrixFreeProductMatchesDenseMatrix) {
  const auto op = build_hamiltonian({7, 1.0, 0.8, 0.5});
  const Eigen::MatrixXcd h = oracle::ising(7, 1.0, 0.8, 0.5);
  const Eigen::VectorXcd v = Eigen::VectorXcd::Random(128);
  EXPECT_LT((ed::apply(op, v) - h * v).norm(), 1e-12);
}

TEST(GroundState, TwoSiteChainAgainstExplicitFourByFour) {
  const double J = 1.0, B = 0.8, hz = 0.5;
  // Basis |uu>, |ud>, |du>, |dd>.
  Eigen::Matrix4d h;
  h << -J - 2 * hz, -B, -B, 0,
       -B, J, 0, -B,
       -B, 0, J, -B,
       0, -B, -B, -J + 2 * hz;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(h);
  const auto [e0, psi] = ed::ground_state_dense(build_hamiltonian({2, J, B, hz}));
  EXPECT_NEAR(e0, es.eigenvalues()(0), 1e-13);
  const double overlap = std::abs(psi.amplitudes.dot(es.eigenvectors().col(0).cast<oracle::cplx>()));
  EXPECT_NEAR(overlap, 1.0, 1e-12);
}

TEST(Propagator, EigenvectorsAreOrthonormal) {
  const ed::Propagator p(build_hamiltonian({9, 1.0, 0.8, 0.5}));
  const Eigen::MatrixXd& v = p.vectors_real();
  EXPECT_LT((v.transpose() * v - Eigen::MatrixXd::Identity(v.rows(), v.cols())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Propagator, TimeZeroReturnsInitialStateExactly) {
  const ed::Propagator p(build_hamiltonian({6, 1.0, 0.8, 0.5}));
  const auto psi0 = ed::neel_state(6);
  EXPECT_EQ(p.evolve(psi0, 0.0).amplitudes, psi0.amplitudes);
}

TEST(Propagator, AgreesWithRungeKutta) {
  const int L = 8;
  const ed::Propagator p(build_hamiltonian({L, 1.0, 0.8, 0.5}));
  const auto psi = p.evolve(ed::neel_state(L), 2.0);
  const Eigen::VectorXcd ref = oracle::rk4(oracle::ising(L, 1.0, 0.8, 0.5), oracle::neel(L), 2.0, 1e-3);
  const auto z = oracle::sz();
  const double ours = ed::single_site_expectation(psi, 4, z);
  const double theirs = (ref.adjoint() * oracle::embed(z, 4, L) * ref)(0, 0).real();
  EXPECT_NEAR(ours, theirs, 1e-6);
  EXPECT_LT((psi.amplitudes - ref).norm(), 1e-8);
}

TEST(Propagator, ComplexHamiltonianAgreesWithDenseExponential) {
  OperatorSum op = build_hamiltonian({5, 1.0, 0.8, 0.5});
  for (int i = 0; i < 5; ++i) op.add_site_term(i, 0.3 * pauli::y());
  const ed::Propagator p(op);
  ASSERT_TRUE(p.is_complex());
  Eigen::MatrixXcd h = oracle::ising(5, 1.0, 0.8, 0.5);
  for (int i = 0; i < 5; ++i) h += 0.3 * oracle::embed(oracle::sy(), i, 5);
  const Eigen::VectorXcd ref = oracle::expm(h, 1.3) * oracle::neel(5);
  EXPECT_LT((p.evolve(ed::neel_state(5), 1.3).amplitudes - ref).norm(), 1e-12);
}

TEST(Propagator, ConservesNormAndEnergy) {
  const auto op = build_hamiltonian({8, 1.0, 0.8, 0.5});
  const ed::Propagator p(op);
  const auto psi0 = ed::neel_state(8);
  const double e0 = ed::expectation(op, psi0);
  const auto times = grid(10.0, 0.5);
  for (const auto& s : p.evolve(psi0, times)) {
    EXPECT_NEAR(s.norm(), 1.0, 1e-12);
    EXPECT_NEAR(ed::expectation(op, s), e0, 1e-10);
  }
}

TEST(Propagator, EvolutionComposes) {
  const ed::Propagator p(build_hamiltonian({7, 1.0, 0.8, 0.5}));
  const auto psi0 = ed::neel_state(7);
  const auto direct = p.evolve(psi0, 1.7);
  const auto stepped = p.evolve(p.evolve(psi0, 0.6), 1.1);
  EXPECT_LT((direct.amplitudes - stepped.amplitudes).norm(), 1e-12);
}

TEST(ReducedDensity, MatchesFullDensityMatrixPartialTrace) {
  const int L = 6;
  const ed::Propagator p(build_hamiltonian({L, 1.0, 0.8, 0.5}));
  const auto psi = p.evolve(ed::neel_state(L), 1.4);
  for (int site = 0; site < L; ++site) {
    const Eigen::Matrix2cd ref = oracle::partial_trace(psi.amplitudes, site, L);
    EXPECT_LT((ed::reduce_single_site(psi, site).rho - ref).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(ed::von_neumann_entropy(ed::reduce_single_site(psi, site)), oracle::entropy(ref), 1e-12);
  }
}

TEST(Entropy, KnownValues) {
  ed::SingleSiteDensity mixed;
  EXPECT_NEAR(ed::von_neumann_entropy(mixed), std::log(2.0), 1e-15);
  ed::SingleSiteDensity pure;
  pure.rho << 1, 0, 0, 0;
  EXPECT_EQ(ed::von_neumann_entropy(pure), 0.0);
  ed::SingleSiteDensity bad;
  bad.rho << 1.1, 0, 0, -0.1;
  EXPECT_THROW(ed::von_neumann_entropy(bad), NumericalError);
}

TEST(Entropy, NearlyPureStatesKeepRelativePrecision) {
  // rho = diag(1 - eps, eps) rotated; exact S = -(1-eps)ln(1-eps) - eps ln eps.
  const double eps = 1e-13;
  const double th = 0.4;
  Eigen::Matrix2cd u;
  u << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  Eigen::Matrix2cd d = Eigen::Matrix2cd::Zero();
  d(0, 0) = 1.0 - eps;
  d(1, 1) = eps;
  ed::SingleSiteDensity rho;
  rho.rho = u * d * u.adjoint();
  const double exact = -(1 - eps) * std::log1p(-eps) - eps * std::log(eps);
  EXPECT_NEAR(ed::von_neumann_entropy(rho), exact, 1e-3 * exact);
}

namespace {

/// C(t) = 2 - 2 Re Tr(W(t) V W(t) V) / 2^L by explicit conjugation.
double otoc_reference(const Eigen::MatrixXcd& h, int L, int w, int v, double t) {
  const Eigen::MatrixXcd u = oracle::expm(h, t);
  const Eigen::MatrixXcd wt = u.adjoint() * oracle::embed(oracle::sz(), w, L) * u;
  const Eigen::MatrixXcd vz = oracle::embed(oracle::sz(), v, L);
  return 2.0 - 2.0 * (wt * vz * wt * vz).trace().real() / std::ldexp(1.0, L);
}

}  // namespace

TEST(Otoc, AllRoutesMatchExplicitConjugation) {
  const int L = 8;
  const HamiltonianSpec spec{L, 1.0, 0.8, 0.5};
  const ed::Propagator p(build_hamiltonian(spec));
  const Eigen::MatrixXcd h = oracle::ising(L, 1.0, 0.8, 0.5);
  const std::vector<double> times{0.0, 0.5, 1.3, 2.7};
  const std::vector<int> vs{1, 4, 7};
  const auto comp = ed::otoc(p, 2, vs, times, ed::OtocRoute::Computational);
  const auto eig = ed::otoc(p, 2, vs, times, ed::OtocRoute::Eigenbasis);
  for (std::size_t vi = 0; vi < vs.size(); ++vi)
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      const double ref = otoc_reference(h, L, 2, vs[vi], times[ti]);
      EXPECT_NEAR(comp.c[vi][ti], ref, 1e-8);
      EXPECT_NEAR(eig.c[vi][ti], ref, 1e-8);
    }
  EXPECT_LT(comp.max_imag, 1e-10);
}

TEST(Otoc, ComplexHamiltonianMatchesExplicitConjugation) {
  const int L = 5;
  OperatorSum op = build_hamiltonian({L, 1.0, 0.8, 0.5});
  Eigen::MatrixXcd h = oracle::ising(L, 1.0, 0.8, 0.5);
  for (int i = 0; i < L; ++i) {
    op.add_site_term(i, 0.2 * pauli::y());
    h += 0.2 * oracle::embed(oracle::sy(), i, L);
  }
  const ed::Propagator p(op);
  const std::vector<double> times{0.0, 0.9, 2.0};
  const std::vector<int> vs{3};
  const auto c = ed::otoc(p, 0, vs, times);
  for (std::size_t ti = 0; ti < times.size(); ++ti)
    EXPECT_NEAR(c.c[0][ti], otoc_reference(h, L, 0, 3, times[ti]), 1e-8);
}

TEST(Otoc, VanishesAtTimeZeroAndForDecoupledSites) {
  const int L = 6;
  const std::vector<double> times = grid(4.0, 0.5);
  const std::vector<int> vs{1, 3, 5};
  const auto chaotic = ed::otoc(ed::Propagator(build_hamiltonian({L, 1.0, 0.8, 0.5})), 0, vs, times);
  for (const auto& row : chaotic.c) EXPECT_NEAR(row.front(), 0.0, 1e-12);
  const auto decoupled = ed::otoc(ed::Propagator(build_hamiltonian({L, 0.0, 0.8, 0.5})), 0, vs, times);
  for (const auto& row : decoupled.c)
    for (double c : row) EXPECT_NEAR(c, 0.0, 1e-12);
}

TEST(Otoc, RejectsCoincidentSites) {
  const ed::Propagator p(build_hamiltonian({4, 1.0, 0.8, 0.5}));
  const std::vector<int> vs{2};
  const std::vector<double> t{0.0};
  EXPECT_THROW(ed::otoc(p, 2, vs, t), ValidationError);
}
