#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qlif/dmrg.hpp"
#include "qlif/ed.hpp"
#include "qlif/mps.hpp"
#include "qlif/tebd.hpp"

using namespace qlif;

namespace {

ed::StateVector random_state(int L, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(Eigen::Index(1) << L);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = {g(rng), g(rng)};
  return {L, v.normalized()};
}

double overlap_abs(const ed::StateVector& a, const ed::StateVector& b) {
  return std::abs(a.amplitudes.dot(b.amplitudes));
}

/// Dense Trotter step  exp(-i H_odd dt/2) exp(-i H_even dt) exp(-i H_odd dt/2)
/// with fields split half-and-half between neighboring bonds (edge sites put
/// their whole field on their only bond).
Eigen::MatrixXcd dense_trotter_step(int L, double J, double B, double hz, int frozen, double dt) {
  const Eigen::Index D = Eigen::Index(1) << L;
  Eigen::MatrixXcd layer[2] = {Eigen::MatrixXcd::Zero(D, D), Eigen::MatrixXcd::Zero(D, D)};
  auto field = [&](int i) -> Eigen::MatrixXcd {
    if (i == frozen) return Eigen::MatrixXcd::Zero(D, D);
    return -B * oracle::embed(oracle::sx(), i, L) - hz * oracle::embed(oracle::sz(), i, L);
  };
  for (int b = 0; b + 1 < L; ++b) {
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(D, D);
    if (b != frozen && b + 1 != frozen) h -= J * oracle::embed(oracle::sz(), b, L) * oracle::embed(oracle::sz(), b + 1, L);
    h += (b == 0 ? 1.0 : 0.5) * field(b);
    h += (b + 1 == L - 1 ? 1.0 : 0.5) * field(b + 1);
    layer[b % 2] += h;
  }
  const Eigen::MatrixXcd half = oracle::expm(layer[1], dt / 2);
  return half * oracle::expm(layer[0], dt) * half;
}

}  // namespace

TEST(BlochEntropy, MatchesEigendecompositionOverGrid) {
  for (int i = 0; i < 1000; ++i) {
    const double r = i / 999.0;
    const double th = 0.37 * i, ph = 1.13 * i;
    const mps::BlochVector b{r * std::sin(th) * std::cos(ph), r * std::sin(th) * std::sin(ph), r * std::cos(th)};
    EXPECT_NEAR(mps::bloch_entropy(b), oracle::entropy(b.density()), 1e-10) << "r=" << r;
  }
}

TEST(BlochEntropy, EndPoints) {
  EXPECT_EQ(mps::bloch_entropy({0, 0, 1}), 0.0);
  EXPECT_NEAR(mps::bloch_entropy({0, 0, 0}), std::log(2.0), 1e-15);
  EXPECT_EQ(mps::bloch_entropy({0, 0, 1.0 + 1e-14}), 0.0);
}

TEST(MPSState, ProductStatesContractToDenseProducts) {
  EXPECT_NEAR(overlap_abs(mps::contract_to_dense(mps::neel_mps(7)), ed::neel_state(7)), 1.0, 1e-15);
  EXPECT_NEAR(overlap_abs(mps::contract_to_dense(mps::all_up_mps(5)), ed::all_up_state(5)), 1.0, 1e-15);
  const std::vector<mps::BlochDirection> dirs{{1, 0, 0}, {0, 1, 0}, {0, 0, -1}};
  const auto dense = mps::contract_to_dense(mps::mps_from_product(dirs));
  const double s = 1.0 / std::sqrt(2.0);
  oracle::Vec px(2), py(2), dn(2);
  px << s, s;
  py << s, oracle::cplx(0, s);
  dn << 0, 1;
  const oracle::Vec ref = oracle::kron(oracle::kron(px, py), dn).col(0);
  EXPECT_NEAR(std::abs(dense.amplitudes.dot(ref)), 1.0, 1e-14);
}

TEST(MPSState, DenseRoundTripWithoutTruncation) {
  const auto psi = random_state(8, 7);
  auto m = mps::mps_from_dense(psi, {256, 0.0});
  EXPECT_EQ(m.max_bond_dim(), 16);
  EXPECT_NEAR(overlap_abs(mps::contract_to_dense(m), psi), 1.0, 1e-12);
  EXPECT_NEAR(m.norm(), 1.0, 1e-12);
}

TEST(MPSState, CanonicalFormIsometries) {
  auto m = mps::mps_from_dense(random_state(7, 3), {64, 0.0});
  m.canonicalize(3);
  for (int i = 0; i < 3; ++i) {
    const auto& t = m.site(i);
    const Eigen::MatrixXcd g = t.a[0].adjoint() * t.a[0] + t.a[1].adjoint() * t.a[1];
    EXPECT_LT((g - Eigen::MatrixXcd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff(), 1e-12);
  }
  for (int i = 4; i < 7; ++i) {
    const auto& t = m.site(i);
    const Eigen::MatrixXcd g = t.a[0] * t.a[0].adjoint() + t.a[1] * t.a[1].adjoint();
    EXPECT_LT((g - Eigen::MatrixXcd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(MPSState, ReducedDensityMatchesPartialTrace) {
  const auto psi = random_state(6, 11);
  auto m = mps::mps_from_dense(psi, {64, 0.0});
  for (int s = 0; s < 6; ++s) {
    const Eigen::Matrix2cd ref = oracle::partial_trace(psi.amplitudes, s, 6);
    EXPECT_LT((m.reduced_density(s) - ref).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(mps::bloch_entropy(m.bloch_vector(s)), oracle::entropy(ref), 1e-10);
  }
}

TEST(MPSState, TruncationKeepsAtMostChiAndReportsDiscardedWeight) {
  const auto psi = random_state(8, 5);
  const auto exact = mps::mps_from_dense(psi, {256, 0.0});
  auto m = exact;
  m.move_center(3);
  const Eigen::MatrixXcd theta = m.two_site_matrix(3);
  const auto sv = linalg::svd(theta).s;
  const double total = sv.squaredNorm();
  const double expected = sv.tail(sv.size() - 3).squaredNorm() / total;
  const double w = m.split_two_site(3, theta, {3, 0.0}, true);
  EXPECT_EQ(m.bond_dim(3), 3);
  EXPECT_NEAR(w, expected, 1e-12);
  EXPECT_NEAR(m.truncation_error(), expected, 1e-12);
  EXPECT_NEAR(m.norm(), 1.0, 1e-12);
}

TEST(MPSState, CutoffDropsSmallSingularValues) {
  auto m = mps::neel_mps(6);
  const Eigen::MatrixXcd theta = m.two_site_matrix(0);
  m.move_center(0);
  m.split_two_site(0, m.two_site_matrix(0), {16, 1e-12}, true);
  EXPECT_EQ(m.bond_dim(0), 1);
  (void)theta;
}

TEST(TEBD, BondHamiltoniansSumToFullHamiltonian) {
  const HamiltonianSpec spec{6, 1.0, 0.8, 0.5};
  const auto bonds = mps::bond_hamiltonians(build_hamiltonian(spec));
  ASSERT_EQ(bonds.size(), 5u);
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(64, 64);
  for (int b = 0; b < 5; ++b) {
    Eigen::MatrixXcd left = Eigen::MatrixXcd::Identity(Eigen::Index(1) << b, Eigen::Index(1) << b);
    Eigen::MatrixXcd right = Eigen::MatrixXcd::Identity(Eigen::Index(1) << (4 - b), Eigen::Index(1) << (4 - b));
    sum += oracle::kron(oracle::kron(left, bonds[b]), right);
  }
  EXPECT_LT((sum - oracle::ising(6, 1.0, 0.8, 0.5)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TEBD, GateIsUnitaryExponential) {
  const auto bonds = mps::bond_hamiltonians(build_hamiltonian({4, 1.0, 0.8, 0.5}));
  const Eigen::Matrix4cd g = mps::bond_gate(bonds[1], 0.3);
  EXPECT_LT((g.adjoint() * g - Eigen::Matrix4cd::Identity()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((g - oracle::expm(bonds[1], 0.3)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TEBD, ReproducesDenseTrotterProductExactly) {
  const int L = 6;
  const double dt = 0.1;
  for (int frozen : {-1, 2}) {
    const HamiltonianSpec spec{L, 1.0, 0.8, 0.5};
    const auto op = frozen < 0 ? build_hamiltonian(spec) : build_frozen_hamiltonian(spec, frozen);
    mps::TEBDConfig cfg;
    cfg.dt = dt;
    cfg.chi = 64;
    cfg.svd_cutoff = 0.0;
    auto m = mps::neel_mps(L);
    mps::TEBDPropagator(op, cfg).advance(m, 7);
    const Eigen::MatrixXcd step = dense_trotter_step(L, 1.0, 0.8, 0.5, frozen, dt);
    oracle::Vec ref = oracle::neel(L);
    for (int k = 0; k < 7; ++k) ref = step * ref;
    EXPECT_LT((mps::contract_to_dense(m).amplitudes - ref).norm(), 1e-12) << "frozen=" << frozen;
  }
}

TEST(TEBD, SecondOrderConvergenceAgainstExactEvolution) {
  const int L = 8;
  const auto op = build_hamiltonian({L, 1.0, 0.8, 0.5});
  const auto exact = ed::Propagator(op).evolve(ed::neel_state(L), 2.0);
  std::vector<double> err;
  for (double dt : {0.2, 0.1, 0.05}) {
    mps::TEBDConfig cfg;
    cfg.dt = dt;
    cfg.chi = 64;
    cfg.svd_cutoff = 0.0;
    auto m = mps::neel_mps(L);
    mps::TEBDPropagator(op, cfg).advance(m, static_cast<int>(std::lround(2.0 / dt)));
    err.push_back((mps::contract_to_dense(m).amplitudes - exact.amplitudes).norm());
  }
  const double order = std::log2(err[1] / err[2]);
  EXPECT_GE(order, 1.8);
  EXPECT_LE(order, 2.2);
  const double factor = err[1] / err[2];
  EXPECT_GE(factor, 3.0);
  EXPECT_LE(factor, 5.0);
}

TEST(TEBD, NormPreservedAndBondsBounded) {
  mps::TEBDConfig cfg;
  cfg.dt = 0.05;
  cfg.chi = 6;
  const int obs[] = {3};
  const auto r = mps::tebd_evolve(build_hamiltonian({10, 1.0, 0.8, 0.5}), mps::neel_mps(10), cfg, 3.0, obs);
  ASSERT_EQ(r.records.size(), 61u);
  for (const auto& rec : r.records) {
    EXPECT_NEAR(rec.norm, 1.0, 1e-8);
    EXPECT_LE(rec.max_bond_dim, 6);
  }
  EXPECT_GT(r.final_state.truncation_error(), 0.0);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(TEBD, FrozenSiteKeepsItsReducedState) {
  const int L = 8, f = 3;
  mps::TEBDConfig cfg;
  cfg.dt = 0.05;
  cfg.chi = 32;
  const int obs[] = {f};
  const auto r = mps::tebd_evolve(build_frozen_hamiltonian({L, 1.0, 0.8, 0.5}, f), mps::neel_mps(L), cfg, 2.0, obs);
  for (const auto& rec : r.records) {
    EXPECT_NEAR(rec.bloch[0].rz, -1.0, 1e-12);
    EXPECT_NEAR(rec.bloch[0].rx, 0.0, 1e-12);
  }
}

TEST(TEBD, MeasurementStrideSkipsRecords) {
  mps::TEBDConfig cfg;
  cfg.dt = 0.05;
  cfg.measure_stride = 4;
  const int obs[] = {0, 5};
  const auto r = mps::tebd_evolve(build_hamiltonian({6, 1.0, 0.8, 0.5}), mps::neel_mps(6), cfg, 2.0, obs);
  ASSERT_EQ(r.records.size(), 11u);
  EXPECT_NEAR(r.records[3].time, 0.6, 1e-12);
  EXPECT_EQ(r.records[0].bloch.size(), 2u);
}

TEST(TEBD, RejectsBadConfig) {
  mps::TEBDConfig cfg;
  cfg.dt = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.chi = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.svd_cutoff = -1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Mpo, ExpectationMatchesDense) {
  const auto op = build_hamiltonian({7, 1.0, 0.8, 0.5});
  const auto psi = random_state(7, 21);
  const auto m = mps::mps_from_dense(psi, {128, 0.0});
  EXPECT_NEAR(mps::mpo_expectation(mps::Mpo(op), m), ed::expectation(op, psi), 1e-11);
}

TEST(DMRG, GroundEnergiesMatchDenseDiagonalization) {
  for (double hz : {0.0, 0.5}) {
    const auto op = build_hamiltonian({10, 1.0, 0.8, hz});
    const double exact = ed::ground_state_dense(op).first;
    const auto r = mps::dmrg_ground_state(op);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.energy, exact, 1e-8);
    EXPECT_GE(r.energy, exact - 1e-9);
  }
}

TEST(DMRG, GroundStateOverlapsDenseGroundState) {
  const auto op = build_hamiltonian({8, 1.0, 0.8, 0.5});
  const auto dense = ed::ground_state_dense(op).second;
  const auto r = mps::dmrg_ground_state(op);
  EXPECT_NEAR(overlap_abs(mps::contract_to_dense(r.state), dense), 1.0, 1e-8);
}

TEST(DMRG, SeededRunsAreBitwiseReproducible) {
  const auto op = build_hamiltonian({8, 1.0, 0.8, 0.5});
  const auto a = mps::dmrg_ground_state(op);
  const auto b = mps::dmrg_ground_state(op);
  EXPECT_EQ(a.energy, b.energy);
  EXPECT_EQ(a.sweep_energies, b.sweep_energies);
}

TEST(DMRG, MinimalChain) {
  const auto op = build_hamiltonian({2, 1.0, 0.8, 0.5});
  EXPECT_NEAR(mps::dmrg_ground_state(op).energy, ed::ground_state_dense(op).first, 1e-10);
}
