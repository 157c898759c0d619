#pragma once

// Second-order TEBD for nearest-neighbor chains.
//
// One step of length dt is  U_odd(dt/2) U_even(dt) U_odd(dt/2)  where the
// even layer holds bonds (0,1), (2,3), ... and the odd layer (1,2), (3,4), ...
// Consecutive odd half steps between two measurements are fused into a
// single full step, which is the same product of exponentials.

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlif/errors.hpp"
#include "qlif/mps.hpp"
#include "qlif/spin_model.hpp"

namespace qlif::mps {

struct TEBDConfig {
  double dt = 0.05;
  int chi = 128;
  double svd_cutoff = 1e-12;
  int measure_stride = 1;
  double truncation_alarm = 1e-6;

  void validate() const {
    if (!(dt > 0.0)) throw ValidationError("TEBD dt must be > 0");
    if (chi < 1) throw ValidationError("TEBD chi must be >= 1");
    if (!(svd_cutoff >= 0.0 && svd_cutoff < 1.0))
      throw ValidationError("svd_cutoff must lie in [0, 1)");
    if (measure_stride < 1) throw ValidationError("measure_stride must be >= 1");
  }

  friend bool operator==(const TEBDConfig&, const TEBDConfig&) = default;
};

/// Split an operator sum into one 4x4 Hamiltonian per bond. Site fields go
/// half to each adjacent bond; edge sites give their whole field to their
/// only bond.
inline std::vector<Eigen::Matrix4cd> bond_hamiltonians(const OperatorSum& op) {
  const int L = op.num_sites();
  if (L < 2) throw ValidationError("TEBD needs at least two sites");
  std::vector<Eigen::Matrix4cd> h(L - 1, Eigen::Matrix4cd::Zero());
  const Eigen::Matrix2cd id = pauli::identity();
  for (const auto& t : op.terms()) {
    if (t.width == 2) {
      h[t.site] += t.block;
      continue;
    }
    const Eigen::Matrix2cd f = t.block;
    if (t.site == 0) {
      h[0] += pauli::kron(f, id);
    } else if (t.site == L - 1) {
      h[L - 2] += pauli::kron(id, f);
    } else {
      h[t.site - 1] += 0.5 * pauli::kron(id, f);
      h[t.site] += 0.5 * pauli::kron(f, id);
    }
  }
  return h;
}

/// exp(-i h tau) by exact Hermitian eigendecomposition.
inline Eigen::Matrix4cd bond_gate(const Eigen::Matrix4cd& h, double tau) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> eig(h);
  Eigen::Vector4cd phases;
  for (int k = 0; k < 4; ++k) phases(k) = std::polar(1.0, -eig.eigenvalues()(k) * tau);
  return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

inline Eigen::MatrixXcd apply_gate(const Eigen::Matrix4cd& g, const Eigen::MatrixXcd& theta) {
  const Eigen::Index dl = theta.rows() / 2, dr = theta.cols() / 2;
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(theta.rows(), theta.cols());
  for (int o1 = 0; o1 < 2; ++o1)
    for (int o2 = 0; o2 < 2; ++o2)
      for (int i1 = 0; i1 < 2; ++i1)
        for (int i2 = 0; i2 < 2; ++i2) {
          const cplx c = g(2 * o1 + o2, 2 * i1 + i2);
          if (c == cplx(0.0)) continue;
          out.block(o1 * dl, o2 * dr, dl, dr) += c * theta.block(i1 * dl, i2 * dr, dl, dr);
        }
  return out;
}

/// Gate set for one Hamiltonian and step size, built once and read-only
/// afterwards.
class TEBDPropagator {
 public:
  TEBDPropagator(const OperatorSum& op, const TEBDConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto h = bond_hamiltonians(op);
    for (const auto& hb : h) {
      half_.push_back(bond_gate(hb, cfg_.dt / 2));
      full_.push_back(bond_gate(hb, cfg_.dt));
    }
  }

  const TEBDConfig& config() const { return cfg_; }
  int num_bonds() const { return static_cast<int>(full_.size()); }

  /// Advance by `steps` Trotter steps. Returns the discarded weight summed
  /// over all truncations of this call; `on_step(k, w)` sees the weight
  /// discarded during step k.
  template <class OnStep>
  double advance(MPSState& psi, int steps, OnStep&& on_step) const {
    if (psi.size() != num_bonds() + 1) throw ValidationError("MPS size does not match gates");
    if (steps <= 0) return 0.0;
    if (!psi.is_canonical()) psi.canonicalize(0);
    double total = 0.0;
    double carry = apply_layer(psi, 1, half_);
    for (int k = 0; k < steps; ++k) {
      double w = carry + apply_layer(psi, 0, full_);
      w += apply_layer(psi, 1, k + 1 < steps ? full_ : half_);
      carry = 0.0;
      on_step(k, w);
      total += w;
    }
    return total;
  }

  double advance(MPSState& psi, int steps) const {
    return advance(psi, steps, [](int, double) {});
  }

 private:
  double apply_layer(MPSState& psi, int parity, const std::vector<Eigen::Matrix4cd>& gates) const {
    const int L = psi.size();
    TruncationPolicy policy{cfg_.chi, cfg_.svd_cutoff};
    std::vector<int> bonds;
    for (int b = parity; b < L - 1; b += 2) bonds.push_back(b);
    if (bonds.empty()) return 0.0;
    const bool rightward = psi.center() <= (L - 1) / 2;
    double discarded = 0.0;
    auto update = [&](int b) {
      psi.move_center(rightward ? b : b + 1);
      const Eigen::MatrixXcd theta = apply_gate(gates[b], psi.two_site_matrix(b));
      discarded += psi.split_two_site(b, theta, policy, rightward);
    };
    if (rightward)
      for (int b : bonds) update(b);
    else
      for (auto it = bonds.rbegin(); it != bonds.rend(); ++it) update(*it);
    return discarded;
  }

  TEBDConfig cfg_;
  std::vector<Eigen::Matrix4cd> half_;
  std::vector<Eigen::Matrix4cd> full_;
};

struct TruncationWarning {
  double time = 0.0;
  double discarded = 0.0;
  int bond_dim = 0;
};

struct TEBDRecord {
  double time = 0.0;
  std::vector<BlochVector> bloch;  // one per observation site
  double norm = 1.0;
  double truncation_error = 0.0;   // cumulative
  int max_bond_dim = 1;
};

struct TEBDResult {
  std::vector<int> obs_sites;
  std::vector<TEBDRecord> records;
  std::vector<TruncationWarning> warnings;
  MPSState final_state;
};

/// Evolve to t_max recording Bloch vectors at the observation sites every
/// measure_stride steps (t = 0 included).
inline TEBDResult tebd_evolve(const OperatorSum& op, MPSState psi, const TEBDConfig& cfg,
                              double t_max, std::span<const int> obs_sites) {
  cfg.validate();
  if (t_max < 0.0) throw ValidationError("t_max must be >= 0");
  for (int s : obs_sites)
    if (s < 0 || s >= psi.size()) throw ValidationError("observation site out of range");
  const TEBDPropagator prop(op, cfg);
  const long total_steps = std::lround(t_max / cfg.dt);

  TEBDResult out;
  out.obs_sites.assign(obs_sites.begin(), obs_sites.end());
  auto measure = [&](long step) {
    TEBDRecord rec;
    rec.time = static_cast<double>(step) * cfg.dt;
    rec.norm = psi.norm();
    for (int s : obs_sites) rec.bloch.push_back(psi.bloch_vector(s));
    rec.truncation_error = psi.truncation_error();
    rec.max_bond_dim = psi.max_bond_dim();
    out.records.push_back(std::move(rec));
  };

  if (!psi.is_canonical()) psi.canonicalize(0);
  psi.normalize();
  measure(0);
  long done = 0;
  while (done < total_steps) {
    const int n = static_cast<int>(std::min<long>(cfg.measure_stride, total_steps - done));
    prop.advance(psi, n, [&](int k, double w) {
      if (w > cfg.truncation_alarm && psi.max_bond_dim() >= cfg.chi)
        out.warnings.push_back({static_cast<double>(done + k + 1) * cfg.dt, w, psi.max_bond_dim()});
    });
    done += n;
    measure(done);
  }
  out.final_state = std::move(psi);
  return out;
}

}  // namespace qlif::mps
