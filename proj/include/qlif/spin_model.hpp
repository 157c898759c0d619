#pragma once

// Mixed-field Ising chain
//
//   H = -J sum_i Z_i Z_{i+1} - B sum_i X_i - h_z sum_i Z_i
//
// on an open chain, its frozen-site variants, and the analytic velocity and
// timescale table derived from the free-fermion dispersion.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlif/errors.hpp"
#include "qlif/linalg.hpp"

namespace qlif {

using cplx = std::complex<double>;

namespace pauli {

inline Eigen::Matrix2cd identity() { return Eigen::Matrix2cd::Identity(); }

inline Eigen::Matrix2cd x() {
  Eigen::Matrix2cd m;
  m << 0, 1, 1, 0;
  return m;
}

inline Eigen::Matrix2cd y() {
  Eigen::Matrix2cd m;
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}

// |0> = spin up, Z|0> = +|0>.
inline Eigen::Matrix2cd z() {
  Eigen::Matrix2cd m;
  m << 1, 0, 0, -1;
  return m;
}

/// Two-site operator a (x) b with the left site as the more significant qubit.
inline Eigen::Matrix4cd kron(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Eigen::Matrix4cd out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

}  // namespace pauli

enum class Boundary { Open };

struct HamiltonianSpec {
  int L = 2;
  double J = 1.0;
  double B = 0.0;
  double hz = 0.0;
  Boundary boundary = Boundary::Open;

  void validate() const {
    if (L < 2) throw ValidationError("chain length must be >= 2, got " + std::to_string(L));
    if (!std::isfinite(J) || !std::isfinite(B) || !std::isfinite(hz))
      throw ValidationError("couplings J, B, h_z must be finite");
  }

  bool is_integrable() const { return hz == 0.0; }

  /// Same chain with the longitudinal field switched off.
  HamiltonianSpec integrable_counterpart() const {
    HamiltonianSpec s = *this;
    s.hz = 0.0;
    return s;
  }

  friend bool operator==(const HamiltonianSpec&, const HamiltonianSpec&) = default;
};

/// A Hermitian operator acting on one site or on an adjacent pair (site, site+1).
struct LocalTerm {
  int site = 0;
  int width = 1;  // 1 or 2
  Eigen::MatrixXcd block;

  bool touches(int s) const { return s >= site && s < site + width; }
};

/// Ordered sum of local terms on an L-site chain.
class OperatorSum {
 public:
  OperatorSum() = default;
  explicit OperatorSum(int num_sites) : num_sites_(num_sites) {
    if (num_sites < 1) throw ValidationError("operator sum needs at least one site");
  }

  int num_sites() const { return num_sites_; }
  const std::vector<LocalTerm>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }

  void add_site_term(int site, const Eigen::Matrix2cd& block) {
    check_site(site);
    check_hermitian(block);
    terms_.push_back({site, 1, block});
  }

  void add_bond_term(int site, const Eigen::Matrix4cd& block) {
    check_site(site);
    check_site(site + 1);
    check_hermitian(block);
    terms_.push_back({site, 2, block});
  }

  /// Copy with every term whose support contains `site` dropped.
  OperatorSum without_site(int site) const {
    check_site(site);
    OperatorSum out(num_sites_);
    for (const auto& t : terms_)
      if (!t.touches(site)) out.terms_.push_back(t);
    return out;
  }

  double max_hermiticity_defect() const {
    double worst = 0.0;
    for (const auto& t : terms_) worst = std::max(worst, linalg::hermiticity_defect(t.block));
    return worst;
  }

  /// True when every block has vanishing imaginary part.
  bool is_real() const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [](const LocalTerm& t) { return t.block.imag().cwiseAbs().maxCoeff() == 0.0; });
  }

 private:
  void check_site(int site) const {
    if (site < 0 || site >= num_sites_)
      throw ValidationError("site " + std::to_string(site) + " outside [0, " +
                            std::to_string(num_sites_) + ")");
  }

  static void check_hermitian(const Eigen::MatrixXcd& block) {
    if (linalg::hermiticity_defect(block) > 1e-12)
      throw ValidationError("local term is not Hermitian");
  }

  int num_sites_ = 0;
  std::vector<LocalTerm> terms_;
};

/// Bonds first, then X fields, then Z fields. Zero-coefficient terms are omitted.
inline OperatorSum build_hamiltonian(const HamiltonianSpec& spec) {
  spec.validate();
  OperatorSum op(spec.L);
  if (spec.J != 0.0) {
    const Eigen::Matrix4cd zz = -spec.J * pauli::kron(pauli::z(), pauli::z());
    for (int i = 0; i + 1 < spec.L; ++i) op.add_bond_term(i, zz);
  }
  if (spec.B != 0.0) {
    const Eigen::Matrix2cd xf = -spec.B * pauli::x();
    for (int i = 0; i < spec.L; ++i) op.add_site_term(i, xf);
  }
  if (spec.hz != 0.0) {
    const Eigen::Matrix2cd zf = -spec.hz * pauli::z();
    for (int i = 0; i < spec.L; ++i) op.add_site_term(i, zf);
  }
  return op;
}

/// Hamiltonian with every term acting nontrivially on `frozen_site` removed.
inline OperatorSum build_frozen_hamiltonian(const HamiltonianSpec& spec, int frozen_site) {
  spec.validate();
  if (frozen_site < 0 || frozen_site >= spec.L)
    throw ValidationError("frozen site " + std::to_string(frozen_site) + " outside [0, " +
                          std::to_string(spec.L) + ")");
  return build_hamiltonian(spec).without_site(frozen_site);
}

/// Free-fermion quasiparticle energy of the transverse-field chain.
inline double dispersion(double J, double B, double k) {
  const double arg = J * J + B * B - 2.0 * J * B * std::cos(k);
  return 2.0 * std::sqrt(std::max(arg, 0.0));
}

/// Analytic group velocity d(eps_k)/dk.
inline double group_velocity(double J, double B, double k) {
  const double eps = dispersion(J, B, k);
  if (eps == 0.0) return 0.0;
  return 4.0 * J * B * std::sin(k) / eps;
}

struct VelocityTable {
  double v_lr = 0.0;   // 2eJ
  double v_max = 0.0;  // 2 min(J, B)
  int L = 0;

  double t_lr(double d) const { return d / v_lr; }
  double t_max(double d) const { return d / v_max; }
  double t_scr() const { return L / v_max; }
};

inline VelocityTable velocity_table(const HamiltonianSpec& spec) {
  spec.validate();
  VelocityTable t;
  t.v_lr = 2.0 * std::numbers::e * std::abs(spec.J);
  t.v_max = 2.0 * std::min(std::abs(spec.J), std::abs(spec.B));
  t.L = spec.L;
  return t;
}

}  // namespace qlif
