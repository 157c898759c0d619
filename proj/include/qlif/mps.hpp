#pragma once

// Open-boundary matrix product state with physical dimension 2.
//
// Site tensors are stored as a pair of matrices A[s] (left bond x right bond),
// one per physical index. The state keeps track of its orthogonality center:
// tensors left of it are left-canonical, tensors right of it right-canonical.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlif/ed.hpp"
#include "qlif/errors.hpp"
#include "qlif/linalg.hpp"
#include "qlif/spin_model.hpp"

namespace qlif::mps {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;

struct SiteTensor {
  std::array<MatrixXcd, 2> a;

  Eigen::Index left_dim() const { return a[0].rows(); }
  Eigen::Index right_dim() const { return a[0].cols(); }
};

/// Direction on the Bloch sphere; need not be normalized.
struct BlochDirection {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;

  static BlochDirection up() { return {0, 0, 1}; }
  static BlochDirection down() { return {0, 0, -1}; }
};

struct BlochVector {
  double rx = 0.0;
  double ry = 0.0;
  double rz = 0.0;

  /// Length, clamped to 1 when roundoff pushes it above.
  double r() const { return std::min(std::sqrt(rx * rx + ry * ry + rz * rz), 1.0); }

  Eigen::Matrix2cd density() const {
    return 0.5 * (pauli::identity() + rx * pauli::x() + ry * pauli::y() + rz * pauli::z());
  }
};

/// Single-qubit entropy from the Bloch length, p = (1 +- r) / 2.
inline double bloch_entropy(const BlochVector& b) {
  const double r = std::clamp(b.r(), 0.0, 1.0);
  const double probs[2] = {(1.0 + r) / 2.0, (1.0 - r) / 2.0};
  return ed::entropy_of_probabilities(probs);
}

struct TruncationPolicy {
  int max_bond = 128;
  double cutoff = 1e-12;  // discard squared singular values below this fraction
};

class MPSState {
 public:
  MPSState() = default;

  explicit MPSState(std::vector<SiteTensor> sites) : sites_(std::move(sites)) {
    if (sites_.empty()) throw ValidationError("MPS needs at least one site");
    for (std::size_t i = 0; i + 1 < sites_.size(); ++i)
      if (sites_[i].right_dim() != sites_[i + 1].left_dim())
        throw ValidationError("MPS bond dimensions do not match at link " + std::to_string(i));
    if (sites_.front().left_dim() != 1 || sites_.back().right_dim() != 1)
      throw ValidationError("open MPS needs trivial boundary bonds");
  }

  int size() const { return static_cast<int>(sites_.size()); }
  const SiteTensor& site(int i) const { return sites_.at(i); }
  SiteTensor& site(int i) { return sites_.at(i); }

  /// Dimension of the link between site i and i+1.
  int bond_dim(int link) const { return static_cast<int>(sites_.at(link).right_dim()); }

  std::vector<int> bond_dims() const {
    std::vector<int> d;
    for (int i = 0; i + 1 < size(); ++i) d.push_back(bond_dim(i));
    return d;
  }

  int max_bond_dim() const {
    const auto d = bond_dims();
    return d.empty() ? 1 : *std::max_element(d.begin(), d.end());
  }

  /// Orthogonality center, or -1 when no canonical form is known.
  int center() const { return center_; }
  bool is_canonical() const { return center_ >= 0; }

  double truncation_error() const { return truncation_error_; }
  void add_truncation_error(double w) { truncation_error_ += w; }

  /// Bring the state into mixed canonical form centered at `c`.
  void canonicalize(int c) {
    check_site(c);
    for (int i = 0; i < c; ++i) left_orthonormalize(i);
    for (int i = size() - 1; i > c; --i) right_orthonormalize(i);
    center_ = c;
  }

  void move_center(int c) {
    check_site(c);
    if (!is_canonical()) {
      canonicalize(c);
      return;
    }
    while (center_ < c) left_orthonormalize(center_++);
    while (center_ > c) right_orthonormalize(center_--);
  }

  /// Norm read off the center tensor (canonicalizes if needed).
  double norm() {
    if (!is_canonical()) canonicalize(0);
    const auto& t = sites_[center_];
    return std::sqrt(t.a[0].squaredNorm() + t.a[1].squaredNorm());
  }

  void normalize() {
    const double n = norm();
    if (n == 0.0) throw NumericalError("cannot normalize a zero MPS");
    sites_[center_].a[0] /= n;
    sites_[center_].a[1] /= n;
  }

  /// 2x2 reduced density matrix of `site`. Moves the center there.
  Eigen::Matrix2cd reduced_density(int site) {
    move_center(site);
    const auto& t = sites_[site];
    Eigen::Matrix2cd rho;
    for (int s = 0; s < 2; ++s)
      for (int sp = 0; sp < 2; ++sp) rho(s, sp) = (t.a[s].cwiseProduct(t.a[sp].conjugate())).sum();
    return rho / rho.trace().real();
  }

  BlochVector bloch_vector(int site) {
    const Eigen::Matrix2cd rho = reduced_density(site);
    return {(rho * pauli::x()).trace().real(), (rho * pauli::y()).trace().real(),
            (rho * pauli::z()).trace().real()};
  }

  /// Two-site matrix Theta with rows (s1, left) and columns (s2, right).
  MatrixXcd two_site_matrix(int i) const {
    const auto& l = sites_.at(i);
    const auto& r = sites_.at(i + 1);
    const Eigen::Index dl = l.left_dim(), dr = r.right_dim();
    MatrixXcd theta(2 * dl, 2 * dr);
    for (int s1 = 0; s1 < 2; ++s1)
      for (int s2 = 0; s2 < 2; ++s2) theta.block(s1 * dl, s2 * dr, dl, dr).noalias() = l.a[s1] * r.a[s2];
    return theta;
  }

  /// Split a two-site matrix back into sites i, i+1 by truncated SVD.
  /// The orthogonality center ends up on site i+1 if `move_right`, else on i.
  /// Returns the discarded squared weight (relative to the kept-plus-discarded
  /// total); the kept spectrum is renormalized.
  double split_two_site(int i, const MatrixXcd& theta, const TruncationPolicy& policy,
                        bool move_right) {
    const Eigen::Index dl = sites_.at(i).left_dim();
    const Eigen::Index dr = sites_.at(i + 1).right_dim();
    const auto dec = linalg::svd(theta);
    const double total = dec.s.squaredNorm();
    if (total == 0.0) throw NumericalError("two-site tensor vanished");

    Eigen::Index keep = 0;
    const Eigen::Index cap = std::min<Eigen::Index>(policy.max_bond, dec.s.size());
    while (keep < cap && dec.s(keep) * dec.s(keep) / total >= policy.cutoff) ++keep;
    keep = std::max<Eigen::Index>(keep, 1);
    const double kept = dec.s.head(keep).squaredNorm();
    const double discarded = std::max(0.0, 1.0 - kept / total);

    const Eigen::VectorXd s = dec.s.head(keep) / std::sqrt(kept);
    MatrixXcd left = dec.u.leftCols(keep);
    MatrixXcd right = dec.vh.topRows(keep);
    if (move_right)
      right = s.asDiagonal() * right;
    else
      left = left * s.asDiagonal();

    for (int s1 = 0; s1 < 2; ++s1) sites_[i].a[s1] = left.middleRows(s1 * dl, dl);
    for (int s2 = 0; s2 < 2; ++s2) sites_[i + 1].a[s2] = right.middleCols(s2 * dr, dr);
    center_ = move_right ? i + 1 : i;
    truncation_error_ += discarded;
    return discarded;
  }

 private:
  void check_site(int i) const {
    if (i < 0 || i >= size()) throw ValidationError("MPS site out of range");
  }

  // QR on [A0; A1], pushing R into site i+1.
  void left_orthonormalize(int i) {
    auto& t = sites_[i];
    const Eigen::Index dl = t.left_dim(), dr = t.right_dim();
    MatrixXcd m(2 * dl, dr);
    m << t.a[0], t.a[1];
    const Eigen::Index k = std::min(m.rows(), m.cols());
    Eigen::HouseholderQR<MatrixXcd> qr(m);
    const MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(m.rows(), k);
    const MatrixXcd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    t.a[0] = q.topRows(dl);
    t.a[1] = q.bottomRows(dl);
    if (i + 1 < size()) {
      auto& n = sites_[i + 1];
      n.a[0] = r * n.a[0];
      n.a[1] = r * n.a[1];
    } else {
      // Last site: fold the 1x1 remainder back in so the norm is preserved.
      t.a[0] *= r(0, 0);
      t.a[1] *= r(0, 0);
    }
  }

  // LQ on [A0, A1], pushing L into site i-1.
  void right_orthonormalize(int i) {
    auto& t = sites_[i];
    const Eigen::Index dl = t.left_dim(), dr = t.right_dim();
    MatrixXcd m(dl, 2 * dr);
    m << t.a[0], t.a[1];
    const MatrixXcd mt = m.adjoint();
    const Eigen::Index k = std::min(mt.rows(), mt.cols());
    Eigen::HouseholderQR<MatrixXcd> qr(mt);
    const MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(mt.rows(), k);
    const MatrixXcd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    const MatrixXcd qa = q.adjoint();  // k x 2dr
    const MatrixXcd la = r.adjoint();  // dl x k
    t.a[0] = qa.leftCols(dr);
    t.a[1] = qa.rightCols(dr);
    if (i > 0) {
      auto& p = sites_[i - 1];
      p.a[0] = p.a[0] * la;
      p.a[1] = p.a[1] * la;
    } else {
      t.a[0] *= la(0, 0);
      t.a[1] *= la(0, 0);
    }
  }

  std::vector<SiteTensor> sites_;
  int center_ = -1;
  double truncation_error_ = 0.0;
};

/// Product state with bond dimension 1; each site points along its direction.
inline MPSState mps_from_product(std::span<const BlochDirection> dirs) {
  if (dirs.empty()) throw ValidationError("product state needs at least one site");
  std::vector<SiteTensor> sites;
  for (const auto& d : dirs) {
    const double len = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
    if (len == 0.0) throw ValidationError("Bloch direction must be nonzero");
    const double theta = std::acos(std::clamp(d.z / len, -1.0, 1.0));
    const double phi = std::atan2(d.y, d.x);
    SiteTensor t;
    t.a[0] = MatrixXcd::Constant(1, 1, std::cos(theta / 2));
    t.a[1] = MatrixXcd::Constant(1, 1, std::polar(std::sin(theta / 2), phi));
    sites.push_back(std::move(t));
  }
  MPSState m(std::move(sites));
  m.canonicalize(0);
  return m;
}

inline std::vector<BlochDirection> neel_directions(int L) {
  std::vector<BlochDirection> d;
  for (int i = 0; i < L; ++i) d.push_back(i % 2 == 0 ? BlochDirection::up() : BlochDirection::down());
  return d;
}

inline MPSState neel_mps(int L) { return mps_from_product(neel_directions(L)); }

inline MPSState all_up_mps(int L) {
  return mps_from_product(std::vector<BlochDirection>(L, BlochDirection::up()));
}

/// Full contraction in the dense-engine basis ordering.
inline ed::StateVector contract_to_dense(const MPSState& psi, int capacity = ed::kDefaultCapacity) {
  ed::check_capacity(psi.size(), capacity);
  // Rows index the prefix configuration, site 0 most significant.
  MatrixXcd acc = MatrixXcd::Ones(1, 1);
  for (int i = 0; i < psi.size(); ++i) {
    const auto& t = psi.site(i);
    MatrixXcd next(acc.rows() * 2, t.right_dim());
    for (Eigen::Index p = 0; p < acc.rows(); ++p)
      for (int s = 0; s < 2; ++s) next.row(2 * p + s) = acc.row(p) * t.a[s];
    acc = std::move(next);
  }
  return {psi.size(), acc.col(0)};
}

/// Successive-SVD decomposition of a dense state (centered at the last site).
inline MPSState mps_from_dense(const ed::StateVector& psi, const TruncationPolicy& policy) {
  const int L = psi.L;
  if (L < 1) throw ValidationError("empty state");
  std::vector<SiteTensor> sites(L);
  // rest has rows (left bond) and columns (remaining configuration).
  MatrixXcd rest = psi.amplitudes.transpose();
  double discarded = 0.0;
  for (int i = 0; i < L - 1; ++i) {
    const Eigen::Index dl = rest.rows();
    const Eigen::Index cols = rest.cols() / 2;
    // Rows (s, left), columns remaining sites.
    MatrixXcd m(2 * dl, cols);
    m.topRows(dl) = rest.leftCols(cols);
    m.bottomRows(dl) = rest.rightCols(cols);
    const auto dec = linalg::svd(m);
    const double total = dec.s.squaredNorm();
    Eigen::Index keep = 0;
    const Eigen::Index cap = std::min<Eigen::Index>(policy.max_bond, dec.s.size());
    while (keep < cap && dec.s(keep) * dec.s(keep) / total >= policy.cutoff) ++keep;
    keep = std::max<Eigen::Index>(keep, 1);
    discarded += std::max(0.0, 1.0 - dec.s.head(keep).squaredNorm() / total);
    sites[i].a[0] = dec.u.topLeftCorner(dl, keep);
    sites[i].a[1] = dec.u.block(dl, 0, dl, keep);
    rest = dec.s.head(keep).asDiagonal() * dec.vh.topRows(keep);
  }
  sites[L - 1].a[0] = rest.col(0);
  sites[L - 1].a[1] = rest.col(1);
  MPSState m(std::move(sites));
  m.canonicalize(L - 1);
  m.normalize();
  m.add_truncation_error(discarded);
  return m;
}

}  // namespace qlif::mps
