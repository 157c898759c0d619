#pragma once

// Exact dense-statevector engine. Basis ordering: site 0 is the most
// significant qubit, bit value 0 is spin up (Z = +1).

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qlif/errors.hpp"
#include "qlif/linalg.hpp"
#include "qlif/spin_model.hpp"

namespace qlif::ed {

inline constexpr int kDefaultCapacity = 12;

inline void check_capacity(int L, int capacity) {
  if (L > capacity)
    throw CapacityError("exact engine holds at most " + std::to_string(capacity) +
                        " sites, requested " + std::to_string(L) +
                        "; use the MPS engine for larger chains");
}

inline int bit_position(int L, int site) { return L - 1 - site; }

struct StateVector {
  int L = 0;
  Eigen::VectorXcd amplitudes;

  std::size_t dim() const { return static_cast<std::size_t>(amplitudes.size()); }
  double norm() const { return amplitudes.norm(); }
};

inline StateVector basis_state(int L, std::uint64_t index) {
  StateVector s{L, Eigen::VectorXcd::Zero(Eigen::Index{1} << L)};
  s.amplitudes(static_cast<Eigen::Index>(index)) = 1.0;
  return s;
}

/// Computational-basis product state; spins[i] = 0 (up) or 1 (down).
inline StateVector product_state(std::span<const int> spins) {
  const int L = static_cast<int>(spins.size());
  std::uint64_t index = 0;
  for (int i = 0; i < L; ++i) {
    if (spins[i] != 0 && spins[i] != 1) throw ValidationError("spin values must be 0 or 1");
    index |= static_cast<std::uint64_t>(spins[i]) << bit_position(L, i);
  }
  return basis_state(L, index);
}

/// |up down up down ...>
inline StateVector neel_state(int L) {
  if (L < 1) throw ValidationError("Neel state needs L >= 1");
  std::vector<int> spins(L);
  for (int i = 0; i < L; ++i) spins[i] = i % 2;
  return product_state(spins);
}

inline StateVector all_up_state(int L) { return basis_state(L, 0); }

/// H|psi> applied term by term, without forming the dense matrix.
inline Eigen::VectorXcd apply(const OperatorSum& op, const Eigen::VectorXcd& psi) {
  const int L = op.num_sites();
  const Eigen::Index dim = Eigen::Index{1} << L;
  if (psi.size() != dim) throw ValidationError("state dimension does not match operator");
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(dim);
  for (const auto& t : op.terms()) {
    if (t.width == 1) {
      const int p = bit_position(L, t.site);
      for (Eigen::Index a = 0; a < dim; ++a) {
        const int s = static_cast<int>((a >> p) & 1);
        const Eigen::Index base = a & ~(Eigen::Index{1} << p);
        for (int sp = 0; sp < 2; ++sp)
          out(base | (Eigen::Index{sp} << p)) += t.block(sp, s) * psi(a);
      }
    } else {
      const int p1 = bit_position(L, t.site);
      const int p2 = p1 - 1;
      for (Eigen::Index a = 0; a < dim; ++a) {
        const int s = static_cast<int>(((a >> p1) & 1) * 2 + ((a >> p2) & 1));
        const Eigen::Index base = a & ~((Eigen::Index{1} << p1) | (Eigen::Index{1} << p2));
        for (int sp = 0; sp < 4; ++sp)
          out(base | (Eigen::Index{sp >> 1} << p1) | (Eigen::Index{sp & 1} << p2)) +=
              t.block(sp, s) * psi(a);
      }
    }
  }
  return out;
}

namespace detail {

template <class Matrix, class Convert>
Matrix assemble(const OperatorSum& op, Convert convert) {
  const int L = op.num_sites();
  const Eigen::Index dim = Eigen::Index{1} << L;
  Matrix h = Matrix::Zero(dim, dim);
  for (const auto& t : op.terms()) {
    if (t.width == 1) {
      const int p = bit_position(L, t.site);
      for (Eigen::Index a = 0; a < dim; ++a) {
        const int s = static_cast<int>((a >> p) & 1);
        const Eigen::Index base = a & ~(Eigen::Index{1} << p);
        for (int sp = 0; sp < 2; ++sp) h(base | (Eigen::Index{sp} << p), a) += convert(t.block(sp, s));
      }
    } else {
      const int p1 = bit_position(L, t.site);
      const int p2 = p1 - 1;
      for (Eigen::Index a = 0; a < dim; ++a) {
        const int s = static_cast<int>(((a >> p1) & 1) * 2 + ((a >> p2) & 1));
        const Eigen::Index base = a & ~((Eigen::Index{1} << p1) | (Eigen::Index{1} << p2));
        for (int sp = 0; sp < 4; ++sp)
          h(base | (Eigen::Index{sp >> 1} << p1) | (Eigen::Index{sp & 1} << p2), a) +=
              convert(t.block(sp, s));
      }
    }
  }
  return h;
}

}  // namespace detail

inline Eigen::MatrixXcd dense_matrix(const OperatorSum& op, int capacity = kDefaultCapacity) {
  check_capacity(op.num_sites(), capacity);
  return detail::assemble<Eigen::MatrixXcd>(op, [](cplx v) { return v; });
}

inline Eigen::MatrixXd dense_matrix_real(const OperatorSum& op, int capacity = kDefaultCapacity) {
  check_capacity(op.num_sites(), capacity);
  if (!op.is_real()) throw ValidationError("operator has complex entries");
  return detail::assemble<Eigen::MatrixXd>(op, [](cplx v) { return v.real(); });
}

/// Full eigendecomposition of a dense Hamiltonian, reused for every time
/// point. Real Hamiltonians keep real eigenvectors.
class Propagator {
 public:
  explicit Propagator(const OperatorSum& op, int capacity = kDefaultCapacity)
      : num_sites_(op.num_sites()) {
    check_capacity(num_sites_, capacity);
    if (op.is_real()) {
      auto eig = linalg::eigh(dense_matrix_real(op, capacity));
      energies_ = std::move(eig.values);
      vec_re_ = std::move(eig.vectors);
    } else {
      auto eig = linalg::eigh(dense_matrix(op, capacity));
      energies_ = std::move(eig.values);
      vec_re_ = eig.vectors.real();
      vec_im_ = eig.vectors.imag();
    }
  }

  int num_sites() const { return num_sites_; }
  Eigen::Index dim() const { return energies_.size(); }
  bool is_complex() const { return vec_im_.size() != 0; }
  const Eigen::VectorXd& energies() const { return energies_; }
  const Eigen::MatrixXd& vectors_real() const { return vec_re_; }
  const Eigen::MatrixXd& vectors_imag() const { return vec_im_; }

  StateVector eigenvector(Eigen::Index k) const {
    StateVector s{num_sites_, Eigen::VectorXcd(dim())};
    if (is_complex())
      s.amplitudes = vec_re_.col(k).cast<cplx>() + cplx(0, 1) * vec_im_.col(k).cast<cplx>();
    else
      s.amplitudes = vec_re_.col(k).cast<cplx>();
    return s;
  }

  /// Coefficients U^H psi in the energy eigenbasis.
  Eigen::VectorXcd to_eigenbasis(const Eigen::VectorXcd& psi) const {
    const Eigen::VectorXd pr = psi.real();
    const Eigen::VectorXd pi = psi.imag();
    Eigen::VectorXd cr = vec_re_.transpose() * pr;
    Eigen::VectorXd ci = vec_re_.transpose() * pi;
    if (is_complex()) {
      cr.noalias() += vec_im_.transpose() * pi;
      ci.noalias() -= vec_im_.transpose() * pr;
    }
    return cr.cast<cplx>() + cplx(0, 1) * ci.cast<cplx>();
  }

  Eigen::VectorXcd from_eigenbasis(const Eigen::VectorXcd& c) const {
    const Eigen::VectorXd cr = c.real();
    const Eigen::VectorXd ci = c.imag();
    Eigen::VectorXd pr = vec_re_ * cr;
    Eigen::VectorXd pi = vec_re_ * ci;
    if (is_complex()) {
      pr.noalias() -= vec_im_ * ci;
      pi.noalias() += vec_im_ * cr;
    }
    return pr.cast<cplx>() + cplx(0, 1) * pi.cast<cplx>();
  }

  StateVector evolve(const StateVector& psi0, double t) const {
    const std::vector<double> one{t};
    return std::move(evolve(psi0, one).front());
  }

  /// psi(t) = exp(-iHt) psi0 for every t in `times`.
  std::vector<StateVector> evolve(const StateVector& psi0, std::span<const double> times) const {
    check_state(psi0);
    const Eigen::VectorXcd c0 = to_eigenbasis(psi0.amplitudes);
    std::vector<StateVector> out;
    out.reserve(times.size());
    for (double t : times) {
      if (t == 0.0) {
        out.push_back(psi0);
        continue;
      }
      Eigen::VectorXcd c(c0.size());
      for (Eigen::Index k = 0; k < c.size(); ++k)
        c(k) = std::polar(1.0, -energies_(k) * t) * c0(k);
      out.push_back({num_sites_, from_eigenbasis(c)});
    }
    return out;
  }

 private:
  void check_state(const StateVector& s) const {
    if (s.L != num_sites_ || s.amplitudes.size() != dim())
      throw ValidationError("state does not match propagator size");
  }

  int num_sites_ = 0;
  Eigen::VectorXd energies_;
  Eigen::MatrixXd vec_re_;
  Eigen::MatrixXd vec_im_;
};

inline std::vector<StateVector> evolve(const OperatorSum& op, const StateVector& psi0,
                                       std::span<const double> times,
                                       int capacity = kDefaultCapacity) {
  if (!times.empty() && times.front() < 0.0) throw ValidationError("times must be >= 0");
  return Propagator(op, capacity).evolve(psi0, times);
}

inline std::pair<double, StateVector> ground_state_dense(const OperatorSum& op,
                                                         int capacity = kDefaultCapacity) {
  Propagator p(op, capacity);
  return {p.energies()(0), p.eigenvector(0)};
}

inline double expectation(const OperatorSum& op, const StateVector& psi) {
  return psi.amplitudes.dot(apply(op, psi.amplitudes)).real();
}

// ---------------------------------------------------------------------------
// Single-site reduced states.

struct SingleSiteDensity {
  Eigen::Matrix2cd rho = Eigen::Matrix2cd::Identity() / 2.0;
};

inline SingleSiteDensity reduce_single_site(const StateVector& psi, int site) {
  if (site < 0 || site >= psi.L) throw ValidationError("site out of range");
  const int p = bit_position(psi.L, site);
  const Eigen::Index bit = Eigen::Index{1} << p;
  SingleSiteDensity out;
  out.rho.setZero();
  for (Eigen::Index a = 0; a < psi.amplitudes.size(); ++a) {
    if (a & bit) continue;
    const cplx up = psi.amplitudes(a);
    const cplx dn = psi.amplitudes(a | bit);
    out.rho(0, 0) += std::norm(up);
    out.rho(1, 1) += std::norm(dn);
    out.rho(0, 1) += up * std::conj(dn);
  }
  out.rho(1, 0) = std::conj(out.rho(0, 1));
  return out;
}

inline double single_site_expectation(const StateVector& psi, int site, const Eigen::Matrix2cd& o) {
  return (reduce_single_site(psi, site).rho * o).trace().real();
}

/// -sum p ln p with the 0 ln 0 = 0 convention.
inline double entropy_of_probabilities(std::span<const double> probs) {
  double s = 0.0;
  for (double p : probs)
    if (p > 0.0) s -= p * std::log(p);
  return s;
}

/// Eigenvalues of a 2x2 Hermitian matrix, ascending. The small one is taken
/// from the determinant so nearly pure states keep relative precision.
inline std::array<double, 2> eigenvalues_2x2(const Eigen::Matrix2cd& rho) {
  const double a = rho(0, 0).real(), d = rho(1, 1).real();
  const double tr = a + d;
  const double r = std::hypot(a - d, 2.0 * std::abs(rho(0, 1)));
  const double det = a * d - std::norm(rho(0, 1));
  const double hi = 0.5 * (tr + r);
  const double lo = hi > 0.0 ? det / hi : 0.5 * (tr - r);
  return {lo, hi};
}

/// Von Neumann entropy in nats. Eigenvalues in [-1e-9, 0) are clamped to zero.
inline double von_neumann_entropy(const SingleSiteDensity& d) {
  auto lambda = eigenvalues_2x2(d.rho);
  for (double& l : lambda) {
    if (l < -1e-9) throw NumericalError("density matrix has eigenvalue " + std::to_string(l));
    l = std::max(l, 0.0);
  }
  return entropy_of_probabilities(lambda);
}

// ---------------------------------------------------------------------------
// Infinite-temperature OTOC C(t) = Tr([W(t),V]^H [W(t),V]) / 2^L with
// W = Z_w, V = Z_v. For Pauli operators C = 2 - 2 Tr(W(t) V W(t) V) / 2^L.

struct OtocValues {
  std::vector<std::vector<double>> c;  // c[v_index][time_index]
  double max_imag = 0.0;               // largest |Im C| before realification
};

namespace detail {

inline Eigen::VectorXd z_diagonal(int L, int site) {
  const int p = bit_position(L, site);
  Eigen::VectorXd z(Eigen::Index{1} << L);
  for (Eigen::Index a = 0; a < z.size(); ++a) z(a) = ((a >> p) & 1) ? -1.0 : 1.0;
  return z;
}

// Computational-basis route: build W(t) once per time, read off every V.
inline OtocValues otoc_real_computational(const Propagator& prop, int w_site,
                                          std::span<const int> v_sites,
                                          std::span<const double> times) {
  const int L = prop.num_sites();
  const Eigen::Index n = prop.dim();
  const Eigen::MatrixXd& u = prop.vectors_real();
  const Eigen::VectorXd& e = prop.energies();
  const Eigen::VectorXd zw = z_diagonal(L, w_site);
  const Eigen::MatrixXd w_eig = u.transpose() * (zw.asDiagonal() * u);
  std::vector<Eigen::VectorXd> zv;
  for (int v : v_sites) zv.push_back(z_diagonal(L, v));

  OtocValues out;
  out.c.assign(v_sites.size(), std::vector<double>(times.size()));
  Eigen::MatrixXd cos_part(n, n), sin_part(n, n), tmp(n, n), wr(n, n), wi(n, n), wr_t(n, n), wi_t(n, n);
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    const double t = times[ti];
    Eigen::VectorXcd phase(n);
    for (Eigen::Index k = 0; k < n; ++k) phase(k) = std::polar(1.0, e(k) * t);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) {
        const cplx f = phase(i) * std::conj(phase(j));
        cos_part(i, j) = w_eig(i, j) * f.real();
        sin_part(i, j) = w_eig(i, j) * f.imag();
      }
    linalg::gemm(u, false, cos_part, false, tmp);
    linalg::gemm(tmp, false, u, true, wr);
    linalg::gemm(u, false, sin_part, false, tmp);
    linalg::gemm(tmp, false, u, true, wi);
    wr_t = wr.transpose();
    wi_t = wi.transpose();
    for (std::size_t vi = 0; vi < zv.size(); ++vi) {
      const Eigen::VectorXd& z = zv[vi];
      double re = 0.0, im = 0.0;
      for (Eigen::Index b = 0; b < n; ++b)
        for (Eigen::Index a = 0; a < n; ++a) {
          const double sgn = z(a) * z(b);
          re += sgn * (wr(a, b) * wr_t(a, b) - wi(a, b) * wi_t(a, b));
          im += sgn * (wr(a, b) * wi_t(a, b) + wi(a, b) * wr_t(a, b));
        }
      const double scale = 2.0 / static_cast<double>(n);
      out.c[vi][ti] = 2.0 - scale * re;
      out.max_imag = std::max(out.max_imag, std::abs(scale * im));
    }
  }
  return out;
}

// Energy-eigenbasis route: Tr(A V~ A V~) with A = W~ o phases, one V at a time.
inline OtocValues otoc_real_eigenbasis(const Propagator& prop, int w_site,
                                       std::span<const int> v_sites,
                                       std::span<const double> times) {
  const int L = prop.num_sites();
  const Eigen::Index n = prop.dim();
  const Eigen::MatrixXd& u = prop.vectors_real();
  const Eigen::VectorXd& e = prop.energies();
  const Eigen::MatrixXd w_eig = u.transpose() * (z_diagonal(L, w_site).asDiagonal() * u);

  OtocValues out;
  out.c.assign(v_sites.size(), std::vector<double>(times.size()));
  Eigen::MatrixXd cos_part(n, n), sin_part(n, n), xr(n, n), xi(n, n);
  for (std::size_t vi = 0; vi < v_sites.size(); ++vi) {
    const Eigen::MatrixXd v_eig = u.transpose() * (z_diagonal(L, v_sites[vi]).asDiagonal() * u);
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      Eigen::VectorXcd phase(n);
      for (Eigen::Index k = 0; k < n; ++k) phase(k) = std::polar(1.0, e(k) * times[ti]);
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
          const cplx f = phase(i) * std::conj(phase(j));
          cos_part(i, j) = w_eig(i, j) * f.real();
          sin_part(i, j) = w_eig(i, j) * f.imag();
        }
      xr.noalias() = cos_part * v_eig;
      xi.noalias() = sin_part * v_eig;
      double re = 0.0, im = 0.0;
      for (Eigen::Index b = 0; b < n; ++b)
        for (Eigen::Index a = 0; a < n; ++a) {
          re += xr(a, b) * xr(b, a) - xi(a, b) * xi(b, a);
          im += xr(a, b) * xi(b, a) + xi(a, b) * xr(b, a);
        }
      const double scale = 2.0 / static_cast<double>(n);
      out.c[vi][ti] = 2.0 - scale * re;
      out.max_imag = std::max(out.max_imag, std::abs(scale * im));
    }
  }
  return out;
}

inline OtocValues otoc_complex(const Propagator& prop, int w_site, std::span<const int> v_sites,
                               std::span<const double> times) {
  const int L = prop.num_sites();
  const Eigen::Index n = prop.dim();
  const Eigen::MatrixXcd u =
      prop.vectors_real().cast<cplx>() + cplx(0, 1) * prop.vectors_imag().cast<cplx>();
  const Eigen::MatrixXcd w_eig =
      u.adjoint() * (z_diagonal(L, w_site).cast<cplx>().asDiagonal() * u);
  OtocValues out;
  out.c.assign(v_sites.size(), std::vector<double>(times.size()));
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    Eigen::VectorXcd phase(n);
    for (Eigen::Index k = 0; k < n; ++k) phase(k) = std::polar(1.0, prop.energies()(k) * times[ti]);
    const Eigen::MatrixXcd a = phase.asDiagonal() * w_eig * phase.conjugate().asDiagonal();
    const Eigen::MatrixXcd w = u * a * u.adjoint();
    for (std::size_t vi = 0; vi < v_sites.size(); ++vi) {
      const Eigen::VectorXd z = z_diagonal(L, v_sites[vi]);
      cplx tr = 0.0;
      for (Eigen::Index b = 0; b < n; ++b)
        for (Eigen::Index a2 = 0; a2 < n; ++a2) tr += z(a2) * z(b) * w(a2, b) * w(b, a2);
      const double scale = 2.0 / static_cast<double>(n);
      out.c[vi][ti] = 2.0 - scale * tr.real();
      out.max_imag = std::max(out.max_imag, std::abs(scale * tr.imag()));
    }
  }
  return out;
}

}  // namespace detail

enum class OtocRoute { Automatic, Computational, Eigenbasis };

inline OtocValues otoc(const Propagator& prop, int w_site, std::span<const int> v_sites,
                       std::span<const double> times, OtocRoute route = OtocRoute::Automatic) {
  const int L = prop.num_sites();
  auto check = [L](int s) {
    if (s < 0 || s >= L) throw ValidationError("OTOC site out of range");
  };
  check(w_site);
  for (int v : v_sites) {
    check(v);
    if (v == w_site) throw ValidationError("OTOC requires distinct W and V sites");
  }
  if (prop.is_complex()) return detail::otoc_complex(prop, w_site, v_sites, times);
  if (route == OtocRoute::Automatic)
    route = v_sites.size() <= 1 ? OtocRoute::Eigenbasis : OtocRoute::Computational;
  return route == OtocRoute::Eigenbasis
             ? detail::otoc_real_eigenbasis(prop, w_site, v_sites, times)
             : detail::otoc_real_computational(prop, w_site, v_sites, times);
}

/// Single-pair convenience overload building its own eigendecomposition.
inline std::vector<double> otoc(const OperatorSum& op, int w_site, int v_site,
                                std::span<const double> times, int capacity = kDefaultCapacity) {
  const int v[] = {v_site};
  return otoc(Propagator(op, capacity), w_site, v, times).c.front();
}

}  // namespace qlif::ed
