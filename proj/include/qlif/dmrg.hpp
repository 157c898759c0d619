#pragma once

// Two-site DMRG ground-state search.
//
// The Hamiltonian is turned into an MPO by a finite-state construction:
// every link carries the states {start, done, carry_k}, where carry_k holds
// the k-th left factor of the operator-Schmidt decomposition of the bond
// term across that link.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qlif/errors.hpp"
#include "qlif/linalg.hpp"
#include "qlif/mps.hpp"
#include "qlif/spin_model.hpp"

namespace qlif::mps {

struct MpoSite {
  int dl = 1;
  int dr = 1;
  std::vector<Eigen::Matrix2cd> w;  // row-major (left state, right state)
  std::vector<char> nonzero;

  const Eigen::Matrix2cd& at(int a, int b) const { return w[a * dr + b]; }
  bool has(int a, int b) const { return nonzero[a * dr + b] != 0; }
  void set(int a, int b, const Eigen::Matrix2cd& m) {
    w[a * dr + b] = m;
    nonzero[a * dr + b] = 1;
  }
};

class Mpo {
 public:
  explicit Mpo(const OperatorSum& op) {
    const int L = op.num_sites();
    std::vector<Eigen::Matrix2cd> onsite(L, Eigen::Matrix2cd::Zero());
    std::vector<Eigen::Matrix4cd> bond(std::max(L - 1, 0), Eigen::Matrix4cd::Zero());
    for (const auto& t : op.terms()) {
      if (t.width == 1)
        onsite[t.site] += t.block;
      else
        bond[t.site] += t.block;
    }

    // Operator-Schmidt factors h = sum_k left_k (x) right_k per bond.
    std::vector<std::vector<Eigen::Matrix2cd>> left(bond.size()), right(bond.size());
    for (std::size_t i = 0; i < bond.size(); ++i) {
      Eigen::MatrixXcd m(4, 4);
      for (int s1 = 0; s1 < 2; ++s1)
        for (int s2 = 0; s2 < 2; ++s2)
          for (int t1 = 0; t1 < 2; ++t1)
            for (int t2 = 0; t2 < 2; ++t2) m(2 * s1 + t1, 2 * s2 + t2) = bond[i](2 * s1 + s2, 2 * t1 + t2);
      const auto dec = linalg::svd(m);
      const double scale = dec.s.size() ? dec.s(0) : 0.0;
      for (Eigen::Index k = 0; k < dec.s.size(); ++k) {
        if (dec.s(k) <= 1e-14 * scale || dec.s(k) == 0.0) break;
        const double root = std::sqrt(dec.s(k));
        Eigen::Matrix2cd a, b;
        for (int s = 0; s < 2; ++s)
          for (int t = 0; t < 2; ++t) {
            a(s, t) = dec.u(2 * s + t, k) * root;
            b(s, t) = dec.vh(k, 2 * s + t) * root;
          }
        left[i].push_back(a);
        right[i].push_back(b);
      }
    }

    const Eigen::Matrix2cd id = pauli::identity();
    sites_.resize(L);
    for (int i = 0; i < L; ++i) {
      MpoSite& s = sites_[i];
      s.dl = i == 0 ? 1 : 2 + static_cast<int>(left[i - 1].size());
      s.dr = i == L - 1 ? 1 : 2 + static_cast<int>(left[i].size());
      s.w.assign(s.dl * s.dr, Eigen::Matrix2cd::Zero());
      s.nonzero.assign(s.dl * s.dr, 0);
      const int start_l = 0;
      const int done_r = i == L - 1 ? 0 : 1;
      if (i < L - 1) s.set(start_l, 0, id);
      s.set(start_l, done_r, onsite[i]);
      if (i < L - 1)
        for (std::size_t k = 0; k < left[i].size(); ++k) s.set(start_l, 2 + static_cast<int>(k), left[i][k]);
      if (i > 0) {
        for (std::size_t k = 0; k < right[i - 1].size(); ++k)
          s.set(2 + static_cast<int>(k), done_r, right[i - 1][k]);
        s.set(1, done_r, id);
      }
    }
  }

  int size() const { return static_cast<int>(sites_.size()); }
  const MpoSite& site(int i) const { return sites_[i]; }

 private:
  std::vector<MpoSite> sites_;
};

namespace detail {

using Env = std::vector<Eigen::MatrixXcd>;

inline Env trivial_env() { return {Eigen::MatrixXcd::Ones(1, 1)}; }

inline Env extend_left(const Env& env, const MpoSite& w, const SiteTensor& a) {
  Env out(w.dr, Eigen::MatrixXcd::Zero(a.right_dim(), a.right_dim()));
  for (int x = 0; x < w.dl; ++x) {
    Eigen::MatrixXcd la[2];
    for (int s = 0; s < 2; ++s) la[s] = env[x] * a.a[s];
    for (int y = 0; y < w.dr; ++y) {
      if (!w.has(x, y)) continue;
      const auto& op = w.at(x, y);
      for (int sp = 0; sp < 2; ++sp)
        for (int s = 0; s < 2; ++s)
          if (op(sp, s) != cplx(0.0)) out[y].noalias() += op(sp, s) * (a.a[sp].adjoint() * la[s]);
    }
  }
  return out;
}

inline Env extend_right(const Env& env, const MpoSite& w, const SiteTensor& b) {
  Env out(w.dl, Eigen::MatrixXcd::Zero(b.left_dim(), b.left_dim()));
  for (int y = 0; y < w.dr; ++y) {
    Eigen::MatrixXcd rb[2];
    for (int s = 0; s < 2; ++s) rb[s] = env[y] * b.a[s].transpose();
    for (int x = 0; x < w.dl; ++x) {
      if (!w.has(x, y)) continue;
      const auto& op = w.at(x, y);
      for (int sp = 0; sp < 2; ++sp)
        for (int s = 0; s < 2; ++s)
          if (op(sp, s) != cplx(0.0)) out[x].noalias() += op(sp, s) * (b.a[sp].conjugate() * rb[s]);
    }
  }
  return out;
}

// Two-site effective Hamiltonian acting on Theta (rows (s1,l), cols (s2,r)).
class EffectiveHamiltonian {
 public:
  EffectiveHamiltonian(const Env& left, const MpoSite& w1, const MpoSite& w2, const Env& right,
                       Eigen::Index dl, Eigen::Index dr)
      : left_(left), w1_(w1), w2_(w2), right_(right), dl_(dl), dr_(dr) {}

  Eigen::Index dim() const { return 4 * dl_ * dr_; }

  Eigen::MatrixXcd apply(const Eigen::MatrixXcd& theta) const {
    auto blk = [&](const Eigen::MatrixXcd& m, int s1, int s2) {
      return m.block(s1 * dl_, s2 * dr_, dl_, dr_);
    };
    // y[b][s1'][s2] = sum_{a,s1} W1[a][b](s1',s1) L[a] theta[s1][s2]
    std::vector<Eigen::MatrixXcd> y(static_cast<std::size_t>(w1_.dr) * 4,
                                    Eigen::MatrixXcd::Zero(dl_, dr_));
    for (int a = 0; a < w1_.dl; ++a) {
      Eigen::MatrixXcd x[2][2];
      bool built = false;
      for (int b = 0; b < w1_.dr; ++b) {
        if (!w1_.has(a, b)) continue;
        if (!built) {
          for (int s1 = 0; s1 < 2; ++s1)
            for (int s2 = 0; s2 < 2; ++s2) x[s1][s2].noalias() = left_[a] * blk(theta, s1, s2);
          built = true;
        }
        const auto& op = w1_.at(a, b);
        for (int s1p = 0; s1p < 2; ++s1p)
          for (int s1 = 0; s1 < 2; ++s1) {
            if (op(s1p, s1) == cplx(0.0)) continue;
            for (int s2 = 0; s2 < 2; ++s2) y[(b * 2 + s1p) * 2 + s2] += op(s1p, s1) * x[s1][s2];
          }
      }
    }
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(theta.rows(), theta.cols());
    for (int c = 0; c < w2_.dr; ++c) {
      Eigen::MatrixXcd z[2][2];
      bool any = false;
      for (int s1p = 0; s1p < 2; ++s1p)
        for (int s2p = 0; s2p < 2; ++s2p) z[s1p][s2p] = Eigen::MatrixXcd::Zero(dl_, dr_);
      for (int b = 0; b < w2_.dl; ++b) {
        if (!w2_.has(b, c)) continue;
        any = true;
        const auto& op = w2_.at(b, c);
        for (int s2p = 0; s2p < 2; ++s2p)
          for (int s2 = 0; s2 < 2; ++s2) {
            if (op(s2p, s2) == cplx(0.0)) continue;
            for (int s1p = 0; s1p < 2; ++s1p) z[s1p][s2p] += op(s2p, s2) * y[(b * 2 + s1p) * 2 + s2];
          }
      }
      if (!any) continue;
      const Eigen::MatrixXcd rt = right_[c].transpose();
      for (int s1p = 0; s1p < 2; ++s1p)
        for (int s2p = 0; s2p < 2; ++s2p)
          out.block(s1p * dl_, s2p * dr_, dl_, dr_).noalias() += z[s1p][s2p] * rt;
    }
    return out;
  }

 private:
  const Env& left_;
  const MpoSite& w1_;
  const MpoSite& w2_;
  const Env& right_;
  Eigen::Index dl_, dr_;
};

struct Eigenpair {
  double value = 0.0;
  Eigen::MatrixXcd vector;
};

// Lanczos with full reorthogonalization and restarts from the Ritz vector.
inline Eigenpair lowest_eigenpair(const EffectiveHamiltonian& h, const Eigen::MatrixXcd& start,
                                  double tol = 1e-12, int krylov = 40, int restarts = 20) {
  const Eigen::Index rows = start.rows(), cols = start.cols();
  const Eigen::Index n = rows * cols;
  auto flat = [](const Eigen::MatrixXcd& m) { return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size()); };

  Eigen::VectorXcd x = flat(start);
  if (x.norm() < 1e-300) x.setOnes();
  x.normalize();
  Eigenpair best;
  for (int r = 0; r <= restarts; ++r) {
    const int m_max = static_cast<int>(std::min<Eigen::Index>(krylov, n));
    std::vector<Eigen::VectorXcd> basis{x};
    std::vector<double> alpha, beta;
    Eigen::VectorXd ritz;
    Eigen::MatrixXd ritz_vecs;
    double residual = 0.0;
    for (int j = 0; j < m_max; ++j) {
      Eigen::MatrixXcd v = Eigen::Map<const Eigen::MatrixXcd>(basis[j].data(), rows, cols);
      Eigen::MatrixXcd hv = h.apply(v);
      Eigen::VectorXcd w = flat(hv);
      alpha.push_back(basis[j].dot(w).real());
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : basis) w -= q.dot(w) * q;
      const double b = w.norm();

      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(j + 1, j + 1);
      for (int k = 0; k <= j; ++k) t(k, k) = alpha[k];
      for (int k = 0; k < j; ++k) t(k, k + 1) = t(k + 1, k) = beta[k];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri(t);
      ritz = tri.eigenvalues();
      ritz_vecs = tri.eigenvectors();
      residual = b * std::abs(ritz_vecs(j, 0));
      if (residual < tol || b < 1e-14 || j + 1 == m_max) break;
      beta.push_back(b);
      basis.push_back(w / b);
    }
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n);
    for (Eigen::Index k = 0; k < ritz_vecs.rows(); ++k) y += ritz_vecs(k, 0) * basis[k];
    y.normalize();
    best.value = ritz(0);
    best.vector = Eigen::Map<const Eigen::MatrixXcd>(y.data(), rows, cols);
    if (residual < tol || static_cast<Eigen::Index>(basis.size()) >= n) break;
    x = y;
  }
  return best;
}

}  // namespace detail

/// <psi|H|psi> / <psi|psi> by a full left-to-right environment contraction.
inline double mpo_expectation(const Mpo& mpo, const MPSState& psi) {
  if (mpo.size() != psi.size()) throw ValidationError("MPO and MPS sizes differ");
  detail::Env env = detail::trivial_env();
  detail::Env norm_env{Eigen::MatrixXcd::Ones(1, 1)};
  for (int i = 0; i < psi.size(); ++i) {
    env = detail::extend_left(env, mpo.site(i), psi.site(i));
    const auto& a = psi.site(i);
    Eigen::MatrixXcd n = Eigen::MatrixXcd::Zero(a.right_dim(), a.right_dim());
    for (int s = 0; s < 2; ++s) n.noalias() += a.a[s].adjoint() * norm_env[0] * a.a[s];
    norm_env[0] = n;
  }
  return (env[0](0, 0) / norm_env[0](0, 0)).real();
}

struct DMRGConfig {
  int chi = 64;
  double tolerance = 1e-10;
  int max_sweeps = 100;
  int warmup_sweeps = 2;
  int warmup_chi = 16;
  double svd_cutoff = 1e-14;
  std::uint64_t seed = 20240601;

  friend bool operator==(const DMRGConfig&, const DMRGConfig&) = default;
};

struct DMRGResult {
  double energy = 0.0;
  MPSState state;
  bool converged = false;
  int sweeps = 0;
  std::vector<double> sweep_energies;
};

/// Seeded random product state.
inline MPSState random_product_mps(int L, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<BlochDirection> dirs;
  for (int i = 0; i < L; ++i) {
    BlochDirection d{gauss(rng), gauss(rng), gauss(rng)};
    if (d.x == 0 && d.y == 0 && d.z == 0) d.z = 1;
    dirs.push_back(d);
  }
  return mps_from_product(dirs);
}

inline DMRGResult dmrg_ground_state(const OperatorSum& op, const DMRGConfig& cfg = {}) {
  const int L = op.num_sites();
  if (L < 2) throw ValidationError("DMRG needs at least two sites");
  if (cfg.chi < 1) throw ValidationError("DMRG chi must be >= 1");
  const Mpo mpo(op);
  MPSState psi = random_product_mps(L, cfg.seed);
  psi.canonicalize(0);

  std::vector<detail::Env> lenv(L), renv(L);
  lenv[0] = detail::trivial_env();
  renv[L - 1] = detail::trivial_env();
  for (int i = L - 1; i > 0; --i) renv[i - 1] = detail::extend_right(renv[i], mpo.site(i), psi.site(i));

  auto optimize = [&](int i, int chi, bool move_right) {
    const Eigen::Index dl = psi.site(i).left_dim(), dr = psi.site(i + 1).right_dim();
    const detail::EffectiveHamiltonian h(lenv[i], mpo.site(i), mpo.site(i + 1), renv[i + 1], dl, dr);
    const auto pair = detail::lowest_eigenpair(h, psi.two_site_matrix(i));
    psi.split_two_site(i, pair.vector, {chi, cfg.svd_cutoff}, move_right);
    if (move_right)
      lenv[i + 1] = detail::extend_left(lenv[i], mpo.site(i), psi.site(i));
    else
      renv[i] = detail::extend_right(renv[i + 1], mpo.site(i + 1), psi.site(i + 1));
    return pair.value;
  };

  auto sweep = [&](int chi) {
    double e = 0.0;
    for (int i = 0; i + 1 < L; ++i) e = optimize(i, chi, true);
    for (int i = L - 2; i >= 0; --i) e = optimize(i, chi, false);
    return e;
  };

  DMRGResult out;
  for (int k = 0; k < cfg.warmup_sweeps; ++k) sweep(std::min(cfg.warmup_chi, cfg.chi));
  double previous = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.max_sweeps; ++k) {
    const double e = sweep(cfg.chi);
    out.sweep_energies.push_back(e);
    ++out.sweeps;
    if (std::abs(e - previous) < cfg.tolerance) {
      out.converged = true;
      break;
    }
    previous = e;
  }
  psi.normalize();
  out.energy = mpo_expectation(mpo, psi);
  out.state = std::move(psi);
  return out;
}

}  // namespace qlif::mps
