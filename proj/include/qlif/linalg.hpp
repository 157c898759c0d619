#pragma once

// Thin LAPACKE wrappers for the dense kernels that dominate runtime.
// Eigen is used for storage; LAPACK does the heavy lifting.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <cstring>
#include <string>

#include <unistd.h>

#include <Eigen/Dense>
#include <cblas.h>
#include <lapacke.h>

#include "qlif/errors.hpp"

namespace qlif::linalg {

using cplx = std::complex<double>;

struct RealEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns
};

struct ComplexEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
};

struct Svd {
  Eigen::MatrixXcd u;
  Eigen::VectorXd s;  // descending
  Eigen::MatrixXcd vh;
};

/// Compares a BLAS dgemm against Eigen's own product. Some OpenBLAS builds
/// auto-select a kernel set whose gemm is wrong on recent AVX-512 CPUs.
inline bool blas_gemm_ok() {
  static const bool ok = [] {
    const int n = 256;
    Eigen::MatrixXd a(n, n), b(n, n), c(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        a(i, j) = std::sin(0.37 * i + 1.3 * j);
        b(i, j) = std::cos(0.71 * i - 0.2 * j);
      }
    cblas_dgemm(CblasColMajor, CblasNoTrans, CblasNoTrans, n, n, n, 1.0, a.data(), n, b.data(), n,
                0.0, c.data(), n);
    const Eigen::MatrixXd ref = a.lazyProduct(b);
    return (c - ref).cwiseAbs().maxCoeff() < 1e-9 * n;
  }();
  return ok;
}

inline constexpr const char* kFallbackCore = "SkylakeX";

/// Call at the top of main. When the BLAS self-check fails and no core type
/// was forced, re-executes the program with OPENBLAS_CORETYPE pinned.
inline void ensure_reliable_blas(char** argv) {
  if (blas_gemm_ok() || std::getenv("OPENBLAS_CORETYPE")) return;
  ::setenv("OPENBLAS_CORETYPE", kFallbackCore, 1);
  ::execv("/proc/self/exe", argv);
}

inline void require_reliable_blas() {
  if (!blas_gemm_ok())
    throw NumericalError(std::string("BLAS gemm self-check failed; set OPENBLAS_CORETYPE=") +
                         kFallbackCore + " or call linalg::ensure_reliable_blas");
}

/// c = op(a) * op(b) through BLAS, for large dense products.
inline void gemm(const Eigen::MatrixXd& a, bool trans_a, const Eigen::MatrixXd& b, bool trans_b,
                 Eigen::MatrixXd& c) {
  require_reliable_blas();
  const Eigen::Index m = trans_a ? a.cols() : a.rows();
  const Eigen::Index k = trans_a ? a.rows() : a.cols();
  const Eigen::Index n = trans_b ? b.rows() : b.cols();
  if ((trans_b ? b.cols() : b.rows()) != k) throw ValidationError("gemm dimension mismatch");
  c.resize(m, n);
  cblas_dgemm(CblasColMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0, a.data(),
              static_cast<int>(a.rows()), b.data(), static_cast<int>(b.rows()), 0.0, c.data(),
              static_cast<int>(c.rows()));
}

inline RealEigen eigh(Eigen::MatrixXd a) {
  require_reliable_blas();
  const auto n = static_cast<lapack_int>(a.rows());
  RealEigen out;
  out.values.resize(n);
  if (n > 0) {
    const lapack_int info =
        LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, a.data(), n, out.values.data());
    if (info != 0) throw NumericalError("dsyevd failed, info=" + std::to_string(info));
  }
  out.vectors = std::move(a);
  return out;
}

inline ComplexEigen eigh(Eigen::MatrixXcd a) {
  require_reliable_blas();
  const auto n = static_cast<lapack_int>(a.rows());
  ComplexEigen out;
  out.values.resize(n);
  if (n > 0) {
    const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n,
                                           reinterpret_cast<lapack_complex_double*>(a.data()),
                                           n, out.values.data());
    if (info != 0) throw NumericalError("zheevd failed, info=" + std::to_string(info));
  }
  out.vectors = std::move(a);
  return out;
}

/// Thin SVD a = u * diag(s) * vh. Falls back to the QR-iteration driver when
/// the divide-and-conquer one does not converge.
inline Svd svd(const Eigen::MatrixXcd& a) {
  const auto m = static_cast<lapack_int>(a.rows());
  const auto n = static_cast<lapack_int>(a.cols());
  const lapack_int k = std::min(m, n);
  Svd out;
  out.u.resize(m, k);
  out.s.resize(k);
  out.vh.resize(k, n);
  if (k == 0) return out;
  require_reliable_blas();

  Eigen::MatrixXcd work = a;
  auto* pa = reinterpret_cast<lapack_complex_double*>(work.data());
  auto* pu = reinterpret_cast<lapack_complex_double*>(out.u.data());
  auto* pv = reinterpret_cast<lapack_complex_double*>(out.vh.data());
  lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'S', m, n, pa, m, out.s.data(), pu, m, pv, k);
  if (info != 0) {
    work = a;
    Eigen::VectorXd superb(k);
    info = LAPACKE_zgesvd(LAPACK_COL_MAJOR, 'S', 'S', m, n, pa, m, out.s.data(), pu, m, pv, k,
                          superb.data());
    if (info != 0) throw NumericalError("zgesvd failed, info=" + std::to_string(info));
  }
  return out;
}

/// Largest |a - a^H| element.
inline double hermiticity_defect(const Eigen::MatrixXcd& a) {
  if (a.size() == 0) return 0.0;
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace qlif::linalg
