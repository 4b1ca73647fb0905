#pragma once

// Thin LAPACKE/CBLAS layer over Eigen column-major storage.  Every routine is
// overloaded for double and std::complex<double> so the callers can be
// written once for both fields.

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#ifndef LAPACK_COMPLEX_CPP
#define LAPACK_COMPLEX_CPP
#endif
#include <cblas.h>
#include <lapacke.h>

namespace mplab {

using cplx = std::complex<double>;
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

class LinalgError : public std::runtime_error {
 public:
  LinalgError(const std::string& routine, lapack_int info)
      : std::runtime_error(routine + " failed (info = " + std::to_string(info) + ")"), info_(info) {}
  lapack_int info() const { return info_; }

 private:
  lapack_int info_;
};

template <class S>
inline constexpr bool is_complex_v = false;
template <>
inline constexpr bool is_complex_v<cplx> = true;

inline double conj_if(double x) { return x; }
inline cplx conj_if(cplx x) { return std::conj(x); }

namespace lapack {

inline void check(const char* name, lapack_int info) {
  if (info != 0) throw LinalgError(name, info);
}

inline lapack_int ld(lapack_int rows) { return rows > 0 ? rows : 1; }

// std::complex<double> and LAPACK's complex type share layout.
inline lapack_complex_double* lc(cplx* p) { return reinterpret_cast<lapack_complex_double*>(p); }
inline const lapack_complex_double* lc(const cplx* p) { return reinterpret_cast<const lapack_complex_double*>(p); }

/// Lower triangle of alpha * A A^* (+ beta C) into C (N x N), A is N x n.
inline void rank_k(double alpha, const Mat<double>& a, Mat<double>& c) {
  const auto n = static_cast<blasint>(a.rows()), k = static_cast<blasint>(a.cols());
  cblas_dsyrk(CblasColMajor, CblasLower, CblasNoTrans, n, k, alpha, a.data(), ld(n), 0.0, c.data(), ld(n));
}
inline void rank_k(double alpha, const Mat<cplx>& a, Mat<cplx>& c) {
  const auto n = static_cast<blasint>(a.rows()), k = static_cast<blasint>(a.cols());
  cblas_zherk(CblasColMajor, CblasLower, CblasNoTrans, n, k, alpha, a.data(), ld(n), 0.0, c.data(), ld(n));
}

/// Eigenvalues (ascending) and, if vectors, eigenvectors overwriting a.
inline void eigh(Mat<double>& a, Vec<double>& w, bool vectors) {
  const auto n = static_cast<lapack_int>(a.rows());
  w.resize(n);
  check("dsyevd", LAPACKE_dsyevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'L', n, a.data(), ld(n), w.data()));
}
inline void eigh(Mat<cplx>& a, Vec<double>& w, bool vectors) {
  const auto n = static_cast<lapack_int>(a.rows());
  w.resize(n);
  check("zheevd", LAPACKE_zheevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'L', n, lc(a.data()), ld(n), w.data()));
}

/// Householder tridiagonalization (lower): diag d, off-diagonal e, reflectors in a/tau.
inline void tridiagonalize(Mat<double>& a, Vec<double>& d, Vec<double>& e, Vec<double>& tau) {
  const auto n = static_cast<lapack_int>(a.rows());
  d.resize(n);
  e.resize(n > 1 ? n - 1 : 1);
  tau.resize(n > 1 ? n - 1 : 1);
  check("dsytrd", LAPACKE_dsytrd(LAPACK_COL_MAJOR, 'L', n, a.data(), ld(n), d.data(), e.data(), tau.data()));
}
inline void tridiagonalize(Mat<cplx>& a, Vec<double>& d, Vec<double>& e, Vec<cplx>& tau) {
  const auto n = static_cast<lapack_int>(a.rows());
  d.resize(n);
  e.resize(n > 1 ? n - 1 : 1);
  tau.resize(n > 1 ? n - 1 : 1);
  check("zhetrd", LAPACKE_zhetrd(LAPACK_COL_MAJOR, 'L', n, lc(a.data()), ld(n), d.data(), e.data(), lc(tau.data())));
}

/// c <- Q^* c with Q from tridiagonalize.
inline void apply_q_adjoint(const Mat<double>& a, const Vec<double>& tau, Mat<double>& c) {
  const auto n = static_cast<lapack_int>(a.rows()), m = static_cast<lapack_int>(c.cols());
  if (n <= 1 || m == 0) return;
  check("dormtr", LAPACKE_dormtr(LAPACK_COL_MAJOR, 'L', 'L', 'T', n, m, a.data(), ld(n), tau.data(), c.data(), ld(n)));
}
inline void apply_q_adjoint(const Mat<cplx>& a, const Vec<cplx>& tau, Mat<cplx>& c) {
  const auto n = static_cast<lapack_int>(a.rows()), m = static_cast<lapack_int>(c.cols());
  if (n <= 1 || m == 0) return;
  check("zunmtr", LAPACKE_zunmtr(LAPACK_COL_MAJOR, 'L', 'L', 'C', n, m, lc(a.data()), ld(n), lc(tau.data()), lc(c.data()), ld(n)));
}
/// c <- Q c.
inline void apply_q(const Mat<double>& a, const Vec<double>& tau, Mat<double>& c) {
  const auto n = static_cast<lapack_int>(a.rows()), m = static_cast<lapack_int>(c.cols());
  if (n <= 1 || m == 0) return;
  check("dormtr", LAPACKE_dormtr(LAPACK_COL_MAJOR, 'L', 'L', 'N', n, m, a.data(), ld(n), tau.data(), c.data(), ld(n)));
}
inline void apply_q(const Mat<cplx>& a, const Vec<cplx>& tau, Mat<cplx>& c) {
  const auto n = static_cast<lapack_int>(a.rows()), m = static_cast<lapack_int>(c.cols());
  if (n <= 1 || m == 0) return;
  check("zunmtr", LAPACKE_zunmtr(LAPACK_COL_MAJOR, 'L', 'L', 'N', n, m, lc(a.data()), ld(n), lc(tau.data()), lc(c.data()), ld(n)));
}

/// Eigenvalues of a symmetric tridiagonal matrix (ascending, d overwritten).
inline void tridiagonal_eigenvalues(Vec<double>& d, Vec<double> e) {
  const auto n = static_cast<lapack_int>(d.size());
  check("dsterf", LAPACKE_dsterf(n, d.data(), e.data()));
}

/// Solves the complex tridiagonal system (dl, d, du) x = b in place.
inline void tridiagonal_solve(std::vector<cplx> dl, std::vector<cplx> d, std::vector<cplx> du, Mat<cplx>& b) {
  const auto n = static_cast<lapack_int>(d.size()), m = static_cast<lapack_int>(b.cols());
  check("zgtsv", LAPACKE_zgtsv(LAPACK_COL_MAJOR, n, m, lc(dl.data()), lc(d.data()), lc(du.data()), lc(b.data()), ld(n)));
}

/// Cholesky of a (lower); returns false if not positive definite.
inline bool cholesky(Mat<double>& a) {
  const auto n = static_cast<lapack_int>(a.rows());
  const lapack_int info = LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, a.data(), ld(n));
  if (info < 0) check("dpotrf", info);
  return info == 0;
}
inline void cholesky_solve(const Mat<double>& l, Mat<double>& b) {
  const auto n = static_cast<lapack_int>(l.rows()), m = static_cast<lapack_int>(b.cols());
  check("dpotrs", LAPACKE_dpotrs(LAPACK_COL_MAJOR, 'L', n, m, l.data(), ld(n), b.data(), ld(n)));
}

/// Symmetric indefinite (Bunch-Kaufman) factor-and-solve, real or complex
/// symmetric (not Hermitian).
inline void symmetric_solve(Mat<double>& a, Mat<double>& b) {
  const auto n = static_cast<lapack_int>(a.rows()), m = static_cast<lapack_int>(b.cols());
  std::vector<lapack_int> piv(static_cast<std::size_t>(n));
  check("dsysv", LAPACKE_dsysv(LAPACK_COL_MAJOR, 'L', n, m, a.data(), ld(n), piv.data(), b.data(), ld(n)));
}
inline void symmetric_solve(Mat<cplx>& a, Mat<cplx>& b) {
  const auto n = static_cast<lapack_int>(a.rows()), m = static_cast<lapack_int>(b.cols());
  std::vector<lapack_int> piv(static_cast<std::size_t>(n));
  check("zsysv", LAPACKE_zsysv(LAPACK_COL_MAJOR, 'L', n, m, lc(a.data()), ld(n), piv.data(), lc(b.data()), ld(n)));
}
/// General LU factor-and-solve.
inline void general_solve(Mat<cplx>& a, Mat<cplx>& b) {
  const auto n = static_cast<lapack_int>(a.rows()), m = static_cast<lapack_int>(b.cols());
  std::vector<lapack_int> piv(static_cast<std::size_t>(n));
  check("zgesv", LAPACKE_zgesv(LAPACK_COL_MAJOR, n, m, lc(a.data()), ld(n), piv.data(), lc(b.data()), ld(n)));
}

}  // namespace lapack

/// Copies the lower triangle onto the upper one (conjugated), and zeroes the
/// imaginary part of a Hermitian diagonal.
template <class S>
void symmetrize_from_lower(Mat<S>& a) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    if constexpr (is_complex_v<S>) a(j, j) = a(j, j).real();
    for (Eigen::Index i = j + 1; i < n; ++i) a(j, i) = conj_if(a(i, j));
  }
}

}  // namespace mplab
