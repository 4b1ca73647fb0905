#pragma once

// Functional calculus for self-adjoint matrices: f(M) by eigendecomposition,
// resolvent entries by factorized solves, and f(M) by the Helffer-Sjostrand
// integral over a quasi-analytic extension of f.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mplab/jet.hpp"
#include "mplab/linalg.hpp"
#include "mplab/mp_analytics.hpp"
#include "mplab/quadrature.hpp"
#include "mplab/test_function.hpp"

namespace mplab {

/// Zero-based (row, column) index pair.
struct IndexPair {
  int i = 0;
  int j = 0;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

template <class S>
struct SpectralDecomposition {
  Vec<double> eigenvalues;  // ascending
  Mat<S> vectors;           // columns are eigenvectors
};

template <class S>
SpectralDecomposition<S> eigh(const Mat<S>& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("eigh: matrix is not square");
  SpectralDecomposition<S> d;
  d.vectors = m;
  lapack::eigh(d.vectors, d.eigenvalues, true);
  return d;
}

template <class S>
Vec<double> eigenvalues(const Mat<S>& m) {
  Mat<S> work = m;
  Vec<double> w;
  lapack::eigh(work, w, false);
  return w;
}

template <class S>
Mat<S> matrix_function_spectral(const SpectralDecomposition<S>& d, const TestFunction& f) {
  const Vec<double> fl = d.eigenvalues.unaryExpr([&](double x) { return f(x); });
  Mat<S> out = d.vectors * fl.asDiagonal() * d.vectors.adjoint();
  symmetrize_from_lower(out);
  return out;
}

template <class S>
Mat<S> matrix_function_spectral(const Mat<S>& m, const TestFunction& f) {
  return matrix_function_spectral(eigh(m), f);
}

/// f(M)_ij = sum_l Q_il f(lambda_l) conj(Q_jl) for the requested pairs only.
template <class S>
std::vector<S> matrix_function_entries(const SpectralDecomposition<S>& d, const TestFunction& f,
                                       const std::vector<IndexPair>& pairs) {
  const Vec<double> fl = d.eigenvalues.unaryExpr([&](double x) { return f(x); });
  std::vector<S> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    S acc{};
    for (Eigen::Index l = 0; l < fl.size(); ++l) acc += d.vectors(p.i, l) * fl[l] * conj_if(d.vectors(p.j, l));
    out.push_back(acc);
  }
  return out;
}

/// Columns `cols` of (z - M)^{-1}, by the cheapest stable factorization:
/// Cholesky of +-(z - M) for real shifts away from the spectrum, symmetric
/// LDL^T otherwise, complex symmetric LDL^T for a real matrix with complex z,
/// and LU for complex Hermitian matrices.
template <class S>
Mat<cplx> resolvent_columns(const Mat<S>& m, cplx z, const std::vector<int>& cols) {
  const Eigen::Index n = m.rows();
  if constexpr (!is_complex_v<S>) {
    if (z.imag() == 0.0) {
      Mat<double> rhs = Mat<double>::Zero(n, static_cast<Eigen::Index>(cols.size()));
      for (std::size_t k = 0; k < cols.size(); ++k) rhs(cols[k], static_cast<Eigen::Index>(k)) = 1.0;
      for (double sign : {1.0, -1.0}) {
        Mat<double> a = sign * (z.real() * Mat<double>::Identity(n, n) - m);
        if (lapack::cholesky(a)) {
          lapack::cholesky_solve(a, rhs);
          return (sign * rhs).template cast<cplx>();
        }
      }
      Mat<double> a = z.real() * Mat<double>::Identity(n, n) - m;
      lapack::symmetric_solve(a, rhs);
      return rhs.template cast<cplx>();
    }
  }
  Mat<cplx> rhs = Mat<cplx>::Zero(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) rhs(cols[k], static_cast<Eigen::Index>(k)) = 1.0;
  Mat<cplx> a = z * Mat<cplx>::Identity(n, n) - m.template cast<cplx>();
  if constexpr (is_complex_v<S>) {
    lapack::general_solve(a, rhs);
  } else {
    lapack::symmetric_solve(a, rhs);
  }
  return rhs;
}

/// Entries R_ij(z) of (z - M)^{-1} at zero-based pairs.
template <class S>
std::vector<cplx> resolvent_entries(const Mat<S>& m, cplx z, const std::vector<IndexPair>& pairs) {
  if (z.imag() == 0.0) {
    const Vec<double> ev = eigenvalues(m);
    double dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < ev.size(); ++k) dist = std::min(dist, std::abs(z.real() - ev[k]));
    if (!(dist > 1e-8)) throw DomainError("resolvent_entries: real shift within 1e-8 of the spectrum");
  }
  std::vector<int> cols;
  for (const auto& p : pairs)
    if (std::find(cols.begin(), cols.end(), p.j) == cols.end()) cols.push_back(p.j);
  const Mat<cplx> r = resolvent_columns(m, z, cols);
  std::vector<cplx> out;
  for (const auto& p : pairs) {
    const auto k = std::find(cols.begin(), cols.end(), p.j) - cols.begin();
    out.push_back(r(p.i, k));
  }
  return out;
}

/// R(z) = Q (z - T)^{-1} Q^* after one Householder tridiagonalization; each
/// new z costs a tridiagonal solve.  Corner entries use u_j = Q^* e_j:
/// R_ij = u_i^* (z - T)^{-1} u_j.
template <class S>
class TridiagonalResolvent {
 public:
  TridiagonalResolvent(const Mat<S>& m, int corner) : a_(m), corner_(corner) {
    if (m.rows() != m.cols()) throw std::invalid_argument("TridiagonalResolvent: matrix is not square");
    if (corner < 0 || corner > m.rows()) throw std::invalid_argument("TridiagonalResolvent: corner too large");
    lapack::tridiagonalize(a_, d_, e_, tau_);
    Mat<S> u = Mat<S>::Identity(a_.rows(), corner);
    lapack::apply_q_adjoint(a_, tau_, u);
    u_ = u.template cast<cplx>();
    eig_ = d_;
    lapack::tridiagonal_eigenvalues(eig_, e_);
  }

  Eigen::Index size() const { return a_.rows(); }
  const Vec<double>& eigenvalues() const { return eig_; }

  /// m x m top-left corner of R(z).
  Mat<cplx> corner(cplx z) const {
    Mat<cplx> y = u_;
    solve_shifted(z, y);
    return u_.adjoint() * y;
  }

  /// Normalized trace N^{-1} tr R(z).
  cplx trace(cplx z) const {
    cplx acc = 0.0;
    for (Eigen::Index k = 0; k < eig_.size(); ++k) acc += 1.0 / (z - eig_[k]);
    return acc / static_cast<double>(eig_.size());
  }

  /// (z - T)^{-1} in the tridiagonal basis.
  Mat<cplx> tridiagonal_inverse(cplx z) const {
    Mat<cplx> y = Mat<cplx>::Identity(size(), size());
    solve_shifted(z, y);
    return y;
  }

  /// Q k Q^*, mapping a tridiagonal-basis matrix back.
  Mat<S> to_original_basis(const Mat<S>& k) const {
    Mat<S> left = k;
    lapack::apply_q(a_, tau_, left);
    Mat<S> right = left.adjoint();
    lapack::apply_q(a_, tau_, right);
    return right.adjoint();
  }

 private:
  void solve_shifted(cplx z, Mat<cplx>& b) const {
    const auto n = static_cast<std::size_t>(d_.size());
    std::vector<cplx> dl(n > 0 ? n - 1 : 0), dd(n), du(n > 0 ? n - 1 : 0);
    for (std::size_t k = 0; k < n; ++k) dd[k] = z - d_[static_cast<Eigen::Index>(k)];
    for (std::size_t k = 0; k + 1 < n; ++k) dl[k] = du[k] = -e_[static_cast<Eigen::Index>(k)];
    lapack::tridiagonal_solve(std::move(dl), std::move(dd), std::move(du), b);
  }

  Mat<S> a_;
  int corner_;
  Vec<double> d_, e_, eig_;
  Vec<S> tau_;
  Mat<cplx> u_;
};

// ---------------------------------------------------------------------------
// Helffer-Sjostrand calculus.

/// Cutoff sigma(y): 1 on |y| <= 1/2, 0 on |y| >= 1, built from e^{-1/t} ramps.
struct Mollifier {
  double value(double y) const { return detail::smooth_step(2.0 * (1.0 - std::abs(y))); }
  double derivative(double y) const {
    const Jet<1> t = detail::smooth_step(Jet<1>::variable(2.0 * (1.0 - std::abs(y))));
    return -2.0 * std::copysign(1.0, y) * t[1];
  }
};

/// f~(x + iy) = sum_{n <= l} f^(n)(x) (iy)^n / n! * sigma(y).
class QuasiAnalyticExtension {
 public:
  static constexpr int kMaxOrder = 10;

  /// `y_scale` stretches the mollifier to sigma(y / y_scale); 0 picks one
  /// from the function's own length scale.
  explicit QuasiAnalyticExtension(TestFunction f, int order = 6, double y_scale = 0.0)
      : f_(std::move(f)), order_(order), y_scale_(y_scale > 0.0 ? y_scale : default_y_scale(f_)) {
    if (order < 0 || order > kMaxOrder)
      throw std::invalid_argument("extension order must lie in [0, " + std::to_string(kMaxOrder) + "]");
  }

  const TestFunction& function() const { return f_; }
  int order() const { return order_; }
  double y_scale() const { return y_scale_; }

  // The e^{-1/t} ramps have Taylor coefficients growing like (1/(ramp t^2))^n,
  // so the partial sums only stay O(1) for |y| below about ramp / 10.
  static double default_y_scale(const TestFunction& f) {
    if (f.family() == Family::indicator_smoothed) return std::min(1.0, 0.1 * f.ramp());
    return 1.0;
  }

  /// Taylor coefficients a_0..a_{l+1} at x.
  Jet<kMaxOrder + 1> taylor(double x) const { return f_.taylor<kMaxOrder + 1>(x); }

  cplx value(double x, double y) const { return value_from(taylor(x), y); }
  cplx dbar(double x, double y) const { return dbar_from(taylor(x), y); }

  cplx value_from(const Jet<kMaxOrder + 1>& a, double y) const {
    return partial_sum(a, y) * sigma_.value(y / y_scale_);
  }

  /// d f~/d zbar = (1/2)[(l+1) a_{l+1} (iy)^l sigma(y) + i sigma'(y) sum_{n<=l} a_n (iy)^n].
  cplx dbar_from(const Jet<kMaxOrder + 1>& a, double y) const {
    const double s = sigma_.value(y / y_scale_), ds = sigma_.derivative(y / y_scale_) / y_scale_;
    if (s == 0.0 && ds == 0.0) return 0.0;
    const cplx iy(0.0, y);
    const cplx top = static_cast<double>(order_ + 1) * a[static_cast<std::size_t>(order_ + 1)] *
                     std::pow(iy, order_) * s;
    return 0.5 * (top + cplx(0.0, ds) * partial_sum(a, y));
  }

 private:
  cplx partial_sum(const Jet<kMaxOrder + 1>& a, double y) const {
    const cplx iy(0.0, y);
    cplx acc = 0.0;
    for (int n = order_; n >= 0; --n) acc = acc * iy + a[static_cast<std::size_t>(n)];
    return acc;
  }

  TestFunction f_;
  int order_;
  double y_scale_;
  Mollifier sigma_;
};

/// Tensor grid for the y > 0 half of the strip: x is composite 4-point
/// Gauss-Legendre over supp f; y is log-spaced on [y_min, 1/2] (the part
/// where dbar f~ ~ y^l) and uniform on [1/2, 1] (the mollifier ramp).
struct HsGrid {
  int x_panels = 50;
  int y_log_panels = 8;
  int y_ramp_panels = 8;
  double y_min = 1e-4;
  double tolerance = 1e-3;        // relative Frobenius, for the refinement check
  bool verify_refinement = false;  // rerun on a grid refined 2x in x and y

  HsGrid refined() const {
    HsGrid g = *this;
    g.x_panels *= 2;
    g.y_log_panels *= 2;
    g.y_ramp_panels *= 2;
    g.verify_refinement = false;
    return g;
  }
};

class HsGridError : public std::runtime_error {
 public:
  HsGridError(double coarse_vs_fine, double tolerance)
      : std::runtime_error("Helffer-Sjostrand grid too coarse: relative difference to refined grid " +
                           std::to_string(coarse_vs_fine) + " > " + std::to_string(tolerance)),
        difference(coarse_vs_fine) {}
  double difference;
};

namespace detail {

// Nodes on (0, scale]; the grid itself is laid out for scale 1.
inline std::vector<std::pair<double, double>> hs_y_nodes(const HsGrid& g, double scale = 1.0) {
  std::vector<std::pair<double, double>> nodes;
  for (auto [t, w] : gauss_legendre_panels(std::log(g.y_min), std::log(0.5), g.y_log_panels)) {
    const double y = std::exp(t);
    nodes.emplace_back(scale * y, scale * w * y);
  }
  for (auto [y, w] : gauss_legendre_panels(0.5, 1.0, g.y_ramp_panels)) nodes.emplace_back(scale * y, scale * w);
  return nodes;
}

template <class S>
Mat<S> hs_integrate(const TridiagonalResolvent<S>& tr, const QuasiAnalyticExtension& ext, const HsGrid& g,
                    std::pair<double, double> support) {
  const Eigen::Index n = tr.size();
  const auto xs = gauss_legendre_panels(support.first, support.second, g.x_panels);
  const auto ys = hs_y_nodes(g, ext.y_scale());
  Mat<cplx> k = Mat<cplx>::Zero(n, n);
  for (const auto& [x, wx] : xs) {
    const auto a = ext.taylor(x);
    for (const auto& [y, wy] : ys) {
      const cplx weight = wx * wy * ext.dbar_from(a, y);
      if (weight == 0.0) continue;
      k += weight * tr.tridiagonal_inverse(cplx(x, y));
    }
  }
  // The y < 0 half contributes the adjoint: dbar f~(conj z) = conj dbar f~(z)
  // and R(conj z) = R(z)^*.
  const Mat<cplx> whole = -(k + k.adjoint()) / std::numbers::pi;
  Mat<S> t;
  if constexpr (is_complex_v<S>) t = whole;
  else t = whole.real();
  Mat<S> out = tr.to_original_basis(t);
  symmetrize_from_lower(out);
  return out;
}

}  // namespace detail

/// f(M) = -(1/pi) int int d f~/d zbar (x+iy) (x + iy - M)^{-1} dx dy.
template <class S>
Mat<S> matrix_function_hs(const Mat<S>& m, const QuasiAnalyticExtension& ext, const HsGrid& grid = {}) {
  const auto support = ext.function().support();
  if (!support) throw std::invalid_argument("matrix_function_hs needs a compactly supported function");
  const TridiagonalResolvent<S> tr(m, 0);
  Mat<S> out = detail::hs_integrate(tr, ext, grid, *support);
  if (grid.verify_refinement) {
    const Mat<S> fine = detail::hs_integrate(tr, ext, grid.refined(), *support);
    const double scale = std::max(fine.norm(), 1e-300);
    const double diff = (out - fine).norm() / scale;
    if (diff > grid.tolerance) throw HsGridError(diff, grid.tolerance);
  }
  return out;
}

/// max-norm of B^*(z - BB^*)^{-1} B - B^*B (z - B^*B)^{-1}.
inline double commute_identity_residual(const Mat<cplx>& b, cplx z) {
  if (z == 0.0) throw DomainError("commute_identity_residual: z = 0");
  const Eigen::Index N = b.rows(), n = b.cols();
  Mat<cplx> left_sys = z * Mat<cplx>::Identity(N, N) - b * b.adjoint();
  Mat<cplx> left = b;
  lapack::general_solve(left_sys, left);  // (z - BB^*)^{-1} B
  const Mat<cplx> lhs = b.adjoint() * left;

  // X = B^*B (z - B^*B)^{-1}  <=>  (z - B^*B)^* X^* = (B^*B)^*.
  const Mat<cplx> g = b.adjoint() * b;
  Mat<cplx> right_sys = (z * Mat<cplx>::Identity(n, n) - g).adjoint();
  Mat<cplx> xt = g.adjoint();
  lapack::general_solve(right_sys, xt);
  const Mat<cplx> rhs = xt.adjoint();
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

inline double commute_identity_residual(const Mat<double>& b, cplx z) {
  return commute_identity_residual(Mat<cplx>(b.cast<cplx>()), z);
}

}  // namespace mplab
