#pragma once

// Marchenko-Pastur law and the limiting functionals of the entrywise CLT for
// sample covariance matrices M = A A* / N.
//
// Integrals against the MP law use the substitution
//     x = u- + (u+ - u-) sin^2(theta),  theta in [0, pi/2],
// under which density(x) dx = (u+ - u-)^2 sin^2 cos^2 / (pi sigma^2 x) dtheta
// is smooth up to both edges (including the x^{-1/2} edge at 0 when c = 1).
// The atom of weight (1 - c)_+ at zero is added separately.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mplab/quadrature.hpp"
#include "mplab/test_function.hpp"

namespace mplab {

using cplx = std::complex<double>;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class Field { real, complex };

inline const char* to_string(Field f) { return f == Field::real ? "real" : "complex"; }

/// Scale index sigma^2 and ratio index c of the Marchenko-Pastur law.
struct MpParams {
  double sigma2 = 1.0;
  double c = 1.0;

  MpParams() = default;
  MpParams(double sigma2_, double c_) : sigma2(sigma2_), c(c_) {
    if (!(sigma2 > 0.0) || !(c > 0.0) || !std::isfinite(sigma2) || !std::isfinite(c))
      throw std::invalid_argument("MpParams requires sigma2 > 0 and c > 0");
  }

  double u_minus() const {
    const double s = 1.0 - std::sqrt(c);
    return sigma2 * s * s;
  }
  double u_plus() const {
    const double s = 1.0 + std::sqrt(c);
    return sigma2 * s * s;
  }
  /// Parameters of the companion law with ratio index 1/c.
  MpParams inverse_ratio() const { return {sigma2, 1.0 / c}; }

  friend bool operator==(const MpParams&, const MpParams&) = default;
};

inline double mp_atom_weight(const MpParams& p) { return p.c < 1.0 ? 1.0 - p.c : 0.0; }

/// Absolutely continuous part of the MP law; the atom at 0 is not included.
inline double mp_density(double x, const MpParams& p) {
  const double lo = p.u_minus(), hi = p.u_plus();
  if (!(x > 0.0) || x < lo || x > hi) return 0.0;
  const double r = (hi - x) * (x - lo);
  if (r <= 0.0) return 0.0;
  return std::sqrt(r) / (2.0 * std::numbers::pi * x * p.sigma2);
}

namespace detail {

inline double edge_weight(double theta, const MpParams& p, double& x) {
  const double lo = p.u_minus(), width = p.u_plus() - lo;
  const double s = std::sin(theta), c = std::cos(theta);
  x = lo + width * s * s;
  return width * width * s * s * c * c / (std::numbers::pi * p.sigma2 * x);
}

}  // namespace detail

/// Integral of f against the MP law, atom included.  f may return double or
/// complex values.
template <class F>
auto mp_integrate(F&& f, const MpParams& p, const QuadOptions& opts = {}) {
  auto integrand = [&](double theta) {
    double x = 0.0;
    const double w = detail::edge_weight(theta, p, x);
    return f(x) * w;
  };
  auto body = integrate(integrand, 0.0, std::numbers::pi / 2.0, opts).value;
  const double atom = mp_atom_weight(p);
  if (atom > 0.0) body = body + f(0.0) * atom;
  return body;
}

/// E eta^k = sigma^{2k} sum_{r<k} c^{r+1}/(r+1) C(k,r) C(k-1,r) (Narayana form).
inline double mp_moment(int k, const MpParams& p) {
  if (k < 0) throw std::invalid_argument("mp_moment: negative order");
  if (k == 0) return 1.0;
  double sum = 0.0, ck = 1.0, ck1 = 1.0, cpow = p.c;  // C(k,r), C(k-1,r), c^{r+1}
  for (int r = 0; r < k; ++r) {
    sum += cpow / (r + 1) * ck * ck1;
    ck = ck * (k - r) / (r + 1);
    ck1 = ck1 * (k - 1 - r) / (r + 1);
    cpow *= p.c;
  }
  return std::pow(p.sigma2, k) * sum;
}

/// Polynomials use the exact moments, so e.g. E eta = c sigma^2 holds to the last bit.
inline double mp_expect(const TestFunction& f, const MpParams& p, const QuadOptions& opts = {}) {
  f.validate(p.u_plus());
  if (f.family() == Family::constant) return f.constant_value();
  if (f.family() == Family::polynomial) {
    double acc = 0.0;
    const auto& a = f.coefficients();
    for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * mp_moment(static_cast<int>(k), p);
    return acc;
  }
  return mp_integrate([&](double x) { return f(x); }, p, opts);
}

/// Distribution function of the MP law (atom included).
inline double mp_cdf(double x, const MpParams& p, const QuadOptions& opts = {}) {
  if (x < 0.0) return 0.0;
  const double lo = p.u_minus(), hi = p.u_plus();
  const double atom = mp_atom_weight(p);
  if (x <= lo) return atom;
  if (x >= hi) return 1.0;
  const double theta_x = std::asin(std::sqrt((x - lo) / (hi - lo)));
  auto integrand = [&](double theta) {
    double xx = 0.0;
    return detail::edge_weight(theta, p, xx);
  };
  return atom + integrate(integrand, 0.0, theta_x, opts).value;
}

/// Stieltjes transform g(z) = int dmu(x)/(z - x): the root of
///   z sigma^2 g^2 + (sigma^2 (c - 1) - z) g + 1 = 0
/// that decays at infinity.  The principal-root product
/// sqrt(z - u+) sqrt(z - u-) is analytic off [u-, u+] and behaves like z at
/// infinity, so the expression below is that root everywhere off the support.
inline cplx stieltjes_g_unchecked(cplx z, const MpParams& p) {
  const cplx root = std::sqrt(z - p.u_plus()) * std::sqrt(z - p.u_minus());
  return 2.0 / (z - p.sigma2 * (p.c - 1.0) + root);
}

inline cplx stieltjes_g(cplx z, const MpParams& p) {
  if (z.imag() == 0.0 && z.real() >= 0.0 && z.real() <= p.u_plus())
    throw DomainError("stieltjes_g: z = " + std::to_string(z.real()) + " lies in [0, u+]");
  return stieltjes_g_unchecked(z, p);
}

/// Residual of the defining quadratic, for diagnostics.
inline double stieltjes_residual(cplx z, cplx g, const MpParams& p) {
  return std::abs(z * p.sigma2 * g * g + (p.sigma2 * (p.c - 1.0) - z) * g + 1.0);
}

/// omega^2(f) = Var f(eta_c).
inline double omega2(const TestFunction& f, const MpParams& p, const QuadOptions& opts = {}) {
  f.validate(p.u_plus());
  const double m1 = mp_integrate([&](double x) { return f(x); }, p, opts);
  const double m2 = mp_integrate([&](double x) { const double v = f(x); return v * v; }, p, opts);
  const double v = m2 - m1 * m1;
  return v > 0.0 ? v : 0.0;
}

/// First orthonormal polynomial of the MP law: (x - c sigma^2) / (sqrt(c) sigma^2).
inline double mp_first_orthonormal(double x, const MpParams& p) {
  return (x - p.c * p.sigma2) / (std::sqrt(p.c) * p.sigma2);
}

/// rho(f) = E[f(eta_c) (eta_c - c sigma^2) / (sqrt(c) sigma^2)].
inline double rho(const TestFunction& f, const MpParams& p, const QuadOptions& opts = {}) {
  f.validate(p.u_plus());
  return mp_integrate([&](double x) { return f(x) * mp_first_orthonormal(x, p); }, p, opts);
}

// ---------------------------------------------------------------------------
// phi kernels: expectations of products of z/(z - eta_{1/c}) and w/(w - eta_{1/c}).

struct PhiKernel {
  cplx phi;   // E[h_z h_w]
  double pp;  // E[Re h_z Re h_w]
  double mm;  // E[Im h_z Im h_w]
  double pm;  // E[Re h_z Im h_w]
  double mp;  // E[Im h_z Re h_w]
};

namespace detail {

inline void check_kernel_point(cplx z, const MpParams& inv) {
  if (z.imag() != 0.0) return;
  const double x = z.real();
  if (x == 0.0 || (x >= inv.u_minus() && x <= inv.u_plus()))
    throw DomainError("phi kernel argument " + std::to_string(x) + " lies on the support of the 1/c law");
}

template <class Expect>
PhiKernel phi_from(Expect&& expect, cplx z, cplx w, double scale, double shift_pp, double shift_phi) {
  auto hz = [=](double x) { return z / (z - x); };
  auto hw = [=](double x) { return w / (w - x); };
  PhiKernel k;
  k.phi = scale * expect([&](double x) { return hz(x) * hw(x); }) + shift_phi;
  k.pp = scale * expect([&](double x) { return hz(x).real() * hw(x).real(); }) + shift_pp;
  k.mm = scale * expect([&](double x) { return hz(x).imag() * hw(x).imag(); });
  k.pm = scale * expect([&](double x) { return hz(x).real() * hw(x).imag(); });
  k.mp = scale * expect([&](double x) { return hz(x).imag() * hw(x).real(); });
  return k;
}

}  // namespace detail

/// Direct route: quadrature against mu_{sigma, 1/c}.
inline PhiKernel phi_kernel_direct(cplx z, cplx w, const MpParams& p, const QuadOptions& opts = {}) {
  const MpParams inv = p.inverse_ratio();
  detail::check_kernel_point(z, inv);
  detail::check_kernel_point(w, inv);
  auto expect = [&](auto&& f) { return mp_integrate(f, inv, opts); };
  return detail::phi_from(expect, z, w, 1.0, 0.0, 0.0);
}

/// Reduced route: E[f(eta_{1/c})] = (1/c) E[f(eta_c / c)] + (1 - 1/c) f(0).
inline PhiKernel phi_kernel_reduced(cplx z, cplx w, const MpParams& p, const QuadOptions& opts = {}) {
  const MpParams inv = p.inverse_ratio();
  detail::check_kernel_point(z, inv);
  detail::check_kernel_point(w, inv);
  const double c = p.c;
  auto expect = [&](auto&& f) { return mp_integrate([&](double x) { return f(x / c); }, p, opts); };
  const double shift = 1.0 - 1.0 / c;
  return detail::phi_from(expect, z, w, 1.0 / c, shift, shift);
}

struct PhiKernelCheck {
  PhiKernel value;       // direct route
  double discrepancy;    // max deviation of the reduced route
};

inline PhiKernelCheck phi_kernel(cplx z, cplx w, const MpParams& p, const QuadOptions& opts = {}) {
  const PhiKernel a = phi_kernel_direct(z, w, p, opts);
  const PhiKernel b = phi_kernel_reduced(z, w, p, opts);
  double d = std::abs(a.phi - b.phi);
  for (double e : {a.pp - b.pp, a.mm - b.mm, a.pm - b.pm, a.mp - b.mp}) d = std::max(d, std::abs(e));
  return {a, d};
}

// ---------------------------------------------------------------------------
// Entrywise CLT predictions.

struct Prediction {
  Field field = Field::real;
  bool diagonal = false;
  double omega2 = 0.0;
  double rho = 0.0;
  double kappa4 = 0.0;
  double omega_term = 0.0;   // 2 omega^2 (real diagonal) or omega^2
  double kappa4_term = 0.0;  // kappa4 / sigma^4 * rho^2 on the diagonal, else 0
  double variance = 0.0;     // omega_term + kappa4_term
  // Per-coordinate view.  Complex off-diagonal entries have i.i.d. real and
  // imaginary parts with variance omega^2 / 2 each; everything else is real.
  double re_variance = 0.0;
  double im_variance = 0.0;
  double re_im_covariance = 0.0;
};

inline Prediction assemble_entry_prediction(double om2, double rh, const MpParams& p, Field field,
                                            double kappa4, bool diagonal) {
  Prediction pr;
  pr.field = field;
  pr.diagonal = diagonal;
  pr.omega2 = om2;
  pr.rho = rh;
  pr.kappa4 = kappa4;
  if (diagonal) {
    pr.omega_term = field == Field::real ? 2.0 * om2 : om2;
    pr.kappa4_term = kappa4 / (p.sigma2 * p.sigma2) * rh * rh;
  } else {
    pr.omega_term = om2;
  }
  pr.variance = pr.omega_term + pr.kappa4_term;
  if (field == Field::complex && !diagonal) {
    pr.re_variance = pr.im_variance = 0.5 * pr.variance;
  } else {
    pr.re_variance = pr.variance;
  }
  return pr;
}

/// Limiting variance of sqrt(N) (f(M)_ij - E f(M)_ij).  kappa4 follows the
/// field's convention: m4 - 3 sigma^4 (real), m4 - 2 sigma^4 (complex).
inline Prediction predict_entry_clt(const TestFunction& f, const MpParams& p, Field field, double kappa4,
                                    bool diagonal, const QuadOptions& opts = {}) {
  return assemble_entry_prediction(omega2(f, p, opts), rho(f, p, opts), p, field, kappa4, diagonal);
}

// ---------------------------------------------------------------------------
// Resolvent field Psi(z) = sqrt(c) g(z)^2 Y(z): covariance of
// (Re Psi_ij(z), Im Psi_ij(z)) with (Re Psi_ij(w), Im Psi_ij(w)).

using Block2 = std::array<std::array<double, 2>, 2>;

struct ResolventCovariance {
  Block2 block{};        // assembled from the Y-field covariance list
  Block2 cross_check{};  // Cov of Re/Im 1/(z - eta), 1/(w - eta) under mu_c
  double discrepancy = 0.0;
};

namespace detail {

inline void check_resolvent_point(cplx z, const MpParams& p) {
  if (z.imag() == 0.0 && z.real() >= 0.0 && z.real() <= p.u_plus())
    throw DomainError("resolvent point " + std::to_string(z.real()) + " lies in [0, u+]");
}

inline Block2 mul(const Block2& a, const Block2& b) {
  Block2 r{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return r;
}

inline Block2 transpose(const Block2& a) { return {{{a[0][0], a[1][0]}, {a[0][1], a[1][1]}}}; }

// Real 2x2 matrix of multiplication by q acting on (Re, Im).
inline Block2 as_real(cplx q) { return {{{q.real(), -q.imag()}, {q.imag(), q.real()}}}; }

}  // namespace detail

/// Y-field route.  Y(z)'s covariances at (z, w) use kernels at (z/c, w/c)
/// and the fourth-cumulant factor (z/c) g_{1/c}(z/c).
inline Block2 resolvent_cov_from_kernels(cplx z, cplx w, const MpParams& p, Field field, double kappa4,
                                         bool diagonal, const QuadOptions& opts = {}) {
  const double c = p.c, s4 = p.sigma2 * p.sigma2;
  const cplx zc = z / c, wc = w / c;
  const PhiKernel k = phi_kernel_direct(zc, wc, p, opts);
  Block2 Y{};
  if (!diagonal && field == Field::complex) {
    const double d = 0.5 * s4 * (k.pp + k.mm);
    const double o = 0.5 * s4 * (k.pm - k.mp);
    Y = {{{d, o}, {-o, d}}};
  } else {
    const double mult = (diagonal && field == Field::real) ? 2.0 : 1.0;
    Y = {{{mult * s4 * k.pp, mult * s4 * k.pm}, {mult * s4 * k.mp, mult * s4 * k.mm}}};
    if (diagonal) {
      const MpParams inv = p.inverse_ratio();
      const cplx az = zc * stieltjes_g_unchecked(zc, inv);
      const cplx aw = wc * stieltjes_g_unchecked(wc, inv);
      const double u[2] = {az.real(), az.imag()}, v[2] = {aw.real(), aw.imag()};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) Y[i][j] += kappa4 * u[i] * v[j];
    }
  }
  const cplx gz = stieltjes_g_unchecked(z, p), gw = stieltjes_g_unchecked(w, p);
  Block2 out = detail::mul(detail::mul(detail::as_real(gz * gz), Y), detail::transpose(detail::as_real(gw * gw)));
  for (auto& row : out)
    for (auto& v : row) v *= c;
  return out;
}

/// Function route: the limit of sqrt(N) R_ij(z) is the real-linear Gaussian
/// functional of h_z(x) = 1/(z - x) with covariance Cov(f(eta_c), g(eta_c))
/// (doubled plus the kappa4 rho-term on the diagonal of a real field).
inline Block2 resolvent_cov_from_functions(cplx z, cplx w, const MpParams& p, Field field, double kappa4,
                                           bool diagonal, const QuadOptions& opts = {}) {
  auto re_z = [=](double x) { return (1.0 / (z - x)).real(); };
  auto im_z = [=](double x) { return (1.0 / (z - x)).imag(); };
  auto re_w = [=](double x) { return (1.0 / (w - x)).real(); };
  auto im_w = [=](double x) { return (1.0 / (w - x)).imag(); };
  auto mean = [&](auto&& f) { return mp_integrate(f, p, opts); };
  auto cov = [&](auto&& f, auto&& g) {
    return mean([&](double x) { return f(x) * g(x); }) - mean(f) * mean(g);
  };
  const double aa = cov(re_z, re_w), ab = cov(re_z, im_w), ba = cov(im_z, re_w), bb = cov(im_z, im_w);
  if (!diagonal && field == Field::complex) {
    const double d = 0.5 * (aa + bb), o = 0.5 * (ab - ba);
    return {{{d, o}, {-o, d}}};
  }
  const double mult = (diagonal && field == Field::real) ? 2.0 : 1.0;
  Block2 out = {{{mult * aa, mult * ab}, {mult * ba, mult * bb}}};
  if (diagonal) {
    auto rho_of = [&](auto&& f) { return mean([&](double x) { return f(x) * mp_first_orthonormal(x, p); }); };
    const double u[2] = {rho_of(re_z), rho_of(im_z)}, v[2] = {rho_of(re_w), rho_of(im_w)};
    const double k = kappa4 / (p.sigma2 * p.sigma2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) out[i][j] += k * u[i] * v[j];
  }
  return out;
}

/// Limiting 2x2 covariance block of the resolvent field entry (i, j) between
/// points z and w (indices only matter through i == j).
inline ResolventCovariance predict_resolvent_field_cov(cplx z, cplx w, const MpParams& p, Field field,
                                                       double kappa4, int i, int j,
                                                       const QuadOptions& opts = {}) {
  detail::check_resolvent_point(z, p);
  detail::check_resolvent_point(w, p);
  const bool diagonal = i == j;
  ResolventCovariance r;
  r.block = resolvent_cov_from_kernels(z, w, p, field, kappa4, diagonal, opts);
  r.cross_check = resolvent_cov_from_functions(z, w, p, field, kappa4, diagonal, opts);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      r.discrepancy = std::max(r.discrepancy, std::abs(r.block[a][b] - r.cross_check[a][b]));
  return r;
}

}  // namespace mplab
