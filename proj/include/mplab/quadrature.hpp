#pragma once

// Adaptive Gauss-Kronrod (G7/K15) integration over a finite interval.
//
// Works for any value type with +, * by double and an absolute value
// (double, std::complex<double>).  Refinement is global: the interval with
// the largest error estimate is bisected until the summed estimate drops
// below the absolute tolerance or the evaluation budget runs out.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mplab {

/// Thrown when the adaptive scheme cannot meet the requested tolerance.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved, double requested)
      : std::runtime_error(what), achieved_(achieved), requested_(requested) {}
  double achieved() const noexcept { return achieved_; }
  double requested() const noexcept { return requested_; }

 private:
  double achieved_;
  double requested_;
};

struct QuadOptions {
  double abs_tol = 1e-11;
  std::size_t max_evals = std::size_t{1} << 15;
};

template <class T>
struct QuadResult {
  T value{};
  double error = 0.0;
  std::size_t evals = 0;
};

namespace detail {

// QUADPACK qk15 abscissae (positive half, descending) and weights.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// 7-point Gauss weights at kXgk[1], kXgk[3], kXgk[5], kXgk[7].
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class T>
double magnitude(const T& v) {
  using std::abs;
  return static_cast<double>(abs(v));
}

template <class T>
struct Panel {
  double a, b;
  T value;
  double error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class T, class F>
Panel<T> gk15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const T fc = f(center);
  T kronrod = fc * kWgk[7];
  T gauss = fc * kWg[3];
  for (int k = 0; k < 7; ++k) {
    const double dx = half * kXgk[k];
    const T sum = f(center - dx) + f(center + dx);
    kronrod = kronrod + sum * kWgk[k];
    if (k % 2 == 1) gauss = gauss + sum * kWg[k / 2];
  }
  kronrod = kronrod * half;
  gauss = gauss * half;
  return {a, b, kronrod, magnitude(kronrod - gauss)};
}

}  // namespace detail

/// Integrates f over [a, b].  Throws QuadratureError if the budget is spent
/// before the error estimate reaches opts.abs_tol.
template <class F>
auto integrate(F&& f, double a, double b, const QuadOptions& opts = {})
    -> QuadResult<decltype(f(a))> {
  using T = decltype(f(a));
  QuadResult<T> out;
  if (a == b) return out;

  std::priority_queue<detail::Panel<T>> panels;
  panels.push(detail::gk15<T>(f, a, b));
  out.evals = 15;
  T total = panels.top().value;
  double err = panels.top().error;

  while (err > opts.abs_tol) {
    if (out.evals + 30 > opts.max_evals) {
      std::ostringstream msg;
      msg << "adaptive quadrature did not converge on [" << a << ", " << b
          << "]: error estimate " << err << " > " << opts.abs_tol << " after "
          << out.evals << " evaluations";
      throw QuadratureError(msg.str(), err, opts.abs_tol);
    }
    auto worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    auto left = detail::gk15<T>(f, worst.a, mid);
    auto right = detail::gk15<T>(f, mid, worst.b);
    out.evals += 30;
    total = total - worst.value + left.value + right.value;
    err += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
    // The running error sum drifts; re-add from scratch once it claims success.
    if (err <= opts.abs_tol) {
      double fresh = 0.0;
      T sum{};
      auto copy = panels;
      while (!copy.empty()) {
        fresh += copy.top().error;
        sum = sum + copy.top().value;
        copy.pop();
      }
      err = fresh;
      total = sum;
    }
  }
  out.value = total;
  out.error = err;
  return out;
}

/// Composite Gauss-Legendre nodes/weights on [a, b]: `panels` panels of the
/// 4-point rule.  Used for fixed tensor grids where adaptivity is unwanted.
inline std::vector<std::pair<double, double>> gauss_legendre_panels(double a, double b,
                                                                    int panels) {
  static constexpr std::array<double, 4> x = {-0.861136311594052575223946488892809,
                                              -0.339981043584856264802665759103245,
                                              0.339981043584856264802665759103245,
                                              0.861136311594052575223946488892809};
  static constexpr std::array<double, 4> w = {0.347854845137453857373063949221999,
                                              0.652145154862546142626936050778001,
                                              0.652145154862546142626936050778001,
                                              0.347854845137453857373063949221999};
  std::vector<std::pair<double, double>> nodes;
  nodes.reserve(static_cast<std::size_t>(panels) * 4);
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    for (int k = 0; k < 4; ++k) nodes.emplace_back(lo + 0.5 * h * (x[k] + 1.0), 0.5 * h * w[k]);
  }
  return nodes;
}

}  // namespace mplab
