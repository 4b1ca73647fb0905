#pragma once

// Truncated Taylor series ("jets"): a[k] is the k-th Taylor coefficient
// f^(k)(x0)/k! of a function around a base point.  Arithmetic propagates the
// coefficients exactly up to order K, which gives all derivatives a
// quasi-analytic extension needs without hand-written derivative formulas.

#include <array>
#include <cmath>
#include <cstddef>

namespace mplab {

template <std::size_t K>
class Jet {
 public:
  static constexpr std::size_t order = K;

  constexpr Jet() = default;
  constexpr Jet(double c) { a_[0] = c; }  // NOLINT: constants promote implicitly

  /// The identity function expanded around x0.
  static constexpr Jet variable(double x0) {
    Jet j(x0);
    if constexpr (K >= 1) j.a_[1] = 1.0;
    return j;
  }

  constexpr double operator[](std::size_t k) const { return a_[k]; }
  constexpr double& operator[](std::size_t k) { return a_[k]; }
  constexpr double value() const { return a_[0]; }

  /// k-th derivative at the base point.
  double derivative(std::size_t k) const { return a_[k] * std::tgamma(static_cast<double>(k) + 1.0); }

  friend constexpr Jet operator+(Jet x, const Jet& y) {
    for (std::size_t k = 0; k <= K; ++k) x.a_[k] += y.a_[k];
    return x;
  }
  friend constexpr Jet operator-(Jet x, const Jet& y) {
    for (std::size_t k = 0; k <= K; ++k) x.a_[k] -= y.a_[k];
    return x;
  }
  friend constexpr Jet operator-(Jet x) {
    for (auto& v : x.a_) v = -v;
    return x;
  }
  friend constexpr Jet operator*(const Jet& x, const Jet& y) {
    Jet r;
    for (std::size_t k = 0; k <= K; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j <= k; ++j) s += x.a_[j] * y.a_[k - j];
      r.a_[k] = s;
    }
    return r;
  }
  friend constexpr Jet operator/(const Jet& x, const Jet& y) {
    Jet r;
    for (std::size_t k = 0; k <= K; ++k) {
      double s = x.a_[k];
      for (std::size_t j = 1; j <= k; ++j) s -= y.a_[j] * r.a_[k - j];
      r.a_[k] = s / y.a_[0];
    }
    return r;
  }

  friend Jet exp(const Jet& x) {
    Jet r;
    r.a_[0] = std::exp(x.a_[0]);
    for (std::size_t k = 1; k <= K; ++k) {
      double s = 0.0;
      for (std::size_t j = 1; j <= k; ++j) s += static_cast<double>(j) * x.a_[j] * r.a_[k - j];
      r.a_[k] = s / static_cast<double>(k);
    }
    return r;
  }

 private:
  std::array<double, K + 1> a_{};
};

}  // namespace mplab
