#pragma once

// Sample covariance ensembles M = A A^* / N with i.i.d. entries from a fixed
// menu of laws.  Every law is drawn in standardized form (mean 0, variance 1)
// and scaled, so all moments used by the predictions are closed-form.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "mplab/linalg.hpp"
#include "mplab/mp_analytics.hpp"
#include "mplab/rng.hpp"

namespace mplab {

enum class EntryKind { gaussian, rademacher, uniform, centered_exponential, two_point };

inline std::string_view to_string(EntryKind k) {
  switch (k) {
    case EntryKind::gaussian: return "gaussian";
    case EntryKind::rademacher: return "rademacher";
    case EntryKind::uniform: return "uniform";
    case EntryKind::centered_exponential: return "centered_exponential";
    case EntryKind::two_point: return "two_point";
  }
  return "?";
}

inline EntryKind entry_kind_from_string(std::string_view s) {
  for (EntryKind k : {EntryKind::gaussian, EntryKind::rademacher, EntryKind::uniform,
                      EntryKind::centered_exponential, EntryKind::two_point})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown entry kind '" + std::string(s) + "'");
}

/// Entry law with variance sigma2.  two_point(a, p) puts mass p on a value
/// with the sign of a and mass 1 - p on the opposite side; after
/// standardization only sign(a) and p matter.
struct EntryDist {
  EntryKind kind = EntryKind::gaussian;
  double sigma2 = 1.0;
  double a = 1.0;
  double p = 0.5;

  void validate() const {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw std::invalid_argument("entry sigma2 must be positive");
    if (kind == EntryKind::two_point) {
      if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("two_point p must lie in (0, 1)");
      if (a == 0.0 || !std::isfinite(a)) throw std::invalid_argument("two_point a must be nonzero");
    }
  }

  /// Fourth moment of the standardized law.
  double kurtosis() const {
    switch (kind) {
      case EntryKind::gaussian: return 3.0;
      case EntryKind::rademacher: return 1.0;
      case EntryKind::uniform: return 1.8;
      case EntryKind::centered_exponential: return 9.0;
      case EntryKind::two_point: {
        const double q = 1.0 - p;
        return (q * q * q + p * p * p) / (p * q);
      }
    }
    return 3.0;
  }
  /// Third moment of the standardized law.
  double skewness() const {
    switch (kind) {
      case EntryKind::centered_exponential: return 2.0;
      case EntryKind::two_point: return std::copysign((1.0 - 2.0 * p) / std::sqrt(p * (1.0 - p)), a);
      default: return 0.0;
    }
  }

  double m4() const { return kurtosis() * sigma2 * sigma2; }
  double kappa3() const { return skewness() * sigma2 * std::sqrt(sigma2); }
  double kappa4_real() const { return m4() - 3.0 * sigma2 * sigma2; }
  /// E|A|^4 when Re A and Im A are i.i.d. copies of this law at variance sigma2 / 2.
  double m4_complex() const { return 0.5 * (kurtosis() + 1.0) * sigma2 * sigma2; }
  double kappa4_complex() const { return m4_complex() - 2.0 * sigma2 * sigma2; }
  double kappa4(Field f) const { return f == Field::real ? kappa4_real() : kappa4_complex(); }

  /// One draw of the standardized law.
  double draw_standard(PhiloxStream& rng) const {
    switch (kind) {
      case EntryKind::gaussian: return boost::random::normal_distribution<double>()(rng);
      case EntryKind::rademacher: return (rng() & 1u) ? 1.0 : -1.0;
      case EntryKind::uniform: return std::numbers::sqrt3 * (2.0 * rng.uniform01() - 1.0);
      case EntryKind::centered_exponential: return boost::random::exponential_distribution<double>()(rng) - 1.0;
      case EntryKind::two_point: {
        const double s = std::copysign(1.0, a);
        return rng.uniform01() < p ? s * std::sqrt((1.0 - p) / p) : -s * std::sqrt(p / (1.0 - p));
      }
    }
    return 0.0;
  }

  friend bool operator==(const EntryDist&, const EntryDist&) = default;
};

struct EnsembleSpec {
  int N = 0;
  int n = 0;
  Field field = Field::real;
  EntryDist entry;
  std::optional<double> truncation_level;  // clip at level * sqrt(N)
  std::uint64_t seed = 0;

  double c_N() const { return static_cast<double>(n) / static_cast<double>(N); }
  MpParams params() const { return {entry.sigma2, c_N()}; }
  double kappa4() const { return entry.kappa4(field); }

  void validate() const {
    if (N <= 0 || n <= 0) throw std::invalid_argument("ensemble dimensions N and n must be positive");
    entry.validate();
    if (truncation_level && !(*truncation_level > 0.0))
      throw std::invalid_argument("truncation level must be positive");
  }

  friend bool operator==(const EnsembleSpec&, const EnsembleSpec&) = default;
};

/// A_N for one trial; exactly one of real/complex is populated.
struct SampleMatrix {
  Field field = Field::real;
  Mat<double> real;
  Mat<cplx> complex;

  Eigen::Index rows() const { return field == Field::real ? real.rows() : complex.rows(); }
  Eigen::Index cols() const { return field == Field::real ? real.cols() : complex.cols(); }
};

/// Draws A_N from substream `stream` of the spec's seed.  Entries are filled
/// column by column; complex entries draw Re then Im.
inline SampleMatrix sample_matrix(const EnsembleSpec& spec, std::uint64_t stream) {
  spec.validate();
  PhiloxStream rng(spec.seed, stream);
  SampleMatrix m;
  m.field = spec.field;
  const std::size_t count = static_cast<std::size_t>(spec.N) * static_cast<std::size_t>(spec.n);
  if (spec.field == Field::real) {
    const double s = std::sqrt(spec.entry.sigma2);
    m.real.resize(spec.N, spec.n);
    double* a = m.real.data();
    for (std::size_t k = 0; k < count; ++k) a[k] = s * spec.entry.draw_standard(rng);
  } else {
    const double s = std::sqrt(0.5 * spec.entry.sigma2);
    m.complex.resize(spec.N, spec.n);
    cplx* a = m.complex.data();
    for (std::size_t k = 0; k < count; ++k) {
      const double re = spec.entry.draw_standard(rng);
      const double im = spec.entry.draw_standard(rng);
      a[k] = {s * re, s * im};
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Truncation: clip to [-L, L], recenter and rescale with the clipped law's
// exact moments.

struct ClippedMoments {
  double mean = 0.0;
  double second = 0.0;  // E[clip(X)^2]
  double variance() const { return second - mean * mean; }
};

/// Moments of clip(X, -l, l) for the standardized law X of `entry`.
inline ClippedMoments clipped_moments(const EntryDist& entry, double l) {
  ClippedMoments m;
  switch (entry.kind) {
    case EntryKind::gaussian: {
      const boost::math::normal_distribution<double> nd;
      const double Phi = boost::math::cdf(nd, l), phi = boost::math::pdf(nd, l);
      const double tail = boost::math::cdf(boost::math::complement(nd, l));
      m.second = (Phi - tail) - 2.0 * l * phi + 2.0 * l * l * tail;
      break;
    }
    case EntryKind::rademacher: {
      const double v = std::min(1.0, l);
      m.second = v * v;
      break;
    }
    case EntryKind::uniform: {
      const double b = std::numbers::sqrt3;
      m.second = l >= b ? 1.0 : l * l * l / (3.0 * b) + l * l * (1.0 - l / b);
      break;
    }
    case EntryKind::centered_exponential: {
      // X = E - 1 with E ~ Exp(1); X in [-l, l] iff E in [1 - l, 1 + l].
      auto F1 = [](double e) { return -e * std::exp(-e); };            // int (e-1) e^{-e}
      auto F2 = [](double e) { return -(e * e + 1.0) * std::exp(-e); };  // int (e-1)^2 e^{-e}
      const double lo = std::max(0.0, 1.0 - l), hi = 1.0 + l;
      const double p_hi = std::exp(-hi);
      const double p_lo = l < 1.0 ? 1.0 - std::exp(-lo) : 0.0;
      m.mean = F1(hi) - F1(lo) + l * p_hi - l * p_lo;
      m.second = F2(hi) - F2(lo) + l * l * (p_hi + p_lo);
      break;
    }
    case EntryKind::two_point: {
      const double p = entry.p, s = std::copysign(1.0, entry.a);
      const double x1 = std::clamp(s * std::sqrt((1.0 - p) / p), -l, l);
      const double x2 = std::clamp(-s * std::sqrt(p / (1.0 - p)), -l, l);
      m.mean = p * x1 + (1.0 - p) * x2;
      m.second = p * x1 * x1 + (1.0 - p) * x2 * x2;
      break;
    }
  }
  return m;
}

namespace detail {

struct ClipMap {
  double bound, mean, scale;
  double operator()(double x) const { return (std::clamp(x, -bound, bound) - mean) * scale; }
};

inline ClipMap clip_map(const EntryDist& entry, double component_variance, double bound) {
  const double sd = std::sqrt(component_variance);
  const ClippedMoments m = clipped_moments(entry, bound / sd);
  const double var = m.variance();
  if (!(var > 1e-300))
    throw std::invalid_argument("truncation level " + std::to_string(bound) + " leaves zero variance");
  // Standardized units -> component units.
  return {bound, m.mean * sd, 1.0 / std::sqrt(var)};
}

}  // namespace detail

/// Clips entries to [-level sqrt(N), level sqrt(N)] (Re/Im separately), then
/// recenters and rescales to mean 0 and variance sigma2 exactly.
inline SampleMatrix truncate_entries(const SampleMatrix& m, const EnsembleSpec& spec, double level) {
  if (!(level > 0.0)) throw std::invalid_argument("truncation level must be positive");
  const double bound = level * std::sqrt(static_cast<double>(spec.N));
  SampleMatrix out = m;
  if (m.field == Field::real) {
    const auto f = detail::clip_map(spec.entry, spec.entry.sigma2, bound);
    out.real = m.real.unaryExpr(f);
  } else {
    const auto f = detail::clip_map(spec.entry, 0.5 * spec.entry.sigma2, bound);
    out.complex = m.complex.unaryExpr([&](cplx z) { return cplx(f(z.real()), f(z.imag())); });
  }
  return out;
}

/// M = A A^* / N, exactly self-adjoint.
template <class S>
Mat<S> form_covariance(const Mat<S>& a) {
  const Eigen::Index N = a.rows();
  Mat<S> m = Mat<S>::Zero(N, N);
  if (N == 0) return m;
  if (a.cols() > 0) lapack::rank_k(1.0 / static_cast<double>(N), a, m);
  symmetrize_from_lower(m);
  return m;
}

/// Draws one trial of A (with the spec's truncation applied).
inline SampleMatrix sample_trial(const EnsembleSpec& spec, std::uint64_t trial) {
  SampleMatrix a = sample_matrix(spec, trial);
  if (spec.truncation_level) a = truncate_entries(a, spec, *spec.truncation_level);
  return a;
}

}  // namespace mplab
