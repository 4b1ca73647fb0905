#pragma once

// Estimators and tests that confront Monte-Carlo batches with predictions.
// All functions are pure in (samples, prediction, options).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "mplab/fluct_mc.hpp"
#include "mplab/mp_analytics.hpp"

namespace mplab {

struct SampleMoments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;         // unbiased
  double excess_kurtosis = 0.0;  // m4 / m2^2 - 3 (0 when degenerate)
};

inline SampleMoments sample_moments(const std::vector<double>& x) {
  SampleMoments m;
  m.n = x.size();
  if (m.n == 0) return m;
  m.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(m.n);
  double s2 = 0.0, s4 = 0.0;
  for (double v : x) {
    const double d = (v - m.mean) * (v - m.mean);
    s2 += d;
    s4 += d * d;
  }
  if (m.n > 1) m.variance = s2 / static_cast<double>(m.n - 1);
  const double m2 = s2 / static_cast<double>(m.n);
  if (m2 > 0.0) m.excess_kurtosis = s4 / static_cast<double>(m.n) / (m2 * m2) - 3.0;
  return m;
}

/// Unbiased sample covariance.
inline double sample_covariance(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("sample_covariance: size mismatch");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - mx) * (y[k] - my);
  return s / (n - 1.0);
}

// ---------------------------------------------------------------------------
// Variance.

struct VarianceOptions {
  double rel_band = 0.1;
  double abs_band_scale = 1.0;  // zero predictions pass iff estimate <= 1e-3 max(1, scale)
};

struct VarianceReport {
  std::string id;
  std::size_t trials = 0;
  double estimate = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // 95%
  double predicted = 0.0;
  double ratio = 0.0;  // estimate / predicted (0 when predicted is 0)
  double band = 0.0;   // effective relative band
  bool pass = false;
  std::string note;
};

/// 95% interval for the variance: normal approximation with
/// Var(s^2) ~ s^4 (2/(T-1) + excess/T), which stays honest for non-Gaussian
/// fluctuations at finite N.
inline VarianceReport variance_test(const std::string& id, const std::vector<double>& x, double predicted,
                                    const VarianceOptions& opt = {}) {
  if (x.size() < 100) throw std::invalid_argument("variance_test needs at least 100 samples");
  // Predictions assembled from quadratures carry ~1e-11 roundoff, so exact
  // cancellations (linear f with Rademacher entries) land near, not at, zero.
  const double zero_cut = 1e-9 * std::max(1.0, opt.abs_band_scale);
  if (predicted < -zero_cut) throw std::invalid_argument("variance_test: negative prediction");
  const SampleMoments m = sample_moments(x);
  VarianceReport r;
  r.id = id;
  r.trials = m.n;
  r.estimate = m.variance;
  r.predicted = predicted;
  const double T = static_cast<double>(m.n);
  const double v = m.variance * m.variance * std::max(0.0, 2.0 / (T - 1.0) + m.excess_kurtosis / T);
  const double half = 1.959963984540054 * std::sqrt(v);
  r.ci_lo = std::max(0.0, m.variance - half);
  r.ci_hi = m.variance + half;
  if (std::abs(predicted) <= zero_cut) {
    const double abs_band = 1e-3 * std::max(1.0, opt.abs_band_scale);
    r.band = abs_band;
    r.pass = r.estimate <= abs_band;
    r.note = "zero prediction, absolute band";
    return r;
  }
  r.ratio = r.estimate / predicted;
  if (m.variance == 0.0) {
    r.pass = false;
    r.note = "degenerate batch: all samples equal";
    return r;
  }
  r.band = std::max(opt.rel_band, half / m.variance);
  r.pass = predicted >= r.estimate * (1.0 - r.band) && predicted <= r.estimate * (1.0 + r.band);
  return r;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov against N(0, v).

struct GofReport {
  std::string id;
  std::size_t n = 0;
  double variance = 0.0;
  std::string standardization;  // "predicted" or "estimated"
  double ks_statistic = 0.0;
  double p_value = 0.0;
  bool pass = false;
};

/// Asymptotic Kolmogorov tail Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2), 20 terms.
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;  // series too slow to converge; Q(0.2) = 1 - 1e-10
  double sum = 0.0;
  for (int k = 1; k <= 20; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1) ? term : -term;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline GofReport ks_gaussian_test(const std::string& id, std::vector<double> x, double variance,
                                  const std::string& standardization = "predicted", double alpha = 0.01) {
  if (!(variance > 0.0)) throw std::invalid_argument("ks_gaussian_test: variance must be positive");
  if (x.size() < 500) throw std::invalid_argument("ks_gaussian_test needs at least 500 samples");
  std::sort(x.begin(), x.end());
  const boost::math::normal_distribution<double> nd(0.0, std::sqrt(variance));
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double F = boost::math::cdf(nd, x[k]);
    d = std::max({d, static_cast<double>(k + 1) / n - F, F - static_cast<double>(k) / n});
  }
  GofReport r;
  r.id = id;
  r.n = x.size();
  r.variance = variance;
  r.standardization = standardization;
  r.ks_statistic = d;
  const double rn = std::sqrt(n);
  r.p_value = kolmogorov_q((rn + 0.12 + 0.11 / rn) * d);
  r.pass = r.p_value > alpha;
  return r;
}

// ---------------------------------------------------------------------------
// Independence of distinct entries.

struct IndependenceReport {
  std::string id;
  double correlation = 0.0;  // largest |corr| over coordinate combinations
  double threshold = 0.1;
  bool applicable = true;
  bool pass = true;
  std::string note;
};

inline IndependenceReport independence_test(const std::string& id, const std::vector<std::vector<double>>& a,
                                            const std::vector<std::vector<double>>& b, bool same_target,
                                            double threshold = 0.1) {
  IndependenceReport r;
  r.id = id;
  r.threshold = threshold;
  if (same_target) {
    r.applicable = false;
    r.correlation = 1.0;
    r.note = "pair compared with itself";
    return r;
  }
  for (const auto& x : a)
    for (const auto& y : b) {
      const double vx = sample_moments(x).variance, vy = sample_moments(y).variance;
      if (!(vx > 0.0) || !(vy > 0.0)) {
        r.applicable = false;
        r.note = "zero-variance margin";
        r.correlation = 0.0;
        return r;
      }
      r.correlation = std::max(r.correlation, std::abs(sample_covariance(x, y) / std::sqrt(vx * vy)));
    }
  r.pass = r.correlation <= threshold;
  return r;
}

// ---------------------------------------------------------------------------
// Batch-level wrappers.

/// Variance reports for every pair of an entry batch.  Complex off-diagonal
/// pairs give one report per coordinate (Re, Im), each against half the total.
inline std::vector<VarianceReport> variance_test(const FluctuationBatch& b, const std::vector<Prediction>& pred,
                                                 const VarianceOptions& opt = {}) {
  if (pred.size() != b.pairs.size()) throw std::invalid_argument("variance_test: one prediction per pair");
  std::vector<VarianceReport> out;
  for (std::size_t p = 0; p < b.pairs.size(); ++p) {
    const auto coords = b.coordinates(p);
    const std::string id = pair_id(b.pairs[p]);
    if (coords.size() == 2) {
      out.push_back(variance_test(id + ":re", coords[0], pred[p].re_variance, opt));
      out.push_back(variance_test(id + ":im", coords[1], pred[p].im_variance, opt));
    } else {
      out.push_back(variance_test(id, coords[0], pred[p].variance, opt));
    }
  }
  return out;
}

inline std::vector<IndependenceReport> independence_test(const FluctuationBatch& b,
                                                         const std::vector<std::pair<int, int>>& pair_of_pairs,
                                                         double threshold = 0.1) {
  std::vector<IndependenceReport> out;
  for (auto [p, q] : pair_of_pairs) {
    const std::string id = pair_id(b.pairs[static_cast<std::size_t>(p)]) + "~" + pair_id(b.pairs[static_cast<std::size_t>(q)]);
    out.push_back(independence_test(id, b.coordinates(static_cast<std::size_t>(p)),
                                    b.coordinates(static_cast<std::size_t>(q)),
                                    b.pairs[static_cast<std::size_t>(p)] == b.pairs[static_cast<std::size_t>(q)],
                                    threshold));
  }
  return out;
}

/// Every unordered pair of distinct pairs in the batch.
inline std::vector<std::pair<int, int>> all_pair_combinations(std::size_t count) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t p = 0; p < count; ++p)
    for (std::size_t q = p + 1; q < count; ++q) out.emplace_back(static_cast<int>(p), static_cast<int>(q));
  return out;
}

// ---------------------------------------------------------------------------
// Resolvent field covariance blocks.

struct BlockReport {
  std::string id;
  IndexPair entry;
  std::size_t z_index = 0, w_index = 0;
  Block2 empirical{};
  Block2 predicted{};
  Block2 standard_error{};
  Block2 tolerance{};
  bool pass = false;
};

/// Element (a, b) passes iff |emp - pred| <= max(rel_band |pred|, 4 SE):
/// the relative band for well-resolved elements, an absolute statistical band
/// for elements the trial count cannot resolve at rel_band.
inline BlockReport covariance_block_test(const ResolventFieldBatch& b, IndexPair entry, std::size_t zi,
                                         std::size_t wi, const Block2& predicted, double rel_band = 0.15) {
  const std::size_t T = b.rows();
  if (T < 1000) throw std::invalid_argument("covariance_block_test needs at least 1000 trials");
  BlockReport r;
  r.id = pair_id(entry) + "@z" + std::to_string(zi) + ",z" + std::to_string(wi);
  r.entry = entry;
  r.z_index = zi;
  r.w_index = wi;
  r.predicted = predicted;
  std::vector<double> x[2], y[2];
  for (auto& v : x) v.resize(T);
  for (auto& v : y) v.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    const cplx pz = b.psi_at(t, zi, entry.i, entry.j), pw = b.psi_at(t, wi, entry.i, entry.j);
    x[0][t] = pz.real();
    x[1][t] = pz.imag();
    y[0][t] = pw.real();
    y[1][t] = pw.imag();
  }
  r.pass = true;
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c) {
      const double mx = std::accumulate(x[a].begin(), x[a].end(), 0.0) / static_cast<double>(T);
      const double my = std::accumulate(y[c].begin(), y[c].end(), 0.0) / static_cast<double>(T);
      double s = 0.0, s2 = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const double p = (x[a][t] - mx) * (y[c][t] - my);
        s += p;
        s2 += p * p;
      }
      const double cov = s / static_cast<double>(T - 1);
      const double var_p = std::max(0.0, s2 / static_cast<double>(T) - (s / static_cast<double>(T)) * (s / static_cast<double>(T)));
      r.empirical[a][c] = cov;
      r.standard_error[a][c] = std::sqrt(var_p / static_cast<double>(T));
      r.tolerance[a][c] = std::max(rel_band * std::abs(predicted[a][c]), 4.0 * r.standard_error[a][c]);
      if (std::abs(cov - predicted[a][c]) > r.tolerance[a][c]) r.pass = false;
    }
  return r;
}

}  // namespace mplab
