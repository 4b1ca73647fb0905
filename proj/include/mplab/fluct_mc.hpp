#pragma once

// Monte-Carlo harness: sqrt(N)-normalized entries of f(M_N) and the resolvent
// field Psi_N(z) = sqrt(N)(R^{(m)}(z) - g(z) I), one independent matrix per
// trial.  Trial t always draws from Philox substream t of the master seed and
// writes into slot t, so batches do not depend on the worker count.
//
// f(M)_ij is evaluated by an exact route chosen per family:
//   polynomial / constant  Horner through A: M v = A (A^* v) / N
//   cauchy_re / cauchy_im  one factorized solve of (z0 - M) per needed column
//   everything else        full eigendecomposition

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mplab/ensemble.hpp"
#include "mplab/funcalc.hpp"
#include "mplab/mp_analytics.hpp"
#include "mplab/test_function.hpp"

namespace mplab {

enum class Centering { empirical, analytic };

inline std::string_view to_string(Centering c) { return c == Centering::empirical ? "empirical" : "analytic"; }

inline Centering centering_from_string(std::string_view s) {
  if (s == "empirical") return Centering::empirical;
  if (s == "analytic") return Centering::analytic;
  throw std::invalid_argument("unknown centering '" + std::string(s) + "'");
}

inline unsigned default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

/// Runs body(t) for t in [0, count) on `workers` threads.  The first
/// exception thrown by any body is rethrown after all threads join.
template <class Body>
void parallel_for(std::size_t count, unsigned workers, Body&& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto loop = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= count) return;
      try {
        body(t);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    }
  };
  if (workers == 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Entry fluctuations.

struct FluctuationBatch {
  EnsembleSpec spec;
  TestFunction f = TestFunction::constant(0.0);
  std::vector<IndexPair> pairs;  // zero-based, i <= j
  Centering centering = Centering::empirical;
  std::size_t trials_requested = 0;
  std::vector<std::uint64_t> trial_ids;      // successful trials, ascending
  std::vector<std::uint64_t> failed_trials;  // eigensolve/factorization failures
  std::vector<cplx> centers;                 // per pair
  Mat<cplx> samples;                         // rows: trial_ids, cols: pairs

  std::size_t rows() const { return trial_ids.size(); }
  double failure_rate() const {
    return trials_requested ? static_cast<double>(failed_trials.size()) / static_cast<double>(trials_requested) : 0.0;
  }
  bool failures_acceptable() const { return failed_trials.size() * 1000 <= trials_requested; }

  std::vector<double> re(std::size_t pair) const {
    std::vector<double> v(rows());
    for (std::size_t r = 0; r < rows(); ++r) v[r] = samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(pair)).real();
    return v;
  }
  std::vector<double> im(std::size_t pair) const {
    std::vector<double> v(rows());
    for (std::size_t r = 0; r < rows(); ++r) v[r] = samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(pair)).imag();
    return v;
  }
  /// Coordinates carrying the fluctuation: (Re, Im) for complex off-diagonal
  /// pairs, Re otherwise.
  std::vector<std::vector<double>> coordinates(std::size_t pair) const {
    const auto& p = pairs[pair];
    if (spec.field == Field::complex && p.i != p.j) return {re(pair), im(pair)};
    return {re(pair)};
  }
};

namespace detail {

inline std::vector<int> distinct_indices(const std::vector<IndexPair>& pairs, bool with_rows) {
  std::vector<int> idx;
  auto add = [&](int k) {
    if (std::find(idx.begin(), idx.end(), k) == idx.end()) idx.push_back(k);
  };
  for (const auto& p : pairs) {
    add(p.j);
    if (with_rows) add(p.i);
  }
  return idx;
}

template <class S>
std::vector<cplx> polynomial_entries(const Mat<S>& a, const TestFunction& f, const std::vector<IndexPair>& pairs) {
  const Eigen::Index N = a.rows();
  const double invN = 1.0 / static_cast<double>(N);
  std::vector<double> coeffs = f.family() == Family::constant ? std::vector<double>{f.constant_value()}
                                                               : f.coefficients();
  const auto cols = distinct_indices(pairs, false);
  std::vector<Vec<S>> fcols;
  for (int j : cols) {
    Vec<S> v = Vec<S>::Zero(N);
    v[j] = coeffs.back();
    for (auto it = coeffs.rbegin() + 1; it != coeffs.rend(); ++it) {
      const Vec<S> w = a.adjoint() * v;
      v = (a * w) * invN;
      v[j] += *it;
    }
    fcols.push_back(std::move(v));
  }
  std::vector<cplx> out;
  for (const auto& p : pairs) {
    const auto k = std::find(cols.begin(), cols.end(), p.j) - cols.begin();
    out.emplace_back(fcols[static_cast<std::size_t>(k)][p.i]);
  }
  return out;
}

template <class S>
std::vector<cplx> cauchy_entries(const Mat<S>& m, const TestFunction& f, const std::vector<IndexPair>& pairs) {
  const auto cols = distinct_indices(pairs, true);
  const Mat<cplx> r = resolvent_columns(m, f.pole(), cols);
  auto at = [&](int i, int j) {
    const auto k = std::find(cols.begin(), cols.end(), j) - cols.begin();
    return r(i, k);
  };
  std::vector<cplx> out;
  for (const auto& p : pairs) {
    const cplx rij = at(p.i, p.j), rji = at(p.j, p.i);
    // f(M) = (R + R^*)/2 for Re 1/(z0 - x) and (R - R^*)/(2i) for Im.
    if (f.family() == Family::cauchy_re) out.push_back(0.5 * (rij + std::conj(rji)));
    else out.push_back((rij - std::conj(rji)) / cplx(0.0, 2.0));
  }
  return out;
}

template <class S>
std::vector<cplx> entries_for_trial(const Mat<S>& a, const TestFunction& f, const std::vector<IndexPair>& pairs) {
  if (f.is_polynomial()) return polynomial_entries(a, f, pairs);
  const Mat<S> m = form_covariance(a);
  if (f.is_cauchy()) return cauchy_entries(m, f, pairs);
  const auto vals = matrix_function_entries(eigh(m), f, pairs);
  return {vals.begin(), vals.end()};
}

inline void check_pairs(const EnsembleSpec& spec, const std::vector<IndexPair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("at least one index pair is required");
  const int limit = std::min(spec.N, 32);
  for (const auto& p : pairs) {
    if (p.i < 0 || p.j < 0 || p.i > p.j || p.j >= limit)
      throw std::invalid_argument("index pair (" + std::to_string(p.i + 1) + "," + std::to_string(p.j + 1) +
                                  ") must satisfy 1 <= i <= j <= min(N, 32)");
  }
}

}  // namespace detail

/// f(M)_ij at the given pairs for one trial's matrix A.
inline std::vector<cplx> matrix_function_entries_for(const SampleMatrix& a, const TestFunction& f,
                                                     const std::vector<IndexPair>& pairs) {
  return a.field == Field::real ? detail::entries_for_trial(a.real, f, pairs)
                                : detail::entries_for_trial(a.complex, f, pairs);
}

inline FluctuationBatch run_entry_fluctuations(const EnsembleSpec& spec, const TestFunction& f,
                                               const std::vector<IndexPair>& pairs, std::size_t trials,
                                               Centering centering, unsigned workers = default_workers()) {
  spec.validate();
  f.validate(spec.params().u_plus());
  detail::check_pairs(spec, pairs);
  if (trials < 100) throw std::invalid_argument("run_entry_fluctuations needs at least 100 trials");

  const std::size_t P = pairs.size();
  std::vector<cplx> raw(trials * P);
  std::vector<char> ok(trials, 1);
  parallel_for(trials, workers, [&](std::size_t t) {
    try {
      const SampleMatrix a = sample_trial(spec, t);
      const auto v = matrix_function_entries_for(a, f, pairs);
      std::copy(v.begin(), v.end(), raw.begin() + static_cast<std::ptrdiff_t>(t * P));
    } catch (const LinalgError&) {
      ok[t] = 0;
    }
  });

  FluctuationBatch b;
  b.spec = spec;
  b.f = f;
  b.pairs = pairs;
  b.centering = centering;
  b.trials_requested = trials;
  for (std::size_t t = 0; t < trials; ++t) (ok[t] ? b.trial_ids : b.failed_trials).push_back(t);
  const std::size_t T = b.trial_ids.size();

  b.centers.assign(P, 0.0);
  if (centering == Centering::analytic) {
    const double mean = mp_expect(f, spec.params());
    for (std::size_t p = 0; p < P; ++p) b.centers[p] = pairs[p].i == pairs[p].j ? cplx(mean) : cplx(0.0);
  } else if (T > 0) {
    for (std::size_t p = 0; p < P; ++p) {
      cplx acc = 0.0;
      for (auto t : b.trial_ids) acc += raw[t * P + p];
      b.centers[p] = acc / static_cast<double>(T);
    }
  }

  const double rootN = std::sqrt(static_cast<double>(spec.N));
  b.samples.resize(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(P));
  for (std::size_t r = 0; r < T; ++r)
    for (std::size_t p = 0; p < P; ++p)
      b.samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p)) =
          rootN * (raw[b.trial_ids[r] * P + p] - b.centers[p]);
  return b;
}

// ---------------------------------------------------------------------------
// Resolvent field.

struct ResolventFieldBatch {
  EnsembleSpec spec;
  std::vector<cplx> points;
  int m = 1;
  std::size_t trials_requested = 0;
  std::vector<std::uint64_t> trial_ids;
  std::vector<std::uint64_t> failed_trials;
  std::vector<cplx> centers;  // g_{sigma, c_N}(z) per point
  std::vector<cplx> psi;      // [row][point][i][j]
  std::vector<cplx> traces;   // [row][point], N^{-1} tr R(z)

  std::size_t rows() const { return trial_ids.size(); }
  std::size_t index(std::size_t row, std::size_t point, int i, int j) const {
    return ((row * points.size() + point) * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)) *
               static_cast<std::size_t>(m) + static_cast<std::size_t>(j);
  }
  cplx psi_at(std::size_t row, std::size_t point, int i, int j) const { return psi[index(row, point, i, j)]; }
  cplx resolvent_at(std::size_t row, std::size_t point, int i, int j) const {
    const cplx c = i == j ? centers[point] : cplx(0.0);
    return c + psi_at(row, point, i, j) / std::sqrt(static_cast<double>(spec.N));
  }
  cplx trace_at(std::size_t row, std::size_t point) const { return traces[row * points.size() + point]; }
  bool failures_acceptable() const { return failed_trials.size() * 1000 <= trials_requested; }
};

inline double distance_to_support(cplx z, const MpParams& p) {
  const double x = std::clamp(z.real(), 0.0, p.u_plus());
  return std::abs(z - x);
}

inline ResolventFieldBatch run_resolvent_field(const EnsembleSpec& spec, const std::vector<cplx>& points, int m,
                                               std::size_t trials, unsigned workers = default_workers()) {
  spec.validate();
  if (m < 1 || m > 8 || m > spec.N) throw std::invalid_argument("corner size m must satisfy 1 <= m <= min(N, 8)");
  if (points.empty()) throw std::invalid_argument("at least one resolvent point is required");
  const MpParams params = spec.params();
  for (const cplx z : points)
    if (distance_to_support(z, params) < 0.1)
      throw std::invalid_argument("resolvent point (" + std::to_string(z.real()) + "," + std::to_string(z.imag()) +
                                  ") is within 0.1 of [0, u+]");
  if (trials == 0) throw std::invalid_argument("trials must be positive");

  ResolventFieldBatch b;
  b.spec = spec;
  b.points = points;
  b.m = m;
  b.trials_requested = trials;
  for (const cplx z : points) b.centers.push_back(stieltjes_g(z, params));

  const std::size_t P = points.size(), block = static_cast<std::size_t>(m) * static_cast<std::size_t>(m);
  std::vector<cplx> raw(trials * P * block), tr(trials * P);
  std::vector<char> ok(trials, 1);
  const double rootN = std::sqrt(static_cast<double>(spec.N));
  auto run = [&](auto tag, std::size_t t) {
    using S = decltype(tag);
    const SampleMatrix a = sample_trial(spec, t);
    const Mat<S>* ap;
    if constexpr (is_complex_v<S>) ap = &a.complex;
    else ap = &a.real;
    const TridiagonalResolvent<S> res(form_covariance(*ap), m);
    for (std::size_t p = 0; p < P; ++p) {
      const Mat<cplx> r = res.corner(points[p]);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          const cplx c = i == j ? b.centers[p] : cplx(0.0);
          raw[((t * P + p) * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)) * static_cast<std::size_t>(m) +
              static_cast<std::size_t>(j)] = rootN * (r(i, j) - c);
        }
      tr[t * P + p] = res.trace(points[p]);
    }
  };
  parallel_for(trials, workers, [&](std::size_t t) {
    try {
      if (spec.field == Field::real) run(double{}, t);
      else run(cplx{}, t);
    } catch (const LinalgError&) {
      ok[t] = 0;
    }
  });

  for (std::size_t t = 0; t < trials; ++t) {
    if (!ok[t]) {
      b.failed_trials.push_back(t);
      continue;
    }
    b.trial_ids.push_back(t);
    b.psi.insert(b.psi.end(), raw.begin() + static_cast<std::ptrdiff_t>(t * P * block),
                 raw.begin() + static_cast<std::ptrdiff_t>((t + 1) * P * block));
    b.traces.insert(b.traces.end(), tr.begin() + static_cast<std::ptrdiff_t>(t * P),
                    tr.begin() + static_cast<std::ptrdiff_t>((t + 1) * P));
  }
  return b;
}

// ---------------------------------------------------------------------------
// Decay of E R_11 - g and Var R_11 in N.

struct DecayRow {
  int N = 0;
  std::size_t trials = 0;
  double bias = 0.0;      // |mean of N^{-1} tr R(z) - g_{sigma, c_N}(z)|
  double bias_se = 0.0;   // standard error of that mean
  double bias_r11 = 0.0;  // |mean R_11(z) - g_{sigma, c_N}(z)|, noisier
  double var_r11 = 0.0;   // unbiased sample variance of R_11(z) (complex, E|.|^2)
  double n_var_r11 = 0.0;
};

/// E R_11 = E N^{-1} tr R by exchangeability of the rows, so the trace gives
/// an unbiased estimate of the same bias with far smaller noise.
inline std::vector<DecayRow> resolvent_decay_probe(const EnsembleSpec& base, const std::vector<int>& Ns, cplx z,
                                                   std::size_t trials, unsigned workers = default_workers()) {
  if (z.imag() < 0.5) throw std::invalid_argument("resolvent_decay_probe needs Im z >= 0.5");
  if (trials < 2) throw std::invalid_argument("resolvent_decay_probe needs at least 2 trials");
  const double c = base.c_N();
  std::vector<DecayRow> rows;
  for (int N : Ns) {
    EnsembleSpec spec = base;
    spec.N = N;
    spec.n = static_cast<int>(std::lround(c * N));
    const ResolventFieldBatch b = run_resolvent_field(spec, {z}, 1, trials, workers);
    const cplx g = b.centers[0];
    const std::size_t T = b.rows();
    cplx mean_tr = 0.0, mean_r = 0.0;
    for (std::size_t r = 0; r < T; ++r) {
      mean_tr += b.trace_at(r, 0);
      mean_r += b.resolvent_at(r, 0, 0, 0);
    }
    mean_tr /= static_cast<double>(T);
    mean_r /= static_cast<double>(T);
    double ss_tr = 0.0, ss_r = 0.0;
    for (std::size_t r = 0; r < T; ++r) {
      ss_tr += std::norm(b.trace_at(r, 0) - mean_tr);
      ss_r += std::norm(b.resolvent_at(r, 0, 0, 0) - mean_r);
    }
    DecayRow row;
    row.N = N;
    row.trials = T;
    row.bias = std::abs(mean_tr - g);
    row.bias_se = std::sqrt(ss_tr / static_cast<double>(T - 1) / static_cast<double>(T));
    row.bias_r11 = std::abs(mean_r - g);
    row.var_r11 = ss_r / static_cast<double>(T - 1);
    row.n_var_r11 = N * row.var_r11;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Columnar CSV: trial, target_id, re, im.

inline std::string pair_id(const IndexPair& p) { return std::to_string(p.i + 1) + "_" + std::to_string(p.j + 1); }

namespace detail {
inline void csv_number(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}
}  // namespace detail

inline void write_batch_csv(std::ostream& os, const FluctuationBatch& b) {
  os << "trial,target_id,re,im\n";
  for (std::size_t r = 0; r < b.rows(); ++r)
    for (std::size_t p = 0; p < b.pairs.size(); ++p) {
      const cplx v = b.samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p));
      os << b.trial_ids[r] << ',' << pair_id(b.pairs[p]) << ',';
      detail::csv_number(os, v.real());
      os << ',';
      detail::csv_number(os, v.imag());
      os << '\n';
    }
}

inline void write_batch_csv(std::ostream& os, const ResolventFieldBatch& b) {
  os << "trial,target_id,re,im\n";
  for (std::size_t r = 0; r < b.rows(); ++r)
    for (std::size_t p = 0; p < b.points.size(); ++p)
      for (int i = 0; i < b.m; ++i)
        for (int j = 0; j < b.m; ++j) {
          const cplx v = b.psi_at(r, p, i, j);
          os << b.trial_ids[r] << ",z" << p << '_' << (i + 1) << '_' << (j + 1) << ',';
          detail::csv_number(os, v.real());
          os << ',';
          detail::csv_number(os, v.imag());
          os << '\n';
        }
}

}  // namespace mplab
