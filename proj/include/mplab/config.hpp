#pragma once

// Run configuration: strict JSON (unknown keys are rejected with their full
// path), lossless round trip, and serialization of reports.

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mplab/ensemble.hpp"
#include "mplab/fluct_mc.hpp"
#include "mplab/mp_analytics.hpp"
#include "mplab/stats.hpp"
#include "mplab/test_function.hpp"

namespace mplab {

using json = nlohmann::ordered_json;

/// Invalid configuration; `path` names the offending key (e.g. "ensemble.entry.kind").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class Experiment { entry, resolvent };

struct Tolerances {
  double variance_rel_band = 0.1;
  double ks_alpha = 0.01;
  double independence_threshold = 0.1;
  double block_rel_band = 0.15;
  friend bool operator==(const Tolerances&, const Tolerances&) = default;
};

struct TestToggles {
  bool variance = true;
  bool ks = true;
  bool independence = true;
  bool blocks = true;
  friend bool operator==(const TestToggles&, const TestToggles&) = default;
};

/// Deliberate distortions of the prediction, for negative controls.
struct PredictionOverrides {
  double kappa4_scale = 1.0;
  std::optional<double> variance;  // replaces every pair's limiting variance
  friend bool operator==(const PredictionOverrides&, const PredictionOverrides&) = default;
};

struct OutputSpec {
  std::string dir = "mplab_out";
  bool json = true;
  bool csv = true;
  friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

struct RunConfig {
  int version = 1;
  EnsembleSpec ensemble;
  TestFunction function = TestFunction::identity();
  Experiment experiment = Experiment::entry;
  std::vector<IndexPair> pairs{{0, 1}};  // zero-based internally, 1-based in JSON
  std::vector<cplx> points;
  int corner = 2;
  std::size_t trials = 1000;
  Centering centering = Centering::empirical;
  TestToggles tests;
  Tolerances tolerances;
  PredictionOverrides prediction;
  OutputSpec output;
  unsigned workers = 0;  // 0: available parallelism

  unsigned resolved_workers() const { return workers ? workers : default_workers(); }
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) throw ConfigError(sub(it.key()), "unknown key");
  }
  bool has(const char* key) const { return j_.contains(key); }
  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& at(const char* key) const {
    if (!j_.contains(key)) throw ConfigError(sub(key), "missing required key");
    return j_.at(key);
  }

  template <class T>
  T get(const char* key) const {
    const json& v = at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(sub(key), "expected a number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError(sub(key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && v.get<long long>() < 0) throw ConfigError(sub(key), "must be nonnegative");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(sub(key), "expected a boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(sub(key), "expected a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(sub(key), e.what());
    }
  }
  template <class T>
  T get_or(const char* key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }
  Reader object(const char* key) const { return Reader(at(key), sub(key)); }

 private:
  const json& j_;
  std::string path_;
};

inline cplx read_point(const json& v, const std::string& path) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(path, "expected a number or [re, im]");
  return {v[0].get<double>(), v[1].get<double>()};
}

inline json point_json(cplx z) { return json::array({z.real(), z.imag()}); }

template <class Fn>
auto rethrow_as_config(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace detail

inline EntryDist entry_from_json(const json& j, const std::string& path) {
  detail::Reader r(j, path);
  r.allow({"kind", "sigma2", "a", "p"});
  EntryDist e;
  e.kind = detail::rethrow_as_config(r.sub("kind"), [&] { return entry_kind_from_string(r.get<std::string>("kind")); });
  e.sigma2 = r.get_or("sigma2", 1.0);
  e.a = r.get_or("a", 1.0);
  e.p = r.get_or("p", 0.5);
  detail::rethrow_as_config(path, [&] { e.validate(); });
  return e;
}

inline json to_json(const EntryDist& e) {
  json j{{"kind", std::string(to_string(e.kind))}, {"sigma2", e.sigma2}};
  if (e.kind == EntryKind::two_point) {
    j["a"] = e.a;
    j["p"] = e.p;
  }
  return j;
}

inline TestFunction function_from_json(const json& j, const std::string& path) {
  detail::Reader r(j, path);
  const Family fam =
      detail::rethrow_as_config(r.sub("family"), [&] { return family_from_string(r.get<std::string>("family")); });
  return detail::rethrow_as_config(path, [&]() -> TestFunction {
    switch (fam) {
      case Family::polynomial: {
        r.allow({"family", "coefficients"});
        const json& c = r.at("coefficients");
        if (!c.is_array()) throw ConfigError(r.sub("coefficients"), "expected an array");
        std::vector<double> coeffs;
        for (const auto& v : c) {
          if (!v.is_number()) throw ConfigError(r.sub("coefficients"), "expected numbers");
          coeffs.push_back(v.get<double>());
        }
        return TestFunction::polynomial(coeffs);
      }
      case Family::cauchy_re:
      case Family::cauchy_im: {
        r.allow({"family", "pole"});
        const cplx pole = detail::read_point(r.at("pole"), r.sub("pole"));
        return fam == Family::cauchy_re ? TestFunction::cauchy_re(pole) : TestFunction::cauchy_im(pole);
      }
      case Family::gaussian_bump:
        r.allow({"family", "center", "width"});
        return TestFunction::gaussian_bump(r.get<double>("center"), r.get<double>("width"));
      case Family::indicator_smoothed:
        r.allow({"family", "left", "right", "ramp"});
        return TestFunction::indicator_smoothed(r.get<double>("left"), r.get<double>("right"), r.get<double>("ramp"));
      case Family::constant:
        r.allow({"family", "value"});
        return TestFunction::constant(r.get<double>("value"));
    }
    throw ConfigError(path, "unsupported family");
  });
}

inline json to_json(const TestFunction& f) {
  json j{{"family", std::string(to_string(f.family()))}};
  switch (f.family()) {
    case Family::polynomial: j["coefficients"] = f.coefficients(); break;
    case Family::cauchy_re:
    case Family::cauchy_im: j["pole"] = detail::point_json(f.pole()); break;
    case Family::gaussian_bump:
      j["center"] = f.center();
      j["width"] = f.width();
      break;
    case Family::indicator_smoothed:
      j["left"] = f.left();
      j["right"] = f.right();
      j["ramp"] = f.ramp();
      break;
    case Family::constant: j["value"] = f.constant_value(); break;
  }
  return j;
}

/// Seed drawn from system entropy, for configs that omit one.
inline std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

inline EnsembleSpec ensemble_from_json(const json& j, const std::string& path) {
  detail::Reader r(j, path);
  r.allow({"N", "n", "c", "field", "entry", "truncation", "seed"});
  EnsembleSpec s;
  s.N = r.get<int>("N");
  if (r.has("n") && r.has("c")) throw ConfigError(r.sub("c"), "give either n or c, not both");
  if (r.has("c")) {
    const double c = r.get<double>("c");
    if (!(c > 0.0)) throw ConfigError(r.sub("c"), "must be positive");
    s.n = static_cast<int>(std::lround(c * s.N));
  } else {
    s.n = r.get<int>("n");
  }
  const std::string field = r.get_or<std::string>("field", "real");
  if (field == "real") s.field = Field::real;
  else if (field == "complex") s.field = Field::complex;
  else throw ConfigError(r.sub("field"), "expected \"real\" or \"complex\"");
  s.entry = r.has("entry") ? entry_from_json(r.at("entry"), r.sub("entry")) : EntryDist{};
  if (r.has("truncation")) {
    detail::Reader t = r.object("truncation");
    t.allow({"kind", "level"});
    const std::string kind = t.get<std::string>("kind");
    if (kind == "clip") {
      s.truncation_level = t.get_or("level", 0.1);
    } else if (kind != "none") {
      throw ConfigError(t.sub("kind"), "expected \"none\" or \"clip\"");
    } else if (t.has("level")) {
      throw ConfigError(t.sub("level"), "level is only valid with kind \"clip\"");
    }
  }
  s.seed = r.has("seed") ? r.get<std::uint64_t>("seed") : entropy_seed();
  detail::rethrow_as_config(path, [&] { s.validate(); });
  return s;
}

inline json to_json(const EnsembleSpec& s) {
  json j{{"N", s.N}, {"n", s.n}, {"field", to_string(s.field)}, {"entry", to_json(s.entry)}};
  if (s.truncation_level) j["truncation"] = {{"kind", "clip"}, {"level", *s.truncation_level}};
  else j["truncation"] = {{"kind", "none"}};
  j["seed"] = s.seed;
  return j;
}

inline RunConfig config_from_json(const json& j) {
  detail::Reader r(j, "");
  r.allow({"version", "ensemble", "function", "experiment", "pairs", "points", "corner", "trials", "centering",
           "tests", "tolerances", "prediction", "output", "workers"});
  RunConfig c;
  c.version = r.get<int>("version");
  if (c.version != 1) throw ConfigError("version", "unsupported version " + std::to_string(c.version));
  c.ensemble = ensemble_from_json(r.at("ensemble"), "ensemble");
  const std::string exp = r.get_or<std::string>("experiment", "entry");
  if (exp == "entry") c.experiment = Experiment::entry;
  else if (exp == "resolvent") c.experiment = Experiment::resolvent;
  else throw ConfigError("experiment", "expected \"entry\" or \"resolvent\"");
  if (r.has("function")) c.function = function_from_json(r.at("function"), "function");
  else if (c.experiment == Experiment::entry) throw ConfigError("function", "missing required key");

  if (r.has("pairs")) {
    const json& p = r.at("pairs");
    if (!p.is_array() || p.empty()) throw ConfigError("pairs", "expected a nonempty array of [i, j]");
    c.pairs.clear();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const std::string path = "pairs[" + std::to_string(k) + "]";
      const json& e = p[k];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
        throw ConfigError(path, "expected [i, j] with integer indices");
      const int i = e[0].get<int>(), jj = e[1].get<int>();
      if (i < 1 || jj < i) throw ConfigError(path, "indices must satisfy 1 <= i <= j");
      c.pairs.push_back({i - 1, jj - 1});
    }
  }
  if (r.has("points")) {
    const json& p = r.at("points");
    if (!p.is_array()) throw ConfigError("points", "expected an array");
    for (std::size_t k = 0; k < p.size(); ++k)
      c.points.push_back(detail::read_point(p[k], "points[" + std::to_string(k) + "]"));
  }
  c.corner = r.get_or("corner", 2);
  c.trials = r.get<std::size_t>("trials");
  if (c.trials == 0) throw ConfigError("trials", "must be positive");
  c.centering =
      detail::rethrow_as_config("centering", [&] { return centering_from_string(r.get_or<std::string>("centering", "empirical")); });
  if (r.has("tests")) {
    detail::Reader t = r.object("tests");
    t.allow({"variance", "ks", "independence", "blocks"});
    c.tests.variance = t.get_or("variance", true);
    c.tests.ks = t.get_or("ks", true);
    c.tests.independence = t.get_or("independence", true);
    c.tests.blocks = t.get_or("blocks", true);
  }
  if (r.has("tolerances")) {
    detail::Reader t = r.object("tolerances");
    t.allow({"variance_rel_band", "ks_alpha", "independence_threshold", "block_rel_band"});
    c.tolerances.variance_rel_band = t.get_or("variance_rel_band", c.tolerances.variance_rel_band);
    c.tolerances.ks_alpha = t.get_or("ks_alpha", c.tolerances.ks_alpha);
    c.tolerances.independence_threshold = t.get_or("independence_threshold", c.tolerances.independence_threshold);
    c.tolerances.block_rel_band = t.get_or("block_rel_band", c.tolerances.block_rel_band);
  }
  if (r.has("prediction")) {
    detail::Reader t = r.object("prediction");
    t.allow({"kappa4_scale", "variance"});
    c.prediction.kappa4_scale = t.get_or("kappa4_scale", 1.0);
    if (t.has("variance") && !t.at("variance").is_null()) c.prediction.variance = t.get<double>("variance");
  }
  if (r.has("output")) {
    detail::Reader t = r.object("output");
    t.allow({"dir", "formats"});
    c.output.dir = t.get_or<std::string>("dir", c.output.dir);
    if (t.has("formats")) {
      const json& f = t.at("formats");
      if (!f.is_array()) throw ConfigError(t.sub("formats"), "expected an array of \"json\"/\"csv\"");
      c.output.json = c.output.csv = false;
      for (const auto& v : f) {
        if (v == "json") c.output.json = true;
        else if (v == "csv") c.output.csv = true;
        else throw ConfigError(t.sub("formats"), "unknown format " + v.dump());
      }
    }
  }
  c.workers = r.get_or<unsigned>("workers", 0u);

  // Cross-field checks.
  if (c.experiment == Experiment::resolvent) {
    if (c.points.empty()) throw ConfigError("points", "resolvent experiments need at least one point");
    if (c.corner < 1 || c.corner > 8) throw ConfigError("corner", "must lie in [1, 8]");
    for (const auto& p : c.pairs)
      if (p.j >= c.corner) throw ConfigError("pairs", "resolvent entries must lie inside the corner");
  } else {
    detail::rethrow_as_config("pairs", [&] { detail::check_pairs(c.ensemble, c.pairs); });
    if (c.trials < 100) throw ConfigError("trials", "entry experiments need at least 100 trials");
    detail::rethrow_as_config("function", [&] { c.function.validate(c.ensemble.params().u_plus()); });
  }
  return c;
}

inline json to_json(const RunConfig& c) {
  json j;
  j["version"] = c.version;
  j["ensemble"] = to_json(c.ensemble);
  j["function"] = to_json(c.function);
  j["experiment"] = c.experiment == Experiment::entry ? "entry" : "resolvent";
  json pairs = json::array();
  for (const auto& p : c.pairs) pairs.push_back({p.i + 1, p.j + 1});
  j["pairs"] = pairs;
  json points = json::array();
  for (const cplx z : c.points) points.push_back(detail::point_json(z));
  j["points"] = points;
  j["corner"] = c.corner;
  j["trials"] = c.trials;
  j["centering"] = to_string(c.centering);
  j["tests"] = {{"variance", c.tests.variance}, {"ks", c.tests.ks}, {"independence", c.tests.independence},
                {"blocks", c.tests.blocks}};
  j["tolerances"] = {{"variance_rel_band", c.tolerances.variance_rel_band},
                     {"ks_alpha", c.tolerances.ks_alpha},
                     {"independence_threshold", c.tolerances.independence_threshold},
                     {"block_rel_band", c.tolerances.block_rel_band}};
  j["prediction"] = {{"kappa4_scale", c.prediction.kappa4_scale}};
  j["prediction"]["variance"] = c.prediction.variance ? json(*c.prediction.variance) : json(nullptr);
  json formats = json::array();
  if (c.output.json) formats.push_back("json");
  if (c.output.csv) formats.push_back("csv");
  j["output"] = {{"dir", c.output.dir}, {"formats", formats}};
  j["workers"] = c.workers;
  return j;
}

inline RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Report serialization.

inline json to_json(const Prediction& p) {
  return {{"field", to_string(p.field)},  {"diagonal", p.diagonal},       {"omega2", p.omega2},
          {"rho", p.rho},                 {"rho2", p.rho * p.rho},        {"kappa4", p.kappa4},
          {"omega_term", p.omega_term},   {"kappa4_term", p.kappa4_term}, {"variance", p.variance},
          {"re_variance", p.re_variance}, {"im_variance", p.im_variance}, {"re_im_covariance", p.re_im_covariance}};
}

inline json to_json(const VarianceReport& r) {
  return {{"id", r.id},         {"trials", r.trials},   {"estimate", r.estimate}, {"ci95", {r.ci_lo, r.ci_hi}},
          {"predicted", r.predicted}, {"ratio", r.ratio}, {"band", r.band},        {"pass", r.pass},
          {"note", r.note}};
}

inline json to_json(const GofReport& r) {
  return {{"id", r.id},
          {"n", r.n},
          {"variance", r.variance},
          {"standardization", r.standardization},
          {"ks_statistic", r.ks_statistic},
          {"p_value", r.p_value},
          {"pass", r.pass}};
}

inline json to_json(const IndependenceReport& r) {
  return {{"id", r.id},           {"correlation", r.correlation}, {"threshold", r.threshold},
          {"applicable", r.applicable}, {"pass", r.pass},       {"note", r.note}};
}

inline json block_json(const Block2& b) { return {{b[0][0], b[0][1]}, {b[1][0], b[1][1]}}; }

inline json to_json(const BlockReport& r) {
  return {{"id", r.id},
          {"entry", {r.entry.i + 1, r.entry.j + 1}},
          {"z_index", r.z_index},
          {"w_index", r.w_index},
          {"empirical", block_json(r.empirical)},
          {"predicted", block_json(r.predicted)},
          {"standard_error", block_json(r.standard_error)},
          {"tolerance", block_json(r.tolerance)},
          {"pass", r.pass}};
}

}  // namespace mplab
