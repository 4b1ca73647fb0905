#pragma once

// Command-line front end: predict, simulate, verify, mp-table, self-test.
// Exit codes: 0 pass, 1 statistical failure, 2 operational error.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "mplab/config.hpp"
#include "mplab/ensemble.hpp"
#include "mplab/fluct_mc.hpp"
#include "mplab/mp_analytics.hpp"
#include "mplab/stats.hpp"

namespace mplab {

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitError = 2;

/// SHA-1 of "blob <size>\0<content>", as `git hash-object` computes it.
inline std::string git_blob_sha1(const std::string& content) {
  const std::string data = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("SHA-1 digest failed");
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
  return os.str();
}

inline std::string config_hash(const RunConfig& c) { return git_blob_sha1(to_json(c).dump()); }

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

inline double kappa4_for(const RunConfig& c) { return c.ensemble.kappa4() * c.prediction.kappa4_scale; }

inline std::vector<Prediction> entry_predictions(const RunConfig& c) {
  const MpParams p = c.ensemble.params();
  const double om2 = omega2(c.function, p), rh = rho(c.function, p);
  std::vector<Prediction> out;
  for (const auto& pair : c.pairs) {
    Prediction pr = assemble_entry_prediction(om2, rh, p, c.ensemble.field, kappa4_for(c), pair.i == pair.j);
    if (c.prediction.variance) {
      pr.variance = *c.prediction.variance;
      const bool split = c.ensemble.field == Field::complex && pair.i != pair.j;
      pr.re_variance = split ? 0.5 * pr.variance : pr.variance;
      pr.im_variance = split ? 0.5 * pr.variance : 0.0;
    }
    out.push_back(pr);
  }
  return out;
}

struct BlockPrediction {
  IndexPair entry;
  std::size_t zi, wi;
  ResolventCovariance cov;
};

inline std::vector<BlockPrediction> block_predictions(const RunConfig& c) {
  const MpParams p = c.ensemble.params();
  std::vector<BlockPrediction> out;
  for (const auto& e : c.pairs)
    for (std::size_t zi = 0; zi < c.points.size(); ++zi)
      for (std::size_t wi = zi; wi < c.points.size(); ++wi)
        out.push_back({e, zi, wi,
                       predict_resolvent_field_cov(c.points[zi], c.points[wi], p, c.ensemble.field, kappa4_for(c),
                                                   e.i, e.j)});
  return out;
}

inline json cplx_json(cplx z) { return json::array({z.real(), z.imag()}); }

}  // namespace detail

// ---------------------------------------------------------------------------

inline json cmd_predict(const RunConfig& c) {
  const MpParams p = c.ensemble.params();
  json j;
  j["params"] = {{"sigma2", p.sigma2}, {"c", p.c}, {"u_minus", p.u_minus()}, {"u_plus", p.u_plus()},
                 {"atom_weight", mp_atom_weight(p)}};
  j["kappa4"] = detail::kappa4_for(c);
  if (c.experiment == Experiment::entry) {
    j["function"] = to_json(c.function);
    j["mean"] = mp_expect(c.function, p);
    j["omega2"] = omega2(c.function, p);
    j["rho"] = rho(c.function, p);
    json pairs = json::array();
    const auto preds = detail::entry_predictions(c);
    for (std::size_t k = 0; k < preds.size(); ++k) {
      json e = to_json(preds[k]);
      e["pair"] = pair_id(c.pairs[k]);
      pairs.push_back(e);
    }
    j["pairs"] = pairs;
  } else {
    json kernels = json::array();
    for (std::size_t zi = 0; zi < c.points.size(); ++zi)
      for (std::size_t wi = zi; wi < c.points.size(); ++wi) {
        const cplx zc = c.points[zi] / p.c, wc = c.points[wi] / p.c;
        const PhiKernelCheck k = phi_kernel(zc, wc, p);
        kernels.push_back({{"z", detail::cplx_json(zc)},
                           {"w", detail::cplx_json(wc)},
                           {"phi", detail::cplx_json(k.value.phi)},
                           {"phi_pp", k.value.pp},
                           {"phi_mm", k.value.mm},
                           {"phi_pm", k.value.pm},
                           {"phi_mp", k.value.mp},
                           {"route_discrepancy", k.discrepancy}});
      }
    j["phi_kernels"] = kernels;
    json blocks = json::array();
    for (const auto& b : detail::block_predictions(c))
      blocks.push_back({{"entry", pair_id(b.entry)},
                        {"z", detail::cplx_json(c.points[b.zi])},
                        {"w", detail::cplx_json(c.points[b.wi])},
                        {"block", block_json(b.cov.block)},
                        {"cross_check", block_json(b.cov.cross_check)},
                        {"discrepancy", b.cov.discrepancy}});
    j["blocks"] = blocks;
  }
  return j;
}

inline json batch_header(const RunConfig& c, std::size_t rows, const std::vector<std::uint64_t>& failed) {
  return {{"version", 1},
          {"config", to_json(c)},
          {"config_sha1", config_hash(c)},
          {"columns", {"trial", "target_id", "re", "im"}},
          {"rows_per_trial", c.experiment == Experiment::entry ? c.pairs.size()
                                                               : c.points.size() * static_cast<std::size_t>(c.corner * c.corner)},
          {"trials", rows},
          {"failed_trials", failed}};
}

struct SimulateResult {
  std::string csv;
  json header;
  json summary;
};

inline SimulateResult simulate(const RunConfig& c) {
  SimulateResult r;
  std::ostringstream csv;
  json summary = json::array();
  if (c.experiment == Experiment::entry) {
    const FluctuationBatch b =
        run_entry_fluctuations(c.ensemble, c.function, c.pairs, c.trials, c.centering, c.resolved_workers());
    write_batch_csv(csv, b);
    r.header = batch_header(c, b.rows(), b.failed_trials);
    for (std::size_t p = 0; p < b.pairs.size(); ++p) {
      const auto re = sample_moments(b.re(p)), im = sample_moments(b.im(p));
      summary.push_back({{"target", pair_id(b.pairs[p])},
                         {"center", detail::cplx_json(b.centers[p])},
                         {"mean", detail::cplx_json({re.mean, im.mean})},
                         {"var_re", re.variance},
                         {"var_im", im.variance}});
    }
  } else {
    const ResolventFieldBatch b = run_resolvent_field(c.ensemble, c.points, c.corner, c.trials, c.resolved_workers());
    write_batch_csv(csv, b);
    r.header = batch_header(c, b.rows(), b.failed_trials);
    for (std::size_t p = 0; p < b.points.size(); ++p)
      for (const auto& e : c.pairs) {
        std::vector<double> re(b.rows()), im(b.rows());
        for (std::size_t t = 0; t < b.rows(); ++t) {
          re[t] = b.psi_at(t, p, e.i, e.j).real();
          im[t] = b.psi_at(t, p, e.i, e.j).imag();
        }
        const auto mr = sample_moments(re), mi = sample_moments(im);
        summary.push_back({{"target", "z" + std::to_string(p) + "_" + pair_id(e)},
                           {"mean", detail::cplx_json({mr.mean, mi.mean})},
                           {"var_re", mr.variance},
                           {"var_im", mi.variance}});
      }
  }
  r.csv = csv.str();
  r.summary = summary;
  r.header["summary"] = summary;
  return r;
}

struct VerifyResult {
  json report;
  bool pass = false;
};

inline VerifyResult verify(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  json reports;
  bool pass = true;
  auto add = [&](const char* key, json item, bool ok) {
    reports[key].push_back(std::move(item));
    pass = pass && ok;
  };
  if (c.experiment == Experiment::entry) {
    const auto preds = detail::entry_predictions(c);
    const FluctuationBatch b =
        run_entry_fluctuations(c.ensemble, c.function, c.pairs, c.trials, c.centering, c.resolved_workers());
    reports["failures"] = {{"failed", b.failed_trials.size()}, {"trials", b.trials_requested},
                           {"acceptable", b.failures_acceptable()}};
    pass = pass && b.failures_acceptable();
    for (std::size_t k = 0; k < preds.size(); ++k) {
      json e = to_json(preds[k]);
      e["pair"] = pair_id(c.pairs[k]);
      reports["predictions"].push_back(e);
    }
    if (c.tests.variance)
      for (const auto& r : variance_test(b, preds, {c.tolerances.variance_rel_band, 1.0})) add("variance", to_json(r), r.pass);
    if (c.tests.ks) {
      for (std::size_t p = 0; p < b.pairs.size(); ++p) {
        const auto coords = b.coordinates(p);
        for (std::size_t k = 0; k < coords.size(); ++k) {
          const double v = coords.size() == 2 ? (k == 0 ? preds[p].re_variance : preds[p].im_variance) : preds[p].variance;
          std::string id = pair_id(b.pairs[p]) + (coords.size() == 2 ? (k == 0 ? ":re" : ":im") : "");
          if (!(v > 1e-9) || coords[k].size() < 500) {
            add("ks", {{"id", id}, {"skipped", v > 1e-9 ? "fewer than 500 samples" : "zero predicted variance"}}, true);
            continue;
          }
          const GofReport g = ks_gaussian_test(id, coords[k], v, "predicted", c.tolerances.ks_alpha);
          add("ks", to_json(g), g.pass);
        }
      }
    }
    if (c.tests.independence && c.pairs.size() > 1)
      for (const auto& r : independence_test(b, all_pair_combinations(c.pairs.size()), c.tolerances.independence_threshold))
        add("independence", to_json(r), !r.applicable || r.pass);
  } else {
    const auto preds = detail::block_predictions(c);
    const ResolventFieldBatch b = run_resolvent_field(c.ensemble, c.points, c.corner, c.trials, c.resolved_workers());
    reports["failures"] = {{"failed", b.failed_trials.size()}, {"trials", b.trials_requested},
                           {"acceptable", b.failures_acceptable()}};
    pass = pass && b.failures_acceptable();
    for (const auto& p : preds) {
      const bool agree = p.cov.discrepancy <= 1e-8;
      add("analytic_paths",
          {{"id", pair_id(p.entry) + "@z" + std::to_string(p.zi) + ",z" + std::to_string(p.wi)},
           {"discrepancy", p.cov.discrepancy},
           {"pass", agree}},
          agree);
      if (c.tests.blocks) {
        const BlockReport r = covariance_block_test(b, p.entry, p.zi, p.wi, p.cov.block, c.tolerances.block_rel_band);
        add("blocks", to_json(r), r.pass);
      }
    }
  }
  const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  VerifyResult v;
  v.pass = pass;
  v.report = {{"version", 1}, {"config", to_json(c)}, {"reports", reports}, {"pass", pass},
              {"seed", c.ensemble.seed}, {"wall_ms", ms}};
  return v;
}

/// Flat CSV view of a verify report: section,id,statistic,predicted,pass.
inline std::string report_csv(const json& report) {
  std::ostringstream os;
  os << "section,id,statistic,predicted,pass\n";
  const json& r = report.at("reports");
  auto num = [](const json& v) { return v.is_number() ? v.dump() : std::string(); };
  for (auto it = r.begin(); it != r.end(); ++it) {
    if (!it.value().is_array()) continue;
    for (const auto& e : it.value()) {
      std::string stat, pred;
      if (it.key() == "variance") stat = num(e["estimate"]), pred = num(e["predicted"]);
      else if (it.key() == "ks") stat = num(e.value("p_value", json()));
      else if (it.key() == "independence") stat = num(e["correlation"]);
      else if (it.key() == "analytic_paths") stat = num(e["discrepancy"]);
      else if (it.key() == "predictions") stat = num(e["variance"]);
      if (it.key() == "predictions") {
        os << it.key() << ',' << e.value("pair", "") << ',' << stat << ",,\n";
        continue;
      }
      os << it.key() << ',' << e.value("id", "") << ',' << stat << ',' << pred << ','
         << (e.value("pass", true) ? "true" : "false") << '\n';
    }
  }
  return os.str();
}

struct MpTable {
  std::string density_csv;
  std::string stieltjes_csv;
};

/// Density on a sin^2-spaced grid over [u-, u+] (dense near both edges) plus
/// an annotated atom row; g(x + 0.1i) on a uniform grid around the support.
inline MpTable cmd_mp_table(const MpParams& p, int points) {
  if (points < 2) throw std::invalid_argument("mp-table needs at least 2 grid points");
  MpTable t;
  std::ostringstream d, s;
  d << std::setprecision(17) << "kind,x,density\n";
  const double lo = p.u_minus(), hi = p.u_plus();
  for (int k = 0; k < points; ++k) {
    const double th = std::numbers::pi / 2.0 * k / (points - 1);
    const double x = k == points - 1 ? hi : lo + (hi - lo) * std::sin(th) * std::sin(th);
    d << "density," << x << ',' << mp_density(x, p) << '\n';
  }
  d << "atom,0," << mp_atom_weight(p) << '\n';
  s << std::setprecision(17) << "z_re,z_im,g_re,g_im\n";
  const double a = std::min(0.0, lo) - 1.0, b = hi + 1.0;
  for (int k = 0; k < points; ++k) {
    const cplx z(a + (b - a) * k / (points - 1), 0.1);
    const cplx g = stieltjes_g(z, p);
    s << z.real() << ',' << z.imag() << ',' << g.real() << ',' << g.imag() << '\n';
  }
  t.density_csv = d.str();
  t.stieltjes_csv = s.str();
  return t;
}

struct SelfTestLine {
  std::string name;
  bool pass;
  std::string detail;
};

/// Calibration of the statistical machinery on synthetic data with known truth.
inline std::vector<SelfTestLine> cmd_self_test(std::uint64_t seed) {
  std::vector<SelfTestLine> out;
  auto normals = [&](std::uint64_t stream, std::size_t n, double sd) {
    PhiloxStream rng(seed, stream);
    boost::random::normal_distribution<double> nd(0.0, sd);
    std::vector<double> x(n);
    for (auto& v : x) v = nd(rng);
    return x;
  };
  int null_ok = 0, power_ok = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto x = normals(static_cast<std::uint64_t>(rep), 5000, 1.0);
    if (ks_gaussian_test("null", x, 1.0).p_value > 0.01) ++null_ok;
    if (ks_gaussian_test("power", x, 4.0).p_value < 0.01) ++power_ok;
  }
  out.push_back({"ks null calibration (N(0,1) vs 1)", null_ok >= 98, std::to_string(null_ok) + "/100 with p > 0.01"});
  out.push_back({"ks power (N(0,1) vs 4)", power_ok == 100, std::to_string(power_ok) + "/100 with p < 0.01"});
  const double d0 = ks_gaussian_test("zeros", std::vector<double>(1000, 0.0), 1.0).ks_statistic;
  out.push_back({"ks point mass statistic", std::abs(d0 - 0.5) < 1e-15, "D = " + std::to_string(d0)});

  int covered = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto r = variance_test("ci", normals(1000 + static_cast<std::uint64_t>(rep), 1000, std::sqrt(2.0)), 2.0);
    if (r.ci_lo <= 2.0 && 2.0 <= r.ci_hi) ++covered;
  }
  out.push_back({"variance 95% CI coverage", covered >= 90, std::to_string(covered) + "/100 cover the truth"});

  int indep_ok = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto a = normals(2000 + 2 * static_cast<std::uint64_t>(rep), 4000, 1.0);
    const auto b = normals(2001 + 2 * static_cast<std::uint64_t>(rep), 4000, 1.0);
    if (independence_test("null", {a}, {b}, false).pass) ++indep_ok;
  }
  out.push_back({"independence null calibration", indep_ok >= 99, std::to_string(indep_ok) + "/100 below 0.1"});
  return out;
}

// ---------------------------------------------------------------------------

namespace detail {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::string> out;
  std::optional<unsigned> workers;
  std::optional<std::string> format;
};

inline RunConfig load_config(const CommonFlags& f) {
  if (f.config.empty()) throw ConfigError("--config", "a config file is required");
  std::ifstream in(f.config);
  if (!in) throw std::runtime_error("cannot read config file " + f.config);
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  // Flags override file values before validation.
  if (j.is_object() && j.contains("ensemble") && j["ensemble"].is_object()) {
    if (f.seed) j["ensemble"]["seed"] = *f.seed;
  }
  if (f.trials) j["trials"] = *f.trials;
  RunConfig c = config_from_json(j);
  if (f.out) c.output.dir = *f.out;
  if (f.workers) c.workers = *f.workers;
  if (f.format) {
    if (*f.format == "json") c.output.json = true, c.output.csv = false;
    else if (*f.format == "csv") c.output.json = false, c.output.csv = true;
    else if (*f.format == "both") c.output.json = c.output.csv = true;
    else throw ConfigError("--format", "expected json, csv or both");
  }
  return c;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"mplab: Marchenko-Pastur analytics and entrywise CLT verification"};
  app.require_subcommand(1);
  detail::CommonFlags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON run configuration")->required();
    sub->add_option("--seed", flags.seed, "master seed (overrides the config)");
    sub->add_option("--trials", flags.trials, "trial count (overrides the config)");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--workers", flags.workers, "worker threads");
    sub->add_option("--format", flags.format, "json|csv|both");
  };
  auto* predict = app.add_subcommand("predict", "closed-form predictions for a config");
  add_common(predict);
  auto* simulate_cmd = app.add_subcommand("simulate", "write a Monte-Carlo batch");
  add_common(simulate_cmd);
  auto* verify_cmd = app.add_subcommand("verify", "simulate and test against predictions");
  add_common(verify_cmd);
  auto* table = app.add_subcommand("mp-table", "density and Stieltjes transform tables");
  double sigma2 = 1.0, ratio = 1.0;
  int grid = 101;
  std::optional<std::string> table_out;
  table->add_option("--sigma2", sigma2, "scale index");
  table->add_option("--c", ratio, "ratio index");
  table->add_option("--grid", grid, "grid points");
  table->add_option("--out", table_out, "output directory (default: stdout)");
  auto* self = app.add_subcommand("self-test", "calibrate the statistical tests");
  std::uint64_t self_seed = 20240601;
  self->add_option("--seed", self_seed, "seed for synthetic data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }

  try {
    if (*predict) {
      const RunConfig c = detail::load_config(flags);
      const json j = cmd_predict(c);
      out << j.dump(2) << '\n';
      if (flags.out) detail::write_file(std::filesystem::path(c.output.dir) / "prediction.json", j.dump(2) + "\n");
      return kExitPass;
    }
    if (*simulate_cmd) {
      const RunConfig c = detail::load_config(flags);
      const SimulateResult r = simulate(c);
      const std::filesystem::path dir(c.output.dir);
      detail::write_file(dir / "batch.csv", r.csv);
      detail::write_file(dir / "batch.json", r.header.dump(2) + "\n");
      out << r.summary.dump(2) << '\n';
      return kExitPass;
    }
    if (*verify_cmd) {
      const RunConfig c = detail::load_config(flags);
      const VerifyResult v = verify(c);
      const std::filesystem::path dir(c.output.dir);
      if (c.output.json) detail::write_file(dir / "report.json", v.report.dump(2) + "\n");
      if (c.output.csv) detail::write_file(dir / "report.csv", report_csv(v.report));
      out << (v.pass ? "PASS" : "FAIL") << " seed=" << c.ensemble.seed << " wall_ms=" << std::fixed
          << std::setprecision(0) << v.report["wall_ms"].get<double>() << '\n';
      return v.pass ? kExitPass : kExitFail;
    }
    if (*table) {
      const MpTable t = cmd_mp_table(MpParams(sigma2, ratio), grid);
      if (table_out) {
        detail::write_file(std::filesystem::path(*table_out) / "mp_density.csv", t.density_csv);
        detail::write_file(std::filesystem::path(*table_out) / "mp_stieltjes.csv", t.stieltjes_csv);
      } else {
        out << t.density_csv << '\n' << t.stieltjes_csv;
      }
      return kExitPass;
    }
    if (*self) {
      bool ok = true;
      for (const auto& line : cmd_self_test(self_seed)) {
        out << (line.pass ? "PASS  " : "FAIL  ") << line.name << "  (" << line.detail << ")\n";
        ok = ok && line.pass;
      }
      return ok ? kExitPass : kExitFail;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace mplab
