#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "mplab/config.hpp"

using namespace mplab;

namespace {

json base() {
  return json::parse(R"({
    "version": 1,
    "ensemble": {"N": 64, "n": 96, "field": "real", "entry": {"kind": "uniform", "sigma2": 1.5}, "seed": 9},
    "function": {"family": "cauchy_re", "pole": [5.0, 0.5]},
    "pairs": [[1, 1], [1, 2]],
    "trials": 200
  })");
}

std::string error_path(const json& j) {
  try {
    config_from_json(j);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

}  // namespace

TEST(Config, ParsesAndDefaults) {
  const RunConfig c = config_from_json(base());
  EXPECT_EQ(c.ensemble.N, 64);
  EXPECT_EQ(c.ensemble.n, 96);
  EXPECT_EQ(c.ensemble.entry.kind, EntryKind::uniform);
  EXPECT_EQ(c.ensemble.seed, 9u);
  EXPECT_EQ(c.function.family(), Family::cauchy_re);
  EXPECT_EQ(c.function.pole(), cplx(5.0, 0.5));
  ASSERT_EQ(c.pairs.size(), 2u);
  EXPECT_EQ(c.pairs[1].i, 0);
  EXPECT_EQ(c.pairs[1].j, 1);
  EXPECT_EQ(c.centering, Centering::empirical);
  EXPECT_EQ(c.tolerances, Tolerances{});
  EXPECT_EQ(c.experiment, Experiment::entry);
}

TEST(Config, RoundTrip) {
  json j = base();
  j["ensemble"]["truncation"] = {{"kind", "clip"}, {"level", 0.3}};
  j["prediction"] = {{"kappa4_scale", 2.0}, {"variance", 1.5}};
  j["tests"] = {{"ks", false}};
  j["output"] = {{"dir", "somewhere"}, {"formats", {"csv"}}};
  const RunConfig a = config_from_json(j);
  const RunConfig b = config_from_json(to_json(a));
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(b.ensemble.truncation_level, 0.3);
  EXPECT_EQ(b.prediction.variance, 1.5);
  EXPECT_FALSE(b.tests.ks);
  EXPECT_FALSE(b.output.json);
  EXPECT_EQ(b.output.dir, "somewhere");
}

TEST(Config, RatioInsteadOfColumns) {
  json j = base();
  j["ensemble"].erase("n");
  j["ensemble"]["c"] = 0.5;
  EXPECT_EQ(config_from_json(j).ensemble.n, 32);
  j["ensemble"]["n"] = 32;
  EXPECT_EQ(error_path(j), "ensemble.c");
}

TEST(Config, MissingSeedDrawsEntropy) {
  json j = base();
  j["ensemble"].erase("seed");
  const auto a = config_from_json(j), b = config_from_json(j);
  EXPECT_NE(a.ensemble.seed, b.ensemble.seed);
  EXPECT_EQ(to_json(a)["ensemble"]["seed"].get<std::uint64_t>(), a.ensemble.seed);
}

TEST(Config, RejectsUnknownKeysWithPath) {
  json j = base();
  j["ensemble"]["entry"]["kurtosis"] = 3;
  EXPECT_EQ(error_path(j), "ensemble.entry.kurtosis");
  j = base();
  j["bogus"] = 1;
  EXPECT_EQ(error_path(j), "bogus");
  j = base();
  j["function"]["width"] = 1.0;
  EXPECT_EQ(error_path(j), "function.width");
}

TEST(Config, ValidationErrors) {
  json j = base();
  j["trials"] = 0;
  EXPECT_EQ(error_path(j), "trials");
  j = base();
  j["trials"] = 50;
  EXPECT_EQ(error_path(j), "trials");
  j = base();
  j["ensemble"]["entry"]["kind"] = "cauchy";
  EXPECT_EQ(error_path(j), "ensemble.entry.kind");
  j = base();
  j["pairs"] = {{2, 1}};
  EXPECT_EQ(error_path(j), "pairs[0]");
  j = base();
  j["function"]["pole"] = 2.0;
  EXPECT_EQ(error_path(j), "function");
  j = base();
  j["version"] = 2;
  EXPECT_EQ(error_path(j), "version");
  j = base();
  j["ensemble"]["N"] = "sixty-four";
  EXPECT_EQ(error_path(j), "ensemble.N");
  j = base();
  j["experiment"] = "resolvent";
  EXPECT_EQ(error_path(j), "points");
  j["points"] = {{0.0, 2.0}};
  j["corner"] = 1;
  EXPECT_EQ(error_path(j).rfind("pairs", 0), 0u);
  j["corner"] = 2;
  EXPECT_NO_THROW(config_from_json(j));
}

TEST(Config, MalformedText) {
  EXPECT_THROW(parse_config("{\"version\": 1,"), ConfigError);
  EXPECT_THROW(parse_config("[1, 2]"), ConfigError);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"offdiag_linear_gaussian", "diag_linear_rademacher", "diag_linear_gaussian",
                           "diag_linear_centered_exponential", "cauchy_pole5", "complex_linear_gaussian",
                           "resolvent_field", "negative_kappa4_doubled", "negative_variance_doubled", "smoke"}) {
    std::ifstream in(std::string(MPLAB_CONFIG_DIR) + "/" + name + ".json");
    ASSERT_TRUE(in) << name;
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_NO_THROW(parse_config(ss.str())) << name;
  }
}

TEST(ReportJson, PredictionFields) {
  const auto pr = predict_entry_clt(TestFunction::identity(), {1.0, 1.0}, Field::real, 0.0, true);
  const json j = to_json(pr);
  EXPECT_DOUBLE_EQ(j["variance"].get<double>(), pr.variance);
  EXPECT_EQ(j["field"], "real");
  EXPECT_TRUE(j["diagonal"].get<bool>());
}
