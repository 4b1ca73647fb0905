#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "mplab/cli.hpp"

using namespace mplab;

namespace {

const std::string kConfigs = MPLAB_CONFIG_DIR;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "mplab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mplab_cli_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::filesystem::path write_config(const std::string& name, const json& j) {
  const auto p = std::filesystem::temp_directory_path() / ("mplab_cli_cfg_" + name + ".json");
  std::ofstream(p) << j.dump(2);
  return p;
}

json smoke_json() { return json::parse(slurp(kConfigs + "/smoke.json")); }

}  // namespace

TEST(GitBlobHash, MatchesGit) {
  // `printf 'hello\n' | git hash-object --stdin`
  EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(Predict, LinearDiagonalAndConstant) {
  json j = smoke_json();
  j["ensemble"] = {{"N", 64}, {"n", 64}, {"entry", {{"kind", "gaussian"}}}, {"seed", 1}};
  j["function"] = {{"family", "polynomial"}, {"coefficients", {0.0, 1.0}}};
  j["pairs"] = {{1, 1}, {1, 2}};
  auto r = run({"predict", "--config", write_config("lin", j).string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json p = json::parse(r.out);
  EXPECT_NEAR(p["pairs"][0]["variance"].get<double>(), 2.0, 1e-10);
  EXPECT_NEAR(p["pairs"][1]["variance"].get<double>(), 1.0, 1e-10);

  j["function"] = {{"family", "constant"}, {"value", 3.0}};
  r = run({"predict", "--config", write_config("const", j).string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& e : json::parse(r.out)["pairs"]) EXPECT_EQ(e["variance"].get<double>(), 0.0);

  j["function"] = {{"family", "cauchy_re"}, {"pole", 5.0}};
  r = run({"predict", "--config", write_config("cauchy", j).string()});
  EXPECT_NEAR(json::parse(r.out)["pairs"][1]["variance"].get<double>(), 0.013049516849970557, 1e-12);
}

TEST(Predict, ResolventBlocks) {
  auto r = run({"predict", "--config", kConfigs + "/resolvent_field.json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json p = json::parse(r.out);
  EXPECT_EQ(p["blocks"].size(), 6u);  // 2 entries x 3 point pairs
  for (const auto& b : p["blocks"]) EXPECT_LT(b["discrepancy"].get<double>(), 1e-8);
  EXPECT_EQ(p["phi_kernels"].size(), 3u);
}

TEST(Simulate, WritesFilesDeterministically) {
  const auto a = scratch("sim_a"), b = scratch("sim_b");
  auto ra = run({"simulate", "--config", kConfigs + "/smoke.json", "--trials", "100", "--out", a.string()});
  auto rb = run({"simulate", "--config", kConfigs + "/smoke.json", "--trials", "100", "--out", b.string(), "--workers",
                 "2"});
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  EXPECT_TRUE(std::filesystem::exists(a / "batch.json"));
  const std::string csv = slurp(a / "batch.csv");
  EXPECT_EQ(csv, slurp(b / "batch.csv"));
  EXPECT_EQ(csv.rfind("trial,target_id,re,im\n", 0), 0u);
  const json header = json::parse(slurp(a / "batch.json"));
  EXPECT_EQ(header["trials"], 100);
  EXPECT_EQ(header["config"]["ensemble"]["seed"], 7);
  EXPECT_EQ(header["config_sha1"].get<std::string>().size(), 40u);

  const auto c = scratch("sim_c");
  run({"simulate", "--config", kConfigs + "/smoke.json", "--trials", "100", "--seed", "8", "--out", c.string()});
  EXPECT_NE(csv, slurp(c / "batch.csv"));
}

TEST(Simulate, ResolventBatch) {
  json j = json::parse(slurp(kConfigs + "/resolvent_field.json"));
  j["ensemble"]["N"] = j["ensemble"]["n"] = 32;
  j["trials"] = 10;
  const auto out = scratch("sim_res");
  auto r = run({"simulate", "--config", write_config("res", j).string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(out / "batch.csv");
  EXPECT_NE(csv.find(",z1_1_2,"), std::string::npos);
}

TEST(Verify, SmokePassesAndWritesReport) {
  const auto out = scratch("verify");
  auto r = run({"verify", "--config", kConfigs + "/smoke.json", "--out", out.string(), "--format", "both"});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  const json rep = json::parse(slurp(out / "report.json"));
  for (const char* k : {"version", "config", "reports", "pass", "seed", "wall_ms"}) EXPECT_TRUE(rep.contains(k)) << k;
  EXPECT_TRUE(rep["pass"].get<bool>());
  EXPECT_EQ(slurp(out / "report.csv").rfind("section,id,statistic,predicted,pass\n", 0), 0u);
}

TEST(Verify, WrongPredictionExitsOne) {
  json j = smoke_json();
  j["prediction"] = {{"variance", 5.0}};
  auto r = run({"verify", "--config", write_config("wrong", j).string(), "--out", scratch("wrong").string()});
  EXPECT_EQ(r.code, 1) << r.out << r.err;
}

TEST(ExitCodes, OperationalErrors) {
  auto r = run({"verify", "--config", kConfigs + "/malformed.json"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("malformed JSON"), std::string::npos);

  r = run({"verify", "--config", kConfigs + "/invalid_entry_kind.json"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ensemble.entry.kind"), std::string::npos) << r.err;

  json j = smoke_json();
  j["trials"] = 0;
  r = run({"simulate", "--config", write_config("zero", j).string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("trials"), std::string::npos);

  EXPECT_EQ(run({"verify", "--config", "/nonexistent/config.json"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"verify"}).code, 2);
  EXPECT_EQ(run({"verify", "--config", kConfigs + "/smoke.json", "--format", "xml"}).code, 2);
}

TEST(MpTableCmd, EdgesAtomAndMass) {
  auto t = cmd_mp_table({1.0, 1.0}, 101);
  std::istringstream in(t.density_csv);
  std::string line;
  std::getline(in, line);
  std::vector<std::pair<double, double>> rows;
  while (std::getline(in, line)) {
    if (line.rfind("density,", 0) != 0) continue;
    const auto a = line.find(','), b = line.find(',', a + 1);
    rows.emplace_back(std::stod(line.substr(a + 1, b - a - 1)), std::stod(line.substr(b + 1)));
  }
  ASSERT_EQ(rows.size(), 101u);
  EXPECT_EQ(rows.front().second, 0.0);
  EXPECT_EQ(rows.back().second, 0.0);
  EXPECT_NE(t.density_csv.find("atom,0,0\n"), std::string::npos);

  for (double c : {0.5, 2.0}) {
    t = cmd_mp_table({1.0, c}, 101);
    std::istringstream s(t.density_csv);
    std::getline(s, line);
    double prev_x = 0, prev_d = 0, mass = 0, atom = 0;
    bool first = true;
    while (std::getline(s, line)) {
      const auto a = line.find(','), b = line.find(',', a + 1);
      const double x = std::stod(line.substr(a + 1, b - a - 1)), d = std::stod(line.substr(b + 1));
      if (line.rfind("atom,", 0) == 0) {
        atom = d;
        continue;
      }
      if (!first) mass += 0.5 * (d + prev_d) * (x - prev_x);
      first = false;
      prev_x = x;
      prev_d = d;
    }
    EXPECT_NEAR(mass + atom, 1.0, 1e-3) << c;
    if (c == 0.5) EXPECT_EQ(atom, 0.5);
  }
  EXPECT_NE(t.stieltjes_csv.find("z_re,z_im,g_re,g_im"), std::string::npos);
  EXPECT_THROW(cmd_mp_table({1.0, 1.0}, 1), std::invalid_argument);
}

TEST(MpTableCmd, WritesFiles) {
  const auto out = scratch("table");
  auto r = run({"mp-table", "--c", "0.5", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(out / "mp_density.csv"));
  EXPECT_TRUE(std::filesystem::exists(out / "mp_stieltjes.csv"));
}

TEST(SelfTest, Passes) {
  auto r = run({"self-test"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}
