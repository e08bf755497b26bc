#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "jqc/experiments.hpp"

using namespace jqc;

namespace {

std::string csv_text(const ExperimentConfig& cfg, const ResultTable& t) {
  std::ostringstream ss;
  write_csv(ss, cfg, t);
  return ss.str();
}

ParsedCsv parse(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

std::size_t col(const ParsedCsv& csv, const std::string& name) {
  const auto it = std::find(csv.header.begin(), csv.header.end(), name);
  if (it == csv.header.end()) throw std::runtime_error("no column " + name);
  return static_cast<std::size_t>(it - csv.header.begin());
}

double num(const ParsedCsv& csv, std::size_t row, const std::string& name) {
  return std::stod(csv.rows.at(row).at(col(csv, name)));
}

int expect_config_error_line(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto p = std::filesystem::temp_directory_path() / ("jqc_test_" + name);
  std::ofstream(p) << content;
  return p;
}

int run_cli(const std::string& args, std::string* out = nullptr) {
  const auto capture = std::filesystem::temp_directory_path() / "jqc_test_cli_out.txt";
  const std::string cmd = std::string(JQC_CLI_PATH) + " " + args + " > " + capture.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (out) {
    std::ifstream in(capture);
    *out = std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return WEXITSTATUS(rc);
}

}  // namespace

TEST(Config, GridExpansion) {
  const ExperimentConfig cfg = parse_config(R"({
    "kind": "sweep",
    "model": {"kind": "ising", "sites": 8, "field": [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0]},
    "depths": [1, 2]
  })");
  EXPECT_EQ(cfg.models.size() * cfg.depths.size(), 20U);
  EXPECT_EQ(cfg.models[3].field, 0.8);
  EXPECT_EQ(cfg.models[3].sites, 8);
}

TEST(Config, Defaults) {
  const ExperimentConfig d = parse_config(R"({"kind": "dispersion", "model": {"kind": "ising", "sites": 2}})");
  EXPECT_EQ(d.shots, std::vector<std::uint64_t>{320000});
  EXPECT_EQ(d.lambda_scale.size(), 5U);
  EXPECT_EQ(d.row_time_limit, 300.0);
  const ExperimentConfig r = parse_config(R"({"kind": "reconstruct", "model": {"kind": "ising"}, "sizes": [5, 6]})");
  EXPECT_EQ(r.models.size(), 2U);
  EXPECT_EQ(r.shots, std::vector<std::uint64_t>{0});
  EXPECT_EQ(r.states_per_size, 25);
}

TEST(Config, LinePreciseErrors) {
  EXPECT_EQ(expect_config_error_line("{\n  \"kind\": \"sweep\",\n  \"model\": {\"kind\": \"ising\", \"sites\": 4},\n  \"depths\": [1, \"two\"]\n}"), 4);
  EXPECT_EQ(expect_config_error_line("{\n  \"kind\": \"sweep\",\n\n  \"modle\": {}\n}"), 4);
  EXPECT_EQ(expect_config_error_line("{\n  \"kind\": \"sweeep\"\n}"), 2);
  EXPECT_EQ(expect_config_error_line("{\n  \"kind\": \"sweep\",\n  \"model\": {\n    \"kind\": \"ising\",\n    \"sites\": 1\n  }\n}"), 5);
  EXPECT_EQ(expect_config_error_line("{\n  \"kind\": \"sweep\",\n  \"model\": {\"kind\": \"ising\", \"sites\": 4},\n  \"field\": [],\n}"), 5);
  EXPECT_EQ(expect_config_error_line("{\n \"kind\": \"sweep\",\n \"model\": {\"kind\": \"ising\", \"sites\": 4,\n  \"field\": []}\n}"), 4);
  EXPECT_EQ(expect_config_error_line("{\"kind\": \"sweep\", \"model\": {\"kind\": \"ising\", \"sites\": 4},\n \"output\": \"/no/such/dir/x.csv\"}"), 2);
}

TEST(Config, ErrorMessageNamesSourceAndPointer) {
  try {
    parse_config("{\"kind\": \"gain\", \"model\": {\"kind\": \"ising\", \"sites\": 4}, \"gain\": {\"order\": 9}}", "g.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("g.json:1: /gain/order"), std::string::npos) << e.what();
  }
}

TEST(Fnv1a, KnownValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(RelativeError, Definition) {
  EXPECT_DOUBLE_EQ(relative_error(-1.5, -2.0), 0.25);
  EXPECT_THROW(relative_error(1.0, 0.0), std::domain_error);
}

TEST(DumpH, LineCountsAndOrder) {
  std::ostringstream ising;
  dump_hamiltonians(ising, parse_config(R"({"kind": "dump-h", "model": {"kind": "ising", "sites": 2, "field": 1}})"));
  EXPECT_EQ(ising.str(), "-1 0 IX\n-1 0 XI\n-1 0 ZZ\n");

  std::ostringstream hub;
  dump_hamiltonians(hub, parse_config(R"({"kind": "dump-h", "model": {"kind": "hubbard", "sites": 2, "hopping": 1, "onsite": 4}})"));
  const std::string text = hub.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "2 0 IIII");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
}

TEST(ReadCsv, RejectsRaggedRows) {
  std::istringstream in("# x\na,b,c\n1,2,3\n1,2\n");
  EXPECT_THROW(read_csv(in), std::runtime_error);
}

TEST(Sweep, JqcImprovesOnEveryRow) {
  const ExperimentConfig cfg = parse_config(R"({
    "kind": "sweep",
    "model": {"kind": "ising", "sites": 4, "field": [0.5, 1.0, 1.5]},
    "depths": [1, 2],
    "optimizer": {"restarts": 3}
  })");
  const std::string text = csv_text(cfg, run_experiment(cfg));
  const ParsedCsv csv = parse(text);
  ASSERT_EQ(csv.rows.size(), 6U);
  EXPECT_EQ(csv.provenance.size(), 2U);
  EXPECT_NE(csv.provenance[1].find("config_hash="), std::string::npos);
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    EXPECT_LE(num(csv, r, "rel_jqc"), num(csv, r, "rel_circuit"));
    EXPECT_EQ(csv.rows[r][col(csv, "status")], "ok");
  }
}

TEST(Sweep, SeedOverrideChangesProvenance) {
  const ExperimentConfig cfg = parse_config(R"({"kind": "sweep", "model": {"kind": "ising", "sites": 2}, "optimizer": {"restarts": 1}})");
  RunOptions o;
  o.seed = 99;
  ExperimentConfig seeded = cfg;
  seeded.seed = 99;
  EXPECT_NE(csv_text(seeded, run_experiment(cfg, o)).find("seed=99"), std::string::npos);
}

TEST(Sweep, TimeoutRowsAreGraceful) {
  ExperimentConfig cfg = parse_config(R"({"kind": "sweep", "model": {"kind": "ising", "sites": 6}, "depths": [3], "row_time_limit": 0.001})");
  const ParsedCsv csv = parse(csv_text(cfg, run_experiment(cfg)));
  ASSERT_EQ(csv.rows.size(), 1U);
  EXPECT_EQ(csv.rows[0][col(csv, "status")], "timeout");
  EXPECT_TRUE(std::isfinite(num(csv, 0, "e_jqc")));
}

TEST(Gain, ImplementationBMode) {
  const ExperimentConfig cfg = parse_config(R"({
    "kind": "gain",
    "model": {"kind": "ising", "sites": 4, "field": 1.0},
    "depths": [1],
    "gain": {"mode": "implementation-b", "order": 2},
    "optimizer": {"restarts": 2}
  })");
  const ParsedCsv csv = parse(csv_text(cfg, run_experiment(cfg)));
  EXPECT_EQ(csv.rows[0][col(csv, "mode")], "implementation-b:2");
  EXPECT_GE(num(csv, 0, "gain"), 1.0);
}

TEST(LambdaScan, ZeroScaleIsCircuitEnergy) {
  const ExperimentConfig cfg = parse_config(R"({
    "kind": "lambda-scan",
    "model": {"kind": "ising", "sites": 2, "field": 1.0},
    "ansatz": "hadamard",
    "depths": [0],
    "lambda_scale": [0, 1],
    "shots": [8192],
    "sampling": {"repetitions": 12}
  })");
  const ParsedCsv csv = parse(csv_text(cfg, run_experiment(cfg)));
  ASSERT_EQ(csv.rows.size(), 2U);
  EXPECT_NEAR(num(csv, 0, "e_jqc_exact"), num(csv, 0, "e_circuit"), 1e-12);
  EXPECT_NEAR(num(csv, 0, "e_circuit"), -2.0, 1e-12);
  EXPECT_LT(std::abs(num(csv, 0, "e_sampled") - num(csv, 0, "e_circuit")), 3 * num(csv, 0, "stderr") + 1e-12);
  EXPECT_NEAR(num(csv, 1, "e_jqc_exact"), -std::sqrt(5.0), 1e-8);
  EXPECT_LT(std::abs(num(csv, 1, "e_sampled") + std::sqrt(5.0)), 3 * num(csv, 1, "stderr"));
}

TEST(Reconstruct, RowsAreVariational) {
  const ExperimentConfig cfg = parse_config(R"({
    "kind": "reconstruct",
    "model": {"kind": "ising", "field": 1.0},
    "sizes": [4, 5],
    "states_per_size": 3
  })");
  const ParsedCsv csv = parse(csv_text(cfg, run_experiment(cfg)));
  ASSERT_EQ(csv.rows.size(), 6U);
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    EXPECT_GE(num(csv, r, "e_jastrow"), num(csv, r, "e_exact") - 1e-9);
    EXPECT_LE(num(csv, r, "e_jastrow"), num(csv, r, "e_reconstructed"));
    EXPECT_LE(num(csv, r, "eps"), 0.1);
  }
}

TEST(Cli, DumpAndErrors) {
  const auto cfg = temp_file("dump.json", R"({"kind": "dump-h", "model": {"kind": "ising", "sites": 2, "field": 1}})");
  std::string out;
  EXPECT_EQ(run_cli("dump-h --config " + cfg.string(), &out), 0);
  EXPECT_EQ(out, "-1 0 IX\n-1 0 XI\n-1 0 ZZ\n");
  EXPECT_EQ(run_cli("sweep --config " + cfg.string(), &out), 2);
  EXPECT_NE(out.find("config kind"), std::string::npos);
  const auto bad = temp_file("bad.json", "{\n\"kind\": \"sweep\",\n\"model\": 3\n}");
  EXPECT_EQ(run_cli("sweep --config " + bad.string(), &out), 1);
  EXPECT_NE(out.find(":3: /model"), std::string::npos) << out;
}

TEST(Cli, SweepWritesCsvAndJsonMirror) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto cfg = temp_file("sweep.json", R"({"kind": "sweep", "model": {"kind": "ising", "sites": 3, "field": [0.5, 1.5]},
    "depths": [1], "optimizer": {"restarts": 1}, "json_mirror": true})");
  const auto out = dir / "jqc_test_sweep.csv";
  ASSERT_EQ(run_cli("sweep --config " + cfg.string() + " --out " + out.string() + " --threads 2 --seed 5"), 0);
  std::ifstream in(out);
  const ParsedCsv csv = read_csv(in);
  EXPECT_EQ(csv.rows.size(), 2U);
  EXPECT_NE(csv.provenance[1].find("seed=5"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(out.string() + ".json"));
}

TEST(Config, ShippedConfigsParse) {
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(JQC_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(e.path().string())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 6);
}
