#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qadv/pipeline.hpp"

using namespace qadv;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("qadv_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

json small_config(const fs::path& out) {
  return json{{"synthetic", {{"normals", 4000}, {"attacks", 800}, {"features", 10}, {"latent", 4}, {"seed", 5}}},
              {"split", {{"train_normals", 1500}, {"validation_normals", 300}, {"validation_attacks", 100}}},
              {"seeds", {1, 2}},
              {"output_dir", out.string()}};
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(QADV_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  auto c = parse_config(json{{"synthetic", json::object()}, {"errors", {{"delta", 0.2}}}, {"detector", "recon"}});
  EXPECT_DOUBLE_EQ(c.qpca.delta, 0.2);
  EXPECT_DOUBLE_EQ(c.qpca.p, 0.7);
  EXPECT_EQ(c.detector, DetectorVariant::recon);
  EXPECT_EQ(c.alpha_grid.size(), 6u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config(json{{"synthetic", json::object()}, {"bogus", 1}}), Error);
  EXPECT_THROW(parse_config(json{{"errors", {{"epsilonn", 1}}}}), Error);
  EXPECT_THROW(parse_config(json{{"detector", "magic"}}), Error);
  auto neither = parse_config(json::object());
  EXPECT_THROW(neither.validate(), Error);
  auto missing = parse_config(json{{"dataset", {{"path", "/nonexistent.csv"}}}});
  try {
    missing.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::io);
  }
}

TEST(Config, RelativeDatasetPath) {
  auto c = parse_config(json{{"dataset", {{"path", "data.csv"}}}}, "/tmp/somewhere");
  EXPECT_EQ(*c.dataset_path, "/tmp/somewhere/data.csv");
}

TEST(Fit, AlphaTableShapeAndReproducibility) {
  fs::path a = scratch("fit_a"), b = scratch("fit_b");
  auto cfg_a = parse_config(small_config(a));
  cmd_fit(cfg_a);
  auto table = slurp(a / "metrics_alpha.csv");
  EXPECT_EQ(line_count(table), 7u);
  EXPECT_EQ(table.rfind("alpha_pct,recall_c,recall_q,", 0), 0u);
  EXPECT_TRUE(fs::exists(a / "model_exact.txt"));
  EXPECT_TRUE(fs::exists(a / "model_quantum_major_seed2.txt"));
  EXPECT_EQ(line_count(slurp(a / "metrics_per_seed.csv")), 13u);

  cmd_fit(cfg_a);  // same directory, same bytes
  EXPECT_EQ(slurp(a / "metrics_alpha.csv"), table);
  auto cfg_b = parse_config(small_config(b));
  cmd_fit(cfg_b);
  EXPECT_EQ(slurp(b / "metrics_alpha.csv"), table);
  EXPECT_EQ(slurp(b / "model_quantum_major_seed1.txt"), slurp(a / "model_quantum_major_seed1.txt"));

  auto manifest = json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(manifest["status"], "completed");
  for (const auto& f : manifest["files"])
    EXPECT_EQ(f["sha256"].get<std::string>(), sha256_file(a / f["path"].get<std::string>()));
}

TEST(Fit, ReconDeltaTable) {
  fs::path out = scratch("fit_recon");
  auto j = small_config(out);
  j["detector"] = "recon";
  cmd_fit(parse_config(j));
  auto table = slurp(out / "metrics_delta.csv");
  EXPECT_EQ(line_count(table), 5u);
  EXPECT_EQ(table.rfind("delta,recall_q,recall_c,", 0), 0u);
}

TEST(Crossover, NoAdvantageMarker) {
  fs::path out = scratch("crossover");
  auto j = small_config(out);
  j["errors"] = {{"delta", 1e-6}};
  j["crossover"] = {{"n_min", 1e3}, {"n_max", 1e4}, {"d_grid", {10}}};
  cmd_crossover(parse_config(j));
  EXPECT_NE(slurp(out / "crossover_frontier.csv").find("no advantage"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "params.json"));
  EXPECT_GT(line_count(slurp(out / "crossover_grid.csv")), 2u);
}

TEST(Tomography, BasisVectorStudy) {
  fs::path out = scratch("tomo");
  json j{{"tomography", {{"vector", "basis"}, {"dim", 55}, {"delta_grid", {0.03}}, {"budgets", {500}},
                         {"repetitions", 5}}},
         {"output_dir", out.string()}};
  cmd_tomography_study(parse_config(j));
  auto samples = slurp(out / "tomography_samples.csv");
  const auto n = tomography_samples(55, 0.03, NormMode::l2);
  EXPECT_NEAR(static_cast<double>(n), 8.8e6, 0.01 * 8.8e6);
  EXPECT_NE(samples.find("theoretical_samples=" + std::to_string(n)), std::string::npos) << samples;
  std::istringstream errs(slurp(out / "tomography_errors.csv"));
  std::string line;
  std::getline(errs, line);
  std::size_t rows = 0;
  while (std::getline(errs, line)) {
    ++rows;
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "0.00000000");
  }
  EXPECT_EQ(rows, 5u);
}

TEST(Resources, ReportFiles) {
  fs::path out = scratch("resources");
  cmd_resources(parse_config(json{{"output_dir", out.string()}}));
  auto opt = slurp(out / "resources_optimistic.txt");
  EXPECT_NE(opt.find("address_width_bits=34"), std::string::npos);
  EXPECT_NE(opt.find("query_latency_ms=1.07"), std::string::npos);
  EXPECT_NE(slurp(out / "resources_realistic.txt").find("physical_qubits=7.31e+16"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  fs::path dir = scratch("cli");
  {
    std::ofstream cfg(dir / "bad_word.json");
    json qram{{"preset", "optimistic"}, {"word_bits", 8}};
    json res{{"configs", json::array({qram})}};
    cfg << json{{"resources", res}, {"output_dir", (dir / "out").string()}}.dump();
  }
  EXPECT_EQ(run_cli("resources -c " + (dir / "bad_word.json").string()), exit_code(ErrorCategory::unsupported));
  auto manifest = json::parse(slurp(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest["status"], "failed");
  {
    std::ofstream cfg(dir / "ok.json");
    cfg << json{{"output_dir", (dir / "ok").string()}}.dump();
  }
  EXPECT_EQ(run_cli("resources -c " + (dir / "ok.json").string()), 0);
  {
    std::ofstream cfg(dir / "unknown.json");
    cfg << json{{"nonsense", true}}.dump();
  }
  EXPECT_EQ(run_cli("fit -c " + (dir / "unknown.json").string()), exit_code(ErrorCategory::config));
  EXPECT_NE(run_cli("fit -c " + (dir / "missing.json").string()), 0);
}
