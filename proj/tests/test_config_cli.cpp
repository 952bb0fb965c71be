#include "doctest.h"

#include "fibril/config.hpp"
#include "fibril/error.hpp"
#include "fibril/io.hpp"
#include "fibril/pipeline.hpp"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace fibril;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("fibril_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(FIBRIL_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string tiny_config(const fs::path& out) {
  return R"({
  "seed": 11,
  "output_dir": ")" + out.generic_string() + R"(",
  "layout": { "kind": "circle", "size": 7.5, "spacing": 3 },
  "dataset": { "n_samples": 150, "probe_batch": 50 },
  "train": { "grid_layers": [1, 2], "grid_widths": [8], "cv_folds": 3, "cv_epochs": 5,
             "mlp": { "epochs": 30 }, "rbf_centers": 20, "rbf_widths": [1, 2],
             "reference_mlps": [[1, 8], [2, 8]] },
  "design": { "n_starts": 4, "max_iters": 50, "feedback_rounds": 1, "feedback_k": 2, "top_profiles": 3 }
})";
}

}  // namespace

TEST_CASE("config: defaults and overrides") {
  const RunConfig c = parse_config("{}");
  CHECK(c.seed == 2024);
  CHECK(c.layout.kind == LayoutKind::circle);
  CHECK(c.dataset.n_samples == 2500);
  CHECK(c.train.cv_folds == 5);
  CHECK(c.design.n_starts == 100);
  CHECK(mean_compliance(c) == doctest::Approx(20.0 / 3.0).epsilon(1e-15));

  const RunConfig d = parse_config(R"({"seed": 3, "layout": {"kind": "square", "size": 9},
                                       "train": {"mlp": {"optimizer": "sgd"}}, "design": {"retrain": "warm"}})");
  CHECK(d.seed == 3);
  CHECK(d.layout.kind == LayoutKind::square);
  CHECK(build_layout(d).size() == 49);
  CHECK(d.train.mlp.optimizer == Optimizer::sgd);
  CHECK(d.design.retrain == RetrainMode::warm);
}

TEST_CASE("config: unknown keys and bad values are rejected") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"sed": 1})"), doctest::Contains("unknown key 'sed'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"train": {"mlp": {"epoch": 3}}})"), doctest::Contains("train.mlp"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"seed": "x"})"), doctest::Contains("seed"), ConfigError);
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config("[]"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"threads": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"layout": {"spacing": 1.5}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"layout": {"kind": "hexagon"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"dataset": {"test_fraction": 1.0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"dataset": {"style": "noise"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"dataset": {"mean_compliance": 5, "bounds": [6, 9]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"train": {"cv_folds": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"design": {"n_starts": 0}})"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("config: hash and resolved dump") {
  const RunConfig a = parse_config(R"({"seed": 5})");
  RunConfig b = a;
  b.output_dir = "elsewhere";
  b.threads = 4;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  RunConfig c = a;
  c.seed = 6;
  CHECK(config_hash(a) != config_hash(c));

  // The resolved dump parses back to the same configuration.
  const RunConfig again = parse_config(config_to_json(a));
  CHECK(config_hash(again) == config_hash(a));
  CHECK(config_to_json(again) == config_to_json(a));
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("cli: exit codes") {
  const auto dir = scratch("codes");
  const auto log = dir / "log.txt";
  CHECK(run_cli("simulate --config " + (dir / "missing.json").string(), log) == 2);
  CHECK(read_text_file(log).find("Usage") != std::string::npos);
  CHECK(run_cli("", log) == 2);
  CHECK(run_cli("explode --config x.json", log) == 2);
  CHECK(run_cli("--help", log) == 0);

  write_text_file(dir / "bad.json", R"({"layout": {"sizee": 3}})");
  CHECK(run_cli("simulate --config " + (dir / "bad.json").string(), log) == 2);
  CHECK(read_text_file(log).find("unknown key 'sizee'") != std::string::npos);

  write_text_file(dir / "one.json", R"({"layout": {"size": 1}})");
  CHECK(run_cli("simulate --config " + (dir / "one.json").string() + " --output " + (dir / "one").string(), log) == 0);
  const auto summary = nlohmann::json::parse(read_text_file(dir / "one" / "simulate" / "summary.json"));
  CHECK(summary["strength"].get<double>() == 1.0);
  const auto manifest = nlohmann::json::parse(read_text_file(dir / "one" / "simulate" / "manifest.json"));
  CHECK(manifest["tool_version"] == kToolVersion);
  CHECK(manifest["config_hash"].get<std::string>().size() == 16);
  CHECK(manifest["seed"] == 2024);
  CHECK(manifest["files"].size() == 4);

  CHECK(run_cli("train --config " + (dir / "one.json").string() + " --output " + (dir / "one").string(), log) == 1);
  CHECK(read_text_file(log).find("run `fibril dataset` first") != std::string::npos);

  // A design file with the wrong row count is a domain error.
  write_text_file(dir / "design.csv", "C\n1\n2\n");
  write_text_file(dir / "sized.json",
                  R"({"layout": {"size": 1}, "simulate": {"design_csv": "design.csv"}, "output_dir": ")" +
                      (dir / "sized").generic_string() + "\"}");
  CHECK(run_cli("simulate --config " + (dir / "sized.json").string(), log) == 1);
}

TEST_CASE("cli: tiny pipeline end to end, deterministic across reruns and threads") {
  const auto dir = scratch("pipeline");
  const auto a = dir / "a", b = dir / "b";
  write_text_file(dir / "tiny.json", tiny_config(a));
  const auto log = dir / "log.txt";
  const std::string cfg = " --config " + (dir / "tiny.json").string();
  for (const char* stage : {"dataset", "train", "design", "report"}) {
    INFO(stage);
    REQUIRE(run_cli(std::string(stage) + cfg, log) == 0);
    REQUIRE(run_cli(std::string(stage) + cfg + " --threads 2 --output " + b.string(), log) == 0);
  }
  CHECK(run_cli("report" + cfg + " --run-dir " + a.string() + " --output " + (dir / "c").string(), log) == 0);

  for (const char* stage : {"dataset", "train", "design", "report"}) CHECK(fs::exists(a / stage / "manifest.json"));
  CHECK(fs::exists(a / "design" / "dataset" / "manifest.json"));

  // Byte-identical outputs regardless of the worker count.
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    INFO(rel.string());
    REQUIRE(fs::exists(b / rel));
    CHECK(read_text_file(e.path()) == read_text_file(b / rel));
  }

  const auto metrics = nlohmann::json::parse(read_text_file(a / "train" / "metrics.json"));
  const std::string scatter = read_text_file(a / "report" / "scatter.csv");
  const auto rows = std::count(scatter.begin(), scatter.end(), '\n') - 1;
  CHECK(rows == metrics["n_test"].get<long>());
  CHECK(rows == 30);
  const std::string comparison = read_text_file(a / "train" / "model_comparison.csv");
  CHECK(comparison.rfind("model,parameters,train_mse,test_mse,train_r2,test_r2,cv_mse,selected\n", 0) == 0);
  for (const char* m : {"linear,", "polynomial3,", "rbf,", "mlp1x8,", "mlp2x8,"}) CHECK(comparison.find(m) != std::string::npos);
  CHECK(read_text_file(a / "report" / "ranked_strength.csv").rfind("rank,predicted,verified\n", 0) == 0);
  CHECK(fs::exists(a / "report" / "profiles" / "rank_01.csv"));
  CHECK(fs::exists(a / "design" / "designs" / "rank_03.csv"));
  const auto report = nlohmann::json::parse(read_text_file(a / "report" / "report.json"));
  CHECK(report["statement"].get<std::string>().find("top-ranked design") == 0);

  // The design stage appended feedback samples without touching its input.
  const auto original = nlohmann::json::parse(read_text_file(a / "dataset" / "dataset.json"));
  const auto augmented = nlohmann::json::parse(read_text_file(a / "design" / "dataset" / "dataset.json"));
  CHECK(original["n_samples"] == 150);
  CHECK(augmented["n_samples"].get<int>() > 150);
  CHECK(augmented["n_samples"].get<int>() <= 152);
}
