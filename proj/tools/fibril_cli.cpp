#include "fibril/config.hpp"
#include "fibril/error.hpp"
#include "fibril/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> output;
  std::optional<std::string> run_dir;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config, "run configuration (JSON)")->required();
  cmd->add_option("--seed", o.seed, "override the master seed");
  cmd->add_option("--threads", o.threads, "cap on worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("-o,--output", o.output, "override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Functionally graded fibril array simulator, surrogate trainer and inverse designer", "fibril"};
  app.set_version_flag("--version", std::string("fibril ") + fibril::kToolVersion);
  app.require_subcommand(1);
  Options o;
  auto* simulate = app.add_subcommand("simulate", "detachment trace of one design");
  auto* dataset = app.add_subcommand("dataset", "generate and label random designs");
  auto* train = app.add_subcommand("train", "select and fit surrogate models");
  auto* design = app.add_subcommand("design", "inverse design with simulator feedback");
  auto* report = app.add_subcommand("report", "figure data from a finished run");
  for (auto* cmd : {simulate, dataset, train, design, report}) add_common(cmd, o);
  report->add_option("--run-dir", o.run_dir, "run directory to report on (default: the output directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const fibril::RunLog log{&std::cerr};
  try {
    fibril::RunConfig config = fibril::load_config(o.config);
    if (o.seed) config.seed = *o.seed;
    if (o.threads) config.threads = *o.threads;
    if (o.output) config.output_dir = *o.output;
    fibril::validate(config);

    if (simulate->parsed()) fibril::cmd_simulate(config, log);
    if (dataset->parsed()) fibril::cmd_dataset(config, log);
    if (train->parsed()) fibril::cmd_train(config, log);
    if (design->parsed()) fibril::cmd_design(config, log);
    if (report->parsed()) fibril::cmd_report(config, o.run_dir ? *o.run_dir : config.output_dir, log);
  } catch (const fibril::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const fibril::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return 0;
}
