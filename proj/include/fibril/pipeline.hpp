#pragma once

#include "fibril/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fibril {

// Stage directories under RunConfig::output_dir. Each stage reads the
// previous stage's files and writes only below its own directory.
inline constexpr const char* kSimulateDir = "simulate";
inline constexpr const char* kDatasetDir = "dataset";
inline constexpr const char* kTrainDir = "train";
inline constexpr const char* kDesignDir = "design";
inline constexpr const char* kReportDir = "report";

/// Progress lines go here (stderr from the CLI, nowhere in tests).
struct RunLog {
  std::ostream* out = nullptr;
  void operator()(const std::string& line) const;
};

/// manifest.json for one output directory: tool, version, command, config
/// hash, seed, the resolved config and a digest of every file below `dir`.
void write_manifest(const std::filesystem::path& dir, const RunConfig& config, const std::string& command);

void cmd_simulate(const RunConfig& config, const RunLog& log = {});
void cmd_dataset(const RunConfig& config, const RunLog& log = {});
void cmd_train(const RunConfig& config, const RunLog& log = {});
void cmd_design(const RunConfig& config, const RunLog& log = {});
/// Reads train/ and design/ under `run_dir` and writes run_dir/report.
void cmd_report(const RunConfig& config, const std::filesystem::path& run_dir, const RunLog& log = {});

/// Column "C" of a CSV file, one row per fibril.
Eigen::VectorXd read_design_csv(const std::filesystem::path& path, Eigen::Index n_fibrils);

}  // namespace fibril
