#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"

namespace qet::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitVerifyFailed = 1,  // also any unexpected runtime error
  kExitConfig = 2,
  kExitNoConvergence = 3,
  kExitDegenerate = 4,
  kExitInvariant = 5,
};

inline constexpr int kSchemaVersion = 1;

struct CommandResult {
  int exit_code = kExitOk;
  nlohmann::ordered_json report;
  std::string profile_csv;  // protocol only
  std::string sweep_csv;    // sweep only
  std::string summary;      // human-readable lines for stdout
};

CommandResult cmd_ground(const RunConfig& config);
CommandResult cmd_protocol(const RunConfig& config);
CommandResult cmd_sweep(const RunConfig& config, int jobs);

struct VerifyOptions {
  /// "all" or one module name.
  std::string scope = "all";
  /// Fault to inject, for exercising the failure path: "" or "calibration".
  std::string fault;
};

struct VerifyResult {
  std::string id;  // module/name
  bool passed;
  double value;
  std::string detail;
};

std::vector<std::string> verify_modules();
std::vector<VerifyResult> run_verify(const VerifyOptions& options);
CommandResult cmd_verify(const VerifyOptions& options);

/// %.17g, so values round-trip exactly.
std::string format_double(double v);

/// Writes report.json and/or the CSV files into dir according to format.
void write_outputs(const CommandResult& result, const std::filesystem::path& dir, OutputFormat format);

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace qet::cli
