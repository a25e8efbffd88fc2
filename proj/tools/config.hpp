#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qet/chain_model.hpp"
#include "qet/ground_solver.hpp"
#include "qet/protocol.hpp"

namespace qet::cli {

/// Parse failure; line 0 means the problem is not tied to a single line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

/// One custom-model product, sites given as offsets from n.
struct TermTemplate {
  double coefficient;
  std::vector<std::pair<int, Axis>> factors;
};

struct ModelConfig {
  std::string kind = "ising";  // ising | custom
  int site_count = 0;
  double field = 1.0;     // b
  double coupling = 1.0;  // h
  Boundary boundary = Boundary::periodic;
  int range = 1;
  std::vector<TermTemplate> terms;
};

struct ProtocolConfig {
  int alice_site = 0;
  Direction alice_direction{1, 0, 0};
  int bob_site = 0;
  Direction bob_direction{0, 1, 0};
  int shots = 0;
};

struct SolverConfig {
  SolverMethod method = SolverMethod::dense;
  double tol = 1e-10;
  int max_iter = 400;
};

enum class OutputFormat { json, csv, both };

struct OutputConfig {
  std::string dir = ".";
  OutputFormat format = OutputFormat::both;
};

enum class SweepAxis { distance, angle_grid, coupling_grid };

struct SweepConfig {
  SweepAxis axis = SweepAxis::distance;
  std::vector<int> distances;
  std::vector<double> couplings;
  int angle_points = 0;
  /// Great circle for the angle grid: u_B(phi) = cos(phi) e1 + sin(phi) e2.
  Direction plane_first{1, 0, 0};
  Direction plane_second{0, 1, 0};
};

struct RunConfig {
  std::string source;
  ModelConfig model;
  std::optional<ProtocolConfig> protocol;
  SolverConfig solver;
  OutputConfig output;
  std::optional<SweepConfig> sweep;
  std::uint64_t seed = 20240601;
  /// Non-fatal notes collected while loading, e.g. renormalized directions.
  std::vector<std::string> warnings;
};

RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

std::string_view format_name(OutputFormat f);
OutputFormat parse_format(std::string_view s);
std::string_view sweep_axis_name(SweepAxis a);
SweepAxis parse_sweep_axis(std::string_view s);

/// Builds the uncalibrated chain the config describes.
ChainModel build_model(const ModelConfig& m);
SolverSettings solver_settings(const SolverConfig& s);

/// Resolved configuration, embedded in every report.
nlohmann::ordered_json to_json(const RunConfig& c);

}  // namespace qet::cli
