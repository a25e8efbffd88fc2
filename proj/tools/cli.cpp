#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

namespace qet::cli {

namespace {

struct GlobalFlags {
  std::string config;
  std::string out;
  std::string format;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

RunConfig resolve(const GlobalFlags& g) {
  RunConfig c = load_config(g.config);
  if (!g.out.empty()) c.output.dir = g.out;
  if (!g.format.empty()) c.output.format = parse_format(g.format);
  if (g.seed) c.seed = *g.seed;
  return c;
}

int finish(const CommandResult& r, const std::filesystem::path& dir, OutputFormat format, std::ostream& out) {
  write_outputs(r, dir, format);
  out << r.summary;
  return r.exit_code;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quantum energy teleportation on spin chains"};
  app.require_subcommand(1);
  GlobalFlags g;
  VerifyOptions verify;

  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", g.config, "configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", g.out, "output directory (overrides [output] dir)");
    sub->add_option("--format", g.format, "json, csv or both")->check(CLI::IsMember({"json", "csv", "both"}));
    sub->add_option("--seed", g.seed, "seed for sampled shots");
    sub->add_option("--jobs", g.jobs, "worker threads for sweeps")->check(CLI::PositiveNumber);
  };
  auto* ground = app.add_subcommand("ground", "solve and calibrate the ground state");
  add_run_flags(ground);
  auto* protocol = app.add_subcommand("protocol", "run the three-step protocol once");
  add_run_flags(protocol);
  auto* sweep = app.add_subcommand("sweep", "scan distance, Bob's direction or the coupling");
  add_run_flags(sweep);
  auto* verify_cmd = app.add_subcommand("verify", "run the built-in invariant checks");
  verify_cmd->add_option("--scope", verify.scope, "all or one module");
  verify_cmd->add_option("--inject-fault", verify.fault, "deliberately break an invariant (calibration)");
  verify_cmd->add_option("--out", g.out, "write report.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (verify_cmd->parsed()) {
      const CommandResult r = cmd_verify(verify);
      if (!g.out.empty()) write_outputs(r, g.out, OutputFormat::json);
      out << r.summary;
      return r.exit_code;
    }
    const RunConfig c = resolve(g);
    for (const auto& w : c.warnings) err << "warning: " << w << "\n";
    CommandResult r;
    if (ground->parsed()) r = cmd_ground(c);
    else if (protocol->parsed()) r = cmd_protocol(c);
    else r = cmd_sweep(c, g.jobs);
    const int code = finish(r, c.output.dir, c.output.format, out);
    if (code != kExitOk) err << "error: invariant check failed\n";
    return code;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const DegenerateGroundError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerifyFailed;
  }
}

}  // namespace qet::cli
