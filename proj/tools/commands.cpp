#include "commands.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include "qet/energy_analysis.hpp"

namespace qet::cli {

using nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

ordered_json header(const char* command, const RunConfig& c) {
  ordered_json j{{"schema_version", kSchemaVersion}, {"command", command}, {"config", to_json(c)}};
  if (!c.warnings.empty()) j["warnings"] = c.warnings;
  return j;
}

ordered_json spectrum_json(const GroundState& gs, SolverMethod method) {
  const SpectrumSlice& s = gs.spectrum;
  ordered_json j{{"method", method == SolverMethod::dense ? "dense" : "krylov"},
                 {"raw_ground_energy", gs.raw_ground_energy},
                 {"ground_energy", s.ground_energy()},
                 {"gap", s.gap},
                 {"residual", s.residual}};
  if (s.spectral_width) j["spectral_width"] = *s.spectral_width;
  if (method == SolverMethod::krylov) j["iterations"] = s.iterations;
  const std::size_t shown = std::min<std::size_t>(s.eigenvalues.size(), 8);
  j["lowest_levels"] = std::vector<double>(s.eigenvalues.begin(), s.eigenvalues.begin() + static_cast<long>(shown));
  j["shifts"] = gs.model.shifts();
  return j;
}

GroundState solve(const RunConfig& c) {
  return solve_calibrated(build_model(c.model), solver_settings(c.solver), DegeneracyPolicy::refuse);
}

const ProtocolConfig& protocol_section(const RunConfig& c) {
  if (!c.protocol) throw ConfigError(c.source, 0, "missing [protocol] section");
  return *c.protocol;
}

void check_separation(const ChainModel& m, const RunConfig& c, int alice, int bob) {
  if (m.distance(alice, bob) <= 2 * m.range()) {
    throw ConfigError(c.source, 0,
                      "Alice (site " + std::to_string(alice) + ") and Bob (site " + std::to_string(bob) +
                          ") must be more than 2L = " + std::to_string(2 * m.range()) + " sites apart");
  }
}

template <class F>
void parallel_for(int count, int jobs, F&& body) {
  jobs = std::max(1, std::min(jobs, count));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  // Lowest failing grid index wins so the reported error does not depend on scheduling.
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct SweepRow {
  int distance;
  std::optional<double> field;
  std::optional<double> coupling;
  std::optional<double> phi;
  Direction bob_direction;
  int bob_site;
  ProtocolConstants constants;
  double energy_input;
};

std::string optional_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

CommandResult cmd_ground(const RunConfig& c) {
  const GroundState gs = solve(c);
  CommandResult r;
  r.report = header("ground", c);
  r.report["spectrum"] = spectrum_json(gs, c.solver.method);
  std::ostringstream os;
  os << "E_0 = " << format_double(gs.spectrum.ground_energy()) << " (calibrated; raw "
     << format_double(gs.raw_ground_energy) << ")\n";
  os << "gap = " << format_double(gs.spectrum.gap) << "\n";
  if (gs.spectrum.spectral_width) os << "spectral width = " << format_double(*gs.spectrum.spectral_width) << "\n";
  os << "residual = " << format_double(gs.spectrum.residual) << "\n";
  r.summary = os.str();
  return r;
}

CommandResult cmd_protocol(const RunConfig& c) {
  const ProtocolConfig& p = protocol_section(c);
  const GroundState gs = solve(c);
  check_separation(gs.model, c, p.alice_site, p.bob_site);
  const MeasurementSetup alice{p.alice_site, p.alice_direction};
  const ProtocolReport rep = run_protocol(gs.model, gs.spectrum.ground, alice, p.bob_site, p.bob_direction);

  CommandResult r;
  r.report = header("protocol", c);
  r.report["spectrum"] = spectrum_json(gs, c.solver.method);
  const auto& k = rep.constants;
  ordered_json probs = ordered_json::array();
  for (const auto& m : rep.measurement) {
    probs.push_back({{"outcome", m.outcome}, {"probability", m.probability}, {"excluded", m.excluded()}});
  }
  r.report["protocol"] = {
      {"alice_site", rep.alice_site},
      {"alice_direction", rep.alice_direction},
      {"bob_site", rep.bob_site},
      {"bob_direction", rep.bob_direction},
      {"xi", k.xi},
      {"eta", k.eta},
      {"eta_imag", k.eta_imag},
      {"theta", k.theta},
      {"degenerate", k.degenerate},
      {"E_A", rep.energy_input},
      {"E_B", rep.teleported_energy},
      {"E_B_direct", rep.teleported_energy_direct},
      {"bob_local_energy_before", rep.bob_local_energy_before},
      {"bob_local_energy_after", rep.bob_local_energy_after},
      {"alice_local_energy_before", rep.alice_local_energy_before},
      {"alice_local_energy_after", rep.alice_local_energy_after},
      {"total_energy_after", rep.total_energy_after},
      {"measurement", probs},
  };
  r.report["profiles"] = {{"step1", rep.profile_step1}, {"step2", rep.profile_step2}, {"step3", rep.profile_step3}};
  ordered_json checks = ordered_json::array();
  std::vector<std::string> failed;
  for (const auto& ch : rep.checks) {
    checks.push_back({{"name", ch.name}, {"value", ch.value}, {"tolerance", ch.tolerance}, {"passed", ch.passed}});
    if (!ch.passed) failed.push_back(ch.name);
  }
  r.report["checks"] = checks;
  r.report["all_checks_passed"] = failed.empty();

  if (p.shots > 0) {
    const FeedbackSetup bob{p.bob_site, p.bob_direction, k.theta};
    const auto shots = sample_shots(gs.model, gs.spectrum.ground, alice, bob, p.shots, c.seed);
    std::array<int, 2> counts{0, 0};
    double bob_sum = 0.0;
    double total_sum = 0.0;
    for (const auto& s : shots) {
      ++counts[static_cast<std::size_t>(s.outcome)];
      bob_sum += s.bob_local_energy;
      total_sum += s.total_energy;
    }
    r.report["shots"] = {{"seed", c.seed},
                         {"count", p.shots},
                         {"outcome_counts", counts},
                         {"mean_bob_local_energy", bob_sum / p.shots},
                         {"mean_total_energy", total_sum / p.shots}};
  }

  std::ostringstream csv;
  csv << "site,t_expect_step1,t_expect_step3\n";
  for (std::size_t n = 0; n < rep.profile_step1.size(); ++n) {
    csv << n << ',' << format_double(rep.profile_step1[n]) << ',' << format_double(rep.profile_step3[n]) << '\n';
  }
  r.profile_csv = csv.str();

  std::ostringstream os;
  os << "xi = " << format_double(k.xi) << "\neta = " << format_double(k.eta) << "\ntheta = " << format_double(k.theta)
     << "\nE_A = " << format_double(rep.energy_input) << "\nE_B = " << format_double(rep.teleported_energy) << "\n";
  if (failed.empty()) {
    os << "all " << rep.checks.size() << " invariant checks passed\n";
  } else {
    r.exit_code = kExitInvariant;
    for (const auto& f : failed) os << "FAILED invariant: " << f << "\n";
  }
  r.summary = os.str();
  return r;
}

CommandResult cmd_sweep(const RunConfig& c, int jobs) {
  if (!c.sweep) throw ConfigError(c.source, 0, "missing [sweep] section");
  const SweepConfig& s = *c.sweep;
  const ProtocolConfig& p = protocol_section(c);
  const MeasurementSetup alice{p.alice_site, p.alice_direction};

  std::vector<SweepRow> rows;
  if (s.axis == SweepAxis::coupling_grid) {
    rows.resize(s.couplings.size());
    const ChainModel probe = build_model(c.model);
    check_separation(probe, c, p.alice_site, p.bob_site);
    parallel_for(static_cast<int>(rows.size()), jobs, [&](int i) {
      ModelConfig m = c.model;
      m.coupling = s.couplings[static_cast<std::size_t>(i)];
      const GroundState gs = solve_calibrated(build_model(m), solver_settings(c.solver));
      SweepRow& row = rows[static_cast<std::size_t>(i)];
      row = {gs.model.distance(p.alice_site, p.bob_site), m.field, m.coupling, std::nullopt, p.bob_direction,
             p.bob_site, protocol_constants(gs.spectrum.ground, gs.model, alice, p.bob_site, p.bob_direction),
             energy_input(gs.spectrum.ground, alice, gs.model)};
    });
  } else {
    const GroundState gs = solve(c);
    const double ea = energy_input(gs.spectrum.ground, alice, gs.model);
    std::optional<double> field;
    std::optional<double> coupling;
    if (c.model.kind == "ising") {
      field = c.model.field;
      coupling = c.model.coupling;
    }
    if (s.axis == SweepAxis::distance) {
      for (int d : s.distances) {
        const int bob = gs.model.site(p.alice_site + d);
        if (bob < 0) throw ConfigError(c.source, 0, "distance " + std::to_string(d) + " runs past the open end");
        check_separation(gs.model, c, p.alice_site, bob);
        rows.push_back({gs.model.distance(p.alice_site, bob), field, coupling, std::nullopt, p.bob_direction, bob, {}, ea});
      }
    } else {
      check_separation(gs.model, c, p.alice_site, p.bob_site);
      for (int k = 0; k < s.angle_points; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / s.angle_points;
        Direction u{};
        for (int a = 0; a < 3; ++a) u[a] = std::cos(phi) * s.plane_first[a] + std::sin(phi) * s.plane_second[a];
        rows.push_back({gs.model.distance(p.alice_site, p.bob_site), field, coupling, phi, u, p.bob_site, {}, ea});
      }
    }
    parallel_for(static_cast<int>(rows.size()), jobs, [&](int i) {
      SweepRow& row = rows[static_cast<std::size_t>(i)];
      row.constants = protocol_constants(gs.spectrum.ground, gs.model, alice, row.bob_site, row.bob_direction);
    });
  }

  CommandResult r;
  r.report = header("sweep", c);
  ordered_json out = ordered_json::array();
  std::ostringstream csv;
  csv << "index,distance,b,h,phi,xi,eta,theta,E_A,E_B\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const SweepRow& row = rows[i];
    const auto& k = row.constants;
    ordered_json j{{"index", i}, {"distance", row.distance}, {"bob_site", row.bob_site}};
    if (row.field) j["b"] = *row.field;
    if (row.coupling) j["h"] = *row.coupling;
    if (row.phi) j["phi"] = *row.phi;
    j["bob_direction"] = row.bob_direction;
    j["xi"] = k.xi;
    j["eta"] = k.eta;
    j["eta_imag"] = k.eta_imag;
    j["theta"] = k.theta;
    j["E_A"] = row.energy_input;
    j["E_B"] = k.teleported_energy();
    out.push_back(j);
    csv << i << ',' << row.distance << ',' << optional_cell(row.field) << ',' << optional_cell(row.coupling) << ','
        << optional_cell(row.phi) << ',' << format_double(k.xi) << ',' << format_double(k.eta) << ','
        << format_double(k.theta) << ',' << format_double(row.energy_input) << ','
        << format_double(k.teleported_energy()) << '\n';
  }
  r.report["rows"] = out;
  r.sweep_csv = csv.str();
  r.summary = std::to_string(rows.size()) + " sweep points (" + std::string(sweep_axis_name(s.axis)) + ")\n";
  return r;
}

CommandResult cmd_verify(const VerifyOptions& options) {
  const auto results = run_verify(options);
  CommandResult r;
  r.report = {{"schema_version", kSchemaVersion}, {"command", "verify"}, {"scope", options.scope}};
  if (!options.fault.empty()) r.report["injected_fault"] = options.fault;
  ordered_json list = ordered_json::array();
  std::vector<std::string> failed;
  std::ostringstream os;
  for (const auto& v : results) {
    list.push_back({{"id", v.id}, {"passed", v.passed}, {"value", v.value}, {"detail", v.detail}});
    os << (v.passed ? "PASS " : "FAIL ") << v.id << "  " << v.detail << "\n";
    if (!v.passed) failed.push_back(v.id);
  }
  r.report["results"] = list;
  r.report["failed"] = failed;
  r.report["passed"] = failed.empty();
  os << results.size() - failed.size() << "/" << results.size() << " invariants passed\n";
  if (!failed.empty()) {
    os << "failed:";
    for (const auto& id : failed) os << ' ' << id;
    os << '\n';
  }
  r.summary = os.str();
  if (!failed.empty()) r.exit_code = kExitVerifyFailed;
  return r;
}

void write_outputs(const CommandResult& result, const std::filesystem::path& dir, OutputFormat format) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    f << body;
  };
  if (format != OutputFormat::csv) write("report.json", result.report.dump(2) + "\n");
  if (format != OutputFormat::json) {
    if (!result.profile_csv.empty()) write("profile.csv", result.profile_csv);
    if (!result.sweep_csv.empty()) write("sweep.csv", result.sweep_csv);
  }
}

}  // namespace qet::cli
