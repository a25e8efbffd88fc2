#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "commands.hpp"
#include "qet/energy_analysis.hpp"

namespace qet::cli {

namespace {

constexpr int kSites = 8;
constexpr int kAlice = 0;
constexpr int kBob = 3;
constexpr Direction kX{1, 0, 0};
constexpr Direction kY{0, 1, 0};

struct Fixture {
  GroundState ground;
  /// The model the chain-model checks inspect; miscalibrated under the fault.
  ChainModel inspected;
};

Fixture make_fixture(const std::string& fault) {
  GroundState gs = solve_calibrated(build_ising(kSites, 1.0, 1.0));
  ChainModel inspected = gs.model;
  if (fault == "calibration") inspected = shift_local_term(inspected, 0, 0.05);
  return {std::move(gs), std::move(inspected)};
}

struct Check {
  std::string module;
  std::string name;
  std::function<VerifyResult(const Fixture&)> run;
};

VerifyResult at_most(double value, double tol, const std::string& what) {
  std::ostringstream os;
  os << what << " = " << format_double(value) << " (tol " << tol << ")";
  return {"", value <= tol, value, os.str()};
}

VerifyResult at_least(double value, double floor, const std::string& what) {
  std::ostringstream os;
  os << what << " = " << format_double(value) << " (needs > " << floor << ")";
  return {"", value > floor, value, os.str()};
}

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

std::vector<Check> registry() {
  std::vector<Check> r;

  r.push_back({"spin-ops", "pauli-product-table", [](const Fixture&) {
                 const cplx i{0, 1};
                 double dev = 0.0;
                 const Axis axes[3] = {Axis::x, Axis::y, Axis::z};
                 for (int a = 0; a < 3; ++a) {
                   const int b = (a + 1) % 3;
                   const int c = (a + 2) % 3;
                   const auto ab = PauliTerm::single(0, axes[a]) * PauliTerm::single(0, axes[b]);
                   const auto ba = PauliTerm::single(0, axes[b]) * PauliTerm::single(0, axes[a]);
                   const auto aa = PauliTerm::single(0, axes[a]) * PauliTerm::single(0, axes[a]);
                   dev = std::max(dev, max_abs(dense_matrix(ab, 1) - dense_matrix(i * PauliTerm::single(0, axes[c]), 1)));
                   dev = std::max(dev, max_abs(dense_matrix(ba, 1) + dense_matrix(i * PauliTerm::single(0, axes[c]), 1)));
                   dev = std::max(dev, max_abs(dense_matrix(aa, 1) - Eigen::MatrixXcd::Identity(2, 2)));
                 }
                 return at_most(dev, 1e-15, "max deviation");
               }});
  r.push_back({"spin-ops", "expectation-matches-dense", [](const Fixture& f) {
                 std::mt19937_64 rng(7);
                 const auto psi = StateVector::random(kSites, rng);
                 const auto& h = f.ground.model.total();
                 const cplx dense = psi.amplitudes().dot(dense_matrix(h, kSites) * psi.amplitudes());
                 return at_most(std::abs(expectation(psi, h) - dense), 1e-12, "|symbolic - dense|");
               }});
  r.push_back({"spin-ops", "hamiltonian-hermitian", [](const Fixture& f) {
                 const auto& h = f.ground.model.total();
                 const double dev = max_abs(dense_matrix(h - h.adjoint(), kSites));
                 return at_most(dev, 1e-14, "max |H - H^dagger|");
               }});

  r.push_back({"chain-model", "local-ground-expectation-zero", [](const Fixture& f) {
                 double worst = 0.0;
                 for (const auto& t : f.inspected.local_terms()) {
                   worst = std::max(worst, std::abs(expectation(f.ground.spectrum.ground, t)));
                 }
                 return at_most(worst, 1e-10, "max |<g|T_n|g>|");
               }});
  r.push_back({"chain-model", "ground-energy-zero", [](const Fixture& f) {
                 return at_most(std::abs(expectation(f.ground.spectrum.ground, f.inspected.total())), 1e-10,
                                "|<g|H|g>|");
               }});
  r.push_back({"chain-model", "terms-sum-to-total", [](const Fixture& f) {
                 OperatorSum sum;
                 for (const auto& t : f.inspected.local_terms()) sum += t;
                 return at_most(max_abs(dense_matrix(sum - f.inspected.total(), kSites)), 1e-13,
                                "max |sum T_n - H|");
               }});

  r.push_back({"ground-solver", "residual", [](const Fixture& f) {
                 return at_most(f.ground.spectrum.residual, 1e-9, "|H g - E_0 g|");
               }});
  r.push_back({"ground-solver", "gap-positive", [](const Fixture& f) {
                 return at_least(f.ground.spectrum.gap, kDegeneracyGap, "gap");
               }});
  r.push_back({"ground-solver", "krylov-matches-dense", [](const Fixture& f) {
                 SolverSettings s;
                 s.method = SolverMethod::krylov;
                 const auto k = solve_spectrum(f.ground.model, s);
                 return at_most(std::abs(k.ground_energy() - f.ground.spectrum.ground_energy()), 1e-9,
                                "|E_0 krylov - E_0 dense|");
               }});

  r.push_back({"qet-protocol", "invariant-checks", [](const Fixture& f) {
                 const auto rep = run_protocol(f.ground.model, f.ground.spectrum.ground, {kAlice, kX}, kBob, kY);
                 std::string failed;
                 for (const auto& c : rep.checks) {
                   if (!c.passed) failed += " " + c.name;
                 }
                 VerifyResult v{"", failed.empty(), static_cast<double>(rep.checks.size()), ""};
                 v.detail = failed.empty() ? std::to_string(rep.checks.size()) + " checks passed" : "failed:" + failed;
                 return v;
               }});
  r.push_back({"qet-protocol", "teleported-energy-positive", [](const Fixture& f) {
                 const auto k = protocol_constants(f.ground.spectrum.ground, f.ground.model, {kAlice, kX}, kBob, kY);
                 return at_least(k.teleported_energy(), 0.0, "E_B");
               }});
  r.push_back({"qet-protocol", "theta-minimizes-objective", [](const Fixture& f) {
                 const auto k = protocol_constants(f.ground.spectrum.ground, f.ground.model, {kAlice, kX}, kBob, kY);
                 const double best = bob_energy_objective(k.xi, k.eta, k.theta);
                 double gap = 0.0;
                 for (int j = 0; j <= 720; ++j) {
                   const double theta = -std::numbers::pi / 2 + std::numbers::pi * j / 720;
                   gap = std::max(gap, best - bob_energy_objective(k.xi, k.eta, theta));
                 }
                 return at_most(gap, 1e-12, "max grid improvement");
               }});
  r.push_back({"qet-protocol", "energy-input-equals-field", [](const Fixture&) {
                 const auto gs = solve_calibrated(build_ising(4, 1.0, 0.0));
                 const double ea = energy_input(gs.spectrum.ground, {0, kX}, gs.model);
                 return at_most(std::abs(ea - 1.0), 1e-12, "|E_A - b| at h = 0");
               }});

  r.push_back({"energy-analysis", "local-term-has-negative-eigenvalue", [](const Fixture& f) {
                 const auto cert = negativity_certificate(f.ground.model, kBob);
                 return at_most(cert.lowest_eigenvalue, -1e-6, "lowest eigenvalue of T_n");
               }});
  r.push_back({"energy-analysis", "ground-flux-zero", [](const Fixture& f) {
                 double worst = 0.0;
                 for (int n = 0; n < kSites; ++n) {
                   worst = std::max(worst, std::abs(flux(f.ground.spectrum.ground, f.ground.model, n)));
                 }
                 return at_most(worst, 1e-10, "max |J_n|");
               }});
  r.push_back({"energy-analysis", "global-bookkeeping", [](const Fixture& f) {
                 const auto rep = run_protocol(f.ground.model, f.ground.spectrum.ground, {kAlice, kX}, kBob, kY);
                 const double dev = std::abs(rep.total_energy_after - (rep.energy_input - rep.teleported_energy));
                 return at_most(dev, 1e-10, "|Tr[rho H] - (E_A - E_B)|");
               }});
  return r;
}

}  // namespace

std::vector<std::string> verify_modules() {
  return {"spin-ops", "chain-model", "ground-solver", "qet-protocol", "energy-analysis"};
}

std::vector<VerifyResult> run_verify(const VerifyOptions& options) {
  const auto modules = verify_modules();
  if (options.scope != "all" && std::find(modules.begin(), modules.end(), options.scope) == modules.end()) {
    throw ConfigError("--scope", 0, "unknown module '" + options.scope + "'");
  }
  if (!options.fault.empty() && options.fault != "calibration") {
    throw ConfigError("--inject-fault", 0, "unknown fault '" + options.fault + "'");
  }
  const Fixture fixture = make_fixture(options.fault);
  std::vector<VerifyResult> out;
  for (const auto& check : registry()) {
    if (options.scope != "all" && check.module != options.scope) continue;
    VerifyResult v = check.run(fixture);
    v.id = check.module + "/" + check.name;
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace qet::cli
