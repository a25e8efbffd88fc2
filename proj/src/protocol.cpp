#include "qet/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qet {

namespace {

void check_unit(const Direction& u, const char* what) {
  const double n = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  if (std::abs(n - 1.0) > 1e-12) throw std::invalid_argument(std::string(what) + " direction is not a unit vector");
}

InvariantCheck within(std::string name, double deviation, double tol) {
  return {std::move(name), deviation, tol, std::abs(deviation) <= tol};
}

InvariantCheck at_least(std::string name, double value, double floor) {
  return {std::move(name), value, floor, value >= floor};
}

std::vector<double> site_profile(const Ensemble& rho, const ChainModel& model) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(model.site_count()));
  for (const auto& t : model.local_terms()) out.push_back(expectation(rho, t).real());
  return out;
}

// 53 random bits mapped to [0, 1); identical on every platform.
double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

void MeasurementSetup::validate() const { check_unit(direction, "measurement"); }

void FeedbackSetup::validate() const {
  check_unit(direction, "feedback");
  if (!(theta > -std::numbers::pi / 2 && theta <= std::numbers::pi / 2)) {
    throw std::invalid_argument("feedback angle outside (-pi/2, pi/2]");
  }
}

OperatorSum projector(const MeasurementSetup& setup, int outcome) {
  setup.validate();
  if (outcome != 0 && outcome != 1) throw std::invalid_argument("measurement outcome must be 0 or 1");
  const double sign = outcome == 0 ? 0.5 : -0.5;
  return OperatorSum::identity(0.5) + cplx(sign) * pauli_vector(setup.site, setup.direction);
}

Measurement measure(const StateVector& ground, const MeasurementSetup& setup) {
  std::array<MeasurementRecord, 2> records{MeasurementRecord{0, 0.0, std::nullopt},
                                           MeasurementRecord{1, 0.0, std::nullopt}};
  std::vector<WeightedState> branches;
  for (int mu = 0; mu < 2; ++mu) {
    const StateVector projected = apply(projector(setup, mu), ground);
    const double p = projected.norm() * projected.norm();
    records[mu].probability = p;
    if (p >= 1e-14) {
      records[mu].post_state = cplx(1.0 / std::sqrt(p)) * projected;
      branches.push_back({p, *records[mu].post_state});
    }
  }
  // Renormalize weights against round-off so the ensemble invariant holds exactly.
  double total = 0.0;
  for (const auto& b : branches) total += b.weight;
  for (auto& b : branches) b.weight /= total;
  return {records, Ensemble(std::move(branches))};
}

double energy_input(const StateVector& ground, const MeasurementSetup& setup, const ChainModel& model) {
  double total = 0.0;
  for (int mu = 0; mu < 2; ++mu) {
    const StateVector projected = apply(projector(setup, mu), ground);
    total += matrix_element(projected, model.total(), projected).real();
  }
  return total;
}

OperatorSum sigma_dot(const ChainModel& model, int site, const Direction& direction) {
  check_unit(direction, "sigma_dot");
  return cplx(0.0, 1.0) * commutator(localized_energy(model, site), pauli_vector(site, direction));
}

double ProtocolConstants::teleported_energy() const {
  if (degenerate) return 0.0;
  return 0.5 * (std::hypot(xi, eta) - xi);
}

ProtocolConstants protocol_constants(const StateVector& ground, const ChainModel& model, const MeasurementSetup& alice,
                                     int bob_site, const Direction& bob_direction) {
  alice.validate();
  check_unit(bob_direction, "feedback");
  const OperatorSum sigma_b = pauli_vector(bob_site, bob_direction);
  const StateVector flipped = apply(sigma_b, ground);
  ProtocolConstants c;
  c.xi = matrix_element(flipped, model.total(), flipped).real();
  const cplx eta = expectation(ground, pauli_vector(alice.site, alice.direction) *
                                           sigma_dot(model, bob_site, bob_direction));
  c.eta = eta.real();
  c.eta_imag = eta.imag();
  if (c.xi * c.xi + c.eta * c.eta < 1e-20) {
    c.degenerate = true;
    c.theta = 0.0;
  } else {
    c.theta = 0.5 * std::atan2(-c.eta, c.xi);
  }
  return c;
}

OperatorSum feedback_unitary(const FeedbackSetup& setup, int outcome) {
  setup.validate();
  if (outcome != 0 && outcome != 1) throw std::invalid_argument("measurement outcome must be 0 or 1");
  const double sign = outcome == 0 ? 1.0 : -1.0;
  return OperatorSum::identity(std::cos(setup.theta)) +
         cplx(0.0, sign * std::sin(setup.theta)) * pauli_vector(setup.site, setup.direction);
}

StateVector feedback(const StateVector& branch, const FeedbackSetup& setup, int outcome) {
  return apply(feedback_unitary(setup, outcome), branch);
}

double bob_energy_objective(double xi, double eta, double theta) {
  return 0.5 * xi * (1.0 - std::cos(2.0 * theta)) + 0.5 * eta * std::sin(2.0 * theta);
}

bool ProtocolReport::all_checks_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const InvariantCheck& c) { return c.passed; });
}

ProtocolReport run_protocol(const ChainModel& model, const StateVector& ground, const MeasurementSetup& alice,
                            int bob_site, const Direction& bob_direction) {
  if (!model.calibrated()) throw std::invalid_argument("run_protocol needs a calibrated model");
  alice.validate();
  if (model.site(alice.site) != alice.site || model.site(bob_site) != bob_site) {
    throw std::out_of_range("protocol site outside the chain");
  }
  const int L = model.range();
  if (model.distance(alice.site, bob_site) <= 2 * L) {
    throw std::invalid_argument("Alice and Bob must be more than 2L sites apart");
  }

  ProtocolReport r{};
  r.alice_site = alice.site;
  r.bob_site = bob_site;
  r.alice_direction = alice.direction;
  r.bob_direction = bob_direction;

  // (I) measurement
  Measurement m = measure(ground, alice);
  r.measurement = m.records;
  r.energy_input = energy_input(ground, alice, model);
  const OperatorSum h_alice = localized_energy(model, alice.site);
  const OperatorSum h_bob = localized_energy(model, bob_site);
  r.alice_local_energy_before = expectation(m.average, h_alice).real();
  r.bob_local_energy_before = expectation(m.average, h_bob).real();
  r.profile_step1 = site_profile(m.average, model);

  // (II) the outcome reaches Bob instantly; nothing evolves.
  r.profile_step2 = r.profile_step1;

  // (III) conditional rotation
  r.constants = protocol_constants(ground, model, alice, bob_site, bob_direction);
  const FeedbackSetup bob{bob_site, bob_direction, r.constants.theta};
  std::vector<WeightedState> final_branches;
  for (const auto& rec : m.records) {
    if (rec.excluded()) continue;
    final_branches.push_back({0.0, feedback(*rec.post_state, bob, rec.outcome)});
  }
  {
    std::size_t k = 0;
    for (const auto& b : m.average.branches()) final_branches[k++].weight = b.weight;
  }
  const Ensemble rho(std::move(final_branches));
  r.bob_local_energy_after = expectation(rho, h_bob).real();
  r.alice_local_energy_after = expectation(rho, h_alice).real();
  r.total_energy_after = expectation(rho, model.total()).real();
  r.profile_step3 = site_profile(rho, model);
  r.teleported_energy = r.constants.teleported_energy();
  r.teleported_energy_direct = r.bob_local_energy_before - r.bob_local_energy_after;

  const auto& c = r.constants;
  const double e_a = r.energy_input;
  const double e_b = r.teleported_energy;
  double outside_alice = 0.0;
  double alice_window_sum = 0.0;
  double outside_both = 0.0;
  double bob_window_sum = 0.0;
  for (int n = 0; n < model.site_count(); ++n) {
    const bool near_a = model.distance(n, alice.site) <= L;
    const bool near_b = model.distance(n, bob_site) <= L;
    const double v1 = r.profile_step1[static_cast<std::size_t>(n)];
    const double v3 = r.profile_step3[static_cast<std::size_t>(n)];
    if (near_a) alice_window_sum += v1; else outside_alice = std::max(outside_alice, std::abs(v1));
    if (near_b) bob_window_sum += v3;
    if (!near_a && !near_b) outside_both = std::max(outside_both, std::abs(v3));
  }

  auto& checks = r.checks;
  checks.push_back(within("probability-completeness", r.measurement[0].probability + r.measurement[1].probability - 1.0,
                          1e-10));
  checks.push_back(at_least("energy-input-nonnegative", e_a, -1e-10));
  checks.push_back(within("energy-input-localized", r.alice_local_energy_before - e_a, 1e-9));
  checks.push_back(within("step1-zero-outside-alice", outside_alice, 1e-9));
  checks.push_back(within("step1-bump-equals-input", alice_window_sum - e_a, 1e-9));
  checks.push_back(within("bob-zero-before-feedback", r.bob_local_energy_before, 1e-9));
  checks.push_back(at_least("xi-nonnegative", c.xi, -1e-10));
  checks.push_back(within("eta-real", c.eta_imag, 1e-10));
  checks.push_back(within("bob-energy-closed-form", r.bob_local_energy_after - 0.5 * (c.xi - std::hypot(c.xi, c.eta)),
                          1e-9));
  checks.push_back(within("teleported-energy-closed-form", e_b - r.teleported_energy_direct, 1e-9));
  checks.push_back(within("bob-local-conservation", e_b + r.bob_local_energy_after, 1e-9));
  checks.push_back(within("step3-well-equals-output", bob_window_sum + e_b, 1e-9));
  checks.push_back(within("step3-zero-outside-windows", outside_both, 1e-9));
  checks.push_back(within("alice-energy-unchanged-by-feedback",
                          r.alice_local_energy_after - r.alice_local_energy_before, 1e-9));
  checks.push_back(within("global-bookkeeping", r.total_energy_after - (e_a - e_b), 1e-9));
  checks.push_back(at_least("total-energy-nonnegative", e_a - e_b, -1e-9));
  if (!c.degenerate && std::abs(c.eta) > 1e-12) {
    checks.push_back({"bob-energy-negative", r.bob_local_energy_after, 0.0, r.bob_local_energy_after < 0.0});
  }
  return r;
}

std::vector<ShotRecord> sample_shots(const ChainModel& model, const StateVector& ground, const MeasurementSetup& alice,
                                     const FeedbackSetup& bob, int shots, std::uint64_t seed) {
  bob.validate();
  const Measurement m = measure(ground, alice);
  const OperatorSum h_bob = localized_energy(model, bob.site);
  std::array<std::optional<ShotRecord>, 2> outcomes;
  for (const auto& rec : m.records) {
    if (rec.excluded()) continue;
    const StateVector final_state = feedback(*rec.post_state, bob, rec.outcome);
    outcomes[rec.outcome] = ShotRecord{rec.outcome, expectation(final_state, h_bob).real(),
                                       expectation(final_state, model.total()).real()};
  }
  std::mt19937_64 rng(seed);
  std::vector<ShotRecord> out;
  out.reserve(static_cast<std::size_t>(std::max(shots, 0)));
  for (int s = 0; s < shots; ++s) {
    int mu = unit_draw(rng) < m.records[0].probability ? 0 : 1;
    if (!outcomes[mu]) mu = 1 - mu;
    out.push_back(*outcomes[mu]);
  }
  return out;
}

}  // namespace qet
