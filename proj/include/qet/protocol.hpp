#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qet/chain_model.hpp"
#include "qet/pauli.hpp"
#include "qet/state.hpp"

namespace qet {

using Direction = std::array<double, 3>;

/// Alice's projective measurement of u_A·sigma at one site.
struct MeasurementSetup {
  int site;
  Direction direction;

  /// Throws unless ‖direction‖ = 1 within 1e-12.
  void validate() const;
};

/// Bob's conditional rotation V_B(mu) = cos(theta) I + i (-1)^mu sin(theta) u_B·sigma.
struct FeedbackSetup {
  int site;
  Direction direction;
  double theta;

  /// Throws unless ‖direction‖ = 1 and theta lies in (-pi/2, pi/2].
  void validate() const;
};

struct MeasurementRecord {
  int outcome;
  double probability;
  /// Normalized P(mu)|g⟩/sqrt(p); absent when p < 1e-14.
  std::optional<StateVector> post_state;

  bool excluded() const { return !post_state.has_value(); }
};

struct Measurement {
  std::array<MeasurementRecord, 2> records;
  /// rho' as the weighted ensemble of the surviving branches.
  Ensemble average;
};

/// P_A(mu) = (I + (-1)^mu u·sigma_{n_A}) / 2.
OperatorSum projector(const MeasurementSetup& setup, int outcome);

Measurement measure(const StateVector& ground, const MeasurementSetup& setup);

/// E_A = sum_mu ⟨g|P(mu) H P(mu)|g⟩ evaluated from the projected vectors.
double energy_input(const StateVector& ground, const MeasurementSetup& setup, const ChainModel& model);

/// i[H_{n_B}, u_B·sigma_{n_B}].
OperatorSum sigma_dot(const ChainModel& model, int site, const Direction& direction);

struct ProtocolConstants {
  double xi = 0.0;
  double eta = 0.0;
  double theta = 0.0;
  /// Imaginary part left over in ⟨g|sigma_A sigma_dot_B|g⟩.
  double eta_imag = 0.0;
  /// xi^2 + eta^2 below 1e-20: theta forced to 0.
  bool degenerate = false;

  /// (sqrt(xi^2 + eta^2) - xi) / 2.
  double teleported_energy() const;
};

/// xi = ⟨g|sigma_B H sigma_B|g⟩, eta = ⟨g|sigma_A sigma_dot_B|g⟩,
/// theta = atan2(-eta, xi) / 2. Any imaginary part of eta is kept in
/// eta_imag for the caller to check rather than dropped silently.
ProtocolConstants protocol_constants(const StateVector& ground, const ChainModel& model, const MeasurementSetup& alice,
                                     int bob_site, const Direction& bob_direction);

OperatorSum feedback_unitary(const FeedbackSetup& setup, int outcome);

/// V_B(mu) applied to one branch state.
StateVector feedback(const StateVector& branch, const FeedbackSetup& setup, int outcome);

/// Tr[rho H_{n_B}] as a function of theta: (xi/2)(1 - cos 2theta) + (eta/2) sin 2theta.
double bob_energy_objective(double xi, double eta, double theta);

struct InvariantCheck {
  std::string name;
  double value;      // measured deviation, or the tested quantity for sign checks
  double tolerance;
  bool passed;
};

struct ProtocolReport {
  int alice_site;
  int bob_site;
  Direction alice_direction;
  Direction bob_direction;
  ProtocolConstants constants;
  double energy_input;            // E_A
  double teleported_energy;       // E_B from the closed form
  double teleported_energy_direct;  // Tr[rho' H_{n_B}] - Tr[rho H_{n_B}]
  double bob_local_energy_before;   // Tr[rho' H_{n_B}]
  double bob_local_energy_after;    // Tr[rho H_{n_B}]
  double alice_local_energy_before; // Tr[rho' H_{n_A}]
  double alice_local_energy_after;  // Tr[rho H_{n_A}]
  double total_energy_after;        // Tr[rho H]
  std::array<MeasurementRecord, 2> measurement;
  /// Per-site ⟨T_n⟩ after steps (I), (II) and (III).
  std::vector<double> profile_step1;
  std::vector<double> profile_step2;
  std::vector<double> profile_step3;
  std::vector<InvariantCheck> checks;

  bool all_checks_passed() const;
};

/// Steps (I)-(III) on a calibrated model. Requires the sites to be more than
/// 2L apart so Alice's excitation cannot reach H_{n_B}.
ProtocolReport run_protocol(const ChainModel& model, const StateVector& ground, const MeasurementSetup& alice,
                            int bob_site, const Direction& bob_direction);

/// One simulated shot: a sampled outcome and the resulting branch energies.
struct ShotRecord {
  int outcome;
  double bob_local_energy;
  double total_energy;
};

/// Single-shot runs drawn with a seeded generator, for demonstration only.
std::vector<ShotRecord> sample_shots(const ChainModel& model, const StateVector& ground, const MeasurementSetup& alice,
                                     const FeedbackSetup& bob, int shots, std::uint64_t seed);

}  // namespace qet
