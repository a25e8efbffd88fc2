#pragma once

#include <array>
#include <string>
#include <vector>

#include "qet/chain_model.hpp"
#include "qet/state.hpp"

namespace qet {

struct EnergyProfile {
  std::string label;
  /// ⟨T_n⟩ for n = 0 .. N-1.
  std::vector<double> values;
  double total = 0.0;
};

EnergyProfile profile(const Ensemble& rho, const ChainModel& model, std::string label = {});
EnergyProfile profile(const StateVector& psi, const ChainModel& model, std::string label = {});

/// Lowest eigenpair of a single energy-density term T_n.
struct NegativityCertificate {
  int site;
  double lowest_eigenvalue;
  /// Eigenvector on the support of T_n, all other sites up.
  StateVector witness;
};

/// Diagonalizes T_n on its own support (at most 2L+1 sites). Throws
/// std::domain_error when T_n is a multiple of the identity.
NegativityCertificate negativity_certificate(const ChainModel& model, int n);

/// |⟨g|T_n O_m|g⟩ - ⟨g|T_n|g⟩⟨g|O_m|g⟩| with O_m = sigma^axis_m; sites at
/// least L+1 apart.
double correlation_witness(const ChainModel& model, const StateVector& ground, int n, int m, Axis axis);

/// Energy current across the cut between sites n and n+1:
///   J_n = i⟨[sum_{m=n-2L+1}^{n} T_m, sum_{m=n+1}^{n+2L} T_m]⟩.
/// On open chains terms beyond the ends are absent and n ranges over
/// [-1, N-1]; periodic chains need N >= 4L.
double flux(const Ensemble& rho, const ChainModel& model, int n);
double flux(const StateVector& psi, const ChainModel& model, int n);

/// d⟨H_V⟩/dt = i⟨[H, H_V]⟩ at the current instant.
double region_energy_rate(const StateVector& psi, const ChainModel& model, RegionSpec region);

struct ResidualOptions {
  /// Optimize a separate rotation per measurement branch.
  bool outcome_dependent = true;
  /// Objective evaluations allowed per start.
  int budget = 4000;
};

/// Euler angles (alpha, beta, gamma) of Rz(alpha) Ry(beta) Rz(gamma).
using EulerAngles = std::array<double, 3>;

/// Best value found for min_U Tr[U rho' U† H_{n_A}] over single-site
/// unitaries at n_A. An upper bound on what local unitaries leave behind.
struct ResidualBound {
  int site;
  double bound;
  double energy_before;  // Tr[rho' H_{n_A}], the do-nothing value
  bool outcome_dependent;
  bool converged;
  /// One angle triple, or one per ensemble branch when outcome dependent.
  std::vector<EulerAngles> rotations;
  int evaluations = 0;
};

ResidualBound residual_bound(const Ensemble& post_measurement, const ChainModel& model, int site,
                             const ResidualOptions& options = {});

}  // namespace qet
