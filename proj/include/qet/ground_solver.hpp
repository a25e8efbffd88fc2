#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qet/chain_model.hpp"
#include "qet/state.hpp"

namespace qet {

/// Gaps below this are treated as a degenerate ground state.
inline constexpr double kDegeneracyGap = 1e-8;

struct SpectrumSlice {
  /// Ascending; the full spectrum for dense solves, two lowest Ritz values for Krylov.
  std::vector<double> eigenvalues;
  StateVector ground;
  double gap = 0.0;
  /// ‖H g - E_0 g‖.
  double residual = 0.0;
  /// E_max - E_min, only known when the full spectrum was computed.
  std::optional<double> spectral_width;
  /// Orthonormal basis of the eigenspace within kDegeneracyGap of E_0
  /// (dense solves only; Krylov stores just the ground vector).
  std::vector<StateVector> ground_manifold;
  int iterations = 0;
  /// Krylov step at which the ground pair alone met the convergence test.
  int ground_converged_at = 0;

  double ground_energy() const { return eigenvalues.front(); }
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(int iterations, double best_residual);
  int iterations() const { return iterations_; }
  double best_residual() const { return best_residual_; }

 private:
  int iterations_;
  double best_residual_;
};

class DegenerateGroundError : public std::runtime_error {
 public:
  explicit DegenerateGroundError(double gap);
  double gap() const { return gap_; }

 private:
  double gap_;
};

/// Full Hermitian diagonalization; N <= 12.
SpectrumSlice dense_spectrum(const ChainModel& model);

struct KrylovOptions {
  double tol = 1e-10;
  int max_iter = 400;
  std::uint64_t seed = 20240601;
  std::optional<StateVector> start;
};

/// Lanczos with full reorthogonalization for the two lowest eigenpairs; N <= 24.
SpectrumSlice krylov_ground(const ChainModel& model, const KrylovOptions& options = {});

enum class SolverMethod { dense, krylov };

struct SolverSettings {
  SolverMethod method = SolverMethod::dense;
  KrylovOptions krylov;
};

SpectrumSlice solve_spectrum(const ChainModel& model, const SolverSettings& settings);

enum class DegeneracyPolicy {
  /// Any gap below kDegeneracyGap aborts.
  refuse,
  /// Accept a degenerate ground space when every T_n is a multiple of the
  /// identity on it, so ⟨g|T_n|g⟩ does not depend on the chosen ground vector.
  accept_if_well_defined,
};

struct GroundState {
  ChainModel model;         // calibrated
  SpectrumSlice spectrum;   // energies measured with the calibrated H
  double raw_ground_energy; // E_0 before calibration
};

/// Solves the uncalibrated model, applies the degeneracy guard, and calibrates.
GroundState solve_calibrated(const ChainModel& raw, const SolverSettings& settings = {},
                             DegeneracyPolicy policy = DegeneracyPolicy::refuse);

enum class FitStatus { fitted, uncorrelated };

struct CorrelationScan {
  /// (distance d, connected correlator) for d = 1 .. N/2.
  std::vector<std::pair<int, double>> pairs;
  FitStatus status = FitStatus::uncorrelated;
  /// Decay length l from log|C(d)| ~ c - d/l; +inf when the fit shows no decay.
  double fitted_length = 0.0;
  /// RMS residual of the log-linear fit.
  double fit_residual = 0.0;
};

/// Connected ⟨sigma^a_o sigma^b_{o+d}⟩ - ⟨sigma^a_o⟩⟨sigma^b_{o+d}⟩ and its decay length.
CorrelationScan correlation_scan(const ChainModel& model, const StateVector& ground, Axis a, Axis b, int origin = 0);

}  // namespace qet
