#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qet/pauli.hpp"

namespace qet {

/// State vectors are allocated for at most this many sites.
inline constexpr int kMaxStateSites = 24;

/// Amplitudes over the 2^N computational basis.
///
/// Bit convention, shared by every routine in the project: basis index b
/// puts site m in bit (b >> m) & 1, and bit value 0 is the sigma^z = +1
/// ("up") state.
class StateVector {
 public:
  /// All sites up.
  explicit StateVector(int site_count);
  StateVector(int site_count, Eigen::VectorXcd amplitudes);

  static StateVector basis(int site_count, std::uint64_t index);
  /// Haar-like random state from complex Gaussian amplitudes, normalized.
  static StateVector random(int site_count, std::mt19937_64& rng);

  int site_count() const { return site_count_; }
  Eigen::Index dimension() const { return amplitudes_.size(); }
  const Eigen::VectorXcd& amplitudes() const { return amplitudes_; }
  cplx operator[](Eigen::Index b) const { return amplitudes_[b]; }

  double norm() const { return amplitudes_.norm(); }
  StateVector normalized() const;

  friend StateVector operator+(const StateVector& a, const StateVector& b);
  friend StateVector operator-(const StateVector& a, const StateVector& b);
  friend StateVector operator*(cplx s, const StateVector& a);

 private:
  int site_count_;
  Eigen::VectorXcd amplitudes_;
};

/// ⟨a|b⟩.
cplx inner(const StateVector& a, const StateVector& b);

/// op·psi, term by term; the result is not renormalized.
StateVector apply(const OperatorSum& op, const StateVector& psi);

/// ⟨bra|op|ket⟩ without forming op·ket.
cplx matrix_element(const StateVector& bra, const OperatorSum& op, const StateVector& ket);

/// ⟨psi|op|psi⟩ for a normalized psi.
cplx expectation(const StateVector& psi, const OperatorSum& op);

struct WeightedState {
  double weight;
  StateVector state;
};

/// A mixed state held as a convex combination of pure states.
class Ensemble {
 public:
  explicit Ensemble(std::vector<WeightedState> branches);
  static Ensemble pure(const StateVector& psi) { return Ensemble({{1.0, psi}}); }

  const std::vector<WeightedState>& branches() const { return branches_; }
  int site_count() const { return branches_.front().state.site_count(); }

 private:
  std::vector<WeightedState> branches_;
};

cplx expectation(const Ensemble& rho, const OperatorSum& op);

/// Reduced density matrix on an ordered site subset; local bit k is sites[k].
struct DensityBlock {
  std::vector<int> sites;
  Eigen::MatrixXcd matrix;

  double trace() const { return matrix.trace().real(); }
};

DensityBlock partial_trace(const StateVector& psi, std::span<const int> keep);
DensityBlock partial_trace(const Ensemble& rho, std::span<const int> keep);

}  // namespace qet
