#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "qet/pauli.hpp"
#include "qet/state.hpp"

namespace qet {

enum class Boundary { open, periodic };

std::string_view boundary_name(Boundary b);
Boundary parse_boundary(std::string_view s);

/// Contiguous site block [first, last]; on periodic chains `last` may be
/// smaller than `first`, meaning the block wraps.
struct RegionSpec {
  int first;
  int last;
};

/// A finite spin chain H = sum_n T_n with each T_n supported on [n-L, n+L].
class ChainModel {
 public:
  int site_count() const { return site_count_; }
  int range() const { return range_; }
  Boundary boundary() const { return boundary_; }
  bool calibrated() const { return calibrated_; }

  const std::vector<OperatorSum>& local_terms() const { return local_terms_; }
  const OperatorSum& local_term(int n) const;
  /// Constants already subtracted from each T_n.
  const std::vector<double>& shifts() const { return shifts_; }
  const OperatorSum& total() const { return total_; }

  /// Index of site n on the chain, or -1 if it falls off an open end.
  int site(int n) const;
  /// Sites n - radius .. n + radius, wrapped or clipped; in ascending window order.
  std::vector<int> window(int center, int radius) const;
  /// Separation along the chain (shortest way round when periodic).
  int distance(int a, int b) const;

 private:
  friend ChainModel make_chain(int, int, Boundary, std::vector<OperatorSum>, std::vector<double>, bool);

  int site_count_ = 0;
  int range_ = 1;
  Boundary boundary_ = Boundary::periodic;
  bool calibrated_ = false;
  std::vector<OperatorSum> local_terms_;
  std::vector<double> shifts_;
  OperatorSum total_;
};

/// Transverse-field Ising terms
///   T_n = -b sigma^z_n - (h/2) sigma^x_n (sigma^x_{n+1} + sigma^x_{n-1}),
/// so each x-x bond is split evenly between its two sites. Open chains drop
/// the missing neighbor at the ends.
ChainModel build_ising(int site_count, double field, double coupling, Boundary boundary = Boundary::periodic);

using TermFactory = std::function<std::vector<PauliTerm>(int n)>;

/// Model from user-supplied local terms. Throws if a term is not Hermitian or
/// reaches outside its [n-L, n+L] window.
ChainModel build_custom(int site_count, int range, Boundary boundary, const TermFactory& terms);

/// Subtracts eps_n = ⟨g|T_n|g⟩ from every T_n so that H|g⟩ = 0.
/// `ground` must be an eigenvector of model.total() (residual below 1e-7).
ChainModel calibrate(const ChainModel& model, const StateVector& ground);

/// Returns the model with T_n replaced by T_n - delta. Used to build
/// deliberately miscalibrated fixtures.
ChainModel shift_local_term(const ChainModel& model, int n, double delta);

/// H_n = sum_{m=n-L}^{n+L} T_m.
OperatorSum localized_energy(const ChainModel& model, int n);

/// H_V = sum_{n in V} T_n; the block must span at least 2L sites.
OperatorSum region_energy(const ChainModel& model, RegionSpec region);

}  // namespace qet
