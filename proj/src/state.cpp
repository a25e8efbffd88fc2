#include "qet/state.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qet {

namespace {

void check_site_count(int n) {
  if (n < 1 || n > kMaxStateSites) {
    throw std::invalid_argument("state vectors support 1.." + std::to_string(kMaxStateSites) + " sites, got " +
                                std::to_string(n));
  }
}

void check_support(const OperatorSum& op, int site_count) {
  if (op.max_site() >= site_count) {
    throw std::out_of_range("operator touches site " + std::to_string(op.max_site()) + " on a " +
                            std::to_string(site_count) + "-site state");
  }
}

void check_same_size(const StateVector& a, const StateVector& b) {
  if (a.site_count() != b.site_count()) throw std::invalid_argument("mismatched site counts");
}

// Phase of the canonical Pauli string relative to X^x Z^z.
cplx string_phase(const PauliTerm& t) {
  static constexpr cplx kI[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  return t.coefficient() * kI[t.y_count() % 4];
}

}  // namespace

StateVector::StateVector(int site_count) : site_count_(site_count) {
  check_site_count(site_count);
  amplitudes_ = Eigen::VectorXcd::Zero(Eigen::Index{1} << site_count);
  amplitudes_[0] = 1.0;
}

StateVector::StateVector(int site_count, Eigen::VectorXcd amplitudes)
    : site_count_(site_count), amplitudes_(std::move(amplitudes)) {
  check_site_count(site_count);
  if (amplitudes_.size() != (Eigen::Index{1} << site_count)) {
    throw std::invalid_argument("amplitude vector length is not 2^N");
  }
}

StateVector StateVector::basis(int site_count, std::uint64_t index) {
  StateVector s(site_count);
  if (index >= static_cast<std::uint64_t>(s.dimension())) throw std::out_of_range("basis index out of range");
  s.amplitudes_[0] = 0.0;
  s.amplitudes_[static_cast<Eigen::Index>(index)] = 1.0;
  return s;
}

StateVector StateVector::random(int site_count, std::mt19937_64& rng) {
  check_site_count(site_count);
  std::normal_distribution<double> gauss;
  Eigen::VectorXcd amp(Eigen::Index{1} << site_count);
  for (auto& a : amp) a = cplx(gauss(rng), gauss(rng));
  amp.normalize();
  return StateVector(site_count, std::move(amp));
}

StateVector StateVector::normalized() const {
  const double n = norm();
  if (n == 0.0) throw std::domain_error("cannot normalize the zero vector");
  return StateVector(site_count_, amplitudes_ / n);
}

StateVector operator+(const StateVector& a, const StateVector& b) {
  check_same_size(a, b);
  return StateVector(a.site_count_, a.amplitudes_ + b.amplitudes_);
}

StateVector operator-(const StateVector& a, const StateVector& b) {
  check_same_size(a, b);
  return StateVector(a.site_count_, a.amplitudes_ - b.amplitudes_);
}

StateVector operator*(cplx s, const StateVector& a) { return StateVector(a.site_count_, s * a.amplitudes_); }

cplx inner(const StateVector& a, const StateVector& b) {
  check_same_size(a, b);
  return a.amplitudes().dot(b.amplitudes());
}

StateVector apply(const OperatorSum& op, const StateVector& psi) {
  check_support(op, psi.site_count());
  const auto dim = static_cast<std::uint64_t>(psi.dimension());
  const auto& in = psi.amplitudes();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi.dimension());
  for (const auto& t : op.terms()) {
    const cplx phase = string_phase(t);
    const std::uint64_t x = t.x_mask();
    const std::uint64_t z = t.z_mask();
    for (std::uint64_t b = 0; b < dim; ++b) {
      const cplx v = (std::popcount(b & z) & 1) ? -in[b] : in[b];
      out[static_cast<Eigen::Index>(b ^ x)] += phase * v;
    }
  }
  return StateVector(psi.site_count(), std::move(out));
}

cplx matrix_element(const StateVector& bra, const OperatorSum& op, const StateVector& ket) {
  check_same_size(bra, ket);
  check_support(op, ket.site_count());
  const auto dim = static_cast<std::uint64_t>(ket.dimension());
  const auto& l = bra.amplitudes();
  const auto& r = ket.amplitudes();
  cplx total = 0.0;
  for (const auto& t : op.terms()) {
    const std::uint64_t x = t.x_mask();
    const std::uint64_t z = t.z_mask();
    cplx acc = 0.0;
    for (std::uint64_t b = 0; b < dim; ++b) {
      const cplx v = std::conj(l[static_cast<Eigen::Index>(b ^ x)]) * r[static_cast<Eigen::Index>(b)];
      acc += (std::popcount(b & z) & 1) ? -v : v;
    }
    total += string_phase(t) * acc;
  }
  return total;
}

cplx expectation(const StateVector& psi, const OperatorSum& op) {
  if (std::abs(psi.norm() - 1.0) > 1e-9) throw std::invalid_argument("expectation requires a normalized state");
  return matrix_element(psi, op, psi);
}

Ensemble::Ensemble(std::vector<WeightedState> branches) : branches_(std::move(branches)) {
  if (branches_.empty()) throw std::invalid_argument("ensemble needs at least one branch");
  double total = 0.0;
  for (const auto& b : branches_) {
    if (b.weight < 0.0) throw std::invalid_argument("negative ensemble weight");
    if (b.state.site_count() != branches_.front().state.site_count()) {
      throw std::invalid_argument("ensemble branches differ in site count");
    }
    total += b.weight;
  }
  if (std::abs(total - 1.0) > 1e-10) throw std::invalid_argument("ensemble weights do not sum to 1");
}

cplx expectation(const Ensemble& rho, const OperatorSum& op) {
  cplx total = 0.0;
  for (const auto& b : rho.branches()) total += b.weight * expectation(b.state, op);
  return total;
}

namespace {

void accumulate_reduced(const StateVector& psi, std::span<const int> keep, double weight, Eigen::MatrixXcd& rho) {
  const int n = psi.site_count();
  std::uint64_t keep_mask = 0;
  for (int s : keep) {
    if (s < 0 || s >= n) throw std::out_of_range("partial_trace site out of range");
    if ((keep_mask >> s) & 1u) throw std::invalid_argument("partial_trace site listed twice");
    keep_mask |= std::uint64_t{1} << s;
  }
  const std::uint64_t rest_mask = ((std::uint64_t{1} << n) - 1) & ~keep_mask;
  const std::uint64_t local_dim = std::uint64_t{1} << keep.size();

  std::vector<std::uint64_t> embed(local_dim, 0);
  for (std::uint64_t i = 0; i < local_dim; ++i) {
    for (std::size_t k = 0; k < keep.size(); ++k) {
      if ((i >> k) & 1u) embed[i] |= std::uint64_t{1} << keep[k];
    }
  }
  const auto& amp = psi.amplitudes();
  // Enumerate assignments of the traced-out sites as submasks of rest_mask.
  std::uint64_t r = 0;
  do {
    for (std::uint64_t i = 0; i < local_dim; ++i) {
      const cplx ai = amp[static_cast<Eigen::Index>(r | embed[i])];
      if (ai == 0.0) continue;
      for (std::uint64_t j = 0; j < local_dim; ++j) {
        rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
            weight * ai * std::conj(amp[static_cast<Eigen::Index>(r | embed[j])]);
      }
    }
    r = (r - rest_mask) & rest_mask;
  } while (r != 0);
}

}  // namespace

DensityBlock partial_trace(const StateVector& psi, std::span<const int> keep) {
  return partial_trace(Ensemble::pure(psi), keep);
}

DensityBlock partial_trace(const Ensemble& rho, std::span<const int> keep) {
  if (keep.empty()) throw std::invalid_argument("partial_trace needs a nonempty site set");
  if (keep.size() > 14) throw std::invalid_argument("partial_trace keeps at most 14 sites");
  const Eigen::Index dim = Eigen::Index{1} << keep.size();
  DensityBlock out{{keep.begin(), keep.end()}, Eigen::MatrixXcd::Zero(dim, dim)};
  for (const auto& b : rho.branches()) accumulate_reduced(b.state, keep, b.weight, out.matrix);
  return out;
}

}  // namespace qet
