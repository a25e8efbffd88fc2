#include "qet/pauli.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qet {

namespace {

constexpr cplx kIPowers[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};

cplx i_power(int k) { return kIPowers[((k % 4) + 4) % 4]; }

void check_site(int site) {
  if (site < 0 || site >= kMaxSymbolicSites) {
    throw std::out_of_range("site index " + std::to_string(site) + " outside [0, 64)");
  }
}

std::string format_coefficient(cplx c) {
  std::ostringstream os;
  os.precision(12);
  if (c.imag() == 0.0) {
    os << c.real();
  } else if (c.real() == 0.0) {
    os << c.imag() << "i";
  } else {
    os << "(" << c.real() << (c.imag() < 0 ? "-" : "+") << std::abs(c.imag()) << "i)";
  }
  return os.str();
}

}  // namespace

char axis_name(Axis a) {
  switch (a) {
    case Axis::x: return 'X';
    case Axis::y: return 'Y';
    case Axis::z: return 'Z';
  }
  return '?';
}

Axis parse_axis(char c) {
  switch (c) {
    case 'x': case 'X': return Axis::x;
    case 'y': case 'Y': return Axis::y;
    case 'z': case 'Z': return Axis::z;
    default: throw std::invalid_argument(std::string("unknown Pauli axis '") + c + "'");
  }
}

PauliTerm::PauliTerm(cplx coefficient, std::initializer_list<std::pair<int, Axis>> factors)
    : coefficient_(coefficient) {
  for (const auto& [site, axis] : factors) set_factor(site, axis);
}

PauliTerm::PauliTerm(cplx coefficient, const std::map<int, Axis>& factors) : coefficient_(coefficient) {
  for (const auto& [site, axis] : factors) set_factor(site, axis);
}

PauliTerm PauliTerm::single(int site, Axis axis, cplx coefficient) {
  PauliTerm t(coefficient);
  t.set_factor(site, axis);
  return t;
}

void PauliTerm::set_factor(int site, Axis axis) {
  check_site(site);
  const std::uint64_t bit = std::uint64_t{1} << site;
  if (support_mask() & bit) {
    throw std::invalid_argument("site " + std::to_string(site) + " appears twice in a Pauli term");
  }
  if (axis != Axis::z) x_ |= bit;
  if (axis != Axis::x) z_ |= bit;
}

int PauliTerm::y_count() const { return std::popcount(x_ & z_); }

std::optional<Axis> PauliTerm::axis_at(int site) const {
  check_site(site);
  const bool x = (x_ >> site) & 1u;
  const bool z = (z_ >> site) & 1u;
  if (x && z) return Axis::y;
  if (x) return Axis::x;
  if (z) return Axis::z;
  return std::nullopt;
}

std::map<int, Axis> PauliTerm::factors() const {
  std::map<int, Axis> out;
  for (std::uint64_t m = support_mask(); m; m &= m - 1) {
    const int site = std::countr_zero(m);
    out.emplace(site, *axis_at(site));
  }
  return out;
}

PauliTerm PauliTerm::with_coefficient(cplx c) const { return PauliTerm(c, x_, z_); }

bool PauliTerm::commutes_with(const PauliTerm& other) const {
  // Symplectic form: the strings anticommute on an odd number of sites.
  const int overlap = std::popcount(x_ & other.z_) + std::popcount(z_ & other.x_);
  return overlap % 2 == 0;
}

std::string PauliTerm::to_string() const {
  std::string out = format_coefficient(coefficient_);
  for (const auto& [site, axis] : factors()) {
    out += ' ';
    out += axis_name(axis);
    out += std::to_string(site);
  }
  return out;
}

PauliTerm operator*(const PauliTerm& a, const PauliTerm& b) {
  // P(x, z) = i^{|x&z|} X^x Z^z, and Z^z1 X^x2 = (-1)^{|z1&x2|} X^x2 Z^z1.
  const std::uint64_t x = a.x_ ^ b.x_;
  const std::uint64_t z = a.z_ ^ b.z_;
  int power = a.y_count() + b.y_count() - std::popcount(x & z);
  power += 2 * std::popcount(a.z_ & b.x_);
  return PauliTerm(a.coefficient_ * b.coefficient_ * i_power(power), x, z);
}

OperatorSum::OperatorSum(const PauliTerm& term) : terms_{term} { canonicalize(); }

OperatorSum::OperatorSum(std::vector<PauliTerm> terms) : terms_(std::move(terms)) { canonicalize(); }

void OperatorSum::canonicalize() {
  std::sort(terms_.begin(), terms_.end(), [](const PauliTerm& a, const PauliTerm& b) {
    return a.x_mask() != b.x_mask() ? a.x_mask() < b.x_mask() : a.z_mask() < b.z_mask();
  });
  std::vector<PauliTerm> merged;
  merged.reserve(terms_.size());
  for (const auto& t : terms_) {
    if (!merged.empty() && merged.back().same_string(t)) {
      merged.back() = merged.back().with_coefficient(merged.back().coefficient() + t.coefficient());
    } else {
      merged.push_back(t);
    }
  }
  std::erase_if(merged, [](const PauliTerm& t) { return std::abs(t.coefficient()) < kPruneThreshold; });
  terms_ = std::move(merged);
}

std::uint64_t OperatorSum::support_mask() const {
  std::uint64_t m = 0;
  for (const auto& t : terms_) m |= t.support_mask();
  return m;
}

std::vector<int> OperatorSum::support() const {
  std::vector<int> sites;
  for (std::uint64_t m = support_mask(); m; m &= m - 1) sites.push_back(std::countr_zero(m));
  return sites;
}

int OperatorSum::max_site() const {
  const std::uint64_t m = support_mask();
  return m == 0 ? -1 : 63 - std::countl_zero(m);
}

cplx OperatorSum::identity_coefficient() const {
  // Canonical order puts the identity string (0, 0) first.
  if (!terms_.empty() && terms_.front().is_identity()) return terms_.front().coefficient();
  return 0.0;
}

bool OperatorSum::is_identity_proportional() const { return support_mask() == 0; }

bool OperatorSum::is_hermitian(double tol) const {
  return std::all_of(terms_.begin(), terms_.end(),
                     [tol](const PauliTerm& t) { return std::abs(t.coefficient().imag()) <= tol; });
}

OperatorSum OperatorSum::adjoint() const {
  std::vector<PauliTerm> out;
  out.reserve(terms_.size());
  for (const auto& t : terms_) out.push_back(t.adjoint());
  return OperatorSum(std::move(out));
}

std::string OperatorSum::to_string() const {
  if (terms_.empty()) return "0";
  std::string out;
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    if (k) out += " + ";
    out += terms_[k].to_string();
  }
  return out;
}

OperatorSum& OperatorSum::operator+=(const OperatorSum& rhs) {
  terms_.insert(terms_.end(), rhs.terms_.begin(), rhs.terms_.end());
  canonicalize();
  return *this;
}

OperatorSum& OperatorSum::operator-=(const OperatorSum& rhs) {
  for (const auto& t : rhs.terms_) terms_.push_back(t.with_coefficient(-t.coefficient()));
  canonicalize();
  return *this;
}

OperatorSum& OperatorSum::operator*=(cplx s) {
  for (auto& t : terms_) t = t.with_coefficient(s * t.coefficient());
  canonicalize();
  return *this;
}

OperatorSum operator*(const OperatorSum& a, const OperatorSum& b) {
  std::vector<PauliTerm> out;
  out.reserve(a.terms_.size() * b.terms_.size());
  for (const auto& ta : a.terms_) {
    for (const auto& tb : b.terms_) out.push_back(ta * tb);
  }
  return OperatorSum(std::move(out));
}

OperatorSum commutator(const OperatorSum& a, const OperatorSum& b) {
  // Commuting string pairs cancel; anticommuting pairs contribute 2 P_a P_b.
  std::vector<PauliTerm> out;
  for (const auto& ta : a.terms()) {
    for (const auto& tb : b.terms()) {
      if (!ta.commutes_with(tb)) out.push_back(2.0 * (ta * tb));
    }
  }
  return OperatorSum(std::move(out));
}

OperatorSum pauli_vector(int site, const std::array<double, 3>& u) {
  return OperatorSum(std::vector<PauliTerm>{PauliTerm::single(site, Axis::x, u[0]),
                                            PauliTerm::single(site, Axis::y, u[1]),
                                            PauliTerm::single(site, Axis::z, u[2])});
}

namespace {

// Accumulates term * e_b into column b of `m` for every local basis index.
void accumulate_term(Eigen::MatrixXcd& m, cplx phase, std::uint64_t x, std::uint64_t z) {
  const auto dim = static_cast<std::uint64_t>(m.rows());
  for (std::uint64_t b = 0; b < dim; ++b) {
    const double sign = (std::popcount(b & z) & 1) ? -1.0 : 1.0;
    m(static_cast<Eigen::Index>(b ^ x), static_cast<Eigen::Index>(b)) += phase * sign;
  }
}

}  // namespace

Eigen::MatrixXcd dense_matrix(const OperatorSum& op, int site_count) {
  if (site_count < 1 || site_count > 14) throw std::invalid_argument("dense_matrix supports 1..14 sites");
  if (op.max_site() >= site_count) throw std::out_of_range("operator support exceeds site count");
  const Eigen::Index dim = Eigen::Index{1} << site_count;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& t : op.terms()) {
    accumulate_term(m, t.coefficient() * i_power(t.y_count()), t.x_mask(), t.z_mask());
  }
  return m;
}

Eigen::MatrixXcd dense_matrix_on(const OperatorSum& op, std::span<const int> sites) {
  if (sites.size() > 14) throw std::invalid_argument("dense_matrix_on supports at most 14 sites");
  std::uint64_t allowed = 0;
  for (int s : sites) {
    check_site(s);
    allowed |= std::uint64_t{1} << s;
  }
  if (op.support_mask() & ~allowed) throw std::invalid_argument("operator support not inside the requested sites");

  auto relabel = [&](std::uint64_t mask) {
    std::uint64_t local = 0;
    for (std::size_t k = 0; k < sites.size(); ++k) {
      if ((mask >> sites[k]) & 1u) local |= std::uint64_t{1} << k;
    }
    return local;
  };
  const Eigen::Index dim = Eigen::Index{1} << sites.size();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& t : op.terms()) {
    accumulate_term(m, t.coefficient() * i_power(t.y_count()), relabel(t.x_mask()), relabel(t.z_mask()));
  }
  return m;
}

}  // namespace qet
