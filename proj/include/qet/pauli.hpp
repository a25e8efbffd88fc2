#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qet {

using cplx = std::complex<double>;

/// Terms whose coefficient magnitude falls below this are dropped after
/// every symbolic simplification.
inline constexpr double kPruneThreshold = 1e-14;

/// Symbolic operators address at most this many sites.
inline constexpr int kMaxSymbolicSites = 64;

enum class Axis : std::uint8_t { x, y, z };

char axis_name(Axis a);
Axis parse_axis(char c);

/// A weighted product of single-site Pauli matrices.
///
/// Stored in symplectic form: site m carries X when bit m of the x mask is
/// set, Z when bit m of the z mask is set, and Y when both are set. The
/// coefficient multiplies the Hermitian product of genuine X, Y and Z
/// factors, so a term is Hermitian exactly when its coefficient is real.
class PauliTerm {
 public:
  PauliTerm() = default;
  explicit PauliTerm(cplx coefficient) : coefficient_(coefficient) {}
  PauliTerm(cplx coefficient, std::initializer_list<std::pair<int, Axis>> factors);
  PauliTerm(cplx coefficient, const std::map<int, Axis>& factors);

  static PauliTerm single(int site, Axis axis, cplx coefficient = 1.0);

  cplx coefficient() const { return coefficient_; }
  std::uint64_t x_mask() const { return x_; }
  std::uint64_t z_mask() const { return z_; }
  std::uint64_t support_mask() const { return x_ | z_; }
  bool is_identity() const { return support_mask() == 0; }
  int y_count() const;

  std::optional<Axis> axis_at(int site) const;
  std::map<int, Axis> factors() const;

  PauliTerm with_coefficient(cplx c) const;
  PauliTerm adjoint() const { return with_coefficient(std::conj(coefficient_)); }

  /// True when both terms carry the same Pauli string (coefficients ignored).
  bool same_string(const PauliTerm& other) const { return x_ == other.x_ && z_ == other.z_; }
  bool commutes_with(const PauliTerm& other) const;

  std::string to_string() const;

  friend PauliTerm operator*(const PauliTerm& a, const PauliTerm& b);
  friend PauliTerm operator*(cplx s, const PauliTerm& t) { return t.with_coefficient(s * t.coefficient_); }

 private:
  PauliTerm(cplx coefficient, std::uint64_t x, std::uint64_t z) : coefficient_(coefficient), x_(x), z_(z) {}
  void set_factor(int site, Axis axis);

  cplx coefficient_{1.0, 0.0};
  std::uint64_t x_ = 0;
  std::uint64_t z_ = 0;
};

/// A sum of Pauli terms in canonical form: sorted by Pauli string, like
/// strings merged, negligible coefficients pruned.
class OperatorSum {
 public:
  OperatorSum() = default;
  OperatorSum(const PauliTerm& term);  // NOLINT(google-explicit-constructor)
  explicit OperatorSum(std::vector<PauliTerm> terms);

  static OperatorSum identity(cplx coefficient = 1.0) { return OperatorSum(PauliTerm(coefficient)); }

  const std::vector<PauliTerm>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  std::uint64_t support_mask() const;
  std::vector<int> support() const;
  /// Largest site index touched, or -1 for a scalar.
  int max_site() const;

  cplx identity_coefficient() const;
  bool is_identity_proportional() const;

  /// Symbolic Hermiticity: in canonical form A = A† iff every coefficient is real.
  bool is_hermitian(double tol = 1e-12) const;
  OperatorSum adjoint() const;

  std::string to_string() const;

  OperatorSum& operator+=(const OperatorSum& rhs);
  OperatorSum& operator-=(const OperatorSum& rhs);
  OperatorSum& operator*=(cplx s);

  friend OperatorSum operator+(OperatorSum a, const OperatorSum& b) { return a += b; }
  friend OperatorSum operator-(OperatorSum a, const OperatorSum& b) { return a -= b; }
  friend OperatorSum operator*(cplx s, OperatorSum a) { return a *= s; }
  friend OperatorSum operator*(const OperatorSum& a, const OperatorSum& b);

 private:
  void canonicalize();

  std::vector<PauliTerm> terms_;
};

/// AB - BA, simplified symbolically.
OperatorSum commutator(const OperatorSum& a, const OperatorSum& b);

/// u·σ at one site for a real 3-vector u.
OperatorSum pauli_vector(int site, const std::array<double, 3>& u);

/// Dense 2^N x 2^N matrix of `op`. Oracle and small-support use only.
Eigen::MatrixXcd dense_matrix(const OperatorSum& op, int site_count);

/// Dense matrix of `op` restricted to `sites`, with local bit k standing for
/// sites[k]. `op` must be supported inside `sites`.
Eigen::MatrixXcd dense_matrix_on(const OperatorSum& op, std::span<const int> sites);

}  // namespace qet
