#include "qet/chain_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qet {

std::string_view boundary_name(Boundary b) { return b == Boundary::open ? "open" : "periodic"; }

Boundary parse_boundary(std::string_view s) {
  if (s == "open") return Boundary::open;
  if (s == "periodic") return Boundary::periodic;
  throw std::invalid_argument("boundary must be 'open' or 'periodic', got '" + std::string(s) + "'");
}

ChainModel make_chain(int site_count, int range, Boundary boundary, std::vector<OperatorSum> terms,
                      std::vector<double> shifts, bool calibrated) {
  ChainModel m;
  m.site_count_ = site_count;
  m.range_ = range;
  m.boundary_ = boundary;
  m.calibrated_ = calibrated;
  m.local_terms_ = std::move(terms);
  m.shifts_ = std::move(shifts);
  for (const auto& t : m.local_terms_) m.total_ += t;
  return m;
}

const OperatorSum& ChainModel::local_term(int n) const {
  const int s = site(n);
  if (s < 0) throw std::out_of_range("local term index " + std::to_string(n) + " outside the chain");
  return local_terms_[static_cast<std::size_t>(s)];
}

int ChainModel::site(int n) const {
  if (boundary_ == Boundary::periodic) return ((n % site_count_) + site_count_) % site_count_;
  return (n >= 0 && n < site_count_) ? n : -1;
}

std::vector<int> ChainModel::window(int center, int radius) const {
  if (boundary_ == Boundary::periodic && 2 * radius + 1 > site_count_) {
    throw std::invalid_argument("window of radius " + std::to_string(radius) + " wraps onto itself");
  }
  std::vector<int> out;
  for (int k = center - radius; k <= center + radius; ++k) {
    if (const int s = site(k); s >= 0) out.push_back(s);
  }
  return out;
}

int ChainModel::distance(int a, int b) const {
  const int d = std::abs(a - b);
  return boundary_ == Boundary::periodic ? std::min(d, site_count_ - d) : d;
}

namespace {

void check_chain_size(int site_count, int range, Boundary boundary) {
  if (range < 1) throw std::invalid_argument("interaction range must be >= 1");
  if (site_count > kMaxSymbolicSites) throw std::invalid_argument("too many sites");
  if (boundary == Boundary::periodic && site_count < 2 * range + 1) {
    throw std::invalid_argument("periodic chain needs at least 2L+1 sites");
  }
}

}  // namespace

ChainModel build_ising(int site_count, double field, double coupling, Boundary boundary) {
  if (site_count < 3) throw std::invalid_argument("Ising chain needs N >= 3, got " + std::to_string(site_count));
  check_chain_size(site_count, 1, boundary);
  ChainModel probe = make_chain(site_count, 1, boundary, {}, {}, false);
  std::vector<OperatorSum> terms;
  terms.reserve(static_cast<std::size_t>(site_count));
  for (int n = 0; n < site_count; ++n) {
    std::vector<PauliTerm> t{PauliTerm::single(n, Axis::z, -field)};
    for (int nb : {n + 1, n - 1}) {
      if (const int s = probe.site(nb); s >= 0) {
        t.emplace_back(-coupling / 2.0, std::initializer_list<std::pair<int, Axis>>{{n, Axis::x}, {s, Axis::x}});
      }
    }
    terms.emplace_back(std::move(t));
  }
  return make_chain(site_count, 1, boundary, std::move(terms), std::vector<double>(site_count, 0.0), false);
}

ChainModel build_custom(int site_count, int range, Boundary boundary, const TermFactory& factory) {
  if (site_count < 1) throw std::invalid_argument("chain needs at least one site");
  check_chain_size(site_count, range, boundary);
  ChainModel probe = make_chain(site_count, range, boundary, {}, {}, false);
  std::vector<OperatorSum> terms;
  terms.reserve(static_cast<std::size_t>(site_count));
  for (int n = 0; n < site_count; ++n) {
    OperatorSum t(factory(n));
    std::uint64_t allowed = 0;
    for (int s : probe.window(n, range)) allowed |= std::uint64_t{1} << s;
    if (t.support_mask() & ~allowed) {
      throw std::invalid_argument("term T_" + std::to_string(n) + " reaches outside [n-L, n+L]");
    }
    bool hermitian = t.is_hermitian();
    if (site_count <= 10) {
      const Eigen::MatrixXcd m = dense_matrix(t, site_count);
      hermitian = (m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-12;
    }
    if (!hermitian) throw std::invalid_argument("term T_" + std::to_string(n) + " is not Hermitian");
    terms.push_back(std::move(t));
  }
  return make_chain(site_count, range, boundary, std::move(terms), std::vector<double>(site_count, 0.0), false);
}

ChainModel calibrate(const ChainModel& model, const StateVector& ground) {
  if (ground.site_count() != model.site_count()) throw std::invalid_argument("ground state size mismatch");
  const double e0 = expectation(ground, model.total()).real();
  const double residual = (apply(model.total(), ground) - cplx(e0) * ground).norm();
  if (residual > 1e-7) {
    throw std::invalid_argument("calibration state is not an eigenvector of H (residual " + std::to_string(residual) +
                                ")");
  }
  std::vector<OperatorSum> terms;
  std::vector<double> shifts = model.shifts();
  for (int n = 0; n < model.site_count(); ++n) {
    const OperatorSum& t = model.local_term(n);
    const double eps = expectation(ground, t).real();
    terms.push_back(t - OperatorSum::identity(eps));
    shifts[static_cast<std::size_t>(n)] += eps;
  }
  return make_chain(model.site_count(), model.range(), model.boundary(), std::move(terms), std::move(shifts), true);
}

ChainModel shift_local_term(const ChainModel& model, int n, double delta) {
  std::vector<OperatorSum> terms = model.local_terms();
  std::vector<double> shifts = model.shifts();
  const int s = model.site(n);
  if (s < 0) throw std::out_of_range("shift_local_term site out of range");
  terms[static_cast<std::size_t>(s)] -= OperatorSum::identity(delta);
  shifts[static_cast<std::size_t>(s)] += delta;
  return make_chain(model.site_count(), model.range(), model.boundary(), std::move(terms), std::move(shifts),
                    model.calibrated());
}

OperatorSum localized_energy(const ChainModel& model, int n) {
  if (model.site(n) < 0) throw std::out_of_range("localized_energy site out of range");
  OperatorSum out;
  for (int m : model.window(n, model.range())) out += model.local_term(m);
  return out;
}

OperatorSum region_energy(const ChainModel& model, RegionSpec region) {
  const int n = model.site_count();
  if (model.site(region.first) != region.first || region.first < 0 || region.last < 0 || region.last >= n) {
    throw std::out_of_range("region bounds outside the chain");
  }
  int span = region.last - region.first;
  if (span < 0) {
    if (model.boundary() == Boundary::open) throw std::invalid_argument("wrapped region on an open chain");
    span += n;
  }
  if (span < 2 * model.range() - 1) {
    throw std::invalid_argument("region [" + std::to_string(region.first) + ", " + std::to_string(region.last) +
                                "] narrower than 2L sites");
  }
  OperatorSum out;
  for (int k = 0; k <= span; ++k) out += model.local_term(region.first + k);
  return out;
}

}  // namespace qet
