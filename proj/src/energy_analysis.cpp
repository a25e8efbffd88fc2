#include "qet/energy_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace qet {

EnergyProfile profile(const Ensemble& rho, const ChainModel& model, std::string label) {
  EnergyProfile p{std::move(label), {}, 0.0};
  p.values.reserve(static_cast<std::size_t>(model.site_count()));
  for (const auto& t : model.local_terms()) {
    p.values.push_back(expectation(rho, t).real());
    p.total += p.values.back();
  }
  return p;
}

EnergyProfile profile(const StateVector& psi, const ChainModel& model, std::string label) {
  return profile(Ensemble::pure(psi), model, std::move(label));
}

NegativityCertificate negativity_certificate(const ChainModel& model, int n) {
  const OperatorSum& t = model.local_term(n);
  if (t.is_identity_proportional()) {
    throw std::domain_error("T_" + std::to_string(n) + " is proportional to the identity; no certificate");
  }
  const std::vector<int> support = t.support();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(dense_matrix_on(t, support));
  const Eigen::VectorXcd local = solver.eigenvectors().col(0);

  Eigen::VectorXcd amp = Eigen::VectorXcd::Zero(Eigen::Index{1} << model.site_count());
  for (Eigen::Index i = 0; i < local.size(); ++i) {
    std::uint64_t b = 0;
    for (std::size_t k = 0; k < support.size(); ++k) {
      if ((static_cast<std::uint64_t>(i) >> k) & 1u) b |= std::uint64_t{1} << support[k];
    }
    amp[static_cast<Eigen::Index>(b)] = local[i];
  }
  return {model.site(n), solver.eigenvalues()[0], StateVector(model.site_count(), std::move(amp))};
}

double correlation_witness(const ChainModel& model, const StateVector& ground, int n, int m, Axis axis) {
  if (model.site(n) < 0 || model.site(m) < 0) throw std::out_of_range("witness site outside the chain");
  if (model.distance(n, m) < model.range() + 1) {
    throw std::invalid_argument("correlation witness needs |n - m| >= L + 1");
  }
  const OperatorSum& t = model.local_term(n);
  const OperatorSum o(PauliTerm::single(model.site(m), axis));
  const cplx joint = expectation(ground, t * o);
  return std::abs(joint - expectation(ground, t) * expectation(ground, o));
}

namespace {

std::pair<OperatorSum, OperatorSum> flux_blocks(const ChainModel& model, int n) {
  const int L = model.range();
  if (model.boundary() == Boundary::periodic) {
    if (model.site_count() < 4 * L) throw std::invalid_argument("flux on a periodic chain needs N >= 4L");
  } else if (n < -1 || n > model.site_count() - 1) {
    throw std::out_of_range("flux cut " + std::to_string(n) + " outside the open chain");
  }
  OperatorSum left;
  OperatorSum right;
  for (int m = n - 2 * L + 1; m <= n; ++m) {
    if (model.site(m) >= 0) left += model.local_term(m);
  }
  for (int m = n + 1; m <= n + 2 * L; ++m) {
    if (model.site(m) >= 0) right += model.local_term(m);
  }
  return {std::move(left), std::move(right)};
}

double real_checked(cplx v, const char* what) {
  if (std::abs(v.imag()) > 1e-10) throw std::runtime_error(std::string(what) + " has an imaginary part");
  return v.real();
}

}  // namespace

double flux(const Ensemble& rho, const ChainModel& model, int n) {
  const auto [left, right] = flux_blocks(model, n);
  return real_checked(expectation(rho, cplx(0, 1) * commutator(left, right)), "energy flux");
}

double flux(const StateVector& psi, const ChainModel& model, int n) { return flux(Ensemble::pure(psi), model, n); }

double region_energy_rate(const StateVector& psi, const ChainModel& model, RegionSpec region) {
  const OperatorSum rate = cplx(0, 1) * commutator(model.total(), region_energy(model, region));
  return real_checked(expectation(psi, rate), "energy rate");
}

namespace {

Eigen::Matrix2cd rotation(const EulerAngles& a) {
  const cplx i(0, 1);
  Eigen::Matrix2cd rz1 = Eigen::Matrix2cd::Zero();
  rz1(0, 0) = std::exp(-i * a[0] / 2.0);
  rz1(1, 1) = std::exp(i * a[0] / 2.0);
  Eigen::Matrix2cd ry;
  ry << std::cos(a[1] / 2), -std::sin(a[1] / 2), std::sin(a[1] / 2), std::cos(a[1] / 2);
  Eigen::Matrix2cd rz2 = Eigen::Matrix2cd::Zero();
  rz2(0, 0) = std::exp(-i * a[2] / 2.0);
  rz2(1, 1) = std::exp(i * a[2] / 2.0);
  return rz1 * ry * rz2;
}

// Single-site unitary u on local bit k of a 2^sites space.
Eigen::MatrixXcd embed(const Eigen::Matrix2cd& u, int k, Eigen::Index dim) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
  const Eigen::Index bit = Eigen::Index{1} << k;
  for (Eigen::Index j = 0; j < dim; ++j) {
    const int bj = (j & bit) ? 1 : 0;
    const Eigen::Index base = j & ~bit;
    out(base, j) = u(0, bj);
    out(base | bit, j) = u(1, bj);
  }
  return out;
}

struct SimplexResult {
  EulerAngles point;
  double value;
  int evaluations;
  bool converged;
};

// Nelder-Mead with the standard coefficients (1, 2, 1/2, 1/2).
SimplexResult nelder_mead(const std::function<double(const EulerAngles&)>& f, const EulerAngles& start, int budget) {
  constexpr int kDim = 3;
  std::array<EulerAngles, kDim + 1> pts;
  std::array<double, kDim + 1> vals{};
  pts[0] = start;
  for (int d = 0; d < kDim; ++d) {
    pts[d + 1] = start;
    pts[d + 1][d] += 0.6;
  }
  int evals = 0;
  for (int k = 0; k <= kDim; ++k) {
    vals[k] = f(pts[k]);
    ++evals;
  }
  auto blend = [](const EulerAngles& a, const EulerAngles& b, double t) {
    EulerAngles out;
    for (int d = 0; d < kDim; ++d) out[d] = a[d] + t * (b[d] - a[d]);
    return out;
  };

  bool converged = false;
  while (evals < budget) {
    std::array<int, kDim + 1> order{0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return vals[a] < vals[b]; });
    const int best = order[0];
    const int worst = order[kDim];
    const int second_worst = order[kDim - 1];

    double size = 0.0;
    for (int k = 0; k <= kDim; ++k) {
      for (int d = 0; d < kDim; ++d) size = std::max(size, std::abs(pts[k][d] - pts[best][d]));
    }
    if (vals[worst] - vals[best] < 1e-15 && size < 1e-7) {
      converged = true;
      break;
    }

    EulerAngles centroid{0, 0, 0};
    for (int k = 0; k <= kDim; ++k) {
      if (k == worst) continue;
      for (int d = 0; d < kDim; ++d) centroid[d] += pts[k][d] / kDim;
    }
    const EulerAngles reflected = blend(centroid, pts[worst], -1.0);
    const double fr = f(reflected);
    ++evals;
    if (fr < vals[best]) {
      const EulerAngles expanded = blend(centroid, pts[worst], -2.0);
      const double fe = f(expanded);
      ++evals;
      if (fe < fr) {
        pts[worst] = expanded;
        vals[worst] = fe;
      } else {
        pts[worst] = reflected;
        vals[worst] = fr;
      }
    } else if (fr < vals[second_worst]) {
      pts[worst] = reflected;
      vals[worst] = fr;
    } else {
      const bool outside = fr < vals[worst];
      const EulerAngles contracted = blend(centroid, outside ? reflected : pts[worst], 0.5);
      const double fc = f(contracted);
      ++evals;
      if (fc < (outside ? fr : vals[worst])) {
        pts[worst] = contracted;
        vals[worst] = fc;
      } else {
        for (int k = 0; k <= kDim; ++k) {
          if (k == best) continue;
          pts[k] = blend(pts[best], pts[k], 0.5);
          vals[k] = f(pts[k]);
          ++evals;
        }
      }
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  return {pts[static_cast<std::size_t>(it - vals.begin())], *it, evals, converged};
}

std::vector<EulerAngles> start_grid() {
  std::vector<EulerAngles> starts{{0.0, 0.0, 0.0}};
  const double pi = std::numbers::pi;
  for (double a : {0.0, pi}) {
    for (double b : {pi / 3, 2 * pi / 3, pi}) {
      for (double g : {0.0, pi / 2}) starts.push_back({a, b, g});
    }
  }
  return starts;
}

// Deterministic multi-start minimization; ties keep the earliest start.
SimplexResult minimize_local(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& h, int k, int budget) {
  const Eigen::Index dim = rho.rows();
  auto objective = [&](const EulerAngles& a) {
    const Eigen::MatrixXcd u = embed(rotation(a), k, dim);
    return (u * rho * u.adjoint() * h).trace().real();
  };
  SimplexResult best{{0, 0, 0}, objective({0, 0, 0}), 1, true};
  int total = best.evaluations;
  for (const auto& s : start_grid()) {
    SimplexResult r = nelder_mead(objective, s, budget);
    total += r.evaluations;
    if (r.value < best.value) best = r;
  }
  best.evaluations = total;
  return best;
}

}  // namespace

ResidualBound residual_bound(const Ensemble& post_measurement, const ChainModel& model, int site,
                             const ResidualOptions& options) {
  if (!model.calibrated()) throw std::invalid_argument("residual_bound needs a calibrated model");
  const OperatorSum h = localized_energy(model, site);
  std::vector<int> sites = h.support();
  if (std::find(sites.begin(), sites.end(), site) == sites.end()) {
    sites.push_back(site);
    std::sort(sites.begin(), sites.end());
  }
  const int k = static_cast<int>(std::find(sites.begin(), sites.end(), site) - sites.begin());
  const Eigen::MatrixXcd h_local = dense_matrix_on(h, sites);

  ResidualBound out{site, 0.0, expectation(post_measurement, h).real(), options.outcome_dependent, true, {}, 0};
  if (options.outcome_dependent) {
    for (const auto& b : post_measurement.branches()) {
      const DensityBlock rho = partial_trace(b.state, sites);
      const SimplexResult r = minimize_local(rho.matrix, h_local, k, options.budget);
      out.bound += b.weight * r.value;
      out.rotations.push_back(r.point);
      out.converged = out.converged && r.converged;
      out.evaluations += r.evaluations;
    }
  } else {
    const DensityBlock rho = partial_trace(post_measurement, sites);
    const SimplexResult r = minimize_local(rho.matrix, h_local, k, options.budget);
    out.bound = r.value;
    out.rotations.push_back(r.point);
    out.converged = r.converged;
    out.evaluations = r.evaluations;
  }
  return out;
}

}  // namespace qet
