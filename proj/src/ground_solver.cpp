#include "qet/ground_solver.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <tuple>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace qet {

ConvergenceError::ConvergenceError(int iterations, double best_residual)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "Krylov solver did not converge after " << iterations << " iterations (best residual "
           << best_residual << ")";
        return os.str();
      }()),
      iterations_(iterations),
      best_residual_(best_residual) {}

DegenerateGroundError::DegenerateGroundError(double gap)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "ground state is degenerate (gap " << gap << " < " << kDegeneracyGap << ")";
        return os.str();
      }()),
      gap_(gap) {}

namespace {

// Rotates the global phase so the largest-magnitude amplitude (lowest index
// among near-ties) is real and positive.
Eigen::VectorXcd fix_phase(Eigen::VectorXcd v) {
  const double biggest = v.cwiseAbs().maxCoeff();
  for (Eigen::Index b = 0; b < v.size(); ++b) {
    if (std::abs(v[b]) >= biggest - 1e-9) {
      v *= std::conj(v[b]) / std::abs(v[b]);
      break;
    }
  }
  return v;
}

double residual_norm(const ChainModel& model, const StateVector& g, double e0) {
  return (apply(model.total(), g) - cplx(e0) * g).norm();
}

}  // namespace

namespace {

// Basis states grouped into the sectors of prod_n sigma^z_n when every term
// flips an even number of spins, otherwise a single sector.
std::vector<std::vector<std::uint64_t>> parity_sectors(const OperatorSum& h, int n) {
  const std::uint64_t dim = std::uint64_t{1} << n;
  bool conserved = true;
  for (const auto& t : h.terms()) conserved = conserved && (std::popcount(t.x_mask()) % 2 == 0);
  std::vector<std::vector<std::uint64_t>> sectors(conserved ? 2 : 1);
  for (std::uint64_t b = 0; b < dim; ++b) sectors[conserved ? std::popcount(b) % 2 : 0].push_back(b);
  return sectors;
}

Eigen::MatrixXcd sector_matrix(const OperatorSum& h, const std::vector<std::uint64_t>& states,
                               const std::vector<Eigen::Index>& position) {
  static constexpr std::array<cplx, 4> kIPowers{cplx(1, 0), cplx(0, 1), cplx(-1, 0), cplx(0, -1)};
  const auto size = static_cast<Eigen::Index>(states.size());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(size, size);
  for (const auto& t : h.terms()) {
    const cplx phase = t.coefficient() * kIPowers[static_cast<std::size_t>(t.y_count() % 4)];
    for (Eigen::Index col = 0; col < size; ++col) {
      const std::uint64_t b = states[static_cast<std::size_t>(col)];
      const double sign = (std::popcount(b & t.z_mask()) & 1) ? -1.0 : 1.0;
      m(position[b ^ t.x_mask()], col) += phase * sign;
    }
  }
  return m;
}

struct SectorSolution {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
};

SectorSolution diagonalize(const Eigen::MatrixXcd& h) {
  if (h.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h.real());
    return {solver.eigenvalues(), solver.eigenvectors().cast<cplx>()};
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
  return {solver.eigenvalues(), solver.eigenvectors()};
}

}  // namespace

SpectrumSlice dense_spectrum(const ChainModel& model) {
  const int n = model.site_count();
  if (n > 12) throw std::invalid_argument("dense_spectrum is limited to N <= 12, got " + std::to_string(n));
  const Eigen::Index dim = Eigen::Index{1} << n;

  const auto sectors = parity_sectors(model.total(), n);
  std::vector<Eigen::Index> position(static_cast<std::size_t>(dim));
  for (const auto& states : sectors) {
    for (std::size_t k = 0; k < states.size(); ++k) position[states[k]] = static_cast<Eigen::Index>(k);
  }
  std::vector<SectorSolution> solved;
  for (const auto& states : sectors) solved.push_back(diagonalize(sector_matrix(model.total(), states, position)));

  // (value, sector, column), ascending; ties keep sector order.
  std::vector<std::tuple<double, std::size_t, Eigen::Index>> levels;
  for (std::size_t s = 0; s < solved.size(); ++s) {
    for (Eigen::Index k = 0; k < solved[s].values.size(); ++k) levels.emplace_back(solved[s].values[k], s, k);
  }
  std::stable_sort(levels.begin(), levels.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
  auto embed = [&](std::size_t s, Eigen::Index k) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim);
    for (std::size_t j = 0; j < sectors[s].size(); ++j) {
      v[static_cast<Eigen::Index>(sectors[s][j])] = solved[s].vectors(static_cast<Eigen::Index>(j), k);
    }
    return v;
  };

  SpectrumSlice out{.ground = StateVector(n)};
  out.eigenvalues.reserve(levels.size());
  for (const auto& l : levels) out.eigenvalues.push_back(std::get<0>(l));
  const double e0 = out.eigenvalues.front();
  out.gap = out.eigenvalues.size() > 1 ? out.eigenvalues[1] - e0 : std::numeric_limits<double>::infinity();
  out.spectral_width = out.eigenvalues.back() - e0;
  for (const auto& [value, s, k] : levels) {
    if (value - e0 >= kDegeneracyGap) break;
    out.ground_manifold.emplace_back(n, embed(s, k));
  }
  out.ground = StateVector(n, fix_phase(out.ground_manifold.front().amplitudes()));
  out.ground_manifold.front() = out.ground;
  out.residual = residual_norm(model, out.ground, e0);
  return out;
}

SpectrumSlice krylov_ground(const ChainModel& model, const KrylovOptions& options) {
  const int n = model.site_count();
  if (n > kMaxStateSites) throw std::invalid_argument("krylov_ground is limited to N <= 24");
  const OperatorSum& h = model.total();
  const Eigen::Index dim = Eigen::Index{1} << n;
  std::mt19937_64 rng(options.seed);

  auto fresh_direction = [&](const std::vector<Eigen::VectorXcd>& basis) -> std::optional<Eigen::VectorXcd> {
    for (int attempt = 0; attempt < 4; ++attempt) {
      Eigen::VectorXcd v = StateVector::random(n, rng).amplitudes();
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& q : basis) v -= q * q.dot(v);
      }
      if (const double nv = v.norm(); nv > 1e-8) return v / nv;
    }
    return std::nullopt;
  };

  std::vector<Eigen::VectorXcd> basis;
  std::vector<double> alpha;
  std::vector<double> beta;  // beta[k] couples basis[k] and basis[k+1]

  if (options.start) {
    if (options.start->site_count() != n) throw std::invalid_argument("start vector size mismatch");
    const double nv = options.start->norm();
    if (nv == 0.0) throw std::invalid_argument("zero start vector");
    basis.push_back(options.start->amplitudes() / nv);
  } else {
    basis.push_back(*fresh_direction({}));
  }

  const double inf = std::numeric_limits<double>::infinity();
  double prev0 = inf;
  double prev1 = inf;
  double best_residual = inf;
  int ground_converged_at = 0;
  Eigen::VectorXd ritz_values;
  Eigen::MatrixXd ritz_vectors;
  int steps = 0;
  bool converged = false;

  while (steps < options.max_iter) {
    const Eigen::Index k = static_cast<Eigen::Index>(basis.size()) - 1;
    Eigen::VectorXcd w = apply(h, StateVector(n, basis.back())).amplitudes();
    alpha.push_back(basis.back().dot(w).real());
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) w -= q * q.dot(w);
    }
    double b = w.norm();
    ++steps;

    const Eigen::Index m = k + 1;
    Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
    Eigen::VectorXd sub = m > 1 ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(beta.data(), m - 1))
                                : Eigen::VectorXd();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
    tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    ritz_values = tri.eigenvalues();
    ritz_vectors = tri.eigenvectors();

    const bool exhausted = (m == dim);
    const double res0 = exhausted ? 0.0 : std::abs(b * ritz_vectors(m - 1, 0));
    best_residual = std::min(best_residual, res0);
    const bool ground_ok = std::abs(ritz_values[0] - prev0) < options.tol && res0 < 10 * options.tol;
    if (ground_ok && ground_converged_at == 0) ground_converged_at = steps;
    if (m >= 2) {
      const double res1 = exhausted ? 0.0 : std::abs(b * ritz_vectors(m - 1, 1));
      const bool first_ok = std::abs(ritz_values[1] - prev1) < options.tol && res1 < 10 * options.tol;
      if ((ground_ok && first_ok) || exhausted) {
        converged = true;
        break;
      }
      prev1 = ritz_values[1];
    }
    prev0 = ritz_values[0];

    if (b < 1e-12) {
      // Invariant subspace found: continue in a fresh orthogonal direction.
      auto next = fresh_direction(basis);
      if (!next) {
        converged = true;
        break;
      }
      beta.push_back(0.0);
      basis.push_back(std::move(*next));
    } else {
      beta.push_back(b);
      basis.push_back(w / b);
    }
  }
  if (!converged) throw ConvergenceError(steps, best_residual);

  const Eigen::Index m = static_cast<Eigen::Index>(alpha.size());
  Eigen::VectorXcd g = Eigen::VectorXcd::Zero(dim);
  for (Eigen::Index j = 0; j < m; ++j) g += ritz_vectors(j, 0) * basis[static_cast<std::size_t>(j)];
  g.normalize();

  SpectrumSlice out{.eigenvalues = {ritz_values[0], ritz_values.size() > 1 ? ritz_values[1] : inf},
                    .ground = StateVector(n, fix_phase(std::move(g)))};
  out.gap = out.eigenvalues[1] - out.eigenvalues[0];
  out.ground_manifold = {out.ground};
  out.residual = residual_norm(model, out.ground, out.eigenvalues[0]);
  out.iterations = steps;
  out.ground_converged_at = ground_converged_at == 0 ? steps : ground_converged_at;
  return out;
}

SpectrumSlice solve_spectrum(const ChainModel& model, const SolverSettings& settings) {
  return settings.method == SolverMethod::dense ? dense_spectrum(model) : krylov_ground(model, settings.krylov);
}

namespace {

bool ground_space_well_defined(const ChainModel& model, const std::vector<StateVector>& manifold) {
  const auto k = static_cast<Eigen::Index>(manifold.size());
  for (const auto& t : model.local_terms()) {
    Eigen::MatrixXcd m(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) m(i, j) = matrix_element(manifold[i], t, manifold[j]);
    }
    const cplx mean = m.trace() / static_cast<double>(k);
    m.diagonal().array() -= mean;
    if (m.cwiseAbs().maxCoeff() > 1e-9) return false;
  }
  return true;
}

}  // namespace

GroundState solve_calibrated(const ChainModel& raw, const SolverSettings& settings, DegeneracyPolicy policy) {
  SpectrumSlice spectrum = solve_spectrum(raw, settings);
  if (spectrum.gap < kDegeneracyGap) {
    const bool accepted = policy == DegeneracyPolicy::accept_if_well_defined && spectrum.ground_manifold.size() > 1 &&
                          ground_space_well_defined(raw, spectrum.ground_manifold);
    if (!accepted) throw DegenerateGroundError(spectrum.gap);
  }
  ChainModel model = calibrate(raw, spectrum.ground);
  const double e0 = expectation(spectrum.ground, raw.total()).real();
  for (double& e : spectrum.eigenvalues) e -= e0;
  spectrum.residual = residual_norm(model, spectrum.ground, 0.0);
  return {std::move(model), std::move(spectrum), e0};
}

CorrelationScan correlation_scan(const ChainModel& model, const StateVector& ground, Axis a, Axis b, int origin) {
  const int n = model.site_count();
  if (model.site(origin) != origin) throw std::out_of_range("correlation origin outside the chain");
  const OperatorSum left(PauliTerm::single(origin, a));
  const double left_mean = expectation(ground, left).real();

  CorrelationScan scan;
  for (int d = 1; d <= n / 2; ++d) {
    const int s = model.site(origin + d);
    if (s < 0) break;
    const OperatorSum right(PauliTerm::single(s, b));
    const double c = expectation(ground, left * right).real() - left_mean * expectation(ground, right).real();
    scan.pairs.emplace_back(d, c);
  }

  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& [d, c] : scan.pairs) {
    if (std::abs(c) > 1e-10) {
      xs.push_back(d);
      ys.push_back(std::log(std::abs(c)));
    }
  }
  if (xs.size() < 2) return scan;

  const double count = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= count;
  my /= count;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  double ss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (my + slope * (xs[i] - mx));
    ss += r * r;
  }
  scan.status = FitStatus::fitted;
  scan.fitted_length = slope < 0 ? -1.0 / slope : std::numeric_limits<double>::infinity();
  scan.fit_residual = std::sqrt(ss / count);
  return scan;
}

}  // namespace qet
