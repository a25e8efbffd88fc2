#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "qet/chain_model.hpp"
#include "qet/energy_analysis.hpp"
#include "qet/ground_solver.hpp"

using namespace qet;

namespace {

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

ChainModel calibrated_ising(int n, double b, double h, Boundary boundary = Boundary::periodic) {
  const ChainModel raw = build_ising(n, b, h, boundary);
  const auto g = oracle::lowest(oracle::matrix(raw.total(), n));
  return calibrate(raw, StateVector(n, g.vector));
}

StateVector oracle_ground(const ChainModel& model) {
  return StateVector(model.site_count(), oracle::lowest(oracle::matrix(model.total(), model.site_count())).vector);
}

std::vector<PauliTerm> ising_terms(int n, int size, double b, double h) {
  return {PauliTerm::single(n, Axis::z, -b), PauliTerm(-h / 2, {{n, Axis::x}, {(n + 1) % size, Axis::x}}),
          PauliTerm(-h / 2, {{n, Axis::x}, {(n + size - 1) % size, Axis::x}})};
}

}  // namespace

TEST(BuildIsing, DecoupledFieldOnly) {
  const ChainModel m = build_ising(4, 1.0, 0.0);
  EXPECT_LT(max_abs(oracle::matrix(m.total(), 4) - oracle::ising_matrix(4, 1.0, 0.0, Boundary::periodic)), 1e-15);
  const auto g = oracle::lowest(oracle::matrix(m.total(), 4));
  EXPECT_NEAR(g.value, -4.0, 1e-12);
  EXPECT_NEAR(std::abs(g.vector[0]), 1.0, 1e-12);  // all up
  EXPECT_FALSE(m.calibrated());
  for (double s : m.shifts()) EXPECT_EQ(s, 0.0);
}

TEST(BuildIsing, EachBondCountedOnce) {
  for (auto boundary : {Boundary::periodic, Boundary::open}) {
    for (int n : {4, 5, 7}) {
      const ChainModel m = build_ising(n, 0.3, 1.0, boundary);
      EXPECT_LT(max_abs(oracle::matrix(m.total(), n) - oracle::ising_matrix(n, 0.3, 1.0, boundary)), 1e-14)
          << boundary_name(boundary) << " N=" << n;
    }
  }
}

TEST(BuildIsing, OpenEndsDropMissingNeighbor) {
  const ChainModel m = build_ising(5, 1.0, 2.0, Boundary::open);
  EXPECT_EQ(m.local_term(0).size(), 2u);
  EXPECT_EQ(m.local_term(2).size(), 3u);
  EXPECT_EQ(m.local_term(4).support(), (std::vector<int>{3, 4}));
  EXPECT_EQ(m.site(-1), -1);
  EXPECT_EQ(m.site(5), -1);
  EXPECT_EQ(m.window(0, 1), (std::vector<int>{0, 1}));
}

TEST(BuildIsing, Errors) {
  EXPECT_THROW(build_ising(2, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(parse_boundary("twisted"), std::invalid_argument);
  EXPECT_EQ(parse_boundary("open"), Boundary::open);
}

TEST(ChainModel, PeriodicGeometry) {
  const ChainModel m = build_ising(8, 1.0, 1.0);
  EXPECT_EQ(m.site(-1), 7);
  EXPECT_EQ(m.site(9), 1);
  EXPECT_EQ(m.distance(0, 7), 1);
  EXPECT_EQ(m.distance(1, 5), 4);
  EXPECT_EQ(m.window(0, 1), (std::vector<int>{7, 0, 1}));
}

TEST(ChainModel, LocalTermSupportStaysInWindow) {
  for (auto boundary : {Boundary::periodic, Boundary::open}) {
    const ChainModel m = build_ising(7, 0.7, 1.3, boundary);
    for (int n = 0; n < 7; ++n) {
      const auto w = m.window(n, m.range());
      for (int s : m.local_term(n).support()) EXPECT_NE(std::find(w.begin(), w.end(), s), w.end());
    }
  }
}

TEST(BuildCustom, IsingThroughFactoryMatches) {
  const int n = 6;
  const ChainModel direct = build_ising(n, 0.9, 1.2);
  const ChainModel custom = build_custom(n, 1, Boundary::periodic, [&](int s) { return ising_terms(s, n, 0.9, 1.2); });
  for (int s = 0; s < n; ++s) {
    EXPECT_LT(max_abs(oracle::matrix(direct.local_term(s) - custom.local_term(s), n)), 1e-15);
  }
}

TEST(BuildCustom, RejectsNonHermitianAndNonLocalTerms) {
  EXPECT_THROW(build_custom(6, 1, Boundary::periodic,
                            [](int s) { return std::vector<PauliTerm>{PauliTerm::single(s, Axis::x, cplx(0, 1))}; }),
               std::invalid_argument);
  EXPECT_THROW(build_custom(12, 1, Boundary::periodic,
                            [](int s) { return std::vector<PauliTerm>{PauliTerm::single(s, Axis::x, cplx(0, 1))}; }),
               std::invalid_argument);
  EXPECT_THROW(build_custom(6, 1, Boundary::periodic,
                            [](int s) {
                              return std::vector<PauliTerm>{PauliTerm(1.0, {{s, Axis::z}, {(s + 2) % 6, Axis::z}})};
                            }),
               std::invalid_argument);
  EXPECT_THROW(build_custom(6, 1, Boundary::open,
                            [](int s) { return std::vector<PauliTerm>{PauliTerm::single((s + 1) % 6, Axis::z)}; }),
               std::invalid_argument);
}

TEST(BuildCustom, NonHermitianProductOfHermitianFactorsIsRejected) {
  // X Y on neighbors is Hermitian; i X Y is not even though each factor is.
  EXPECT_NO_THROW(build_custom(6, 1, Boundary::periodic, [](int s) {
    return std::vector<PauliTerm>{PauliTerm(1.0, {{s, Axis::x}, {(s + 1) % 6, Axis::y}})};
  }));
  EXPECT_THROW(build_custom(6, 1, Boundary::periodic,
                            [](int s) {
                              return std::vector<PauliTerm>{PauliTerm(cplx(0, 1), {{s, Axis::x}, {(s + 1) % 6, Axis::y}})};
                            }),
               std::invalid_argument);
}

TEST(Calibrate, ProductStateShifts) {
  const ChainModel m = calibrated_ising(4, 1.0, 0.0);
  ASSERT_TRUE(m.calibrated());
  for (int n = 0; n < 4; ++n) {
    EXPECT_NEAR(m.shifts()[n], -1.0, 1e-12);
    // T_n = -Z_n + 1
    const OperatorSum expected = OperatorSum::identity(1.0) + OperatorSum(PauliTerm::single(n, Axis::z, -1.0));
    EXPECT_LT(max_abs(oracle::matrix(m.local_term(n) - expected, 4)), 1e-12);
  }
}

TEST(Calibrate, CriticalChainZeroesEveryLocalExpectation) {
  const ChainModel raw = build_ising(8, 1.0, 1.0);
  const StateVector g = oracle_ground(raw);
  const ChainModel m = calibrate(raw, g);
  for (int n = 0; n < 8; ++n) {
    EXPECT_LT(std::abs(expectation(g, m.local_term(n))), 1e-9);
    EXPECT_LT(std::abs(expectation(g, localized_energy(m, n))), 1e-9);
    EXPECT_NEAR(m.shifts()[n], m.shifts()[0], 1e-9);
  }
  EXPECT_LT(apply(m.total(), g).norm(), 1e-7);
  EXPECT_LT(std::abs(expectation(g, m.total())), 1e-8);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(oracle::matrix(m.total(), 8));
  EXPECT_GT(es.eigenvalues()[0], -1e-8);
}

TEST(Calibrate, RejectsNonEigenstate) {
  const ChainModel raw = build_ising(6, 1.0, 1.0);
  std::mt19937_64 rng(1);
  EXPECT_THROW(calibrate(raw, StateVector::random(6, rng)), std::invalid_argument);
  EXPECT_THROW(calibrate(raw, StateVector(5)), std::invalid_argument);
}

TEST(Calibrate, ShiftedFixtureBreaksCalibration) {
  const ChainModel m = calibrated_ising(6, 1.0, 1.0);
  const StateVector g = oracle_ground(m);
  const ChainModel broken = shift_local_term(m, 2, 0.25);
  EXPECT_NEAR(expectation(g, broken.local_term(2)).real(), -0.25, 1e-9);
  EXPECT_LT(std::abs(expectation(g, broken.local_term(3))), 1e-9);
}

TEST(Calibrate, RandomThreeLocalModelsSatisfyInvariants) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> gauss;
  std::uniform_int_distribution<int> pick(1, 3);
  const int n = 6;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::vector<PauliTerm>> terms(n);
    for (int s = 0; s < n; ++s) {
      for (int k = 0; k < 4; ++k) {
        std::map<int, Axis> f;
        for (int d = -1; d <= 1; ++d) {
          if (rng() % 2) f.emplace((s + d + n) % n, static_cast<Axis>(pick(rng) - 1));
        }
        terms[s].emplace_back(gauss(rng), f);
      }
    }
    const ChainModel raw = build_custom(n, 1, Boundary::periodic, [&](int s) { return terms[s]; });
    const auto g = oracle::lowest(oracle::matrix(raw.total(), n));
    const ChainModel m = calibrate(raw, StateVector(n, g.vector));
    const StateVector gs(n, g.vector);
    for (int s = 0; s < n; ++s) EXPECT_LT(std::abs(expectation(gs, m.local_term(s))), 1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(oracle::matrix(m.total(), n));
    EXPECT_GT(es.eigenvalues()[0], -1e-8);
    EXPECT_LT(apply(m.total(), gs).norm(), 1e-7);
  }
}

TEST(LocalizedEnergy, SumsNeighborTerms) {
  const ChainModel m = calibrated_ising(8, 1.0, 1.0);
  const OperatorSum expected = m.local_term(2) + m.local_term(3) + m.local_term(4);
  EXPECT_TRUE((localized_energy(m, 3) - expected).is_zero());
}

TEST(LocalizedEnergy, CommutesWithDistantSpins) {
  const ChainModel m = calibrated_ising(10, 1.0, 1.0);
  const OperatorSum h3 = localized_energy(m, 3);
  for (int site = 0; site < 10; ++site) {
    for (Axis a : {Axis::x, Axis::y, Axis::z}) {
      const bool distant = m.distance(site, 3) > 2 * m.range();
      const bool commutes = commutator(h3, OperatorSum(PauliTerm::single(site, a))).is_zero();
      if (distant) EXPECT_TRUE(commutes) << "site " << site;
    }
  }
}

TEST(RegionEnergy, WholeChainAndWidthRule) {
  const ChainModel m = calibrated_ising(6, 1.0, 1.0);
  EXPECT_TRUE((region_energy(m, {0, 5}) - m.total()).is_zero());
  EXPECT_THROW(region_energy(m, {2, 2}), std::invalid_argument);
  EXPECT_NO_THROW(region_energy(m, {2, 3}));
  EXPECT_TRUE((region_energy(m, {4, 1}) - (m.local_term(4) + m.local_term(5) + m.local_term(0) + m.local_term(1)))
                  .is_zero());
}

TEST(RegionEnergy, DisjointRegionsAddUp) {
  const ChainModel m = calibrated_ising(6, 1.0, 1.0);
  const StateVector g = oracle_ground(m);
  EXPECT_LT(std::abs(expectation(g, region_energy(m, {1, 3}))), 1e-9);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const StateVector psi = StateVector::random(6, rng);
    const double parts = expectation(psi, region_energy(m, {0, 1})).real() +
                         expectation(psi, region_energy(m, {2, 3})).real() +
                         expectation(psi, region_energy(m, {4, 5})).real();
    EXPECT_NEAR(parts, expectation(psi, m.total()).real(), 1e-10);
  }
}

TEST(ChainInvariants, AdditivityAndNonNegativityOnRandomStates) {
  std::mt19937_64 rng(77);
  for (double b : {0.5, 1.0}) {
    for (double h : {0.5, 1.5}) {
      const ChainModel m = calibrated_ising(8, b, h);
      for (int trial = 0; trial < 4; ++trial) {
        const StateVector psi = StateVector::random(8, rng);
        double sum = 0.0;
        for (const auto& t : m.local_terms()) sum += expectation(psi, t).real();
        const double total = expectation(psi, m.total()).real();
        EXPECT_NEAR(sum, total, 1e-10);
        EXPECT_GE(total, -1e-8);
      }
    }
  }
}

TEST(ChainInvariants, CorrelationConditionHasAWitness) {
  for (int n : {6, 8}) {
    const ChainModel m = calibrated_ising(n, 1.0, 1.0);
    const StateVector g = oracle_ground(m);
    double best = 0.0;
    for (int site = 0; site < n; ++site) {
      if (m.distance(0, site) < m.range() + 1) continue;
      for (Axis a : {Axis::x, Axis::y, Axis::z}) best = std::max(best, correlation_witness(m, g, 0, site, a));
    }
    EXPECT_GT(best, 1e-4) << "N=" << n;
  }
}

TEST(ChainInvariants, SigmaXWitnessVanishesByParity) {
  // T_n and the ground state are even under the global spin flip prod X,
  // while sigma^x_m is odd, so both terms of the connected correlator vanish.
  const ChainModel m = calibrated_ising(8, 1.0, 1.0);
  const StateVector g = oracle_ground(m);
  for (int site = 2; site <= 6; ++site) EXPECT_LT(correlation_witness(m, g, 0, site, Axis::x), 1e-12);
  EXPECT_GT(correlation_witness(m, g, 0, 3, Axis::z), 1e-4);
  EXPECT_THROW(correlation_witness(m, g, 0, 1, Axis::z), std::invalid_argument);
}

TEST(ChainInvariants, GroundStateIsNotALocalEigenstate) {
  for (int n : {6, 8}) {
    const ChainModel m = calibrated_ising(n, 1.0, 1.0);
    const StateVector g = oracle_ground(m);
    for (int s = 1; s < n - 1; ++s) {
      const StateVector tg = apply(m.local_term(s), g);
      EXPECT_GT((tg - expectation(g, m.local_term(s)) * g).norm(), 1e-3);
    }
  }
}
