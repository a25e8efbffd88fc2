#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "commands.hpp"

namespace fs = std::filesystem;
using namespace qet;
using namespace qet::cli;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "qet");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("qet_cli_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string config(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / (name + ".ini");
    std::ofstream(p) << text;
    return p.string();
  }
  std::string out(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json report(const std::string& dir) { return nlohmann::json::parse(slurp(fs::path(dir) / "report.json")); }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

const char* kCritical = R"(
[model]
n = 10
b = 1
h = 1

[protocol]
alice_site = 0
alice_direction = 1 0 0
bob_site = 3
bob_direction = 0 1 0
shots = 50
)";

}  // namespace

TEST(ConfigParse, MissingSiteCountNamesTheLine) {
  try {
    parse_config("[model]\nb = 1\nh = 1\n", "cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_NE(std::string(e.what()).find("cfg:2:"), std::string::npos) << e.what();
  }
}

TEST(ConfigParse, UnknownKeyAndDuplicateKeyAreLineNumbered) {
  try {
    parse_config("[model]\nn = 6\n\nfeild = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 4);
  }
  try {
    parse_config("[model]\nn = 6\nn = 8\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(parse_config("[modle]\nn = 6\n"), ConfigError);
  EXPECT_THROW(parse_config("[model]\nn = six\n"), ConfigError);
}

TEST(ConfigParse, SiteIndicesMustLieOnTheChain) {
  EXPECT_THROW(parse_config("[model]\nn = 6\n[protocol]\nalice_site = 0\nbob_site = 6\n"), ConfigError);
  EXPECT_THROW(parse_config("[model]\nn = 6\n[protocol]\nalice_site = -1\nbob_site = 3\n"), ConfigError);
}

TEST(ConfigParse, DirectionsAreRenormalizedWithWarning) {
  const RunConfig c = parse_config("[model]\nn = 8\n[protocol]\nalice_site = 0\nalice_direction = 2 0 0\nbob_site = 4\n");
  ASSERT_TRUE(c.protocol);
  EXPECT_DOUBLE_EQ(c.protocol->alice_direction[0], 1.0);
  EXPECT_EQ(c.warnings.size(), 1u);
  const RunConfig quiet = parse_config("[model]\nn = 8\n[protocol]\nalice_site = 0\nalice_direction = 1 0 0\nbob_site = 4\n");
  EXPECT_TRUE(quiet.warnings.empty());
}

TEST(ConfigParse, DenseSolverCapsTheChainLength) {
  EXPECT_THROW(parse_config("[model]\nn = 13\n"), ConfigError);
  EXPECT_NO_THROW(parse_config("[model]\nn = 13\n[solver]\nmethod = krylov\n"));
}

TEST(ConfigParse, CustomTermsExpandAcrossTheChain) {
  const RunConfig c = parse_config("[model]\nkind = custom\nn = 6\nboundary = open\n[custom]\nterm = -1 X0 X+1\n");
  const ChainModel m = build_model(c.model);
  // The bond off the right end is dropped on an open chain.
  int bonds = 0;
  for (const auto& t : m.local_terms()) bonds += static_cast<int>(t.size());
  EXPECT_EQ(bonds, 5);
}

TEST_F(CliTest, GroundPrintsCalibratedZero) {
  const auto r = run({"ground", "--config", config("g", "[model]\nn = 4\nb = 1\nh = 0\n"), "--out", out("o")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("E_0 = 0 "), std::string::npos) << r.out;
  const auto j = report(out("o"));
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["command"], "ground");
  EXPECT_EQ(j["config"]["model"]["N"], 4);
  EXPECT_DOUBLE_EQ(j["spectrum"]["ground_energy"].get<double>(), 0.0);
  EXPECT_DOUBLE_EQ(j["spectrum"]["spectral_width"].get<double>(), 8.0);
}

TEST_F(CliTest, KrylovAndDenseAgreeOnGroundEnergy) {
  const std::string model = "[model]\nn = 10\nb = 1\nh = 0.8\n";
  ASSERT_EQ(run({"ground", "--config", config("d", model), "--out", out("d")}).code, 0);
  ASSERT_EQ(run({"ground", "--config", config("k", model + "[solver]\nmethod = krylov\n"), "--out", out("k")}).code, 0);
  const double dense = report(out("d"))["spectrum"]["raw_ground_energy"];
  const double krylov = report(out("k"))["spectrum"]["raw_ground_energy"];
  EXPECT_NEAR(dense, krylov, 1e-8);
  EXPECT_FALSE(report(out("k"))["spectrum"].contains("spectral_width"));
}

TEST_F(CliTest, ExitCodes) {
  const auto missing = run({"ground", "--config", config("m", "[model]\nb = 1\n"), "--out", out("m")});
  EXPECT_EQ(missing.code, kExitConfig);
  EXPECT_NE(missing.err.find("m.ini:2: missing required key 'n'"), std::string::npos) << missing.err;
  EXPECT_FALSE(fs::exists(out("m")));

  // b = 0: the two fully polarized x states are exactly degenerate.
  EXPECT_EQ(run({"ground", "--config", config("deg", "[model]\nn = 6\nb = 0\nh = 1\n"), "--out", out("deg")}).code,
            kExitDegenerate);
  EXPECT_EQ(run({"ground", "--config",
                 config("nc", "[model]\nn = 10\n[solver]\nmethod = krylov\nmax_iter = 3\n"), "--out", out("nc")})
                .code,
            kExitNoConvergence);
  EXPECT_EQ(run({"protocol", "--config", config("close", "[model]\nn = 8\n[protocol]\nalice_site = 0\nbob_site = 2\n"),
                 "--out", out("close")})
                .code,
            kExitConfig);
  EXPECT_EQ(run({"frobnicate"}).code, kExitConfig);
  EXPECT_EQ(run({"ground", "--config", (dir_ / "absent.ini").string()}).code, kExitConfig);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST_F(CliTest, SeparableControlTeleportsNothing) {
  const auto r = run({"protocol", "--config",
                      config("s", "[model]\nkind = custom\nn = 8\n[custom]\nterm = -1 Z0\n"
                                  "[protocol]\nalice_site = 1\nalice_direction = 0.6 0 0.8\n"
                                  "bob_site = 5\nbob_direction = 0 1 0\n"),
                      "--out", out("s")});
  ASSERT_EQ(r.code, kExitOk) << r.err << r.out;
  const auto j = report(out("s"));
  EXPECT_NEAR(j["protocol"]["E_B"].get<double>(), 0.0, 1e-12);
  EXPECT_NEAR(j["protocol"]["eta"].get<double>(), 0.0, 1e-12);
}

TEST_F(CliTest, NearCriticalRunPassesEveryCheck) {
  const auto r = run({"protocol", "--config", config("c", kCritical), "--out", out("c")});
  ASSERT_EQ(r.code, kExitOk) << r.err << r.out;
  const auto j = report(out("c"));
  EXPECT_GT(j["protocol"]["E_B"].get<double>(), 0.0);
  EXPECT_TRUE(j["all_checks_passed"].get<bool>());
  for (const auto& c : j["checks"]) EXPECT_TRUE(c["passed"].get<bool>()) << c["name"];
  double p = 0.0;
  for (const auto& m : j["protocol"]["measurement"]) p += m["probability"].get<double>();
  EXPECT_NEAR(p, 1.0, 1e-12);
  for (const char* key : {"xi", "eta", "theta", "E_A", "E_B"}) EXPECT_TRUE(j["protocol"].contains(key)) << key;
  EXPECT_EQ(j["shots"]["count"], 50);

  const auto rows = read_csv(fs::path(out("c")) / "profile.csv");
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"site", "t_expect_step1", "t_expect_step3"}));
  // The CSV keeps every digit, and the step-3 energy around Bob sums to -E_B.
  double bob_window = 0.0;
  for (int n = 2; n <= 4; ++n) {
    EXPECT_EQ(std::stod(rows[n + 1][2]), j["profiles"]["step3"][n].get<double>());
    bob_window += std::stod(rows[n + 1][2]);
  }
  EXPECT_NEAR(bob_window, -j["protocol"]["E_B"].get<double>(), 1e-12);
}

TEST_F(CliTest, FormatFlagSelectsFiles) {
  ASSERT_EQ(run({"protocol", "--config", config("c", kCritical), "--out", out("j"), "--format", "json"}).code, 0);
  EXPECT_TRUE(fs::exists(fs::path(out("j")) / "report.json"));
  EXPECT_FALSE(fs::exists(fs::path(out("j")) / "profile.csv"));
  ASSERT_EQ(run({"protocol", "--config", config("c", kCritical), "--out", out("v"), "--format", "csv"}).code, 0);
  EXPECT_FALSE(fs::exists(fs::path(out("v")) / "report.json"));
  EXPECT_TRUE(fs::exists(fs::path(out("v")) / "profile.csv"));
  EXPECT_EQ(run({"protocol", "--config", config("c", kCritical), "--format", "xml"}).code, kExitConfig);
}

TEST_F(CliTest, ProtocolRunsAreByteIdentical) {
  const std::string cfg = config("c", kCritical);
  ASSERT_EQ(run({"protocol", "--config", cfg, "--out", out("a")}).code, 0);
  ASSERT_EQ(run({"protocol", "--config", cfg, "--out", out("b")}).code, 0);
  EXPECT_EQ(slurp(fs::path(out("a")) / "report.json"), slurp(fs::path(out("b")) / "report.json"));
  EXPECT_EQ(slurp(fs::path(out("a")) / "profile.csv"), slurp(fs::path(out("b")) / "profile.csv"));
  ASSERT_EQ(run({"protocol", "--config", cfg, "--out", out("s"), "--seed", "99"}).code, 0);
  EXPECT_NE(slurp(fs::path(out("a")) / "report.json"), slurp(fs::path(out("s")) / "report.json"));
}

TEST_F(CliTest, DistanceSweepDecays) {
  const auto r = run({"sweep", "--config",
                      config("d", "[model]\nn = 16\n[protocol]\nalice_site = 0\nalice_direction = 1 0 0\n"
                                  "bob_direction = 0 1 0\n[solver]\nmethod = krylov\n"
                                  "[sweep]\naxis = distance\ndistances = 3..7\n"),
                      "--out", out("d")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = read_csv(fs::path(out("d")) / "sweep.csv");
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"index", "distance", "b", "h", "phi", "xi", "eta", "theta", "E_A", "E_B"}));
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(std::stoi(rows[i][1]), static_cast<int>(i) + 2);
  for (std::size_t i = 2; i < rows.size(); ++i) {
    EXPECT_LT(std::abs(std::stod(rows[i][6])), std::abs(std::stod(rows[i - 1][6]))) << "d = " << rows[i][1];
    EXPECT_LT(std::stod(rows[i][9]), std::stod(rows[i - 1][9]));
  }
}

TEST_F(CliTest, CouplingSweepVanishesAtZeroCoupling) {
  const std::string cfg = config("h", "[model]\nn = 8\nb = 1\n[protocol]\nalice_site = 0\nbob_site = 4\n"
                                      "[sweep]\naxis = coupling-grid\ncouplings = 0, 0.25, 0.5, 0.75, 1, 1.25, 1.5\n");
  ASSERT_EQ(run({"sweep", "--config", cfg, "--out", out("one"), "--jobs", "1"}).code, 0);
  ASSERT_EQ(run({"sweep", "--config", cfg, "--out", out("three"), "--jobs", "3"}).code, 0);
  EXPECT_EQ(slurp(fs::path(out("one")) / "sweep.csv"), slurp(fs::path(out("three")) / "sweep.csv"));
  const auto rows = read_csv(fs::path(out("one")) / "sweep.csv");
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_EQ(std::stod(rows[1][3]), 0.0);
  EXPECT_NEAR(std::stod(rows[1][9]), 0.0, 1e-12);
  for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_GT(std::stod(rows[i][9]), 0.0) << "h = " << rows[i][3];
}

TEST_F(CliTest, AngleGridPeaksWhereTheQuadraticFormDoes) {
  const int points = 48;
  const auto r = run({"sweep", "--config",
                      config("a", "[model]\nn = 8\n[protocol]\nalice_site = 0\nbob_site = 3\n"
                                  "[sweep]\naxis = angle-grid\nangle_points = 48\nplane = 0 0 1; 0 1 0\n"),
                      "--out", out("a")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = read_csv(fs::path(out("a")) / "sweep.csv");
  ASSERT_EQ(rows.size(), static_cast<std::size_t>(points + 1));
  int best = 1;
  for (int i = 2; i <= points; ++i) {
    if (std::stod(rows[i][9]) > std::stod(rows[best][9])) best = i;
  }
  const double grid_phi = std::stod(rows[best][4]);

  // Independent route: xi is a quadratic form and eta a linear form in u_B, so
  // three axis runs plus one diagonal fix E_B(phi) everywhere on the circle.
  const GroundState gs = solve_calibrated(build_ising(8, 1.0, 1.0));
  const MeasurementSetup alice{0, {1, 0, 0}};
  const Direction e1{0, 0, 1};
  const Direction e2{0, 1, 0};
  const Direction diag{0, M_SQRT1_2, M_SQRT1_2};
  const auto k1 = protocol_constants(gs.spectrum.ground, gs.model, alice, 3, e1);
  const auto k2 = protocol_constants(gs.spectrum.ground, gs.model, alice, 3, e2);
  const auto kd = protocol_constants(gs.spectrum.ground, gs.model, alice, 3, diag);
  const double x11 = k1.xi;
  const double x22 = k2.xi;
  const double x12 = kd.xi - (x11 + x22) / 2;
  auto eb = [&](double phi) {
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    const double xi = c * c * x11 + s * s * x22 + 2 * c * s * x12;
    const double eta = c * k1.eta + s * k2.eta;
    return (std::sqrt(xi * xi + eta * eta) - xi) / 2;
  };
  double fine_phi = 0.0;
  for (int j = 0; j < 200000; ++j) {
    const double phi = std::numbers::pi * j / 200000;
    if (eb(phi) > eb(fine_phi)) fine_phi = phi;
  }
  // E_B(phi) = E_B(phi + pi), so compare modulo pi.
  const double step = 2 * std::numbers::pi / points;
  double diff = std::fmod(std::abs(grid_phi - fine_phi), std::numbers::pi);
  diff = std::min(diff, std::numbers::pi - diff);
  EXPECT_LE(diff, step) << grid_phi << " vs " << fine_phi;
  EXPECT_NEAR(std::stod(rows[best][9]), eb(grid_phi), 1e-12);
}

TEST_F(CliTest, EmptySweepGridIsAConfigError) {
  const auto r = run({"sweep", "--config",
                      config("e", "[model]\nn = 8\n[protocol]\nalice_site = 0\nbob_site = 4\n"
                                  "[sweep]\naxis = coupling-grid\n"),
                      "--out", out("e")});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("empty"), std::string::npos) << r.err;
}

TEST_F(CliTest, DistanceSweepRejectsBobInsideAlicesReach) {
  const auto r = run({"sweep", "--config",
                      config("d", "[model]\nn = 8\n[protocol]\nalice_site = 0\n[sweep]\naxis = distance\n"
                                  "distances = 2..4\n"),
                      "--out", out("d")});
  EXPECT_EQ(r.code, kExitConfig);
}

TEST_F(CliTest, VerifyAllPasses) {
  const auto r = run({"verify", "--out", out("v")});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  const auto j = report(out("v"));
  EXPECT_TRUE(j["passed"].get<bool>());
  std::set<std::string> modules;
  for (const auto& v : j["results"]) {
    const std::string id = v["id"];
    modules.insert(id.substr(0, id.find('/')));
  }
  EXPECT_EQ(modules.size(), verify_modules().size());
}

TEST_F(CliTest, VerifyScopeFiltersIdentifiers) {
  const auto r = run({"verify", "--scope", "qet-protocol", "--out", out("v")});
  EXPECT_EQ(r.code, kExitOk);
  const auto j = report(out("v"));
  ASSERT_FALSE(j["results"].empty());
  for (const auto& v : j["results"]) EXPECT_EQ(v["id"].get<std::string>().rfind("qet-protocol/", 0), 0u);
  EXPECT_EQ(run({"verify", "--scope", "nonsense"}).code, kExitConfig);
}

TEST_F(CliTest, BrokenCalibrationFailsVerify) {
  const auto r = run({"verify", "--inject-fault", "calibration", "--out", out("v")});
  EXPECT_EQ(r.code, kExitVerifyFailed);
  EXPECT_NE(r.out.find("FAIL chain-model/local-ground-expectation-zero"), std::string::npos) << r.out;
  const auto failed = report(out("v"))["failed"];
  EXPECT_NE(std::find(failed.begin(), failed.end(), "chain-model/local-ground-expectation-zero"), failed.end());
  // The fault is confined to the calibration invariants.
  for (const auto& id : failed) EXPECT_EQ(id.get<std::string>().rfind("chain-model/", 0), 0u);
}
