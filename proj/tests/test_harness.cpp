#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "convkernels/harness.hpp"

using namespace convkernels;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.d = 12;
  c.q = 4;
  c.omega = 3;
  c.delta = 3;
  c.archs = {"FC", "CK", "CK-LP", "CK-GP"};
  c.n_grid = {10, 40, 160};
  c.seeds = 2;
  c.lambda = 1e-6;
  c.master_seed = 42;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST(Targets, LowFrequencyChainSmall) {
  auto f = build_target(TargetSpec::lf_chain(2), 4);
  EXPECT_EQ(f.coeffs().size(), 4u);
  for (const auto& [s, c] : f.coeffs()) EXPECT_DOUBLE_EQ(c, 0.5);
  EXPECT_NEAR(f.norm2(), 1.0, 1e-15);
}

TEST(Targets, LowFrequencyChainFlagship) {
  auto f = build_target(TargetSpec::lf_chain(3), 30);
  EXPECT_EQ(f.coeffs().size(), 30u);
  for (const auto& [s, c] : f.coeffs()) {
    EXPECT_NEAR(c, 1 / std::sqrt(30.0), 1e-15);
    EXPECT_EQ(s.size(), 3);
  }
  EXPECT_NEAR(f.norm2(), 1.0, 1e-14);
}

TEST(Targets, HighFrequencyChainIsOrthogonalToCyclicAverages) {
  auto f = build_target(TargetSpec::hf_chain(3), 12);
  EXPECT_NEAR(f.norm2(), 1.0, 1e-14);
  // per orbit the coefficients sum to zero
  std::map<std::vector<int>, double> orbit;
  for (const auto& [s, c] : f.coeffs()) orbit[canonical_representative(s).members()] += c;
  for (const auto& [k, v] : orbit) EXPECT_NEAR(v, 0.0, 1e-14);
  EXPECT_THROW(build_target(TargetSpec::hf_chain(3), 11), std::invalid_argument);
}

TEST(Seeds, DeriveAndGrid) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
  EXPECT_NE(derive_seed(0, 0), derive_seed(0, 1));
  auto g = geometric_grid(10, 8000, 12);
  EXPECT_EQ(g.front(), 10);
  EXPECT_EQ(g.back(), 8000);
  for (size_t i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
  EXPECT_EQ(geometric_grid(1, 3, 10), (std::vector<int>{1, 2, 3}));
}

TEST(Curve, ZeroTargetGivesZeroRisk) {
  auto c = small_config();
  c.n_grid = {1};
  c.targets = {TargetSpec::zero()};
  auto t = run_learning_curve(c);
  ASSERT_FALSE(t.cells.empty());
  for (const auto& cell : t.cells) EXPECT_EQ(cell.risk, 0.0);
}

TEST(Curve, DeterministicOutput) {
  auto c = small_config();
  auto a = run_learning_curve(c);
  auto b = run_learning_curve(c);
  EXPECT_EQ(a.cells_csv(), b.cells_csv());
  EXPECT_EQ(a.summary_csv(), b.summary_csv());
  EXPECT_EQ(a.cells.size(), 4u * 3u * 2u);
  EXPECT_EQ(a.cells_csv().substr(0, a.cells_csv().find('\n')),
            "arch,kernel,target,n,seed,lambda,risk,risk_stderr,mode");
  EXPECT_EQ(a.summary_csv().substr(0, a.summary_csv().find('\n')), "arch,target,n,mean_risk,std_risk");
  c.master_seed = 43;
  EXPECT_NE(run_learning_curve(c).cells_csv(), a.cells_csv());
}

TEST(Curve, ThresholdOrderingAndDecrease) {
  auto c = small_config();
  c.n_grid = {10, 30, 100, 300};
  auto t = run_learning_curve(c);
  const std::string tg = c.targets[0].label();
  for (const auto& arch : {"CK-GP", "CK-LP", "CK"}) {
    double first = t.find(arch, tg, 10)->mean, last = t.find(arch, tg, 300)->mean;
    EXPECT_LT(last, first) << arch;
  }
  int gp = t.threshold("CK-GP", tg, 0.1), ck = t.threshold("CK", tg, 0.1), fc = t.threshold("FC", tg, 0.1);
  ASSERT_GT(gp, 0);
  EXPECT_TRUE(ck < 0 || gp <= ck);
  EXPECT_TRUE(fc < 0 || gp <= fc);
  EXPECT_EQ(t.threshold("CK-GP", tg, -1.0), -1);
}

TEST(Curve, ResourceGuard) {
  auto c = small_config();
  c.n_grid = {100000};
  c.memory_cap_gib = 1.0;
  EXPECT_THROW(run_learning_curve(c), ResourceGuardError);
}

TEST(Config, RoundTripAndPreset) {
  auto c = ExperimentConfig::paper_figure_1();
  auto r = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(r.to_json(), c.to_json());
  EXPECT_EQ(c.d, 30);
  EXPECT_EQ(c.n_grid.front(), 10);
  EXPECT_EQ(c.n_grid.back(), 8000);
  auto o = ExperimentConfig::from_json(json::parse(R"({"preset":"paper_figure_1","seeds":2,"archs":["CK"]})"));
  EXPECT_EQ(o.seeds, 2);
  EXPECT_EQ(o.archs, std::vector<std::string>{"CK"});
  EXPECT_EQ(o.d, 30);
}

TEST(Config, ValidationErrors) {
  auto c = small_config();
  c.archs = {"CK-XX"};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.lambda = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.n_grid = {};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.archs = {"CK-LP-DS"};
  c.delta = 5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Dump, WritesFiles) {
  auto dir = fs::temp_directory_path() / "convk_dump_test";
  fs::remove_all(dir);
  auto a = ConvArchitecture::ck_lp_ds(12, 4, 3, 3);
  auto k = gegenbauer_coeffs(KernelDescriptor::experiment_poly(), 4);
  auto files = dump_spectrum(a, k, dir.string(), {{1, 2}, 2000000});
  EXPECT_TRUE(fs::exists(dir / "spectrum.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "kappa.csv"));
  EXPECT_TRUE(fs::exists(dir / "pooling_eig_r1.csv"));
  EXPECT_TRUE(fs::exists(dir / "pooling_eig_r2.csv"));
  std::istringstream lines(slurp(dir / "spectrum.jsonl"));
  std::string line;
  double trace = 0;
  while (std::getline(lines, line)) {
    auto j = json::parse(line);
    trace += j.at("lambda").get<double>() * j.at("multiplicity").get<double>();
  }
  EXPECT_GT(trace, 0.0);
  fs::remove_all(dir);
}

TEST(Dump, KappaAtLargeDimension) {
  auto dir = fs::temp_directory_path() / "convk_kappa_test";
  fs::remove_all(dir);
  auto a = ConvArchitecture::ck_lp(101, 10, 7);
  auto k = gegenbauer_coeffs(KernelDescriptor::experiment_poly(), 10);
  dump_spectrum(a, k, dir.string(), {{}, 10});
  std::istringstream lines(slurp(dir / "kappa.csv"));
  std::string line, last;
  while (std::getline(lines, line))
    if (!line.empty()) last = line;
  EXPECT_EQ(last.substr(0, 4), "101,");
  EXPECT_NEAR(std::stod(last.substr(4)), 7.0, 1e-12);
  EXPECT_FALSE(fs::exists(dir / "spectrum.jsonl"));
  fs::remove_all(dir);
}

TEST(Verify, SmallSuitePassesQuickly) {
  auto t0 = std::chrono::steady_clock::now();
  auto rep = verify("all", "small");
  double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_TRUE(rep.pass()) << rep.to_json().dump(1);
  EXPECT_LT(s, 60.0);
  EXPECT_FALSE(rep.checks.empty());
  EXPECT_THROW(verify("nope", "small"), std::invalid_argument);
}
