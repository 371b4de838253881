#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "convkernels/harness.hpp"
#include "convkernels/krr.hpp"

using namespace convkernels;

namespace {

InnerProductKernel poly_kernel(int q) { return gegenbauer_coeffs(KernelDescriptor::experiment_poly(), q); }

std::vector<BinarySignal> full_cube(int d) {
  std::vector<BinarySignal> all;
  for (uint64_t m = 0; m < (1ULL << d); ++m) all.push_back(BinarySignal::from_mask(m, d));
  return all;
}

// E_x (f*(x) - fhat(x))^2 by enumeration.
double enumerated_risk(const KRRModel& m, const FourierTarget& f) {
  auto all = full_cube(f.dim());
  Eigen::VectorXd p = m.predict(all);
  double s = 0;
  for (size_t i = 0; i < all.size(); ++i) {
    double e = f.evaluate(all[i]) - p[static_cast<long>(i)];
    s += e * e;
  }
  return s / static_cast<double>(all.size());
}

FourierTarget random_target(int d, std::mt19937_64& rng) {
  FourierTarget f(d);
  std::normal_distribution<double> g;
  for (int t = 0; t < 6; ++t) f.add(IndexSet::from_mask(rng() & ((1ULL << d) - 1), d), g(rng));
  return f;
}

}  // namespace

TEST(Target, NormAndEvaluate) {
  FourierTarget f(4);
  f.add(IndexSet::from_one_based({1, 2}, 4), 0.5);
  f.add(IndexSet::from_one_based({3}, 4), -2.0);
  EXPECT_DOUBLE_EQ(f.norm2(), 4.25);
  EXPECT_DOUBLE_EQ(f.evaluate(BinarySignal::from_string("--++")), 0.5 - 2.0);
  EXPECT_DOUBLE_EQ(f.coefficient(IndexSet::from_one_based({3}, 4)), -2.0);
  EXPECT_EQ(f.coefficient(IndexSet::from_one_based({4}, 4)), 0.0);
  EXPECT_THROW(f.add(IndexSet({0}, 5), 1.0), std::invalid_argument);
}

TEST(Fit, SinglePointInterpolation) {
  std::mt19937_64 rng(1);
  auto a = ConvArchitecture::ck_lp(10, 3, 2);
  auto k = poly_kernel(3);
  Dataset ds{{BinarySignal::random(10, rng)}, Eigen::VectorXd::Constant(1, 0.7), 0, 0};
  auto m = krr_fit(ds, a, k, 0.0);
  for (int t = 0; t < 20; ++t) {
    auto x = BinarySignal::random(10, rng);
    EXPECT_NEAR(m.predict(x), 0.7 * kernel_eval(a, k, x, ds.X[0]) / kernel_eval(a, k, ds.X[0], ds.X[0]), 1e-13);
  }
}

TEST(Fit, InterpolationResidual) {
  auto f = build_target(TargetSpec::lf_chain(3), 12);
  auto ds = sample_dataset(f, 60, 0.3, 2);
  for (double lam : {0.0, 1e-10}) {
    auto m = krr_fit(ds, ConvArchitecture::ck(12, 4), poly_kernel(4), lam);
    Eigen::VectorXd p = m.predict(ds.X);
    EXPECT_LE((p - ds.y).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Fit, RidgeResidual) {
  auto f = build_target(TargetSpec::lf_chain(3), 12);
  auto ds = sample_dataset(f, 80, 0.1, 3);
  auto a = ConvArchitecture::ck_gp(12, 4);
  auto k = poly_kernel(4);
  auto m = krr_fit(ds, a, k, 1e-3);
  auto G = gram_matrix(a, k, ds.X);
  Eigen::VectorXd r = G * m.alpha + 1e-3 * m.alpha - ds.y;
  EXPECT_LE(r.norm(), 1e-8 * ds.y.norm());
}

TEST(Fit, PermutationEquivariance) {
  auto f = build_target(TargetSpec::lf_chain(2), 10);
  auto ds = sample_dataset(f, 30, 0.2, 4);
  auto a = ConvArchitecture::ck_lp(10, 3, 2);
  auto k = poly_kernel(3);
  auto m = krr_fit(ds, a, k, 1e-2);
  Dataset rev = ds;
  std::reverse(rev.X.begin(), rev.X.end());
  rev.y = ds.y.reverse();
  auto mr = krr_fit(rev, a, k, 1e-2);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    auto x = BinarySignal::random(10, rng);
    EXPECT_NEAR(m.predict(x), mr.predict(x), 1e-12);
  }
}

TEST(Fit, ConflictingDuplicatesAtZeroRidge) {
  std::mt19937_64 rng(6);
  auto x = BinarySignal::random(8, rng);
  Dataset ds{{BinarySignal::random(8, rng), x, BinarySignal::random(8, rng), x}, Eigen::Vector4d(1, 2, 3, 4), 0, 0};
  try {
    krr_fit(ds, ConvArchitecture::ck(8, 3), poly_kernel(3), 0.0);
    FAIL();
  } catch (const std::domain_error& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("1"), std::string::npos);
    EXPECT_NE(msg.find("3"), std::string::npos);
  }
  ds.y[3] = 2;
  EXPECT_NO_THROW(krr_fit(ds, ConvArchitecture::ck(8, 3), poly_kernel(3), 0.0));
}

TEST(Fit, RepresenterOracle) {
  // minimize sum (f(x_i)-y_i)^2 + lambda ||f||_H^2 over f = sum_m c_m sqrt(mu_m) phi_m,
  // with (mu, phi) from the dense operator on the 64-point cube
  const int d = 6, q = 3, N = 64;
  auto a = ConvArchitecture::ck_lp(d, q, 2);
  auto k = poly_kernel(q);
  auto all = full_cube(d);
  Eigen::MatrixXd K = gram_matrix(a, k, all) / N;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  std::vector<int> keep;
  for (int i = 0; i < N; ++i)
    if (es.eigenvalues()[i] > 1e-12) keep.push_back(i);
  Eigen::MatrixXd Phi(N, keep.size());  // Phi(x, m) = sqrt(mu_m) phi_m(x), phi normalized in L2
  for (size_t c = 0; c < keep.size(); ++c)
    Phi.col(c) = std::sqrt(es.eigenvalues()[keep[c]]) * std::sqrt(N) * es.eigenvectors().col(keep[c]);

  auto f = build_target(TargetSpec::lf_chain(2), d);
  // distinct inputs, so lambda = 0 is well posed
  Dataset ds{{}, Eigen::VectorXd(20), 0.1, 7};
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int i = 0; i < 20; ++i) {
    ds.X.push_back(all[static_cast<size_t>(3 * i + 1)]);
    ds.y[i] = f.evaluate(ds.X.back()) + 0.1 * g(rng);
  }
  Eigen::MatrixXd F(20, keep.size());
  for (int i = 0; i < 20; ++i) F.row(i) = Phi.row(static_cast<long>(ds.X[i].mask()));
  for (double lam : {1e-3, 0.0}) {
    Eigen::VectorXd c;
    if (lam > 0) {
      Eigen::MatrixXd A = F.transpose() * F + lam * Eigen::MatrixXd::Identity(F.cols(), F.cols());
      c = A.ldlt().solve(F.transpose() * ds.y);
    } else {
      c = F.completeOrthogonalDecomposition().pseudoInverse() * ds.y;
    }
    auto m = krr_fit(ds, a, k, lam);
    Eigen::VectorXd p = m.predict(all);
    EXPECT_LE((p - Phi * c).cwiseAbs().maxCoeff(), 1e-8) << "lambda=" << lam;
  }
}

TEST(NestedSolver, MatchesDirectSolves) {
  std::mt19937_64 rng(8);
  std::vector<BinarySignal> X;
  for (int i = 0; i < 60; ++i) X.push_back(BinarySignal::random(10, rng));
  auto a = ConvArchitecture::ck_lp(10, 4, 2);
  auto k = poly_kernel(4);
  auto G = gram_matrix(a, k, X);
  Eigen::VectorXd y = Eigen::VectorXd::Random(60);
  NestedRidgeSolver s(G, 1e-4);
  for (int n : {1, 7, 30, 60}) {
    Eigen::MatrixXd A = G.topLeftCorner(n, n);
    A.diagonal().array() += 1e-4;
    Eigen::VectorXd want = A.ldlt().solve(y.head(n));
    EXPECT_LE((s.solve(y, n) - want).cwiseAbs().maxCoeff(), 1e-8 * want.cwiseAbs().maxCoeff());
  }
  EXPECT_THROW(s.solve(y, 61), std::invalid_argument);
  EXPECT_THROW(NestedRidgeSolver(G, 0.0), std::invalid_argument);
}

TEST(Risk, ZeroPredictorAndPerfectFit) {
  auto f = build_target(TargetSpec::lf_chain(3), 10);
  auto a = ConvArchitecture::ck_gp(10, 4);
  auto k = poly_kernel(4);
  KRRModel zero{a, k, {BinarySignal::from_mask(0, 10)}, Eigen::VectorXd::Zero(1), 0};
  EXPECT_NEAR(test_risk(zero, f, {}).risk, f.norm2(), 1e-14);
  // all 1024 points with lambda=0 recovers f* exactly (it lies in the span)
  Dataset ds{full_cube(10), Eigen::VectorXd(1024), 0, 0};
  for (int i = 0; i < 1024; ++i) ds.y[i] = f.evaluate(ds.X[i]);
  auto m = krr_fit(ds, a, k, 0.0);
  EXPECT_NEAR(test_risk(m, f, {}).risk, 0.0, 1e-10);
}

TEST(Risk, ExactMatchesEnumeration) {
  std::mt19937_64 rng(9);
  for (const auto& a : {ConvArchitecture::ck(10, 4), ConvArchitecture::ck_lp(10, 4, 3),
                        ConvArchitecture::ck_lp_ds(10, 4, 2, 2), ConvArchitecture::ck_gp(10, 3),
                        ConvArchitecture::gaussian(10, 3, 1.0), ConvArchitecture::non_overlapping(10, 2, 5),
                        ConvArchitecture::fc(10), ConvArchitecture::fc_gp(10)}) {
    auto k = poly_kernel(a.q);
    auto f = random_target(10, rng);
    f.add(IndexSet::from_one_based({1, 2}, 10), 1.0);
    auto ds = sample_dataset(f, 40, 0.2, rng());
    auto m = krr_fit(ds, a, k, 1e-2);
    EXPECT_NEAR(test_risk(m, f, {}).risk, enumerated_risk(m, f), 1e-10) << a.name();
  }
}

TEST(Risk, MonteCarloWithinFourStandardErrors) {
  std::mt19937_64 rng(10);
  int ok = 0;
  for (int t = 0; t < 20; ++t) {
    auto a = t % 2 ? ConvArchitecture::ck_lp(12, 4, 3) : ConvArchitecture::fc_gp(12);
    auto k = poly_kernel(a.q);
    auto f = random_target(12, rng);
    auto ds = sample_dataset(f, 30, 0.0, rng());
    auto m = krr_fit(ds, a, k, 1e-3);
    auto ex = test_risk(m, f, {});
    auto mc = test_risk(m, f, {RiskMode::Kind::MonteCarlo, 20000, rng()});
    EXPECT_GT(mc.stderr_, 0.0);
    ok += std::abs(ex.risk - mc.risk) <= 4 * mc.stderr_;
  }
  EXPECT_EQ(ok, 20);
}

TEST(Risk, HighFrequencyTargetInvisibleToGlobalPooling) {
  auto f = build_target(TargetSpec::hf_chain(3), 12);
  auto a = ConvArchitecture::ck_gp(12, 4);
  auto k = poly_kernel(4);
  for (int n : {10, 50, 200}) {
    auto ds = sample_dataset(f, n, 0.0, n);
    auto m = krr_fit(ds, a, k, 1e-6);
    EXPECT_GE(test_risk(m, f, {}).risk, f.norm2() - 1e-6);
  }
}

TEST(Risk, CyclicNullFitShrinksWithRidge) {
  auto f = build_target(TargetSpec::hf_chain(3), 12);
  auto a = ConvArchitecture::ck_gp(12, 4);
  auto k = poly_kernel(4);
  auto ds = sample_dataset(f, 80, 0.0, 11);
  FourierTarget zero(12);
  double prev = 1e300;
  for (double lam : {1e-4, 1e-2, 1.0, 100.0}) {
    auto m = krr_fit(ds, a, k, lam);
    double norm2 = test_risk(m, zero, {}).risk;
    EXPECT_LE(norm2, prev);
    prev = norm2;
  }
  EXPECT_LE(prev, 1e-3);
}

TEST(Risk, LargeFullPatchNeedsMonteCarlo) {
  Activation relu;
  auto k = ntk_from_activation(relu, 50).kernel;
  KRRModel m{ConvArchitecture::fc(50), k, {BinarySignal::from_mask(0, 50)}, Eigen::VectorXd::Ones(1), 0};
  try {
    test_risk(m, FourierTarget(50), {});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("mode basis too large; use monte-carlo"), std::string::npos);
  }
}

TEST(Risk, VarianceIdentity) {
  const int n = 40, seeds = 400;
  std::mt19937_64 rng(12);
  std::vector<BinarySignal> X;
  for (int i = 0; i < n; ++i) X.push_back(BinarySignal::random(10, rng));
  auto a = ConvArchitecture::ck_lp(10, 4, 2);
  auto k = poly_kernel(4);
  auto G = gram_matrix(a, k, X);
  const double lam = 1e-2;
  Eigen::MatrixXd A = G;
  A.diagonal().array() += lam;
  Eigen::MatrixXd S = G * A.inverse();
  const double expect = (S * S.transpose()).trace();
  FourierTarget zero(10);
  std::vector<double> e;
  for (int s = 0; s < seeds; ++s) {
    Dataset ds{X, Eigen::VectorXd(n), 1.0, 0};
    std::normal_distribution<double> g;
    for (int i = 0; i < n; ++i) ds.y[i] = g(rng);
    auto m = krr_fit_gram(ds, a, k, lam, G);
    e.push_back((G * m.alpha).squaredNorm());
  }
  double mean = 0, var = 0;
  for (double v : e) mean += v / seeds;
  for (double v : e) var += (v - mean) * (v - mean) / (seeds - 1);
  EXPECT_LE(std::abs(mean - expect), 4 * std::sqrt(var / seeds));
}

TEST(Shrinkage, LimitsAndMonotonicity) {
  auto a = ConvArchitecture::ck(12, 4);
  auto sp = spectrum(a, poly_kernel(4));
  auto f = build_target(TargetSpec::lf_chain(3), 12);
  auto big = shrinkage_predict(f, sp, 1e14, 0.0, 4);
  EXPECT_NEAR(big.risk, big.off_span, 1e-8);
  auto small = shrinkage_predict(f, sp, 1e-14, 1.0, 2);
  EXPECT_NEAR(small.risk, f.norm2(), 1e-8);
  double prev = 1e300;
  for (double n : {10.0, 100.0, 1000.0, 1e4}) {
    auto p = shrinkage_predict(f, sp, n, 1e-3, 2);
    for (double v : p.factors) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_LE(p.risk, prev + 1e-15);
    prev = p.risk;
  }
  EXPECT_NEAR(shrinkage_predict(f, sp, 100, 0.5, 4).lambda_eff, 0.5, 1e-15);
  EXPECT_NEAR(shrinkage_predict(f, sp, 100, 0.0, 1).lambda_eff, sp.tail_trace(1), 1e-15);
}

TEST(Shrinkage, CoefficientsAreShrunkTarget) {
  auto sp = spectrum(ConvArchitecture::ck(10, 3), poly_kernel(3));
  auto f = build_target(TargetSpec::lf_chain(2), 10);
  auto p = shrinkage_predict(f, sp, 50, 0.01, 1);
  double shift = p.lambda_eff / 50;
  for (const auto& [s, c] : f.coeffs()) {
    double lam = 0;
    for (const auto& e : sp.entries)
      if (e.kind == ModeKind::Parity && e.cls == s) lam = e.lambda;
    EXPECT_NEAR(p.coeffs.at(s), c * lam / (lam + shift), 1e-14);
  }
}

TEST(EffectiveDimension, Cases) {
  EXPECT_DOUBLE_EQ(effective_dimension(std::vector<double>{1.0, 1.0}, 1.0), 1.0);
  EXPECT_THROW(effective_dimension(std::vector<double>{1.0}, 0.0), std::invalid_argument);
  auto sp = spectrum(ConvArchitecture::ck(10, 4), gegenbauer_coeffs(KernelDescriptor::poly({1, 1, 1, 1, 1}), 4));
  EXPECT_NEAR(effective_dimension(sp, 1e-14), 10 * 8 + 1, 1e-6);
  EXPECT_LE(effective_dimension(sp, 1e12), 1e-9);
  double prev = 1e300;
  for (double lam : {1e-6, 1e-4, 1e-2, 1.0}) {
    double v = effective_dimension(sp, lam);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(EffectiveDimension, Pooled) {
  EXPECT_NEAR(pooled_effective_dim(kappa_weights(30, 30), 30, 2.0), 1.0, 1e-15);
  EXPECT_NEAR(pooled_effective_dim(kappa_weights(30, 1), 1, 3.0), 30.0, 1e-12);
  double v = pooled_effective_dim(kappa_weights(101, 10), 10, 2.0);
  double direct = 0;
  for (int j = 1; j <= 101; ++j) {
    double kj = 1;
    for (int k = 1; k < 10; ++k) kj += 2 * (1 - k / 10.0) * std::cos(2 * M_PI * j * k / 101);
    if (kj > 1e-12) direct += std::sqrt(kj / 10);
  }
  EXPECT_NEAR(v, direct, 1e-9);
  EXPECT_LE(v, 101 / std::sqrt(10.0));
  EXPECT_THROW(pooled_effective_dim(kappa_weights(10, 2), 2, 1.0), std::invalid_argument);
}
