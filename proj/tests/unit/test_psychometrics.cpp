#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "curio/errors.hpp"
#include "curio/psychometrics.hpp"

using namespace curio;
using namespace curio::psy;

namespace {

// Independent pooled-SD oracle: sample variances from whichever SD kind is stored.
double oracle_d(const SampleStats& a, const SampleStats& b) {
  auto var = [](const SampleStats& s) {
    const double n = static_cast<double>(s.n);
    return s.sd_kind == SdKind::Sample ? s.sd * s.sd : s.sd * s.sd * n / (n - 1.0);
  };
  const double na = static_cast<double>(a.n), nb = static_cast<double>(b.n);
  const double sp = std::sqrt(((na - 1) * var(a) + (nb - 1) * var(b)) / (na + nb - 2));
  return (a.mean - b.mean) / sp;
}

Eigen::MatrixXd implied_corr(const Eigen::VectorXd& lambda) {
  const Eigen::VectorXd theta = (1.0 - lambda.array().square()).matrix();
  return implied_matrix(lambda, theta);
}

}  // namespace

TEST(Summary, PopulationSd) {
  const std::vector<double> x = {2, 4, 4, 4, 5, 5, 7, 9};
  const auto s = summarize(x);
  EXPECT_EQ(s.n, 8u);
  EXPECT_DOUBLE_EQ(s.mean, 5.0);
  EXPECT_DOUBLE_EQ(s.sd, 2.0);
  EXPECT_EQ(s.sd_kind, SdKind::Population);
  EXPECT_THROW(summarize(std::vector<double>{}), PreconditionError);
}

TEST(CohensD, ReferenceModelAgainstHumanNorms) {
  // Model JE 6.58 +- 0.49 over 10 repetitions (population SD) vs the human
  // sample 5.03 +- 1.35, n = 483 (sample SD). Frozen from the oracle above.
  const SampleStats model{10, 6.58, 0.49, SdKind::Population};
  const SampleStats human{483, 5.03, 1.35, SdKind::Sample};
  EXPECT_NEAR(cohens_d(model, human), 1.157237373605639, 1e-12);
  EXPECT_NEAR(cohens_d(model, human), oracle_d(model, human), 1e-12);
}

TEST(CohensD, IdentityIsZero) {
  const SampleStats s{483, 5.03, 1.35, SdKind::Sample};
  EXPECT_EQ(cohens_d(s, s), 0.0);
}

TEST(CohensD, Preconditions) {
  EXPECT_THROW(cohens_d({1, 1.0, 0.5, SdKind::Sample}, {10, 1.0, 0.5, SdKind::Sample}), PreconditionError);
  EXPECT_THROW(cohens_d({5, 1.0, 0.0, SdKind::Sample}, {10, 2.0, 0.0, SdKind::Sample}), DegenerateSamples);
}

TEST(CohensD, RandomPairsMatchOracleAndSymmetries) {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> n(2, 600);
  std::uniform_real_distribution<double> mean(1.0, 7.0), sd(0.05, 3.0);
  for (int i = 0; i < 300; ++i) {
    const SampleStats a{static_cast<std::size_t>(n(gen)), mean(gen), sd(gen),
                        i % 2 ? SdKind::Sample : SdKind::Population};
    const SampleStats b{static_cast<std::size_t>(n(gen)), mean(gen), sd(gen), SdKind::Sample};
    const double d = cohens_d(a, b);
    EXPECT_NEAR(d, oracle_d(a, b), 1e-12);
    EXPECT_EQ(cohens_d(b, a), -d);
  }
}

TEST(PooledSd, EqualGroups) {
  const SampleStats a{10, 0.0, 2.0, SdKind::Sample};
  EXPECT_NEAR(pooled_sd(a, a), 2.0, 1e-15);
}

TEST(Correlation, MatchesHandComputation) {
  Eigen::MatrixXd data(4, 3);
  data << 1, 2, 4, 2, 4, 3, 3, 6, 2, 4, 8, 1;
  const auto r = sample_correlation(data);
  EXPECT_NEAR(r.values(0, 1), 1.0, 1e-12);
  EXPECT_NEAR(r.values(0, 2), -1.0, 1e-12);
  EXPECT_NO_THROW(r.validate());
}

TEST(Correlation, ZeroVarianceColumnIsDegenerate) {
  Eigen::MatrixXd data(3, 3);
  data << 1, 5, 2, 2, 5, 3, 3, 5, 1;
  try {
    sample_correlation(data);
    FAIL() << "expected PreconditionError";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("column 1"), std::string::npos);
  }
}

TEST(Omega, SpotValue) {
  const std::vector<double> l = {0.7, 0.7, 0.7, 0.7}, t = {0.51, 0.51, 0.51, 0.51};
  EXPECT_NEAR(mcdonalds_omega(l, t), 7.84 / 9.88, 1e-12);
}

TEST(Gradient, UlsMatchesCentralDifferences) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> lam(0.2, 0.95), th(0.05, 0.9);
  const Eigen::MatrixXd r = implied_corr(Eigen::Vector4d(0.8, 0.6, 0.7, 0.5));
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd l(4), t(4);
    for (int i = 0; i < 4; ++i) {
      l(i) = lam(gen);
      t(i) = th(gen);
    }
    const auto g = uls_gradient(r, l, t);
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd lp = l, lm = l;
      lp(i) += h;
      lm(i) -= h;
      const double fd = (uls_discrepancy(r, lp, t) - uls_discrepancy(r, lm, t)) / (2 * h);
      EXPECT_NEAR(g.loadings(i), fd, 1e-6 * std::max(1.0, std::abs(fd)));
      Eigen::VectorXd tp = t, tm = t;
      tp(i) += h;
      tm(i) -= h;
      const double fdt = (uls_discrepancy(r, l, tp) - uls_discrepancy(r, l, tm)) / (2 * h);
      EXPECT_NEAR(g.error_vars(i), fdt, 1e-6 * std::max(1.0, std::abs(fdt)));
    }
  }
}

TEST(Cfa, RecoversLoadingsFromImpliedMatrix) {
  const Eigen::Vector4d lambda(0.9, 0.75, 0.6, 0.45);
  const CovMatrix r{implied_corr(lambda), true};
  for (Estimator e : {Estimator::Uls, Estimator::Ml}) {
    FitConfig cfg;
    cfg.estimator = e;
    const auto fit = fit_single_factor_cfa(r, cfg);
    ASSERT_TRUE(fit.converged);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(fit.loadings(i), lambda(i), 1e-3);
    const double s = lambda.sum();
    const double theta = (1.0 - lambda.array().square()).sum();
    EXPECT_NEAR(mcdonalds_omega(fit), s * s / (s * s + theta), 1e-4);
  }
}

TEST(Cfa, SignConventionAndFloor) {
  const Eigen::Vector4d lambda(0.9, 0.8, 0.85, 0.95);
  const auto fit = fit_single_factor_cfa({implied_corr(lambda), true});
  EXPECT_GE(fit.loadings.sum(), 0.0);
  for (int i = 0; i < 4; ++i) EXPECT_GE(fit.error_vars(i), FitConfig{}.theta_floor);
}

TEST(Cfa, DeterministicAcrossCalls) {
  Eigen::MatrixXd r(4, 4);
  r << 1, 0.3, 0.2, 0.1, 0.3, 1, 0.25, 0.15, 0.2, 0.25, 1, 0.05, 0.1, 0.15, 0.05, 1;
  const auto a = fit_single_factor_cfa({r, true});
  const auto b = fit_single_factor_cfa({r, true});
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(Cfa, Preconditions) {
  EXPECT_THROW(fit_single_factor_cfa({Eigen::MatrixXd::Identity(2, 2), true}), PreconditionError);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(4, 4) * 2.0;
  EXPECT_THROW(fit_single_factor_cfa({cov, false}), PreconditionError);
}

TEST(Cfa, UnconvergedOmegaNeedsOptIn) {
  CFAFit fit;
  fit.loadings = Eigen::Vector4d(0.5, 0.5, 0.5, 0.5);
  fit.error_vars = Eigen::Vector4d(0.75, 0.75, 0.75, 0.75);
  fit.k = 4;
  fit.converged = false;
  EXPECT_THROW(mcdonalds_omega(fit), PreconditionError);
  EXPECT_NEAR(mcdonalds_omega(fit, true), 4.0 / 7.0, 1e-12);
}
