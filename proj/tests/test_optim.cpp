#include <gtest/gtest.h>

#include "support.hpp"

using namespace hoa;
using hoa::fixtures::vec;

TEST(FitMle, GammaRatio) {
  auto m = fixtures::gamma_ratio_case();
  const Fit f = fit_mle(*m);
  EXPECT_NEAR(f.theta_hat[0], 1.6, 1e-8);
  EXPECT_NEAR(f.obs_info(0, 0), 2.34375, 1e-6);
  EXPECT_TRUE(f.converged);
}

TEST(FitMle, ExpPair) {
  auto m = fixtures::exp_pair_case();
  const Fit f = fit_mle(*m);
  EXPECT_NEAR(f.theta_hat[0], 2.0, 1e-8);
  EXPECT_NEAR(f.theta_hat[1], 0.5, 1e-8);
}

TEST(FitMle, NormalMean) {
  fixtures::NormalMeanModel m(vec({0.0, 0.0}));
  const Fit f = fit_mle(m);
  EXPECT_NEAR(f.theta_hat[0], 0.0, 1e-10);
  EXPECT_NEAR(f.obs_info(0, 0), 2.0, 1e-6);
}

TEST(FitMle, StationaryAndPositiveDefiniteOnCatalog) {
  for (const auto& m : fixtures::catalog_fixtures()) {
    SCOPED_TRACE(m->id());
    const Fit f = fit_mle(*m);
    EXPECT_LE(score_of(*m, f.theta_hat).norm(), 1e-6 * (1.0 + std::abs(f.loglik_max)));
    EXPECT_EQ(Eigen::LLT<RealMatrix>(f.obs_info).info(), Eigen::Success);
  }
}

TEST(FitMle, StartOutsideDomainIsUsageError) {
  auto m = fixtures::gamma_ratio_case();
  EXPECT_THROW(fit_mle(*m, vec({-1.0})), UsageError);
  EXPECT_THROW(fit_mle(*m, vec({1.0, 2.0})), UsageError);
}

TEST(FitMle, IterationLimitReportsLastIterate) {
  auto m = fixtures::exp_pair_case();
  NewtonOptions opt;
  opt.max_iterations = 1;
  try {
    fit_mle(*m, vec({0.3, 3.0}), opt);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.last_iterate().size(), 2u);
  }
}

TEST(FitMle, ZeroPoissonCountHasNoFiniteMaximum) {
  auto m = catalog("poisson_glm", {}, {{0.0}});
  EXPECT_THROW(fit_mle(*m), NumericalError);
}

TEST(FitConstrained, ExpPairNuisanceClosedForm) {
  auto m = fixtures::exp_pair_case();
  // lambda_hat_psi = 2 / (psi y1 + y2)
  EXPECT_NEAR(fit_constrained(*m, 1.0, vec({0.5})).lambda_hat_psi[0], 2.0 / 3.0, 1e-8);
  EXPECT_NEAR(fit_constrained(*m, 2.0, vec({0.1})).lambda_hat_psi[0], 0.5, 1e-8);
  const auto cf = fit_constrained(*m, 3.0, vec({2.0, 0.5}));
  EXPECT_NEAR(cf.lambda_hat_psi[0], 0.4, 1e-8);
  EXPECT_EQ(cf.theta.size(), 2);
  EXPECT_EQ(cf.info_lambda_block.rows(), 1);
}

TEST(FitConstrained, ScalarModelUnsupported) {
  auto m = fixtures::gamma_ratio_case();
  EXPECT_THROW(fit_constrained(*m, 1.0, vec({1.0})), UnsupportedError);
}

TEST(FitConstrained, InadmissiblePsi) {
  auto m = fixtures::exp_pair_case();
  EXPECT_THROW(fit_constrained(*m, -1.0, vec({0.5})), UsageError);
}

TEST(ProfileCurve, LikelihoodDropMatchesClosedForm) {
  auto m = fixtures::exp_pair_case();
  const auto cf = profile_curve(*m, vec({1.0, 2.0}));
  EXPECT_NEAR(cf[1].loglik - cf[0].loglik, std::log(9.0 / 8.0), 1e-9);
}

TEST(ProfileCurve, PeaksAtMaximumLikelihood) {
  for (const auto& m : fixtures::catalog_fixtures()) {
    if (m->dim() < 2) continue;
    SCOPED_TRACE(m->id());
    const Fit f = fit_mle(*m);
    const auto at_hat = fit_constrained(*m, f.theta_hat[0], f.theta_hat);
    EXPECT_NEAR(at_hat.loglik, f.loglik_max, 1e-9 * (1.0 + std::abs(f.loglik_max)));
  }
}

TEST(ProfileCurve, WarmStartedGridMatchesClosedForm) {
  auto m = fixtures::exp_pair_case();
  const RealVector grid = RealVector::LinSpaced(50, 0.3, 8.0);
  const auto cf = profile_curve(*m, grid);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    EXPECT_NEAR(cf[static_cast<std::size_t>(i)].lambda_hat_psi[0], 2.0 / (grid[i] * 1.0 + 2.0),
                1e-8);
  }
}

TEST(ProfileCurve, UnimodalOnCatalogGrids) {
  for (const auto& m : fixtures::catalog_fixtures()) {
    if (m->dim() < 2) continue;
    SCOPED_TRACE(m->id());
    const Pipeline pipe(m);
    const RealVector grid = pipe.auto_grid(31, 3.0);
    const auto cf = profile_curve(*m, grid, pipe.fit());
    std::size_t peak = 0;
    for (std::size_t i = 1; i < cf.size(); ++i) {
      if (cf[i].loglik > cf[peak].loglik) peak = i;
    }
    for (std::size_t i = 1; i <= peak; ++i) EXPECT_GE(cf[i].loglik, cf[i - 1].loglik - 1e-10);
    for (std::size_t i = peak + 1; i < cf.size(); ++i) EXPECT_LE(cf[i].loglik, cf[i - 1].loglik + 1e-10);
  }
}

TEST(ProfileCurve, GridMustIncrease) {
  auto m = fixtures::exp_pair_case();
  EXPECT_THROW(profile_curve(*m, vec({2.0, 1.0})), UsageError);
  EXPECT_THROW(profile_curve(*fixtures::gamma_ratio_case(), vec({1.0, 2.0})), UnsupportedError);
}
