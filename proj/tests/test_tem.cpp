#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace hoa;
using hoa::fixtures::vec;

namespace {

// q for a linear exponential family from information determinants alone,
// differencing the closed-form score.
double linear_family_q(const Model& m, const Fit& f, const ConstrainedFit& cf) {
  auto sc = [&](const RealVector& t) { return *m.score(t, m.data()); };
  const RealMatrix j_hat = -hessian_from_gradient(sc, f.theta_hat);
  const RealMatrix j_psi = -hessian_from_gradient(sc, cf.theta);
  const Eigen::Index p = j_hat.rows();
  return (f.theta_hat[0] - cf.psi) *
         std::sqrt(j_hat.determinant() / j_psi.bottomRightCorner(p - 1, p - 1).determinant());
}

RealMatrix random_matrix(std::mt19937_64& rng, Eigen::Index p) {
  std::normal_distribution<double> z;
  for (;;) {
    RealMatrix m(p, p);
    for (auto& v : m.reshaped()) v = z(rng);
    if (std::abs(m.determinant()) > 0.2) return m;
  }
}

ModelPtr regression_fixture() {
  return catalog("regression_scale", {{"df", 0.0}},
                 {{1.0, 1, 0.1}, {2.5, 1, 0.7}, {1.9, 1, 1.3}, {4.2, 1, 2.0}, {3.1, 1, 2.4},
                  {5.5, 1, 3.3}, {4.4, 1, 3.9}});
}

}  // namespace

// ---------------------------------------------------------------------------
// Directions

TEST(Directions, GammaRatioFromPivots) {
  auto m = fixtures::gamma_ratio_case();
  const auto d = directions_from_quantile(*m, fit_mle(*m));
  EXPECT_NEAR(d.V(0, 0), 3.0, 1e-8);
  EXPECT_NEAR(d.V(1, 0), -1.171875, 1e-8);
}

TEST(Directions, LocationScaleRegression) {
  auto m = catalog("regression_scale", {}, {{1.0}, {3.0}, {2.0}});
  const Fit f = fit_mle(*m);
  // V = [1, (y - mu_hat)/sigma_hat]
  const auto d = directions_from_quantile(*m, f);
  const double mu = 2.0, sigma = std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(f.theta_hat[0], mu, 1e-8);
  EXPECT_NEAR(f.theta_hat[1], sigma, 1e-8);
  const RealVector y = vec({1.0, 3.0, 2.0});
  for (Eigen::Index j = 0; j < 3; ++j) {
    EXPECT_NEAR(d.V(j, 0), 1.0, 1e-8);
    EXPECT_NEAR(d.V(j, 1), (y[j] - mu) / sigma, 1e-7);
  }
}

TEST(Directions, NumericPivotPathForPureLocation) {
  auto m = std::make_shared<fixtures::NormalMeanModel>(vec({0.4, -1.0, 2.2}));
  const auto d = directions_from_quantile(*m, fit_mle(*m));
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(d.V(j, 0), 1.0, 1e-8);
}

TEST(Directions, ZeroDensityNamesObservation) {
  auto m = std::make_shared<fixtures::FlatPivotModel>(vec({0.4, -1.0, 2.2}), 1);
  try {
    directions_from_quantile(*m, fit_mle(*m));
    FAIL() << "expected SingularityError";
  } catch (const SingularityError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(Directions, DiscreteAndContinuousAreNotInterchangeable) {
  auto pois = catalog("poisson_glm", {}, {{3.0}});
  auto cont = fixtures::gamma_ratio_case();
  EXPECT_THROW(directions_from_quantile(*pois, fit_mle(*pois)), UnsupportedError);
  EXPECT_THROW(directions_discrete(*cont, fit_mle(*cont)), UnsupportedError);
}

TEST(Directions, PoissonScalarCanonical) {
  auto m = catalog("poisson_glm", {}, {{3.0}});
  const Fit f = fit_mle(*m);
  const auto d = directions_discrete(*m, f);
  ASSERT_EQ(d.V.rows(), 1);
  EXPECT_NEAR(d.V(0, 0), 3.0, 1e-10);
  const auto cp = canonical_phi(m, d);
  for (double th : {-1.0, 0.0, 0.5, 1.0, 2.0}) EXPECT_NEAR(cp.phi(vec({th}))[0], 3.0 * th, 1e-10);
}

TEST(Directions, GlmBlocksAreExpectedInformationContributions) {
  auto m = catalog("poisson_glm", {}, {{2, 1, 0.0}, {3, 1, 0.5}, {6, 1, 1.0}, {7, 1, 1.5}});
  const Fit f = fit_mle(*m);
  const auto d = directions_discrete(*m, f);
  RealMatrix total = RealMatrix::Zero(2, 2);
  for (Eigen::Index j = 0; j < 4; ++j) total += d.block(j);
  // sum of blocks = expected information = observed information (canonical link)
  EXPECT_LT((total - f.obs_info).cwiseAbs().maxCoeff(), 1e-6);
}

// ---------------------------------------------------------------------------
// Canonical parameter

TEST(CanonicalPhi, GammaRatio) {
  auto m = fixtures::gamma_ratio_case();
  const Fit f = fit_mle(*m);
  const auto cp = canonical_phi(m, default_directions(*m, f));
  EXPECT_NEAR(cp.phi(vec({1.0}))[0], -1.828125, 1e-10);
}

TEST(CanonicalPhi, ExpPairIsNaturalParameter) {
  auto m = fixtures::exp_pair_case();
  const Fit f = fit_mle(*m);
  const auto cp = canonical_phi(m, default_directions(*m, f));
  for (const auto& th : {vec({2.0, 0.5}), vec({1.0, 2.0 / 3.0}), vec({3.5, 0.1})}) {
    EXPECT_NEAR(cp.phi(th)[0], -th[0] * th[1], 1e-12);
    EXPECT_NEAR(cp.phi(th)[1], -th[1], 1e-12);
  }
}

TEST(CanonicalPhi, NumericMatchesClosedFormSampleDerivatives) {
  for (const auto& m : fixtures::catalog_fixtures()) {
    if (m->response() != ResponseKind::continuous) continue;
    SCOPED_TRACE(m->id());
    const Fit f = fit_mle(*m);
    const auto d = default_directions(*m, f);
    const auto closed = canonical_phi(m, d);
    const auto numeric = canonical_phi(m, d, true);
    std::mt19937_64 rng(1);
    for (int k = 0; k < 5; ++k) {
      const RealVector th = fixtures::random_point(*m, f.theta_hat, rng);
      EXPECT_LT((closed.phi(th) - numeric.phi(th)).norm(), 1e-6 * (1 + closed.phi(th).norm()));
      EXPECT_LT((closed.dphi_dtheta(th) - numeric.dphi_dtheta(th)).cwiseAbs().maxCoeff(),
                1e-5 * (1 + closed.dphi_dtheta(th).cwiseAbs().maxCoeff()));
    }
  }
}

TEST(CanonicalPhi, AffineOnLinearFamily) {
  auto m = catalog("linexp_2par", {}, {{0.3}, {1.1}, {-0.4}, {2.2}, {0.8}, {1.5}});
  const Fit f = fit_mle(*m);
  const auto cp = canonical_phi(m, default_directions(*m, f), true);
  const RealVector a = f.theta_hat, b = a + vec({0.3, -0.1});
  const RealVector mid = 0.5 * (a + b);
  EXPECT_LT((cp.phi(mid) - 0.5 * (cp.phi(a) + cp.phi(b))).norm(), 1e-8);
}

// ---------------------------------------------------------------------------
// Departure measures

TEST(ChiProjection, ExpPairAtOne) {
  auto m = fixtures::exp_pair_case();
  const Fit f = fit_mle(*m);
  const auto cp = canonical_phi(m, default_directions(*m, f));
  const auto cf = fit_constrained(*m, 1.0, f.theta_hat);
  const auto chi = chi_projection(cp, f, cf);
  EXPECT_NEAR(std::abs(chi.u[0]), 1.0 / std::sqrt(2.0), 1e-10);
  EXPECT_NEAR(chi.u[0], -chi.u[1], 1e-10);
  EXPECT_NEAR(std::abs(chi.chi_hat - chi.chi_psi), 1.0 / std::sqrt(8.0), 1e-10);
  // u is orthogonal to the nuisance tangent of phi at theta_hat_psi
  EXPECT_NEAR(chi.u.dot(cp.dphi_dtheta(cf.theta).col(1)), 0.0, 1e-10);
}

TEST(ChiProjection, EqualAtEstimate) {
  auto m = fixtures::exp_pair_case();
  const Fit f = fit_mle(*m);
  const auto cp = canonical_phi(m, default_directions(*m, f));
  const auto chi = chi_projection(cp, f, fit_constrained(*m, 2.0, f.theta_hat));
  EXPECT_NEAR(chi.chi_hat, chi.chi_psi, 1e-8);
}

TEST(QGeneral, ExpPairAgainstOracle) {
  auto m = fixtures::exp_pair_case();
  const Fit f = fit_mle(*m);
  const auto cp = canonical_phi(m, default_directions(*m, f));
  const double q = q_general(*m, cp, f, fit_constrained(*m, 1.0, f.theta_hat));
  EXPECT_NEAR(q, std::sqrt(2.0) / 3.0, 1e-10);
  EXPECT_NEAR(q, brute_force_q28(*m, 1.0), 1e-8);
  EXPECT_NEAR(q_general(*m, cp, f, fit_constrained(*m, 2.0, f.theta_hat)), 0.0, 1e-8);
  EXPECT_THROW(q_general(*fixtures::gamma_ratio_case(), cp, f, ConstrainedFit{}), UnsupportedError);
}

TEST(QGeneral, ReducesOnLinearFamily) {
  for (const auto& m : {catalog("linexp_2par", {}, {{0.3}, {1.1}, {-0.4}, {2.2}, {0.8}, {1.5}}),
                        catalog("poisson_glm", {}, {{2, 1, 0.0}, {3, 1, 0.5}, {6, 1, 1.0},
                                                    {7, 1, 1.5}, {12, 1, 2.0}})}) {
    SCOPED_TRACE(m->id());
    const Pipeline pipe(m);
    const auto& f = pipe.fit();
    const RealVector grid = pipe.auto_grid(20, 3.0);
    for (double psi : grid) {
      const auto cf = fit_constrained(*m, psi, f.theta_hat);
      const double q = q_general(*m, pipe.canonical(), f, cf);
      // the oracle differences the score numerically, about 1e-9 noise
      EXPECT_NEAR(q, linear_family_q(*m, f, cf), 1e-8 * (1 + std::abs(q)));
    }
  }
}

TEST(QGeneral, InvariantUnderDirectionChange) {
  std::mt19937_64 rng(77);
  for (const auto& m : {fixtures::exp_pair_case(), regression_fixture()}) {
    SCOPED_TRACE(m->id());
    const Fit f = fit_mle(*m);
    const Directions d0 = default_directions(*m, f);
    const Pipeline base(m, f, d0);
    const double psi = base.psi_hat() + 1.5 * base.std_error();
    const double q0 = base.evaluate(psi).q;
    for (int k = 0; k < 10; ++k) {
      Directions d = d0;
      d.V = d0.V * random_matrix(rng, static_cast<Eigen::Index>(m->dim()));
      const Pipeline other(m, f, d);
      EXPECT_NEAR(other.evaluate(psi).q, q0, 1e-8 * (1 + std::abs(q0)));
    }
  }
}

TEST(QScalar, GammaRatioAtOne) {
  auto m = fixtures::gamma_ratio_case();
  const Fit f = fit_mle(*m);
  const auto cp = canonical_phi(m, default_directions(*m, f));
  EXPECT_NEAR(q_scalar(*m, cp, f, 1.0), 1.194126250, 1e-8);
  EXPECT_NEAR(q_scalar(*m, cp, f, f.theta_hat[0]), 0.0, 1e-12);
}

TEST(QScalar, EqualsWaldOnCanonicalFamily) {
  for (double y : {1.0, 3.0, 10.0}) {
    auto m = catalog("poisson_glm", {}, {{y}});
    const Fit f = fit_mle(*m);
    const auto cp = canonical_phi(m, default_directions(*m, f));
    for (double th : {-0.5, 0.3, 1.0, 2.0, 3.0}) {
      const double t = (f.theta_hat[0] - th) * std::sqrt(f.obs_info(0, 0));
      EXPECT_NEAR(q_scalar(*m, cp, f, th), t, 1e-10 * (1 + std::abs(t)));
    }
  }
}

// ---------------------------------------------------------------------------
// r* and Lugannani-Rice

TEST(Tail, ExpPairRstar) {
  const double r = std::sqrt(2.0 * std::log(9.0 / 8.0));
  const double q = std::sqrt(2.0) / 3.0;
  EXPECT_NEAR(rstar(r, q).value, 0.425277968, 1e-8);
}

TEST(Tail, GammaRatioAtOne) {
  EXPECT_NEAR(rstar(1.16189500386222506, 1.194126250).value, 1.185444851, 1e-8);
  EXPECT_NEAR(lugannani_rice(1.16189500386222506, 1.194126250).value, 0.882079629, 1e-8);
}

TEST(Tail, EqualPivotsReduceToFirstOrder) {
  for (double r : {-2.0, -0.3, 0.7, 3.0}) {
    EXPECT_DOUBLE_EQ(rstar(r, r).value, r);
    EXPECT_NEAR(lugannani_rice(r, r).value, normal_cdf(r), 1e-15);
  }
}

TEST(Tail, WindowAndSignMismatch) {
  EXPECT_TRUE(rstar(0.01, 0.02).interpolated);
  EXPECT_TRUE(std::isnan(rstar(0.01, 0.02).value));
  EXPECT_TRUE(lugannani_rice(-0.04, -0.02).interpolated);
  EXPECT_THROW(rstar(0.5, -0.5), SignMismatchError);
  EXPECT_THROW(lugannani_rice(-0.5, 0.2), SignMismatchError);
}

TEST(Tail, LugannaniRiceStaysAProbability) {
  for (double r : {-8.0, -3.0, -1.0, 1.0, 3.0, 8.0}) {
    for (double ratio : {0.2, 0.9, 1.1, 5.0}) {
      const double v = lugannani_rice(r, r * ratio).value;
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

// ---------------------------------------------------------------------------
// Pipeline and curves

TEST(Pipeline, GammaRatioPivotSet) {
  const Pipeline pipe(fixtures::gamma_ratio_case());
  const auto ps = pipe.evaluate(1.0);
  EXPECT_NEAR(ps.r, 1.161895004, 1e-8);
  EXPECT_NEAR(ps.q, 1.194126250, 1e-8);
  EXPECT_NEAR(ps.rstar, 1.185444851, 1e-8);
  EXPECT_NEAR(ps.lugannani_rice, 0.882079629, 1e-8);
  EXPECT_LE(std::abs(ps.phi_rstar - ps.lugannani_rice), 0.005);
  EXPECT_FALSE(ps.interpolated);
}

TEST(Pipeline, ExpPairPivotSet) {
  const Pipeline pipe(fixtures::exp_pair_case());
  const auto ps = pipe.evaluate(1.0);
  EXPECT_NEAR(ps.r, 0.485351492542, 1e-8);
  EXPECT_NEAR(ps.q, std::sqrt(2.0) / 3.0, 1e-8);
  EXPECT_NEAR(ps.rstar, 0.425277968, 1e-8);
  EXPECT_LT(pipe.evaluate(3.0).r, 0.0);
  EXPECT_THROW(pipe.evaluate(-1.0), UsageError);
}

TEST(Curve, GammaRatioShape) {
  auto m = fixtures::gamma_ratio_case();
  const auto c = significance_curve(m, RealVector::LinSpaced(41, 0.6, 4.0));
  ASSERT_EQ(c.points.size(), 41u);
  EXPECT_EQ(c.accuracy_order, 3);
  EXPECT_EQ(c.model_id, "gamma_ratio");
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    EXPECT_LE(c.points[i].phi_rstar, c.points[i - 1].phi_rstar + 1e-12);
    EXPECT_LE(c.points[i].lugannani_rice, c.points[i - 1].lugannani_rice + 1e-12);
  }
  std::size_t nearest = 0;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    if (std::abs(c.points[i].psi - 1.6) < std::abs(c.points[nearest].psi - 1.6)) nearest = i;
  }
  EXPECT_NEAR(c.points[nearest].phi_rstar, 0.5, 0.02);
}

TEST(Curve, WindowPointIsInterpolatedBetweenNeighbours) {
  const auto c = significance_curve(fixtures::gamma_ratio_case(), RealVector::LinSpaced(35, 0.6, 4.0));
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = c.points[i];
    if (!p.interpolated) continue;
    ++flagged;
    ASSERT_GT(i, 0u);
    ASSERT_LT(i + 1, c.points.size());
    EXPECT_TRUE(std::isfinite(p.rstar));
    EXPECT_LT(p.phi_rstar, c.points[i - 1].phi_rstar);
    EXPECT_GT(p.phi_rstar, c.points[i + 1].phi_rstar);
  }
  EXPECT_EQ(flagged, 1u);
  EXPECT_NEAR(c.points[4].psi, 1.0, 1e-12);
  EXPECT_NEAR(c.points[4].rstar, 1.185444851, 1e-8);
}

TEST(Curve, TooFewPointsOutsideWindow) {
  EXPECT_THROW(significance_curve(fixtures::gamma_ratio_case(), RealVector::LinSpaced(8, 1.599, 1.601)),
               NumericalError);
}

TEST(Curve, GridValidation) {
  auto m = fixtures::gamma_ratio_case();
  EXPECT_THROW(significance_curve(m, vec({1.0, 0.9, 2.0})), UsageError);
  EXPECT_THROW(significance_curve(m, vec({1.0})), UsageError);
}

TEST(Curve, DiscreteModelsReportSecondOrder) {
  auto m = catalog("poisson_glm", {}, {{2, 1, 0.0}, {3, 1, 0.5}, {6, 1, 1.0}, {7, 1, 1.5}});
  const Pipeline pipe(m);
  EXPECT_EQ(pipe.curve(pipe.auto_grid(15, 3.0)).accuracy_order, 2);
}

TEST(Curve, DigestTracksData) {
  auto a = significance_curve(fixtures::exp_pair_case(), vec({0.5, 1.0, 3.0, 4.0, 5.0}));
  auto b = significance_curve(fixtures::exp_pair_case(), vec({0.5, 1.0, 3.0, 4.0, 5.0}));
  auto c = significance_curve(catalog("exp_pair", {}, {{1.0}, {2.5}}), vec({0.5, 1.0, 3.0, 4.0, 5.0}));
  EXPECT_EQ(a.data_digest, b.data_digest);
  EXPECT_NE(a.data_digest, c.data_digest);
}

TEST(Curve, SignCoherenceAndTailAgreementOnCatalog) {
  for (const auto& m : fixtures::catalog_fixtures()) {
    SCOPED_TRACE(m->id());
    const Pipeline pipe(m);
    const auto c = pipe.curve(pipe.auto_grid(21, 2.5));
    for (const auto& p : c.points) {
      if (p.interpolated) continue;
      EXPECT_GT(p.r * p.q, 0.0) << "psi " << p.psi;
      // r* is shifted by the O(1/sqrt n) location correction, so its sign
      // follows r only away from the estimate
      if (std::abs(p.r) >= 1.0) {
        EXPECT_GT(p.r * p.rstar, 0.0) << "psi " << p.psi;
      }
      if (std::abs(p.r) >= 0.1) {
        EXPECT_LE(std::abs(p.phi_rstar - p.lugannani_rice), 0.01) << p.psi;
      }
    }
  }
}

TEST(Curve, RootInvariantUnderReparametrisation) {
  for (const auto& m : fixtures::catalog_fixtures()) {
    auto map = m->reparametrisation();
    if (!map) continue;
    SCOPED_TRACE(m->id());
    const Pipeline a(m);
    const Pipeline b(reparametrise(m));
    for (double k : {-2.0, -1.0, 1.5, 2.5}) {
      RealVector th = a.fit().theta_hat;
      th[0] += k * a.std_error();
      if (!m->admissible(th)) continue;
      const double psi2 = map->to(th)[0];
      EXPECT_NEAR(a.evaluate(th[0]).r, b.evaluate(psi2).r, 1e-8);
    }
  }
}

// ---------------------------------------------------------------------------
// Confidence intervals

TEST(Intervals, NestedByLevel) {
  const Pipeline pipe(fixtures::gamma_ratio_case());
  const auto c = pipe.curve(RealVector::LinSpaced(60, 0.3, 6.0));
  double prev = std::numeric_limits<double>::infinity();
  for (double level : {0.95, 0.9, 0.5}) {
    const auto iv = confidence_interval(c, level);
    EXPECT_LT(iv.lower, 1.6);
    EXPECT_GT(iv.upper, 1.6);
    EXPECT_LT(iv.upper - iv.lower, prev);
    prev = iv.upper - iv.lower;
  }
}

TEST(Intervals, EndpointsHitTheTarget) {
  const Pipeline pipe(fixtures::gamma_ratio_case());
  const auto c = pipe.curve(RealVector::LinSpaced(60, 0.3, 6.0));
  const auto iv = confidence_interval(c, 0.95);
  EXPECT_NEAR(pipe.evaluate(iv.lower).phi_rstar, 0.975, 1e-6);
  EXPECT_NEAR(pipe.evaluate(iv.upper).phi_rstar, 0.025, 1e-6);
  const auto ir = confidence_interval(c, 0.95, IntervalMethod::root);
  EXPECT_NEAR(pipe.evaluate(ir.lower).r, normal_quantile(0.975), 1e-5);
}

TEST(Intervals, ExpMeanCloseToExact) {
  auto m = catalog("exp_mean", {}, {{0.5}, {1.2}, {0.3}, {2.0}, {0.9}});
  const Pipeline pipe(m);
  const auto c = pipe.curve(pipe.auto_grid());
  const auto iv = confidence_interval(c, 0.95);
  const auto ex = exact_exp_mean_interval(m->data(), 0.95);
  EXPECT_NEAR(iv.lower / ex.lower, 1.0, 0.01);
  EXPECT_NEAR(iv.upper / ex.upper, 1.0, 0.01);
  const auto iw = confidence_interval(c, 0.95, IntervalMethod::wald);
  EXPECT_GT(std::abs(iw.upper / ex.upper - 1.0), std::abs(iv.upper / ex.upper - 1.0));
}

TEST(Intervals, UnbracketedTargetSuggestsWiderGrid) {
  const auto c = significance_curve(fixtures::gamma_ratio_case(), RealVector::LinSpaced(35, 0.6, 4.0));
  try {
    confidence_interval(c, 0.95, IntervalMethod::wald);
    FAIL() << "expected ExtendGridError";
  } catch (const ExtendGridError& e) {
    EXPECT_LT(e.suggested_lo(), 0.6);
  }
  EXPECT_THROW(confidence_interval(c, 1.0), UsageError);
}

TEST(Intervals, MethodNames) {
  for (auto m : {IntervalMethod::rstar, IntervalMethod::root, IntervalMethod::wald,
                 IntervalMethod::lugannani_rice}) {
    EXPECT_EQ(parse_method(method_name(m)), m);
  }
  EXPECT_THROW(parse_method("bogus"), UsageError);
}
