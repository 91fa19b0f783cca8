#pragma once

// Test-only models and wrappers.

#include <memory>
#include <random>

#include "hoa/hoa.hpp"

namespace hoa::fixtures {

// y_j ~ N(theta, 1). Pivot y - theta with no closed-form dy/dtheta, so the
// numeric pivot path is exercised.
class NormalMeanModel final : public Model {
 public:
  explicit NormalMeanModel(RealVector y) : Model(std::move(y)) {}
  std::string id() const override { return "normal_mean"; }
  std::size_t dim() const override { return 1; }
  std::vector<std::string> parameter_names() const override { return {"mu"}; }
  RealVector initial_theta() const override { return RealVector::Constant(1, 0.5); }
  double loglik(const RealVector& th, const RealVector& y) const override {
    return -0.5 * (y.array() - th[0]).square().sum();
  }
  bool has_pivot() const override { return true; }
  RealVector pivot(std::size_t, const RealVector& yb, const RealVector& th) const override {
    return RealVector::Constant(1, yb[0] - th[0]);
  }
  RealVector simulate(const RealVector& th, std::mt19937_64& rng) const override {
    std::normal_distribution<double> e(th[0], 1.0);
    RealVector y(data().size());
    for (Eigen::Index j = 0; j < y.size(); ++j) y[j] = e(rng);
    return y;
  }
  ModelPtr with_data(RealVector y) const override {
    return std::make_shared<NormalMeanModel>(std::move(y));
  }
};

// Forwards the likelihood and structure of a base model but hides every
// closed form, forcing numeric differentiation everywhere.
class NumericOnly final : public Model {
 public:
  explicit NumericOnly(ModelPtr base) : Model(base->data()), base_(std::move(base)) {}
  std::string id() const override { return base_->id() + "/numeric"; }
  std::size_t dim() const override { return base_->dim(); }
  std::vector<std::string> parameter_names() const override { return base_->parameter_names(); }
  ResponseKind response() const override { return base_->response(); }
  Box domain() const override { return base_->domain(); }
  RealVector initial_theta() const override { return base_->initial_theta(); }
  double loglik(const RealVector& th, const RealVector& y) const override {
    return base_->loglik(th, y);
  }
  std::size_t block_size() const override { return base_->block_size(); }
  bool has_pivot() const override { return base_->has_pivot(); }
  RealVector pivot(std::size_t b, const RealVector& yb, const RealVector& th) const override {
    return base_->pivot(b, yb, th);
  }
  RealVector mean(const RealVector& th) const override { return base_->mean(th); }
  bool has_mean() const override { return base_->has_mean(); }
  ModelPtr with_data(RealVector y) const override {
    return std::make_shared<NumericOnly>(base_->with_data(std::move(y)));
  }

 private:
  ModelPtr base_;
};

// Pivot that does not depend on y at observation `flat`, so d eps/dy = 0 there.
class FlatPivotModel final : public Model {
 public:
  FlatPivotModel(RealVector y, Eigen::Index flat) : Model(std::move(y)), flat_(flat) {}
  std::string id() const override { return "flat_pivot"; }
  std::size_t dim() const override { return 1; }
  std::vector<std::string> parameter_names() const override { return {"mu"}; }
  RealVector initial_theta() const override { return RealVector::Constant(1, 0.0); }
  double loglik(const RealVector& th, const RealVector& y) const override {
    return -0.5 * (y.array() - th[0]).square().sum();
  }
  bool has_pivot() const override { return true; }
  RealVector pivot(std::size_t b, const RealVector& yb, const RealVector& th) const override {
    if (static_cast<Eigen::Index>(b) == flat_) return RealVector::Constant(1, -th[0]);
    return RealVector::Constant(1, yb[0] - th[0]);
  }
  ModelPtr with_data(RealVector y) const override {
    return std::make_shared<FlatPivotModel>(std::move(y), flat_);
  }

 private:
  Eigen::Index flat_;
};

inline ModelPtr gamma_ratio_case() { return catalog("gamma_ratio", {{"s", 1.6}, {"a", 3.0}}); }
inline ModelPtr exp_pair_case() { return catalog("exp_pair", {}, {{1.0}, {2.0}}); }

inline RealVector vec(std::initializer_list<double> v) {
  RealVector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// One fixed data set per catalog model, for property sweeps.
inline std::vector<ModelPtr> catalog_fixtures() {
  return {
      gamma_ratio_case(),
      exp_pair_case(),
      catalog("bvn_corr", {}, {{0.3, 0.1}, {-1.2, -0.7}, {0.8, 1.4}, {1.5, 0.6}, {-0.2, 0.4},
                               {0.9, 0.2}, {-0.6, -1.1}, {0.1, -0.3}}),
      catalog("regression_scale", {{"df", 0.0}},
              {{1.0, 1, 0.1}, {2.5, 1, 0.7}, {1.9, 1, 1.3}, {4.2, 1, 2.0}, {3.1, 1, 2.4},
               {5.5, 1, 3.3}, {4.4, 1, 3.9}}),
      catalog("regression_scale", {{"df", 5.0}},
              {{1.0, 1, 0.1}, {2.5, 1, 0.7}, {1.9, 1, 1.3}, {4.2, 1, 2.0}, {3.1, 1, 2.4},
               {5.5, 1, 3.3}, {4.4, 1, 3.9}}),
      catalog("exp_mean", {}, {{0.5}, {1.2}, {0.3}, {2.0}, {0.9}}),
      catalog("linexp_2par", {}, {{0.3}, {1.1}, {-0.4}, {2.2}, {0.8}, {1.5}}),
      catalog("poisson_glm", {}, {{2, 1, 0.0}, {3, 1, 0.5}, {6, 1, 1.0}, {7, 1, 1.5}, {12, 1, 2.0}}),
      catalog("binomial_glm", {}, {{2, 10, 1, -1.0}, {4, 10, 1, 0.0}, {7, 10, 1, 1.0}, {9, 10, 1, 2.0}}),
  };
}

// Admissible point drawn around the MLE, at most a third of the way to the
// domain boundary so finite differences stay well conditioned.
inline RealVector random_point(const Model& m, const RealVector& centre, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int tries = 0; tries < 1000; ++tries) {
    RealVector th = centre;
    for (Eigen::Index k = 0; k < th.size(); ++k) th[k] += u(rng) * (0.2 + std::abs(th[k]));
    if (m.admissible(centre + 3.0 * (th - centre))) return th;
  }
  return centre;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace hoa::fixtures
