#pragma once

// Built-in models with closed-form likelihood pieces.
//
//   gamma_ratio      Y1/theta, Y2*theta independent gamma(shape); data are
//                    (y1, y2) = (a s, a/s) and loglik = -a(s/theta + theta/s).
//   exp_pair         y1 ~ Exp(rate lambda*psi), y2 ~ Exp(rate lambda).
//   bvn_corr         pairs from a standard bivariate normal, correlation theta.
//   regression_scale y = X beta + sigma e, e normal or Student t(df).
//   exp_mean         exponential sample with mean theta.
//   linexp_2par      normal sample in canonical coordinates
//                    (mu/sigma^2, -1/(2 sigma^2)).
//   poisson_glm      Poisson counts, log link.
//   binomial_glm     binomial counts, logit link.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "hoa/model.hpp"

namespace hoa {

using DataRows = std::vector<std::vector<double>>;

namespace detail {

inline double hyper_get(const HyperParams& h, const std::string& key, const std::string& model) {
  auto it = h.find(key);
  if (it == h.end()) throw UsageError(model + ": missing hyperparameter '" + key + "'");
  return it->second;
}

inline double hyper_or(const HyperParams& h, const std::string& key, double fallback) {
  auto it = h.find(key);
  return it == h.end() ? fallback : it->second;
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

inline double sum(const RealVector& v) { return v.sum(); }

}  // namespace detail

// ---------------------------------------------------------------------------

class GammaRatioModel final : public Model {
 public:
  // data = (y1, y2) = (a s, a/s)
  GammaRatioModel(RealVector data, double shape) : Model(std::move(data)), shape_(shape) {
    detail::require(this->data().size() == 2 && (this->data().array() > 0).all(),
                    "gamma_ratio: data must be two positive values");
    detail::require(shape_ > 0, "gamma_ratio: shape must be positive");
  }

  static std::shared_ptr<GammaRatioModel> from_s_a(double s, double a, double shape = 3.0) {
    detail::require(s > 0 && a > 0, "gamma_ratio: s and a must be positive");
    RealVector y(2);
    y << a * s, a / s;
    return std::make_shared<GammaRatioModel>(y, shape);
  }

  double s() const { return std::sqrt(data()[0] / data()[1]); }
  double a() const { return std::sqrt(data()[0] * data()[1]); }

  std::string id() const override { return "gamma_ratio"; }
  std::size_t dim() const override { return 1; }
  std::vector<std::string> parameter_names() const override { return {"theta"}; }
  HyperParams hyper() const override { return {{"s", s()}, {"a", a()}, {"shape", shape_}}; }
  Box domain() const override {
    return {RealVector::Constant(1, 0.0),
            RealVector::Constant(1, std::numeric_limits<double>::infinity())};
  }
  RealVector initial_theta() const override { return RealVector::Constant(1, 1.0); }

  double loglik(const RealVector& th, const RealVector& y) const override {
    return -y[0] / th[0] - y[1] * th[0];
  }
  std::optional<RealVector> score(const RealVector& th, const RealVector& y) const override {
    return RealVector::Constant(1, y[0] / (th[0] * th[0]) - y[1]);
  }
  std::optional<RealMatrix> loglik_hessian(const RealVector& th,
                                           const RealVector& y) const override {
    return RealMatrix::Constant(1, 1, -2.0 * y[0] / (th[0] * th[0] * th[0]));
  }
  std::optional<RealVector> loglik_dy(const RealVector& th, const RealVector&) const override {
    RealVector g(2);
    g << -1.0 / th[0], -th[0];
    return g;
  }
  std::optional<RealMatrix> loglik_dy_dtheta(const RealVector& th,
                                             const RealVector&) const override {
    RealMatrix m(2, 1);
    m << 1.0 / (th[0] * th[0]), -1.0;
    return m;
  }

  // Structural equations y1 = theta e1, y2 = e2 / theta.
  bool has_pivot() const override { return true; }
  RealVector pivot(std::size_t block, const RealVector& yb, const RealVector& th) const override {
    return RealVector::Constant(1, block == 0 ? yb[0] / th[0] : yb[0] * th[0]);
  }
  std::optional<RealMatrix> dy_dtheta(const RealVector& th) const override {
    RealMatrix v(2, 1);
    v << data()[0] / th[0], -data()[1] / th[0];
    return v;
  }

  RealVector simulate(const RealVector& th, std::mt19937_64& rng) const override {
    std::gamma_distribution<double> g(shape_, 1.0);
    RealVector y(2);
    y[0] = th[0] * g(rng);
    y[1] = g(rng) / th[0];
    return y;
  }
  ModelPtr with_data(RealVector y) const override {
    return std::make_shared<GammaRatioModel>(std::move(y), shape_);
  }
  std::optional<Reparametrisation> reparametrisation() const override {
    return Reparametrisation{{CoordinateMap::log}};
  }

 private:
  double shape_;
};

// ---------------------------------------------------------------------------

class ExpPairModel final : public Model {
 public:
  explicit ExpPairModel(RealVector y) : Model(std::move(y)) {
    detail::require(data().size() == 2 && (data().array() > 0).all(),
                    "exp_pair: data must be two positive values");
  }

  std::string id() const override { return "exp_pair"; }
  std::size_t dim() const override { return 2; }
  std::vector<std::string> parameter_names() const override { return {"psi", "lambda"}; }
  Box domain() const override {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {RealVector::Zero(2), RealVector::Constant(2, inf)};
  }
  RealVector initial_theta() const override {
    RealVector t(2);
    t << 1.0, 2.0 / data().sum();
    return t;
  }

  // theta = (psi, lambda)
  double loglik(const RealVector& th, const RealVector& y) const override {
    const double psi = th[0], lam = th[1];
    return 2.0 * std::log(lam) + std::log(psi) - lam * (psi * y[0] + y[1]);
  }
  std::optional<RealVector> score(const RealVector& th, const RealVector& y) const override {
    const double psi = th[0], lam = th[1];
    RealVector g(2);
    g << 1.0 / psi - lam * y[0], 2.0 / lam - (psi * y[0] + y[1]);
    return g;
  }
  std::optional<RealMatrix> loglik_hessian(const RealVector& th,
                                           const RealVector& y) const override {
    const double psi = th[0], lam = th[1];
    RealMatrix h(2, 2);
    h << -1.0 / (psi * psi), -y[0], -y[0], -2.0 / (lam * lam);
    return h;
  }
  std::optional<RealVector> loglik_dy(const RealVector& th, const RealVector&) const override {
    RealVector g(2);
    g << -th[1] * th[0], -th[1];
    return g;
  }
  std::optional<RealMatrix> loglik_dy_dtheta(const RealVector& th,
                                             const RealVector&) const override {
    RealMatrix m(2, 2);
    m << -th[1], -th[0], 0.0, -1.0;
    return m;
  }

  // F_j(y; rate) = 1 - exp(-rate y)
  bool has_pivot() const override { return true; }
  RealVector pivot(std::size_t block, const RealVector& yb, const RealVector& th) const override {
    const double rate = block == 0 ? th[1] * th[0] : th[1];
    return RealVector::Constant(1, -std::expm1(-rate * yb[0]));
  }
  std::optional<RealMatrix> dy_dtheta(const RealVector& th) const override {
    const double psi = th[0], lam = th[1];
    RealMatrix v(2, 2);
    v << -data()[0] / psi, -data()[0] / lam, 0.0, -data()[1] / lam;
    return v;
  }
  // n = p, so the identity spans the same directions and gives phi equal
  // to the canonical parameter -(lambda psi, lambda).
  std::optional<RealMatrix> preferred_directions(const RealVector&) const override {
    return RealMatrix::Identity(2, 2);
  }

  RealVector simulate(const RealVector& th, std::mt19937_64& rng) const override {
    RealVector y(2);
    y[0] = std::exponential_distribution<double>(th[1] * th[0])(rng);
    y[1] = std::exponential_distribution<double>(th[1])(rng);
    return y;
  }
  ModelPtr with_data(RealVector y) const override {
    return std::make_shared<ExpPairModel>(std::move(y));
  }
  std::optional<Reparametrisation> reparametrisation() const override {
    return Reparametrisation{{CoordinateMap::log, CoordinateMap::log}};
  }
};

// ---------------------------------------------------------------------------

class BvnCorrModel final : public Model {
 public:
  // data = (y11, y21, y12, y22, ...)
  explicit BvnCorrModel(RealVector y) : Model(std::move(y)) {
    detail::require(data().size() >= 2 && data().size() % 2 == 0,
                    "bvn_corr: data must hold a positive number of pairs");
  }

  std::size_t pairs() const { return size() / 2; }
  // (s, t) = (sum y1 y2, sum (y1^2 + y2^2)/2)
  std::pair<double, double> sufficient(const RealVector& y) const {
    double s = 0, t = 0;
    for (Eigen::Index j = 0; j + 1 < y.size(); j += 2) {
      s += y[j] * y[j + 1];
      t += 0.5 * (y[j] * y[j] + y[j + 1] * y[j + 1]);
    }
    return {s, t};
  }

  std::string id() const override { return "bvn_corr"; }
  std::size_t dim() const override { return 1; }
  std::vector<std::string> parameter_names() const override { return {"rho"}; }
  HyperParams hyper() const override { return {{"n", static_cast<double>(pairs())}}; }
  Box domain() const override {
    return {RealVector::Constant(1, -1.0), RealVector::Constant(1, 1.0)};
  }
  RealVector initial_theta() const override {
    const auto [s, t] = sufficient(data());
    return RealVector::Constant(1, t > 0 ? std::clamp(s / t, -0.9, 0.9) : 0.0);
  }

  double loglik(const RealVector& th, const RealVector& y) const override {
    const auto [s, t] = sufficient(y);
    const double r = th[0], d = 1.0 - r * r;
    return -0.5 * static_cast<double>(pairs()) * std::log(d) - (t - r * s) / d;
  }
  std::optional<RealVector> score(const RealVector& th, const RealVector& y) const override {
    const auto [s, t] = sufficient(y);
    const double r = th[0], d = 1.0 - r * r;
    const double n = static_cast<double>(pairs());
    return RealVector::Constant(1, n * r / d + s / d - 2.0 * r * (t - r * s) / (d * d));
  }
  std::optional<RealVector> loglik_dy(const RealVector& th, const RealVector& y) const override {
    const double r = th[0], d = 1.0 - r * r;
    RealVector g(y.size());
    for (Eigen::Index j = 0; j + 1 < y.size(); j += 2) {
      g[j] = -(y[j] - r * y[j + 1]) / d;
      g[j + 1] = -(y[j + 1] - r * y[j]) / d;
    }
    return g;
  }
  std::optional<RealMatrix> loglik_dy_dtheta(const RealVector& th,
                                             const RealVector& y) const override {
    const double r = th[0], d = 1.0 - r * r;
    RealMatrix m(y.size(), 1);
    for (Eigen::Index j = 0; j + 1 < y.size(); j += 2) {
      m(j, 0) = y[j + 1] / d - 2.0 * r * (y[j] - r * y[j + 1]) / (d * d);
      m(j + 1, 0) = y[j] / d - 2.0 * r * (y[j + 1] - r * y[j]) / (d * d);
    }
    return m;
  }

  // Signed roots of the chi-squared pivots (y1 +- y2)^2 / {2(1 +- theta)}.
  std::size_t block_size() const override { return 2; }
  bool has_pivot() const override { return true; }
  RealVector pivot(std::size_t, const RealVector& yb, const RealVector& th) const override {
    RealVector z(2);
    z << (yb[0] + yb[1]) / std::sqrt(2.0 * (1.0 + th[0])),
        (yb[0] - yb[1]) / std::sqrt(2.0 * (1.0 - th[0]));
    return z;
  }
  std::optional<RealMatrix> dy_dtheta(const RealVector& th) const override {
    const double r = th[0], d = 1.0 - r * r;
    const RealVector& y = data();
    RealMatrix v(y.size(), 1);
    for (Eigen::Index j = 0; j + 1 < y.size(); j += 2) {
      v(j, 0) = (y[j + 1] - r * y[j]) / (2.0 * d);
      v(j + 1, 0) = (y[j] - r * y[j + 1]) / (2.0 * d);
    }
    return v;
  }

  RealVector simulate(const RealVector& th, std::mt19937_64& rng) const override {
    std::normal_distribution<double> z(0.0, 1.0);
    RealVector y(data().size());
    const double c = std::sqrt(1.0 - th[0] * th[0]);
    for (Eigen::Index j = 0; j + 1 < y.size(); j += 2) {
      const double z1 = z(rng);
      const double z2 = z(rng);
      y[j] = z1;
      y[j + 1] = th[0] * z1 + c * z2;
    }
    return y;
  }
  ModelPtr with_data(RealVector y) const override {
    return std::make_shared<BvnCorrModel>(std::move(y));
  }
  std::optional<Reparametrisation> reparametrisation() const override {
    return Reparametrisation{{CoordinateMap::atanh}};
  }
};

// ---------------------------------------------------------------------------

class RegressionScaleModel final : public Model {
 public:
  // theta = (beta_1..beta_k, sigma); df = 0 selects normal errors.
  RegressionScaleModel(RealMatrix design, RealVector y, double df)
      : Model(std::move(y)), x_(std::move(design)), df_(df) {
    detail::require(x_.rows() == data().size(), "regression_scale: design/data size mismatch");
    detail::require(x_.cols() >= 1 && data().size() > x_.cols(),
                    "regression_scale: need more observations than coefficients");
    detail::require(df_ >= 0, "regression_scale: df must be non-negative");
    require_finite(x_, "regression_scale design");
  }

  const RealMatrix& design() const noexcept { return x_; }
  double df() const noexcept { return df_; }

  std::string id() const override { return "regression_scale"; }
  std::size_t dim() const override { return static_cast<std::size_t>(x_.cols()) + 1; }
  std::vector<std::string> parameter_names() const override {
    std::vector<std::string> names;
    for (Eigen::Index k = 0; k < x_.cols(); ++k) names.push_back("beta" + std::to_string(k + 1));
    names.push_back("sigma");
    return names;
  }
  HyperParams hyper() const override {
    return {{"df", df_}, {"k", static_cast<double>(x_.cols())}};
  }
  Box domain() const override {
    Box b = Box::unbounded(static_cast<Eigen::Index>(dim()));
    b.lower[b.lower.size() - 1] = 0.0;
    return b;
  }
  RealVector initial_theta() const override {
    const RealVector beta = x_.colPivHouseholderQr().solve(data());
    const RealVector res = data() - x_ * beta;
    double sigma = std::sqrt(res.squaredNorm() / static_cast<double>(data().size()));
    if (!(sigma > 0)) sigma = 1.0;
    RealVector t(dim());
    t.head(x_.cols()) = beta;
    t[x_.cols()] = sigma;
    return t;
  }

  double loglik(const RealVector& th, const RealVector& y) const override {
    const double sigma = th[th.size() - 1];
    const RealVector z = (y - x_ * th.head(x_.cols())) / sigma;
    double l = -static_cast<double>(y.size()) * std::log(sigma);
    for (Eigen::Index j = 0; j < z.size(); ++j) l += log_density(z[j]);
    return l;
  }
  std::optional<RealVector> score(const RealVector& th, const RealVector& y) const override {
    const Eigen::Index k = x_.cols();
    const double sigma = th[k];
    const RealVector z = (y - x_ * th.head(k)) / sigma;
    RealVector gz(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) gz[j] = dlog_density(z[j]);
    RealVector s(k + 1);
    s.head(k) = -x_.transpose() * gz / sigma;
    s[k] = -static_cast<double>(y.size()) / sigma - gz.dot(z) / sigma;
    return s;
  }
  std::optional<RealVector> loglik_dy(const RealVector& th, const RealVector& y) const override {
    const double sigma = th[th.size() - 1];
    const RealVector z = (y - x_ * th.head(x_.cols())) / sigma;
    RealVector g(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) g[j] = dlog_density(z[j]) / sigma;
    return g;
  }
  std::optional<RealMatrix> loglik_dy_dtheta(const RealVector& th,
                                             const RealVector& y) const override {
    const Eigen::Index k = x_.cols();
    const double sigma = th[k];
    const RealVector z = (y - x_ * th.head(k)) / sigma;
    RealMatrix m(y.size(), k + 1);
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      const double g1 = d2log_density(z[j]);
      m.row(j).head(k) = -g1 * x_.row(j) / (sigma * sigma);
      m(j, k) = -(g1 * z[j] + dlog_density(z[j])) / (sigma * sigma);
    }
    return m;
  }

  // Structural equation y = X beta + sigma e.
  bool has_pivot() const override { return true; }
  RealVector pivot(std::size_t block, const RealVector& yb, const RealVector& th) const override {
    const Eigen::Index k = x_.cols();
    const double mu = x_.row(static_cast<Eigen::Index>(block)).dot(th.head(k));
    return RealVector::Constant(1, (yb[0] - mu) / th[k]);
  }
  std::optional<RealMatrix> dy_dtheta(const RealVector& th) const override {
    const Eigen::Index k = x_.cols();
    RealMatrix v(x_.rows(), k + 1);
    v.leftCols(k) = x_;
    v.col(k) = (data() - x_ * th.head(k)) / th[k];
    return v;
  }

  RealVector simulate(const RealVector& th, std::mt19937_64& rng) const override {
    const Eigen::Index k = x_.cols();
    RealVector y = x_ * th.head(k);
    if (df_ > 0) {
      std::student_t_distribution<double> e(df_);
      for (Eigen::Index j = 0; j < y.size(); ++j) y[j] += th[k] * e(rng);
    } else {
      std::normal_distribution<double> e(0.0, 1.0);
      for (Eigen::Index j = 0; j < y.size(); ++j) y[j] += th[k] * e(rng);
    }
    return y;
  }
  ModelPtr with_data(RealVector y) const override {
    return std::make_shared<RegressionScaleModel>(x_, std::move(y), df_);
  }
  std::optional<Reparametrisation> reparametrisation() const override {
    std::vector<CoordinateMap> maps(dim(), CoordinateMap::identity);
    maps.back() = CoordinateMap::log;
    return Reparametrisation{maps};
  }

 private:
  double log_density(double z) const {
    if (df_ > 0) return -0.5 * (df_ + 1.0) * std::log1p(z * z / df_);
    return -0.5 * z * z;
  }
  double dlog_density(double z) const {
    if (df_ > 0) return -(df_ + 1.0) * z / (df_ + z * z);
    return -z;
  }
  double d2log_density(double z) const {
    if (df_ > 0) {
      const double q = df_ + z * z;
      return -(df_ + 1.0) * (df_ - z * z) / (q * q);
    }
    return -1.0;
  }

  RealMatrix x_;
  double df_;
};

// ---------------------------------------------------------------------------

class ExpMeanModel final : public Model {
 public:
  explicit ExpMeanModel(RealVector y) : Model(std::move(y)) {
    detail::require(data().size() >= 1 && (data().array() > 0).all(),
                    "exp_mean: data must be positive");
  }

  std::string id() const override { return "exp_mean"; }
  std::size_t dim() const override { return 1; }
  std::vector<std::string> parameter_names() const override { return {"mean"}; }
  HyperParams hyper() const override { return {{"n", static_cast<double>(size())}}; }
  Box domain() const override {
    return {RealVector::Constant(1, 0.0),
            RealVector::Constant(1, std::numeric_limits<double>::infinity())};
  }
  RealVector initial_theta() const override { return RealVector::Constant(1, data().mean()); }

  double loglik(const RealVector& th, const RealVector& y) const override {
    return -static_cast<double>(y.size()) * std::log(th[0]) - y.sum() / th[0];
  }
  std::optional<RealVector> score(const RealVector& th, const RealVector& y) const override {
    return RealVector::Constant(
        1, -static_cast<double>(y.size()) / th[0] + y.sum() / (th[0] * th[0]));
  }
  std::optional<RealMatrix> loglik_hessian(const RealVector& th,
                                           const RealVector& y) const override {
    const double n = static_cast<double>(y.size()), m = th[0];
    return RealMatrix::Constant(1, 1, n / (m * m) - 2.0 * y.sum() / (m * m * m));
  }
  std::optional<RealVector> loglik_dy(const RealVector& th, const RealVector& y) const override {
    return RealVector::Constant(y.size(), -1.0 / th[0]);
  }
  std::optional<RealMatrix> loglik_dy_dtheta(const RealVector& th,
                                             const RealVector& y) const override {
    return RealMatrix::Constant(y.size(), 1, 1.0 / (th[0] * th[0]));
  }

  // F(y; theta) = 1 - exp(-y/theta)
  bool has_pivot() const override { return true; }
  RealVector pivot(std::size_t, const RealVector& yb, const RealVector& th) const override {
    return RealVector::Constant(1, -std::expm1(-yb[0] / th[0]));
  }
  std::optional<RealMatrix> dy_dtheta(const RealVector& th) const override {
    return RealMatrix(data() / th[0]);
  }

  RealVector simulate(const RealVector& th, std::mt19937_64& rng) const override {
    std::exponential_distribution<double> e(1.0 / th[0]);
    RealVector y(data().size());
    for (Eigen::Index j = 0; j < y.size(); ++j) y[j] = e(rng);
    return y;
  }
  ModelPtr with_data(RealVector y) const override {
    return std::make_shared<ExpMeanModel>(std::move(y));
  }
  std::optional<Reparametrisation> reparametrisation() const override {
    return Reparametrisation{{CoordinateMap::log}};
  }
};

// ---------------------------------------------------------------------------

// Normal sample with canonical parameter theta = (mu/sigma^2, -1/(2 sigma^2)),
// so loglik = theta1 sum y + theta2 sum y^2 - n kappa(theta).
class LinExp2ParModel final : public Model {
 public:
  explicit LinExp2ParModel(RealVector y) : Model(std::move(y)) {
    detail::require(data().size() >= 3, "linexp_2par: need at least three observations");
    const double m = data().mean();
    detail::require((data().array() - m).abs().maxCoeff() > 0,
                    "linexp_2par: data must not be constant");
  }

  std::string id() const override { return "linexp_2par"; }
  std::size_t dim() const override { return 2; }
  std::vector<std::string> parameter_names() const override { return {"theta1", "theta2"}; }
  HyperParams hyper() const override { return {{"n", static_cast<double>(size())}}; }
  Box domain() const override {
    Box b = Box::unbounded(2);
    b.upper[1] = 0.0;
    return b;
  }
  RealVector initial_theta() const override {
    const double m = data().mean();
    const double v = (data().array() - m).square().mean();
    RealVector t(2);
    t << m / v, -0.5 / v;
    return t;
  }

  static double mean_of(const RealVector& th) { return -th[0] / (2.0 * th[1]); }
  static double sd_of(const RealVector& th) { return 1.0 / std::sqrt(-2.0 * th[1]); }

  double loglik(const RealVector& th, const RealVector& y) const override {
    const double n = static_cast<double>(y.size());
    const double kappa = -th[0] * th[0] / (4.0 * th[1]) - 0.5 * std::log(-2.0 * th[1]);
    return th[0] * y.sum() + th[1] * y.squaredNorm() - n * kappa;
  }
  std::optional<RealVector> score(const RealVector& th, const RealVector& y) const override {
    const double n = static_cast<double>(y.size());
    const double k1 = -th[0] / (2.0 * th[1]);
    const double k2 = th[0] * th[0] / (4.0 * th[1] * th[1]) - 1.0 / (2.0 * th[1]);
    RealVector g(2);
    g << y.sum() - n * k1, y.squaredNorm() - n * k2;
    return g;
  }
  // -n times the Hessian of kappa; free of y.
  std::optional<RealMatrix> loglik_hessian(const RealVector& th,
                                           const RealVector& y) const override {
    const double n = static_cast<double>(y.size());
    const double a = th[0], b = th[1];
    RealMatrix h(2, 2);
    h << -1.0 / (2.0 * b), a / (2.0 * b * b), a / (2.0 * b * b),
        -a * a / (2.0 * b * b * b) + 1.0 / (2.0 * b * b);
    return RealMatrix(-n * h);
  }
  std::optional<RealVector> loglik_dy(const RealVector& th, const RealVector& y) const override {
    return RealVector((th[0] + 2.0 * th[1] * y.array()).matrix());
  }
  std::optional<RealMatrix> loglik_dy_dtheta(const RealVector&,
                                             const RealVector& y) const override {
    RealMatrix m(y.size(), 2);
    m.col(0).setOnes();
    m.col(1) = 2.0 * y;
    return m;
  }

  // Standardised residual; dy/dtheta is left to the numeric construction.
  bool has_pivot() const override { return true; }
  RealVector pivot(std::size_t, const RealVector& yb, const RealVector& th) const override {
    return RealVector::Constant(1, (yb[0] - mean_of(th)) / sd_of(th));
  }

  RealVector simulate(const RealVector& th, std::mt19937_64& rng) const override {
    std::normal_distribution<double> e(mean_of(th), sd_of(th));
    RealVector y(data().size());
    for (Eigen::Index j = 0; j < y.size(); ++j) y[j] = e(rng);
    return y;
  }
  ModelPtr with_data(RealVector y) const override {
    return std::make_shared<LinExp2ParModel>(std::move(y));
  }
};

// ---------------------------------------------------------------------------

// Canonical-link GLM: loglik = sum y_j eta_j - w_j b(eta_j), eta = X theta.
class CanonicalGlmModel : public Model {
 public:
  CanonicalGlmModel(RealMatrix design, RealVector y, RealVector weights)
      : Model(std::move(y)), x_(std::move(design)), w_(std::move(weights)) {
    detail::require(x_.rows() == data().size() && w_.size() == data().size(),
                    "glm: design/data size mismatch");
    detail::require(x_.cols() >= 1, "glm: design needs at least one column");
    require_finite(x_, "glm design");
  }

  const RealMatrix& design() const noexcept { return x_; }
  const RealVector& weights() const noexcept { return w_; }

  std::size_t dim() const override { return static_cast<std::size_t>(x_.cols()); }
  std::vector<std::string> parameter_names() const override {
    std::vector<std::string> names;
    for (Eigen::Index k = 0; k < x_.cols(); ++k) names.push_back("beta" + std::to_string(k + 1));
    return names;
  }
  ResponseKind response() const override { return ResponseKind::discrete; }
  RealVector initial_theta() const override { return RealVector::Zero(x_.cols()); }

  double loglik(const RealVector& th, const RealVector& y) const override {
    const RealVector eta = x_ * th;
    double l = 0;
    for (Eigen::Index j = 0; j < eta.size(); ++j) l += y[j] * eta[j] - w_[j] * cumulant(eta[j]);
    return l;
  }
  std::optional<RealVector> score(const RealVector& th, const RealVector& y) const override {
    return RealVector(x_.transpose() * (y - mean(th)));
  }
  std::optional<RealMatrix> loglik_hessian(const RealVector& th, const RealVector&) const override {
    return RealMatrix(-x_.transpose() * *mean_dtheta(th));
  }
  // y treated as continuous in the likelihood expression.
  std::optional<RealVector> loglik_dy(const RealVector& th, const RealVector&) const override {
    return RealVector(x_ * th);
  }
  std::optional<RealMatrix> loglik_dy_dtheta(const RealVector&, const RealVector&) const override {
    return x_;
  }
  RealVector mean(const RealVector& th) const override {
    const RealVector eta = x_ * th;
    RealVector mu(eta.size());
    for (Eigen::Index j = 0; j < eta.size(); ++j) mu[j] = w_[j] * cumulant_d1(eta[j]);
    return mu;
  }
  bool has_mean() const override { return true; }
  // x_j w_j b''(eta_j) x_j^T summed over j gives the expected information.
  std::optional<RealMatrix> mean_dtheta(const RealVector& th) const override {
    const RealVector eta = x_ * th;
    RealMatrix d(x_.rows(), x_.cols());
    for (Eigen::Index j = 0; j < eta.size(); ++j) d.row(j) = w_[j] * cumulant_d2(eta[j]) * x_.row(j);
    return d;
  }

 protected:
  virtual double cumulant(double eta) const = 0;
  virtual double cumulant_d1(double eta) const = 0;
  virtual double cumulant_d2(double eta) const = 0;

  RealMatrix x_;
  RealVector w_;
};

class PoissonGlmModel final : public CanonicalGlmModel {
 public:
  PoissonGlmModel(RealMatrix design, RealVector y)
      : CanonicalGlmModel(std::move(design), y, RealVector::Ones(y.size())) {
    detail::require((data().array() >= 0).all(), "poisson_glm: counts must be non-negative");
  }
  std::string id() const override { return "poisson_glm"; }
  RealVector simulate(const RealVector& th, std::mt19937_64& rng) const override {
    const RealVector mu = mean(th);
    RealVector y(mu.size());
    for (Eigen::Index j = 0; j < y.size(); ++j) {
      y[j] = static_cast<double>(std::poisson_distribution<long>(mu[j])(rng));
    }
    return y;
  }
  ModelPtr with_data(RealVector y) const override {
    return std::make_shared<PoissonGlmModel>(x_, std::move(y));
  }

 protected:
  double cumulant(double eta) const override { return std::exp(eta); }
  double cumulant_d1(double eta) const override { return std::exp(eta); }
  double cumulant_d2(double eta) const override { return std::exp(eta); }
};

class BinomialGlmModel final : public CanonicalGlmModel {
 public:
  BinomialGlmModel(RealMatrix design, RealVector y, RealVector trials)
      : CanonicalGlmModel(std::move(design), std::move(y), std::move(trials)) {
    detail::require((data().array() >= 0).all() && (data().array() <= w_.array()).all() &&
                        (w_.array() > 0).all(),
                    "binomial_glm: need 0 <= y <= m and m > 0");
  }
  std::string id() const override { return "binomial_glm"; }
  RealVector simulate(const RealVector& th, std::mt19937_64& rng) const override {
    const RealVector eta = x_ * th;
    RealVector y(eta.size());
    for (Eigen::Index j = 0; j < y.size(); ++j) {
      const double pr = 1.0 / (1.0 + std::exp(-eta[j]));
      y[j] = static_cast<double>(
          std::binomial_distribution<long>(static_cast<long>(std::lround(w_[j])), pr)(rng));
    }
    return y;
  }
  ModelPtr with_data(RealVector y) const override {
    return std::make_shared<BinomialGlmModel>(x_, std::move(y), w_);
  }

 protected:
  // log(1 + e^eta) without overflow
  double cumulant(double eta) const override {
    return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
  }
  double cumulant_d1(double eta) const override { return 1.0 / (1.0 + std::exp(-eta)); }
  double cumulant_d2(double eta) const override {
    const double pr = cumulant_d1(eta);
    return pr * (1.0 - pr);
  }
};

// ---------------------------------------------------------------------------
// Catalog

inline const std::vector<std::string>& catalog_ids() {
  static const std::vector<std::string> ids{"gamma_ratio", "exp_pair",    "bvn_corr",
                                            "regression_scale", "exp_mean", "linexp_2par",
                                            "poisson_glm", "binomial_glm"};
  return ids;
}

namespace detail {

inline RealVector flatten(const DataRows& rows) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return from_std(flat);
}

inline std::size_t common_width(const DataRows& rows, const std::string& model) {
  if (rows.empty()) return 0;
  const std::size_t w = rows.front().size();
  for (const auto& r : rows) {
    require(r.size() == w, model + ": data rows must all have the same length");
  }
  return w;
}

// Rows [response, covariates...]; a single column means intercept only.
inline std::pair<RealMatrix, RealMatrix> response_and_design(const DataRows& rows,
                                                             std::size_t leading,
                                                             const std::string& model) {
  const std::size_t w = common_width(rows, model);
  require(w >= leading, model + ": each data row needs at least " + std::to_string(leading) +
                            " values");
  const auto n = static_cast<Eigen::Index>(rows.size());
  RealMatrix lead(n, static_cast<Eigen::Index>(leading));
  const auto k = static_cast<Eigen::Index>(w == leading ? 1 : w - leading);
  RealMatrix x(n, k);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& r = rows[static_cast<std::size_t>(j)];
    for (std::size_t c = 0; c < leading; ++c) lead(j, static_cast<Eigen::Index>(c)) = r[c];
    if (w == leading) {
      x(j, 0) = 1.0;
    } else {
      for (Eigen::Index c = 0; c < k; ++c) x(j, c) = r[leading + static_cast<std::size_t>(c)];
    }
  }
  return {x, lead};
}

inline std::size_t placeholder_size(const HyperParams& hyper, const std::string& model) {
  const double n = hyper_get(hyper, "n", model + " (no data given)");
  require(n >= 1 && n == std::floor(n), model + ": hyperparameter n must be a positive integer");
  return static_cast<std::size_t>(n);
}

}  // namespace detail

/// Builds a catalog model. `data` holds one row per observation; when it is
/// empty, models that need data fall back to a deterministic placeholder
/// sample of size hyper["n"] (useful as a simulation prototype).
inline ModelPtr catalog(const std::string& id, const HyperParams& hyper, const DataRows& data = {}) {
  using detail::hyper_get;
  using detail::hyper_or;
  using detail::require;

  if (id == "gamma_ratio") {
    const double shape = hyper_or(hyper, "shape", 3.0);
    if (!data.empty()) {
      const RealVector y = detail::flatten(data);
      require(y.size() == 2, "gamma_ratio: data must be (y1, y2)");
      return std::make_shared<GammaRatioModel>(y, shape);
    }
    const double s = hyper_get(hyper, "s", id);
    const double a = hyper_get(hyper, "a", id);
    require(s > 0, "gamma_ratio: s must be positive");
    require(a > 0, "gamma_ratio: a must be positive");
    return GammaRatioModel::from_s_a(s, a, shape);
  }
  if (id == "exp_pair") {
    RealVector y(2);
    if (!data.empty()) {
      y = detail::flatten(data);
      require(y.size() == 2, "exp_pair: data must be (y1, y2)");
    } else {
      y << hyper_get(hyper, "y1", id), hyper_get(hyper, "y2", id);
    }
    return std::make_shared<ExpPairModel>(y);
  }
  if (id == "bvn_corr") {
    if (data.empty()) {
      const std::size_t n = detail::placeholder_size(hyper, id);
      RealVector y(2 * static_cast<Eigen::Index>(n));
      for (std::size_t j = 0; j < n; ++j) {
        y[2 * j] = (j % 2 == 0) ? 1.0 : -0.5;
        y[2 * j + 1] = (j % 2 == 0) ? 0.5 : 1.0;
      }
      return std::make_shared<BvnCorrModel>(y);
    }
    require(detail::common_width(data, id) == 2 || data.front().size() == 1,
            "bvn_corr: data rows must be pairs");
    return std::make_shared<BvnCorrModel>(detail::flatten(data));
  }
  if (id == "regression_scale") {
    const double df = hyper_or(hyper, "df", 0.0);
    if (data.empty()) {
      const std::size_t n = detail::placeholder_size(hyper, id);
      RealVector y(static_cast<Eigen::Index>(n));
      for (std::size_t j = 0; j < n; ++j) y[j] = static_cast<double>(j % 3);
      return std::make_shared<RegressionScaleModel>(RealMatrix::Ones(y.size(), 1), y, df);
    }
    auto [x, lead] = detail::response_and_design(data, 1, id);
    return std::make_shared<RegressionScaleModel>(x, RealVector(lead.col(0)), df);
  }
  if (id == "exp_mean") {
    if (data.empty()) {
      const std::size_t n = detail::placeholder_size(hyper, id);
      return std::make_shared<ExpMeanModel>(RealVector::Ones(static_cast<Eigen::Index>(n)));
    }
    return std::make_shared<ExpMeanModel>(detail::flatten(data));
  }
  if (id == "linexp_2par") {
    if (data.empty()) {
      const std::size_t n = detail::placeholder_size(hyper, id);
      RealVector y(static_cast<Eigen::Index>(n));
      for (std::size_t j = 0; j < n; ++j) y[j] = static_cast<double>(j % 3);
      return std::make_shared<LinExp2ParModel>(y);
    }
    return std::make_shared<LinExp2ParModel>(detail::flatten(data));
  }
  if (id == "poisson_glm") {
    if (data.empty()) {
      const std::size_t n = detail::placeholder_size(hyper, id);
      const auto m = static_cast<Eigen::Index>(n);
      return std::make_shared<PoissonGlmModel>(RealMatrix::Ones(m, 1), RealVector::Ones(m));
    }
    auto [x, lead] = detail::response_and_design(data, 1, id);
    return std::make_shared<PoissonGlmModel>(x, RealVector(lead.col(0)));
  }
  if (id == "binomial_glm") {
    if (data.empty()) {
      const std::size_t n = detail::placeholder_size(hyper, id);
      const auto m = static_cast<Eigen::Index>(n);
      return std::make_shared<BinomialGlmModel>(RealMatrix::Ones(m, 1), RealVector::Ones(m),
                                                RealVector::Constant(m, 2.0));
    }
    auto [x, lead] = detail::response_and_design(data, 2, id);
    return std::make_shared<BinomialGlmModel>(x, RealVector(lead.col(0)),
                                              RealVector(lead.col(1)));
  }
  std::string known;
  for (const auto& k : catalog_ids()) known += (known.empty() ? "" : ", ") + k;
  throw UsageError("unknown model id '" + id + "' (known: " + known + ")");
}

}  // namespace hoa
