#pragma once

// The parametric model interface every pipeline stage works against.
//
// Conventions:
//   * theta is ordered (psi, lambda): the interest parameter is always the
//     first coordinate and the remaining p-1 coordinates are nuisance.
//   * The observed data y° is a flat vector; vector-valued observations of
//     dimension d occupy consecutive blocks of d entries.
//   * The domain is an open box; lower/upper may be +-infinity.
//   * loglik(theta, y) may drop additive terms that depend on neither theta
//     nor y jointly; such terms only shift phi by a constant.

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hoa/numcore.hpp"

namespace hoa {

using HyperParams = std::map<std::string, double>;

enum class ResponseKind { continuous, discrete };

struct Box {
  RealVector lower;
  RealVector upper;

  static Box unbounded(Eigen::Index p) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {RealVector::Constant(p, -inf), RealVector::Constant(p, inf)};
  }

  bool contains(const RealVector& theta) const {
    if (theta.size() != lower.size() || !theta.allFinite()) return false;
    return ((theta.array() > lower.array()) && (theta.array() < upper.array())).all();
  }
};

// Coordinate-wise smooth bijection theta' = to(theta). Each map is increasing,
// so the interest parameter keeps its orientation.
enum class CoordinateMap { identity, log, atanh };

struct Reparametrisation {
  std::vector<CoordinateMap> maps;

  RealVector to(const RealVector& theta) const {
    RealVector out(theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) out[k] = forward(maps[k], theta[k]);
    return out;
  }

  RealVector from(const RealVector& theta_new) const {
    RealVector out(theta_new.size());
    for (Eigen::Index k = 0; k < theta_new.size(); ++k) out[k] = inverse(maps[k], theta_new[k]);
    return out;
  }

  // Diagonal of d theta / d theta'^T.
  RealVector from_derivative(const RealVector& theta_new) const {
    RealVector out(theta_new.size());
    for (Eigen::Index k = 0; k < theta_new.size(); ++k) {
      switch (maps[k]) {
        case CoordinateMap::identity: out[k] = 1.0; break;
        case CoordinateMap::log: out[k] = std::exp(theta_new[k]); break;
        case CoordinateMap::atanh: {
          const double c = std::cosh(theta_new[k]);
          out[k] = 1.0 / (c * c);
          break;
        }
      }
    }
    return out;
  }

  static double forward(CoordinateMap m, double x) {
    switch (m) {
      case CoordinateMap::log: return std::log(x);
      case CoordinateMap::atanh: return std::atanh(x);
      case CoordinateMap::identity: break;
    }
    return x;
  }

  static double inverse(CoordinateMap m, double x) {
    switch (m) {
      case CoordinateMap::log: return std::exp(x);
      case CoordinateMap::atanh: return std::tanh(x);
      case CoordinateMap::identity: break;
    }
    return x;
  }
};

class Model {
 public:
  explicit Model(RealVector data) : data_(require_finite(data, "model data")) {}
  virtual ~Model() = default;

  Model(const Model&) = default;
  Model& operator=(const Model&) = delete;

  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<std::string> parameter_names() const = 0;
  virtual HyperParams hyper() const { return {}; }

  const RealVector& data() const noexcept { return data_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(data_.size()); }

  virtual ResponseKind response() const { return ResponseKind::continuous; }
  int accuracy_order() const { return response() == ResponseKind::discrete ? 2 : 3; }

  virtual Box domain() const { return Box::unbounded(static_cast<Eigen::Index>(dim())); }
  bool admissible(const RealVector& theta) const { return domain().contains(theta); }
  virtual RealVector initial_theta() const = 0;

  // --- likelihood -------------------------------------------------------
  virtual double loglik(const RealVector& theta, const RealVector& y) const = 0;
  double loglik(const RealVector& theta) const { return loglik(theta, data_); }

  // Closed-form d loglik / d theta, when available.
  virtual std::optional<RealVector> score(const RealVector& /*theta*/,
                                          const RealVector& /*y*/) const {
    return std::nullopt;
  }

  // Closed-form d^2 loglik / dtheta dtheta^T, when available.
  virtual std::optional<RealMatrix> loglik_hessian(const RealVector& /*theta*/,
                                                   const RealVector& /*y*/) const {
    return std::nullopt;
  }

  // Closed-form sample-space gradient d loglik / d y (length n).
  virtual std::optional<RealVector> loglik_dy(const RealVector& /*theta*/,
                                              const RealVector& /*y*/) const {
    return std::nullopt;
  }

  // Closed-form mixed derivative d^2 loglik / dy dtheta^T (n x p).
  virtual std::optional<RealMatrix> loglik_dy_dtheta(const RealVector& /*theta*/,
                                                     const RealVector& /*y*/) const {
    return std::nullopt;
  }

  // --- continuous responses: pivotal structure --------------------------
  // Observations are grouped in blocks of block_size() coordinates. For each
  // block, pivot() returns block_size() quantities whose joint distribution
  // is free of theta (a distribution function F_j(y_j; theta), or the error
  // of a structural equation y_j = g_j(theta, e_j)).
  virtual std::size_t block_size() const { return 1; }
  virtual bool has_pivot() const { return false; }
  virtual RealVector pivot(std::size_t /*block*/, const RealVector& /*y_block*/,
                           const RealVector& /*theta*/) const {
    throw UnsupportedError(id() + ": no pivotal quantity declared");
  }

  // Closed-form dy/dtheta^T at the observed data (n x p).
  virtual std::optional<RealMatrix> dy_dtheta(const RealVector& /*theta*/) const {
    return std::nullopt;
  }

  // Model-preferred sufficient directions, used in place of dy/dtheta^T when
  // present. Any matrix with the same column span gives the same q.
  virtual std::optional<RealMatrix> preferred_directions(const RealVector& /*theta_hat*/) const {
    return std::nullopt;
  }

  // --- discrete responses -------------------------------------------------
  // E(y_j; theta) for each observation.
  virtual RealVector mean(const RealVector& /*theta*/) const {
    throw UnsupportedError(id() + ": no mean function declared");
  }
  virtual bool has_mean() const { return false; }
  // Closed-form dE(y)/dtheta^T (n x p), when available.
  virtual std::optional<RealMatrix> mean_dtheta(const RealVector& /*theta*/) const {
    return std::nullopt;
  }

  // --- simulation and invariance ----------------------------------------
  virtual RealVector simulate(const RealVector& /*theta*/, std::mt19937_64& /*rng*/) const {
    throw UnsupportedError(id() + ": simulation not supported");
  }
  virtual std::shared_ptr<const Model> with_data(RealVector y) const = 0;
  virtual std::optional<Reparametrisation> reparametrisation() const { return std::nullopt; }

 private:
  RealVector data_;
};

using ModelPtr = std::shared_ptr<const Model>;

// Score from the closed form when the model has one, else by central
// differences of loglik.
inline RealVector score_of(const Model& model, const RealVector& theta) {
  if (auto s = model.score(theta, model.data())) return *s;
  return gradient([&](const RealVector& t) { return model.loglik(t); }, theta);
}

inline RealMatrix hessian_of(const Model& model, const RealVector& theta) {
  if (auto h = model.loglik_hessian(theta, model.data())) return *h;
  if (model.score(theta, model.data())) {
    return hessian_from_gradient(
        [&](const RealVector& t) {
          if (!model.admissible(t)) {
            throw DifferentiationError("probe left the parameter domain at " + format_vector(t),
                                       to_std(t));
          }
          return *model.score(t, model.data());
        },
        theta);
  }
  return hessian(
      [&](const RealVector& t) {
        return model.admissible(t) ? model.loglik(t) : std::numeric_limits<double>::quiet_NaN();
      },
      theta);
}

inline RealMatrix observed_information(const Model& model, const RealVector& theta) {
  return -hessian_of(model, theta);
}

// Wraps a model in its declared reparametrisation theta' = to(theta). The
// wrapped model shares the data, pivots and directions of the original.
class ReparametrisedModel final : public Model {
 public:
  ReparametrisedModel(ModelPtr base, Reparametrisation map)
      : Model(base->data()), base_(std::move(base)), map_(std::move(map)) {}

  std::string id() const override { return base_->id() + "/reparam"; }
  std::size_t dim() const override { return base_->dim(); }
  std::vector<std::string> parameter_names() const override { return base_->parameter_names(); }
  HyperParams hyper() const override { return base_->hyper(); }
  ResponseKind response() const override { return base_->response(); }

  Box domain() const override {
    const Box b = base_->domain();
    return {map_.to(b.lower), map_.to(b.upper)};
  }
  RealVector initial_theta() const override { return map_.to(base_->initial_theta()); }

  double loglik(const RealVector& theta, const RealVector& y) const override {
    return base_->loglik(map_.from(theta), y);
  }
  std::optional<RealVector> score(const RealVector& theta, const RealVector& y) const override {
    auto s = base_->score(map_.from(theta), y);
    if (!s) return std::nullopt;
    return RealVector(s->cwiseProduct(map_.from_derivative(theta)));
  }
  std::optional<RealVector> loglik_dy(const RealVector& theta,
                                      const RealVector& y) const override {
    return base_->loglik_dy(map_.from(theta), y);
  }
  std::optional<RealMatrix> loglik_dy_dtheta(const RealVector& theta,
                                             const RealVector& y) const override {
    auto m = base_->loglik_dy_dtheta(map_.from(theta), y);
    if (!m) return std::nullopt;
    return RealMatrix(*m * map_.from_derivative(theta).asDiagonal());
  }
  std::size_t block_size() const override { return base_->block_size(); }
  bool has_pivot() const override { return base_->has_pivot(); }
  RealVector pivot(std::size_t block, const RealVector& y_block,
                   const RealVector& theta) const override {
    return base_->pivot(block, y_block, map_.from(theta));
  }
  std::optional<RealMatrix> dy_dtheta(const RealVector& theta) const override {
    auto v = base_->dy_dtheta(map_.from(theta));
    if (!v) return std::nullopt;
    return RealMatrix(*v * map_.from_derivative(theta).asDiagonal());
  }
  std::optional<RealMatrix> preferred_directions(const RealVector& theta_hat) const override {
    return base_->preferred_directions(map_.from(theta_hat));
  }
  RealVector mean(const RealVector& theta) const override { return base_->mean(map_.from(theta)); }
  bool has_mean() const override { return base_->has_mean(); }
  std::optional<RealMatrix> mean_dtheta(const RealVector& theta) const override {
    auto m = base_->mean_dtheta(map_.from(theta));
    if (!m) return std::nullopt;
    return RealMatrix(*m * map_.from_derivative(theta).asDiagonal());
  }
  RealVector simulate(const RealVector& theta, std::mt19937_64& rng) const override {
    return base_->simulate(map_.from(theta), rng);
  }
  std::shared_ptr<const Model> with_data(RealVector y) const override {
    return std::make_shared<ReparametrisedModel>(base_->with_data(std::move(y)), map_);
  }

  const Reparametrisation& map() const noexcept { return map_; }
  const Model& base() const noexcept { return *base_; }

 private:
  ModelPtr base_;
  Reparametrisation map_;
};

// Applies the model's own declared reparametrisation.
inline ModelPtr reparametrise(ModelPtr model) {
  auto map = model->reparametrisation();
  if (!map) throw UnsupportedError(model->id() + ": no reparametrisation declared");
  return std::make_shared<ReparametrisedModel>(std::move(model), *map);
}

}  // namespace hoa
