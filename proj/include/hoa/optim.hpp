#pragma once

// Full and constrained maximum likelihood by damped Newton iteration, and
// the profile log-likelihood along a grid of interest values.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hoa/model.hpp"

namespace hoa {

struct Fit {
  RealVector theta_hat;
  double loglik_max = 0.0;
  RealMatrix obs_info;  // j(theta_hat) = -d^2 loglik / dtheta dtheta^T
  bool converged = false;
  int iterations = 0;
};

// theta_hat_psi = (psi, lambda_hat_psi).
struct ConstrainedFit {
  double psi = 0.0;
  RealVector lambda_hat_psi;
  double loglik = 0.0;          // profile log-likelihood l_p(psi)
  RealMatrix info_lambda_block;  // j_lambda,lambda(theta_hat_psi)
  RealVector theta;              // theta_hat_psi in full
  RealMatrix obs_info;           // full j(theta_hat_psi)
  bool converged = false;
  int iterations = 0;
};

struct NewtonOptions {
  int max_iterations = 200;
  int max_halvings = 30;
  double tolerance = 1e-9;
};

namespace detail {

struct NewtonResult {
  RealVector x;
  double value = 0.0;
  int iterations = 0;
};

// Largest t in (0, 1] keeping x + t d strictly inside the box.
inline double clip_to_box(const RealVector& x, const RealVector& d, const RealVector& lower,
                          const RealVector& upper) {
  double t = 1.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (d[k] > 0.0 && std::isfinite(upper[k])) {
      t = std::min(t, 0.99 * (upper[k] - x[k]) / d[k]);
    } else if (d[k] < 0.0 && std::isfinite(lower[k])) {
      t = std::min(t, 0.99 * (lower[k] - x[k]) / d[k]);
    }
  }
  return t;
}

// Ascent direction from the Newton system; when -H is not positive definite
// its eigenvalues are reflected and floored so the direction still ascends.
inline RealVector newton_direction(const RealMatrix& hess, const RealVector& grad) {
  const RealMatrix neg = -hess;
  Eigen::LLT<RealMatrix> llt(neg);
  if (llt.info() == Eigen::Success) return llt.solve(grad);
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(neg);
  RealVector ev = es.eigenvalues().cwiseAbs();
  const double floor = std::max(1e-8, 1e-8 * ev.maxCoeff());
  ev = ev.cwiseMax(floor);
  return es.eigenvectors() * (es.eigenvectors().transpose() * grad).cwiseQuotient(ev);
}

template <class F, class G, class H>
NewtonResult newton_maximise(F&& f, G&& grad, H&& hess, RealVector x, const Box& box,
                             const NewtonOptions& opt, const std::string& what) {
  if (!box.contains(x)) {
    throw UsageError(what + ": start " + format_vector(x) + " is outside the parameter domain");
  }
  double fx = f(x);
  if (!std::isfinite(fx)) {
    throw DomainError(what + ": non-finite log-likelihood at start " + format_vector(x));
  }
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const RealVector g = grad(x);
    const RealMatrix h = hess(x);
    const RealVector d = newton_direction(h, g);
    const double gtol = opt.tolerance * (1.0 + std::abs(fx));
    const double stol = opt.tolerance * (1.0 + x.norm());
    if (g.norm() <= gtol && d.norm() <= stol) {
      // one polishing step; quadratic convergence takes it to roundoff level
      const RealVector trial = x + d;
      if (box.contains(trial)) {
        const double ft = f(trial);
        if (std::isfinite(ft) && ft >= fx - 4.0 * detail::kEps * (1.0 + std::abs(fx))) {
          return {trial, ft, it};
        }
      }
      return {x, fx, it};
    }

    double t = clip_to_box(x, d, box.lower, box.upper);
    bool accepted = false;
    for (int k = 0; k <= opt.max_halvings; ++k, t *= 0.5) {
      const RealVector trial = x + t * d;
      if (!box.contains(trial)) continue;
      const double ft = f(trial);
      if (std::isfinite(ft) && ft >= fx - 4.0 * detail::kEps * (1.0 + std::abs(fx))) {
        x = trial;
        fx = ft;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No ascent left at working precision; accept if the gradient is small.
      if (g.norm() <= 1e3 * gtol) return {x, fx, it};
      throw ConvergenceError(what + ": line search failed after " +
                                 std::to_string(opt.max_halvings) + " halvings at " +
                                 format_vector(x),
                             to_std(x));
    }
  }
  throw ConvergenceError(what + ": no convergence after " + std::to_string(opt.max_iterations) +
                             " iterations; last iterate " + format_vector(x),
                         to_std(x));
}

inline RealVector tail(const RealVector& v) { return v.tail(v.size() - 1); }

inline RealVector join(double psi, const RealVector& lambda) {
  RealVector theta(lambda.size() + 1);
  theta[0] = psi;
  theta.tail(lambda.size()) = lambda;
  return theta;
}

}  // namespace detail

/// Maximum likelihood estimate with observed information.
inline Fit fit_mle(const Model& model, const RealVector& start, const NewtonOptions& opt = {}) {
  if (start.size() != static_cast<Eigen::Index>(model.dim())) {
    throw UsageError("fit_mle: start has length " + std::to_string(start.size()) +
                     ", model dimension is " + std::to_string(model.dim()));
  }
  const Box box = model.domain();
  auto f = [&](const RealVector& t) { return model.loglik(t); };
  auto g = [&](const RealVector& t) { return score_of(model, t); };
  auto h = [&](const RealVector& t) { return hessian_of(model, t); };
  const auto res = detail::newton_maximise(f, g, h, start, box, opt, model.id() + " fit_mle");

  Fit fit;
  fit.theta_hat = res.x;
  fit.loglik_max = res.value;
  fit.obs_info = observed_information(model, res.x);
  fit.converged = true;
  fit.iterations = res.iterations;
  if (Eigen::LLT<RealMatrix>(fit.obs_info).info() != Eigen::Success) {
    throw SingularityError(model.id() + ": observed information at " + format_vector(res.x) +
                           " is not positive definite (boundary or saddle point)");
  }
  return fit;
}

inline Fit fit_mle(const Model& model) { return fit_mle(model, model.initial_theta()); }

/// Maximises over lambda with psi held fixed. `start` is either a full theta
/// or a lambda vector of length p-1.
inline ConstrainedFit fit_constrained(const Model& model, double psi, const RealVector& start,
                                      const NewtonOptions& opt = {}) {
  const auto p = static_cast<Eigen::Index>(model.dim());
  if (p < 2) {
    throw UnsupportedError(model.id() + ": constrained fit needs a nuisance parameter (p = 1)");
  }
  RealVector lambda0;
  if (start.size() == p) {
    lambda0 = detail::tail(start);
  } else if (start.size() == p - 1) {
    lambda0 = start;
  } else {
    throw UsageError("fit_constrained: start has wrong length " + std::to_string(start.size()));
  }
  const Box full = model.domain();
  if (!(psi > full.lower[0] && psi < full.upper[0]) || !std::isfinite(psi)) {
    throw UsageError(model.id() + ": psi = " + std::to_string(psi) + " is not admissible");
  }
  const Box box{detail::tail(full.lower), detail::tail(full.upper)};
  auto f = [&](const RealVector& l) { return model.loglik(detail::join(psi, l)); };
  auto g = [&](const RealVector& l) {
    return RealVector(detail::tail(score_of(model, detail::join(psi, l))));
  };
  auto h = [&](const RealVector& l) {
    return RealMatrix(hessian_of(model, detail::join(psi, l)).bottomRightCorner(p - 1, p - 1));
  };
  const auto res = detail::newton_maximise(f, g, h, lambda0, box, opt,
                                           model.id() + " fit_constrained(psi=" +
                                               std::to_string(psi) + ")");

  ConstrainedFit cf;
  cf.psi = psi;
  cf.lambda_hat_psi = res.x;
  cf.loglik = res.value;
  cf.theta = detail::join(psi, res.x);
  cf.obs_info = observed_information(model, cf.theta);
  cf.info_lambda_block = cf.obs_info.bottomRightCorner(p - 1, p - 1);
  cf.converged = true;
  cf.iterations = res.iterations;
  if (Eigen::LLT<RealMatrix>(cf.info_lambda_block).info() != Eigen::Success) {
    throw SingularityError(model.id() + ": nuisance information at psi = " +
                           std::to_string(psi) + " is not positive definite");
  }
  return cf;
}

/// Constrained fits along a strictly increasing grid, warm-started outward
/// from the grid point nearest psi_hat. Results are in grid order.
inline std::vector<ConstrainedFit> profile_curve(const Model& model, const RealVector& psi_grid,
                                                 const Fit& fit) {
  if (model.dim() < 2) {
    throw UnsupportedError(model.id() + ": profile likelihood needs p >= 2");
  }
  if (psi_grid.size() == 0) throw UsageError("profile_curve: empty grid");
  for (Eigen::Index i = 1; i < psi_grid.size(); ++i) {
    if (!(psi_grid[i] > psi_grid[i - 1])) {
      throw UsageError("profile_curve: grid must be strictly increasing");
    }
  }
  const double psi_hat = fit.theta_hat[0];
  Eigen::Index centre = 0;
  (psi_grid.array() - psi_hat).abs().minCoeff(&centre);

  std::vector<ConstrainedFit> out(static_cast<std::size_t>(psi_grid.size()));
  auto solve = [&](Eigen::Index i, const RealVector& start) {
    try {
      out[static_cast<std::size_t>(i)] = fit_constrained(model, psi_grid[i], start);
    } catch (const UsageError&) {
      throw;
    } catch (const NumericalError& e) {
      throw NumericalError("profile_curve at psi = " + std::to_string(psi_grid[i]) + ": " +
                           e.what());
    }
  };
  solve(centre, detail::tail(fit.theta_hat));
  for (Eigen::Index i = centre + 1; i < psi_grid.size(); ++i) {
    solve(i, out[static_cast<std::size_t>(i - 1)].lambda_hat_psi);
  }
  for (Eigen::Index i = centre - 1; i >= 0; --i) {
    solve(i, out[static_cast<std::size_t>(i + 1)].lambda_hat_psi);
  }
  return out;
}

inline std::vector<ConstrainedFit> profile_curve(const Model& model, const RealVector& psi_grid) {
  return profile_curve(model, psi_grid, fit_mle(model));
}

}  // namespace hoa
