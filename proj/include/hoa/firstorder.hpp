#pragma once

// First-order pivots: score s, Wald t and likelihood root r, for a scalar
// parameter or for the interest component via the profile likelihood.

#include <cmath>
#include <tuple>

#include "hoa/optim.hpp"

namespace hoa {

struct FirstOrderPivots {
  double score = 0.0;
  double wald = 0.0;
  double root = 0.0;
  double profile_info = 0.0;  // j_p(psi) at theta_hat_psi; j(theta) when p = 1
};

namespace detail {

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Signed root of twice the log-likelihood drop. A drop that is negative by
// more than optimizer noise means the fit was not a maximum.
inline double likelihood_root(double estimate, double value, double loglik_max, double loglik_at,
                              const std::string& who) {
  double drop = loglik_max - loglik_at;
  if (drop < -1e-9 * (1.0 + std::abs(loglik_max))) {
    throw NumericalError(who + ": log-likelihood at " + std::to_string(value) +
                         " exceeds the maximum by " + std::to_string(-drop) +
                         " (optimizer inconsistency)");
  }
  drop = std::max(drop, 0.0);
  return sign(estimate - value) * std::sqrt(2.0 * drop);
}

// j_psi,psi - j_psi,lambda j_lambda,lambda^{-1} j_lambda,psi
inline double schur_profile_info(const RealMatrix& info, const std::string& who) {
  const Eigen::Index p = info.rows();
  if (p == 1) return info(0, 0);
  const RealMatrix jll = info.bottomRightCorner(p - 1, p - 1);
  Eigen::LLT<RealMatrix> llt(jll);
  if (llt.info() != Eigen::Success) {
    throw SingularityError(who + ": nuisance information block is singular");
  }
  const RealVector jlp = info.col(0).tail(p - 1);
  return info(0, 0) - jlp.dot(llt.solve(jlp));
}

}  // namespace detail

inline FirstOrderPivots pivots_scalar(const Model& model, const Fit& fit, double theta) {
  if (model.dim() != 1) {
    throw UnsupportedError(model.id() + ": pivots_scalar needs p = 1; use pivots_profile");
  }
  RealVector th(1);
  th[0] = theta;
  if (!model.admissible(th)) {
    throw UsageError(model.id() + ": theta = " + std::to_string(theta) + " is not admissible");
  }
  const double theta_hat = fit.theta_hat[0];
  const double info_hat = fit.obs_info(0, 0);
  FirstOrderPivots out;
  out.score = score_of(model, th)[0] / std::sqrt(info_hat);
  out.wald = (theta_hat - theta) * std::sqrt(info_hat);
  out.root = detail::likelihood_root(theta_hat, theta, fit.loglik_max, model.loglik(th),
                                     model.id());
  out.profile_info = observed_information(model, th)(0, 0);
  return out;
}

inline FirstOrderPivots pivots_profile(const Model& model, const Fit& fit,
                                       const ConstrainedFit& cfit) {
  if (model.dim() < 2) {
    throw UnsupportedError(model.id() + ": pivots_profile needs p >= 2; use pivots_scalar");
  }
  const double psi_hat = fit.theta_hat[0];
  const double jp_hat = detail::schur_profile_info(fit.obs_info, model.id());
  FirstOrderPivots out;
  out.profile_info = detail::schur_profile_info(cfit.obs_info, model.id());
  // l_p'(psi) = dl/dpsi at theta_hat_psi, since dl/dlambda vanishes there.
  out.score = score_of(model, cfit.theta)[0] / std::sqrt(jp_hat);
  out.wald = (psi_hat - cfit.psi) * std::sqrt(jp_hat);
  out.root = detail::likelihood_root(psi_hat, cfit.psi, fit.loglik_max, cfit.loglik, model.id());
  return out;
}

/// (Phi(s), Phi(t), Phi(r)).
inline std::tuple<double, double, double> first_order_significance(const FirstOrderPivots& p) {
  return {normal_cdf(p.score), normal_cdf(p.wald), normal_cdf(p.root)};
}

}  // namespace hoa
