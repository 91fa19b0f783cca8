#pragma once

// Reference computations used to judge the approximations:
//   * the exact conditional significance function of the gamma-ratio model
//     by quadrature, and the interval obtained by inverting it;
//   * the exact gamma-pivot interval for an exponential mean;
//   * a brute-force evaluation of the determinant form of q with its own
//     difference stencils, sharing nothing with tem.hpp.

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "hoa/optim.hpp"

namespace hoa {

// ---------------------------------------------------------------------------
// Quadrature

struct QuadratureRule {
  RealVector nodes;
  RealVector weights;
  double lower = -1.0;
  double upper = 1.0;

  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
    return s;
  }
};

/// n-point Gauss-Legendre rule on [lo, hi]; nodes from Newton iteration on
/// the Legendre recurrence.
inline QuadratureRule gauss_legendre(int n, double lo = -1.0, double hi = 1.0) {
  if (n < 1) throw UsageError("gauss_legendre: need at least one node");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  rule.lower = lo;
  rule.upper = hi;
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = mid - half * x;
    rule.nodes[n - 1 - i] = mid + half * x;
    rule.weights[i] = rule.weights[n - 1 - i] = half * w;
  }
  return rule;
}

namespace detail {

template <class F>
double gl20(F& f, double a, double b) {
  static const QuadratureRule ref = gauss_legendre(20);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0.0;
  for (Eigen::Index i = 0; i < ref.nodes.size(); ++i) s += ref.weights[i] * f(mid + half * ref.nodes[i]);
  return half * s;
}

template <class F>
double adaptive_panel(F& f, double a, double b, double whole, double tol, int depth,
                      double& worst) {
  const double m = 0.5 * (a + b);
  const double left = gl20(f, a, m);
  const double right = gl20(f, m, b);
  const double err = std::abs(left + right - whole);
  if (err <= tol || depth >= 40) {
    if (err > tol) worst = std::max(worst, err);
    return left + right;
  }
  return adaptive_panel(f, a, m, left, 0.5 * tol, depth + 1, worst) +
         adaptive_panel(f, m, b, right, 0.5 * tol, depth + 1, worst);
}

}  // namespace detail

/// Adaptive composite 20-point Gauss-Legendre on [a, b] to absolute `tol`.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double tol = 1e-13) {
  if (a == b) return 0.0;
  double worst = 0.0;
  const double whole = detail::gl20(f, a, b);
  const double v = detail::adaptive_panel(f, a, b, whole, tol, 0, worst);
  if (worst > 0.0) {
    throw AccuracyError("adaptive quadrature did not reach the requested accuracy", worst);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Gamma ratio: exact conditional significance

namespace detail {

// exp(-2a(cosh u - 1)) falls below 1e-40 beyond this half-width.
inline double cosh_truncation(double a) { return std::acosh(1.0 + 20.0 * std::log(10.0) / a); }

inline double cosh_kernel_integral(double a, double lo, double hi) {
  auto f = [a](double u) { return std::exp(-2.0 * a * (std::cosh(u) - 1.0)); };
  return integrate_adaptive(f, lo, hi, 1e-14);
}

}  // namespace detail

/// exp(2a) * I(a) where I(a) = int exp(-2a cosh u) du = 2 K_0(2a).
inline double gamma_ratio_normaliser_scaled(double a) {
  if (!(a > 0.0)) throw UsageError("gamma_ratio normaliser: a must be positive");
  const double big_u = detail::cosh_truncation(a);
  return detail::cosh_kernel_integral(a, -big_u, big_u);
}

/// P(S <= s_obs | a_obs; theta) for the conditional density
/// f(s | a; theta) proportional to s^{-1} exp{-a(s/theta + theta/s)}.
inline double exact_gamma_ratio_significance(double s_obs, double a_obs, double theta) {
  if (!(s_obs > 0.0 && a_obs > 0.0 && theta > 0.0)) {
    throw UsageError("exact_gamma_ratio_significance: arguments must be positive");
  }
  const double big_u = detail::cosh_truncation(a_obs);
  const double x = std::log(s_obs / theta);
  if (x <= -big_u) return 0.0;
  if (x >= big_u) return 1.0;
  const double total = detail::cosh_kernel_integral(a_obs, -big_u, big_u);
  // integrate over the shorter side for accuracy in the tails
  if (x <= 0.0) return detail::cosh_kernel_integral(a_obs, -big_u, x) / total;
  return 1.0 - detail::cosh_kernel_integral(a_obs, x, big_u) / total;
}

namespace detail {

// Solves a decreasing g(theta) = target on a log scale.
template <class G>
double solve_decreasing_log(G&& g, double start, double target) {
  double lo = std::log(start), hi = lo;
  while (g(std::exp(lo)) < target) {
    lo -= 1.0;
    if (lo < -700) throw NumericalError("exact interval: no lower bracket");
  }
  while (g(std::exp(hi)) > target) {
    hi += 1.0;
    if (hi > 700) throw NumericalError("exact interval: no upper bracket");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(std::exp(mid)) > target ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

}  // namespace detail

struct ExactInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Inverts the exact conditional significance function.
inline ExactInterval exact_gamma_ratio_interval(double s_obs, double a_obs, double level) {
  if (!(level > 0.0 && level < 1.0)) throw UsageError("level must lie in (0, 1)");
  const double alpha = 0.5 * (1.0 - level);
  auto g = [&](double th) { return exact_gamma_ratio_significance(s_obs, a_obs, th); };
  return {detail::solve_decreasing_log(g, s_obs, 1.0 - alpha),
          detail::solve_decreasing_log(g, s_obs, alpha)};
}

// ---------------------------------------------------------------------------
// Exponential mean: exact gamma pivot sum(y)/theta ~ Gamma(n, 1)

inline ExactInterval exact_exp_mean_interval(const RealVector& data, double level) {
  if (data.size() == 0 || !(data.array() > 0.0).all() || !data.allFinite()) {
    throw UsageError("exact_exp_mean_interval: data must be positive");
  }
  if (!(level > 0.0 && level < 1.0)) throw UsageError("level must lie in (0, 1)");
  const double alpha = 0.5 * (1.0 - level);
  const double n = static_cast<double>(data.size());
  const double total = data.sum();
  return {total / boost::math::gamma_p_inv(n, 1.0 - alpha),
          total / boost::math::gamma_p_inv(n, alpha)};
}

// ---------------------------------------------------------------------------
// Brute-force determinant form of q

namespace detail::brute {

inline double step7(double x) { return 6e-3 * (1.0 + std::abs(x)); }

// Seven-point central derivative along coordinate k, Richardson-extrapolated
// over steps h and h/2.
template <class F>
double d7(F& f, RealVector x, Eigen::Index k) {
  const double x0 = x[k];
  const double offs[6] = {3.0, 2.0, 1.0, -1.0, -2.0, -3.0};
  const double coef[6] = {1.0, -9.0, 45.0, -45.0, 9.0, -1.0};
  auto at = [&](double h) {
    double s = 0.0;
    for (int i = 0; i < 6; ++i) {
      x[k] = x0 + offs[i] * h;
      s += coef[i] * f(x);
    }
    x[k] = x0;
    return s / (60.0 * h);
  };
  const double h = step7(x0);
  return (64.0 * at(0.5 * h) - at(h)) / 63.0;
}

template <class F>
RealVector grad7(F& f, const RealVector& x) {
  RealVector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) g[k] = d7(f, x, k);
  return g;
}

// Jacobian of a vector function: column k is d f / d x_k.
template <class F>
RealMatrix jac7(F& f, const RealVector& x) {
  const RealVector f0 = f(x);
  RealMatrix out(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    for (Eigen::Index r = 0; r < f0.size(); ++r) {
      auto comp = [&](const RealVector& z) { return f(z)[r]; };
      out(r, k) = d7(comp, x, k);
    }
  }
  return out;
}

// Cofactor determinant, p <= 3.
inline double det(const RealMatrix& m) {
  switch (m.rows()) {
    case 1: return m(0, 0);
    case 2: return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    case 3:
      return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
             m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
             m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    default: break;
  }
  throw UnsupportedError("brute-force determinant: dimension above 3");
}

}  // namespace detail::brute

/// q(psi) from the determinant form with independently differenced V, phi,
/// dphi/dtheta and observed information. Continuous models with p <= 3.
inline double brute_force_q28(const Model& model, double psi) {
  namespace bf = detail::brute;
  const auto p = static_cast<Eigen::Index>(model.dim());
  if (p > 3) throw UnsupportedError("brute_force_q28: p must be at most 3");
  if (model.response() != ResponseKind::continuous) {
    throw UnsupportedError("brute_force_q28: continuous responses only");
  }
  const Fit fit = fit_mle(model);
  const RealVector& th_hat = fit.theta_hat;
  RealVector th_psi = th_hat;
  th_psi[0] = psi;
  if (p >= 2) th_psi = fit_constrained(model, psi, th_hat).theta;

  // V from the pivots, block by block.
  const RealVector& y0 = model.data();
  RealMatrix v;
  if (model.has_pivot()) {
    const auto m = static_cast<Eigen::Index>(model.block_size());
    v.resize(y0.size(), p);
    for (Eigen::Index b = 0; b < y0.size() / m; ++b) {
      const auto blk = static_cast<std::size_t>(b);
      const RealVector yb = y0.segment(b * m, m);
      auto by_y = [&](const RealVector& y) { return model.pivot(blk, y, th_hat); };
      auto by_t = [&](const RealVector& t) { return model.pivot(blk, yb, t); };
      const RealMatrix dy = bf::jac7(by_y, yb);
      const RealMatrix dt = bf::jac7(by_t, th_hat);
      v.middleRows(b * m, m) = -dy.inverse() * dt;
    }
  } else if (auto pref = model.preferred_directions(th_hat)) {
    v = *pref;
  } else {
    throw UnsupportedError("brute_force_q28: model declares no pivot or directions");
  }

  auto phi = [&](const RealVector& t) {
    auto l = [&](const RealVector& y) { return model.loglik(t, y); };
    return RealVector(v.transpose() * bf::grad7(l, y0));
  };
  auto loglik = [&](const RealVector& t) { return model.loglik(t); };
  auto score = [&](const RealVector& t) { return bf::grad7(loglik, t); };

  const RealMatrix info_hat = -bf::jac7(score, th_hat);
  const RealMatrix dphi_hat = bf::jac7(phi, th_hat);
  const double det_info = bf::det(0.5 * (info_hat + info_hat.transpose()));

  if (p == 1) {
    const double dphi = phi(th_hat)[0] - phi(th_psi)[0];
    return dphi / dphi_hat(0, 0) * std::sqrt(det_info);
  }
  const RealMatrix info_psi = -bf::jac7(score, th_psi);
  const RealMatrix info_ll = info_psi.bottomRightCorner(p - 1, p - 1);
  const RealMatrix dphi_psi = bf::jac7(phi, th_psi);
  RealMatrix a(p, p);
  a.col(0) = phi(th_hat) - phi(th_psi);
  a.rightCols(p - 1) = dphi_psi.rightCols(p - 1);
  const double det_ll = bf::det(0.5 * (info_ll + info_ll.transpose()));
  if (!(det_info > 0.0) || !(det_ll > 0.0)) {
    throw SingularityError("brute_force_q28: non-positive information determinant");
  }
  return bf::det(a) / bf::det(dphi_hat) * std::sqrt(det_info / det_ll);
}

}  // namespace hoa
