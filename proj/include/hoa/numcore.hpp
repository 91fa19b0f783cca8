#pragma once

// Finite differences, small dense linear algebra and normal-distribution
// helpers shared by every other header.
//
// Step rules (relative to 1 + |x_k|):
//   first derivatives, central        cbrt(eps)
//   second derivatives, from values   eps^(1/4)
//   second derivatives, from gradient cbrt(eps)
// Each is the balance point of truncation and roundoff for its stencil.

#include <Eigen/Dense>

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "hoa/errors.hpp"

namespace hoa {

using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

inline std::vector<double> to_std(const RealVector& v) {
  return {v.data(), v.data() + v.size()};
}

inline RealVector from_std(const std::vector<double>& v) {
  return Eigen::Map<const RealVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::string format_vector(const RealVector& v) {
  std::ostringstream os;
  os.precision(10);
  os << '(';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ')';
  return os.str();
}

inline bool all_finite(const RealVector& v) { return v.allFinite(); }

// Rejects NaN/Inf entries; `what` names the quantity in the message.
inline const RealVector& require_finite(const RealVector& v, const std::string& what) {
  if (!v.allFinite()) throw DomainError(what + " has non-finite entries: " + format_vector(v));
  return v;
}

inline const RealMatrix& require_finite(const RealMatrix& m, const std::string& what) {
  if (!m.allFinite()) throw DomainError(what + " has non-finite entries");
  return m;
}

namespace detail {

constexpr double kEps = std::numeric_limits<double>::epsilon();

inline double first_step(double x) { return std::cbrt(kEps) * (1.0 + std::abs(x)); }
inline double second_step(double x) { return std::pow(kEps, 0.25) * (1.0 + std::abs(x)); }

template <class F>
double probe(F& f, const RealVector& x) {
  const double v = f(x);
  if (!std::isfinite(v)) {
    throw DifferentiationError("non-finite function value at probe point " + format_vector(x),
                               to_std(x));
  }
  return v;
}

template <class F>
RealVector probe_vector(F& f, const RealVector& x) {
  RealVector v = f(x);
  if (!v.allFinite()) {
    throw DifferentiationError("non-finite function value at probe point " + format_vector(x),
                               to_std(x));
  }
  return v;
}

}  // namespace detail

/// Central-difference gradient of a scalar function.
template <class F>
RealVector gradient(F&& f, const RealVector& x) {
  RealVector g(x.size());
  RealVector xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = detail::first_step(x[k]);
    xp[k] = x[k] + h;
    const double up = detail::probe(f, xp);
    xp[k] = x[k] - h;
    const double dn = detail::probe(f, xp);
    xp[k] = x[k];
    g[k] = (up - dn) / (2.0 * h);
  }
  return g;
}

/// Central-difference Jacobian of a vector function: rows index outputs,
/// columns index the coordinates of x.
template <class F>
RealMatrix jacobian(F&& f, const RealVector& x) {
  RealMatrix jac;
  RealVector xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = detail::first_step(x[k]);
    xp[k] = x[k] + h;
    const RealVector up = detail::probe_vector(f, xp);
    xp[k] = x[k] - h;
    const RealVector dn = detail::probe_vector(f, xp);
    xp[k] = x[k];
    if (k == 0) jac.resize(up.size(), x.size());
    jac.col(k) = (up - dn) / (2.0 * h);
  }
  return jac;
}

/// Hessian of a scalar function from function values only, symmetrised.
template <class F>
RealMatrix hessian(F&& f, const RealVector& x) {
  const Eigen::Index p = x.size();
  RealMatrix h(p, p);
  RealVector xp = x;
  const double f0 = detail::probe(f, x);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double hi = detail::second_step(x[i]);
    xp[i] = x[i] + hi;
    const double up = detail::probe(f, xp);
    xp[i] = x[i] - hi;
    const double dn = detail::probe(f, xp);
    xp[i] = x[i];
    h(i, i) = (up - 2.0 * f0 + dn) / (hi * hi);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hj = detail::second_step(x[j]);
      std::array<double, 4> v{};
      int idx = 0;
      for (double si : {1.0, -1.0}) {
        for (double sj : {1.0, -1.0}) {
          xp[i] = x[i] + si * hi;
          xp[j] = x[j] + sj * hj;
          v[idx++] = detail::probe(f, xp);
        }
      }
      xp[i] = x[i];
      xp[j] = x[j];
      h(i, j) = h(j, i) = (v[0] - v[1] - v[2] + v[3]) / (4.0 * hi * hj);
    }
  }
  return 0.5 * (h + h.transpose());
}

/// Hessian as the central-difference Jacobian of an analytic gradient,
/// symmetrised.
template <class G>
RealMatrix hessian_from_gradient(G&& grad, const RealVector& x) {
  RealMatrix h = jacobian(grad, x);
  return 0.5 * (h + h.transpose());
}

/// Mixed second derivatives d^2 f / dy dx^T of f(x, y), as a dim(y) x dim(x)
/// matrix, from function values.
template <class F>
RealMatrix mixed_partials(F&& f, const RealVector& x, const RealVector& y) {
  RealMatrix m(y.size(), x.size());
  RealVector xp = x;
  RealVector yp = y;
  for (Eigen::Index a = 0; a < y.size(); ++a) {
    const double hy = detail::second_step(y[a]);
    for (Eigen::Index b = 0; b < x.size(); ++b) {
      const double hx = detail::second_step(x[b]);
      std::array<double, 4> v{};
      int idx = 0;
      for (double sa : {1.0, -1.0}) {
        for (double sb : {1.0, -1.0}) {
          yp[a] = y[a] + sa * hy;
          xp[b] = x[b] + sb * hx;
          v[idx] = f(xp, yp);
          if (!std::isfinite(v[idx])) {
            throw DifferentiationError("non-finite function value at probe point " +
                                           format_vector(xp),
                                       to_std(xp));
          }
          ++idx;
        }
      }
      yp[a] = y[a];
      xp[b] = x[b];
      m(a, b) = (v[0] - v[1] - v[2] + v[3]) / (4.0 * hy * hx);
    }
  }
  return m;
}

/// |A^T A|^{1/2} for a full-column-rank A, from the R factor of a
/// column-pivoted Householder QR.
inline double gram_det_sqrt(const RealMatrix& a) {
  require_finite(a, "gram_det_sqrt argument");
  if (a.cols() == 0) return 1.0;
  if (a.rows() < a.cols()) {
    throw SingularityError("gram_det_sqrt: " + std::to_string(a.cols()) +
                           " columns cannot have full rank in " + std::to_string(a.rows()) +
                           " rows");
  }
  Eigen::ColPivHouseholderQR<RealMatrix> qr(a);
  qr.setThreshold(1e-12);
  if (qr.rank() < a.cols()) {
    throw SingularityError("gram_det_sqrt: matrix with " + std::to_string(a.cols()) +
                           " columns has rank " + std::to_string(qr.rank()));
  }
  const RealMatrix& r = qr.matrixR();
  double det = 1.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) det *= std::abs(r(i, i));
  return det;
}

// ---------------------------------------------------------------------------
// Standard normal

inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.398942280401432677939946059934;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

// erfc keeps full relative accuracy in the lower tail; the upper tail uses
// the complement of the reflected argument.
inline double normal_cdf(double x) {
  constexpr double inv_sqrt2 = 0.707106781186547524400844362105;
  if (x < 0.0) return 0.5 * std::erfc(-x * inv_sqrt2);
  return 1.0 - 0.5 * std::erfc(x * inv_sqrt2);
}

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw UsageError("normal_quantile: probability must lie in (0,1)");
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

// ---------------------------------------------------------------------------
// Interpolation

// Fritsch-Carlson monotone cubic Hermite interpolation through sorted
// abscissae; evaluates outside the data range by extending the end cubic.
inline double pchip(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  const std::size_t n = xs.size();
  if (n < 2 || ys.size() != n) throw UsageError("pchip: need at least two matching points");
  std::vector<double> h(n - 1), delta(n - 1), d(n);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h[k] = xs[k + 1] - xs[k];
    if (!(h[k] > 0.0)) throw UsageError("pchip: abscissae must be strictly increasing");
    delta[k] = (ys[k + 1] - ys[k]) / h[k];
  }
  if (n == 2) {
    d[0] = d[1] = delta[0];
  } else {
    for (std::size_t k = 1; k + 1 < n; ++k) {
      if (delta[k - 1] * delta[k] <= 0.0) {
        d[k] = 0.0;
      } else {
        const double w1 = 2.0 * h[k] + h[k - 1];
        const double w2 = h[k] + 2.0 * h[k - 1];
        d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
      }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
      double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (s * d0 <= 0.0) {
        s = 0.0;
      } else if (d0 * d1 <= 0.0 && std::abs(s) > std::abs(3.0 * d0)) {
        s = 3.0 * d0;
      }
      return s;
    };
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }
  std::size_t k = 0;
  if (x >= xs[n - 1]) {
    k = n - 2;
  } else if (x > xs[0]) {
    k = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) - 1;
  }
  const double t = (x - xs[k]) / h[k];
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  return h00 * ys[k] + h10 * h[k] * d[k] + h01 * ys[k + 1] + h11 * h[k] * d[k + 1];
}

}  // namespace hoa
