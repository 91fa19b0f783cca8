#pragma once

// Tangent exponential model: sufficient directions V at (y°, theta_hat°),
// the canonical parameter phi(theta) = V^T dloglik/dy at y°, the projected
// parameter chi, the departure q, and the tail approximations r* and
// Lugannani-Rice. Pipeline ties them together for a ψ grid.

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hoa/firstorder.hpp"
#include "hoa/optim.hpp"

namespace hoa {

// ---------------------------------------------------------------------------
// Sufficient directions

enum class DirectionSpace {
  observation,  // V is n x p, phi = V^T dl/dy
  local_score   // V stacks n blocks of p x p, one per observation (discrete)
};

struct Directions {
  RealMatrix V;
  RealVector origin_data;
  RealVector origin_theta;
  DirectionSpace space = DirectionSpace::observation;
  RealMatrix score_dy;  // local_score only: row j is dw_j/dy_j

  // p x p block of observation j (local_score) or row j (observation).
  RealMatrix block(Eigen::Index j) const {
    const Eigen::Index p = V.cols();
    if (space == DirectionSpace::local_score) return V.middleRows(j * p, p);
    return V.row(j);
  }
};

namespace detail {

inline void check_directions(const Directions& d, std::size_t p, const std::string& who) {
  require_finite(d.V, who + " directions");
  if (d.V.cols() != static_cast<Eigen::Index>(p)) {
    throw UsageError(who + ": directions have " + std::to_string(d.V.cols()) +
                     " columns, model dimension is " + std::to_string(p));
  }
  Eigen::ColPivHouseholderQR<RealMatrix> qr(d.V);
  qr.setThreshold(1e-12);
  if (qr.rank() < d.V.cols()) {
    throw SingularityError(who + ": sufficient directions are rank deficient (rank " +
                           std::to_string(qr.rank()) + " < " + std::to_string(d.V.cols()) + ")");
  }
}

}  // namespace detail

/// V from the pivotal structure: row block j is -(d eps_j/d y_j)^{-1} d eps_j/d theta^T
/// at (y°, theta_hat°), or the model's closed-form dy/dtheta^T.
inline Directions directions_from_quantile(const Model& model, const Fit& fit) {
  if (model.response() == ResponseKind::discrete) {
    throw UnsupportedError(model.id() + ": quantile directions need a continuous response");
  }
  Directions d;
  d.origin_data = model.data();
  d.origin_theta = fit.theta_hat;
  if (auto v = model.dy_dtheta(fit.theta_hat)) {
    d.V = *v;
    detail::check_directions(d, model.dim(), model.id());
    return d;
  }
  if (!model.has_pivot()) {
    throw UnsupportedError(model.id() + ": no distribution function or structural equation");
  }
  const auto m = static_cast<Eigen::Index>(model.block_size());
  const Eigen::Index n = model.data().size();
  if (m == 0 || n % m != 0) {
    throw UsageError(model.id() + ": data length is not a multiple of the block size");
  }
  d.V.resize(n, static_cast<Eigen::Index>(model.dim()));
  for (Eigen::Index b = 0; b < n / m; ++b) {
    const RealVector yb = model.data().segment(b * m, m);
    const auto blk = static_cast<std::size_t>(b);
    const RealMatrix dy = jacobian(
        [&](const RealVector& y) { return model.pivot(blk, y, fit.theta_hat); }, yb);
    const RealMatrix dt = jacobian(
        [&](const RealVector& t) { return model.pivot(blk, yb, t); }, fit.theta_hat);
    Eigen::FullPivLU<RealMatrix> lu(dy);
    if (!lu.isInvertible() || dy.cwiseAbs().maxCoeff() == 0.0) {
      throw SingularityError(model.id() + ": pivot has zero density at observation " +
                             std::to_string(b * m) + " (d eps/dy singular)");
    }
    d.V.middleRows(b * m, m) = -lu.solve(dt);
  }
  detail::check_directions(d, model.dim(), model.id());
  return d;
}

/// Discrete responses: with the local score w_j = dl_j/dtheta at theta_hat°,
/// V_j = dE(w_j; theta)/dtheta^T = (dw_j/dy_j)(dE y_j/dtheta^T).
inline Directions directions_discrete(const Model& model, const Fit& fit) {
  if (model.response() != ResponseKind::discrete) {
    throw UnsupportedError(model.id() + ": local-score directions need a discrete response");
  }
  if (!model.has_mean()) throw UnsupportedError(model.id() + ": no mean function declared");
  const RealVector& th = fit.theta_hat;
  const Eigen::Index n = model.data().size();
  const auto p = static_cast<Eigen::Index>(model.dim());

  RealMatrix dmu;
  if (auto m = model.mean_dtheta(th)) {
    dmu = *m;
  } else {
    dmu = jacobian([&](const RealVector& t) { return model.mean(t); }, th);
  }
  RealMatrix b;
  if (auto m = model.loglik_dy_dtheta(th, model.data())) {
    b = *m;
  } else {
    b = mixed_partials([&](const RealVector& t, const RealVector& y) { return model.loglik(t, y); },
                       th, model.data());
  }
  Directions d;
  d.origin_data = model.data();
  d.origin_theta = th;
  d.space = DirectionSpace::local_score;
  d.score_dy = b;
  d.V.resize(n * p, p);
  for (Eigen::Index j = 0; j < n; ++j) d.V.middleRows(j * p, p) = b.row(j).transpose() * dmu.row(j);
  detail::check_directions(d, model.dim(), model.id());
  return d;
}

/// Model-preferred directions when declared, else by response type.
inline Directions default_directions(const Model& model, const Fit& fit) {
  if (model.response() == ResponseKind::discrete) return directions_discrete(model, fit);
  if (auto v = model.preferred_directions(fit.theta_hat)) {
    Directions d;
    d.V = *v;
    d.origin_data = model.data();
    d.origin_theta = fit.theta_hat;
    detail::check_directions(d, model.dim(), model.id());
    return d;
  }
  return directions_from_quantile(model, fit);
}

// ---------------------------------------------------------------------------
// Canonical parameter

class CanonicalParam {
 public:
  CanonicalParam(ModelPtr model, Directions dirs, bool numeric_only = false)
      : model_(std::move(model)), dirs_(std::move(dirs)), numeric_only_(numeric_only) {
    if (dirs_.space == DirectionSpace::observation && dirs_.V.rows() != dirs_.origin_data.size()) {
      throw UsageError(model_->id() + ": directions do not match the data length");
    }
  }

  const Directions& directions() const noexcept { return dirs_; }
  const Model& model() const noexcept { return *model_; }

  RealVector phi(const RealVector& theta) const {
    const RealVector g = sample_gradient(theta);
    RealVector out = combine(g);
    if (!out.allFinite()) {
      throw DomainError(model_->id() + ": canonical parameter is not finite at " +
                        format_vector(theta));
    }
    return out;
  }

  // p x p, rows index components of phi.
  RealMatrix dphi_dtheta(const RealVector& theta) const {
    if (!numeric_only_) {
      if (auto m = model_->loglik_dy_dtheta(theta, dirs_.origin_data)) {
        const auto p = static_cast<Eigen::Index>(model_->dim());
        RealMatrix out(p, p);
        for (Eigen::Index k = 0; k < p; ++k) out.col(k) = combine(m->col(k));
        return out;
      }
    }
    return jacobian([&](const RealVector& t) { return phi(t); }, theta);
  }

 private:
  // dl/dy at y°, closed form unless forced numeric.
  RealVector sample_gradient(const RealVector& theta) const {
    if (!numeric_only_) {
      if (auto g = model_->loglik_dy(theta, dirs_.origin_data)) return *g;
    }
    return gradient([&](const RealVector& y) { return model_->loglik(theta, y); },
                    dirs_.origin_data);
  }

  // Applies V^T to a sample-space vector (or its local-score analogue).
  RealVector combine(const RealVector& g) const {
    if (dirs_.space == DirectionSpace::observation) return dirs_.V.transpose() * g;
    const Eigen::Index p = dirs_.V.cols();
    RealVector out = RealVector::Zero(p);
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      const RealVector b = dirs_.score_dy.row(j).transpose();
      const double bb = b.squaredNorm();
      if (bb == 0.0) continue;
      // dl/dw_j = (dl/dy_j)(dw_j/dy_j)^+ for the p-vector w_j
      out += dirs_.block(j).transpose() * (b * (g[j] / bb));
    }
    return out;
  }

  ModelPtr model_;
  Directions dirs_;
  bool numeric_only_;
};

inline CanonicalParam canonical_phi(ModelPtr model, const Directions& dirs,
                                    bool numeric_only = false) {
  return CanonicalParam(std::move(model), dirs, numeric_only);
}

// ---------------------------------------------------------------------------
// Departure measures

struct ChiProjection {
  RealVector u;
  double chi_hat = 0.0;
  double chi_psi = 0.0;
};

/// u is the normalised first row of (dphi/dtheta^T)^{-1} at theta_hat_psi.
inline ChiProjection chi_projection(const CanonicalParam& cp, const Fit& fit,
                                    const ConstrainedFit& cfit) {
  const RealMatrix jac = cp.dphi_dtheta(cfit.theta);
  Eigen::FullPivLU<RealMatrix> lu(jac);
  if (!lu.isInvertible()) {
    throw SingularityError(cp.model().id() + ": dphi/dtheta is singular at " +
                           format_vector(cfit.theta) + " (theta not identifiable from phi)");
  }
  // first row of J^{-1} solves J^T x = e_1
  RealVector e1 = RealVector::Zero(jac.rows());
  e1[0] = 1.0;
  const RealVector row = lu.transpose().solve(e1);
  ChiProjection out;
  out.u = row / row.norm();
  out.chi_hat = out.u.dot(cp.phi(fit.theta_hat));
  out.chi_psi = out.u.dot(cp.phi(cfit.theta));
  return out;
}

/// Departure q for the interest component when p >= 2; computed through the
/// projection chi and cross-checked against the determinant form.
inline double q_general(const Model& model, const CanonicalParam& cp, const Fit& fit,
                        const ConstrainedFit& cfit) {
  const auto p = static_cast<Eigen::Index>(model.dim());
  if (p < 2) throw UnsupportedError(model.id() + ": q_general needs p >= 2; use q_scalar");
  const double sgn = detail::sign(fit.theta_hat[0] - cfit.psi);

  const RealMatrix jac_hat = cp.dphi_dtheta(fit.theta_hat);
  const RealMatrix jac_psi = cp.dphi_dtheta(cfit.theta);
  const double det_jac = std::abs(jac_hat.determinant());
  const double det_info = fit.obs_info.determinant();
  const double det_info_ll = cfit.info_lambda_block.determinant();
  if (!(det_info > 0.0) || !(det_info_ll > 0.0) || !(det_jac > 0.0)) {
    throw SingularityError(model.id() + ": non-positive information determinant at psi = " +
                           std::to_string(cfit.psi));
  }
  const RealMatrix jac_lambda = jac_psi.rightCols(p - 1);
  const double area = gram_det_sqrt(jac_lambda);

  const ChiProjection chi = chi_projection(cp, fit, cfit);
  const double info_phi = det_info / (det_jac * det_jac);
  const double info_phi_ll = det_info_ll / (area * area);
  const double q = sgn * std::abs(chi.chi_hat - chi.chi_psi) * std::sqrt(info_phi / info_phi_ll);

  RealMatrix m(p, p);
  m.col(0) = cp.phi(fit.theta_hat) - cp.phi(cfit.theta);
  m.rightCols(p - 1) = jac_lambda;
  const double q_det =
      sgn * std::abs(m.determinant()) / det_jac * std::sqrt(det_info / det_info_ll);
  if (std::abs(q - q_det) > 1e-8 * std::abs(q) + 1e-12) {
    char buf[160];
    std::snprintf(buf, sizeof buf, ": projection and determinant forms of q disagree (%.12g vs %.12g)",
                  q, q_det);
    throw ConsistencyError(model.id() + buf);
  }
  return q;
}

/// One-parameter departure in phi units.
inline double q_scalar(const Model& model, const CanonicalParam& cp, const Fit& fit,
                       double theta) {
  if (model.dim() != 1) throw UnsupportedError(model.id() + ": q_scalar needs p = 1");
  const RealVector th = RealVector::Constant(1, theta);
  const double dphi = cp.dphi_dtheta(fit.theta_hat)(0, 0);
  if (dphi == 0.0 || !std::isfinite(dphi)) {
    throw SingularityError(model.id() + ": dphi/dtheta vanishes at theta_hat");
  }
  const double diff = cp.phi(fit.theta_hat)[0] - cp.phi(th)[0];
  return detail::sign(fit.theta_hat[0] - theta) * std::abs(diff) *
         std::sqrt(fit.obs_info(0, 0)) / std::abs(dphi);
}

// ---------------------------------------------------------------------------
// Tail approximations

constexpr double kSingularWindow = 0.05;

struct TailValue {
  double value = 0.0;
  bool interpolated = false;  // inside |r| < window; value is NaN until filled
};

namespace detail {

inline void check_signs(double r, double q) {
  if (!std::isfinite(r) || !std::isfinite(q)) throw DomainError("r or q is not finite");
  if (!(q / r > 0.0)) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "r = %.10g and q = %.10g have different signs", r, q);
    throw SignMismatchError(buf);
  }
}

}  // namespace detail

inline TailValue rstar(double r, double q) {
  if (std::abs(r) < kSingularWindow) return {std::numeric_limits<double>::quiet_NaN(), true};
  detail::check_signs(r, q);
  return {r + std::log(q / r) / r, false};
}

inline TailValue lugannani_rice(double r, double q) {
  if (std::abs(r) < kSingularWindow) return {std::numeric_limits<double>::quiet_NaN(), true};
  detail::check_signs(r, q);
  const double v = normal_cdf(r) + (1.0 / r - 1.0 / q) * normal_pdf(r);
  return {std::clamp(v, 0.0, 1.0), false};
}

// ---------------------------------------------------------------------------
// Pipeline and significance curves

struct PivotSet {
  double psi = 0.0;
  double r = 0.0;
  double q = 0.0;
  double t = 0.0;  // Wald
  double s = 0.0;  // score
  double rstar = 0.0;
  double phi_r = 0.0;
  double phi_t = 0.0;
  double phi_rstar = 0.0;
  double lugannani_rice = 0.0;
  bool interpolated = false;
};

struct SignificanceCurve {
  RealVector grid;
  std::vector<PivotSet> points;
  std::string model_id;
  std::string data_digest;
  int accuracy_order = 3;
  double psi_hat = std::numeric_limits<double>::quiet_NaN();
  double std_error = std::numeric_limits<double>::quiet_NaN();
  // Re-evaluates the pipeline at any psi; empty for curves read from disk.
  std::function<PivotSet(double)> refine;
};

// FNV-1a over the bit patterns of the data.
inline std::string data_digest(const RealVector& y) {
  std::uint64_t h = 1469598103934665603ULL;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    std::uint64_t bits = 0;
    const double v = y[i];
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline void finish(PivotSet& ps) {
  ps.phi_r = normal_cdf(ps.r);
  ps.phi_t = normal_cdf(ps.t);
  const TailValue rs = rstar(ps.r, ps.q);
  const TailValue lr = lugannani_rice(ps.r, ps.q);
  ps.interpolated = rs.interpolated;
  ps.rstar = rs.value;
  ps.lugannani_rice = lr.value;
  ps.phi_rstar = rs.interpolated ? rs.value : normal_cdf(rs.value);
}

// Indices of up to four points nearest to x (two per side when possible).
inline std::vector<std::size_t> nearest_four(const std::vector<double>& xs, double x) {
  std::vector<std::size_t> left, right;
  for (std::size_t i = 0; i < xs.size(); ++i) (xs[i] < x ? left : right).push_back(i);
  std::reverse(left.begin(), left.end());  // nearest first
  std::size_t nl = std::min<std::size_t>(2, left.size());
  std::size_t nr = std::min<std::size_t>(2, right.size());
  while (nl + nr < 4 && nl < left.size()) ++nl;
  while (nl + nr < 4 && nr < right.size()) ++nr;
  std::vector<std::size_t> out(left.begin(), left.begin() + static_cast<std::ptrdiff_t>(nl));
  out.insert(out.end(), right.begin(), right.begin() + static_cast<std::ptrdiff_t>(nr));
  std::sort(out.begin(), out.end());
  return out;
}

// Fills r* and Lugannani-Rice at `target` from the non-window points.
inline void fill_from(PivotSet& target, const std::vector<PivotSet>& support) {
  std::vector<double> xs;
  for (const auto& s : support) xs.push_back(s.psi);
  const auto idx = nearest_four(xs, target.psi);
  std::vector<double> px, pr, pl;
  for (std::size_t i : idx) {
    px.push_back(support[i].psi);
    pr.push_back(support[i].rstar);
    pl.push_back(support[i].lugannani_rice);
  }
  target.rstar = pchip(px, pr, target.psi);
  target.lugannani_rice = std::clamp(pchip(px, pl, target.psi), 0.0, 1.0);
  target.phi_rstar = normal_cdf(target.rstar);
  target.interpolated = true;
}

}  // namespace detail

class Pipeline {
 public:
  explicit Pipeline(ModelPtr model)
      : Pipeline(model, fit_mle(*model)) {}

  Pipeline(ModelPtr model, Fit fit)
      : model_(std::move(model)),
        fit_(std::move(fit)),
        cp_(model_, default_directions(*model_, fit_)) {
    const double jp = detail::schur_profile_info(fit_.obs_info, model_->id());
    if (!(jp > 0.0)) throw SingularityError(model_->id() + ": profile information is not positive");
    se_ = 1.0 / std::sqrt(jp);
  }

  Pipeline(ModelPtr model, Fit fit, Directions dirs)
      : model_(std::move(model)), fit_(std::move(fit)), cp_(model_, std::move(dirs)) {
    se_ = 1.0 / std::sqrt(detail::schur_profile_info(fit_.obs_info, model_->id()));
  }

  const Model& model() const noexcept { return *model_; }
  const ModelPtr& model_ptr() const noexcept { return model_; }
  const Fit& fit() const noexcept { return fit_; }
  const CanonicalParam& canonical() const noexcept { return cp_; }
  double psi_hat() const { return fit_.theta_hat[0]; }
  double std_error() const noexcept { return se_; }

  /// Pivots at psi. Inside the singular window r* and LR are NaN and the
  /// interpolated flag is set.
  PivotSet evaluate(double psi) const { return evaluate_warm(psi, fit_.theta_hat).first; }

  /// As evaluate, with window values filled from four nearby points.
  PivotSet evaluate_filled(double psi) const {
    PivotSet ps = evaluate(psi);
    if (!ps.interpolated) return ps;
    for (double scale = 1.0; scale <= 64.0; scale *= 2.0) {
      std::vector<PivotSet> support;
      bool ok = true;
      for (double k : {-0.2, -0.1, 0.1, 0.2}) {
        const double at = psi_hat() + k * scale * se_;
        RealVector th = fit_.theta_hat;
        th[0] = at;
        if (!model_->admissible(th)) {
          ok = false;
          break;
        }
        PivotSet s = evaluate(at);
        if (s.interpolated) {
          ok = false;
          break;
        }
        support.push_back(s);
      }
      if (ok) {
        detail::fill_from(ps, support);
        return ps;
      }
    }
    throw NumericalError(model_->id() + ": could not bracket the singular window at psi = " +
                         std::to_string(psi));
  }

  SignificanceCurve curve(const RealVector& grid) const {
    if (grid.size() < 2) throw UsageError("significance curve: grid needs at least two points");
    for (Eigen::Index i = 1; i < grid.size(); ++i) {
      if (!(grid[i] > grid[i - 1])) {
        throw UsageError("significance curve: grid must be strictly increasing");
      }
    }
    SignificanceCurve out;
    out.grid = grid;
    out.model_id = model_->id();
    out.data_digest = data_digest(model_->data());
    out.accuracy_order = model_->accuracy_order();
    out.psi_hat = psi_hat();
    out.std_error = se_;
    out.points.resize(static_cast<std::size_t>(grid.size()));

    Eigen::Index centre = 0;
    (grid.array() - psi_hat()).abs().minCoeff(&centre);
    auto at = [&](Eigen::Index i, const RealVector& warm) {
      try {
        auto res = evaluate_warm(grid[i], warm);
        out.points[static_cast<std::size_t>(i)] = res.first;
        return res.second;
      } catch (const UsageError&) {
        throw;
      } catch (const NumericalError& e) {
        throw NumericalError("significance curve at psi = " + std::to_string(grid[i]) + ": " +
                             e.what());
      }
    };
    const RealVector mid = at(centre, fit_.theta_hat);
    RealVector warm = mid;
    for (Eigen::Index i = centre + 1; i < grid.size(); ++i) warm = at(i, warm);
    warm = mid;
    for (Eigen::Index i = centre - 1; i >= 0; --i) warm = at(i, warm);

    std::vector<PivotSet> support;
    for (const auto& ps : out.points) {
      if (!ps.interpolated) support.push_back(ps);
    }
    const bool any_window = support.size() < out.points.size();
    if (any_window) {
      if (support.size() < 4) {
        throw NumericalError(model_->id() +
                             ": curve too short, fewer than 4 points outside the singular window");
      }
      for (auto& ps : out.points) {
        if (ps.interpolated) detail::fill_from(ps, support);
      }
    }
    auto self = *this;
    out.refine = [self](double psi) { return self.evaluate_filled(psi); };
    return out;
  }

  /// psi_hat +- width standard errors, kept inside the parameter domain.
  RealVector auto_grid(int count = 61, double width = 5.0) const {
    if (count < 8) throw UsageError("auto grid needs at least 8 points");
    const Box box = model_->domain();
    double lo = psi_hat() - width * se_;
    double hi = psi_hat() + width * se_;
    if (lo <= box.lower[0]) lo = box.lower[0] + 0.05 * (psi_hat() - box.lower[0]);
    if (hi >= box.upper[0]) hi = box.upper[0] - 0.05 * (box.upper[0] - psi_hat());
    return RealVector::LinSpaced(count, lo, hi);
  }

 private:
  // Returns the pivots and the constrained fit used (as a warm start).
  std::pair<PivotSet, RealVector> evaluate_warm(double psi, const RealVector& warm) const {
    RealVector th = fit_.theta_hat;
    th[0] = psi;
    if (!model_->admissible(th)) {
      throw UsageError(model_->id() + ": psi = " + std::to_string(psi) + " is not admissible");
    }
    PivotSet ps;
    ps.psi = psi;
    RealVector used = fit_.theta_hat;
    if (model_->dim() == 1) {
      const FirstOrderPivots fo = pivots_scalar(*model_, fit_, psi);
      ps.r = fo.root;
      ps.t = fo.wald;
      ps.s = fo.score;
      ps.q = q_scalar(*model_, cp_, fit_, psi);
      used = th;
    } else {
      const ConstrainedFit cf = fit_constrained(*model_, psi, warm);
      const FirstOrderPivots fo = pivots_profile(*model_, fit_, cf);
      ps.r = fo.root;
      ps.t = fo.wald;
      ps.s = fo.score;
      ps.q = q_general(*model_, cp_, fit_, cf);
      used = cf.theta;
    }
    detail::finish(ps);
    return {ps, used};
  }

  ModelPtr model_;
  Fit fit_;
  CanonicalParam cp_;
  double se_ = 1.0;
};

inline SignificanceCurve significance_curve(ModelPtr model, const RealVector& psi_grid) {
  return Pipeline(std::move(model)).curve(psi_grid);
}

// ---------------------------------------------------------------------------
// Confidence intervals

enum class IntervalMethod { rstar, root, wald, lugannani_rice };

inline std::string method_name(IntervalMethod m) {
  switch (m) {
    case IntervalMethod::rstar: return "rstar";
    case IntervalMethod::root: return "root";
    case IntervalMethod::wald: return "wald";
    case IntervalMethod::lugannani_rice: return "lugannani_rice";
  }
  return "?";
}

inline IntervalMethod parse_method(const std::string& s) {
  if (s == "rstar") return IntervalMethod::rstar;
  if (s == "root" || s == "r") return IntervalMethod::root;
  if (s == "wald" || s == "t") return IntervalMethod::wald;
  if (s == "lugannani_rice" || s == "lr") return IntervalMethod::lugannani_rice;
  throw UsageError("unknown interval method '" + s + "' (rstar, root, wald, lugannani_rice)");
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

namespace detail {

// Pivot-scale value whose normal cdf is the significance; the LR tail area is
// mapped through the probit so curve interpolation happens on a smooth scale.
inline double pivot_value(const PivotSet& ps, IntervalMethod m) {
  switch (m) {
    case IntervalMethod::rstar: return ps.rstar;
    case IntervalMethod::root: return ps.r;
    case IntervalMethod::wald: return ps.t;
    case IntervalMethod::lugannani_rice:
      return normal_quantile(std::clamp(ps.lugannani_rice, 1e-300, 1.0 - 1e-16));
  }
  return 0.0;
}

// Cubic through four points (Lagrange form).
inline double cubic4(const double* x, const double* y, double at) {
  double v = 0.0;
  for (int i = 0; i < 4; ++i) {
    double w = 1.0;
    for (int j = 0; j < 4; ++j) {
      if (j != i) w *= (at - x[j]) / (x[i] - x[j]);
    }
    v += w * y[i];
  }
  return v;
}

template <class F>
double bisect_decreasing(F&& f, double lo, double hi, double target, double tol) {
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double solve_endpoint(const SignificanceCurve& c, IntervalMethod m, double prob) {
  const double target = normal_quantile(prob);
  const std::size_t n = c.points.size();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = pivot_value(c.points[i], m);

  std::size_t k = n;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (v[i] >= target && v[i + 1] <= target) {
      k = i;
      break;
    }
  }
  if (k == n) {
    const double lo = c.grid[0];
    const double hi = c.grid[c.grid.size() - 1];
    const double span = hi - lo;
    const bool below = v.front() < target;  // need smaller psi
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "significance %.6g is not bracketed by the grid [%.6g, %.6g]; extend the grid %s",
                  prob, lo, hi, below ? "downward" : "upward");
    throw ExtendGridError(buf, below ? lo - span : lo, below ? hi : hi + span);
  }
  const double a = c.grid[static_cast<Eigen::Index>(k)];
  const double b = c.grid[static_cast<Eigen::Index>(k + 1)];
  const double scale = std::isfinite(c.std_error) && c.std_error > 0 ? c.std_error : b - a;

  if (c.refine) {
    return bisect_decreasing([&](double psi) { return pivot_value(c.refine(psi), m); }, a, b,
                             target, 1e-6 * scale);
  }
  // Local cubic through the two grid points on each side of the bracket.
  std::size_t first = k >= 1 ? k - 1 : 0;
  if (first + 4 > n) first = n >= 4 ? n - 4 : 0;
  if (n < 4) {
    const double w = (v[k] - target) / (v[k] - v[k + 1]);
    return a + w * (b - a);
  }
  double xs[4], ys[4];
  for (int i = 0; i < 4; ++i) {
    xs[i] = c.grid[static_cast<Eigen::Index>(first + static_cast<std::size_t>(i))];
    ys[i] = v[first + static_cast<std::size_t>(i)];
  }
  return bisect_decreasing([&](double psi) { return cubic4(xs, ys, psi); }, a, b, target,
                           1e-12 * scale);
}

}  // namespace detail

/// Equal-tailed interval: the lower limit solves p(psi) = 1 - alpha and the
/// upper limit p(psi) = alpha, alpha = (1 - level)/2.
inline Interval confidence_interval(const SignificanceCurve& curve, double level,
                                    IntervalMethod method = IntervalMethod::rstar) {
  if (!(level > 0.0 && level < 1.0)) throw UsageError("confidence level must lie in (0, 1)");
  if (curve.points.size() != static_cast<std::size_t>(curve.grid.size()) || curve.points.size() < 2) {
    throw UsageError("confidence interval: malformed significance curve");
  }
  const double alpha = 0.5 * (1.0 - level);
  return {detail::solve_endpoint(curve, method, 1.0 - alpha),
          detail::solve_endpoint(curve, method, alpha)};
}

}  // namespace hoa
