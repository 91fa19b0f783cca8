#pragma once

// Monte-Carlo calibration: simulate at a true parameter, compute each
// method's significance at the true interest value, and summarise coverage
// and uniformity of the resulting p-values.
//
// Replicate k draws from an mt19937_64 seeded with splitmix64(seed, k), and
// results are stored by index, so reports do not depend on the worker count.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "hoa/models.hpp"
#include "hoa/tem.hpp"

namespace hoa {

inline const std::vector<std::string>& mc_methods() {
  static const std::vector<std::string> names{"wald", "root", "rstar", "lugannani_rice"};
  return names;
}

struct MethodRecord {
  std::string method;
  std::map<double, double> coverage;  // level -> rate among successful replicates
  double ks = 0.0;                    // sup |F_n(p) - p|
};

struct CoverageReport {
  std::string model_id;
  RealVector true_theta;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::size_t failures = 0;
  bool unreliable = false;
  std::vector<double> levels;
  std::vector<MethodRecord> methods;
  // per replicate, per method (NaN for failed replicates)
  std::vector<std::array<double, 4>> pvalues;

  const MethodRecord& method(const std::string& name) const {
    for (const auto& m : methods) {
      if (m.method == name) return m;
    }
    throw UsageError("coverage report has no method '" + name + "'");
  }
  std::size_t successes() const { return replicates - failures; }
};

struct CoverageOptions {
  unsigned workers = 0;  // 0: HOA_WORKERS or hardware concurrency
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t k) {
  return splitmix64(splitmix64(seed) ^ splitmix64(k + 0x632be59bd9b4e019ULL));
}

// Two-sided Kolmogorov-Smirnov distance to the uniform distribution.
inline double ks_uniform(std::vector<double> u) {
  if (u.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max({d, u[i] - lo, hi - u[i]});
  }
  return d;
}

inline unsigned worker_count(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HOA_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Significances of (wald, root, rstar, lugannani_rice) at psi for one data set.
inline std::array<double, 4> replicate_pvalues(const ModelPtr& model, double psi) {
  const Pipeline pipe(model);
  const PivotSet ps = pipe.evaluate_filled(psi);
  return {ps.phi_t, ps.phi_r, ps.phi_rstar, ps.lugannani_rice};
}

inline CoverageReport run_coverage(const ModelPtr& prototype, const RealVector& true_theta,
                                   std::size_t replicates, const std::vector<double>& levels,
                                   std::uint64_t seed, const CoverageOptions& opt = {}) {
  if (replicates < 100) throw UsageError("run_coverage: need at least 100 replicates");
  if (true_theta.size() != static_cast<Eigen::Index>(prototype->dim())) {
    throw UsageError("run_coverage: true theta has length " + std::to_string(true_theta.size()) +
                     ", model dimension is " + std::to_string(prototype->dim()));
  }
  if (!prototype->admissible(true_theta)) {
    throw UsageError("run_coverage: true theta " + format_vector(true_theta) +
                     " is outside the parameter domain");
  }
  for (double l : levels) {
    if (!(l > 0.0 && l < 1.0)) throw UsageError("run_coverage: levels must lie in (0, 1)");
  }

  CoverageReport rep;
  rep.model_id = prototype->id();
  rep.true_theta = true_theta;
  rep.replicates = replicates;
  rep.seed = seed;
  rep.levels = levels;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  rep.pvalues.assign(replicates, {nan, nan, nan, nan});

  const double psi = true_theta[0];
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next.fetch_add(1); k < replicates; k = next.fetch_add(1)) {
      std::mt19937_64 rng(replicate_seed(seed, k));
      try {
        const ModelPtr m = prototype->with_data(prototype->simulate(true_theta, rng));
        rep.pvalues[k] = replicate_pvalues(m, psi);
      } catch (const NumericalError&) {
      } catch (const UsageError&) {
        // simulated data outside the model's support (e.g. a degenerate sample)
      }
    }
  };
  {
    const unsigned nw = std::min<unsigned>(worker_count(opt.workers),
                                           static_cast<unsigned>(replicates));
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < nw; ++w) pool.emplace_back(work);
    work();
  }

  for (const auto& pv : rep.pvalues) {
    if (std::isnan(pv[0]) || std::isnan(pv[2])) ++rep.failures;
  }
  rep.unreliable = static_cast<double>(rep.failures) > 0.05 * static_cast<double>(replicates);
  for (std::size_t m = 0; m < 4; ++m) {
    MethodRecord rec;
    rec.method = mc_methods()[m];
    std::vector<double> ok;
    for (const auto& pv : rep.pvalues) {
      if (!std::isnan(pv[0]) && !std::isnan(pv[2])) ok.push_back(pv[m]);
    }
    for (double l : levels) {
      const double alpha = 0.5 * (1.0 - l);
      std::size_t hit = 0;
      for (double p : ok) hit += (p > alpha && p < 1.0 - alpha) ? 1 : 0;
      rec.coverage[l] = ok.empty() ? nan : static_cast<double>(hit) / static_cast<double>(ok.size());
    }
    rec.ks = ks_uniform(ok);
    rep.methods.push_back(rec);
  }
  return rep;
}

inline CoverageReport run_coverage(const std::string& model_id, const HyperParams& hyper,
                                   const DataRows& data, const RealVector& true_theta,
                                   std::size_t replicates, const std::vector<double>& levels,
                                   std::uint64_t seed, const CoverageOptions& opt = {}) {
  return run_coverage(catalog(model_id, hyper, data), true_theta, replicates, levels, seed, opt);
}

// ---------------------------------------------------------------------------
// Serialisation

inline nlohmann::ordered_json to_json(const CoverageReport& rep) {
  nlohmann::ordered_json j;
  j["model_id"] = rep.model_id;
  j["true_theta"] = to_std(rep.true_theta);
  j["replicates"] = rep.replicates;
  j["seed"] = rep.seed;
  j["failures"] = rep.failures;
  j["unreliable"] = rep.unreliable;
  j["levels"] = rep.levels;
  nlohmann::ordered_json methods = nlohmann::ordered_json::object();
  for (const auto& m : rep.methods) {
    nlohmann::ordered_json rec;
    nlohmann::ordered_json cov = nlohmann::ordered_json::array();
    for (const auto& [level, rate] : m.coverage) cov.push_back({{"level", level}, {"rate", rate}});
    rec["coverage"] = cov;
    rec["ks"] = m.ks;
    methods[m.method] = rec;
  }
  j["methods"] = methods;
  return j;
}

inline std::string pvalues_csv(const CoverageReport& rep) {
  std::string out = "replicate,wald,root,rstar,lugannani_rice\n";
  char buf[64];
  for (std::size_t k = 0; k < rep.pvalues.size(); ++k) {
    out += std::to_string(k);
    for (double v : rep.pvalues[k]) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace hoa
