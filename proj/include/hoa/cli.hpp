#pragma once

// Command-line front end.
//
//   hoa fit      --model ID|doc.json [--hyper k=v,...] [--data FILE]
//   hoa signif   ... --psi-grid lo:hi:count|auto [--format csv|json] [--out FILE]
//   hoa ci       ... --level 0.95 [--psi-grid SPEC]   |   hoa ci --curve curve.csv
//   hoa coverage --model ID --hyper n=5 --true-theta 1 --replicates 10000
//                --levels 0.9,0.95 --seed 42 [--pvalues FILE]
//
// Exit codes: 0 success, 2 usage error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hoa/io.hpp"
#include "hoa/mc.hpp"

namespace hoa::cli {

struct RunConfig {
  std::string command;
  std::string model;
  std::string hyper;
  std::string data;
  std::string curve;
  std::string psi_grid = "auto";
  double level = 0.95;
  std::uint64_t seed = 1;
  std::size_t replicates = 1000;
  std::string true_theta;
  std::string levels = "0.90,0.95,0.99";
  std::string out;
  std::string pvalues;
  std::string format;
  unsigned workers = 0;
};

inline HyperParams parse_hyper(const std::string& spec) {
  HyperParams h;
  if (spec.empty()) return h;
  for (const auto& item : detail::split(spec, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    double v = 0.0;
    if (eq == std::string::npos || !detail::parse_double(detail::trim(item.substr(eq + 1)), v)) {
      throw UsageError("--hyper expects key=value pairs separated by commas, got '" + item + "'");
    }
    h[detail::trim(item.substr(0, eq))] = v;
  }
  return h;
}

inline std::vector<double> parse_list(const std::string& spec, const std::string& flag) {
  std::vector<double> out;
  for (const auto& item : detail::split(spec, ',')) {
    double v = 0.0;
    if (!detail::parse_double(item, v)) {
      throw UsageError(flag + " expects comma-separated numbers, got '" + spec + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(flag + " is empty");
  return out;
}

// Empty optional means "auto".
inline std::optional<RealVector> parse_grid(const std::string& spec) {
  if (spec == "auto") return std::nullopt;
  const auto parts = detail::split(spec, ':');
  double lo = 0, hi = 0, count = 0;
  if (parts.size() != 3 || !detail::parse_double(parts[0], lo) ||
      !detail::parse_double(parts[1], hi) || !detail::parse_double(parts[2], count)) {
    throw UsageError("--psi-grid expects lo:hi:count or auto, got '" + spec + "'");
  }
  if (count < 8 || count != std::floor(count)) {
    throw UsageError("--psi-grid count must be an integer of at least 8");
  }
  if (!(hi > lo)) throw UsageError("--psi-grid needs lo < hi");
  return RealVector::LinSpaced(static_cast<Eigen::Index>(count), lo, hi);
}

inline ModelPtr load_model(const RunConfig& cfg) {
  ModelDocument doc;
  if (cfg.model.empty()) throw UsageError("--model is required (catalog id or JSON document)");
  const bool is_file = cfg.model.find(".json") != std::string::npos ||
                       std::filesystem::exists(cfg.model);
  if (is_file) {
    doc = load_model_document(cfg.model);
    if (doc.id.empty()) throw UsageError(cfg.model + ": document has no 'id'");
  } else {
    doc.id = cfg.model;
  }
  if (!cfg.data.empty()) {
    ModelDocument d = load_data_file(cfg.data);
    if (!d.id.empty() && d.id != doc.id) {
      throw UsageError(cfg.data + ": data document is for model '" + d.id + "', not '" + doc.id +
                       "'");
    }
    for (const auto& [k, v] : d.hyper) doc.hyper[k] = v;
    doc.data = d.data;
  }
  for (const auto& [k, v] : parse_hyper(cfg.hyper)) doc.hyper[k] = v;
  return catalog(doc.id, doc.hyper, doc.data);
}

inline void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
  if (cfg.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(cfg.out, std::ios::binary);
  if (!f) throw UsageError("cannot write output file '" + cfg.out + "'");
  f << text;
}

inline std::string json_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

inline void run_fit(const RunConfig& cfg, std::ostream& out) {
  const ModelPtr model = load_model(cfg);
  const Fit fit = fit_mle(*model);
  nlohmann::ordered_json j;
  j["model_id"] = model->id();
  j["parameter_names"] = model->parameter_names();
  j["theta_hat"] = to_std(fit.theta_hat);
  j["loglik_max"] = fit.loglik_max;
  std::vector<std::vector<double>> info;
  for (Eigen::Index i = 0; i < fit.obs_info.rows(); ++i) info.push_back(to_std(fit.obs_info.row(i)));
  j["obs_info"] = info;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  emit(cfg, json_text(j), out);
}

inline SignificanceCurve build_curve(const RunConfig& cfg) {
  const Pipeline pipe(load_model(cfg));
  const auto grid = parse_grid(cfg.psi_grid);
  return pipe.curve(grid ? *grid : pipe.auto_grid());
}

inline void run_signif(const RunConfig& cfg, std::ostream& out) {
  const SignificanceCurve c = build_curve(cfg);
  if (cfg.format == "json") {
    emit(cfg, json_text(curve_to_json(c)), out);
  } else {
    emit(cfg, curve_to_csv(c), out);
  }
}

inline void run_ci(const RunConfig& cfg, std::ostream& out) {
  SignificanceCurve c;
  std::vector<IntervalMethod> methods{IntervalMethod::root, IntervalMethod::rstar,
                                      IntervalMethod::wald, IntervalMethod::lugannani_rice};
  if (!cfg.curve.empty()) {
    if (!cfg.model.empty()) throw UsageError("give either --curve or --model, not both");
    c = load_curve_csv(cfg.curve);
    methods = {IntervalMethod::root, IntervalMethod::rstar, IntervalMethod::lugannani_rice};
  } else {
    c = build_curve(cfg);
  }
  std::vector<std::pair<IntervalMethod, Interval>> res;
  for (auto m : methods) res.emplace_back(m, confidence_interval(c, cfg.level, m));

  if (cfg.format == "json") {
    nlohmann::ordered_json j;
    j["level"] = cfg.level;
    j["accuracy_order"] = c.accuracy_order;
    for (const auto& [m, iv] : res) j["intervals"][method_name(m)] = {iv.lower, iv.upper};
    emit(cfg, json_text(j), out);
    return;
  }
  std::string text = "method,level,lower,upper\n";
  for (const auto& [m, iv] : res) {
    text += method_name(m) + "," + detail::fmt17(cfg.level) + "," + detail::fmt17(iv.lower) + "," +
            detail::fmt17(iv.upper) + "\n";
  }
  emit(cfg, text, out);
}

inline void run_cov(const RunConfig& cfg, std::ostream& out) {
  const ModelPtr model = load_model(cfg);
  if (cfg.true_theta.empty()) throw UsageError("coverage needs --true-theta");
  const RealVector truth = from_std(parse_list(cfg.true_theta, "--true-theta"));
  const auto levels = parse_list(cfg.levels, "--levels");
  const CoverageReport rep =
      run_coverage(model, truth, cfg.replicates, levels, cfg.seed, CoverageOptions{cfg.workers});
  emit(cfg, json_text(to_json(rep)), out);
  if (!cfg.pvalues.empty()) {
    std::ofstream f(cfg.pvalues, std::ios::binary);
    if (!f) throw UsageError("cannot write p-value file '" + cfg.pvalues + "'");
    f << pvalues_csv(rep);
  }
}

/// Parses argv and dispatches; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"Higher-order likelihood inference: significance curves, intervals, coverage"};
  app.require_subcommand(1, 1);

  auto model_opts = [&](CLI::App* sub) {
    sub->add_option("--model", cfg.model, "catalog id or JSON model document");
    sub->add_option("--hyper", cfg.hyper, "hyperparameters as k=v,k=v");
    sub->add_option("--data", cfg.data, "data file (JSON document or CSV)");
    sub->add_option("--out", cfg.out, "output path (default stdout)");
    sub->add_option("--format", cfg.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  };
  auto* fit = app.add_subcommand("fit", "maximum likelihood fit");
  model_opts(fit);
  auto* sig = app.add_subcommand("signif", "significance curve over a psi grid");
  model_opts(sig);
  sig->add_option("--psi-grid", cfg.psi_grid, "lo:hi:count or auto");
  auto* ci = app.add_subcommand("ci", "first- and higher-order confidence intervals");
  model_opts(ci);
  ci->add_option("--psi-grid", cfg.psi_grid, "lo:hi:count or auto");
  ci->add_option("--level", cfg.level, "confidence level in (0,1)");
  ci->add_option("--curve", cfg.curve, "solve from a curve CSV written by signif");
  auto* cov = app.add_subcommand("coverage", "Monte-Carlo coverage and p-value uniformity");
  model_opts(cov);
  cov->add_option("--true-theta", cfg.true_theta, "true parameter, comma separated")->required();
  cov->add_option("--replicates", cfg.replicates, "number of replicates (>= 100)");
  cov->add_option("--levels", cfg.levels, "coverage levels, comma separated");
  cov->add_option("--seed", cfg.seed, "base seed");
  cov->add_option("--pvalues", cfg.pvalues, "optional CSV of per-replicate p-values");
  cov->add_option("--workers", cfg.workers, "worker threads (default HOA_WORKERS or cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (fit->parsed()) {
      run_fit(cfg, out);
    } else if (sig->parsed()) {
      run_signif(cfg, out);
    } else if (ci->parsed()) {
      run_ci(cfg, out);
    } else {
      run_cov(cfg, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ExtendGridError& e) {
    char buf[120];
    std::snprintf(buf, sizeof buf, " (try --psi-grid %.6g:%.6g:61)", e.suggested_lo(),
                  e.suggested_hi());
    err << "error: " << e.what() << buf << "\n";
    return 3;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace hoa::cli
