#pragma once

// Reading model documents and data files; writing and reading curves.
//
// Model document (JSON):  {"id": "exp_pair", "hyper": {"k": v, ...}, "data": [...]}
// where data holds numbers (one value per observation) or arrays (one row
// per observation). Data CSV: one observation per line, optional header.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hoa/models.hpp"
#include "hoa/tem.hpp"

namespace hoa {

struct ModelDocument {
  std::string id;
  HyperParams hyper;
  DataRows data;
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline ModelDocument parse_model_document(const std::string& text, const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("malformed JSON in " + source + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError(source + ": expected a JSON object {id, hyper, data}");
  ModelDocument doc;
  try {
    if (j.contains("id")) doc.id = j.at("id").get<std::string>();
    if (j.contains("hyper")) {
      for (const auto& [k, v] : j.at("hyper").items()) doc.hyper[k] = v.get<double>();
    }
    if (j.contains("data")) {
      for (const auto& row : j.at("data")) {
        if (row.is_array()) {
          doc.data.push_back(row.get<std::vector<double>>());
        } else {
          doc.data.push_back({row.get<double>()});
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(source + ": unexpected field type (" + std::string(e.what()) + ")");
  }
  return doc;
}

inline ModelDocument load_model_document(const std::string& path) {
  return parse_model_document(detail::read_file(path), path);
}

/// Numeric CSV rows; a first line that does not parse is taken as a header.
inline DataRows parse_data_csv(const std::string& text, const std::string& source) {
  DataRows rows;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    bool ok = true;
    for (const auto& cell : detail::split(line, ',')) {
      double v = 0.0;
      if (!detail::parse_double(cell, v)) {
        ok = false;
        break;
      }
      row.push_back(v);
    }
    if (!ok) {
      if (rows.empty() && lineno == 1) continue;
      throw UsageError(source + ":" + std::to_string(lineno) + ": non-numeric value in CSV");
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw UsageError(source + ": no data rows");
  return rows;
}

/// JSON document when the file parses as JSON, else CSV.
inline ModelDocument load_data_file(const std::string& path) {
  const std::string text = detail::read_file(path);
  const std::string t = detail::trim(text);
  if (!t.empty() && (t[0] == '{' || t[0] == '[')) {
    if (t[0] == '[') return parse_model_document("{\"data\":" + text + "}", path);
    return parse_model_document(text, path);
  }
  ModelDocument doc;
  doc.data = parse_data_csv(text, path);
  return doc;
}

// ---------------------------------------------------------------------------
// Curves

inline const char* curve_csv_header() {
  return "psi,r,q,rstar,phi_r,phi_rstar,lugannani_rice,interpolated,accuracy_order";
}

inline std::string curve_to_csv(const SignificanceCurve& c) {
  std::string out = curve_csv_header();
  out += '\n';
  for (const auto& p : c.points) {
    for (double v : {p.psi, p.r, p.q, p.rstar, p.phi_r, p.phi_rstar, p.lugannani_rice}) {
      out += detail::fmt17(v);
      out += ',';
    }
    out += p.interpolated ? "1," : "0,";
    out += std::to_string(c.accuracy_order);
    out += '\n';
  }
  return out;
}

inline SignificanceCurve curve_from_csv(const std::string& text, const std::string& source) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw UsageError(source + ": empty curve file");
  const auto names = detail::split(detail::trim(line), ',');
  auto col = [&](const std::string& n) -> int {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == n) return static_cast<int>(i);
    }
    return -1;
  };
  for (const char* need : {"psi", "r", "q", "rstar", "phi_r", "phi_rstar", "lugannani_rice"}) {
    if (col(need) < 0) throw UsageError(source + ": curve CSV lacks column '" + need + "'");
  }
  SignificanceCurve c;
  std::vector<double> grid;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != names.size()) {
      throw UsageError(source + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(names.size()) + " fields");
    }
    auto get = [&](const char* n) {
      double v = 0.0;
      const int i = col(n);
      if (i < 0) return std::numeric_limits<double>::quiet_NaN();
      if (!detail::parse_double(cells[static_cast<std::size_t>(i)], v)) {
        throw UsageError(source + ":" + std::to_string(lineno) + ": bad number in column " + n);
      }
      return v;
    };
    PivotSet p;
    p.psi = get("psi");
    p.r = get("r");
    p.q = get("q");
    p.rstar = get("rstar");
    p.phi_r = get("phi_r");
    p.phi_rstar = get("phi_rstar");
    p.lugannani_rice = get("lugannani_rice");
    p.t = get("t");
    p.phi_t = col("t") >= 0 ? normal_cdf(p.t) : std::numeric_limits<double>::quiet_NaN();
    p.interpolated = col("interpolated") >= 0 && get("interpolated") != 0.0;
    if (col("accuracy_order") >= 0) c.accuracy_order = static_cast<int>(get("accuracy_order"));
    grid.push_back(p.psi);
    c.points.push_back(p);
  }
  if (c.points.size() < 2) throw UsageError(source + ": curve needs at least two rows");
  c.grid = from_std(grid);
  for (Eigen::Index i = 1; i < c.grid.size(); ++i) {
    if (!(c.grid[i] > c.grid[i - 1])) throw UsageError(source + ": psi column must increase");
  }
  return c;
}

inline SignificanceCurve load_curve_csv(const std::string& path) {
  return curve_from_csv(detail::read_file(path), path);
}

inline nlohmann::ordered_json curve_to_json(const SignificanceCurve& c) {
  nlohmann::ordered_json j;
  j["model_id"] = c.model_id;
  j["data_digest"] = c.data_digest;
  j["accuracy_order"] = c.accuracy_order;
  j["psi_hat"] = c.psi_hat;
  j["std_error"] = c.std_error;
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const auto& p : c.points) {
    pts.push_back({{"psi", p.psi},
                   {"r", p.r},
                   {"q", p.q},
                   {"t", p.t},
                   {"rstar", p.rstar},
                   {"phi_r", p.phi_r},
                   {"phi_t", p.phi_t},
                   {"phi_rstar", p.phi_rstar},
                   {"lugannani_rice", p.lugannani_rice},
                   {"interpolated", p.interpolated}});
  }
  j["points"] = pts;
  return j;
}

}  // namespace hoa
