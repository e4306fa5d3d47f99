// Configuration loading and CSV emission for the command-line tool.
#pragma once

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fractal_sl/asymptotics.hpp"
#include "fractal_sl/pencil.hpp"
#include "fractal_sl/renewal.hpp"
#include "fractal_sl/selfsim.hpp"

namespace fsl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kCsvHeader = "# fractal-sl v1";

/// Shortest round-trip-safe fixed format: 17 significant digits.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Parses "1/3", "-2", "0.25".
inline double parse_exact(std::string_view text) {
  auto parse_double = [&](std::string_view s) {
    const std::string str(s);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(str.c_str(), &end);
    if (str.empty() || end != str.c_str() + str.size() || errno == ERANGE) {
      throw ConfigError("not a number: '" + str + "'");
    }
    return v;
  };
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return parse_double(text);
  const double num = parse_double(text.substr(0, slash));
  const double den = parse_double(text.substr(slash + 1));
  if (den == 0.0) throw ConfigError("zero denominator in '" + std::string(text) + "'");
  return num / den;
}

inline double json_number(const nlohmann::json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      return parse_exact(j.get<std::string>());
    } catch (const ConfigError& e) {
      throw ConfigError("field '" + field + "': " + e.what());
    }
  }
  throw ConfigError("field '" + field + "' must be a number or a string like \"1/3\"");
}

inline std::vector<double> json_numbers(const nlohmann::json& obj, const std::string& field) {
  if (!obj.contains(field)) throw ConfigError("missing field '" + field + "'");
  const auto& arr = obj.at(field);
  if (!arr.is_array()) throw ConfigError("field '" + field + "' must be an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(json_number(arr[i], field + "[" + std::to_string(i) + "]"));
  }
  return out;
}

/// JSON text to an object, with line/column diagnostics on syntax errors.
inline nlohmann::json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": JSON syntax error");
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// "cantor", "tilde_P:0.2", "P_a_delta:1/4,0.1".
inline SimilarityParams parse_builtin_spec(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string_view name = spec.substr(0, colon);
  std::vector<double> args;
  if (colon != std::string_view::npos) {
    std::string_view rest = spec.substr(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      args.push_back(parse_exact(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }
  try {
    return builtin(name, args);
  } catch (const ParamError& e) {
    throw ConfigError(e.what());
  }
}

/// {"builtin": "cantor"} / {"builtin": "tilde_P", "params": [0.2]} or
/// {"a": [...], "d": [...], "beta": [...], "normalize": false}.
inline SimilarityParams params_from_json(const nlohmann::json& cfg) {
  if (!cfg.is_object()) throw ConfigError("weight configuration must be a JSON object");
  if (cfg.contains("builtin")) {
    if (!cfg.at("builtin").is_string()) throw ConfigError("field 'builtin' must be a string");
    std::vector<double> args;
    if (cfg.contains("params")) args = json_numbers(cfg, "params");
    try {
      return builtin(cfg.at("builtin").get<std::string>(), args);
    } catch (const ParamError& e) {
      throw ConfigError(e.what());
    }
  }
  const bool normalize = cfg.value("normalize", false);
  try {
    return validate_params(json_numbers(cfg, "a"), json_numbers(cfg, "d"),
                           json_numbers(cfg, "beta"), normalize);
  } catch (const ParamError& e) {
    throw ConfigError(e.what());
  }
}

inline SimilarityParams load_params(const std::string& path) {
  return params_from_json(parse_json_text(read_file(path), path));
}

// ---------------------------------------------------------------------------
// Renewal problems

struct RenewalProblem {
  std::vector<double> u;
  std::vector<double> v;  ///< empty for the scalar case
  WeightedSequence x1;
  WeightedSequence x2;
  bool coupled = false;
};

/// Numbers from a CSV file: one column (x) or two (x1, x2).  Lines starting
/// with '#' and a non-numeric header line are skipped.
inline std::vector<std::vector<double>> read_numeric_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(parse_exact(cell));
      } catch (const ConfigError&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw ConfigError(path + ":" + std::to_string(lineno) + ": non-numeric value");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline RenewalProblem renewal_from_json(const nlohmann::json& cfg, const std::string& base_dir = "") {
  if (!cfg.is_object()) throw ConfigError("renewal configuration must be a JSON object");
  RenewalProblem prob;
  prob.u = json_numbers(cfg, "u");
  if (cfg.contains("v")) {
    prob.v = json_numbers(cfg, "v");
    prob.coupled = true;
  }
  if (cfg.contains("x_file")) {
    std::string path = cfg.at("x_file").get<std::string>();
    if (!base_dir.empty() && !path.empty() && path.front() != '/') path = base_dir + "/" + path;
    for (const auto& row : read_numeric_csv(path)) {
      prob.x1.entries.push_back(row.at(0));
      prob.x2.entries.push_back(row.size() > 1 ? row[1] : 0.0);
    }
  } else {
    prob.x1.entries = json_numbers(cfg, "x");
    if (cfg.contains("x2")) prob.x2.entries = json_numbers(cfg, "x2");
  }
  if (cfg.contains("r")) {
    prob.x1.weight = prob.x2.weight = json_number(cfg.at("r"), "r");
  }
  return prob;
}

inline RenewalProblem load_renewal(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const std::string dir = slash == std::string::npos ? "" : path.substr(0, slash);
  return renewal_from_json(parse_json_text(read_file(path), path), dir);
}

inline void write_renewal_csv(std::ostream& out, const RenewalSolution& sol) {
  out << kCsvHeader << '\n';
  out << "# omega," << format_number(sol.omega) << '\n';
  out << "# J," << format_number(sol.J) << '\n';
  out << (sol.z.size() == 2 ? "n,z1,z2,limit\n" : "n,z1,limit\n");
  const std::size_t len = sol.z.front().size();
  for (std::size_t n = 0; n < len; ++n) {
    out << n;
    for (const auto& seq : sol.z) out << ',' << format_number(seq[n]);
    out << ',' << format_number(sol.limit) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Spectra

inline void write_spectrum_csv(std::ostream& out, const std::vector<SpectrumReport>& reports) {
  out << kCsvHeader << '\n';
  for (const auto& rep : reports) {
    out << "# depth," << rep.depth << '\n';
    out << "# coverage," << to_string(rep.side) << ',' << format_number(rep.coverage) << '\n';
  }
  out << "n,lambda,side,bracket_rel_width,depth_shift_rel\n";
  for (const auto& rep : reports) {
    for (const auto& e : rep.eigenvalues) {
      out << e.n << ',' << format_number(e.lambda) << ',' << to_string(e.side) << ','
          << format_number(e.bracket_rel_width) << ',' << format_number(e.depth_shift_rel)
          << '\n';
    }
  }
}

/// Inverse of write_spectrum_csv; one report per side present.
inline std::vector<SpectrumReport> read_spectrum_csv(std::istream& in) {
  std::map<char, SpectrumReport> by_side;
  int depth = 0;
  std::string line;
  bool header_seen = false;
  bool version_seen = false;
  std::size_t lineno = 0;
  auto side_of = [&](const std::string& s) {
    if (s == "+") return Side::plus;
    if (s == "-") return Side::minus;
    throw ConfigError("spectrum line " + std::to_string(lineno) + ": bad side '" + s + "'");
  };
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == kCsvHeader) {
      version_seen = true;
      continue;
    }
    if (line.front() == '#') {
      const auto cells = split(line.substr(2));
      if (cells.size() == 2 && cells[0] == "depth") depth = std::stoi(cells[1]);
      if (cells.size() == 3 && cells[0] == "coverage") {
        const Side s = side_of(cells[1]);
        auto& rep = by_side[cells[1][0]];
        rep.side = s;
        rep.coverage = parse_exact(cells[2]);
      }
      continue;
    }
    if (!header_seen) {
      if (line != "n,lambda,side,bracket_rel_width,depth_shift_rel") {
        throw ConfigError("spectrum line " + std::to_string(lineno) + ": unexpected header");
      }
      header_seen = true;
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != 5) {
      throw ConfigError("spectrum line " + std::to_string(lineno) + ": expected 5 columns");
    }
    EigenEntry e;
    e.n = std::stoi(cells[0]);
    e.lambda = parse_exact(cells[1]);
    e.side = side_of(cells[2]);
    e.bracket_rel_width = parse_exact(cells[3]);
    e.depth_shift_rel = parse_exact(cells[4]);
    auto& rep = by_side[cells[2][0]];
    rep.side = e.side;
    rep.eigenvalues.push_back(e);
  }
  if (!version_seen) throw ConfigError("spectrum file lacks the '# fractal-sl v1' header");
  std::vector<SpectrumReport> out;
  for (auto& [key, rep] : by_side) {
    rep.depth = depth;
    if (rep.coverage == 0.0 && !rep.eigenvalues.empty()) {
      rep.coverage = std::abs(rep.eigenvalues.back().lambda);
    }
    out.push_back(std::move(rep));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Profiles

inline void write_profile_csv(std::ostream& out, const ProfileEstimate& est) {
  out << kCsvHeader << '\n';
  out << "# D," << format_number(est.D) << '\n';
  out << "# nu," << format_number(est.nu) << '\n';
  out << "# J," << format_number(est.J) << '\n';
  out << "# eps," << format_number(est.epsilon) << '\n';
  out << "t,s_plus_lo,s_plus_est,s_plus_hi,s_minus_lo,s_minus_est,s_minus_hi\n";
  auto cells = [&](const SideProfile& side, std::size_t i) {
    if (!side.present) return std::string(",,");
    const auto& p = side.points[i];
    return format_number(p.lower) + ',' + format_number(p.estimate) + ',' +
           format_number(p.upper);
  };
  for (std::size_t i = 0; i < est.t_grid.size(); ++i) {
    out << format_number(est.t_grid[i]) << ',' << cells(est.plus, i) << ','
        << cells(est.minus, i) << '\n';
  }
}

}  // namespace fsl
