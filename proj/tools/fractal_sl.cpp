// fractal-sl: command-line front end.
//
//   fractal-sl spectral-order --builtin cantor
//   fractal-sl eigs --table1
//   fractal-sl inertia --builtin hat_P --lambda -1e4
//   fractal-sl s-profile --builtin cantor --out profile.csv
//   fractal-sl renewal --config problem.json
//
// Exit codes: 0 ok, 2 configuration/usage error, 3 hypothesis refusal,
// 4 partial result.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "fractal_sl/fractal_sl.hpp"

namespace {

using namespace fsl;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitHypothesis = 3;
constexpr int kExitPartial = 4;

struct Options {
  std::string config;
  std::string builtin;
  std::string out;
  int depth = 9;
  int count = 20;
  std::string side = "plus";
  double rel_tol = 1e-10;
  double lambda_guard = kLambdaGuard;
  double eps = 0.05;
  std::size_t grid = 100;
  double lambda = 0.0;
  double arith_tol = kDefaultArithmeticTolerance;
  std::optional<double> step;
  bool table1 = false;
  std::string spectrum_in;
  std::string spectrum_out;
  std::vector<double> certify_at;
  std::size_t n_max = 100;
};

// Sink for CSV output: --out file or stdout.  Human-readable summaries go to
// stdout only when the CSV goes to a file.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw ConfigError("cannot write '" + path + "'");
    }
  }
  std::ostream& csv() { return file_ ? *file_ : std::cout; }
  std::ostream& info() { return file_ ? std::cout : std::cerr; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

int worker_threads() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("FRACTAL_SL_THREADS");
  if (env == nullptr || *env == '\0') return static_cast<int>(hw);
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError("FRACTAL_SL_THREADS must be a positive integer");
  return static_cast<int>(std::min<long>(v, 256));
}

Side parse_side(const std::string& s) {
  if (s == "plus" || s == "+") return Side::plus;
  if (s == "minus" || s == "-") return Side::minus;
  throw ConfigError("--side must be plus or minus, got '" + s + "'");
}

std::string builtin_name(const Options& o) { return o.builtin.substr(0, o.builtin.find(':')); }

SimilarityParams load_weight(const Options& o) {
  if (!o.builtin.empty() && !o.config.empty()) {
    throw ConfigError("give either --builtin or --config, not both");
  }
  if (!o.builtin.empty()) return parse_builtin_spec(o.builtin);
  if (!o.config.empty()) return load_params(o.config);
  throw ConfigError("a weight is required: --builtin NAME or --config PATH");
}

std::string fmt(double v) { return format_number(v); }

std::string fmt_short(double v, int digits = 6) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_spectral_order(const Options& o) {
  const auto p = load_weight(o);
  const auto arith = o.step ? arithmetic_structure_with_step(p, *o.step, o.arith_tol)
                            : arithmetic_structure(p, o.arith_tol);
  std::string lags;
  for (std::size_t k = 0; k < arith.lags.size(); ++k) {
    if (k) lags += ' ';
    lags += arith.lags[k] ? std::to_string(*arith.lags[k]) : "-";
  }
  Output out(o.out);
  std::ostream& s = o.out.empty() ? std::cout : out.csv();
  if (!o.out.empty()) s << kCsvHeader << '\n' << "key,value\n";
  const char sep = o.out.empty() ? ' ' : ',';
  auto line = [&](const std::string& k, const std::string& v) { s << k << sep << v << '\n'; };
  line("D", fmt(arith.D));
  line("arithmetic", arith.arithmetic ? "true" : "false");
  if (arith.nu) {
    line("nu", fmt(*arith.nu));
    line("lags", lags);
    line("J", fmt(arith.J));
    line("parity_condition", arith.parity_condition ? "true" : "false");
  }
  return kExitOk;
}

int cmd_eigs(Options o) {
  if (o.table1) {
    if (!o.builtin.empty() || !o.config.empty()) {
      throw ConfigError("--table1 fixes the weight; drop --builtin/--config");
    }
    o.builtin = "cantor";
    o.side = "plus";
    o.count = 20;
    o.depth = 9;
  }
  const auto p = load_weight(o);
  std::vector<Side> sides;
  if (o.side == "both") {
    sides = {Side::plus, Side::minus};
  } else {
    sides = {parse_side(o.side)};
  }
  EigenOptions eo;
  eo.count = o.count;
  eo.depth = o.depth;
  eo.rel_tol = o.rel_tol;
  eo.lambda_guard = o.lambda_guard;
  eo.threads = static_cast<unsigned>(worker_threads());

  std::vector<SpectrumReport> reports;
  bool partial = false;
  for (Side s : sides) {
    eo.side = s;
    reports.push_back(eigenvalues(p, eo));
    if (reports.back().partial) {
      partial = true;
      std::cerr << "warning: " << reports.back().warning << '\n';
    }
  }
  Output out(o.out);
  if (o.table1) {
    const double expo = std::log(2.0) / std::log(6.0);
    std::ostream& t = out.info();
    t << "  n        lambda_n    n/lambda_n^log6(2)\n";
    for (const auto& e : reports.front().eigenvalues) {
      char row[96];
      std::snprintf(row, sizeof row, "%3d  %12.4f  %10.4f\n", e.n, e.lambda,
                    e.n / std::pow(e.lambda, expo));
      t << row;
    }
    if (o.out.empty()) return partial ? kExitPartial : kExitOk;
  }
  write_spectrum_csv(out.csv(), reports);
  return partial ? kExitPartial : kExitOk;
}

int cmd_inertia(const Options& o) {
  if (!std::isfinite(o.lambda)) throw ConfigError("--lambda must be finite");
  const auto p = load_weight(o);
  const auto forms = assemble(p, build_grid(p, o.depth));
  const auto r = inertia_index(forms, o.lambda);
  std::cout << "lambda " << fmt(r.lambda) << '\n'
            << "depth " << o.depth << '\n'
            << "index " << r.index << '\n'
            << "pivot_min " << fmt(r.pivot_min) << '\n'
            << "perturbed " << (r.perturbed ? "true" : "false") << '\n';
  return kExitOk;
}

struct Certificate {
  std::string label;
  Side side;
  double magnitude;
  bool right_limit;  // evaluate just above an eigenvalue
  bool lower;        // true: s >= threshold, false: s <= threshold
  double threshold;
};

int cmd_s_profile(const Options& o) {
  const auto p = load_weight(o);
  const auto arith = o.step ? arithmetic_structure_with_step(p, *o.step, o.arith_tol)
                            : arithmetic_structure(p, o.arith_tol);
  // Refuse before the (expensive) sweep.
  if (!arith.arithmetic || !arith.nu) throw HypothesisError("weight is not arithmetically self-similar");
  if (!arith.parity_condition) throw HypothesisError("parity condition fails");

  std::vector<SpectrumReport> reports;
  if (!o.spectrum_in.empty()) {
    std::istringstream in(read_file(o.spectrum_in));
    reports = read_spectrum_csv(in);
  } else {
    EigenOptions eo;
    eo.count = o.count;
    eo.depth = o.depth;
    eo.rel_tol = o.rel_tol;
    eo.lambda_guard = o.lambda_guard;
    eo.threads = static_cast<unsigned>(worker_threads());
    for (Side s : {Side::plus, Side::minus}) {
      eo.side = s;
      reports.push_back(eigenvalues(p, eo));
    }
    if (!o.spectrum_out.empty()) {
      std::ofstream f(o.spectrum_out, std::ios::binary);
      if (!f) throw ConfigError("cannot write '" + o.spectrum_out + "'");
      write_spectrum_csv(f, reports);
    }
  }

  IndexCurve curve[2] = {IndexCurve(Side::plus, {}, 0.0), IndexCurve(Side::minus, {}, 0.0)};
  std::optional<IndexCurve> coarse[2];
  bool partial = false;
  for (const auto& rep : reports) {
    const int k = rep.side == Side::plus ? 0 : 1;
    curve[k] = IndexCurve::from_report(rep);
    if (rep.depth > 0) coarse[k] = IndexCurve::coarse_from_report(rep);
    // an empty side is a complete answer (no spectrum there), not a partial one
    if (!rep.eigenvalues.empty() && rep.coverage > std::abs(rep.eigenvalues.back().lambda)) {
      partial = true;
      std::cerr << "warning: side " << to_string(rep.side)
                << " stopped at the lambda guard before the requested count\n";
    }
  }

  EstimateOptions eo;
  eo.eps = o.eps;
  eo.q = o.grid;
  eo.coarse_plus = coarse[0] ? &*coarse[0] : nullptr;
  eo.coarse_minus = coarse[1] ? &*coarse[1] : nullptr;
  const auto est = s_estimate(p, arith, curve[0], curve[1], eo);

  Output out(o.out);
  write_profile_csv(out.csv(), est);
  std::ostream& info = out.info();
  if (!est.note.empty()) info << "note: " << est.note << '\n';
  for (const auto& c : curve) {
    if (c.empty()) info << "note: no eigenvalues on side " << to_string(c.side()) << '\n';
  }

  // Certified pointwise bounds from single index values.
  std::vector<Certificate> certs;
  const std::string name = builtin_name(o);
  if (name == "cantor" && curve[0].magnitudes().size() >= 17) {
    certs.push_back({"s+(log6 lambda_14 + 0)", Side::plus, curve[0].magnitudes()[13], true, true, 0.60});
    certs.push_back({"s+(log6 lambda_17 + 0)", Side::plus, curve[0].magnitudes()[16], true, false, 0.56});
  }
  if (name == "hat_P") {
    certs.push_back({"s+(log6 1e4)", Side::plus, 1e4, false, true, 0.48});
    certs.push_back({"s-(log6 1e4)", Side::minus, 1e4, false, false, 0.15});
  }
  for (double l : o.certify_at) {
    certs.push_back({"s" + std::string(l > 0 ? "+" : "-") + "(ln|" + fmt_short(l) + "|/nu)",
                     l > 0 ? Side::plus : Side::minus, std::abs(l), false, true, -1.0});
  }
  const int slack = static_cast<int>(p.size()) - 1;
  bool failed = false;
  for (const auto& c : certs) {
    const IndexCurve& cv = curve[c.side == Side::plus ? 0 : 1];
    const double mu = c.right_limit ? c.magnitude * (1.0 + 1e-9) : c.magnitude;
    if (!cv.covers(mu)) {
      info << c.label << ": not covered by the computed spectrum\n";
      partial = true;
      continue;
    }
    const auto b = bound_at(arith, mu, cv.index_at(mu), slack);
    info << c.label << ": ind = " << b.index << ", " << fmt_short(b.lower) << " <= s <= "
         << fmt_short(b.upper);
    if (c.threshold >= 0.0) {
      const bool ok = c.lower ? b.lower >= c.threshold : b.upper <= c.threshold;
      info << "  =>  s " << (c.lower ? ">= " : "<= ") << fmt_short(c.threshold, 3)
           << (ok ? "  certified" : "  NOT certified");
      failed = failed || !ok;
    }
    info << '\n';
  }
  if (failed) std::cerr << "warning: a preset inequality could not be certified\n";
  return partial || failed ? kExitPartial : kExitOk;
}

int cmd_renewal(const Options& o, bool n_max_given) {
  if (o.config.empty()) throw ConfigError("renewal needs --config PATH");
  const auto text = read_file(o.config);
  const auto json = parse_json_text(text, o.config);
  const auto slash = o.config.find_last_of('/');
  const auto prob = renewal_from_json(json, slash == std::string::npos ? "" : o.config.substr(0, slash));
  std::size_t n_max = o.n_max;
  if (!n_max_given && json.contains("n_max")) n_max = json.at("n_max").get<std::size_t>();
  RenewalSolution sol;
  if (prob.coupled) {
    sol = solve_coupled(RenewalSystem::coupled(prob.u, prob.v), prob.x1, prob.x2, n_max);
  } else {
    sol = solve_scalar(RenewalSystem::scalar(prob.u), prob.x1, n_max);
  }
  Output out(o.out);
  write_renewal_csv(out.csv(), sol);
  out.info() << "limit " << fmt(sol.limit) << '\n';
  if (sol.diagnostic) std::cerr << "warning: " << sol.note << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

void add_weight_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON weight configuration");
  cmd->add_option("--builtin", o.builtin, "catalog weight, NAME or NAME:p1,p2");
}

void add_eigen_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--depth", o.depth, "grid depth (depth+1 is solved as well)")
      ->check(CLI::Range(0, 24));
  cmd->add_option("--count", o.count, "eigenvalues per side")->check(CLI::PositiveNumber);
  cmd->add_option("--rel-tol", o.rel_tol, "relative bracket width")->check(CLI::PositiveNumber);
  cmd->add_option("--lambda-guard", o.lambda_guard, "largest |lambda| searched")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral asymptotics of string equations with self-similar weights"};
  app.require_subcommand(1);
  Options o;

  auto* so = app.add_subcommand("spectral-order", "spectral order D and arithmetic step");
  add_weight_flags(so, o);
  so->add_option("--tol", o.arith_tol, "relative tolerance of the arithmetic test");
  so->add_option("--step", o.step, "test against this step nu instead of searching");
  so->add_option("--out", o.out, "write key,value CSV here");

  auto* eg = app.add_subcommand("eigs", "eigenvalues of the pencil");
  add_weight_flags(eg, o);
  add_eigen_flags(eg, o);
  eg->add_option("--side", o.side, "plus, minus or both");
  eg->add_flag("--table1", o.table1, "cantor weight, 20 positive eigenvalues, depths 9/10");
  eg->add_option("--out", o.out, "spectrum CSV path (default stdout)");

  auto* in = app.add_subcommand("inertia", "inertia index ind T(lambda)");
  add_weight_flags(in, o);
  in->add_option("--lambda", o.lambda, "spectral parameter")->required();
  in->add_option("--depth", o.depth, "grid depth")->check(CLI::Range(0, 24));

  auto* sp = app.add_subcommand("s-profile", "periodic amplitude profiles s+ and s-");
  add_weight_flags(sp, o);
  add_eigen_flags(sp, o);
  sp->add_option("--eps", o.eps, "smoothing width, in periods");
  sp->add_option("--grid", o.grid, "grid points per period")->check(CLI::Range(4, 100000));
  sp->add_option("--tol", o.arith_tol, "relative tolerance of the arithmetic test");
  sp->add_option("--step", o.step, "use this arithmetic step nu");
  sp->add_option("--spectrum", o.spectrum_in, "reuse a spectrum CSV instead of computing");
  sp->add_option("--spectrum-out", o.spectrum_out, "save the computed spectrum CSV");
  sp->add_option("--at", o.certify_at, "print index bounds at these signed lambda values");
  sp->add_option("--out", o.out, "profile CSV path (default stdout)");

  auto* rn = app.add_subcommand("renewal", "discrete renewal systems from JSON");
  rn->add_option("--config", o.config, "renewal problem JSON")->required();
  auto* nmax = rn->add_option("--n-max", o.n_max, "last index solved");
  rn->add_option("--out", o.out, "solution CSV path (default stdout)");

  // count defaults to 60 per side for profiles
  sp->preparse_callback([&](std::size_t) { o.count = 60; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*so) return cmd_spectral_order(o);
    if (*eg) return cmd_eigs(o);
    if (*in) return cmd_inertia(o);
    if (*sp) return cmd_s_profile(o);
    if (*rn) return cmd_renewal(o, nmax->count() > 0);
  } catch (const HypothesisError& e) {
    std::cerr << "hypothesis refused: " << e.what() << '\n';
    return kExitHypothesis;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParamError& e) {
    std::cerr << "invalid parameters: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
