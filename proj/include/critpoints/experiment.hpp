#pragma once

// Experiment orchestration: configuration, per-trial jobs, aggregation and
// plot-data output.
//
// Config files are INI text (sections [measure] and [experiment]); see
// README.md for the schema. Each trial is keyed by (n, trial_index) and
// seeded with split_seed(master_seed, n, trial_index), so every output is a
// function of the config alone and never of the thread count. Aggregation
// reads only trial reports, which makes `report` over saved JSON lines
// reproduce the summary written by `run`.

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "critpoints/circle.hpp"
#include "critpoints/classic.hpp"
#include "critpoints/errors.hpp"
#include "critpoints/io.hpp"
#include "critpoints/measures.hpp"
#include "critpoints/metrics.hpp"
#include "critpoints/polyroots.hpp"
#include "critpoints/rng.hpp"

namespace critpoints {

using json = nlohmann::json;

inline constexpr double kCountLawTvThreshold = 0.05;
inline constexpr double kSeMultiplier = 3.0;

struct ExperimentConfig {
  MeasureSpec measure = UniformDisk{1.0};
  std::vector<std::size_t> n_values{50};
  std::size_t trials = 1;
  std::uint64_t master_seed = 1;
  double C = 1.0;
  double rho = 0.5;
  mpfr_prec_t precision_bits = kDefaultPrecisionBits;
  std::string output_dir = "out";
  std::size_t reference_sample_size = 10000;
  /// Prohorov distance of each trial's critical points to the reference.
  bool prohorov = true;
  double prohorov_tol = 1e-9;
  /// Highest r of the recorded coefficients a_{n,r} (unit-circle runs).
  std::size_t coefficients = 3;
  std::size_t threads = 1;
  /// Solver failures tolerated, as a fraction of all trials.
  double max_failed_fraction = 0.01;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream is(s);
  while (std::getline(is, part, sep)) out.push_back(trim(part));
  return out;
}

inline double to_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const std::string t = trim(s);
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size())
    throw ConfigError(what + ": expected a number, got '" + s + "'");
  return v;
}

inline std::uint64_t to_uint(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(what + ": expected a non-negative integer, got '" + s + "'");
  errno = 0;
  const auto v = std::strtoull(t.c_str(), nullptr, 10);
  if (errno == ERANGE) throw ConfigError(what + ": out of range");
  return v;
}

inline bool to_bool(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(what + ": expected true or false, got '" + s + "'");
}

inline cplx to_complex(const std::string& s, const std::string& what) {
  const auto parts = split(s, ',');
  if (parts.size() != 2) throw ConfigError(what + ": expected re,im");
  return {to_double(parts[0], what), to_double(parts[1], what)};
}

inline std::vector<double> to_doubles(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& p : split(s, ',')) out.push_back(to_double(p, what));
  return out;
}

using Params = std::map<std::string, std::string>;

inline const std::string& need(const Params& p, const std::string& key, const std::string& kind) {
  const auto it = p.find(key);
  if (it == p.end()) throw ConfigError(kind + ": missing '" + key + "'");
  return it->second;
}

inline std::string get_or(const Params& p, const std::string& key, const std::string& fallback) {
  const auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

inline void only_keys(const Params& p, const std::set<std::string>& allowed,
                      const std::string& where) {
  for (const auto& [k, v] : p)
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

inline std::string canonical_kind(const std::string& k) {
  static const std::map<std::string, std::string> alias{
      {"circle", "uniform_circle"},   {"disk", "uniform_disk"},
      {"segment", "uniform_segment"}, {"annulus", "uniform_annulus"},
      {"gaussian", "complex_gaussian"}};
  const auto it = alias.find(k);
  return it == alias.end() ? k : it->second;
}

}  // namespace detail

/// Builds a MeasureSpec from `kind` plus its parameters.
///
///   uniform_circle   radius
///   uniform_disk     radius
///   uniform_segment  a = re,im   b = re,im
///   atomic           atoms = re,im,weight; re,im,weight; ...
///   uniform_annulus  r_inner  r_outer
///   complex_gaussian mean = re,im   scale
inline MeasureSpec measure_from_params(const detail::Params& p) {
  using namespace detail;
  const std::string kind = canonical_kind(need(p, "kind", "measure"));
  MeasureSpec spec;
  if (kind == "uniform_circle" || kind == "uniform_disk") {
    only_keys(p, {"kind", "radius"}, kind);
    const double r = to_double(get_or(p, "radius", "1"), kind + ".radius");
    spec = kind == "uniform_circle" ? MeasureSpec(UniformCircle{r}) : MeasureSpec(UniformDisk{r});
  } else if (kind == "uniform_segment") {
    only_keys(p, {"kind", "a", "b"}, kind);
    spec = UniformSegment{to_complex(need(p, "a", kind), kind + ".a"),
                          to_complex(need(p, "b", kind), kind + ".b")};
  } else if (kind == "atomic") {
    only_keys(p, {"kind", "atoms"}, kind);
    Atomic a;
    for (const auto& item : split(need(p, "atoms", kind), ';')) {
      if (item.empty()) continue;
      const auto v = to_doubles(item, "atomic.atoms");
      if (v.size() != 3) throw ConfigError("atomic.atoms: each atom is re,im,weight");
      a.atoms.push_back({{v[0], v[1]}, v[2]});
    }
    spec = a;
  } else if (kind == "uniform_annulus") {
    only_keys(p, {"kind", "r_inner", "r_outer"}, kind);
    spec = UniformAnnulus{to_double(need(p, "r_inner", kind), kind + ".r_inner"),
                          to_double(need(p, "r_outer", kind), kind + ".r_outer")};
  } else if (kind == "complex_gaussian") {
    only_keys(p, {"kind", "mean", "scale"}, kind);
    spec = ComplexGaussian{to_complex(get_or(p, "mean", "0,0"), kind + ".mean"),
                           to_double(get_or(p, "scale", "1"), kind + ".scale")};
  } else {
    throw ConfigError("measure: unknown kind '" + kind + "'");
  }
  validate(spec);
  return spec;
}

/// Command-line shorthand `kind[:args]`, e.g. `disk:1`, `segment:0,0,1,0`,
/// `annulus:0.5,1`, `gaussian:0,0,1`, `atomic:1,0,0.5;-1,0,0.5`.
inline MeasureSpec parse_measure(const std::string& text) {
  using namespace detail;
  const auto colon = text.find(':');
  const std::string kind = canonical_kind(trim(text.substr(0, colon)));
  const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  Params p{{"kind", kind}};
  if (kind == "atomic") {
    p["atoms"] = args;
    return measure_from_params(p);
  }
  const auto v = args.empty() ? std::vector<double>{} : to_doubles(args, kind);
  auto expect = [&](std::size_t k) {
    if (v.size() != k) throw ConfigError(kind + ": expected " + std::to_string(k) + " values");
  };
  auto num = [](double x) { return format_double(x); };
  if (kind == "uniform_circle" || kind == "uniform_disk") {
    if (!v.empty()) {
      expect(1);
      p["radius"] = num(v[0]);
    }
  } else if (kind == "uniform_segment") {
    expect(4);
    p["a"] = num(v[0]) + "," + num(v[1]);
    p["b"] = num(v[2]) + "," + num(v[3]);
  } else if (kind == "uniform_annulus") {
    expect(2);
    p["r_inner"] = num(v[0]);
    p["r_outer"] = num(v[1]);
  } else if (kind == "complex_gaussian") {
    if (!v.empty()) {
      expect(3);
      p["mean"] = num(v[0]) + "," + num(v[1]);
      p["scale"] = num(v[2]);
    }
  }
  return measure_from_params(p);
}

inline void validate(const ExperimentConfig& c) {
  validate(c.measure);
  if (c.trials < 1) throw ConfigError("experiment.trials must be at least 1");
  if (c.n_values.empty()) throw ConfigError("experiment.n_values must not be empty");
  for (std::size_t n : c.n_values)
    if (n < 2) throw ConfigError("experiment.n_values: every n must be at least 2");
  if (!(c.rho > 0.0 && c.rho < 1.0)) throw ConfigError("experiment.rho must lie in (0, 1)");
  if (!(c.C > 0.0) || !std::isfinite(c.C)) throw ConfigError("experiment.C must be positive");
  if (c.precision_bits < 53) throw ConfigError("experiment.precision_bits must be at least 53");
  if (c.reference_sample_size < 1) throw ConfigError("experiment.reference_sample_size must be positive");
  if (!(c.prohorov_tol > 0.0)) throw ConfigError("experiment.prohorov_tol must be positive");
  if (!(c.max_failed_fraction >= 0.0 && c.max_failed_fraction <= 1.0))
    throw ConfigError("experiment.max_failed_fraction must lie in [0, 1]");
}

inline ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (section != "measure" && section != "experiment")
      throw ConfigError("config: unknown section [" + section + "]");
  }
  detail::Params measure;
  if (const auto m = tree.get_child_optional("measure")) {
    for (const auto& [k, v] : *m) measure[k] = v.data();
  } else {
    throw ConfigError("config: missing [measure] section");
  }
  c.measure = measure_from_params(measure);

  detail::Params ex;
  if (const auto e = tree.get_child_optional("experiment"))
    for (const auto& [k, v] : *e) ex[k] = v.data();
  detail::only_keys(ex,
                    {"n_values", "trials", "master_seed", "C", "rho", "precision_bits",
                     "output_dir", "reference_sample_size", "prohorov", "prohorov_tol",
                     "coefficients", "threads", "max_failed_fraction"},
                    "experiment");
  using namespace detail;
  if (ex.count("n_values")) {
    c.n_values.clear();
    for (const auto& s : split(ex["n_values"], ','))
      c.n_values.push_back(to_uint(s, "experiment.n_values"));
  }
  if (ex.count("trials")) c.trials = to_uint(ex["trials"], "experiment.trials");
  if (ex.count("master_seed")) c.master_seed = to_uint(ex["master_seed"], "experiment.master_seed");
  if (ex.count("C")) c.C = to_double(ex["C"], "experiment.C");
  if (ex.count("rho")) c.rho = to_double(ex["rho"], "experiment.rho");
  if (ex.count("precision_bits"))
    c.precision_bits =
        static_cast<mpfr_prec_t>(to_uint(ex["precision_bits"], "experiment.precision_bits"));
  if (ex.count("output_dir")) c.output_dir = trim(ex["output_dir"]);
  if (ex.count("reference_sample_size"))
    c.reference_sample_size = to_uint(ex["reference_sample_size"], "experiment.reference_sample_size");
  if (ex.count("prohorov")) c.prohorov = to_bool(ex["prohorov"], "experiment.prohorov");
  if (ex.count("prohorov_tol")) c.prohorov_tol = to_double(ex["prohorov_tol"], "experiment.prohorov_tol");
  if (ex.count("coefficients")) c.coefficients = to_uint(ex["coefficients"], "experiment.coefficients");
  if (ex.count("threads")) c.threads = to_uint(ex["threads"], "experiment.threads");
  if (ex.count("max_failed_fraction"))
    c.max_failed_fraction = to_double(ex["max_failed_fraction"], "experiment.max_failed_fraction");
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in);
}

inline bool is_unit_circle(const MeasureSpec& m) {
  const auto* c = std::get_if<UniformCircle>(&m);
  return c && c->radius == 1.0;
}

/// Reference measure for Prohorov comparisons: the measure itself when it is
/// atomic, otherwise an empirical sample seeded with split_seed(master, 0, 0).
inline DiscreteMeasure reference_measure(const ExperimentConfig& c) {
  if (const auto* a = std::get_if<Atomic>(&c.measure)) {
    std::vector<WeightedAtom> atoms;
    for (const auto& x : a->atoms) atoms.push_back({x.location, x.weight});
    return DiscreteMeasure(std::move(atoms));
  }
  const RootSample s =
      sample_roots(c.measure, c.reference_sample_size, split_seed(c.master_seed, 0, 0));
  return DiscreteMeasure::empirical(s.roots);
}

namespace detail {

inline json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline bool all_real(std::span<const cplx> roots) {
  return std::all_of(roots.begin(), roots.end(), [](cplx x) { return x.imag() == 0.0; });
}

}  // namespace detail

inline json to_json(const PairingReport& p) {
  return {{"n", p.n},
          {"C", p.C},
          {"matched", p.matched},
          {"crowded", p.crowded},
          {"unmatched", p.unmatched},
          {"matched_fraction", p.matched_fraction()},
          {"max_match_dist", p.max_match_dist}};
}

struct TrialResult {
  json report;
  /// Kept only for the first trial of each n (scatter output).
  std::optional<CriticalPointSet> cps;
};

/// One trial of the experiment: roots, certified critical points and the
/// per-trial statistics. Solver failures are recorded in the report.
inline TrialResult run_trial(const ExperimentConfig& c, const DiscreteMeasure* reference,
                             std::size_t n, std::size_t trial_index) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t seed = split_seed(c.master_seed, n, trial_index);
  TrialResult out;
  json& r = out.report;
  r["trial_index"] = trial_index;
  r["n"] = n;
  r["seed"] = seed;
  r["measure"] = kind_name(c.measure);
  const RootSample s = sample_roots(c.measure, n, seed);
  try {
    CriticalPointSet cps = critical_points(RootPolynomial(s.roots, c.precision_bits));
    r["status"] = "ok";
    r["precision_used"] = cps.precision_bits;
    r["escalations"] = cps.escalations;
    r["critical_points"] = cps.size();
    if (reference)
      r["prohorov_to_reference"] =
          prohorov_distance(DiscreteMeasure::empirical(cps.points), *reference, c.prohorov_tol);
    r["pairing"] = to_json(pairing_report(s.roots, cps, c.C));
    const HullCheck hull = gauss_lucas_check(s.roots, cps);
    r["gauss_lucas"] = {{"contained", hull.contained},
                        {"worst_violation", hull.worst_violation},
                        {"tolerance", hull.tolerance}};
    if (detail::all_real(s.roots)) r["interlacing"] = interlacing_check(s.roots, cps);
    r["rho"] = c.rho;
    try {
      r["N_rho"] = rouche_ball_count(cps, {0.0, 0.0}, c.rho);
    } catch (const IndeterminateCount&) {
      r["N_rho"] = nullptr;
    }
    double top = 0.0;
    for (const cplx& x : s.roots) top = std::max(top, std::abs(x));
    std::vector<std::size_t> hist(kModulusBins, 0);
    std::size_t above = 0;
    for (const cplx& a : cps.points) {
      const double m = top > 0.0 ? std::abs(a) / top : 0.0;
      ++hist[std::min<std::size_t>(kModulusBins - 1, static_cast<std::size_t>(m * kModulusBins))];
      if (m > 0.9) ++above;
    }
    r["modulus_histogram"] = hist;
    r["fraction_above_09"] = static_cast<double>(above) / static_cast<double>(cps.size());
    if (is_unit_circle(c.measure)) {
      json coeffs = json::array();
      for (const cplx& a : power_sum_coefficients(s.roots, c.coefficients).entries)
        coeffs.push_back(detail::complex_json(a));
      r["coefficients"] = coeffs;
    }
    if (trial_index == 0) out.cps = std::move(cps);
  } catch (const SolverFailure& e) {
    r["status"] = "solver_failure";
    r["worst_residual"] = e.worst_residual();
    r["error"] = e.what();
  }
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  r["timing_ms"] = std::max(ms, 1e-3);
  return out;
}

namespace detail {

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double se = 0.0;
  double variance = 0.0;
};

inline Summary summarize(std::vector<double> v) {
  Summary s;
  s.count = v.size();
  if (v.empty()) return s;
  CompensatedSum sum;
  for (double x : v) sum.add(x);
  s.mean = sum.value() / static_cast<double>(v.size());
  if (v.size() > 1) {
    CompensatedSum sq;
    for (double x : v) sq.add((x - s.mean) * (x - s.mean));
    s.variance = sq.value() / static_cast<double>(v.size() - 1);
    s.se = std::sqrt(s.variance / static_cast<double>(v.size()));
  }
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  s.median = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  return s;
}

inline json summary_json(const Summary& s) {
  return {{"count", s.count},
          {"mean", s.mean},
          {"median", s.median},
          {"se", s.se},
          {"variance", s.variance}};
}

/// Sample covariance of x and y with the standard error of the mean product.
inline std::pair<double, double> covariance(const std::vector<double>& x,
                                            const std::vector<double>& y) {
  const Summary sx = summarize(x), sy = summarize(y);
  std::vector<double> prod;
  for (std::size_t i = 0; i < x.size(); ++i) prod.push_back((x[i] - sx.mean) * (y[i] - sy.mean));
  const Summary sp = summarize(prod);
  const double n = static_cast<double>(x.size());
  return {n > 1 ? sp.mean * n / (n - 1) : 0.0, sp.se};
}

}  // namespace detail

/// Aggregate summary of trial reports. Trials are ordered by (n, index)
/// before any arithmetic, so the result does not depend on input order.
inline json aggregate(std::vector<json> trials) {
  std::sort(trials.begin(), trials.end(), [](const json& a, const json& b) {
    const auto ka = std::make_pair(a.at("n").get<std::size_t>(), a.at("trial_index").get<std::size_t>());
    const auto kb = std::make_pair(b.at("n").get<std::size_t>(), b.at("trial_index").get<std::size_t>());
    return ka < kb;
  });
  std::map<std::size_t, std::vector<const json*>> by_n;
  double total_ms = 0.0;
  std::size_t failed = 0;
  for (const json& t : trials) {
    by_n[t.at("n").get<std::size_t>()].push_back(&t);
    if (t.contains("timing_ms")) total_ms += t["timing_ms"].get<double>();
    if (t.value("status", "") != "ok") ++failed;
  }
  using detail::summarize;
  using detail::summary_json;
  json groups = json::array();
  for (const auto& [n, list] : by_n) {
    json g;
    g["n"] = n;
    g["trials"] = list.size();
    std::vector<double> prohorov, matched, crowded, above, nrho, hull_worst;
    std::size_t group_failed = 0, indeterminate = 0, violations = 0, interlacing_fail = 0;
    std::size_t interlacing_checked = 0;
    long max_precision = 0;
    std::vector<std::size_t> hist;
    std::vector<std::vector<double>> coef_re, coef_im;
    std::optional<double> rho;
    std::string measure;
    for (const json* tp : list) {
      const json& t = *tp;
      measure = t.value("measure", "");
      if (t.value("status", "") != "ok") {
        ++group_failed;
        continue;
      }
      max_precision = std::max(max_precision, t.value("precision_used", 0L));
      if (t.contains("prohorov_to_reference"))
        prohorov.push_back(t["prohorov_to_reference"].get<double>());
      matched.push_back(t["pairing"]["matched_fraction"].get<double>());
      crowded.push_back(static_cast<double>(t["pairing"]["crowded"].get<std::size_t>()));
      above.push_back(t["fraction_above_09"].get<double>());
      if (!t["gauss_lucas"]["contained"].get<bool>()) ++violations;
      if (t["gauss_lucas"]["worst_violation"].is_number())
        hull_worst.push_back(t["gauss_lucas"]["worst_violation"].get<double>());
      if (t.contains("interlacing")) {
        ++interlacing_checked;
        if (!t["interlacing"].get<bool>()) ++interlacing_fail;
      }
      if (t.contains("rho")) rho = t["rho"].get<double>();
      if (t.contains("N_rho")) {
        if (t["N_rho"].is_null())
          ++indeterminate;
        else
          nrho.push_back(static_cast<double>(t["N_rho"].get<std::size_t>()));
      }
      const auto& h = t["modulus_histogram"];
      if (hist.empty()) hist.assign(h.size(), 0);
      for (std::size_t i = 0; i < h.size() && i < hist.size(); ++i) hist[i] += h[i].get<std::size_t>();
      if (t.contains("coefficients")) {
        const auto& cs = t["coefficients"];
        if (coef_re.empty()) {
          coef_re.resize(cs.size());
          coef_im.resize(cs.size());
        }
        for (std::size_t r = 0; r < cs.size() && r < coef_re.size(); ++r) {
          coef_re[r].push_back(cs[r][0].get<double>());
          coef_im[r].push_back(cs[r][1].get<double>());
        }
      }
    }
    g["measure"] = measure;
    g["failed"] = group_failed;
    g["max_precision_used"] = max_precision;
    if (!prohorov.empty()) g["prohorov"] = summary_json(summarize(prohorov));
    g["matched_fraction"] = summary_json(summarize(matched));
    g["crowded"] = summary_json(summarize(crowded));
    g["fraction_above_09"] = summary_json(summarize(above));
    g["gauss_lucas"] = {{"violations", violations},
                        {"worst_violation", hull_worst.empty()
                                                ? json(nullptr)
                                                : json(*std::max_element(hull_worst.begin(),
                                                                         hull_worst.end()))}};
    if (interlacing_checked)
      g["interlacing"] = {{"checked", interlacing_checked}, {"failed", interlacing_fail}};
    g["modulus_histogram"] = hist;
    if (rho) {
      json nr;
      nr["rho"] = *rho;
      nr["indeterminate"] = indeterminate;
      const auto s = summarize(nrho);
      nr["summary"] = summary_json(s);
      if (measure == "uniform_circle" && !nrho.empty()) {
        const CountLaw law = count_law(*rho);
        const double expected = law.mean();
        std::size_t top = law.pmf.size();
        for (double x : nrho) top = std::max(top, static_cast<std::size_t>(x) + 1);
        std::vector<double> emp(top, 0.0);
        for (double x : nrho) emp[static_cast<std::size_t>(x)] += 1.0 / static_cast<double>(nrho.size());
        double tv = 0.0;
        for (std::size_t j = 0; j < top; ++j)
          tv += std::abs(emp[j] - (j < law.pmf.size() ? law.pmf[j] : 0.0));
        tv *= 0.5;
        nr["count_law_mean"] = expected;
        nr["count_law_pmf"] = law.pmf;
        nr["empirical_pmf"] = emp;
        nr["tv_distance"] = tv;
        nr["tv_threshold"] = kCountLawTvThreshold;
        nr["mean_within_3se"] = std::abs(s.mean - expected) <= kSeMultiplier * s.se;
        nr["tv_below_threshold"] = tv < kCountLawTvThreshold;
      }
      g["N_rho"] = nr;
    }
    if (!coef_re.empty()) {
      json cj = json::array();
      for (std::size_t r = 0; r < coef_re.size(); ++r)
        cj.push_back({{"r", r},
                      {"re", summary_json(summarize(coef_re[r]))},
                      {"im", summary_json(summarize(coef_im[r]))}});
      g["coefficients"] = cj;
      if (coef_re.size() > 2) {
        const auto [cov, se] = detail::covariance(coef_re[1], coef_re[2]);
        g["cov_re_a1_re_a2"] = {{"value", cov}, {"se", se}};
      }
    }
    groups.push_back(g);
  }
  json out;
  out["total_trials"] = trials.size();
  out["failed"] = failed;
  out["groups"] = groups;
  out["thresholds"] = {{"count_law_tv", kCountLawTvThreshold}, {"se_multiplier", kSeMultiplier}};
  out["timing_ms_total"] = total_ms;
  return out;
}

/// Reads JSON-lines trial reports; blank lines are skipped.
inline std::vector<json> read_jsonl(std::istream& in) {
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ConfigError("jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

/// Copy of `j` with every object key starting with "timing" removed.
inline json strip_timing(json j) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end();) {
      if (it.key().rfind("timing", 0) == 0)
        it = j.erase(it);
      else {
        *it = strip_timing(*it);
        ++it;
      }
    }
  } else if (j.is_array()) {
    for (auto& x : j) x = strip_timing(x);
  }
  return j;
}

inline bool failure_budget_exceeded(std::size_t failed, std::size_t total, double max_fraction) {
  return static_cast<double>(failed) > max_fraction * static_cast<double>(total);
}

struct ExperimentResult {
  std::vector<json> trials;
  json aggregate;
  std::size_t failed = 0;
  bool failure_budget_exceeded = false;
};

/// Runs trials x n_values jobs on `threads` workers that claim job indices
/// from a shared counter; results land in fixed slots, so the output order is
/// the job order whatever the schedule.
///
/// Writes trials.jsonl, aggregate.json, scatter_n<N>.csv (first trial of each
/// n), modulus_histogram.csv and prohorov_vs_n.csv into output_dir unless
/// `write_files` is false.
inline ExperimentResult run_experiment(const ExperimentConfig& c, bool write_files = true) {
  validate(c);
  std::optional<DiscreteMeasure> reference;
  if (c.prohorov) reference = reference_measure(c);
  struct Job {
    std::size_t n, trial;
  };
  std::vector<Job> jobs;
  for (std::size_t n : c.n_values)
    for (std::size_t t = 0; t < c.trials; ++t) jobs.push_back({n, t});
  std::vector<TrialResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
      results[i] = run_trial(c, reference ? &*reference : nullptr, jobs[i].n, jobs[i].trial);
  };
  const std::size_t threads =
      std::max<std::size_t>(1, c.threads ? c.threads : std::thread::hardware_concurrency());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  ExperimentResult res;
  for (auto& r : results) res.trials.push_back(r.report);
  res.aggregate = aggregate(res.trials);
  res.failed = res.aggregate["failed"].get<std::size_t>();
  res.failure_budget_exceeded = failure_budget_exceeded(res.failed, jobs.size(), c.max_failed_fraction);
  if (!write_files) return res;

  namespace fs = std::filesystem;
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + c.output_dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("trials.jsonl");
    for (const auto& t : res.trials) f << t.dump() << '\n';
  }
  {
    auto f = open("aggregate.json");
    f << res.aggregate.dump(2) << '\n';
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!results[i].cps) continue;
    auto f = open("scatter_n" + std::to_string(jobs[i].n) + ".csv");
    write_critical_points_csv(f, *results[i].cps);
  }
  {
    auto f = open("modulus_histogram.csv");
    f << "n,bin_lo,bin_hi,count\n";
    for (const auto& g : res.aggregate["groups"]) {
      const auto& h = g["modulus_histogram"];
      for (std::size_t b = 0; b < h.size(); ++b)
        f << g["n"].get<std::size_t>() << ',' << format_double(static_cast<double>(b) / h.size())
          << ',' << format_double(static_cast<double>(b + 1) / h.size()) << ','
          << h[b].get<std::size_t>() << '\n';
    }
  }
  {
    auto f = open("prohorov_vs_n.csv");
    f << "n,median,mean,se\n";
    for (const auto& g : res.aggregate["groups"]) {
      if (!g.contains("prohorov")) continue;
      f << g["n"].get<std::size_t>() << ',' << format_double(g["prohorov"]["median"].get<double>())
        << ',' << format_double(g["prohorov"]["mean"].get<double>()) << ','
        << format_double(g["prohorov"]["se"].get<double>()) << '\n';
    }
  }
  return res;
}

struct GafStatistics {
  double rho = 0.0;
  double tail_tol = 0.0;
  std::size_t trials = 0;
  std::size_t M = 0;
  double mean_count = 0.0;
  double se = 0.0;
  double expected_mean = 0.0;
  std::size_t near_boundary = 0;
  std::vector<double> bin_edges;
  std::vector<std::size_t> observed;
  std::vector<double> expected;
  double chi_square = 0.0;
  double dof = 0.0;
  double p_value = 0.0;
};

/// Zero counts and radial histogram of `trials` GAF samples (trial t seeded
/// with split_seed(master, M, t)). The chi-square test uses `bins` annuli of
/// equal expected count and is conditional on the total, so it has bins-1
/// degrees of freedom and tests only the shape of the radial intensity.
inline GafStatistics gaf_statistics(double rho, double tail_tol, std::size_t trials,
                                    std::uint64_t master, std::size_t bins = 10,
                                    mpfr_prec_t bits = kDefaultPrecisionBits) {
  if (trials < 2) throw DomainError("gaf_statistics: need at least two trials");
  if (bins < 2) throw DomainError("gaf_statistics: need at least two bins");
  GafStatistics g;
  g.rho = rho;
  g.tail_tol = tail_tol;
  g.trials = trials;
  g.M = gaf_truncation_degree(rho, tail_tol);
  g.bin_edges = gaf_equal_count_edges(rho, bins);
  g.observed.assign(bins, 0);
  std::vector<double> counts;
  for (std::size_t t = 0; t < trials; ++t) {
    const GafSample s = sample_gaf_zeros(rho, tail_tol, split_seed(master, g.M, t), bits);
    counts.push_back(static_cast<double>(s.zeros_in_B_rho.size()));
    for (std::size_t i = 0; i < s.zeros_in_B_rho.size(); ++i) {
      const double r = std::abs(s.zeros_in_B_rho[i]);
      const auto it = std::upper_bound(g.bin_edges.begin() + 1, g.bin_edges.end() - 1, r);
      ++g.observed[static_cast<std::size_t>(it - (g.bin_edges.begin() + 1))];
      if (s.near_boundary[i]) ++g.near_boundary;
    }
  }
  const auto s = detail::summarize(counts);
  g.mean_count = s.mean;
  g.se = s.se;
  g.expected_mean = gaf_expected_count(0.0, rho);
  std::size_t total = 0;
  for (auto o : g.observed) total += o;
  g.dof = static_cast<double>(bins - 1);
  g.expected.assign(bins, static_cast<double>(total) / static_cast<double>(bins));
  if (total > 0) {
    for (std::size_t b = 0; b < bins; ++b) {
      const double d = static_cast<double>(g.observed[b]) - g.expected[b];
      g.chi_square += d * d / g.expected[b];
    }
    g.p_value = boost::math::cdf(
        boost::math::complement(boost::math::chi_squared_distribution<double>(g.dof), g.chi_square));
  }
  return g;
}

inline json to_json(const GafStatistics& g) {
  return {{"rho", g.rho},
          {"tail_tol", g.tail_tol},
          {"trials", g.trials},
          {"M", g.M},
          {"mean_count", g.mean_count},
          {"se", g.se},
          {"expected_mean", g.expected_mean},
          {"near_boundary", g.near_boundary},
          {"bin_edges", g.bin_edges},
          {"observed", g.observed},
          {"expected", g.expected},
          {"chi_square", g.chi_square},
          {"dof", g.dof},
          {"p_value", g.p_value}};
}

}  // namespace critpoints
