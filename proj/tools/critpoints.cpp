// critpoints: command-line front end.
//
// Exit codes: 0 success, 2 configuration or input error, 3 solver-failure
// budget exceeded (or a solver failure in a single-shot command).

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "critpoints/circle.hpp"
#include "critpoints/classic.hpp"
#include "critpoints/experiment.hpp"
#include "critpoints/io.hpp"
#include "critpoints/measures.hpp"
#include "critpoints/metrics.hpp"
#include "critpoints/polyroots.hpp"

namespace cp = critpoints;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

/// Writes to --out when given, otherwise to stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw cp::ConfigError("cannot write " + path);
    }
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long> precision_bits;
  std::string out;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* app, Common& c, bool with_threads) {
  app->add_option("--config", c.config, "INI experiment config");
  app->add_option("--seed", c.seed, "Seed (master seed for multi-trial commands)");
  app->add_option("--precision-bits", c.precision_bits, "Starting working precision in bits")
      ->check(CLI::Range(53L, 1L << 20));
  app->add_option("--out", c.out, "Output file (directory for run and circle-stats)");
  if (with_threads) app->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
}

mpfr_prec_t bits_of(const Common& c, mpfr_prec_t fallback = cp::kDefaultPrecisionBits) {
  return c.precision_bits ? static_cast<mpfr_prec_t>(*c.precision_bits) : fallback;
}

cp::ExperimentConfig config_of(const Common& c) {
  cp::ExperimentConfig cfg;
  if (!c.config.empty()) cfg = cp::load_config(c.config);
  if (c.seed) cfg.master_seed = *c.seed;
  if (c.precision_bits) cfg.precision_bits = static_cast<mpfr_prec_t>(*c.precision_bits);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.threads) cfg.threads = *c.threads;
  cp::validate(cfg);
  return cfg;
}

cp::json checks_json(const std::vector<cp::cplx>& roots, mpfr_prec_t bits) {
  const auto cps = cp::critical_points(cp::RootPolynomial(roots, bits));
  cp::json j;
  j["n"] = roots.size();
  const auto hull = cp::gauss_lucas_check(roots, cps);
  j["gauss_lucas"] = {{"contained", hull.contained},
                      {"worst_violation", hull.worst_violation},
                      {"tolerance", hull.tolerance}};
  try {
    j["interlacing"] = cp::interlacing_check(roots, cps);
  } catch (const cp::DomainError& e) {
    j["interlacing"] = std::string("not applicable: ") + e.what();
  }
  try {
    j["jensen"] = cp::jensen_check(roots, cps);
  } catch (const cp::DomainError& e) {
    j["jensen"] = std::string("not applicable: ") + e.what();
  }
  if (roots.size() == 3) {
    try {
      const auto m = cp::marden_check(roots[0], roots[1], roots[2], bits);
      j["marden"] = {{"max_deviation", m.max_deviation}, {"tangency_error", m.tangency_error}};
    } catch (const cp::DomainError& e) {
      j["marden"] = std::string("not applicable: ") + e.what();
    }
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critical points of random polynomials with IID roots"};
  app.require_subcommand(1);

  // sample
  Common sample_opts;
  std::string sample_measure = "disk:1";
  std::size_t sample_n = 100;
  auto* sample = app.add_subcommand("sample", "Draw n IID roots and write them as CSV");
  add_common(sample, sample_opts, false);
  sample->add_option("--measure", sample_measure,
                     "kind[:args], e.g. disk:1, circle:1, segment:0,0,1,0, annulus:0.5,1, "
                     "gaussian:0,0,1, atomic:1,0,0.5;-1,0,0.5 (ignored with --config)");
  sample->add_option("-n,--n", sample_n, "Number of roots")->check(CLI::PositiveNumber);

  // critical-points
  Common cps_opts;
  std::string cps_in;
  auto* cps_cmd = app.add_subcommand("critical-points", "Roots CSV in, critical points CSV out");
  add_common(cps_cmd, cps_opts, false);
  cps_cmd->add_option("--in", cps_in, "Roots CSV (re,im)")->required();

  // compare
  Common cmp_opts;
  std::string cmp_a, cmp_b;
  double cmp_tol = 1e-9;
  auto* compare = app.add_subcommand("compare", "Prohorov distance between two CSV point sets");
  add_common(compare, cmp_opts, false);
  compare->add_option("a", cmp_a, "First CSV (re,im[,weight])")->required();
  compare->add_option("b", cmp_b, "Second CSV (re,im[,weight])")->required();
  compare->add_option("--tol", cmp_tol, "Absolute tolerance")->check(CLI::PositiveNumber);

  // circle-stats
  Common circ_opts;
  std::size_t circ_n = 300, circ_trials = 100;
  double circ_rho = 0.5;
  auto* circle = app.add_subcommand("circle-stats", "Count law of N(rho) for unit-circle roots");
  add_common(circle, circ_opts, true);
  circle->add_option("-n,--n", circ_n, "Degree")->check(CLI::Range(2UL, 1UL << 20));
  circle->add_option("--trials", circ_trials, "Trials")->check(CLI::PositiveNumber);
  circle->add_option("--rho", circ_rho, "Ball radius")->check(CLI::Range(0.0, 1.0));

  // gaf-zeros
  Common gaf_opts;
  double gaf_rho = 0.5, gaf_tail = cp::kDefaultTailTol;
  std::size_t gaf_trials = 1;
  auto* gaf = app.add_subcommand("gaf-zeros", "Zeros of the Gaussian power series in B_rho");
  add_common(gaf, gaf_opts, false);
  gaf->add_option("--rho", gaf_rho, "Ball radius")->check(CLI::Range(0.0, 1.0));
  gaf->add_option("--tail-tol", gaf_tail, "Truncation tolerance")->check(CLI::PositiveNumber);
  gaf->add_option("--trials", gaf_trials,
                  "1: write the zeros of one sample; more: count and radial statistics")
      ->check(CLI::PositiveNumber);

  // classic-checks
  Common classic_opts;
  std::string classic_in;
  auto* classic = app.add_subcommand(
      "classic-checks", "Gauss-Lucas, interlacing, Jensen and Marden checks on a roots CSV");
  add_common(classic, classic_opts, false);
  classic->add_option("--in", classic_in, "Roots CSV (re,im)")->required();

  // perturb-demo
  Common pert_opts;
  std::size_t pert_n = 10, pert_steps = 20;
  auto* perturb =
      app.add_subcommand("perturb-demo", "Move one root of z^n - 1 onto its neighbour");
  add_common(perturb, pert_opts, false);
  perturb->add_option("-n,--n", pert_n, "Degree")->check(CLI::Range(3UL, 1UL << 16));
  perturb->add_option("--steps", pert_steps, "Steps along the arc")->check(CLI::PositiveNumber);

  // report
  Common report_opts;
  std::vector<std::string> report_in;
  auto* report = app.add_subcommand("report", "Aggregate JSON-lines trial reports");
  add_common(report, report_opts, false);
  report->add_option("files", report_in, "trials.jsonl files")->required();

  // run
  Common run_opts;
  auto* run = app.add_subcommand("run", "Run the experiment described by --config");
  add_common(run, run_opts, true);
  run->get_option("--config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sample) {
      cp::MeasureSpec spec = sample_opts.config.empty()
                                 ? cp::parse_measure(sample_measure)
                                 : cp::load_config(sample_opts.config).measure;
      const auto s = cp::sample_roots(spec, sample_n, sample_opts.seed.value_or(1));
      Sink out(sample_opts.out);
      cp::write_points_csv(out.get(), s.roots);
    } else if (*cps_cmd) {
      const auto table = cp::read_points_csv(cps_in);
      if (table.points.size() < 2) throw cp::ConfigError("critical-points: need at least 2 roots");
      const auto cps = cp::critical_points(cp::RootPolynomial(table.points, bits_of(cps_opts)));
      Sink out(cps_opts.out);
      cp::write_critical_points_csv(out.get(), cps);
    } else if (*compare) {
      const auto a = cp::to_measure(cp::read_points_csv(cmp_a));
      const auto b = cp::to_measure(cp::read_points_csv(cmp_b));
      Sink out(cmp_opts.out);
      out.get() << cp::format_double(cp::prohorov_distance(a, b, cmp_tol)) << '\n';
    } else if (*circle) {
      cp::ExperimentConfig cfg = config_of(circ_opts);
      if (circ_opts.config.empty()) {
        cfg.measure = cp::UniformCircle{1.0};
        cfg.n_values = {circ_n};
        cfg.trials = circ_trials;
        cfg.rho = circ_rho;
        cfg.prohorov = false;
        if (circ_opts.out.empty()) cfg.output_dir = "circle-stats";
      }
      cp::validate(cfg);
      const auto res = cp::run_experiment(cfg);
      std::cout << res.aggregate.dump(2) << '\n';
      if (res.failure_budget_exceeded) return kExitSolver;
    } else if (*gaf) {
      const std::uint64_t seed = gaf_opts.seed.value_or(1);
      Sink out(gaf_opts.out);
      if (gaf_trials == 1) {
        const auto g = cp::sample_gaf_zeros(gaf_rho, gaf_tail, seed, bits_of(gaf_opts));
        cp::write_points_csv(out.get(), g.zeros_in_B_rho);
      } else {
        const auto g = cp::gaf_statistics(gaf_rho, gaf_tail, gaf_trials, seed, 10, bits_of(gaf_opts));
        out.get() << cp::to_json(g).dump(2) << '\n';
      }
    } else if (*classic) {
      const auto table = cp::read_points_csv(classic_in);
      if (table.points.size() < 2) throw cp::ConfigError("classic-checks: need at least 2 roots");
      Sink out(classic_opts.out);
      out.get() << checks_json(table.points, bits_of(classic_opts)).dump(2) << '\n';
    } else if (*perturb) {
      const auto r =
          cp::perturbation_demo(pert_n, pert_opts.seed.value_or(0), pert_steps, bits_of(pert_opts));
      Sink out(pert_opts.out);
      r.write_csv(out.get());
    } else if (*report) {
      std::vector<cp::json> trials;
      for (const auto& path : report_in) {
        std::ifstream in(path);
        if (!in) throw cp::ConfigError("cannot open " + path);
        for (auto& t : cp::read_jsonl(in)) trials.push_back(std::move(t));
      }
      Sink out(report_opts.out);
      out.get() << cp::aggregate(std::move(trials)).dump(2) << '\n';
    } else if (*run) {
      const auto cfg = config_of(run_opts);
      const auto res = cp::run_experiment(cfg);
      std::cerr << "trials: " << res.trials.size() << ", failed: " << res.failed
                << ", output: " << cfg.output_dir << '\n';
      if (res.failure_budget_exceeded) {
        std::cerr << "solver-failure budget exceeded\n";
        return kExitSolver;
      }
    }
  } catch (const cp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cp::DomainError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cp::SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << " (worst residual " << e.worst_residual()
              << ")\n";
    return kExitSolver;
  }
  return 0;
}
