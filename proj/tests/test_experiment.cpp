#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "critpoints/experiment.hpp"
#include "critpoints/io.hpp"

using namespace critpoints;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ExperimentConfig small_config(const std::string& dir) {
  std::istringstream in(R"(
[measure]
kind = uniform_disk
radius = 1

[experiment]
n_values = 8, 15
trials = 4
master_seed = 3
reference_sample_size = 300
)");
  auto c = parse_config(in);
  c.output_dir = (std::filesystem::temp_directory_path() / dir).string();
  return c;
}

std::vector<json> stripped_lines(const std::string& text) {
  std::istringstream in(text);
  std::vector<json> out;
  for (auto& j : read_jsonl(in)) out.push_back(strip_timing(j));
  return out;
}

}  // namespace

TEST(Seeds, SplitMixIsPinned) {
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(split_seed(1, 2, 3),
            splitmix64(splitmix64(splitmix64(1) ^ 2) ^ 3));
  EXPECT_NE(split_seed(1, 2, 3), split_seed(1, 3, 2));
}

TEST(Config, ParsesAllMeasureKinds) {
  const std::vector<std::pair<std::string, std::size_t>> cases{
      {"kind = uniform_circle\nradius = 2", 0},
      {"kind = disk", 1},
      {"kind = uniform_segment\na = 0,0\nb = 1,0.5", 2},
      {"kind = atomic\natoms = 1,0,0.5; -1,0,0.5", 3},
      {"kind = annulus\nr_inner = 0.5\nr_outer = 1", 4},
      {"kind = complex_gaussian\nmean = 1,-1\nscale = 2", 5},
  };
  for (const auto& [body, index] : cases) {
    std::istringstream in("[measure]\n" + body + "\n[experiment]\nn_values = 5\n");
    EXPECT_EQ(parse_config(in).measure.index(), index) << body;
  }
}

TEST(Config, RejectsInvalidInput) {
  const std::vector<std::string> bad{
      "[measure]\nkind = disk\n[experiment]\nn_values = 1\n",
      "[measure]\nkind = disk\n[experiment]\ntrials = 0\n",
      "[measure]\nkind = disk\n[experiment]\nrho = 1.5\n",
      "[measure]\nkind = disk\n[experiment]\nbogus = 1\n",
      "[measure]\nkind = hexagon\n",
      "[measure]\nkind = atomic\natoms = 0,0,0.4\n",
      "[experiment]\nn_values = 5\n",
      "[measure]\nkind = disk\nradius = x\n",
      "[measure]\nkind = disk\n[other]\na = 1\n",
  };
  for (const auto& text : bad) {
    std::istringstream in(text);
    EXPECT_THROW(parse_config(in), ConfigError) << text;
  }
}

TEST(Config, MeasureShorthand) {
  EXPECT_EQ(std::get<UniformDisk>(parse_measure("disk:2")).radius, 2.0);
  EXPECT_EQ(std::get<UniformSegment>(parse_measure("segment:0,0,1,2")).b, cplx(1.0, 2.0));
  EXPECT_EQ(std::get<Atomic>(parse_measure("atomic:1,0,0.5;-1,0,0.5")).atoms.size(), 2u);
  EXPECT_EQ(std::get<ComplexGaussian>(parse_measure("gaussian")).scale, 1.0);
  EXPECT_THROW(parse_measure("annulus:1"), ConfigError);
}

TEST(Csv, RoundTripsExactly) {
  const auto s = sample_roots(ComplexGaussian{}, 50, 1);
  std::stringstream ss;
  write_points_csv(ss, s.roots);
  const auto t = read_points_csv(ss);
  EXPECT_EQ(t.points, s.roots);
  EXPECT_TRUE(t.extra_name.empty());

  const auto cps = critical_points(RootPolynomial(s.roots));
  std::stringstream cs;
  write_critical_points_csv(cs, cps);
  const auto u = read_points_csv(cs);
  EXPECT_EQ(u.points, cps.points);
  EXPECT_EQ(u.extra, cps.residuals);
  EXPECT_EQ(u.extra_name, "residual");

  const DiscreteMeasure m({{{0.1, 0.2}, 0.3}, {{-1.0, 0.0}, 0.7}});
  std::stringstream ms;
  write_measure_csv(ms, m);
  const auto back = to_measure(read_points_csv(ms));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.atoms()[1].weight, 0.3);
}

TEST(Csv, RejectsMalformedInput) {
  for (const std::string text : {"x,y\n1,2\n", "re,im\n1\n", "re,im\n1,abc\n", "re,im,foo\n1,2,3\n", ""}) {
    std::istringstream in(text);
    EXPECT_THROW(read_points_csv(in), ConfigError) << text;
  }
}

TEST(Experiment, AtomicSingleTrialIsDeterministic) {
  std::istringstream in(
      "[measure]\nkind = atomic\natoms = 1,0,0.5; -1,0,0.5\n[experiment]\nn_values = 2\ntrials = 1\n");
  auto c = parse_config(in);
  const auto a = run_experiment(c, false);
  const auto b = run_experiment(c, false);
  ASSERT_EQ(a.trials.size(), 1u);
  EXPECT_EQ(strip_timing(a.trials[0]).dump(), strip_timing(b.trials[0]).dump());
  EXPECT_EQ(a.trials[0]["critical_points"], 1);
}

TEST(Experiment, ByteIdenticalAcrossRunsAndThreadCounts) {
  auto c1 = small_config("critpoints_det_1");
  auto c2 = small_config("critpoints_det_2");
  c1.threads = 1;
  c2.threads = 3;
  run_experiment(c1);
  run_experiment(c2);
  namespace fs = std::filesystem;
  for (const char* f : {"scatter_n8.csv", "scatter_n15.csv", "modulus_histogram.csv", "prohorov_vs_n.csv"})
    EXPECT_EQ(read_file(fs::path(c1.output_dir) / f), read_file(fs::path(c2.output_dir) / f)) << f;
  EXPECT_EQ(stripped_lines(read_file(fs::path(c1.output_dir) / "trials.jsonl")),
            stripped_lines(read_file(fs::path(c2.output_dir) / "trials.jsonl")));
  const auto g1 = strip_timing(json::parse(read_file(fs::path(c1.output_dir) / "aggregate.json")));
  const auto g2 = strip_timing(json::parse(read_file(fs::path(c2.output_dir) / "aggregate.json")));
  EXPECT_EQ(g1.dump(), g2.dump());
}

TEST(Experiment, TrialReportsFollowSchema) {
  auto c = small_config("critpoints_schema");
  const auto res = run_experiment(c, false);
  ASSERT_EQ(res.trials.size(), 8u);
  for (const auto& t : res.trials) {
    for (const char* key : {"trial_index", "n", "seed", "status", "precision_used", "critical_points",
                            "prohorov_to_reference", "pairing", "N_rho", "gauss_lucas", "timing_ms"})
      EXPECT_TRUE(t.contains(key)) << key;
    EXPECT_EQ(t["status"], "ok");
    EXPECT_GT(t["timing_ms"].get<double>(), 0.0);
    const auto& p = t["pairing"];
    EXPECT_EQ(p["matched"].get<std::size_t>() + p["crowded"].get<std::size_t>() +
                  p["unmatched"].get<std::size_t>(),
              t["n"].get<std::size_t>());
    EXPECT_EQ(t["seed"].get<std::uint64_t>(),
              split_seed(c.master_seed, t["n"].get<std::size_t>(), t["trial_index"].get<std::size_t>()));
  }
}

TEST(Experiment, ReferenceSampleIsPinned) {
  auto c = small_config("critpoints_ref");
  const auto ref = reference_measure(c);
  const auto s = sample_roots(c.measure, c.reference_sample_size, split_seed(c.master_seed, 0, 0));
  const auto expect = DiscreteMeasure::empirical(s.roots);
  ASSERT_EQ(ref.size(), expect.size());
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_EQ(ref.atoms()[i].location, expect.atoms()[i].location);
}

TEST(Aggregate, OrderIndependentAndSplittable) {
  auto c = small_config("critpoints_agg");
  const auto res = run_experiment(c, false);
  auto shuffled = res.trials;
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(strip_timing(aggregate(shuffled)).dump(), strip_timing(res.aggregate).dump());
  // Aggregating two JSON-lines files equals aggregating their concatenation.
  std::ostringstream first, second;
  for (std::size_t i = 0; i < res.trials.size(); ++i)
    (i % 3 ? first : second) << res.trials[i].dump() << '\n';
  std::istringstream a(first.str()), b(second.str());
  auto joined = read_jsonl(a);
  for (auto& t : read_jsonl(b)) joined.push_back(t);
  EXPECT_EQ(aggregate(joined).dump(), res.aggregate.dump());
}

TEST(Aggregate, CircleRunsCompareWithCountLaw) {
  std::istringstream in("[measure]\nkind = circle\n[experiment]\nn_values = 20\ntrials = 5\nprohorov = false\n");
  const auto res = run_experiment(parse_config(in), false);
  const auto& g = res.aggregate["groups"][0];
  ASSERT_TRUE(g.contains("N_rho"));
  EXPECT_TRUE(g["N_rho"].contains("tv_distance"));
  EXPECT_TRUE(g["N_rho"].contains("count_law_pmf"));
  EXPECT_EQ(g["coefficients"].size(), 4u);
  EXPECT_FALSE(res.trials[0].contains("prohorov_to_reference"));
}

TEST(Aggregate, FailuresAreCountedAndBudgeted) {
  std::vector<json> trials{
      {{"n", 5}, {"trial_index", 0}, {"status", "solver_failure"}, {"timing_ms", 1.0}}};
  const auto g = aggregate(trials);
  EXPECT_EQ(g["failed"], 1);
  EXPECT_EQ(g["groups"][0]["failed"], 1);
  EXPECT_TRUE(failure_budget_exceeded(1, 10, 0.05));
  EXPECT_FALSE(failure_budget_exceeded(1, 100, 0.05));
  EXPECT_FALSE(failure_budget_exceeded(0, 1, 0.0));
}

TEST(GafStatisticsTest, SummaryFields) {
  const auto g = gaf_statistics(0.5, 1e-8, 50, 9);
  EXPECT_EQ(g.observed.size(), 10u);
  EXPECT_EQ(g.bin_edges.size(), 11u);
  EXPECT_EQ(g.dof, 9.0);
  EXPECT_GE(g.p_value, 0.0);
  EXPECT_LE(g.p_value, 1.0);
  EXPECT_NEAR(g.expected_mean, 1.0 / 3.0, 1e-15);
}
