#include "pinch/config.hpp"
#include "pinch/experiment.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <sys/wait.h>

using namespace pinch;

namespace {

std::string strip_runtime(const ResultTable& t) {
  std::string out;
  for (const auto& r : t.rows)
    out += format_number(r.sweep) + "," + r.scheme + "," + format_number(r.mean_rate) + "," +
           format_number(r.std_rate) + "\n";
  return out;
}

ExperimentSpec small_custom(std::vector<std::string> schemes) {
  ExperimentSpec s = default_spec(ExperimentId::Custom);
  set_antennas(s.params, 2, 2);
  s.params.region_side_m = 5.0;
  s.drops = 2;
  s.schemes = std::move(schemes);
  return s;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("pinch_test_" + name)).string();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PINCH_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(CounterRng, ReproducibleAndKeyed) {
  CounterRng a(7, 3, 0), b(7, 3, 0), c(7, 4, 0), d(8, 3, 0), e(7, 3, 1);
  for (int k = 0; k < 10; ++k) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
    EXPECT_NE(x, d.next());
    EXPECT_NE(x, e.next());
  }
}

TEST(CounterRng, UniformInUnitInterval) {
  CounterRng r(1, 0, 0);
  double sum = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000.0, 0.5, 0.01);
}

TEST(DrawLayout, InsideRegionAndDeterministic) {
  SystemParams p = default_params();
  p.num_users = 6;
  p.region_side_m = 12.0;
  p.entry_length_m = 4.0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    const UserLayout a = draw_layout(p, 42, k);
    const UserLayout b = draw_layout(p, 42, k);
    ASSERT_EQ(a.size(), 6);
    EXPECT_TRUE(a.inside(p));
    for (int m = 0; m < 6; ++m) {
      EXPECT_EQ(a[m].x, b[m].x);
      EXPECT_EQ(a[m].y, b[m].y);
      EXPECT_GE(a[m].x, 4.0);
      EXPECT_LE(a[m].x, 16.0);
    }
  }
}

TEST(DrawLayout, DependsOnlyOnSeedAndDrop) {
  SystemParams p = default_params();
  p.num_users = 3;
  const UserLayout a = draw_layout(p, 9, 5);
  p.total_power_w = 1.0;
  p.atten_np_per_m = 0.3;
  const UserLayout b = draw_layout(p, 9, 5);
  for (int m = 0; m < 3; ++m) EXPECT_EQ(a[m].x, b[m].x);
  EXPECT_NE(draw_layout(p, 9, 6)[0].x, a[0].x);
}

TEST(DrawLayout, PrefixStableWhenUsersAdded) {
  SystemParams p = default_params();
  p.num_users = 2;
  const UserLayout a = draw_layout(p, 5, 0);
  p.num_users = 4;
  const UserLayout b = draw_layout(p, 5, 0);
  for (int m = 0; m < 2; ++m) {
    EXPECT_EQ(a[m].x, b[m].x);
    EXPECT_EQ(a[m].y, b[m].y);
  }
}

TEST(ExperimentIds, ParseAndName) {
  EXPECT_EQ(parse_experiment_id("fig5"), ExperimentId::Fig5RateVsPower);
  EXPECT_EQ(parse_experiment_id("FIG11"), ExperimentId::Fig11EntryLength);
  EXPECT_EQ(parse_experiment_id("custom"), ExperimentId::Custom);
  EXPECT_THROW(parse_experiment_id("fig12"), ValidationError);
  for (const auto& [name, id] : experiment_names()) EXPECT_EQ(parse_experiment_id(experiment_name(id)), id);
}

TEST(ExperimentIds, EveryDefaultSpecValidates) {
  for (const auto& [name, id] : experiment_names()) EXPECT_NO_THROW(validate_spec(default_spec(id))) << name;
}

TEST(ApplyVariable, ConvertsUnits) {
  SystemParams p = default_params();
  apply_variable(p, "power_dbm", 30.0);
  EXPECT_NEAR(p.total_power_w, 1.0, 1e-12);
  apply_variable(p, "freq_ghz", 6.0);
  EXPECT_EQ(p.carrier_freq_hz, 6e9);
  apply_variable(p, "atten_db_per_m", 0.08);
  EXPECT_NEAR(p.atten_np_per_m, 0.08 * std::log(10.0) / 20.0, 1e-15);
  apply_variable(p, "users", 3.0);
  EXPECT_EQ(p.num_users, 3);
}

TEST(ApplyVariable, RejectsBadInput) {
  SystemParams p = default_params();
  EXPECT_THROW(apply_variable(p, "bogus", 1.0), ValidationError);
  EXPECT_THROW(apply_variable(p, "users", 2.5), ValidationError);
  EXPECT_THROW(apply_variable(p, "waveguides", 0.0), ValidationError);
  EXPECT_THROW(apply_variable(p, "atten_db_per_m", -1.0), ValidationError);
}

TEST(ValidateSpec, RejectsBadSpecs) {
  ExperimentSpec s = small_custom({"wmmse"});
  s.sweep = {"power_dbm", {30, 30}};
  EXPECT_THROW(validate_spec(s), ValidationError);
  s.sweep = {"power_dbm", {35, 30}};
  EXPECT_THROW(validate_spec(s), ValidationError);
  s.sweep = {"power_dbm", {}};
  EXPECT_THROW(validate_spec(s), ValidationError);
  s = small_custom({"wmmse"});
  s.drops = 0;
  EXPECT_THROW(validate_spec(s), ValidationError);
  s = small_custom({"nonsense"});
  EXPECT_THROW(validate_spec(s), ValidationError);
  s = small_custom({"scheme2"});
  EXPECT_THROW(validate_spec(s), ValidationError);
  s = small_custom({"wmmse"});
  s.sweep = {"region_m", {-1.0}};
  EXPECT_THROW(validate_spec(s), ValidationError);
  s = small_custom({"wmmse"});
  s.series = Axis{"power_dbm", {30}};
  EXPECT_THROW(validate_spec(s), ValidationError);
}

TEST(RelativeRateLoss, Examples) {
  EXPECT_DOUBLE_EQ(relative_rate_loss(10.0, 9.0), 10.0);
  EXPECT_DOUBLE_EQ(relative_rate_loss(10.0, 10.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_rate_loss(8.0, 10.0), -25.0);
  EXPECT_THROW(relative_rate_loss(0.0, 1.0), std::domain_error);
  EXPECT_THROW(relative_rate_loss(-1.0, 1.0), std::domain_error);
}

TEST(MeanStd, SampleStandardDeviation) {
  double mean = 0.0, sd = 0.0;
  mean_std({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0}, mean, sd);
  EXPECT_DOUBLE_EQ(mean, 5.0);
  EXPECT_NEAR(sd, std::sqrt(32.0 / 7.0), 1e-15);
  mean_std({3.0}, mean, sd);
  EXPECT_EQ(sd, 0.0);
  mean_std({0.1, 0.1, 0.1}, mean, sd);
  EXPECT_EQ(sd, 0.0);
}

TEST(Csv, EmptyTableIsHeaderOnly) { EXPECT_EQ(to_csv({}), std::string(kCsvHeader) + "\n"); }

TEST(Csv, RoundTripThroughIndependentParser) {
  ResultTable t;
  t.rows.push_back({10.0, "wmmse_mrc@region_m=10", 12.345678912345, 0.5, 1.25e-3});
  t.rows.push_back({-3.5, "fixed_ula", 0.0, 1e-300, 123456789.0});
  const std::string text = to_csv(t);
  const auto parsed = oracle::parse_csv(text);
  ASSERT_EQ(parsed.size(), 2u);
  ResultTable back;
  for (const auto& r : parsed) back.rows.push_back({r.sweep, r.scheme, r.mean, r.sd, r.runtime});
  EXPECT_EQ(to_csv(back), text);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(parsed[k].scheme, t.rows[k].scheme);
    EXPECT_NEAR(parsed[k].mean, t.rows[k].mean_rate, 1e-8 * std::max(1.0, std::abs(t.rows[k].mean_rate)));
    EXPECT_EQ(parsed[k].sweep, t.rows[k].sweep);
  }
}

TEST(Csv, EmitWritesFileAndReportsBadPath) {
  ResultTable t;
  t.rows.push_back({1.0, "a", 2.0, 3.0, 4.0});
  const std::string path = temp_path("emit.csv");
  emit_csv(t, path);
  EXPECT_EQ(read_file(path), to_csv(t));
  std::filesystem::remove(path);
  try {
    emit_csv(t, "/nonexistent_dir_for_pinch/x.csv");
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent_dir_for_pinch/x.csv"), std::string::npos);
  }
}

TEST(RunExperiment, DeterministicForFixedSeed) {
  const ExperimentSpec s = small_custom({"wmmse_mrc", "fixed_ula"});
  const ResultTable a = run_experiment(s);
  const ResultTable b = run_experiment(s);
  ASSERT_EQ(a.rows.size(), 2u);
  EXPECT_EQ(strip_runtime(a), strip_runtime(b));
}

TEST(RunExperiment, ThreadCountDoesNotChangeResults) {
  ExperimentSpec s = small_custom({"wmmse_mrc"});
  s.drops = 4;
  const ResultTable a = run_experiment(s);
  s.threads = 3;
  EXPECT_EQ(strip_runtime(a), strip_runtime(run_experiment(s)));
}

TEST(RunExperiment, AddingSchemeLeavesOthersUnchanged) {
  const ResultTable a = run_experiment(small_custom({"fixed_ula"}));
  const ResultTable b = run_experiment(small_custom({"mrc", "fixed_ula"}));
  const ResultRow* ra = a.find("fixed_ula", 40.0);
  const ResultRow* rb = b.find("fixed_ula", 40.0);
  ASSERT_NE(ra, nullptr);
  ASSERT_NE(rb, nullptr);
  EXPECT_EQ(ra->mean_rate, rb->mean_rate);
  EXPECT_EQ(ra->std_rate, rb->std_rate);
}

TEST(RunExperiment, SeriesLabelsAndRowCount) {
  ExperimentSpec s = small_custom({"fixed_ula"});
  s.drops = 1;
  s.sweep = {"power_dbm", {30, 40}};
  s.series = Axis{"region_m", {5, 8}};
  const ResultTable t = run_experiment(s);
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_NE(t.find("fixed_ula@region_m=5", 30.0), nullptr);
  EXPECT_NE(t.find("fixed_ula@region_m=8", 40.0), nullptr);
}

TEST(RunExperiment, SingleUserFigureRows) {
  ExperimentSpec s = default_spec(ExperimentId::Fig3GapVsD);
  s.drops = 200;
  s.sweep.values = {40.0};
  const ResultTable t = run_experiment(s);
  ASSERT_NE(t.find("gap_analytic", 40.0), nullptr);
  EXPECT_EQ(t.find("gap_analytic", 40.0)->std_rate, 0.0);
  EXPECT_GT(t.find("gap", 40.0)->mean_rate, 0.0);
}

TEST(RunExperiment, EntryLengthFigureAddsLossRows) {
  ExperimentSpec s = default_spec(ExperimentId::Fig11EntryLength);
  set_antennas(s.params, 2, 2);
  s.drops = 1;
  s.sweep.values = {0.0};
  s.series = Axis{"region_m", {5.0}};
  const ResultTable t = run_experiment(s);
  const ResultRow* with = t.find("wmmse_mrc@region_m=5", 0.0);
  const ResultRow* without = t.find("wmmse_mrc_blind@region_m=5", 0.0);
  const ResultRow* loss = t.find("rel_loss_pct@region_m=5", 0.0);
  ASSERT_TRUE(with && without && loss);
  EXPECT_DOUBLE_EQ(loss->mean_rate, relative_rate_loss(with->mean_rate, without->mean_rate));
}

TEST(RunExperiment, TimingRowsHaveCumulativeRuntime) {
  ExperimentSpec s = default_spec(ExperimentId::Fig8Timing);
  set_antennas(s.params, 2, 2);
  s.drops = 1;
  const ResultTable t = run_experiment(s);
  std::set<std::string> schemes;
  double last = -1.0;
  std::string current;
  for (const auto& r : t.rows) {
    schemes.insert(r.scheme);
    if (r.scheme != current) {
      current = r.scheme;
      last = -1.0;
    }
    EXPECT_GE(r.mean_runtime_s, last);
    last = r.mean_runtime_s;
  }
  EXPECT_EQ(schemes, (std::set<std::string>{"wmmse", "wmmse_mrc"}));
}

TEST(LocalMinima, StrictInteriorMinima) {
  const std::vector<std::pair<double, double>> profile = {{0, 3}, {1, 1}, {2, 2}, {3, 2}, {4, 0}, {5, 5}, {6, 4}};
  EXPECT_EQ(local_minima(profile), (std::vector<double>{1.0, 4.0}));
}

TEST(Config, ParsesCommentsAndReportsLine) {
  const auto e = parse_config_text("# header\nexp = fig5 # trailing\n\n drops=3\n");
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0], (std::pair<std::string, std::string>{"exp", "fig5"}));
  EXPECT_EQ(e[1], (std::pair<std::string, std::string>{"drops", "3"}));
  try {
    parse_config_text("exp = fig5\nno equals sign\n");
    FAIL();
  } catch (const ValidationError& err) {
    EXPECT_NE(std::string(err.what()).find("2"), std::string::npos);
  }
}

TEST(Config, BuildSpecOverridesAndSweeps) {
  const ExperimentSpec s = build_spec(
      {{"exp", "fig7"}, {"drops", "3"}, {"power_dbm", "20,25"}, {"region_m", "12"}, {"drops", "4"}, {"seed", "0x10"}});
  EXPECT_EQ(s.id, ExperimentId::Fig7MrcVsWmmse);
  EXPECT_EQ(s.drops, 4);
  EXPECT_EQ(s.seed, 16u);
  EXPECT_EQ(s.sweep.values, (std::vector<double>{20.0, 25.0}));
  ASSERT_TRUE(s.series);
  EXPECT_EQ(s.series->values, (std::vector<double>{12.0}));
}

TEST(Config, NonSweptVariableSetsBaseParams) {
  const ExperimentSpec s = build_spec({{"exp", "custom"}, {"users", "3"}, {"waveguides", "5"}, {"noise_dbm", "-80"}});
  EXPECT_EQ(s.params.num_users, 3);
  EXPECT_EQ(s.params.num_waveguides, 5);
  EXPECT_NEAR(watts_to_dbm(s.params.noise_power_w), -80.0, 1e-9);
}

TEST(Config, RejectsInvalidEntries) {
  EXPECT_THROW(build_spec({{"exp", "fig99"}}), ValidationError);
  EXPECT_THROW(build_spec({{"bogus", "1"}}), ValidationError);
  EXPECT_THROW(build_spec({{"drops", "two"}}), ValidationError);
  EXPECT_THROW(build_spec({{"drops", "0"}}), ValidationError);
  EXPECT_THROW(build_spec({{"users", "2,3"}}), ValidationError);
  EXPECT_THROW(build_spec({{"power_dbm", "40,30"}}), ValidationError);
  EXPECT_THROW(build_spec({{"seed", "-1"}}), ValidationError);
  EXPECT_THROW(build_spec({{"schemes", "wmmse,unknown"}}), ValidationError);
  EXPECT_THROW(load_config_file("/nonexistent/pinch.cfg"), ValidationError);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("--exp fig99"), 2);
  EXPECT_EQ(run_cli("--exp custom --drops 0"), 2);
  EXPECT_EQ(run_cli("--no-such-flag"), 2);
  EXPECT_EQ(run_cli("--set bogus=1"), 2);
  EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Cli, WritesCsvAndFlagsOverrideConfig) {
  const std::string cfg = temp_path("cli.cfg");
  const std::string out = temp_path("cli.csv");
  {
    std::ofstream f(cfg);
    f << "exp = custom\nusers = 2\nwaveguides = 2\nregion_m = 5\ndrops = 5\nschemes = fixed_ula\n";
  }
  ASSERT_EQ(run_cli("--config " + cfg + " --drops 1 --power-dbm 30,35 --out " + out), 0);
  const auto rows = oracle::parse_csv(read_file(out));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].scheme, "fixed_ula");
  EXPECT_EQ(rows[0].sweep, 30.0);
  EXPECT_EQ(rows[0].sd, 0.0);  // one drop
  EXPECT_EQ(run_cli("--config " + cfg + " --drops 1 --out /nonexistent_dir_for_pinch/o.csv"), 1);
  std::filesystem::remove(cfg);
  std::filesystem::remove(out);
}
