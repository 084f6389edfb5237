#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlse/experiments.hpp"
#include "nlse/io.hpp"
#include "test_support.hpp"

namespace nlse {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("nlse_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(RelativeError, Examples) {
  EXPECT_NEAR(relative_error(1.0016, 1.0), 0.16, 1e-12);
  EXPECT_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_NEAR(relative_error(0.99, 2.0), 50.5, 1e-12);
  EXPECT_NEAR(relative_error(-1.0, -2.0), 50.0, 1e-12);
  EXPECT_THROW(relative_error(1.0, 0.0), DomainError);
}

RunSummary run(double value, std::uint64_t seed, double err, bool failed = false) {
  RunSummary r;
  r.value = value;
  r.seed = seed;
  r.relative_error_percent = err;
  r.elapsed_seconds = 2 * err;
  r.failed = failed;
  return r;
}

TEST(Summarize, RecomputesStatistics) {
  const auto rows = summarize({run(2.0, 2, 0.3), run(1.0, 3, 0.2), run(1.0, 1, 0.1), run(1.0, 2, 0.6)});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].value, 1.0);
  ASSERT_EQ(rows[0].runs.size(), 3u);
  EXPECT_EQ(rows[0].runs[0].seed, 1u);
  EXPECT_EQ(rows[0].runs[2].seed, 3u);
  EXPECT_NEAR(rows[0].mean_rel_error_percent, 0.3, 1e-15);
  // sample std of {0.1, 0.6, 0.2}: sqrt((0.04 + 0.09 + 0.01) / 2)
  EXPECT_NEAR(rows[0].std_rel_error_percent, std::sqrt(0.07), 1e-15);
  EXPECT_NEAR(rows[0].mean_elapsed_seconds, 0.6, 1e-15);
  EXPECT_FALSE(rows[0].single_run);
  EXPECT_TRUE(rows[1].single_run);
  EXPECT_EQ(rows[1].std_rel_error_percent, 0.0);
}

TEST(Summarize, FailedRunsExcludedAndFlagged) {
  const auto rows = summarize({run(1.0, 1, 0.4), run(1.0, 2, NAN, true), run(1.0, 3, 0.2), run(3.0, 1, NAN, true)});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].failed_runs, 1u);
  EXPECT_NEAR(rows[0].mean_rel_error_percent, 0.3, 1e-15);
  EXPECT_EQ(rows[1].failed_runs, 1u);
  EXPECT_TRUE(std::isnan(rows[1].mean_rel_error_percent));
  const auto t = summary_table(rows);
  EXPECT_EQ(t.rows[0][5], 1.0);
}

TEST(Csv, RoundTripIsByteIdentical) {
  CsvTable t{{"a", "b", "c"}, {{0.1, 1.0 / 3.0, -2.5e-300}, {1e17, 0.0, std::nan("")}, {-0.0, 7, 12345.678901234567}}};
  const std::string once = to_csv_string(t);
  const std::string twice = to_csv_string(parse_csv(once));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(parse_csv(once).rows[0][1], 1.0 / 3.0);
}

TEST(Csv, EmittedFilesRoundTrip) {
  const auto dir = scratch_dir("csv_roundtrip");
  Rng rng(1);
  const auto p = test::random_network(rng);
  emit_error_field(p, 1.0, dir / "error_field.csv", 16, 8);
  const auto files = emit_snapshots(p, 1.0, default_snapshot_times(), dir, 32);
  std::vector<fs::path> all = files;
  all.push_back(dir / "error_field.csv");
  for (const auto& f : all) {
    const std::string text = slurp(f);
    EXPECT_EQ(to_csv_string(parse_csv(text)), text) << f;
  }
}

TEST(Dataset, RoundTrip) {
  const auto dir = scratch_dir("dataset");
  TrainConfig c;
  c.n_u = 50;
  const auto d = generate_training_data(c);
  write_dataset(dir / "data.csv", d.noisy, {c.beta_true, c.noise_level, c.seed, d.noisy.size()});
  const auto back = read_dataset(dir / "data.csv");
  ASSERT_EQ(back.size(), d.noisy.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].x, d.noisy[i].x);
    EXPECT_EQ(back[i].v, d.noisy[i].v);
  }
  const auto meta = read_dataset_meta(dir / "data.csv");
  EXPECT_EQ(meta.seed, 1234u);
  EXPECT_EQ(meta.count, 50u);
}

TEST(FdBaseline, NoiseFreeFineGridRecoversBeta) {
  for (double beta : {0.5, 1.0, 2.0}) {
    const auto g = soliton_grid_for_spacing(beta, 0.02);
    const auto est = fd_baseline_estimate(g);
    EXPECT_LT(relative_error(est.beta_hat, beta), 1.0) << "beta " << beta;
    EXPECT_TRUE(std::isnan(est.derivative_noise_gain));
  }
}

TEST(FdBaseline, NoiseGainFollowsStencilVariance) {
  Rng rng(2);
  const auto clean = soliton_grid_for_spacing(1.0, 0.05);
  const auto noisy = add_grid_noise(clean, 0.2, rng);
  const auto est = fd_baseline_estimate(noisy, clean);
  EXPECT_NEAR(est.expected_gain, std::sqrt(6.0) / (clean.h_x * clean.h_x), 1e-9);
  EXPECT_GT(est.derivative_noise_gain, est.expected_gain / 3);
  EXPECT_LT(est.derivative_noise_gain, est.expected_gain * 3);
  EXPECT_GT(relative_error(est.beta_hat, 1.0), 10.0);
}

TEST(FdBaseline, HalvingSpacingQuadruplesGain) {
  const auto rows = fd_spacing_sweep(1.0, 0.2, {0.2, 0.1, 0.05}, 1234);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const double ratio = rows[i + 1].estimate.derivative_noise_gain / rows[i].estimate.derivative_noise_gain;
    EXPECT_GT(ratio, 3.0);
    EXPECT_LT(ratio, 5.0);
  }
  EXPECT_NEAR(noise_gain_slope(rows), 2.0, 0.2);
  const auto t = fd_table(rows);
  EXPECT_EQ(t.rows.size(), 3u);
}

TEST(FdBaseline, GridTooSmallIsError) {
  const auto g = soliton_grid(1.0, 4, 10);
  EXPECT_THROW(fd_baseline_estimate(g), ConfigError);
  const auto g2 = soliton_grid(1.0, 10, 4);
  EXPECT_THROW(fd_baseline_estimate(g2), ConfigError);
}

TEST(ErrorField, RowCountAndZeroNetwork) {
  const auto dir = scratch_dir("error_field");
  const auto p = MlpParams<double>::zeros({2, 3, 2});
  const auto s = emit_error_field(p, 1.0, dir / "e.csv");
  EXPECT_EQ(s.rows, 25600u);
  EXPECT_NEAR(s.peak_amplitude, 1.0, 1e-3);
  const auto t = read_csv(dir / "e.csv");
  ASSERT_EQ(t.rows.size(), 25600u);
  EXPECT_EQ(t.header, (std::vector<std::string>{"x", "t", "amp_exact", "amp_pred", "abs_error"}));
  for (const auto& r : t.rows) ASSERT_EQ(r[4], r[2]);
}

TEST(ErrorField, ColumnsAreSelfConsistent) {
  Rng rng(4);
  const auto p = test::random_network(rng);
  const auto t = error_field_table(p, 2.0, 10, 5);
  for (const auto& r : t.rows) {
    const auto e = exact_solution(2.0, r[0], r[1]);
    EXPECT_EQ(r[2], std::hypot(e.u, e.v));
    EXPECT_EQ(r[4], std::abs(r[2] - r[3]));
  }
}

TEST(Snapshots, InitialProfileAndDefaults) {
  const auto dir = scratch_dir("snapshots");
  const auto p = MlpParams<double>::zeros({2, 3, 2});
  const auto f0 = emit_snapshots(p, 4.0, {0.0}, dir, 11);
  ASSERT_EQ(f0.size(), 1u);
  const auto t0 = read_csv(f0[0]);
  ASSERT_EQ(t0.rows.size(), 11u);
  for (const auto& r : t0.rows) EXPECT_NEAR(r[1], 1 / std::cosh(r[0]) / 2, 1e-15);
  const auto files = emit_snapshots(p, 1.0, default_snapshot_times(), dir);
  ASSERT_EQ(files.size(), 3u);
  EXPECT_EQ(files[0].filename(), "snapshot_t0.2.csv");
  EXPECT_EQ(files[2].filename(), "snapshot_t1.4.csv");
  for (const auto& f : files) EXPECT_TRUE(fs::exists(f));
}

TEST(Snapshots, InvalidTimes) {
  const auto dir = scratch_dir("snapshots_bad");
  const auto p = MlpParams<double>::zeros({2, 3, 2});
  EXPECT_THROW(emit_snapshots(p, 1.0, {}, dir), ConfigError);
  EXPECT_THROW(emit_snapshots(p, 1.0, {1.6}, dir), DomainError);
  EXPECT_THROW(emit_snapshots(p, 1.0, {-0.1}, dir), DomainError);
}

TEST(Sweep, TinySweepWritesOutputs) {
  const auto dir = scratch_dir("sweep");
  SweepSpec spec;
  spec.variable = SweepVariable::n_u;
  spec.values = {10, 20};
  spec.seeds = {7, 8};
  spec.base.epochs = 3;
  spec.base.n_f = 30;
  spec.base.topology = {2, 4, 2};
  int seen = 0;
  const auto rows = run_sweep(spec, {dir, [&](const RunSummary&) { ++seen; }});
  EXPECT_EQ(seen, 4);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].runs.size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "runs.csv"));
  EXPECT_TRUE(fs::exists(dir / "summary.csv"));
  EXPECT_TRUE(fs::exists(dir / "n_u_10" / "history_7.csv"));
  EXPECT_TRUE(fs::exists(dir / "n_u_20" / "run_8.ckpt"));
  EXPECT_EQ(read_csv(dir / "runs.csv").rows.size(), 4u);
  EXPECT_EQ(read_csv(dir / "n_u_10" / "history_7.csv").rows.size(), 3u);
}

TEST(Sweep, SpecValidation) {
  SweepSpec spec;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.values = {100.5};
  spec.variable = SweepVariable::n_u;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.values = {1.0};
  spec.variable = SweepVariable::beta_true;
  spec.seeds.clear();
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.seeds = {5};
  EXPECT_EQ(spec.config_for(2.0, 5).beta_true, 2.0);
  EXPECT_EQ(spec.config_for(2.0, 5).seed, 5u);
}

}  // namespace
}  // namespace nlse
