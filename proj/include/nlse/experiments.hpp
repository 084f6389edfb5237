#pragma once

// Parameter sweeps over beta_true and N_u, the finite-difference baseline,
// and plot-ready CSV emission of trained surrogates.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nlse/io.hpp"
#include "nlse/model.hpp"
#include "nlse/optim.hpp"
#include "nlse/sampling.hpp"

namespace nlse {

enum class SweepVariable { beta_true, n_u };

std::string to_string(SweepVariable v);

struct SweepSpec {
  SweepVariable variable = SweepVariable::beta_true;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds{1234, 1235, 1236};
  TrainConfig base;

  void validate() const;
  TrainConfig config_for(double value, std::uint64_t seed) const;
};

struct RunSummary {
  double value = 0;
  std::uint64_t seed = 0;
  double beta_final = 0;
  double relative_error_percent = 0;
  double elapsed_seconds = 0;
  double data_loss = 0;
  double physics_loss = 0;
  bool failed = false;
  std::string diagnostic;
};

struct SweepRow {
  double value = 0;
  double mean_rel_error_percent = 0;
  double std_rel_error_percent = 0;  // sample (n - 1) convention; 0 for a single run
  double mean_elapsed_seconds = 0;
  std::vector<RunSummary> runs;
  std::size_t failed_runs = 0;
  bool single_run = false;
};

// Groups runs by value (sorted by value, then seed) and computes statistics
// over the runs that did not fail.
std::vector<SweepRow> summarize(std::vector<RunSummary> runs);

struct SweepOptions {
  std::optional<std::filesystem::path> out_dir;  // runs.csv, summary.csv, per-run histories/checkpoints
  std::function<void(const RunSummary&)> on_run;
};

std::vector<SweepRow> run_sweep(const SweepSpec& spec, const SweepOptions& options = {});

CsvTable runs_table(const std::vector<SweepRow>& rows);
CsvTable summary_table(const std::vector<SweepRow>& rows);

// Samples on a regular nt-by-nx grid; u(it, ix), v(it, ix).
struct GridField {
  double x0 = 0, t0 = 0;
  double h_x = 0, h_t = 0;
  MatrixX<double> u, v;

  Index nx() const { return u.cols(); }
  Index nt() const { return u.rows(); }
};

GridField soliton_grid(double beta, Index nx, Index nt, const DomainBounds<double>& bounds = {});
// Grid whose nodes are spaced by approximately h in both x and t.
GridField soliton_grid_for_spacing(double beta, double h, const DomainBounds<double>& bounds = {});
GridField add_grid_noise(const GridField& clean, double level, Rng& rng);

struct FdEstimate {
  double beta_hat = 0;
  // std of the noise part of the central second x-difference over the std of
  // the injected noise; NaN without a clean reference.
  double derivative_noise_gain = 0;
  double expected_gain = 0;  // sqrt(6) / h_x^2 for i.i.d. noise
  Index interior_points = 0;
};

// Central differences (u_t, v_t first order in t; u_xx, v_xx second order in x)
// on interior nodes, then least squares for beta in f_u = f_v = 0.
FdEstimate fd_baseline_estimate(const GridField& noisy, const std::optional<GridField>& clean = std::nullopt);

struct FdRow {
  double h = 0;
  double h_x = 0, h_t = 0;
  FdEstimate estimate;
  double relative_error_percent = 0;
};

std::vector<FdRow> fd_spacing_sweep(double beta_true, double noise_level, const std::vector<double>& spacings,
                                    std::uint64_t seed);
CsvTable fd_table(const std::vector<FdRow>& rows);

// Least-squares slope of log(gain) against log(1/h_x).
double noise_gain_slope(const std::vector<FdRow>& rows);

struct ErrorFieldSummary {
  std::size_t rows = 0;
  double max_abs_error = 0;
  double peak_amplitude = 0;  // of the exact field on the grid
};

// Columns x,t,amp_exact,amp_pred,abs_error with amp = sqrt(u^2 + v^2).
CsvTable error_field_table(const MlpParams<double>& params, double beta_true, Index nx = 256, Index nt = 100);
ErrorFieldSummary emit_error_field(const MlpParams<double>& params, double beta_true,
                                   const std::filesystem::path& path, Index nx = 256, Index nt = 100);
ErrorFieldSummary emit_error_field(const RunResult& result, const std::filesystem::path& path, Index nx = 256,
                                   Index nt = 100);

inline std::vector<double> default_snapshot_times() { return {0.2, 0.8, 1.4}; }

std::string snapshot_filename(double t);
// One CSV per time (x,amp_exact,amp_pred) named snapshot_t<t>.csv in out_dir.
std::vector<std::filesystem::path> emit_snapshots(const MlpParams<double>& params, double beta_true,
                                                  const std::vector<double>& times,
                                                  const std::filesystem::path& out_dir, Index nx = 256);
std::vector<std::filesystem::path> emit_snapshots(const RunResult& result, const std::vector<double>& times,
                                                  const std::filesystem::path& out_dir, Index nx = 256);

}  // namespace nlse
