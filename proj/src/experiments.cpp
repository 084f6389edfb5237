#include "nlse/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "nlse/physics.hpp"

namespace nlse {

std::string to_string(SweepVariable v) { return v == SweepVariable::beta_true ? "beta_true" : "n_u"; }

void SweepSpec::validate() const {
  if (values.empty()) throw ConfigError("sweep: no values");
  if (seeds.empty()) throw ConfigError("sweep: no seeds");
  for (double v : values) config_for(v, seeds.front()).validate();
}

TrainConfig SweepSpec::config_for(double value, std::uint64_t seed) const {
  TrainConfig c = base;
  c.seed = seed;
  if (variable == SweepVariable::beta_true) {
    c.beta_true = value;
  } else {
    if (value < 1 || value != std::floor(value)) throw ConfigError("sweep: n_u values must be positive integers");
    c.n_u = static_cast<long>(value);
  }
  return c;
}

std::vector<SweepRow> summarize(std::vector<RunSummary> runs) {
  std::sort(runs.begin(), runs.end(), [](const RunSummary& a, const RunSummary& b) {
    return a.value != b.value ? a.value < b.value : a.seed < b.seed;
  });
  std::vector<SweepRow> rows;
  for (auto& r : runs) {
    if (rows.empty() || rows.back().value != r.value) {
      rows.emplace_back();
      rows.back().value = r.value;
    }
    rows.back().runs.push_back(std::move(r));
  }
  for (auto& row : rows) {
    std::vector<double> err, secs;
    for (const auto& r : row.runs) {
      if (r.failed) {
        ++row.failed_runs;
        continue;
      }
      err.push_back(r.relative_error_percent);
      secs.push_back(r.elapsed_seconds);
    }
    const auto n = err.size();
    if (n == 0) {
      row.mean_rel_error_percent = row.std_rel_error_percent = row.mean_elapsed_seconds =
          std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double sum = 0, tsum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += err[i];
      tsum += secs[i];
    }
    row.mean_rel_error_percent = sum / static_cast<double>(n);
    row.mean_elapsed_seconds = tsum / static_cast<double>(n);
    row.single_run = n == 1;
    if (n > 1) {
      double ss = 0;
      for (double e : err) ss += (e - row.mean_rel_error_percent) * (e - row.mean_rel_error_percent);
      row.std_rel_error_percent = std::sqrt(ss / static_cast<double>(n - 1));
    }
  }
  return rows;
}

CsvTable runs_table(const std::vector<SweepRow>& rows) {
  CsvTable t{{"value", "seed", "beta_final", "relative_error_percent", "elapsed_seconds", "data_loss",
              "physics_loss", "failed"},
             {}};
  for (const auto& row : rows) {
    for (const auto& r : row.runs) {
      t.rows.push_back({r.value, static_cast<double>(r.seed), r.beta_final, r.relative_error_percent,
                        r.elapsed_seconds, r.data_loss, r.physics_loss, r.failed ? 1.0 : 0.0});
    }
  }
  return t;
}

CsvTable summary_table(const std::vector<SweepRow>& rows) {
  CsvTable t{{"value", "mean_rel_error_percent", "std_rel_error_percent", "mean_elapsed_seconds", "runs",
              "failed_runs", "single_run"},
             {}};
  for (const auto& row : rows) {
    t.rows.push_back({row.value, row.mean_rel_error_percent, row.std_rel_error_percent, row.mean_elapsed_seconds,
                      static_cast<double>(row.runs.size()), static_cast<double>(row.failed_runs),
                      row.single_run ? 1.0 : 0.0});
  }
  return t;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, const SweepOptions& options) {
  spec.validate();
  if (options.out_dir) std::filesystem::create_directories(*options.out_dir);
  std::vector<RunSummary> runs;
  for (double value : spec.values) {
    for (auto seed : spec.seeds) {
      const TrainConfig config = spec.config_for(value, seed);
      RunSummary s;
      s.value = value;
      s.seed = seed;
      std::optional<std::filesystem::path> run_dir;
      if (options.out_dir) {
        run_dir = *options.out_dir / (to_string(spec.variable) + "_" + format_real(value));
        std::filesystem::create_directories(*run_dir);
      }
      try {
        std::optional<HistoryWriter> history;
        if (run_dir) history.emplace(*run_dir / ("history_" + std::to_string(seed) + ".csv"));
        const RunResult r = train(config, [&](long epoch, const LossBreakdown<double>& loss, const MlpParams<double>& p) {
          if (history) history->append(epoch, p.beta, loss);
        });
        s.beta_final = r.beta_final;
        s.relative_error_percent = r.relative_error_percent;
        s.elapsed_seconds = r.elapsed_seconds;
        s.data_loss = r.final_loss.data_loss;
        s.physics_loss = r.final_loss.physics_loss;
        if (run_dir) {
          save_checkpoint(*run_dir / ("run_" + std::to_string(seed) + ".ckpt"), r.final_params,
                          {seed, config.beta_true, config.noise_level, config.epochs});
        }
      } catch (const DivergenceError& e) {
        s.failed = true;
        s.diagnostic = e.what();
        s.relative_error_percent = s.beta_final = s.data_loss = s.physics_loss =
            std::numeric_limits<double>::quiet_NaN();
      }
      if (options.on_run) options.on_run(s);
      runs.push_back(std::move(s));
    }
  }
  auto rows = summarize(std::move(runs));
  if (options.out_dir) {
    write_csv(*options.out_dir / "runs.csv", runs_table(rows));
    write_csv(*options.out_dir / "summary.csv", summary_table(rows));
  }
  return rows;
}

GridField soliton_grid(double beta, Index nx, Index nt, const DomainBounds<double>& bounds) {
  if (nx < 2 || nt < 2) throw ConfigError("soliton_grid: need at least 2 nodes per dimension");
  GridField g;
  g.x0 = bounds.x_min;
  g.t0 = bounds.t_min;
  g.h_x = (bounds.x_max - bounds.x_min) / static_cast<double>(nx - 1);
  g.h_t = (bounds.t_max - bounds.t_min) / static_cast<double>(nt - 1);
  g.u.resize(nt, nx);
  g.v.resize(nt, nx);
  for (Index it = 0; it < nt; ++it) {
    for (Index ix = 0; ix < nx; ++ix) {
      const auto f = exact_solution(beta, g.x0 + static_cast<double>(ix) * g.h_x, g.t0 + static_cast<double>(it) * g.h_t);
      g.u(it, ix) = f.u;
      g.v(it, ix) = f.v;
    }
  }
  return g;
}

GridField soliton_grid_for_spacing(double beta, double h, const DomainBounds<double>& bounds) {
  if (!(h > 0)) throw ConfigError("grid spacing must be positive");
  const auto nx = static_cast<Index>(std::lround((bounds.x_max - bounds.x_min) / h)) + 1;
  const auto nt = static_cast<Index>(std::lround((bounds.t_max - bounds.t_min) / h)) + 1;
  return soliton_grid(beta, nx, nt, bounds);
}

GridField add_grid_noise(const GridField& clean, double level, Rng& rng) {
  std::vector<FieldSample<double>> samples;
  samples.reserve(static_cast<std::size_t>(clean.u.size()));
  for (Index it = 0; it < clean.nt(); ++it) {
    for (Index ix = 0; ix < clean.nx(); ++ix) {
      samples.push_back({clean.x0 + static_cast<double>(ix) * clean.h_x, clean.t0 + static_cast<double>(it) * clean.h_t,
                         clean.u(it, ix), clean.v(it, ix)});
    }
  }
  const auto noisy = add_noise(std::span<const FieldSample<double>>(samples), level, rng);
  GridField g = clean;
  std::size_t k = 0;
  for (Index it = 0; it < g.nt(); ++it) {
    for (Index ix = 0; ix < g.nx(); ++ix, ++k) {
      g.u(it, ix) = noisy[k].u;
      g.v(it, ix) = noisy[k].v;
    }
  }
  return g;
}

namespace {

// Central second difference in x on interior nodes: (f[i-1] - 2 f[i] + f[i+1]) / h^2.
MatrixX<double> d2x(const MatrixX<double>& f, double h) {
  const Index nt = f.rows() - 2, nx = f.cols() - 2;
  return (f.block(1, 0, nt, nx) - 2.0 * f.block(1, 1, nt, nx) + f.block(1, 2, nt, nx)) / (h * h);
}

// Central first difference in t on interior nodes: (f[j+1] - f[j-1]) / 2h.
MatrixX<double> d1t(const MatrixX<double>& f, double h) {
  const Index nt = f.rows() - 2, nx = f.cols() - 2;
  return (f.block(2, 1, nt, nx) - f.block(0, 1, nt, nx)) / (2.0 * h);
}

double population_std(const MatrixX<double>& m) {
  const double mean = m.mean();
  return std::sqrt((m.array() - mean).square().sum() / static_cast<double>(m.size()));
}

}  // namespace

FdEstimate fd_baseline_estimate(const GridField& noisy, const std::optional<GridField>& clean) {
  if (noisy.nx() < 5 || noisy.nt() < 5) throw ConfigError("fd_baseline: grid needs at least 5 nodes per dimension");
  if (!(noisy.h_x > 0) || !(noisy.h_t > 0)) throw ConfigError("fd_baseline: grid spacing must be positive");
  const Index nt = noisy.nt() - 2, nx = noisy.nx() - 2;
  const MatrixX<double> u = noisy.u.block(1, 1, nt, nx);
  const MatrixX<double> v = noisy.v.block(1, 1, nt, nx);
  const MatrixX<double> u_xx = d2x(noisy.u, noisy.h_x);
  const MatrixX<double> v_xx = d2x(noisy.v, noisy.h_x);
  const MatrixX<double> u_t = d1t(noisy.u, noisy.h_t);
  const MatrixX<double> v_t = d1t(noisy.v, noisy.h_t);

  // f = r + beta g = 0 for both components.
  const auto q = (u.array().square() + v.array().square()).eval();
  const auto r_u = (u_t.array() + 0.5 * v_xx.array()).eval();
  const auto g_u = (q * v.array()).eval();
  const auto r_v = (v_t.array() - 0.5 * u_xx.array()).eval();
  const auto g_v = (-q * u.array()).eval();

  FdEstimate est;
  est.interior_points = nt * nx;
  est.beta_hat = -((r_u * g_u).sum() + (r_v * g_v).sum()) / ((g_u.square()).sum() + (g_v.square()).sum());
  est.expected_gain = std::sqrt(6.0) / (noisy.h_x * noisy.h_x);
  est.derivative_noise_gain = std::numeric_limits<double>::quiet_NaN();
  if (clean) {
    if (clean->u.rows() != noisy.u.rows() || clean->u.cols() != noisy.u.cols()) {
      throw ConfigError("fd_baseline: clean reference grid has a different shape");
    }
    const double gain_u = population_std(u_xx - d2x(clean->u, clean->h_x)) / population_std(noisy.u - clean->u);
    const double gain_v = population_std(v_xx - d2x(clean->v, clean->h_x)) / population_std(noisy.v - clean->v);
    est.derivative_noise_gain = 0.5 * (gain_u + gain_v);
  }
  return est;
}

std::vector<FdRow> fd_spacing_sweep(double beta_true, double noise_level, const std::vector<double>& spacings,
                                    std::uint64_t seed) {
  if (spacings.empty()) throw ConfigError("fd sweep: no spacings");
  std::vector<FdRow> rows;
  for (double h : spacings) {
    Rng rng = stream(Rng(seed), Stream::noise);
    const GridField clean = soliton_grid_for_spacing(beta_true, h);
    const GridField noisy = add_grid_noise(clean, noise_level, rng);
    FdRow row;
    row.h = h;
    row.h_x = clean.h_x;
    row.h_t = clean.h_t;
    row.estimate = fd_baseline_estimate(noisy, clean);
    row.relative_error_percent = relative_error(row.estimate.beta_hat, beta_true);
    rows.push_back(row);
  }
  return rows;
}

CsvTable fd_table(const std::vector<FdRow>& rows) {
  CsvTable t{{"h", "h_x", "h_t", "beta_hat", "relative_error_percent", "derivative_noise_gain", "expected_gain"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({r.h, r.h_x, r.h_t, r.estimate.beta_hat, r.relative_error_percent,
                      r.estimate.derivative_noise_gain, r.estimate.expected_gain});
  }
  return t;
}

double noise_gain_slope(const std::vector<FdRow>& rows) {
  if (rows.size() < 2) throw ConfigError("noise_gain_slope: need at least two spacings");
  const auto n = static_cast<double>(rows.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    const double x = std::log(1.0 / r.h_x);
    const double y = std::log(r.estimate.derivative_noise_gain);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

CsvTable error_field_table(const MlpParams<double>& params, double beta_true, Index nx, Index nt) {
  const PointMatrix<double> grid = evaluation_grid<double>(nx, nt, DomainBounds<double>{});
  const MatrixX<double> pred = forward_batch(params, grid);
  CsvTable t{{"x", "t", "amp_exact", "amp_pred", "abs_error"}, {}};
  t.rows.reserve(static_cast<std::size_t>(grid.cols()));
  for (Index i = 0; i < grid.cols(); ++i) {
    const auto e = exact_solution(beta_true, grid(0, i), grid(1, i));
    const double amp_exact = std::hypot(e.u, e.v);
    const double amp_pred = std::hypot(pred(0, i), pred(1, i));
    t.rows.push_back({grid(0, i), grid(1, i), amp_exact, amp_pred, std::abs(amp_exact - amp_pred)});
  }
  return t;
}

ErrorFieldSummary emit_error_field(const MlpParams<double>& params, double beta_true, const std::filesystem::path& path,
                                   Index nx, Index nt) {
  const CsvTable t = error_field_table(params, beta_true, nx, nt);
  ErrorFieldSummary s;
  s.rows = t.rows.size();
  for (const auto& r : t.rows) {
    s.peak_amplitude = std::max(s.peak_amplitude, r[2]);
    s.max_abs_error = std::max(s.max_abs_error, r[4]);
  }
  write_csv(path, t);
  return s;
}

ErrorFieldSummary emit_error_field(const RunResult& result, const std::filesystem::path& path, Index nx, Index nt) {
  return emit_error_field(result.final_params, result.config.beta_true, path, nx, nt);
}

std::string snapshot_filename(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "snapshot_t%g.csv", t);
  return buf;
}

std::vector<std::filesystem::path> emit_snapshots(const MlpParams<double>& params, double beta_true,
                                                  const std::vector<double>& times,
                                                  const std::filesystem::path& out_dir, Index nx) {
  if (times.empty()) throw ConfigError("emit_snapshots: no snapshot times");
  const DomainBounds<double> bounds;
  for (double t : times) {
    if (!(t >= bounds.t_min && t <= bounds.t_max)) {
      throw DomainError("emit_snapshots: time " + format_real(t) + " outside [0, pi/2]");
    }
  }
  if (nx < 2) throw ConfigError("emit_snapshots: need at least 2 x nodes");
  std::filesystem::create_directories(out_dir);
  const VectorX<double> xs = VectorX<double>::LinSpaced(nx, bounds.x_min, bounds.x_max);
  std::vector<std::filesystem::path> files;
  for (double t : times) {
    PointMatrix<double> pts(2, nx);
    pts.row(0) = xs.transpose();
    pts.row(1).setConstant(t);
    const MatrixX<double> pred = forward_batch(params, pts);
    CsvTable table{{"x", "amp_exact", "amp_pred"}, {}};
    for (Index i = 0; i < nx; ++i) {
      const auto e = exact_solution(beta_true, xs[i], t);
      table.rows.push_back({xs[i], std::hypot(e.u, e.v), std::hypot(pred(0, i), pred(1, i))});
    }
    files.push_back(out_dir / snapshot_filename(t));
    write_csv(files.back(), table);
  }
  return files;
}

std::vector<std::filesystem::path> emit_snapshots(const RunResult& result, const std::vector<double>& times,
                                                  const std::filesystem::path& out_dir, Index nx) {
  return emit_snapshots(result.final_params, result.config.beta_true, times, out_dir, nx);
}

}  // namespace nlse
