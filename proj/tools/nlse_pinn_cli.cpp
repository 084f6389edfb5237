// nlse-pinn: recover the NLSE nonlinear coefficient from noisy samples.
//
//   nlse-pinn generate-data --beta-true 1 --nu 500 --noise 0.2 --out data/
//   nlse-pinn train --beta-true 1.0 --nu 500 --noise 0.2 --seed 1234 --out run/
//   nlse-pinn sweep-beta --values 0.5,1.0,2.0 --seeds 1,2,3 --out sweep/
//   nlse-pinn sweep-nu --values 100,250,500,1000 --out sweep_nu/
//   nlse-pinn baseline-fd --spacings 0.2,0.1,0.05 --noise 0.2 --out fd/
//   nlse-pinn render --checkpoint run/run_1234.ckpt --out figs/
//
// Every subcommand accepts --config FILE with key=value lines (keys are the
// long flag names); values given on the command line take precedence.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nlse/experiments.hpp"
#include "nlse/io.hpp"
#include "nlse/optim.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Applies key=value lines from `path` to options of `cmd` not set on the command line.
void merge_config_file(CLI::App& cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageFailure("cannot read config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageFailure(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    for (auto& c : key) {
      if (c == '_') c = '-';
    }
    CLI::Option* opt = cmd.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      throw UsageFailure(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    opt->clear();
    opt->add_result(value);
    try {
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw UsageFailure(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

struct CommonOptions {
  nlse::TrainConfig config;
  std::vector<long> hidden{50, 50, 50, 50};
  std::string out = ".";
  std::string config_file;
};

void add_train_options(CLI::App& cmd, CommonOptions& o) {
  auto& c = o.config;
  cmd.add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
  cmd.add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
  cmd.add_option("--lambda-data", c.lambda_data, "Weight of the data loss")->capture_default_str();
  cmd.add_option("--lambda-physics", c.lambda_physics, "Weight of the physics loss")->capture_default_str();
  cmd.add_option("--nu", c.n_u, "Number of noisy training samples")->capture_default_str();
  cmd.add_option("--nf", c.n_f, "Number of LHS collocation points")->capture_default_str();
  cmd.add_option("--noise", c.noise_level, "Noise level as a fraction of each component's std")
      ->capture_default_str();
  cmd.add_option("--beta-true", c.beta_true, "True nonlinear coefficient used to generate data")
      ->capture_default_str();
  cmd.add_option("--beta-init", c.beta_init, "Initial value of the trainable beta")->capture_default_str();
  cmd.add_option("--seed", c.seed, "Master random seed")->capture_default_str();
  cmd.add_option("--hidden", o.hidden, "Hidden layer widths, comma separated")->delimiter(',')->capture_default_str();
  cmd.add_option("--checkpoint-every", c.checkpoint_every, "Write a checkpoint every K epochs (0: only at the end)")
      ->capture_default_str();
}

void add_io_options(CLI::App& cmd, CommonOptions& o) {
  cmd.add_option("--out", o.out, "Output directory")->capture_default_str();
  cmd.add_option("--config", o.config_file, "key=value configuration file");
}

void finalize(CLI::App& cmd, CommonOptions& o) {
  if (!o.config_file.empty()) merge_config_file(cmd, o.config_file);
  o.config.topology = {2};
  for (long w : o.hidden) o.config.topology.push_back(w);
  o.config.topology.push_back(2);
}

int cmd_generate_data(CommonOptions& o) {
  o.config.validate();
  fs::create_directories(o.out);
  const auto data = nlse::generate_training_data(o.config);
  const fs::path path = fs::path(o.out) / "dataset.csv";
  nlse::write_dataset(path, data.noisy,
                      {o.config.beta_true, o.config.noise_level, o.config.seed, data.noisy.size()});
  std::printf("wrote %zu samples to %s\n", data.noisy.size(), path.string().c_str());
  return 0;
}

nlse::RunSummary summarize_run(const nlse::RunResult& r, double value) {
  nlse::RunSummary s;
  s.value = value;
  s.seed = r.config.seed;
  s.beta_final = r.beta_final;
  s.relative_error_percent = r.relative_error_percent;
  s.elapsed_seconds = r.elapsed_seconds;
  s.data_loss = r.final_loss.data_loss;
  s.physics_loss = r.final_loss.physics_loss;
  return s;
}

int cmd_train(CommonOptions& o) {
  const auto& c = o.config;
  c.validate();
  const fs::path out(o.out);
  fs::create_directories(out);
  const std::string tag = std::to_string(c.seed);
  nlse::HistoryWriter history(out / ("history_" + tag + ".csv"));
  const nlse::RunResult r =
      nlse::train(c, [&](long epoch, const nlse::LossBreakdown<double>& loss, const nlse::MlpParams<double>& p) {
        history.append(epoch, p.beta, loss);
        if (c.checkpoint_every > 0 && epoch % c.checkpoint_every == 0 && epoch != c.epochs) {
          nlse::save_checkpoint(out / ("run_" + tag + "_e" + std::to_string(epoch) + ".ckpt"), p,
                                {c.seed, c.beta_true, c.noise_level, epoch});
        }
      });
  history.flush();
  nlse::save_checkpoint(out / ("run_" + tag + ".ckpt"), r.final_params, {c.seed, c.beta_true, c.noise_level, c.epochs});
  nlse::write_csv(out / "runs.csv", nlse::runs_table(nlse::summarize({summarize_run(r, c.beta_true)})));
  std::printf("beta_final=%.10g beta_true=%.10g relative_error_percent=%.6g data_loss=%.6g physics_loss=%.6g "
              "elapsed_seconds=%.3f\n",
              r.beta_final, c.beta_true, r.relative_error_percent, r.final_loss.data_loss, r.final_loss.physics_loss,
              r.elapsed_seconds);
  return 0;
}

int cmd_sweep(CommonOptions& o, nlse::SweepVariable variable, const std::vector<double>& values,
              const std::vector<std::uint64_t>& seeds) {
  nlse::SweepSpec spec{variable, values, seeds, o.config};
  nlse::SweepOptions opts;
  opts.out_dir = fs::path(o.out);
  opts.on_run = [](const nlse::RunSummary& s) {
    if (s.failed) {
      std::printf("value=%g seed=%llu FAILED: %s\n", s.value, static_cast<unsigned long long>(s.seed),
                  s.diagnostic.c_str());
    } else {
      std::printf("value=%g seed=%llu beta_final=%.10g relative_error_percent=%.6g elapsed_seconds=%.2f\n", s.value,
                  static_cast<unsigned long long>(s.seed), s.beta_final, s.relative_error_percent, s.elapsed_seconds);
    }
    std::fflush(stdout);
  };
  const auto rows = nlse::run_sweep(spec, opts);
  std::printf("%-12s %-24s %s\n", nlse::to_string(variable).c_str(), "rel. error % (mean±std)", "failed");
  for (const auto& r : rows) {
    std::printf("%-12g %10.4f ± %-10.4f %zu%s\n", r.value, r.mean_rel_error_percent, r.std_rel_error_percent,
                r.failed_runs, r.single_run ? "  (single run)" : "");
  }
  return 0;
}

int cmd_baseline_fd(CommonOptions& o, const std::vector<double>& spacings) {
  const fs::path out(o.out);
  fs::create_directories(out);
  const auto rows = nlse::fd_spacing_sweep(o.config.beta_true, o.config.noise_level, spacings, o.config.seed);
  nlse::write_csv(out / "fd_baseline.csv", nlse::fd_table(rows));
  for (const auto& r : rows) {
    std::printf("h_x=%.4g h_t=%.4g beta_hat=%.6g relative_error_percent=%.4g noise_gain=%.4g expected=%.4g\n", r.h_x,
                r.h_t, r.estimate.beta_hat, r.relative_error_percent, r.estimate.derivative_noise_gain,
                r.estimate.expected_gain);
  }
  if (rows.size() >= 2 && o.config.noise_level > 0) {
    std::printf("log-log slope of noise gain vs 1/h_x: %.4f\n", nlse::noise_gain_slope(rows));
  }
  return 0;
}

int cmd_render(CommonOptions& o, const std::string& checkpoint, std::string history, long nx, long nt,
               const std::vector<double>& times) {
  const auto ck = nlse::load_checkpoint(checkpoint);
  const fs::path out(o.out);
  fs::create_directories(out);
  const auto summary = nlse::emit_error_field(ck.params, ck.info.beta_true, out / "error_field.csv", nx, nt);
  const auto files = nlse::emit_snapshots(ck.params, ck.info.beta_true, times, out, nx);
  if (history.empty()) {
    const fs::path sibling = fs::path(checkpoint).parent_path() / ("history_" + std::to_string(ck.info.seed) + ".csv");
    if (fs::exists(sibling)) history = sibling.string();
  }
  if (!history.empty()) {
    nlse::write_csv(out / fs::path(history).filename(), nlse::read_csv(history));
  }
  std::printf("error_field rows=%zu max_abs_error=%.6g peak_amplitude=%.6g (%.3f%% of peak); %zu snapshot files%s\n",
              summary.rows, summary.max_abs_error, summary.peak_amplitude,
              100.0 * summary.max_abs_error / summary.peak_amplitude, files.size(),
              history.empty() ? "" : "; history copied");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed recovery of the NLSE nonlinear coefficient from noisy samples"};
  app.require_subcommand(1);

  CommonOptions gen_o, train_o, sb_o, sn_o, fd_o, render_o;
  sb_o.out = "sweep_beta";
  sn_o.out = "sweep_nu";

  auto* gen = app.add_subcommand("generate-data", "Write a noisy soliton dataset (x,t,u,v) and its sidecar");
  gen->add_option("--beta-true", gen_o.config.beta_true)->capture_default_str();
  gen->add_option("--nu", gen_o.config.n_u)->capture_default_str();
  gen->add_option("--noise", gen_o.config.noise_level)->capture_default_str();
  gen->add_option("--seed", gen_o.config.seed)->capture_default_str();
  add_io_options(*gen, gen_o);

  auto* train = app.add_subcommand("train", "Train one PINN and recover beta");
  add_train_options(*train, train_o);
  add_io_options(*train, train_o);

  std::vector<double> beta_values{0.5, 1.0, 2.0};
  std::vector<double> nu_values{100, 250, 500, 1000};
  std::vector<std::uint64_t> sb_seeds{1234, 1235, 1236}, sn_seeds{1234, 1235, 1236};
  auto* sweep_beta = app.add_subcommand("sweep-beta", "Sweep the true beta over several seeds");
  add_train_options(*sweep_beta, sb_o);
  add_io_options(*sweep_beta, sb_o);
  sweep_beta->add_option("--values", beta_values, "beta_true values")->delimiter(',')->capture_default_str();
  sweep_beta->add_option("--seeds", sb_seeds, "Seeds")->delimiter(',')->capture_default_str();

  auto* sweep_nu = app.add_subcommand("sweep-nu", "Sweep the number of training samples over several seeds");
  add_train_options(*sweep_nu, sn_o);
  add_io_options(*sweep_nu, sn_o);
  sweep_nu->add_option("--values", nu_values, "n_u values")->delimiter(',')->capture_default_str();
  sweep_nu->add_option("--seeds", sn_seeds, "Seeds")->delimiter(',')->capture_default_str();

  std::vector<double> spacings{0.2, 0.1, 0.05};
  auto* fd = app.add_subcommand("baseline-fd", "Finite-difference least-squares estimate of beta on noisy grids");
  fd->add_option("--beta-true", fd_o.config.beta_true)->capture_default_str();
  fd->add_option("--noise", fd_o.config.noise_level)->capture_default_str();
  fd->add_option("--seed", fd_o.config.seed)->capture_default_str();
  fd->add_option("--spacings,--h-values", spacings, "Grid spacings h (x and t)")->delimiter(',')->capture_default_str();
  add_io_options(*fd, fd_o);

  std::string checkpoint, history;
  long nx = 256, nt = 100;
  std::vector<double> times = nlse::default_snapshot_times();
  auto* render = app.add_subcommand("render", "Emit error field, snapshots and history from a checkpoint");
  render->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  render->add_option("--history", history, "History CSV to copy (default: sibling history_<seed>.csv)");
  render->add_option("--nx", nx)->capture_default_str();
  render->add_option("--nt", nt)->capture_default_str();
  render->add_option("--times", times, "Snapshot times")->delimiter(',')->capture_default_str();
  add_io_options(*render, render_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "nlse-pinn: %s\n", e.what());
    return kExitUsage;
  }

  try {
    if (*gen) {
      finalize(*gen, gen_o);
      return cmd_generate_data(gen_o);
    }
    if (*train) {
      finalize(*train, train_o);
      return cmd_train(train_o);
    }
    if (*sweep_beta) {
      finalize(*sweep_beta, sb_o);
      return cmd_sweep(sb_o, nlse::SweepVariable::beta_true, beta_values, sb_seeds);
    }
    if (*sweep_nu) {
      finalize(*sweep_nu, sn_o);
      return cmd_sweep(sn_o, nlse::SweepVariable::n_u, nu_values, sn_seeds);
    }
    if (*fd) {
      finalize(*fd, fd_o);
      return cmd_baseline_fd(fd_o, spacings);
    }
    if (*render) {
      finalize(*render, render_o);
      return cmd_render(render_o, checkpoint, history, nx, nt, times);
    }
  } catch (const UsageFailure& e) {
    std::fprintf(stderr, "nlse-pinn: %s\n", e.what());
    return kExitUsage;
  } catch (const nlse::ConfigError& e) {
    std::fprintf(stderr, "nlse-pinn: invalid configuration: %s\n", e.what());
    return kExitUsage;
  } catch (const nlse::DomainError& e) {
    std::fprintf(stderr, "nlse-pinn: invalid configuration: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "nlse-pinn: %s\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
