#include "nlse/optim.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace nlse {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (!(lambda_data >= 0) || !(lambda_physics >= 0)) throw ConfigError("loss weights must be >= 0");
  if (n_u < 1) throw ConfigError("n_u must be >= 1");
  if (n_f < 1) throw ConfigError("n_f must be >= 1");
  if (!(noise_level >= 0)) throw ConfigError("noise level must be >= 0");
  if (noise_level > 0 && n_u < 2) throw ConfigError("noisy data needs n_u >= 2");
  if (!(beta_true > 0)) throw ConfigError("beta_true must be > 0");
  if (!std::isfinite(beta_init)) throw ConfigError("beta_init must be finite");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  validate_topology(topology);
}

TrainingData generate_training_data(const TrainConfig& config) {
  const Rng master(config.seed);
  Rng point_rng = stream(master, Stream::training_points);
  Rng noise_rng = stream(master, Stream::noise);
  const DomainBounds<double> bounds;
  TrainingData d;
  d.clean = exact_samples(config.beta_true, draw_training_points<double>(config.n_u, bounds, point_rng));
  const std::span<const FieldSample<double>> clean(d.clean);
  std::tie(d.noise_std_u, d.noise_std_v) = noise_scales(clean, config.noise_level);
  d.noisy = add_noise(clean, config.noise_level, noise_rng);
  return d;
}

CollocationSet<double> generate_collocation(const TrainConfig& config) {
  Rng rng = stream(Rng(config.seed), Stream::collocation);
  return lhs_sample<double>(config.n_f, DomainBounds<double>{}, rng);
}

RunResult train(const TrainConfig& config, const EpochObserver& observer) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  const TrainingData data = generate_training_data(config);
  const auto block = DataBlock<double>::from_samples(data.noisy);
  const CollocationSet<double> collocation = generate_collocation(config);
  Rng init_rng = stream(Rng(config.seed), Stream::init);
  MlpParams<double> params = set_beta(xavier_init<double>(config.topology, init_rng), config.beta_init);
  const LossWeights<double> weights{config.lambda_data, config.lambda_physics};

  RunResult result;
  result.config = config;
  result.noise_std_u = data.noise_std_u;
  result.noise_std_v = data.noise_std_v;
  result.beta_history.reserve(static_cast<std::size_t>(config.epochs));
  result.loss_history.reserve(static_cast<std::size_t>(config.epochs));

  VectorX<double> flat = params.flatten();
  AdamState<double> adam = AdamState<double>::zeros(flat.size());
  LossWorkspace<double> ws;
  for (long epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto loss = loss_and_gradient(params, block, collocation, weights, ws);
    if (!std::isfinite(loss.total) || !ws.gradient.flat().allFinite()) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "non-finite loss at epoch " << epoch << ": data_loss=" << loss.data_loss
          << " physics_loss=" << loss.physics_loss << " total=" << loss.total << " beta=" << params.beta;
      throw DivergenceError(msg.str(), epoch);
    }
    adam_update(flat, ws.gradient.flat(), adam, config.learning_rate);
    params.assign_flat(flat);
    result.loss_history.push_back(loss);
    result.beta_history.push_back(params.beta);
    if (observer) observer(epoch, loss, params);
  }

  result.final_loss = total_loss(params, block, collocation, weights);
  result.beta_final = params.beta;
  result.relative_error_percent = relative_error(params.beta, config.beta_true);
  result.final_params = std::move(params);
  result.final_optimizer = std::move(adam);
  result.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace nlse
