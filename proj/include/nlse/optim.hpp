#pragma once

// Composite loss  L = lambda_data * L_data + lambda_physics * L_physics,
// its exact gradient, the Adam update, and the training loop.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlse/autodiff.hpp"
#include "nlse/error.hpp"
#include "nlse/model.hpp"
#include "nlse/physics.hpp"
#include "nlse/sampling.hpp"

namespace nlse {

// Points are processed in column chunks of this size; partial sums are added
// in chunk order so every reduction has a fixed sequence.
inline constexpr Index kChunkSize = 256;

template <typename Scalar>
struct LossWeights {
  Scalar data{1};
  Scalar physics{1};
};

template <typename Scalar>
struct LossBreakdown {
  Scalar data_loss{0};
  Scalar physics_loss{0};
  Scalar total{0};
};

// Measurements packed for batched evaluation: coordinates and targets, both 2 x N.
template <typename Scalar>
struct DataBlock {
  PointMatrix<Scalar> points;
  MatrixX<Scalar> targets;

  Index count() const { return points.cols(); }

  static DataBlock from_samples(std::span<const FieldSample<Scalar>> samples) {
    DataBlock b{PointMatrix<Scalar>(2, static_cast<Index>(samples.size())),
                MatrixX<Scalar>(2, static_cast<Index>(samples.size()))};
    for (Index i = 0; i < b.count(); ++i) {
      const auto& s = samples[static_cast<std::size_t>(i)];
      b.points(0, i) = s.x;
      b.points(1, i) = s.t;
      b.targets(0, i) = s.u;
      b.targets(1, i) = s.v;
    }
    return b;
  }
};

template <typename Scalar>
struct LossAndGradient {
  LossBreakdown<Scalar> loss;
  GradientBuffer<Scalar> gradient;
};

// Buffers reused across chunks (and across epochs when the caller keeps it).
template <typename Scalar>
struct LossWorkspace {
  JetTape<Scalar> tape;
  MatrixX<Scalar> residual;  // data misfit or PDE residual of the current chunk, 2 x m
  JetBlock<Scalar> adjoint;
  GradientBuffer<Scalar> gradient;
};

namespace detail {

// Sum of squared data residuals over one chunk. With a workspace, also adds
// `scale` times the gradient of that sum into ws->gradient.
template <typename Scalar>
Scalar data_chunk(const MlpParams<Scalar>& params, const Eigen::Ref<const PointMatrix<Scalar>>& pts,
                  const Eigen::Ref<const MatrixX<Scalar>>& targets, LossWorkspace<Scalar>* ws, Scalar scale) {
  MatrixX<Scalar> local;
  MatrixX<Scalar>& diff = ws != nullptr ? ws->residual : local;
  if (ws != nullptr) {
    diff.resize(2, pts.cols());
    diff.noalias() = ws->tape.record(layers_of(params), pts, false).value - targets;
  } else {
    diff = forward_batch(params, PointMatrix<Scalar>(pts)) - targets;
  }
  Scalar acc = 0;
  for (Index j = 0; j < diff.cols(); ++j) acc += diff(0, j) * diff(0, j) + diff(1, j) * diff(1, j);
  if (ws != nullptr) {
    ws->adjoint.value.resize(2, diff.cols());
    ws->adjoint.value = (Scalar(2) * scale) * diff;
    ws->adjoint.d_dx.resize(0, 0);
    ws->adjoint.d_dt.resize(0, 0);
    ws->adjoint.d2_dx2.resize(0, 0);
    ws->tape.backward_into(ws->adjoint, Scalar(0), ws->gradient);
  }
  return acc;
}

// Sum of f_u^2 + f_v^2 over one chunk, with the same optional back-propagation.
template <typename Scalar>
Scalar physics_chunk(const MlpParams<Scalar>& params, const Eigen::Ref<const PointMatrix<Scalar>>& pts,
                     LossWorkspace<Scalar>* ws, Scalar scale) {
  JetBlock<Scalar> local_out;
  if (ws == nullptr) local_out = forward_with_derivatives_batch(params, PointMatrix<Scalar>(pts));
  const JetBlock<Scalar>& out = ws != nullptr ? ws->tape.record(layers_of(params), pts, true) : local_out;
  MatrixX<Scalar> local_f;
  MatrixX<Scalar>& f = ws != nullptr ? ws->residual : local_f;
  const Scalar beta = params.beta;
  residuals_into(out, beta, f);
  Scalar acc = 0;
  for (Index j = 0; j < f.cols(); ++j) acc += f(0, j) * f(0, j) + f(1, j) * f(1, j);
  if (ws == nullptr) return acc;

  // a = dL/df_u, b = dL/df_v; chain through
  //   f_u = u_t + v_xx / 2 + beta q v,  f_v = v_t - u_xx / 2 - beta q u,  q = u^2 + v^2.
  const Index n = f.cols();
  const auto u = out.value.row(0).array();
  const auto v = out.value.row(1).array();
  const auto q = u.square() + v.square();
  const auto a = (Scalar(2) * scale) * f.row(0).array();
  const auto b = (Scalar(2) * scale) * f.row(1).array();

  JetBlock<Scalar>& adj = ws->adjoint;
  adj.value.resize(2, n);
  adj.d_dx.setZero(2, n);
  adj.d_dt.resize(2, n);
  adj.d2_dx2.resize(2, n);
  adj.value.row(0).array() = beta * (a * Scalar(2) * u * v - b * (q + Scalar(2) * u.square()));
  adj.value.row(1).array() = beta * (a * (q + Scalar(2) * v.square()) - b * Scalar(2) * u * v);
  adj.d_dt.row(0).array() = a;
  adj.d_dt.row(1).array() = b;
  adj.d2_dx2.row(0).array() = Scalar(-0.5) * b;
  adj.d2_dx2.row(1).array() = Scalar(0.5) * a;

  Scalar beta_partial = 0;
  const Scalar two_scale = Scalar(2) * scale;
  for (Index j = 0; j < n; ++j) {
    const Scalar qj = out.value(0, j) * out.value(0, j) + out.value(1, j) * out.value(1, j);
    beta_partial += two_scale * (f(0, j) * qj * out.value(1, j) - f(1, j) * qj * out.value(0, j));
  }
  ws->tape.backward_into(adj, beta_partial, ws->gradient);
  return acc;
}

template <typename Scalar, typename ChunkFn>
Scalar sum_over_chunks(Index n, ChunkFn&& fn) {
  Scalar total = 0;
  for (Index start = 0; start < n; start += kChunkSize) total += fn(start, std::min(kChunkSize, n - start));
  return total;
}

}  // namespace detail

// (1/N_u) sum_i [(u_hat_i - u_i)^2 + (v_hat_i - v_i)^2]
template <typename Scalar>
Scalar data_loss(const MlpParams<Scalar>& params, const DataBlock<Scalar>& data) {
  if (data.count() == 0) throw ConfigError("data_loss: empty sample set");
  const Scalar sum = detail::sum_over_chunks<Scalar>(data.count(), [&](Index s, Index m) {
    return detail::data_chunk<Scalar>(params, data.points.middleCols(s, m), data.targets.middleCols(s, m), nullptr, Scalar(0));
  });
  return sum / static_cast<Scalar>(data.count());
}

template <typename Scalar>
Scalar data_loss(const MlpParams<Scalar>& params, std::span<const FieldSample<Scalar>> samples) {
  return data_loss(params, DataBlock<Scalar>::from_samples(samples));
}

// Mean of f_u^2 + f_v^2 over a list of jets (network or analytic).
template <typename Scalar>
Scalar physics_loss_from_jets(std::span<const NetworkJet<Scalar>> jets, Scalar beta) {
  if (jets.empty()) throw ConfigError("physics_loss: empty collocation set");
  Scalar acc = 0;
  for (const auto& j : jets) {
    const auto r = residuals(j, beta);
    acc += r.f_u * r.f_u + r.f_v * r.f_v;
  }
  return acc / static_cast<Scalar>(jets.size());
}

// (1/N_f) sum_j [f_u(x_j, t_j)^2 + f_v(x_j, t_j)^2] with beta = params.beta.
template <typename Scalar>
Scalar physics_loss(const MlpParams<Scalar>& params, const CollocationSet<Scalar>& collocation) {
  if (collocation.count() == 0) throw ConfigError("physics_loss: empty collocation set");
  const Scalar sum = detail::sum_over_chunks<Scalar>(collocation.count(), [&](Index s, Index m) {
    return detail::physics_chunk<Scalar>(params, collocation.points.middleCols(s, m), nullptr, Scalar(0));
  });
  return sum / static_cast<Scalar>(collocation.count());
}

template <typename Scalar>
LossBreakdown<Scalar> total_loss(const MlpParams<Scalar>& params, const DataBlock<Scalar>& data,
                                 const CollocationSet<Scalar>& collocation, const LossWeights<Scalar>& weights) {
  LossBreakdown<Scalar> l;
  l.data_loss = data_loss(params, data);
  l.physics_loss = physics_loss(params, collocation);
  l.total = weights.data * l.data_loss + weights.physics * l.physics_loss;
  return l;
}

template <typename Scalar>
LossBreakdown<Scalar> total_loss(const MlpParams<Scalar>& params, std::span<const FieldSample<Scalar>> samples,
                                 const CollocationSet<Scalar>& collocation, const LossWeights<Scalar>& weights) {
  return total_loss(params, DataBlock<Scalar>::from_samples(samples), collocation, weights);
}

// Loss and its exact gradient with respect to every weight, bias and beta;
// the gradient is left in ws.gradient.
template <typename Scalar>
LossBreakdown<Scalar> loss_and_gradient(const MlpParams<Scalar>& params, const DataBlock<Scalar>& data,
                                        const CollocationSet<Scalar>& collocation, const LossWeights<Scalar>& weights,
                                        LossWorkspace<Scalar>& ws) {
  if (data.count() == 0) throw ConfigError("data_loss: empty sample set");
  if (collocation.count() == 0) throw ConfigError("physics_loss: empty collocation set");
  const ParameterLayout layout = params.layout();
  if (!(ws.gradient.layout() == layout)) {
    ws.gradient = GradientBuffer<Scalar>(layout);
  } else {
    ws.gradient.flat().setZero();
  }
  const Scalar n_u = static_cast<Scalar>(data.count());
  const Scalar n_f = static_cast<Scalar>(collocation.count());

  const Scalar data_sum = detail::sum_over_chunks<Scalar>(data.count(), [&](Index s, Index m) {
    return detail::data_chunk<Scalar>(params, data.points.middleCols(s, m), data.targets.middleCols(s, m), &ws,
                                      weights.data / n_u);
  });
  const Scalar phys_sum = detail::sum_over_chunks<Scalar>(collocation.count(), [&](Index s, Index m) {
    return detail::physics_chunk<Scalar>(params, collocation.points.middleCols(s, m), &ws, weights.physics / n_f);
  });
  LossBreakdown<Scalar> loss;
  loss.data_loss = data_sum / n_u;
  loss.physics_loss = phys_sum / n_f;
  loss.total = weights.data * loss.data_loss + weights.physics * loss.physics_loss;
  return loss;
}

template <typename Scalar>
LossAndGradient<Scalar> loss_and_gradient(const MlpParams<Scalar>& params, const DataBlock<Scalar>& data,
                                          const CollocationSet<Scalar>& collocation,
                                          const LossWeights<Scalar>& weights) {
  LossWorkspace<Scalar> ws;
  const auto loss = loss_and_gradient(params, data, collocation, weights, ws);
  return {loss, std::move(ws.gradient)};
}

template <typename Scalar>
struct AdamState {
  VectorX<Scalar> first_moment;
  VectorX<Scalar> second_moment;
  long step_count = 0;
  Scalar beta1{0.9};
  Scalar beta2{0.999};
  Scalar epsilon{1e-8};

  static AdamState zeros(Index n) { return {VectorX<Scalar>::Zero(n), VectorX<Scalar>::Zero(n)}; }
};

// Bias-corrected Adam update of a flat parameter vector, in place.
template <typename Scalar>
void adam_update(VectorX<Scalar>& params, const VectorX<Scalar>& grad, AdamState<Scalar>& state, Scalar lr) {
  if (grad.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ConfigError("adam_step: parameter, gradient and moment shapes differ");
  }
  ++state.step_count;
  state.first_moment = state.beta1 * state.first_moment + (Scalar(1) - state.beta1) * grad;
  state.second_moment = state.beta2 * state.second_moment + (Scalar(1) - state.beta2) * grad.cwiseAbs2();
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.step_count));
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.step_count));
  params.array() -=
      lr * (state.first_moment.array() / c1) / ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

template <typename Scalar>
std::pair<MlpParams<Scalar>, AdamState<Scalar>> adam_step(MlpParams<Scalar> params, const GradientBuffer<Scalar>& grads,
                                                          AdamState<Scalar> state, Scalar lr) {
  if (!(grads.layout() == params.layout())) throw ConfigError("adam_step: gradient layout does not match parameters");
  VectorX<Scalar> flat = params.flatten();
  adam_update(flat, grads.flat(), state, lr);
  params.assign_flat(flat);
  return {std::move(params), std::move(state)};
}

// 100 |beta_hat - beta_true| / |beta_true|
inline double relative_error(double beta_hat, double beta_true) {
  if (beta_true == 0) throw DomainError("relative_error: beta_true must be non-zero");
  return 100.0 * std::abs(beta_hat - beta_true) / std::abs(beta_true);
}

struct TrainConfig {
  long epochs = 10000;
  double learning_rate = 1e-3;
  double lambda_data = 1.0;
  double lambda_physics = 1.0;
  long n_u = 500;
  long n_f = 20000;
  double noise_level = 0.20;
  double beta_true = 1.0;
  double beta_init = 0.0;
  std::uint64_t seed = 1234;
  Topology topology = default_topology();
  // Write a checkpoint every K epochs when a checkpoint observer is attached; 0 disables.
  long checkpoint_every = 0;

  void validate() const;
};

// Measurements for one run, derived from the master seed.
struct TrainingData {
  std::vector<FieldSample<double>> clean;
  std::vector<FieldSample<double>> noisy;
  double noise_std_u = 0;  // injected noise standard deviations
  double noise_std_v = 0;
};

TrainingData generate_training_data(const TrainConfig& config);
CollocationSet<double> generate_collocation(const TrainConfig& config);

struct RunResult {
  double beta_final = 0;
  std::vector<double> beta_history;               // beta after each epoch's update
  std::vector<LossBreakdown<double>> loss_history;  // loss at the start of each epoch
  double relative_error_percent = 0;
  double elapsed_seconds = 0;
  MlpParams<double> final_params;
  LossBreakdown<double> final_loss;  // evaluated at final_params
  double noise_std_u = 0;
  double noise_std_v = 0;
  AdamState<double> final_optimizer;  // carries the Adam constants used
  TrainConfig config;
};

// Called after every epoch with the 1-based epoch index.
using EpochObserver =
    std::function<void(long epoch, const LossBreakdown<double>& loss, const MlpParams<double>& params)>;

RunResult train(const TrainConfig& config, const EpochObserver& observer = {});

}  // namespace nlse
