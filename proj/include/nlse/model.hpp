#pragma once

// Fully connected approximator (x, t) -> (u, v): tanh hidden layers, linear head,
// plus the trainable nonlinear coefficient beta.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nlse/autodiff.hpp"
#include "nlse/error.hpp"
#include "nlse/sampling.hpp"

namespace nlse {

using Topology = std::vector<Index>;

inline Topology default_topology() { return {2, 50, 50, 50, 50, 2}; }

inline void validate_topology(const Topology& topology) {
  if (topology.size() < 2) throw ConfigError("topology needs at least an input and an output layer");
  for (auto n : topology) {
    if (n < 1) throw ConfigError("topology layer sizes must be positive");
  }
  if (topology.front() != 2 || topology.back() != 2) {
    throw ConfigError("topology must map 2 inputs (x, t) to 2 outputs (u, v)");
  }
}

template <typename Scalar>
struct MlpParams {
  std::vector<DenseLayer<Scalar>> layers;
  Scalar beta{0};

  Topology topology() const {
    Topology t;
    if (layers.empty()) return t;
    t.push_back(layers.front().fan_in());
    for (const auto& l : layers) t.push_back(l.fan_out());
    return t;
  }

  ParameterLayout layout() const { return layout_of(std::span<const DenseLayer<Scalar>>(layers)); }

  // Weights and biases only.
  Index network_parameter_count() const {
    Index n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.biases.size();
    return n;
  }

  // Flat vector in ParameterLayout order (row-major weights, biases, ..., beta).
  VectorX<Scalar> flatten() const {
    const ParameterLayout lay = layout();
    VectorX<Scalar> flat(lay.size());
    for (std::size_t k = 0; k < layers.size(); ++k) {
      Eigen::Map<RowMajorMatrixX<Scalar>>(flat.data() + lay.weight_offset(k), lay.fan_out(k), lay.fan_in(k)) =
          layers[k].weights;
      flat.segment(lay.bias_offset(k), lay.fan_out(k)) = layers[k].biases;
    }
    flat[lay.beta_offset()] = beta;
    return flat;
  }

  void assign_flat(const VectorX<Scalar>& flat) {
    const ParameterLayout lay = layout();
    if (flat.size() != lay.size()) throw ConfigError("flat parameter vector has the wrong length");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      layers[k].weights =
          Eigen::Map<const RowMajorMatrixX<Scalar>>(flat.data() + lay.weight_offset(k), lay.fan_out(k), lay.fan_in(k));
      layers[k].biases = flat.segment(lay.bias_offset(k), lay.fan_out(k));
    }
    beta = flat[lay.beta_offset()];
  }

  static MlpParams zeros(const Topology& topology) {
    validate_topology(topology);
    MlpParams p;
    for (std::size_t k = 0; k + 1 < topology.size(); ++k) {
      p.layers.push_back(
          {MatrixX<Scalar>::Zero(topology[k + 1], topology[k]), VectorX<Scalar>::Zero(topology[k + 1])});
    }
    return p;
  }
};

template <typename Scalar>
struct NetworkJet {
  Scalar u{0}, v{0};
  Scalar u_x{0}, v_x{0};
  Scalar u_t{0}, v_t{0};
  Scalar u_xx{0}, v_xx{0};
};

template <typename Scalar>
struct FieldValue {
  Scalar u{0};
  Scalar v{0};
};

// Glorot uniform: W ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out)); zero biases.
// Weights are drawn layer by layer in row-major order.
template <typename Scalar>
MlpParams<Scalar> xavier_init(const Topology& topology, Rng& rng) {
  if (topology.empty()) throw ConfigError("xavier_init: empty topology");
  MlpParams<Scalar> p = MlpParams<Scalar>::zeros(topology);
  for (auto& layer : p.layers) {
    const double a = std::sqrt(6.0 / static_cast<double>(layer.fan_in() + layer.fan_out()));
    for (Index r = 0; r < layer.fan_out(); ++r) {
      for (Index c = 0; c < layer.fan_in(); ++c) layer.weights(r, c) = static_cast<Scalar>(rng.uniform(-a, a));
    }
  }
  return p;
}

template <typename Scalar>
MlpParams<Scalar> set_beta(MlpParams<Scalar> params, Scalar value) {
  params.beta = value;
  return params;
}

template <typename Scalar>
std::span<const DenseLayer<Scalar>> layers_of(const MlpParams<Scalar>& params) {
  return std::span<const DenseLayer<Scalar>>(params.layers);
}

// Value-only pass over a batch; returns a 2 x N matrix of (u, v).
template <typename Scalar>
MatrixX<Scalar> forward_batch(const MlpParams<Scalar>& params, const PointMatrix<Scalar>& points) {
  JetBlock<Scalar> z = seed_block<Scalar>(points, false);
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    z = jet_affine(params.layers[k].weights, params.layers[k].biases, z);
    if (k + 1 < params.layers.size()) z = jet_tanh(z);
  }
  return std::move(z.value);
}

// Full jet pass over a batch; returns a 2-feature JetBlock (row 0 = u, row 1 = v).
template <typename Scalar>
JetBlock<Scalar> forward_with_derivatives_batch(const MlpParams<Scalar>& params, const PointMatrix<Scalar>& points) {
  JetBlock<Scalar> z = seed_block<Scalar>(points, true);
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    z = jet_affine(params.layers[k].weights, params.layers[k].biases, z);
    if (k + 1 < params.layers.size()) z = jet_tanh(z);
  }
  return z;
}

template <typename Scalar>
NetworkJet<Scalar> network_jet_at(const JetBlock<Scalar>& out, Index point) {
  return {out.value(0, point),  out.value(1, point),  out.d_dx(0, point),   out.d_dx(1, point),
          out.d_dt(0, point),   out.d_dt(1, point),   out.d2_dx2(0, point), out.d2_dx2(1, point)};
}

template <typename Scalar>
FieldValue<Scalar> forward(const MlpParams<Scalar>& params, Scalar x, Scalar t) {
  PointMatrix<Scalar> p(2, 1);
  p << x, t;
  const MatrixX<Scalar> out = forward_batch(params, p);
  return {out(0, 0), out(1, 0)};
}

template <typename Scalar>
NetworkJet<Scalar> forward_with_derivatives(const MlpParams<Scalar>& params, Scalar x, Scalar t) {
  PointMatrix<Scalar> p(2, 1);
  p << x, t;
  return network_jet_at(forward_with_derivatives_batch(params, p), 0);
}

}  // namespace nlse
