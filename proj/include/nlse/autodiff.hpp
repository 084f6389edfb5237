#pragma once

// Exact input derivatives of a tanh MLP, propagated forward as jets
// (value, d/dx, d/dt, d2/dx2), and reverse-mode gradients of any scalar
// built from the output jets with respect to every weight, bias and beta.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nlse/error.hpp"

namespace nlse {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMajorMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
// Row 0 holds x, row 1 holds t; one column per point.
template <typename Scalar>
using PointMatrix = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;

template <typename Scalar>
struct Jet {
  Scalar value{0};
  Scalar d_dx{0};
  Scalar d_dt{0};
  Scalar d2_dx2{0};

  friend bool operator==(const Jet&, const Jet&) = default;
};

template <typename Scalar>
std::pair<Jet<Scalar>, Jet<Scalar>> seed_input_jets(Scalar x, Scalar t) {
  return {Jet<Scalar>{x, Scalar(1), Scalar(0), Scalar(0)}, Jet<Scalar>{t, Scalar(0), Scalar(1), Scalar(0)}};
}

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weights;  // fan_out x fan_in
  VectorX<Scalar> biases;   // fan_out

  Index fan_in() const { return weights.cols(); }
  Index fan_out() const { return weights.rows(); }
};

// A batch of jets: one row per neuron, one column per point. The three
// derivative channels are left empty when only values are propagated.
template <typename Scalar>
struct JetBlock {
  MatrixX<Scalar> value;
  MatrixX<Scalar> d_dx;
  MatrixX<Scalar> d_dt;
  MatrixX<Scalar> d2_dx2;

  bool has_derivatives() const { return d_dx.size() != 0; }
  Index features() const { return value.rows(); }
  Index points() const { return value.cols(); }

  Jet<Scalar> at(Index feature, Index point) const {
    if (d_dx.size() == 0) return {value(feature, point), 0, 0, 0};
    return {value(feature, point), d_dx(feature, point), d_dt(feature, point), d2_dx2(feature, point)};
  }
};

template <typename Scalar>
JetBlock<Scalar> to_block(std::span<const Jet<Scalar>> jets) {
  const auto n = static_cast<Index>(jets.size());
  JetBlock<Scalar> block{MatrixX<Scalar>(n, 1), MatrixX<Scalar>(n, 1), MatrixX<Scalar>(n, 1), MatrixX<Scalar>(n, 1)};
  for (Index i = 0; i < n; ++i) {
    const auto& j = jets[static_cast<std::size_t>(i)];
    block.value(i, 0) = j.value;
    block.d_dx(i, 0) = j.d_dx;
    block.d_dt(i, 0) = j.d_dt;
    block.d2_dx2(i, 0) = j.d2_dx2;
  }
  return block;
}

template <typename Scalar>
std::vector<Jet<Scalar>> to_jets(const JetBlock<Scalar>& block) {
  std::vector<Jet<Scalar>> out;
  out.reserve(static_cast<std::size_t>(block.features()));
  for (Index i = 0; i < block.features(); ++i) out.push_back(block.at(i, 0));
  return out;
}

// Seed jets for a batch of input coordinates, written into `out`.
template <typename Scalar>
void seed_block_into(const Eigen::Ref<const PointMatrix<Scalar>>& points, bool with_derivatives,
                     JetBlock<Scalar>& out) {
  const Index n = points.cols();
  out.value = points;
  if (with_derivatives) {
    out.d_dx.setZero(2, n);
    out.d_dt.setZero(2, n);
    out.d2_dx2.setZero(2, n);
    out.d_dx.row(0).setOnes();
    out.d_dt.row(1).setOnes();
  } else {
    out.d_dx.resize(0, 0);
    out.d_dt.resize(0, 0);
    out.d2_dx2.resize(0, 0);
  }
}

template <typename Scalar>
JetBlock<Scalar> seed_block(const Eigen::Ref<const PointMatrix<Scalar>>& points, bool with_derivatives) {
  JetBlock<Scalar> block;
  seed_block_into(points, with_derivatives, block);
  return block;
}

template <typename Scalar>
void check_layer_input(const MatrixX<Scalar>& weights, const VectorX<Scalar>& biases, Index inputs) {
  if (weights.cols() != inputs || weights.rows() != biases.size()) {
    throw ConfigError("affine layer shape mismatch: weights " + std::to_string(weights.rows()) + "x" +
                      std::to_string(weights.cols()) + ", biases " + std::to_string(biases.size()) + ", inputs " +
                      std::to_string(inputs));
  }
}

// Affine map applied channel-wise; the bias only enters the value channel.
// `out` must not alias `in`.
template <typename Scalar>
void jet_affine_into(const MatrixX<Scalar>& weights, const VectorX<Scalar>& biases, const JetBlock<Scalar>& in,
                     JetBlock<Scalar>& out) {
  check_layer_input(weights, biases, in.features());
  const Index n = in.points();
  out.value.resize(weights.rows(), n);
  out.value.noalias() = weights * in.value;
  out.value.colwise() += biases;
  if (in.has_derivatives()) {
    out.d_dx.resize(weights.rows(), n);
    out.d_dt.resize(weights.rows(), n);
    out.d2_dx2.resize(weights.rows(), n);
    out.d_dx.noalias() = weights * in.d_dx;
    out.d_dt.noalias() = weights * in.d_dt;
    out.d2_dx2.noalias() = weights * in.d2_dx2;
  } else {
    out.d_dx.resize(0, 0);
    out.d_dt.resize(0, 0);
    out.d2_dx2.resize(0, 0);
  }
}

template <typename Scalar>
JetBlock<Scalar> jet_affine(const MatrixX<Scalar>& weights, const VectorX<Scalar>& biases,
                            const JetBlock<Scalar>& in) {
  JetBlock<Scalar> out;
  jet_affine_into(weights, biases, in, out);
  return out;
}

template <typename Scalar>
std::vector<Jet<Scalar>> jet_affine(const MatrixX<Scalar>& weights, const VectorX<Scalar>& biases,
                                    std::span<const Jet<Scalar>> inputs) {
  return to_jets(jet_affine(weights, biases, to_block(inputs)));
}

// y = tanh(z):  y_x = s z_x,  y_t = s z_t,  y_xx = s z_xx - 2 y s z_x^2,  s = 1 - y^2.
// `out` must not alias `in`.
template <typename Scalar>
void jet_tanh_into(const JetBlock<Scalar>& in, JetBlock<Scalar>& out) {
  out.value.resize(in.features(), in.points());
  out.value.array() = in.value.array().tanh();
  if (in.has_derivatives()) {
    const auto y = out.value.array();
    const auto zx = in.d_dx.array();
    out.d_dx.resize(in.features(), in.points());
    out.d_dt.resize(in.features(), in.points());
    out.d2_dx2.resize(in.features(), in.points());
    out.d_dx.array() = (Scalar(1) - y.square()) * zx;
    out.d_dt.array() = (Scalar(1) - y.square()) * in.d_dt.array();
    out.d2_dx2.array() = (Scalar(1) - y.square()) * (in.d2_dx2.array() - Scalar(2) * y * zx.square());
  } else {
    out.d_dx.resize(0, 0);
    out.d_dt.resize(0, 0);
    out.d2_dx2.resize(0, 0);
  }
}

template <typename Scalar>
JetBlock<Scalar> jet_tanh(const JetBlock<Scalar>& in) {
  JetBlock<Scalar> out;
  jet_tanh_into(in, out);
  return out;
}

template <typename Scalar>
std::vector<Jet<Scalar>> jet_tanh(std::span<const Jet<Scalar>> inputs) {
  return to_jets(jet_tanh(to_block(inputs)));
}

// Shapes of the trainable parameters, in checkpoint order: per layer the
// weights (row-major) then the biases, and finally one slot for beta.
class ParameterLayout {
 public:
  ParameterLayout() = default;
  explicit ParameterLayout(std::vector<std::pair<Index, Index>> shapes) : shapes_(std::move(shapes)) {
    Index offset = 0;
    for (const auto& [out, in] : shapes_) {
      weight_offsets_.push_back(offset);
      offset += out * in;
      bias_offsets_.push_back(offset);
      offset += out;
    }
    beta_offset_ = offset;
  }

  std::size_t layers() const { return shapes_.size(); }
  Index fan_out(std::size_t k) const { return shapes_[k].first; }
  Index fan_in(std::size_t k) const { return shapes_[k].second; }
  Index weight_offset(std::size_t k) const { return weight_offsets_[k]; }
  Index bias_offset(std::size_t k) const { return bias_offsets_[k]; }
  Index beta_offset() const { return beta_offset_; }
  // Weights and biases, without beta.
  Index network_size() const { return beta_offset_; }
  Index size() const { return beta_offset_ + 1; }

  friend bool operator==(const ParameterLayout& a, const ParameterLayout& b) { return a.shapes_ == b.shapes_; }

 private:
  std::vector<std::pair<Index, Index>> shapes_;
  std::vector<Index> weight_offsets_;
  std::vector<Index> bias_offsets_;
  Index beta_offset_ = 0;
};

template <typename Scalar>
ParameterLayout layout_of(std::span<const DenseLayer<Scalar>> layers) {
  std::vector<std::pair<Index, Index>> shapes;
  for (const auto& l : layers) shapes.emplace_back(l.fan_out(), l.fan_in());
  return ParameterLayout(std::move(shapes));
}

// dL/dp for every parameter p, stored flat in ParameterLayout order.
template <typename Scalar>
class GradientBuffer {
 public:
  using WeightMap = Eigen::Map<RowMajorMatrixX<Scalar>>;
  using ConstWeightMap = Eigen::Map<const RowMajorMatrixX<Scalar>>;
  using BiasMap = Eigen::Map<VectorX<Scalar>>;
  using ConstBiasMap = Eigen::Map<const VectorX<Scalar>>;

  GradientBuffer() = default;
  explicit GradientBuffer(ParameterLayout layout)
      : layout_(std::move(layout)), data_(VectorX<Scalar>::Zero(layout_.size())) {}

  const ParameterLayout& layout() const { return layout_; }
  Index size() const { return data_.size(); }
  const VectorX<Scalar>& flat() const { return data_; }
  VectorX<Scalar>& flat() { return data_; }

  WeightMap weights(std::size_t k) {
    return WeightMap(data_.data() + layout_.weight_offset(k), layout_.fan_out(k), layout_.fan_in(k));
  }
  ConstWeightMap weights(std::size_t k) const {
    return ConstWeightMap(data_.data() + layout_.weight_offset(k), layout_.fan_out(k), layout_.fan_in(k));
  }
  BiasMap biases(std::size_t k) { return BiasMap(data_.data() + layout_.bias_offset(k), layout_.fan_out(k)); }
  ConstBiasMap biases(std::size_t k) const {
    return ConstBiasMap(data_.data() + layout_.bias_offset(k), layout_.fan_out(k));
  }
  Scalar& beta() { return data_[layout_.beta_offset()]; }
  Scalar beta() const { return data_[layout_.beta_offset()]; }

  GradientBuffer& operator+=(const GradientBuffer& other) {
    check_congruent(other);
    data_ += other.data_;
    return *this;
  }
  GradientBuffer& operator*=(Scalar s) {
    data_ *= s;
    return *this;
  }
  // this += s * other
  GradientBuffer& add_scaled(const GradientBuffer& other, Scalar s) {
    check_congruent(other);
    data_ += s * other.data_;
    return *this;
  }

 private:
  void check_congruent(const GradientBuffer& other) const {
    if (!(layout_ == other.layout_)) throw ConfigError("gradient buffers have different layouts");
  }

  ParameterLayout layout_;
  VectorX<Scalar> data_;
};

// Records a forward jet pass through a tanh MLP (linear last layer) for a
// batch of points and back-propagates adjoints of the output jets. The tape
// refers to the layers passed to record(); they must outlive backward().
// Buffers are kept between calls, so reusing one tape for equally sized
// batches does not allocate.
template <typename Scalar>
class JetTape {
 public:
  const JetBlock<Scalar>& record(std::span<const DenseLayer<Scalar>> layers,
                                 const Eigen::Ref<const PointMatrix<Scalar>>& points, bool with_derivatives) {
    if (layers.empty()) throw ConfigError("network has no layers");
    recorded_ = false;
    layers_ = layers;
    with_derivatives_ = with_derivatives;
    activations_.resize(layers.size() + 1);
    preact_.resize(layers.size() - 1);
    seed_block_into(points, with_derivatives, activations_[0]);
    for (std::size_t k = 0; k < layers.size(); ++k) {
      if (k + 1 == layers.size()) {
        jet_affine_into(layers[k].weights, layers[k].biases, activations_[k], activations_[k + 1]);
      } else {
        jet_affine_into(layers[k].weights, layers[k].biases, activations_[k], preact_[k]);
        jet_tanh_into(preact_[k], activations_[k + 1]);
      }
    }
    recorded_ = true;
    return activations_.back();
  }

  bool recorded() const { return recorded_; }
  const JetBlock<Scalar>& outputs() const {
    require_recorded();
    return activations_.back();
  }

  // Gradient of a scalar L given dL/d(output jets) and the explicit partial dL/dbeta.
  GradientBuffer<Scalar> backward(const JetBlock<Scalar>& output_adjoint, Scalar beta_partial) const {
    require_recorded();
    GradientBuffer<Scalar> grad(layout_of(layers_));
    backward_into(output_adjoint, beta_partial, grad);
    return grad;
  }

  // Same as backward(), but adds the gradient into `grad`.
  void backward_into(const JetBlock<Scalar>& output_adjoint, Scalar beta_partial, GradientBuffer<Scalar>& grad) const {
    require_recorded();
    const auto& out = activations_.back();
    if (output_adjoint.value.rows() != out.value.rows() || output_adjoint.value.cols() != out.value.cols()) {
      throw ConfigError("output adjoint shape does not match recorded outputs");
    }
    if (!(grad.layout() == layout_of(layers_))) throw ConfigError("gradient buffer layout does not match the tape");
    const bool deriv = with_derivatives_ && output_adjoint.has_derivatives();
    grad.beta() += beta_partial;

    const JetBlock<Scalar>* adj = &output_adjoint;  // adjoint of layer kk's output channels
    for (std::size_t kk = layers_.size(); kk-- > 0;) {
      const auto& layer = layers_[kk];
      const auto& in = activations_[kk];
      const JetBlock<Scalar>* pre = adj;  // adjoint of layer kk's affine output
      if (kk + 1 != layers_.size()) {
        tanh_adjoint_into(activations_[kk + 1], preact_[kk], *adj, deriv, pre_adj_);
        pre = &pre_adj_;
      }
      auto gw = grad.weights(kk);
      gw.noalias() += pre->value * in.value.transpose();
      grad.biases(kk).noalias() += pre->value.rowwise().sum();
      if (deriv) {
        gw.noalias() += pre->d_dx * in.d_dx.transpose();
        gw.noalias() += pre->d_dt * in.d_dt.transpose();
        gw.noalias() += pre->d2_dx2 * in.d2_dx2.transpose();
      }
      if (kk == 0) break;
      const Index n = pre->points();
      in_adj_.value.resize(layer.fan_in(), n);
      in_adj_.value.noalias() = layer.weights.transpose() * pre->value;
      if (deriv) {
        in_adj_.d_dx.resize(layer.fan_in(), n);
        in_adj_.d_dt.resize(layer.fan_in(), n);
        in_adj_.d2_dx2.resize(layer.fan_in(), n);
        in_adj_.d_dx.noalias() = layer.weights.transpose() * pre->d_dx;
        in_adj_.d_dt.noalias() = layer.weights.transpose() * pre->d_dt;
        in_adj_.d2_dx2.noalias() = layer.weights.transpose() * pre->d2_dx2;
      } else {
        in_adj_.d_dx.resize(0, 0);
        in_adj_.d_dt.resize(0, 0);
        in_adj_.d2_dx2.resize(0, 0);
      }
      adj = &in_adj_;
    }
  }

 private:
  void require_recorded() const {
    if (!recorded_) throw UsageError("backward() called before a forward pass was recorded");
  }

  // Adjoint through y = tanh(a) and its jet rule, given the output jets y, the
  // pre-activation jets a and the output adjoint ybar. With s = 1 - y^2:
  //   y_xx = s a_xx - 2 y s a_x^2  contributes to ybar, sbar and a_x;
  //   sbar flows back through s = 1 - y^2, and ybar through y = tanh(a).
  void tanh_adjoint_into(const JetBlock<Scalar>& y, const JetBlock<Scalar>& a, const JetBlock<Scalar>& ybar,
                         bool deriv, JetBlock<Scalar>& abar) const {
    const Index rows = y.features(), n = y.points();
    const auto yv = y.value.array();
    s_.resize(rows, n);
    s_.array() = Scalar(1) - yv.square();
    const auto sa = s_.array();
    abar.value.resize(rows, n);
    if (!deriv) {
      abar.value.array() = ybar.value.array() * sa;
      abar.d_dx.resize(0, 0);
      abar.d_dt.resize(0, 0);
      abar.d2_dx2.resize(0, 0);
      return;
    }
    const auto ax = a.d_dx.array();
    const auto at = a.d_dt.array();
    const auto axx = a.d2_dx2.array();
    const auto bx = ybar.d_dx.array();
    const auto bt = ybar.d_dt.array();
    const auto bxx = ybar.d2_dx2.array();

    abar.d_dx.resize(rows, n);
    abar.d_dt.resize(rows, n);
    abar.d2_dx2.resize(rows, n);
    abar.d_dx.array() = bx * sa - Scalar(4) * bxx * yv * sa * ax;
    abar.d_dt.array() = bt * sa;
    abar.d2_dx2.array() = bxx * sa;
    sbar_.resize(rows, n);
    sbar_.array() = bx * ax + bt * at + bxx * (axx - Scalar(2) * yv * ax.square());
    abar.value.array() =
        (ybar.value.array() - Scalar(2) * bxx * sa * ax.square() - Scalar(2) * yv * sbar_.array()) * sa;
  }

  std::span<const DenseLayer<Scalar>> layers_;
  std::vector<JetBlock<Scalar>> activations_;  // [k] feeds layer k; back() is the network output
  std::vector<JetBlock<Scalar>> preact_;       // hidden pre-activations
  bool with_derivatives_ = false;
  bool recorded_ = false;

  // Scratch for backward_into.
  mutable JetBlock<Scalar> pre_adj_;
  mutable JetBlock<Scalar> in_adj_;
  mutable MatrixX<Scalar> s_;
  mutable MatrixX<Scalar> sbar_;
};

}  // namespace nlse
