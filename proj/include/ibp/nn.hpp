#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ibp/kernels.hpp"
#include "ibp/tensor.hpp"

namespace ibp {

using TokenId = std::uint32_t;

namespace nn {

enum class LayerKind { Embedding, Conv1d, Relu, AvgPool, Linear };

const char* to_string(LayerKind kind);

/// One stage of the feed-forward stack.
///
/// Parameter layouts (row-major):
///   Embedding  weight (vocab, dim)            in = vocab, out = dim
///   Conv1d     weight (out, width, in), bias (out)
///   Linear     weight (out, in), bias (out)
/// Relu and AvgPool carry no parameters.
template <typename T>
struct Layer {
  LayerKind kind = LayerKind::Relu;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t width = 0;
  bool trainable = true;
  Tensor<T> weight;
  Tensor<T> bias;

  bool has_params() const noexcept {
    return kind == LayerKind::Embedding || kind == LayerKind::Conv1d || kind == LayerKind::Linear;
  }
  bool is_affine() const noexcept { return kind == LayerKind::Conv1d || kind == LayerKind::Linear; }
  bool is_monotone() const noexcept {
    return kind == LayerKind::Relu || kind == LayerKind::AvgPool;
  }

  kernels::ConvShape conv_shape(std::size_t length) const noexcept {
    return {length, in, out, width};
  }

  template <typename U>
  Layer<U> cast() const {
    Layer<U> l;
    l.kind = kind;
    l.in = in;
    l.out = out;
    l.width = width;
    l.trainable = trainable;
    l.weight = weight.template cast<U>();
    l.bias = bias.template cast<U>();
    return l;
  }
};

template <typename T>
Layer<T> make_embedding(std::size_t vocab, std::size_t dim, bool trainable = true);
template <typename T>
Layer<T> make_conv1d(std::size_t in, std::size_t out, std::size_t width);
template <typename T>
Layer<T> make_relu();
template <typename T>
Layer<T> make_avg_pool();
template <typename T>
Layer<T> make_linear(std::size_t in, std::size_t out);

/// Ordered layer stack z_k = h_k(z_{k-1}).
///
/// Character models own their embedding table as a leading Embedding layer.
/// Word models have no such layer and read rows from `frozen_embeddings`.
template <typename T>
struct Network {
  std::vector<Layer<T>> layers;
  std::size_t class_count = 0;
  std::size_t input_dim = 0;  // embedding dimension fed to the first compute layer
  Tensor<T> frozen_embeddings;

  /// Checks the structural invariants; throws DimensionError.
  void validate() const;

  bool has_embedding_layer() const noexcept {
    return !layers.empty() && layers.front().kind == LayerKind::Embedding;
  }
  std::size_t first_compute_layer() const noexcept { return has_embedding_layer() ? 1 : 0; }
  const Tensor<T>& embedding_table() const;
  bool embeddings_trainable() const noexcept {
    return has_embedding_layer() && layers.front().trainable;
  }
  /// Shortest sequence that survives every valid convolution.
  std::size_t min_length() const noexcept;
  std::size_t parameter_count() const noexcept;

  /// Embedding-matrix lookup: (tokens.size(), input_dim).
  Tensor<T> embed(std::span<const TokenId> tokens) const;

  template <typename U>
  Network<U> cast() const {
    Network<U> n;
    n.class_count = class_count;
    n.input_dim = input_dim;
    n.frozen_embeddings = frozen_embeddings.template cast<U>();
    for (const auto& l : layers) n.layers.push_back(l.template cast<U>());
    return n;
  }
};

/// Glorot-uniform weights (a = sqrt(6 / (fan_in + fan_out))), zero biases.
template <typename T>
void initialize(Network<T>& net, std::uint64_t seed);

/// Activations recorded by forward().
/// values[k] is the input of layer k, values[layers.size()] the logits. For a
/// network with an Embedding layer values[0] is empty and values[1] holds the
/// embedded sequence.
template <typename T>
struct Trace {
  std::vector<TokenId> tokens;
  std::vector<Tensor<T>> values;
  Tensor<T> logits;
  bool recorded = false;

  const Tensor<T>& embedded(std::size_t first_compute) const { return values.at(first_compute); }
};

/// Applies one non-embedding layer.
template <typename T>
Tensor<T> apply_layer(const Layer<T>& layer, const Tensor<T>& input, OpCounter* counter = nullptr);

/// Runs layers [from, K) on `input`, which must be the input of layer `from`.
template <typename T>
Tensor<T> forward_from(const Network<T>& net, std::size_t from, Tensor<T> input,
                       OpCounter* counter = nullptr);

/// Forward pass from an embedded (length, input_dim) sequence.
template <typename T>
Trace<T> forward(const Network<T>& net, const Tensor<T>& embedded, bool record = true,
                 OpCounter* counter = nullptr);

/// Forward pass from token ids (embedding lookup is exact and precedes layer 1).
template <typename T>
Trace<T> forward_tokens(const Network<T>& net, std::span<const TokenId> tokens, bool record = true,
                        OpCounter* counter = nullptr);

/// Gradients mirroring every parameter, plus the gradient with respect to the
/// embedded input sequence.
template <typename T>
struct GradientStore {
  std::vector<Tensor<T>> weight;
  std::vector<Tensor<T>> bias;
  Tensor<T> input;

  static GradientStore zeros_like(const Network<T>& net);
  void zero();
  void add(const GradientStore& other);
  void scale(T factor);
  bool all_finite() const;
};

/// Softmax cross-entropy, log-sum-exp stabilised.
template <typename T>
T cross_entropy(std::span<const T> logits, std::size_t label);

/// Cross-entropy and its gradient (softmax - onehot) written to `grad`.
template <typename T>
T cross_entropy_grad(std::span<const T> logits, std::size_t label, std::span<T> grad);

template <typename T>
std::size_t argmax(std::span<const T> logits);

/// Reverse pass through a recorded trace; accumulates into `grads`.
/// When the network owns a trainable embedding table and the trace carries
/// tokens, the input gradient is also scattered into the table gradient.
template <typename T>
void backward_into(const Network<T>& net, const Trace<T>& trace, std::span<const T> upstream,
                   GradientStore<T>& grads);

template <typename T>
GradientStore<T> backward(const Network<T>& net, const Trace<T>& trace,
                          std::span<const T> upstream);

/// Gradient with respect to the embedded input only; parameter gradients are skipped.
template <typename T>
Tensor<T> input_gradient(const Network<T>& net, const Trace<T>& trace, std::span<const T> upstream);

/// Adds input-gradient rows into the embedding-table gradient.
template <typename T>
void scatter_embedding_grad(const Network<T>& net, std::span<const TokenId> tokens,
                            const Tensor<T>& input_grad, GradientStore<T>& grads);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moments for a parameter block.
template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m_weight, v_weight, m_bias, v_bias;
  std::uint64_t step = 0;
  AdamConfig config;

  static AdamState for_network(const Network<T>& net, AdamConfig config = {});
};

/// Bias-corrected Adam update of one parameter block at step `step` (1-based).
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::uint64_t step, const AdamConfig& config);

/// One optimiser step over every trainable parameter.
template <typename T>
void adam_step(Network<T>& net, const GradientStore<T>& grads, AdamState<T>& state);

}  // namespace nn
}  // namespace ibp
