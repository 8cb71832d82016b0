#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ibp/nn.hpp"
#include "ibp/perturb.hpp"
#include "ibp/tensor.hpp"

namespace ibp::bounds {

/// Elementwise activation bounds, lower <= upper.
template <typename T>
struct IntervalTensor {
  Tensor<T> lower;
  Tensor<T> upper;

  static IntervalTensor point(const Tensor<T>& x) { return {x, x}; }
  const Shape& shape() const noexcept { return lower.shape(); }
  /// Throws DimensionError on shape mismatch or lower > upper.
  void validate() const;
  bool contains(const Tensor<T>& x, T slack = T{0}) const;
  bool contains(const IntervalTensor& inner, T slack = T{0}) const;
};

/// Cost accounting for one verification.
struct PassCounts {
  std::uint64_t vertex_evaluations = 0;  // first-layer evaluations, one per simplex vertex
  std::uint64_t bound_passes = 0;        // sweeps through layers after the first block
  std::uint64_t macs = 0;
};

/// Center/radius form: out = affine(mu) +- |W| r.
template <typename T>
IntervalTensor<T> interval_affine(const nn::Layer<T>& layer, const IntervalTensor<T>& in,
                                  OpCounter* counter = nullptr);

/// [f(lower), f(upper)] for ReLU and average pooling.
template <typename T>
IntervalTensor<T> interval_monotone(const nn::Layer<T>& layer, const IntervalTensor<T>& in);

template <typename T>
IntervalTensor<T> interval_layer(const nn::Layer<T>& layer, const IntervalTensor<T>& in,
                                 OpCounter* counter = nullptr);

enum class SimplexMethod { Naive, Incremental };

/// Bounds at the output of the first block (first conv plus an immediately
/// following ReLU, if any). `argmin`/`argmax` name the vertex attaining each
/// pre-activation extreme, lowest index on ties.
template <typename T>
struct FirstBlockBounds {
  std::size_t affine_layer = 0;
  std::size_t block_end = 0;
  IntervalTensor<T> pre;
  std::vector<std::uint32_t> argmin;
  std::vector<std::uint32_t> argmax;
  IntervalTensor<T> post;
};

/// Per-component min and max of the first block over all simplex vertices.
template <typename T>
FirstBlockBounds<T> simplex_first_layer_bounds(const nn::Network<T>& net,
                                               const perturb::SimplexVertices<T>& vertices,
                                               SimplexMethod method = SimplexMethod::Incremental,
                                               PassCounts* counts = nullptr);

/// Interval inputs of every layer after the first block, for backpropagation.
template <typename T>
struct BoundsTrace {
  FirstBlockBounds<T> first;
  std::vector<IntervalTensor<T>> inputs;  // inputs[k - first.block_end]
  IntervalTensor<T> logits;
};

/// Pushes first-block bounds through the remaining layers. One call is one
/// lower/upper propagation (counted as two passes).
template <typename T>
IntervalTensor<T> propagate(const nn::Network<T>& net, const FirstBlockBounds<T>& first,
                            PassCounts* counts = nullptr);

/// Generic propagation from the input of layer `from`.
template <typename T>
IntervalTensor<T> propagate_from(const nn::Network<T>& net, std::size_t from, IntervalTensor<T> in,
                                 PassCounts* counts = nullptr);

template <typename T>
BoundsTrace<T> propagate_recorded(const nn::Network<T>& net, FirstBlockBounds<T> first,
                                  PassCounts* counts = nullptr);

/// Half-space constraints c (c_y = +1, c_true = -1) for every competing class.
struct WorstCaseSpec {
  std::size_t true_class = 0;
  std::size_t class_count = 0;
  std::vector<std::vector<int>> constraints() const;
};

/// True class at its lower bound, every other class at its upper bound.
template <typename T>
struct WorstCaseLogits {
  Tensor<T> values;
};

template <typename T>
WorstCaseLogits<T> worst_case_logits(const IntervalTensor<T>& logit_bounds, std::size_t true_class);

template <typename T>
struct Margin {
  T value = T{0};
  bool verified = false;
  std::size_t worst_class = 0;
};

/// max_{y != true} (upper_y - lower_true); verified iff strictly negative.
template <typename T>
Margin<T> verified_margin(const IntervalTensor<T>& logit_bounds, std::size_t true_class);

/// Gradient of a loss on the logit bounds back to every parameter and to the
/// original embedding. Extremes route their gradient to the argmin/argmax vertex.
/// Replacement-row gradients land in the embedding-table gradient when the
/// network owns a trainable table.
template <typename T>
void bounds_backward(const nn::Network<T>& net, const perturb::SimplexVertices<T>& vertices,
                     const BoundsTrace<T>& trace, std::span<const T> grad_lower,
                     std::span<const T> grad_upper, nn::GradientStore<T>& grads);

}  // namespace ibp::bounds
