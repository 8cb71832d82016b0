#include "ibp/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace ibp::nn {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Embedding: return "embedding";
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::Relu: return "relu";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::Linear: return "linear";
  }
  return "?";
}

template <typename T>
Layer<T> make_embedding(std::size_t vocab, std::size_t dim, bool trainable) {
  Layer<T> l;
  l.kind = LayerKind::Embedding;
  l.in = vocab;
  l.out = dim;
  l.trainable = trainable;
  l.weight = Tensor<T>({vocab, dim});
  return l;
}

template <typename T>
Layer<T> make_conv1d(std::size_t in, std::size_t out, std::size_t width) {
  if (width < 1) throw DimensionError("conv1d kernel width must be >= 1");
  Layer<T> l;
  l.kind = LayerKind::Conv1d;
  l.in = in;
  l.out = out;
  l.width = width;
  l.weight = Tensor<T>({out, width, in});
  l.bias = Tensor<T>({out});
  return l;
}

template <typename T>
Layer<T> make_relu() {
  Layer<T> l;
  l.kind = LayerKind::Relu;
  return l;
}

template <typename T>
Layer<T> make_avg_pool() {
  Layer<T> l;
  l.kind = LayerKind::AvgPool;
  return l;
}

template <typename T>
Layer<T> make_linear(std::size_t in, std::size_t out) {
  Layer<T> l;
  l.kind = LayerKind::Linear;
  l.in = in;
  l.out = out;
  l.weight = Tensor<T>({out, in});
  l.bias = Tensor<T>({out});
  return l;
}

template <typename T>
void Network<T>::validate() const {
  if (layers.empty()) throw DimensionError("network has no layers");
  if (class_count == 0) throw DimensionError("class_count must be positive");
  const auto& last = layers.back();
  if (last.kind != LayerKind::Linear || last.out != class_count) {
    throw DimensionError("final layer must be linear with " + std::to_string(class_count) +
                         " outputs");
  }
  // Track (is_sequence, channels) through the stack.
  bool sequence = true;
  std::size_t channels = input_dim;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    const std::string where = "layer " + std::to_string(k) + " (" + to_string(l.kind) + ")";
    switch (l.kind) {
      case LayerKind::Embedding:
        if (k != 0) throw DimensionError(where + ": embedding lookup must come first");
        if (l.out != input_dim) throw DimensionError(where + ": dim differs from input_dim");
        require_shape(l.weight, {l.in, l.out}, where.c_str());
        break;
      case LayerKind::Conv1d:
        if (!sequence) throw DimensionError(where + ": conv1d needs a sequence input");
        if (l.width < 1) throw DimensionError(where + ": kernel width must be >= 1");
        if (l.in != channels)
          throw DimensionError(where + ": expects " + std::to_string(l.in) + " channels, got " +
                               std::to_string(channels));
        require_shape(l.weight, {l.out, l.width, l.in}, where.c_str());
        require_shape(l.bias, {l.out}, where.c_str());
        channels = l.out;
        break;
      case LayerKind::Linear:
        if (sequence) throw DimensionError(where + ": linear needs a pooled vector input");
        if (l.in != channels)
          throw DimensionError(where + ": expects " + std::to_string(l.in) + " inputs, got " +
                               std::to_string(channels));
        require_shape(l.weight, {l.out, l.in}, where.c_str());
        require_shape(l.bias, {l.out}, where.c_str());
        channels = l.out;
        break;
      case LayerKind::AvgPool:
        if (!sequence) throw DimensionError(where + ": avgpool needs a sequence input");
        if (!l.weight.empty() || !l.bias.empty()) throw DimensionError(where + ": has parameters");
        sequence = false;
        break;
      case LayerKind::Relu:
        if (!l.weight.empty() || !l.bias.empty()) throw DimensionError(where + ": has parameters");
        break;
    }
  }
  if (!has_embedding_layer() && !frozen_embeddings.empty() &&
      frozen_embeddings.dim(1) != input_dim) {
    throw DimensionError("frozen embedding dimension differs from input_dim");
  }
}

template <typename T>
const Tensor<T>& Network<T>::embedding_table() const {
  if (has_embedding_layer()) return layers.front().weight;
  if (frozen_embeddings.empty()) throw DimensionError("network has no embedding table");
  return frozen_embeddings;
}

template <typename T>
std::size_t Network<T>::min_length() const noexcept {
  std::size_t need = 1;
  for (const auto& l : layers)
    if (l.kind == LayerKind::Conv1d) need += l.width - 1;
  return need;
}

template <typename T>
std::size_t Network<T>::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename T>
Tensor<T> Network<T>::embed(std::span<const TokenId> tokens) const {
  const Tensor<T>& table = embedding_table();
  Tensor<T> out({tokens.size(), input_dim});
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= table.dim(0))
      throw DimensionError("token id " + std::to_string(tokens[i]) + " outside embedding table");
    auto src = table.row(tokens[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

template <typename T>
void initialize(Network<T>& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& l : net.layers) {
    double fan_in = 0, fan_out = 0;
    switch (l.kind) {
      case LayerKind::Embedding:
        fan_in = 1;
        fan_out = double(l.out);
        break;
      case LayerKind::Conv1d:
        fan_in = double(l.width * l.in);
        fan_out = double(l.width * l.out);
        break;
      case LayerKind::Linear:
        fan_in = double(l.in);
        fan_out = double(l.out);
        break;
      default: continue;
    }
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (auto& w : l.weight.data()) w = T(dist(rng));
    l.bias.zero();
  }
}

template <typename T>
Tensor<T> apply_layer(const Layer<T>& layer, const Tensor<T>& input, OpCounter* counter) {
  switch (layer.kind) {
    case LayerKind::Conv1d: {
      if (input.rank() != 2 || input.dim(1) != layer.in)
        throw DimensionError("conv1d input " + shape_string(input.shape()) + ", expected (L," +
                             std::to_string(layer.in) + ")");
      if (input.dim(0) < layer.width)
        throw DimensionError("sequence length " + std::to_string(input.dim(0)) +
                             " shorter than kernel width " + std::to_string(layer.width));
      const auto s = layer.conv_shape(input.dim(0));
      Tensor<T> out({s.out_length(), layer.out});
      kernels::conv1d_forward<T>(layer.weight.data(), layer.bias.data(), input.data(), s,
                                 out.data(), counter);
      return out;
    }
    case LayerKind::Linear: {
      if (input.rank() != 1 || input.dim(0) != layer.in)
        throw DimensionError("linear input " + shape_string(input.shape()) + ", expected (" +
                             std::to_string(layer.in) + ")");
      Tensor<T> out({layer.out});
      kernels::linear_forward<T>(layer.weight.data(), layer.bias.data(), input.data(), layer.in,
                                 layer.out, out.data(), counter);
      return out;
    }
    case LayerKind::Relu: {
      Tensor<T> out = input;
      for (auto& v : out.data()) v = v > T{0} ? v : T{0};
      return out;
    }
    case LayerKind::AvgPool: {
      if (input.rank() != 2 || input.dim(0) == 0)
        throw DimensionError("avgpool input " + shape_string(input.shape()));
      const std::size_t len = input.dim(0), ch = input.dim(1);
      Tensor<T> out({ch});
      for (std::size_t t = 0; t < len; ++t)
        for (std::size_t c = 0; c < ch; ++c) out[c] += input.at(t, c);
      const T inv = T{1} / T(len);
      for (auto& v : out.data()) v *= inv;
      return out;
    }
    case LayerKind::Embedding:
      throw DimensionError("embedding lookup is applied by Network::embed, not apply_layer");
  }
  return {};
}

template <typename T>
Tensor<T> forward_from(const Network<T>& net, std::size_t from, Tensor<T> input,
                       OpCounter* counter) {
  for (std::size_t k = from; k < net.layers.size(); ++k)
    input = apply_layer(net.layers[k], input, counter);
  return input;
}

template <typename T>
Trace<T> forward(const Network<T>& net, const Tensor<T>& embedded, bool record,
                 OpCounter* counter) {
  const std::size_t first = net.first_compute_layer();
  if (embedded.rank() != 2 || embedded.dim(1) != net.input_dim)
    throw DimensionError("input " + shape_string(embedded.shape()) + " does not match input_dim " +
                         std::to_string(net.input_dim));
  Trace<T> trace;
  trace.recorded = record;
  if (record) trace.values.resize(net.layers.size() + 1);
  Tensor<T> cur = embedded;
  for (std::size_t k = first; k < net.layers.size(); ++k) {
    Tensor<T> next = apply_layer(net.layers[k], cur, counter);
    if (record) trace.values[k] = std::move(cur);
    cur = std::move(next);
  }
  if (!cur.all_finite()) throw NumericalError("non-finite logits");
  if (record) trace.values.back() = cur;
  trace.logits = std::move(cur);
  return trace;
}

template <typename T>
Trace<T> forward_tokens(const Network<T>& net, std::span<const TokenId> tokens, bool record,
                        OpCounter* counter) {
  Trace<T> trace = forward(net, net.embed(tokens), record, counter);
  if (record) trace.tokens.assign(tokens.begin(), tokens.end());
  return trace;
}

template <typename T>
GradientStore<T> GradientStore<T>::zeros_like(const Network<T>& net) {
  GradientStore g;
  for (const auto& l : net.layers) {
    g.weight.emplace_back(l.weight.shape());
    g.bias.emplace_back(l.bias.shape());
  }
  return g;
}

template <typename T>
void GradientStore<T>::zero() {
  for (auto& t : weight) t.zero();
  for (auto& t : bias) t.zero();
  input.zero();
}

template <typename T>
void GradientStore<T>::add(const GradientStore& other) {
  auto acc = [](Tensor<T>& dst, const Tensor<T>& src) {
    if (src.empty()) return;
    if (dst.empty()) {
      dst = src;
      return;
    }
    require_shape(src, dst.shape(), "gradient accumulation");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  };
  for (std::size_t k = 0; k < weight.size(); ++k) {
    acc(weight[k], other.weight[k]);
    acc(bias[k], other.bias[k]);
  }
}

template <typename T>
void GradientStore<T>::scale(T factor) {
  for (auto& t : weight)
    for (auto& v : t.data()) v *= factor;
  for (auto& t : bias)
    for (auto& v : t.data()) v *= factor;
  for (auto& v : input.data()) v *= factor;
}

template <typename T>
bool GradientStore<T>::all_finite() const {
  for (const auto& t : weight)
    if (!t.all_finite()) return false;
  for (const auto& t : bias)
    if (!t.all_finite()) return false;
  return input.all_finite();
}

template <typename T>
T cross_entropy(std::span<const T> logits, std::size_t label) {
  if (label >= logits.size())
    throw std::out_of_range("label " + std::to_string(label) + " outside " +
                            std::to_string(logits.size()) + " classes");
  const T mx = *std::max_element(logits.begin(), logits.end());
  T sum = T{0};
  for (T v : logits) sum += std::exp(v - mx);
  return std::log(sum) + mx - logits[label];
}

template <typename T>
T cross_entropy_grad(std::span<const T> logits, std::size_t label, std::span<T> grad) {
  const T loss = cross_entropy(logits, label);
  const T mx = *std::max_element(logits.begin(), logits.end());
  T sum = T{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    grad[i] = std::exp(logits[i] - mx);
    sum += grad[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) grad[i] /= sum;
  grad[label] -= T{1};
  return loss;
}

template <typename T>
std::size_t argmax(std::span<const T> logits) {
  return std::size_t(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

template <typename T>
void scatter_embedding_grad(const Network<T>& net, std::span<const TokenId> tokens,
                            const Tensor<T>& input_grad, GradientStore<T>& grads) {
  if (!net.embeddings_trainable() || tokens.empty()) return;
  Tensor<T>& table = grads.weight[0];
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto src = input_grad.row(i);
    auto dst = table.row(tokens[i]);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
}

namespace {

// Reverse sweep down to the embedded input. `grads` may be null, in which case
// only the input gradient is produced.
template <typename T>
Tensor<T> reverse_sweep(const Network<T>& net, const Trace<T>& trace, std::span<const T> upstream,
                        GradientStore<T>* grads) {
  if (!trace.recorded) throw std::logic_error("backward needs a trace recorded by forward");
  if (upstream.size() != trace.logits.size())
    throw DimensionError("upstream gradient length does not match logits");
  const std::size_t first = net.first_compute_layer();
  Tensor<T> g(trace.logits.shape(), std::vector<T>(upstream.begin(), upstream.end()));
  for (std::size_t k = net.layers.size(); k-- > first;) {
    const Layer<T>& l = net.layers[k];
    const Tensor<T>& x = trace.values[k];
    Tensor<T> gx(x.shape());
    switch (l.kind) {
      case LayerKind::Conv1d: {
        const auto s = l.conv_shape(x.dim(0));
        if (grads)
          kernels::conv1d_backward_params<T>(x.data(), g.data(), s, grads->weight[k].data(),
                                             grads->bias[k].data());
        kernels::conv1d_backward_input<T>(l.weight.data(), g.data(), s, gx.data());
        break;
      }
      case LayerKind::Linear:
        if (grads)
          kernels::linear_backward<T>(l.weight.data(), x.data(), g.data(), l.in, l.out,
                                      grads->weight[k].data(), grads->bias[k].data(), gx.data());
        else
          kernels::linear_backward<T>(l.weight.data(), x.data(), g.data(), l.in, l.out, {}, {},
                                      gx.data());
        break;
      case LayerKind::Relu:
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > T{0} ? g[i] : T{0};
        break;
      case LayerKind::AvgPool: {
        const std::size_t len = x.dim(0), ch = x.dim(1);
        const T inv = T{1} / T(len);
        for (std::size_t t = 0; t < len; ++t)
          for (std::size_t c = 0; c < ch; ++c) gx.at(t, c) = g[c] * inv;
        break;
      }
      case LayerKind::Embedding: break;
    }
    g = std::move(gx);
  }
  return g;
}

}  // namespace

template <typename T>
void backward_into(const Network<T>& net, const Trace<T>& trace, std::span<const T> upstream,
                   GradientStore<T>& grads) {
  if (grads.weight.size() != net.layers.size()) grads = GradientStore<T>::zeros_like(net);
  Tensor<T> g = reverse_sweep(net, trace, upstream, &grads);
  if (grads.input.empty()) grads.input = Tensor<T>(g.shape());
  require_shape(g, grads.input.shape(), "input gradient");
  for (std::size_t i = 0; i < g.size(); ++i) grads.input[i] += g[i];
  scatter_embedding_grad(net, trace.tokens, g, grads);
}

template <typename T>
Tensor<T> input_gradient(const Network<T>& net, const Trace<T>& trace,
                         std::span<const T> upstream) {
  return reverse_sweep<T>(net, trace, upstream, nullptr);
}

template <typename T>
GradientStore<T> backward(const Network<T>& net, const Trace<T>& trace,
                          std::span<const T> upstream) {
  GradientStore<T> grads = GradientStore<T>::zeros_like(net);
  backward_into(net, trace, upstream, grads);
  return grads;
}

template <typename T>
AdamState<T> AdamState<T>::for_network(const Network<T>& net, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& l : net.layers) {
    s.m_weight.emplace_back(l.weight.shape());
    s.v_weight.emplace_back(l.weight.shape());
    s.m_bias.emplace_back(l.bias.shape());
    s.v_bias.emplace_back(l.bias.shape());
  }
  return s;
}

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::uint64_t step, const AdamConfig& c) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size())
    throw DimensionError("adam: parameter, gradient and moment sizes differ");
  const double bc1 = 1.0 - std::pow(c.beta1, double(step));
  const double bc2 = 1.0 - std::pow(c.beta2, double(step));
  const T b1 = T(c.beta1), b2 = T(c.beta2);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    m[i] = b1 * m[i] + (T{1} - b1) * g;
    v[i] = b2 * v[i] + (T{1} - b2) * g * g;
    const double mhat = double(m[i]) / bc1;
    const double vhat = double(v[i]) / bc2;
    param[i] -= T(c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon));
  }
}

template <typename T>
void adam_step(Network<T>& net, const GradientStore<T>& grads, AdamState<T>& state) {
  if (grads.weight.size() != net.layers.size() || state.m_weight.size() != net.layers.size())
    throw DimensionError("adam: gradient store does not mirror the network");
  ++state.step;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto& l = net.layers[k];
    if (!l.has_params() || !l.trainable) continue;
    adam_update<T>(l.weight.data(), grads.weight[k].data(), state.m_weight[k].data(),
                   state.v_weight[k].data(), state.step, state.config);
    if (!l.bias.empty())
      adam_update<T>(l.bias.data(), grads.bias[k].data(), state.m_bias[k].data(),
                     state.v_bias[k].data(), state.step, state.config);
  }
}

#define IBP_INSTANTIATE_NN(T)                                                                    \
  template Layer<T> make_embedding<T>(std::size_t, std::size_t, bool);                           \
  template Layer<T> make_conv1d<T>(std::size_t, std::size_t, std::size_t);                       \
  template Layer<T> make_relu<T>();                                                              \
  template Layer<T> make_avg_pool<T>();                                                          \
  template Layer<T> make_linear<T>(std::size_t, std::size_t);                                    \
  template struct Network<T>;                                                                    \
  template void initialize<T>(Network<T>&, std::uint64_t);                                       \
  template Tensor<T> apply_layer<T>(const Layer<T>&, const Tensor<T>&, OpCounter*);              \
  template Tensor<T> forward_from<T>(const Network<T>&, std::size_t, Tensor<T>, OpCounter*);     \
  template Trace<T> forward<T>(const Network<T>&, const Tensor<T>&, bool, OpCounter*);           \
  template Trace<T> forward_tokens<T>(const Network<T>&, std::span<const TokenId>, bool,         \
                                      OpCounter*);                                               \
  template struct GradientStore<T>;                                                              \
  template T cross_entropy<T>(std::span<const T>, std::size_t);                                  \
  template T cross_entropy_grad<T>(std::span<const T>, std::size_t, std::span<T>);               \
  template std::size_t argmax<T>(std::span<const T>);                                            \
  template void scatter_embedding_grad<T>(const Network<T>&, std::span<const TokenId>,           \
                                          const Tensor<T>&, GradientStore<T>&);                  \
  template void backward_into<T>(const Network<T>&, const Trace<T>&, std::span<const T>,         \
                                 GradientStore<T>&);                                             \
  template GradientStore<T> backward<T>(const Network<T>&, const Trace<T>&, std::span<const T>); \
  template Tensor<T> input_gradient<T>(const Network<T>&, const Trace<T>&, std::span<const T>);  \
  template struct AdamState<T>;                                                                  \
  template void adam_update<T>(std::span<T>, std::span<const T>, std::span<T>, std::span<T>,     \
                               std::uint64_t, const AdamConfig&);                                \
  template void adam_step<T>(Network<T>&, const GradientStore<T>&, AdamState<T>&);

IBP_INSTANTIATE_NN(float)
IBP_INSTANTIATE_NN(double)

}  // namespace ibp::nn
