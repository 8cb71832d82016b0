#include "ibp/bounds.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace ibp::bounds {

using nn::Layer;
using nn::LayerKind;
using nn::Network;

template <typename T>
void IntervalTensor<T>::validate() const {
  if (lower.shape() != upper.shape())
    throw DimensionError("interval bounds disagree in shape: " + shape_string(lower.shape()) +
                         " vs " + shape_string(upper.shape()));
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (!(lower[i] <= upper[i])) throw DimensionError("interval has lower > upper");
}

template <typename T>
bool IntervalTensor<T>::contains(const Tensor<T>& x, T slack) const {
  if (x.shape() != lower.shape()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] < lower[i] - slack || x[i] > upper[i] + slack) return false;
  return true;
}

template <typename T>
bool IntervalTensor<T>::contains(const IntervalTensor& inner, T slack) const {
  if (inner.shape() != shape()) return false;
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (inner.lower[i] < lower[i] - slack || inner.upper[i] > upper[i] + slack) return false;
  return true;
}

namespace {

template <typename T>
Tensor<T> abs_of(const Tensor<T>& w) {
  Tensor<T> a = w;
  for (auto& v : a.data()) v = std::abs(v);
  return a;
}

template <typename T>
void center_radius(const IntervalTensor<T>& in, Tensor<T>& mu, Tensor<T>& r) {
  mu = Tensor<T>(in.shape());
  r = Tensor<T>(in.shape());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    mu[i] = (in.lower[i] + in.upper[i]) / T{2};
    r[i] = (in.upper[i] - in.lower[i]) / T{2};
  }
}

template <typename T>
Tensor<T> affine_no_bias(const Layer<T>& layer, const Tensor<T>& weight, const Tensor<T>& x,
                         OpCounter* counter) {
  Layer<T> l;
  l.kind = layer.kind;
  l.in = layer.in;
  l.out = layer.out;
  l.width = layer.width;
  l.weight = weight;
  return nn::apply_layer(l, x, counter);
}

}  // namespace

template <typename T>
IntervalTensor<T> interval_affine(const Layer<T>& layer, const IntervalTensor<T>& in,
                                  OpCounter* counter) {
  if (!layer.is_affine())
    throw std::invalid_argument(std::string("interval_affine on non-affine layer ") +
                                nn::to_string(layer.kind));
  in.validate();
  Tensor<T> mu, r;
  center_radius(in, mu, r);
  Tensor<T> center = nn::apply_layer(layer, mu, counter);
  Tensor<T> radius = affine_no_bias(layer, abs_of(layer.weight), r, counter);
  IntervalTensor<T> out{center, center};
  for (std::size_t i = 0; i < center.size(); ++i) {
    out.lower[i] = center[i] - radius[i];
    out.upper[i] = center[i] + radius[i];
  }
  return out;
}

template <typename T>
IntervalTensor<T> interval_monotone(const Layer<T>& layer, const IntervalTensor<T>& in) {
  if (!layer.is_monotone())
    throw std::invalid_argument(std::string("interval_monotone on non-monotone layer ") +
                                nn::to_string(layer.kind));
  return {nn::apply_layer(layer, in.lower), nn::apply_layer(layer, in.upper)};
}

template <typename T>
IntervalTensor<T> interval_layer(const Layer<T>& layer, const IntervalTensor<T>& in,
                                 OpCounter* counter) {
  if (layer.is_affine()) return interval_affine(layer, in, counter);
  if (layer.is_monotone()) return interval_monotone(layer, in);
  throw std::invalid_argument(std::string("no interval rule for layer ") +
                              nn::to_string(layer.kind));
}

template <typename T>
FirstBlockBounds<T> simplex_first_layer_bounds(const Network<T>& net,
                                               const perturb::SimplexVertices<T>& vertices,
                                               SimplexMethod method, PassCounts* counts) {
  const std::size_t a = net.first_compute_layer();
  if (a >= net.layers.size() || net.layers[a].kind != LayerKind::Conv1d)
    throw std::invalid_argument("simplex bounds need a conv1d first layer");
  const Layer<T>& conv = net.layers[a];
  const auto& origin = vertices.origin;
  if (origin.rank() != 2 || origin.dim(1) != conv.in)
    throw DimensionError("simplex origin " + shape_string(origin.shape()) +
                         " does not match the first layer");
  if (origin.dim(0) < conv.width)
    throw DimensionError("sequence length " + std::to_string(origin.dim(0)) +
                         " shorter than kernel width " + std::to_string(conv.width));

  FirstBlockBounds<T> fb;
  fb.affine_layer = a;
  fb.block_end = a + 1;
  if (fb.block_end < net.layers.size() && net.layers[fb.block_end].kind == LayerKind::Relu)
    ++fb.block_end;

  const auto s = conv.conv_shape(origin.dim(0));
  const std::size_t n = s.out_length() * s.out;
  fb.pre.lower = Tensor<T>({s.out_length(), s.out});
  fb.pre.upper = Tensor<T>({s.out_length(), s.out});
  fb.argmin.assign(n, 0);
  fb.argmax.assign(n, 0);
  const auto patches = vertices.patches();
  OpCounter ops;
  if (method == SimplexMethod::Naive)
    kernels::serial::first_layer_minmax<T>(conv.weight.data(), conv.bias.data(), origin.data(), s,
                                           patches, fb.pre.lower.data(), fb.pre.upper.data(),
                                           fb.argmin, fb.argmax, &ops);
  else
    kernels::first_layer_minmax<T>(conv.weight.data(), conv.bias.data(), origin.data(), s, patches,
                                   fb.pre.lower.data(), fb.pre.upper.data(), fb.argmin, fb.argmax,
                                   &ops);
  fb.post = fb.block_end == a + 2 ? interval_monotone(net.layers[a + 1], fb.pre) : fb.pre;
  if (counts) {
    counts->vertex_evaluations += vertices.size();
    counts->macs += ops.macs;
  }
  return fb;
}

template <typename T>
IntervalTensor<T> propagate_from(const Network<T>& net, std::size_t from, IntervalTensor<T> in,
                                 PassCounts* counts) {
  OpCounter ops;
  for (std::size_t k = from; k < net.layers.size(); ++k) {
    in = interval_layer(net.layers[k], in, &ops);
  }
  if (counts) {
    counts->bound_passes += 2;
    counts->macs += ops.macs;
  }
  return in;
}

template <typename T>
IntervalTensor<T> propagate(const Network<T>& net, const FirstBlockBounds<T>& first,
                            PassCounts* counts) {
  return propagate_from(net, first.block_end, first.post, counts);
}

template <typename T>
BoundsTrace<T> propagate_recorded(const Network<T>& net, FirstBlockBounds<T> first,
                                  PassCounts* counts) {
  BoundsTrace<T> tr;
  tr.first = std::move(first);
  IntervalTensor<T> cur = tr.first.post;
  OpCounter ops;
  for (std::size_t k = tr.first.block_end; k < net.layers.size(); ++k) {
    IntervalTensor<T> next = interval_layer(net.layers[k], cur, &ops);
    tr.inputs.push_back(std::move(cur));
    cur = std::move(next);
  }
  tr.logits = std::move(cur);
  if (counts) {
    counts->bound_passes += 2;
    counts->macs += ops.macs;
  }
  return tr;
}

std::vector<std::vector<int>> WorstCaseSpec::constraints() const {
  std::vector<std::vector<int>> out;
  for (std::size_t y = 0; y < class_count; ++y) {
    if (y == true_class) continue;
    std::vector<int> c(class_count, 0);
    c[y] = 1;
    c[true_class] = -1;
    out.push_back(std::move(c));
  }
  return out;
}

template <typename T>
WorstCaseLogits<T> worst_case_logits(const IntervalTensor<T>& b, std::size_t true_class) {
  if (true_class >= b.upper.size()) throw std::out_of_range("true class outside logits");
  WorstCaseLogits<T> w{b.upper};
  w.values[true_class] = b.lower[true_class];
  return w;
}

template <typename T>
Margin<T> verified_margin(const IntervalTensor<T>& b, std::size_t true_class) {
  if (true_class >= b.upper.size()) throw std::out_of_range("true class outside logits");
  if (b.upper.size() < 2) throw std::invalid_argument("margin needs at least two classes");
  Margin<T> m;
  m.value = -std::numeric_limits<T>::infinity();
  for (std::size_t y = 0; y < b.upper.size(); ++y) {
    if (y == true_class) continue;
    const T v = b.upper[y] - b.lower[true_class];
    if (v > m.value) {
      m.value = v;
      m.worst_class = y;
    }
  }
  m.verified = m.value < T{0};
  return m;
}

template <typename T>
void bounds_backward(const Network<T>& net, const perturb::SimplexVertices<T>& vertices,
                     const BoundsTrace<T>& trace, std::span<const T> grad_lower,
                     std::span<const T> grad_upper, nn::GradientStore<T>& grads) {
  if (grads.weight.size() != net.layers.size()) grads = nn::GradientStore<T>::zeros_like(net);
  Tensor<T> gl(trace.logits.shape(), std::vector<T>(grad_lower.begin(), grad_lower.end()));
  Tensor<T> gu(trace.logits.shape(), std::vector<T>(grad_upper.begin(), grad_upper.end()));
  const std::size_t end = trace.first.block_end;

  for (std::size_t k = net.layers.size(); k-- > end;) {
    const Layer<T>& l = net.layers[k];
    const IntervalTensor<T>& in = trace.inputs[k - end];
    Tensor<T> gl_in(in.shape()), gu_in(in.shape());
    switch (l.kind) {
      case LayerKind::Relu:
        for (std::size_t i = 0; i < in.lower.size(); ++i) {
          gl_in[i] = in.lower[i] > T{0} ? gl[i] : T{0};
          gu_in[i] = in.upper[i] > T{0} ? gu[i] : T{0};
        }
        break;
      case LayerKind::AvgPool: {
        const std::size_t len = in.lower.dim(0), ch = in.lower.dim(1);
        const T inv = T{1} / T(len);
        for (std::size_t t = 0; t < len; ++t)
          for (std::size_t c = 0; c < ch; ++c) {
            gl_in.at(t, c) = gl[c] * inv;
            gu_in.at(t, c) = gu[c] * inv;
          }
        break;
      }
      case LayerKind::Linear:
      case LayerKind::Conv1d: {
        Tensor<T> mu, r;
        center_radius(in, mu, r);
        Tensor<T> gmu(gl.shape()), gr(gl.shape());
        for (std::size_t i = 0; i < gl.size(); ++i) {
          gmu[i] = gl[i] + gu[i];
          gr[i] = gu[i] - gl[i];
        }
        const Tensor<T> absw = abs_of(l.weight);
        Tensor<T> gabs(l.weight.shape());
        Tensor<T> gmu_in(in.shape()), gr_in(in.shape());
        if (l.kind == LayerKind::Linear) {
          kernels::linear_backward<T>(l.weight.data(), mu.data(), gmu.data(), l.in, l.out,
                                      grads.weight[k].data(), grads.bias[k].data(), gmu_in.data());
          kernels::linear_backward<T>(absw.data(), r.data(), gr.data(), l.in, l.out, gabs.data(),
                                      {}, gr_in.data());
        } else {
          const auto s = l.conv_shape(in.lower.dim(0));
          kernels::conv1d_backward_params<T>(mu.data(), gmu.data(), s, grads.weight[k].data(),
                                             grads.bias[k].data());
          kernels::conv1d_backward_input<T>(l.weight.data(), gmu.data(), s, gmu_in.data());
          kernels::conv1d_backward_params<T>(r.data(), gr.data(), s, gabs.data(), {});
          kernels::conv1d_backward_input<T>(absw.data(), gr.data(), s, gr_in.data());
        }
        auto& gw = grads.weight[k];
        for (std::size_t i = 0; i < gw.size(); ++i) {
          const T w = l.weight[i];
          gw[i] += w > T{0} ? gabs[i] : (w < T{0} ? -gabs[i] : T{0});
        }
        for (std::size_t i = 0; i < gl_in.size(); ++i) {
          gl_in[i] = (gmu_in[i] - gr_in[i]) / T{2};
          gu_in[i] = (gmu_in[i] + gr_in[i]) / T{2};
        }
        break;
      }
      case LayerKind::Embedding: throw std::logic_error("embedding layer inside the bound stack");
    }
    gl = std::move(gl_in);
    gu = std::move(gu_in);
  }

  // First block: undo the activation, then split across the extreme vertices.
  const FirstBlockBounds<T>& fb = trace.first;
  if (fb.block_end == fb.affine_layer + 2) {
    for (std::size_t i = 0; i < gl.size(); ++i) {
      gl[i] = fb.pre.lower[i] > T{0} ? gl[i] : T{0};
      gu[i] = fb.pre.upper[i] > T{0} ? gu[i] : T{0};
    }
  }
  const std::size_t a = fb.affine_layer;
  const Layer<T>& conv = net.layers[a];
  const Tensor<T>& origin = vertices.origin;
  const auto s = conv.conv_shape(origin.dim(0));
  const std::size_t lout = s.out_length();
  const std::size_t win = s.window();

  // Every vertex shares the origin's convolution; the patches add a correction
  // on the windows covering their row.
  Tensor<T> gbase(gl.shape());
  for (std::size_t i = 0; i < gl.size(); ++i) gbase[i] = gl[i] + gu[i];
  Tensor<T> dx0(origin.shape());
  kernels::conv1d_backward_params<T>(origin.data(), gbase.data(), s, grads.weight[a].data(),
                                     grads.bias[a].data());
  kernels::conv1d_backward_input<T>(conv.weight.data(), gbase.data(), s, dx0.data());

  const std::size_t d = s.in;
  Tensor<T> drow(vertices.rows.shape());
  auto& gw = grads.weight[a];
  auto route = [&](std::uint32_t vertex, std::size_t t, std::size_t o, T g) {
    if (vertex == 0 || g == T{0}) return;
    const std::size_t m = vertex - 1;
    const std::size_t pos = vertices.positions[m];
    const std::size_t j = pos - t;
    const T* row = vertices.rows.row(m).data();
    const T* x0 = origin.row(pos).data();
    T* gwr = gw.data().data() + o * win + j * d;
    const T* wr = conv.weight.data().data() + o * win + j * d;
    T* dr = drow.row(m).data();
    for (std::size_t c = 0; c < d; ++c) {
      gwr[c] += g * (row[c] - x0[c]);
      dr[c] += g * wr[c];
    }
  };
  for (std::size_t t = 0; t < lout; ++t)
    for (std::size_t o = 0; o < s.out; ++o) {
      const std::size_t i = t * s.out + o;
      route(fb.argmin[i], t, o, gl[i]);
      route(fb.argmax[i], t, o, gu[i]);
    }

  // row = x0 + delta (p - x0) and the correction is W (row - x0), so the origin
  // row receives -delta * drow and the replacement embedding +delta * drow.
  const T delta = vertices.delta;
  for (std::size_t m = 0; m < vertices.positions.size(); ++m) {
    auto dr = drow.row(m);
    auto dx = dx0.row(vertices.positions[m]);
    for (std::size_t c = 0; c < d; ++c) dx[c] -= delta * dr[c];
  }
  if (grads.input.empty()) grads.input = Tensor<T>(dx0.shape());
  require_shape(dx0, grads.input.shape(), "input gradient");
  for (std::size_t i = 0; i < dx0.size(); ++i) grads.input[i] += dx0[i];

  nn::scatter_embedding_grad(net, vertices.tokens, dx0, grads);
  if (net.embeddings_trainable()) {
    auto& table = grads.weight[0];
    for (std::size_t m = 0; m < vertices.positions.size(); ++m) {
      auto dr = drow.row(m);
      auto dst = table.row(vertices.replacements[m]);
      for (std::size_t c = 0; c < d; ++c) dst[c] += delta * dr[c];
    }
  }
}

#define IBP_INSTANTIATE_BOUNDS(T)                                                                 \
  template struct IntervalTensor<T>;                                                              \
  template IntervalTensor<T> interval_affine<T>(const Layer<T>&, const IntervalTensor<T>&,        \
                                                OpCounter*);                                      \
  template IntervalTensor<T> interval_monotone<T>(const Layer<T>&, const IntervalTensor<T>&);     \
  template IntervalTensor<T> interval_layer<T>(const Layer<T>&, const IntervalTensor<T>&,         \
                                               OpCounter*);                                       \
  template FirstBlockBounds<T> simplex_first_layer_bounds<T>(                                     \
      const Network<T>&, const perturb::SimplexVertices<T>&, SimplexMethod, PassCounts*);         \
  template IntervalTensor<T> propagate<T>(const Network<T>&, const FirstBlockBounds<T>&,          \
                                          PassCounts*);                                           \
  template IntervalTensor<T> propagate_from<T>(const Network<T>&, std::size_t, IntervalTensor<T>, \
                                               PassCounts*);                                      \
  template BoundsTrace<T> propagate_recorded<T>(const Network<T>&, FirstBlockBounds<T>,           \
                                                PassCounts*);                                     \
  template WorstCaseLogits<T> worst_case_logits<T>(const IntervalTensor<T>&, std::size_t);        \
  template Margin<T> verified_margin<T>(const IntervalTensor<T>&, std::size_t);                   \
  template void bounds_backward<T>(const Network<T>&, const perturb::SimplexVertices<T>&,         \
                                   const BoundsTrace<T>&, std::span<const T>, std::span<const T>, \
                                   nn::GradientStore<T>&);

IBP_INSTANTIATE_BOUNDS(float)
IBP_INSTANTIATE_BOUNDS(double)

}  // namespace ibp::bounds
