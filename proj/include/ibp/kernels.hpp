#pragma once

// Dense inner loops shared by the exact forward pass, the interval pass and the
// simplex first-layer bounds. Every kernel has a serial reference in
// ibp::kernels::serial; the unqualified versions are OpenMP-parallel and are
// bit-identical to the reference because each output element is reduced in the
// same order regardless of the thread that owns it.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ibp {

/// Multiply-add accounting. Not thread-safe: give each thread its own counter.
struct OpCounter {
  std::uint64_t macs = 0;
  void add(std::uint64_t n) noexcept { macs += n; }
};

namespace kernels {

/// Geometry of a valid (unpadded) 1-D convolution over a (length, in) sequence.
struct ConvShape {
  std::size_t length = 0;  // input positions
  std::size_t in = 0;      // input channels
  std::size_t out = 0;     // kernels
  std::size_t width = 0;   // kernel width
  std::size_t out_length() const noexcept { return length >= width ? length - width + 1 : 0; }
  std::size_t window() const noexcept { return width * in; }
};

/// One simplex vertex: the origin sequence with a single row replaced.
template <typename T>
struct VertexPatch {
  std::size_t position = 0;
  std::span<const T> row;  // already dilated
};

inline bool in_parallel() noexcept {
#ifdef _OPENMP
  return omp_in_parallel() != 0;
#else
  return false;
#endif
}

// Threshold below which spawning a team costs more than it saves.
inline constexpr std::uint64_t kParallelWork = 1u << 15;

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) noexcept {
  T acc = T{0};
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

namespace serial {

// y[t, o] = b[o] + sum_{j, c} W[o, j, c] * x[t + j, c]
template <typename T>
void conv1d_forward(std::span<const T> weight, std::span<const T> bias, std::span<const T> x,
                    const ConvShape& s, std::span<T> y, OpCounter* counter = nullptr) {
  const std::size_t lout = s.out_length();
  const std::size_t win = s.window();
  for (std::size_t t = 0; t < lout; ++t) {
    const T* xt = x.data() + t * s.in;
    for (std::size_t o = 0; o < s.out; ++o) {
      const T b = bias.empty() ? T{0} : bias[o];
      y[t * s.out + o] = b + dot(weight.data() + o * win, xt, win);
    }
  }
  if (counter) counter->add(std::uint64_t(lout) * s.out * win);
}

template <typename T>
void linear_forward(std::span<const T> weight, std::span<const T> bias, std::span<const T> x,
                    std::size_t in, std::size_t out, std::span<T> y, OpCounter* counter = nullptr) {
  for (std::size_t o = 0; o < out; ++o) {
    const T b = bias.empty() ? T{0} : bias[o];
    y[o] = b + dot(weight.data() + o * in, x.data(), in);
  }
  if (counter) counter->add(std::uint64_t(in) * out);
}

// Per-component min/max over simplex vertices, evaluated literally: materialise
// every vertex and run the full convolution.
template <typename T>
void first_layer_minmax(std::span<const T> weight, std::span<const T> bias,
                        std::span<const T> origin, const ConvShape& s,
                        std::span<const VertexPatch<T>> vertices, std::span<T> lower,
                        std::span<T> upper, std::span<std::uint32_t> argmin,
                        std::span<std::uint32_t> argmax, OpCounter* counter = nullptr) {
  const std::size_t n = s.out_length() * s.out;
  std::vector<T> z(origin.begin(), origin.end());
  std::vector<T> y(n);
  serial::conv1d_forward<T>(weight, bias, z, s, lower, counter);
  std::copy(lower.begin(), lower.end(), upper.begin());
  std::fill(argmin.begin(), argmin.end(), 0u);
  std::fill(argmax.begin(), argmax.end(), 0u);
  for (std::size_t m = 0; m < vertices.size(); ++m) {
    const auto& v = vertices[m];
    std::copy(v.row.begin(), v.row.end(), z.begin() + v.position * s.in);
    serial::conv1d_forward<T>(weight, bias, z, s, y, counter);
    for (std::size_t i = 0; i < n; ++i) {
      if (y[i] < lower[i]) {
        lower[i] = y[i];
        argmin[i] = std::uint32_t(m + 1);
      }
      if (y[i] > upper[i]) {
        upper[i] = y[i];
        argmax[i] = std::uint32_t(m + 1);
      }
    }
    std::copy(origin.begin() + v.position * s.in, origin.begin() + (v.position + 1) * s.in,
              z.begin() + v.position * s.in);
  }
}

}  // namespace serial

template <typename T>
void conv1d_forward(std::span<const T> weight, std::span<const T> bias, std::span<const T> x,
                    const ConvShape& s, std::span<T> y, OpCounter* counter = nullptr) {
  const std::size_t lout = s.out_length();
  const std::size_t win = s.window();
  const std::uint64_t work = std::uint64_t(lout) * s.out * win;
  const bool par = work >= kParallelWork && !in_parallel();
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t tt = 0; tt < std::ptrdiff_t(lout); ++tt) {
    const std::size_t t = std::size_t(tt);
    const T* xt = x.data() + t * s.in;
    for (std::size_t o = 0; o < s.out; ++o) {
      const T b = bias.empty() ? T{0} : bias[o];
      y[t * s.out + o] = b + dot(weight.data() + o * win, xt, win);
    }
  }
  if (counter) counter->add(work);
}

template <typename T>
void linear_forward(std::span<const T> weight, std::span<const T> bias, std::span<const T> x,
                    std::size_t in, std::size_t out, std::span<T> y, OpCounter* counter = nullptr) {
  const bool par = std::uint64_t(in) * out >= kParallelWork && !in_parallel();
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t oo = 0; oo < std::ptrdiff_t(out); ++oo) {
    const std::size_t o = std::size_t(oo);
    const T b = bias.empty() ? T{0} : bias[o];
    y[o] = b + dot(weight.data() + o * in, x.data(), in);
  }
  if (counter) counter->add(std::uint64_t(in) * out);
}

// gx[t + j, c] += sum_o gy[t, o] * W[o, j, c]
template <typename T>
void conv1d_backward_input(std::span<const T> weight, std::span<const T> gy, const ConvShape& s,
                           std::span<T> gx) {
  const std::size_t lout = s.out_length();
  const std::size_t win = s.window();
  // Gather form: each input position sums over the windows that cover it, so
  // threads own disjoint outputs.
  const bool par = std::uint64_t(lout) * s.out * win >= kParallelWork && !in_parallel();
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t pp = 0; pp < std::ptrdiff_t(s.length); ++pp) {
    const std::size_t p = std::size_t(pp);
    T* gxp = gx.data() + p * s.in;
    const std::size_t t_lo = p + 1 >= s.width ? p + 1 - s.width : 0;
    const std::size_t t_hi = std::min(p, lout == 0 ? 0 : lout - 1);
    if (lout == 0) continue;
    for (std::size_t t = t_lo; t <= t_hi; ++t) {
      const std::size_t j = p - t;
      for (std::size_t o = 0; o < s.out; ++o) {
        const T g = gy[t * s.out + o];
        if (g == T{0}) continue;
        const T* w = weight.data() + o * win + j * s.in;
        for (std::size_t c = 0; c < s.in; ++c) gxp[c] += g * w[c];
      }
    }
  }
}

// gW[o, j, c] += sum_t gy[t, o] * x[t + j, c];  gb[o] += sum_t gy[t, o]
template <typename T>
void conv1d_backward_params(std::span<const T> x, std::span<const T> gy, const ConvShape& s,
                            std::span<T> gweight, std::span<T> gbias) {
  const std::size_t lout = s.out_length();
  const std::size_t win = s.window();
  const bool par = std::uint64_t(lout) * s.out * win >= kParallelWork && !in_parallel();
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t oo = 0; oo < std::ptrdiff_t(s.out); ++oo) {
    const std::size_t o = std::size_t(oo);
    T* gw = gweight.data() + o * win;
    T gb = T{0};
    for (std::size_t t = 0; t < lout; ++t) {
      const T g = gy[t * s.out + o];
      gb += g;
      if (g == T{0}) continue;
      const T* xt = x.data() + t * s.in;
      for (std::size_t k = 0; k < win; ++k) gw[k] += g * xt[k];
    }
    if (!gbias.empty()) gbias[o] += gb;
  }
}

template <typename T>
void linear_backward(std::span<const T> weight, std::span<const T> x, std::span<const T> gy,
                     std::size_t in, std::size_t out, std::span<T> gweight, std::span<T> gbias,
                     std::span<T> gx) {
  for (std::size_t o = 0; o < out; ++o) {
    const T g = gy[o];
    if (!gbias.empty()) gbias[o] += g;
    if (g == T{0}) continue;
    const T* w = weight.data() + o * in;
    if (!gweight.empty()) {
      T* gw = gweight.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) gw[i] += g * x[i];
    }
    if (!gx.empty())
      for (std::size_t i = 0; i < in; ++i) gx[i] += g * w[i];
  }
}

/// Per-component simplex min/max without re-running the convolution per vertex:
/// evaluate the origin once, then for each vertex patch only the (at most
/// `width`) windows covering its row. Each window is recomputed in full with the
/// same accumulation order as the serial reference, so results match it bit for bit.
/// Parallel over output positions; each position scans its covering vertices in
/// ascending order, so ties resolve to the lowest vertex index exactly as in the
/// serial reference. `vertices` must be sorted by position.
template <typename T>
void first_layer_minmax(std::span<const T> weight, std::span<const T> bias,
                        std::span<const T> origin, const ConvShape& s,
                        std::span<const VertexPatch<T>> vertices, std::span<T> lower,
                        std::span<T> upper, std::span<std::uint32_t> argmin,
                        std::span<std::uint32_t> argmax, OpCounter* counter = nullptr) {
  const std::size_t lout = s.out_length();
  const std::size_t win = s.window();
  conv1d_forward<T>(weight, bias, origin, s, lower, counter);
  std::copy(lower.begin(), lower.end(), upper.begin());
  std::fill(argmin.begin(), argmin.end(), 0u);
  std::fill(argmax.begin(), argmax.end(), 0u);
  if (vertices.empty() || lout == 0) return;

  // first[p] = index of the first vertex at position >= p
  std::vector<std::size_t> first(s.length + 1, vertices.size());
  for (std::size_t m = vertices.size(); m-- > 0;) first[vertices[m].position] = m;
  for (std::size_t p = s.length; p-- > 0;) first[p] = std::min(first[p], first[p + 1]);

  std::uint64_t macs = 0;
  const bool par =
      std::uint64_t(vertices.size()) * s.width * s.out * win >= kParallelWork && !in_parallel();
#pragma omp parallel for schedule(static) reduction(+ : macs) if (par)
  for (std::ptrdiff_t tt = 0; tt < std::ptrdiff_t(lout); ++tt) {
    const std::size_t t = std::size_t(tt);
    const std::size_t m_begin = first[t];
    const std::size_t m_end = first[t + s.width];
    const T* xt = origin.data() + t * s.in;
    T* lo = lower.data() + t * s.out;
    T* hi = upper.data() + t * s.out;
    std::uint32_t* amin = argmin.data() + t * s.out;
    std::uint32_t* amax = argmax.data() + t * s.out;
    for (std::size_t m = m_begin; m < m_end; ++m) {
      const std::size_t j = vertices[m].position - t;
      const T* row = vertices[m].row.data();
      for (std::size_t o = 0; o < s.out; ++o) {
        const T* w = weight.data() + o * win;
        T acc = T{0};
        for (std::size_t i = 0; i < s.width; ++i) {
          const T* x = i == j ? row : xt + i * s.in;
          const T* wi = w + i * s.in;
          for (std::size_t c = 0; c < s.in; ++c) acc += wi[c] * x[c];
        }
        const T y = (bias.empty() ? T{0} : bias[o]) + acc;
        if (y < lo[o]) {
          lo[o] = y;
          amin[o] = std::uint32_t(m + 1);
        }
        if (y > hi[o]) {
          hi[o] = y;
          amax[o] = std::uint32_t(m + 1);
        }
      }
    }
    macs += std::uint64_t(m_end - m_begin) * s.out * win;
  }
  if (counter) counter->add(macs);
}

}  // namespace kernels
}  // namespace ibp
