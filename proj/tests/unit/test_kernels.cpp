#include <random>
#include <vector>

#include "doctest.h"
#include "ibp/kernels.hpp"

namespace k = ibp::kernels;

namespace {

std::vector<double> randv(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double inner(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("valid convolution by direct summation") {
  // Single channel, kernel [1, -1]: y[t] = x[t] - x[t + 1].
  const std::vector<double> x{4, 1, 5}, w{1, -1}, b{0};
  std::vector<double> y(2);
  k::ConvShape s{3, 1, 1, 2};
  k::conv1d_forward<double>(w, b, x, s, y);
  CHECK(y[0] == 3);
  CHECK(y[1] == -4);
  std::vector<double> ys(2);
  k::serial::conv1d_forward<double>(w, b, x, s, ys);
  CHECK(ys == y);
}

TEST_CASE("multi-channel convolution matches a hand-written loop") {
  std::mt19937_64 rng(1);
  k::ConvShape s{9, 3, 4, 3};
  const auto x = randv(s.length * s.in, rng), w = randv(s.out * s.width * s.in, rng),
             b = randv(s.out, rng);
  std::vector<double> y(s.out_length() * s.out);
  k::conv1d_forward<double>(w, b, x, s, y);
  for (std::size_t t = 0; t < s.out_length(); ++t)
    for (std::size_t o = 0; o < s.out; ++o) {
      double acc = b[o];
      for (std::size_t j = 0; j < s.width; ++j)
        for (std::size_t c = 0; c < s.in; ++c)
          acc += w[(o * s.width + j) * s.in + c] * x[(t + j) * s.in + c];
      CHECK(y[t * s.out + o] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("parallel kernels are bit-identical to the serial references") {
  std::mt19937_64 rng(2);
  k::ConvShape s{120, 32, 64, 5};  // large enough to take the parallel path
  const auto x = randv(s.length * s.in, rng), w = randv(s.out * s.width * s.in, rng),
             b = randv(s.out, rng);
  std::vector<double> yp(s.out_length() * s.out), ys(yp.size());
  ibp::OpCounter cp, cs;
  k::conv1d_forward<double>(w, b, x, s, yp, &cp);
  k::serial::conv1d_forward<double>(w, b, x, s, ys, &cs);
  CHECK(yp == ys);
  CHECK(cp.macs == cs.macs);
  CHECK(cs.macs == s.out_length() * s.out * s.window());

  const auto lw = randv(10 * 300, rng), lb = randv(10, rng), lx = randv(300, rng);
  std::vector<double> lp(10), ls(10);
  k::linear_forward<double>(lw, lb, lx, 300, 10, lp);
  k::serial::linear_forward<double>(lw, lb, lx, 300, 10, ls);
  CHECK(lp == ls);
}

TEST_CASE("convolution backward passes are adjoint to the forward map") {
  std::mt19937_64 rng(3);
  k::ConvShape s{11, 4, 5, 3};
  const auto x = randv(s.length * s.in, rng), w = randv(s.out * s.width * s.in, rng),
             gy = randv(s.out_length() * s.out, rng), w2 = randv(w.size(), rng);
  const std::vector<double> nobias;
  std::vector<double> y(gy.size());
  k::conv1d_forward<double>(w, nobias, x, s, y);

  // <gy, conv_W(x)> = <conv_W^T(gy), x>
  std::vector<double> gx(x.size(), 0.0);
  k::conv1d_backward_input<double>(w, gy, s, gx);
  CHECK(inner(gx, x) == doctest::Approx(inner(gy, y)).epsilon(1e-10));

  // The map W -> conv_W(x) is linear: <gy, conv_W2(x)> = <gW, W2>
  std::vector<double> gw(w.size(), 0.0), gb(s.out, 0.0), y2(gy.size());
  k::conv1d_backward_params<double>(x, gy, s, gw, gb);
  k::conv1d_forward<double>(w2, nobias, x, s, y2);
  CHECK(inner(gw, w2) == doctest::Approx(inner(gy, y2)).epsilon(1e-10));
  for (std::size_t o = 0; o < s.out; ++o) {
    double sum = 0;
    for (std::size_t t = 0; t < s.out_length(); ++t) sum += gy[t * s.out + o];
    CHECK(gb[o] == doctest::Approx(sum).epsilon(1e-12));
  }
}

TEST_CASE("linear backward matches the transpose") {
  std::mt19937_64 rng(4);
  const std::size_t in = 7, out = 3;
  const auto w = randv(in * out, rng), x = randv(in, rng), gy = randv(out, rng);
  std::vector<double> gw(w.size(), 0.0), gb(out, 0.0), gx(in, 0.0);
  k::linear_backward<double>(w, x, gy, in, out, gw, gb, gx);
  for (std::size_t i = 0; i < in; ++i) {
    double s = 0;
    for (std::size_t o = 0; o < out; ++o) s += gy[o] * w[o * in + i];
    CHECK(gx[i] == doctest::Approx(s).epsilon(1e-12));
  }
  for (std::size_t o = 0; o < out; ++o) {
    CHECK(gb[o] == gy[o]);
    for (std::size_t i = 0; i < in; ++i) CHECK(gw[o * in + i] == doctest::Approx(gy[o] * x[i]));
  }
}

TEST_CASE("incremental simplex min/max matches the naive evaluation bit for bit") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<std::size_t> len(3, 20), ch(1, 6), width(1, 4), verts(0, 12);
    k::ConvShape s{len(rng), ch(rng), ch(rng), 0};
    s.width = std::min(width(rng), s.length);
    const auto x0 = randv(s.length * s.in, rng), w = randv(s.out * s.width * s.in, rng),
               b = randv(s.out, rng);
    const std::size_t m = verts(rng);
    std::vector<std::size_t> pos(m);
    std::uniform_int_distribution<std::size_t> pd(0, s.length - 1);
    for (auto& p : pos) p = pd(rng);
    std::sort(pos.begin(), pos.end());
    const auto rows = randv(m * s.in, rng);
    std::vector<k::VertexPatch<double>> patches;
    for (std::size_t i = 0; i < m; ++i)
      patches.push_back({pos[i], std::span<const double>(rows).subspan(i * s.in, s.in)});
    const std::size_t n = s.out_length() * s.out;
    std::vector<double> lo1(n), hi1(n), lo2(n), hi2(n);
    std::vector<std::uint32_t> amin1(n), amax1(n), amin2(n), amax2(n);
    k::serial::first_layer_minmax<double>(w, b, x0, s, patches, lo1, hi1, amin1, amax1);
    k::first_layer_minmax<double>(w, b, x0, s, patches, lo2, hi2, amin2, amax2);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(lo1[i] == lo2[i]);
      CHECK(hi1[i] == hi2[i]);
      CHECK(amin1[i] == amin2[i]);
      CHECK(amax1[i] == amax2[i]);
      CHECK(lo1[i] <= hi1[i]);
    }
  }
}
