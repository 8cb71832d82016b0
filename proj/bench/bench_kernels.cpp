#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "ibp/kernels.hpp"

namespace {

using ibp::kernels::ConvShape;
using ibp::kernels::VertexPatch;

struct Fixture {
  ConvShape shape;
  std::vector<float> weight, bias, x, y;
  std::vector<std::vector<float>> rows;
  std::vector<VertexPatch<float>> vertices;
  std::vector<float> lower, upper;
  std::vector<std::uint32_t> argmin, argmax;

  Fixture(std::size_t length, std::size_t in, std::size_t out, std::size_t width, std::size_t m) {
    shape = {length, in, out, width};
    std::mt19937_64 rng(7);
    std::normal_distribution<float> n(0.0f, 1.0f);
    auto fill = [&](std::vector<float>& v, std::size_t size) {
      v.resize(size);
      for (auto& e : v) e = n(rng);
    };
    fill(weight, out * width * in);
    fill(bias, out);
    fill(x, length * in);
    y.resize(shape.out_length() * out);
    rows.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      fill(rows[i], in);
      vertices.push_back({(i * length) / m, rows[i]});
    }
    lower.resize(y.size());
    upper.resize(y.size());
    argmin.resize(y.size());
    argmax.resize(y.size());
  }
};

void BM_ConvSerial(benchmark::State& state) {
  Fixture f(std::size_t(state.range(0)), 150, 100, 5, 0);
  for (auto _ : state) {
    ibp::kernels::serial::conv1d_forward<float>(f.weight, f.bias, f.x, f.shape, f.y);
    benchmark::DoNotOptimize(f.y.data());
  }
}

void BM_ConvParallel(benchmark::State& state) {
  Fixture f(std::size_t(state.range(0)), 150, 100, 5, 0);
  for (auto _ : state) {
    ibp::kernels::conv1d_forward<float>(f.weight, f.bias, f.x, f.shape, f.y);
    benchmark::DoNotOptimize(f.y.data());
  }
}

void BM_MinMaxSerial(benchmark::State& state) {
  Fixture f(100, 150, 100, 5, std::size_t(state.range(0)));
  for (auto _ : state) {
    ibp::kernels::serial::first_layer_minmax<float>(f.weight, f.bias, f.x, f.shape, f.vertices,
                                                    f.lower, f.upper, f.argmin, f.argmax);
    benchmark::DoNotOptimize(f.lower.data());
  }
}

void BM_MinMaxIncremental(benchmark::State& state) {
  Fixture f(100, 150, 100, 5, std::size_t(state.range(0)));
  for (auto _ : state) {
    ibp::kernels::first_layer_minmax<float>(f.weight, f.bias, f.x, f.shape, f.vertices, f.lower,
                                            f.upper, f.argmin, f.argmax);
    benchmark::DoNotOptimize(f.lower.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvSerial)->Arg(100)->Arg(300);
BENCHMARK(BM_ConvParallel)->Arg(100)->Arg(300);
BENCHMARK(BM_MinMaxSerial)->Arg(50)->Arg(200);
BENCHMARK(BM_MinMaxIncremental)->Arg(50)->Arg(200);

BENCHMARK_MAIN();
