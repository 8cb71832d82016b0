#include <cmath>
#include <random>

#include "doctest.h"
#include "ibp/nn.hpp"
#include "support.hpp"

using namespace ibp;
using namespace ibp::nn;
using testing_support::random_network;
using testing_support::random_sentence;
using testing_support::rel_err;

namespace {

template <typename F>
double central_difference(double& x, F&& f, double h = 1e-6) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2 * h);
}

double loss_of(const Network<double>& net, const std::vector<TokenId>& tokens, std::size_t label) {
  const auto tr = forward_tokens(net, std::span<const TokenId>(tokens), false);
  return cross_entropy<double>(tr.logits.data(), label);
}

}  // namespace

TEST_CASE("cross-entropy reference values") {
  const std::vector<double> uniform{0.3, 0.3};
  CHECK(cross_entropy<double>(uniform, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<double> confident{60.0, -60.0};
  CHECK(cross_entropy<double>(confident, 0) < 1e-40);
  std::vector<double> g(3);
  const std::vector<double> z{1.0, 2.0, 3.0};
  const double l = cross_entropy_grad<double>(z, 2, g);
  const double denom = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(l == doctest::Approx(-std::log(std::exp(3.0) / denom)));
  CHECK(g[0] == doctest::Approx(std::exp(1.0) / denom));
  CHECK(g[2] == doctest::Approx(std::exp(3.0) / denom - 1.0));
  const std::vector<double> huge{1e4, 0.0};
  CHECK(std::isfinite(cross_entropy<double>(huge, 1)));
}

TEST_CASE("argmax returns the first maximum") {
  const std::vector<float> z{1.0f, 3.0f, 3.0f};
  CHECK(argmax<float>(z) == 1);
}

TEST_CASE("forward through relu and average pooling") {
  Network<double> net;
  net.input_dim = 1;
  net.class_count = 1;
  net.layers.push_back(make_conv1d<double>(1, 1, 2));
  net.layers[0].weight.storage() = {1.0, -1.0};
  net.layers.push_back(make_relu<double>());
  net.layers.push_back(make_avg_pool<double>());
  net.layers.push_back(make_linear<double>(1, 1));
  net.layers[3].weight.storage() = {2.0};
  net.layers[3].bias.storage() = {0.5};
  net.frozen_embeddings = Tensor<double>({3, 1}, std::vector<double>{4, 1, 5});
  net.validate();
  // conv -> [3, -4], relu -> [3, 0], mean -> 1.5, linear -> 3.5
  const std::vector<TokenId> toks{0, 1, 2};
  const auto tr = forward_tokens(net, std::span<const TokenId>(toks));
  CHECK(tr.logits[0] == doctest::Approx(3.5));
  CHECK(net.min_length() == 2);
}

TEST_CASE("validate rejects inconsistent stacks") {
  auto net = random_network<float>("vocab=10 embed=4 conv=3x2 relu avgpool linear=2", 1);
  CHECK_NOTHROW(net.validate());
  auto bad = net;
  bad.layers.back() = make_linear<float>(5, 2);
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  bad = net;
  bad.class_count = 3;
  CHECK_THROWS_AS(bad.validate(), DimensionError);
}

TEST_CASE("non-finite logits are reported") {
  auto net = random_network<double>("vocab=10 embed=4 conv=3x2 relu avgpool linear=2", 1);
  net.layers.back().bias[0] = std::nan("");
  const std::vector<TokenId> toks{2, 3, 4};
  CHECK_THROWS_AS(forward_tokens(net, std::span<const TokenId>(toks)), NumericalError);
}

TEST_CASE("Glorot initialisation is seeded and bounded") {
  auto a = random_network<float>("input=6 conv=4x3 relu avgpool linear=2", 5, 0.0);
  auto b = random_network<float>("input=6 conv=4x3 relu avgpool linear=2", 5, 0.0);
  auto c = random_network<float>("input=6 conv=4x3 relu avgpool linear=2", 6, 0.0);
  CHECK(a.layers[0].weight == b.layers[0].weight);
  CHECK_FALSE(a.layers[0].weight == c.layers[0].weight);
  const double limit = std::sqrt(6.0 / (3 * 6 + 3 * 4));
  for (float w : a.layers[0].weight.data()) CHECK(std::abs(w) <= limit);
  for (float b0 : a.layers[0].bias.data()) CHECK(b0 == 0.0f);
}

TEST_CASE("parameter and embedding gradients match central differences") {
  const char* archs[] = {
      "vocab=12 embed=5 conv=4x3 relu avgpool linear=2",
      "vocab=12 embed=5 conv=4x3 relu avgpool linear=6 relu linear=6 relu linear=4",
  };
  std::mt19937_64 rng(11);
  for (const char* arch : archs) {
    CAPTURE(arch);
    auto net = random_network<double>(arch, 3, 0.3);
    const auto toks = random_sentence(7, 12, rng);
    const std::size_t label = 1;
    const auto tr = forward_tokens(net, std::span<const TokenId>(toks));
    std::vector<double> g(tr.logits.size());
    cross_entropy_grad<double>(tr.logits.data(), label, g);
    const auto grads = backward(net, tr, std::span<const double>(g));
    double worst = 0;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
      auto& l = net.layers[k];
      for (std::size_t i = 0; i < l.weight.size(); ++i) {
        const double fd =
            central_difference(l.weight[i], [&] { return loss_of(net, toks, label); });
        worst = std::max(worst, rel_err(fd, grads.weight[k][i]));
      }
      for (std::size_t i = 0; i < l.bias.size(); ++i) {
        const double fd = central_difference(l.bias[i], [&] { return loss_of(net, toks, label); });
        worst = std::max(worst, rel_err(fd, grads.bias[k][i]));
      }
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("input gradient of a word model matches central differences") {
  auto net =
      testing_support::random_word_network<double>("input=5 conv=4x3 relu avgpool linear=3", 9, 4);
  const std::vector<TokenId> toks{2, 5, 3, 7, 2};
  const std::size_t label = 2;
  auto emb = net.embed(std::span<const TokenId>(toks));
  const auto tr = forward(net, emb);
  std::vector<double> g(tr.logits.size());
  cross_entropy_grad<double>(tr.logits.data(), label, g);
  const auto gx = input_gradient(net, tr, std::span<const double>(g));
  for (std::size_t i = 0; i < emb.size(); ++i) {
    const double fd = central_difference(emb[i], [&] {
      return cross_entropy<double>(forward(net, emb, false).logits.data(), label);
    });
    CHECK(rel_err(fd, gx[i]) < 1e-6);
  }
}

TEST_CASE("Adam follows the bias-corrected reference recursion") {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  std::vector<double> p{1.0, -2.0}, m(2, 0.0), v(2, 0.0);
  const std::vector<std::vector<double>> grads{{0.5, -1.0}, {0.25, 0.0}, {-1.0, 2.0}};
  // Reference written out independently.
  double rp[2] = {1.0, -2.0}, rm[2] = {0, 0}, rv[2] = {0, 0};
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    adam_update<double>(p, grads[t - 1], m, v, t, cfg);
    for (int i = 0; i < 2; ++i) {
      const double gi = grads[t - 1][i];
      rm[i] = 0.9 * rm[i] + 0.1 * gi;
      rv[i] = 0.999 * rv[i] + 0.001 * gi * gi;
      const double mh = rm[i] / (1 - std::pow(0.9, t)), vh = rv[i] / (1 - std::pow(0.999, t));
      rp[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(p[i] == doctest::Approx(rp[i]).epsilon(1e-14));
    }
  }
  // First step moves each parameter by lr * sign(g).
  std::vector<double> q{0.0}, mq{0.0}, vq{0.0};
  adam_update<double>(q, std::vector<double>{3.0}, mq, vq, 1, cfg);
  CHECK(q[0] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("Adam skips frozen parameters") {
  auto net = random_network<float>("vocab=8 embed=3 conv=2x2 relu avgpool linear=2", 1);
  net.layers[0].trainable = false;
  const auto before = net.layers[0].weight;
  auto g = GradientStore<float>::zeros_like(net);
  for (auto& w : g.weight)
    for (auto& x : w.storage()) x = 1.0f;
  auto state = AdamState<float>::for_network(net);
  adam_step(net, g, state);
  CHECK(net.layers[0].weight == before);
  CHECK_FALSE(
      net.layers[1].weight ==
      random_network<float>("vocab=8 embed=3 conv=2x2 relu avgpool linear=2", 1).layers[1].weight);
}
