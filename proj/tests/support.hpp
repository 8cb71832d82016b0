#pragma once

// Shared fixtures for the unit and acceptance suites: random toy networks and
// sentences, and reference implementations written independently of the
// library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ibp/example.hpp"
#include "ibp/harness/model.hpp"
#include "ibp/nn.hpp"
#include "ibp/perturb.hpp"

namespace testing_support {

using ibp::TokenId;

/// Network from a descriptor, Glorot-initialised, with biases drawn from
/// U(-bias_scale, bias_scale) so that ReLU patterns are not trivially aligned.
template <typename T>
ibp::nn::Network<T> random_network(const std::string& descriptor, std::uint64_t seed,
                                   double bias_scale = 0.1) {
  auto net = ibp::harness::build_network<T>(ibp::harness::ArchSpec::parse(descriptor));
  ibp::nn::initialize(net, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-bias_scale, bias_scale);
  for (auto& l : net.layers)
    for (auto& b : l.bias.storage()) b = T(u(rng));
  return net;
}

/// Word-style network: frozen random embeddings of the given vocabulary size.
template <typename T>
ibp::nn::Network<T> random_word_network(const std::string& descriptor, std::size_t vocab,
                                        std::uint64_t seed) {
  auto net = random_network<T>(descriptor, seed);
  std::mt19937_64 rng(seed + 17);
  std::normal_distribution<double> n(0.0, 1.0);
  net.frozen_embeddings = ibp::Tensor<T>({vocab, net.input_dim});
  for (auto& v : net.frozen_embeddings.storage()) v = T(n(rng));
  return net;
}

inline std::vector<TokenId> random_sentence(std::size_t length, std::size_t vocab,
                                            std::mt19937_64& rng) {
  std::uniform_int_distribution<TokenId> d(2, TokenId(vocab - 1));
  std::vector<TokenId> s(length);
  for (auto& t : s) t = d(rng);
  return s;
}

/// Each token gets 0..max_options distinct replacements with probability `p`.
inline ibp::perturb::SubstitutionTable random_table(std::size_t vocab, std::size_t max_options,
                                                    double p, std::mt19937_64& rng) {
  ibp::perturb::SubstitutionTable table;
  std::bernoulli_distribution has(p);
  std::uniform_int_distribution<std::size_t> count(1, max_options);
  std::uniform_int_distribution<TokenId> tok(2, TokenId(vocab - 1));
  for (TokenId t = 2; t < vocab; ++t) {
    if (!has(rng)) continue;
    const std::size_t k = count(rng);
    std::set<TokenId> chosen;
    while (chosen.size() < k) {
      const TokenId r = tok(rng);
      if (r != t) chosen.insert(r);
    }
    for (TokenId r : chosen) table.add(t, r);
  }
  return table;
}

/// Every sentence reachable with at most `delta` substitutions at distinct
/// positions, original included, by plain recursion over positions.
inline std::vector<std::vector<TokenId>> brute_force_space(
    const std::vector<TokenId>& sentence, const ibp::perturb::SubstitutionTable& table,
    std::size_t delta) {
  std::vector<std::vector<TokenId>> out;
  std::vector<TokenId> cur = sentence;
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t used) {
    if (pos == sentence.size()) {
      out.push_back(cur);
      return;
    }
    rec(pos + 1, used);
    if (used == delta) return;
    for (TokenId r : table.options(sentence[pos])) {
      cur[pos] = r;
      rec(pos + 1, used + 1);
      cur[pos] = sentence[pos];
    }
  };
  rec(0, 0);
  return out;
}

template <typename T>
std::size_t predict(const ibp::nn::Network<T>& net, const std::vector<TokenId>& tokens) {
  const auto tr = ibp::nn::forward_tokens(net, std::span<const TokenId>(tokens), false);
  return ibp::nn::argmax<T>(tr.logits.data());
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testing_support
