#include "ibp/attack.hpp"

#include <vector>

namespace ibp::attack {

template <typename T>
AttackResult hotflip(const nn::Network<T>& net, const perturb::PerturbationSet& pset,
                     std::size_t label) {
  const Tensor<T>& table = net.embedding_table();
  const std::size_t d = net.input_dim;

  AttackResult res;
  res.tokens = pset.original;
  auto trace = nn::forward_tokens(net, std::span<const TokenId>(res.tokens), true);
  ++res.forward_passes;
  std::vector<T> glogits(trace.logits.size());
  T loss = nn::cross_entropy_grad<T>(trace.logits.data(), label, glogits);
  res.clean_loss = double(loss);
  res.clean_prediction = nn::argmax<T>(trace.logits.data());
  std::size_t pred = res.clean_prediction;
  std::vector<bool> flipped(pset.original.size(), false);

  for (std::size_t round = 0; round < pset.delta && pred == label; ++round) {
    const Tensor<T> g = nn::input_gradient<T>(net, trace, glogits);
    std::size_t best = pset.elems.size();
    T best_score = T{0};
    for (std::size_t m = 0; m < pset.elems.size(); ++m) {
      const auto& e = pset.elems[m];
      if (flipped[e.position]) continue;
      auto gp = g.row(e.position);
      auto to = table.row(e.replacement);
      auto from = table.row(res.tokens[e.position]);
      T score = T{0};
      for (std::size_t c = 0; c < d; ++c) score += gp[c] * (to[c] - from[c]);
      if (score > best_score) {
        best_score = score;
        best = m;
      }
    }
    if (best == pset.elems.size()) break;

    const auto& e = pset.elems[best];
    const TokenId previous = res.tokens[e.position];
    res.tokens[e.position] = e.replacement;
    auto next = nn::forward_tokens(net, std::span<const TokenId>(res.tokens), true);
    ++res.forward_passes;
    std::vector<T> gnext(next.logits.size());
    const T next_loss = nn::cross_entropy_grad<T>(next.logits.data(), label, gnext);
    if (!(next_loss > loss)) {
      res.tokens[e.position] = previous;
      break;
    }
    flipped[e.position] = true;
    res.flips.push_back(e);
    loss = next_loss;
    trace = std::move(next);
    glogits = std::move(gnext);
    pred = nn::argmax<T>(trace.logits.data());
  }
  res.loss = double(loss);
  res.prediction = pred;
  res.prediction_changed = pred != res.clean_prediction;
  return res;
}

template AttackResult hotflip<float>(const nn::Network<float>&, const perturb::PerturbationSet&,
                                     std::size_t);
template AttackResult hotflip<double>(const nn::Network<double>&, const perturb::PerturbationSet&,
                                      std::size_t);

}  // namespace ibp::attack
