#pragma once

#include <cstddef>
#include <vector>

#include "ibp/nn.hpp"
#include "ibp/perturb.hpp"

namespace ibp::attack {

struct AttackResult {
  std::vector<TokenId> tokens;
  std::vector<perturb::Substitution> flips;  // in the order they were accepted
  double clean_loss = 0;
  double loss = 0;
  std::size_t clean_prediction = 0;
  std::size_t prediction = 0;
  bool prediction_changed = false;
  std::size_t forward_passes = 0;
};

/// Greedy HotFlip within the perturbation set's budget.
///
/// Each round scores every elementary perturbation at a not-yet-flipped
/// position by g[pos] . (e_replacement - e_current[pos]), g being the loss
/// gradient with respect to the embedded input, and applies the best strictly
/// positive one (lowest index on ties). The true loss is then re-evaluated; a
/// flip that does not increase it is reverted and the search stops. The search
/// also stops once the prediction differs from `label`.
template <typename T>
AttackResult hotflip(const nn::Network<T>& net, const perturb::PerturbationSet& pset,
                     std::size_t label);

}  // namespace ibp::attack
