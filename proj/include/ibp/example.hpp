#pragma once

#include <cstddef>
#include <vector>

#include "ibp/nn.hpp"

namespace ibp {

/// A tokenized, labelled sentence.
struct Example {
  std::vector<TokenId> tokens;
  std::size_t label = 0;
};

}  // namespace ibp
