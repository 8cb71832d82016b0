#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ibp/nn.hpp"

namespace ibp::harness {

enum class Level { Word, Character };

const char* to_string(Level level);
Level parse_level(const std::string& name);

/// Word level splits on ASCII whitespace; character level yields one UTF-8
/// code point per token.
std::vector<std::string> tokenize(std::string_view text, Level level);

/// ASCII lowercasing; other bytes pass through unchanged.
std::string lowercase(std::string_view text);

/// Token <-> id map. Ids 0 and 1 are reserved for padding and out-of-vocabulary
/// tokens; neither is ever perturbed.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary();

  /// Returns the existing id when the token is already present.
  TokenId add(const std::string& token);
  std::optional<TokenId> find(std::string_view token) const;
  /// kUnk for unknown tokens.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace ibp::harness
