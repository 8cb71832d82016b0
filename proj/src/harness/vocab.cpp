#include "ibp/harness/vocab.hpp"

#include <stdexcept>

namespace ibp::harness {

const char* to_string(Level level) { return level == Level::Word ? "word" : "char"; }

Level parse_level(const std::string& name) {
  if (name == "word") return Level::Word;
  if (name == "char" || name == "character") return Level::Character;
  throw std::invalid_argument("unknown level '" + name + "' (expected word or char)");
}

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::size_t codepoint_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // stray continuation byte: keep it as its own token
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, Level level) {
  std::vector<std::string> out;
  if (level == Level::Word) {
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && is_space(text[i])) ++i;
      std::size_t j = i;
      while (j < text.size() && !is_space(text[j])) ++j;
      if (j > i) out.emplace_back(text.substr(i, j - i));
      i = j;
    }
  } else {
    for (std::size_t i = 0; i < text.size();) {
      const std::size_t n =
          std::min(codepoint_length(static_cast<unsigned char>(text[i])), text.size() - i);
      out.emplace_back(text.substr(i, n));
      i += n;
    }
  }
  return out;
}

std::string lowercase(std::string_view text) {
  std::string s(text);
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c = char(c - 'A' + 'a');
  return s;
}

Vocabulary::Vocabulary() {
  add(kPadToken);
  add(kUnkToken);
}

TokenId Vocabulary::add(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  const TokenId id = TokenId(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
  return std::nullopt;
}

TokenId Vocabulary::id(std::string_view token) const { return find(token).value_or(kUnk); }

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken)
    throw std::invalid_argument("vocabulary must start with the padding and unknown tokens");
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.find(tokens[i]))
      throw std::invalid_argument("duplicate vocabulary token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

}  // namespace ibp::harness
