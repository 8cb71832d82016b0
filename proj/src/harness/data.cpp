#include "ibp/harness/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <unordered_map>

namespace ibp::harness {

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, Level level,
                     const DatasetOptions& options) {
  Dataset data;
  data.level = level;
  data.split = options.split;
  for_each_line(path, [&](std::size_t line, std::string_view text) {
    const auto tab = text.find('\t');
    if (tab == std::string_view::npos) throw InputError(path, line, "expected label<TAB>text");
    const auto label_text = text.substr(0, tab);
    std::size_t label = 0;
    const auto [ptr, ec] =
        std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
    if (ec != std::errc() || ptr != label_text.data() + label_text.size())
      throw InputError(path, line, "malformed label '" + std::string(label_text) + "'");
    if (label >= options.class_count)
      throw InputError(path, line,
                       "unknown label " + std::to_string(label) + " (class count " +
                           std::to_string(options.class_count) + ")");
    RawExample ex;
    ex.label = label;
    const auto body = text.substr(tab + 1);
    if (level == Level::Character) {
      ex.tokens = tokenize(lowercase(body), level);
      if (options.char_limit > 0 && ex.tokens.size() > options.char_limit)
        ex.tokens.resize(options.char_limit);
    } else {
      ex.tokens = tokenize(body, level);
    }
    if (ex.tokens.empty()) throw InputError(path, line, "empty text");
    data.examples.push_back(std::move(ex));
  });
  if (data.examples.empty()) throw InputError(path, "no examples");
  return data;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, std::size_t expected_dim,
                                const WarningSink& warn) {
  if (expected_dim == 0) throw std::invalid_argument("embedding dimension must be positive");
  EmbeddingMatrix out;
  std::vector<float> rows(2 * expected_dim, 0.0f);
  std::unordered_map<std::string, std::size_t> first_line;
  for_each_line(path, [&](std::size_t line, std::string_view text) {
    const auto fields = split_ws(text);
    if (fields.empty()) return;
    if (fields.size() != expected_dim + 1)
      throw InputError(path, line,
                       "expected " + std::to_string(expected_dim) + " values, found " +
                           std::to_string(fields.size() - 1));
    const std::string token(fields[0]);
    std::vector<float> v(expected_dim);
    for (std::size_t c = 0; c < expected_dim; ++c) {
      const auto f = fields[c + 1];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v[c]);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v[c]))
        throw InputError(path, line, "malformed value '" + std::string(f) + "'");
    }
    std::size_t row = 0;
    if (auto existing = out.vocab.find(token)) {
      row = *existing;
      if (row < 2) throw InputError(path, line, "reserved token '" + token + "'");
      warn(path.string() + ":" + std::to_string(line) + ": duplicate token '" + token +
           "' (first on line " + std::to_string(first_line[token]) + "); keeping the last vector");
    } else {
      row = out.vocab.add(token);
      first_line[token] = line;
      rows.resize(rows.size() + expected_dim);
    }
    std::copy(v.begin(), v.end(), rows.begin() + std::ptrdiff_t(row * expected_dim));
  });
  if (out.vocab.size() == 2) throw InputError(path, "no embeddings");
  out.matrix = Tensor<float>({out.vocab.size(), expected_dim}, std::move(rows));
  return out;
}

Vocabulary build_char_vocabulary(const Dataset& train) {
  Vocabulary v;
  for (char c = 'a'; c <= 'z'; ++c) v.add(std::string(1, c));
  for (char c = '0'; c <= '9'; ++c) v.add(std::string(1, c));
  v.add(" ");
  std::set<std::string> rest;
  for (const auto& ex : train.examples)
    for (const auto& t : ex.tokens)
      if (!v.find(t)) rest.insert(t);
  for (const auto& t : rest) v.add(t);
  return v;
}

perturb::SubstitutionTable load_substitutions(const std::filesystem::path& path,
                                              const Vocabulary& vocab, const WarningSink& warn) {
  perturb::SubstitutionTable table;
  for_each_line(path, [&](std::size_t line, std::string_view text) {
    if (const auto hash = text.find('#'); hash != std::string_view::npos)
      text = text.substr(0, hash);
    if (split_ws(text).empty()) return;
    const auto tab = text.find('\t');
    if (tab == std::string_view::npos)
      throw InputError(path, line, "expected token<TAB>replacements");
    const std::string source(text.substr(0, tab));
    if (source.empty()) throw InputError(path, line, "empty source token");
    const auto from = vocab.find(source);
    if (!from || *from < 2) {
      warn(path.string() + ":" + std::to_string(line) + ": source token '" + source +
           "' not in vocabulary; line skipped");
      return;
    }
    for (auto r : split_ws(text.substr(tab + 1))) {
      const auto to = vocab.find(r);
      if (!to || *to < 2) {
        warn(path.string() + ":" + std::to_string(line) + ": replacement '" + std::string(r) +
             "' not in vocabulary; dropped");
        continue;
      }
      table.add(*from, *to);
    }
  });
  return table;
}

std::vector<TokenId> encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                                   std::size_t min_length) {
  std::vector<TokenId> ids;
  ids.reserve(std::max(tokens.size(), min_length));
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  while (ids.size() < min_length) ids.push_back(Vocabulary::kPad);
  return ids;
}

std::vector<Example> encode(const Dataset& data, const Vocabulary& vocab, std::size_t min_length) {
  std::vector<Example> out;
  out.reserve(data.size());
  for (const auto& ex : data.examples)
    out.push_back({encode_tokens(ex.tokens, vocab, min_length), ex.label});
  return out;
}

}  // namespace ibp::harness
