#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "ibp/example.hpp"
#include "ibp/harness/io.hpp"
#include "ibp/harness/vocab.hpp"
#include "ibp/perturb.hpp"
#include "ibp/tensor.hpp"

namespace ibp::harness {

struct RawExample {
  std::size_t label = 0;
  std::vector<std::string> tokens;
};

struct Dataset {
  std::vector<RawExample> examples;
  Level level = Level::Word;
  std::string split;
  std::size_t size() const noexcept { return examples.size(); }
};

struct DatasetOptions {
  std::size_t class_count = 2;
  std::size_t char_limit = 0;  // 0 keeps whole texts
  std::string split = "train";
};

/// Reads `label<TAB>text` lines. Character-level text is lowercased and cut to
/// `char_limit` characters. Blank lines, bad labels and empty texts are errors
/// naming the line, as is an empty file.
Dataset load_dataset(const std::filesystem::path& path, Level level, const DatasetOptions& options);

struct EmbeddingMatrix {
  Vocabulary vocab;
  Tensor<float> matrix;  // (vocab.size(), dim); padding and unknown rows are zero
  std::size_t dim() const noexcept { return matrix.rank() == 2 ? matrix.dim(1) : 0; }
};

/// Reads `token v1 ... vd` lines. A repeated token keeps its last vector and
/// triggers a warning.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, std::size_t expected_dim,
                                const WarningSink& warn = warn_stderr);

/// Letters, digits and space, followed by every other character seen in
/// `train`, in code-unit order.
Vocabulary build_char_vocabulary(const Dataset& train);

/// Reads `token<TAB>r1 r2 ...` lines; `#` starts a comment. Unknown source
/// tokens and replacements are dropped with a warning.
perturb::SubstitutionTable load_substitutions(const std::filesystem::path& path,
                                              const Vocabulary& vocab,
                                              const WarningSink& warn = warn_stderr);

/// Maps tokens to ids and right-pads with the padding id up to `min_length`.
std::vector<Example> encode(const Dataset& data, const Vocabulary& vocab, std::size_t min_length);
std::vector<TokenId> encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                                   std::size_t min_length);

}  // namespace ibp::harness
