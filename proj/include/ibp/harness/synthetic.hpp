#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "ibp/harness/data.hpp"

namespace ibp::harness {

/// Two-class character corpus with a one-alternative-per-letter typo table.
///
/// Letters are paired (a-b, c-d, ..., y-z) and each letter's only typo is its
/// partner. Class 0 sentences carry cue letters from {a, c} and class 1 from
/// {e, g}; the partners b, d, f, h never occur in clean text. The remaining
/// characters are filler words over i..z separated by spaces, drawn
/// identically for both classes.
struct SyntheticOptions {
  std::size_t train_size = 2000;
  std::size_t validation_size = 300;
  std::size_t test_size = 300;
  std::size_t min_length = 16;
  std::size_t max_length = 20;
  std::size_t cues = 3;
  std::uint64_t seed = 0;
};

struct SyntheticTask {
  Dataset train, validation, test;
  std::string typo_table;  // substitution-file text
};

SyntheticTask make_synthetic_task(const SyntheticOptions& options);

/// Inverse of load_dataset: `label<TAB>text` lines.
std::string format_dataset(const Dataset& data);

/// Writes train.tsv, validation.tsv, test.tsv and typos.tsv into `dir`.
void write_synthetic_task(const SyntheticTask& task, const std::filesystem::path& dir);

}  // namespace ibp::harness
