#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ibp/harness/vocab.hpp"
#include "ibp/train.hpp"
#include "ibp/verify.hpp"
#include "json.hpp"

namespace ibp::harness {

/// Experiment configuration. Relative paths resolve against the directory of
/// the file they were read from.
struct ExperimentConfig {
  train::TrainConfig train;
  std::string architecture = "sst-char";
  Level level = Level::Character;
  std::size_t class_count = 2;
  std::filesystem::path train_path, validation_path, test_path;
  std::filesystem::path embeddings_path;  // word level only
  std::size_t embed_dim = 300;            // width of the embeddings file
  std::filesystem::path substitutions_path;
  std::filesystem::path checkpoint_path;
  std::size_t delta = 1;  // evaluation budget
  std::vector<std::size_t> deltas = {1, 2, 3};
  std::size_t char_limit = 300;
  std::uint64_t oracle_budget = verify::kDefaultOracleBudget;
  std::uint64_t seed = 0;
};

/// Every key is optional; unknown keys and ill-typed values are errors.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace ibp::harness
