#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ibp/example.hpp"
#include "ibp/harness/config.hpp"
#include "ibp/harness/data.hpp"
#include "ibp/nn.hpp"
#include "ibp/perturb.hpp"
#include "ibp/verify.hpp"
#include "json.hpp"

namespace ibp::harness {

/// Everything a run needs once files are read: vocabulary, substitution table
/// and (for word models) the frozen embedding matrix.
struct Resources {
  Vocabulary vocab;
  perturb::SubstitutionTable table;
  Tensor<float> frozen_embeddings;  // empty for character models
};

/// Character level: vocabulary from the training split. Word level:
/// vocabulary and matrix from the embeddings file.
Resources load_resources(const ExperimentConfig& cfg, const WarningSink& warn = warn_stderr);

Dataset load_split(const ExperimentConfig& cfg, const std::filesystem::path& path,
                   const std::string& split);

/// Fresh, initialised network for the configured architecture.
nn::Network<float> make_network(const ExperimentConfig& cfg, const Resources& res);

/// Metadata stored with a checkpoint (vocabulary, level, resolved config).
nlohmann::json checkpoint_metadata(const ExperimentConfig& cfg, const Resources& res);

/// Rebuilds the vocabulary and table for a loaded checkpoint.
Resources resources_from_metadata(const nlohmann::json& metadata, const ExperimentConfig& cfg,
                                  const WarningSink& warn = warn_stderr);

std::string decode(std::span<const TokenId> tokens, const Vocabulary& vocab, Level level);

/// Header plus one row per summary.
std::string metrics_csv(std::span<const verify::MetricsSummary> rows);
std::string curve_csv(std::span<const verify::CurvePoint> curve, std::uint64_t ibp_cost);
nlohmann::json report_json(const verify::ExampleReport& r, const Vocabulary& vocab, Level level);

}  // namespace ibp::harness
