#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "ibp/nn.hpp"
#include "json.hpp"

namespace ibp::harness {

/// Binary layout, all integers little-endian:
///   8 bytes   magic "IBPCKPT\0"
///   u32       format version
///   u32 + N   architecture descriptor (UTF-8)
///   u32 + N   metadata JSON (vocabulary, level, resolved config, seed)
///   u32       tensor count, then per tensor:
///     u32 + N name ("layer<k>.weight", "layer<k>.bias", "frozen_embeddings")
///     u32     rank, then rank x u64 dims
///     f32 x prod(dims) row-major data
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::string architecture;
  nlohmann::json metadata;
  nn::Network<float> net;
};

void save_checkpoint(const std::filesystem::path& path, const nn::Network<float>& net,
                     const nlohmann::json& metadata);

/// Rejects bad magic, other versions, truncation and, when given, a different
/// architecture descriptor. Nothing is returned on failure.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<std::string>& expected_architecture = std::nullopt);

}  // namespace ibp::harness
