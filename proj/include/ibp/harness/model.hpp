#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ibp/nn.hpp"

namespace ibp::harness {

struct LayerSpec {
  nn::LayerKind kind = nn::LayerKind::Relu;
  std::size_t out = 0;
  std::size_t width = 0;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Architecture descriptor, written as space-separated fields:
///   vocab=V embed=D conv=OxW relu avgpool linear=N ...   (owned, trainable table)
///   input=D conv=OxW relu avgpool linear=N ...           (external frozen table)
struct ArchSpec {
  std::size_t vocab = 0;
  std::size_t embed = 0;
  std::size_t input = 0;
  std::vector<LayerSpec> layers;  // after the embedding lookup

  bool owns_embedding() const noexcept { return vocab > 0; }
  std::size_t input_dim() const noexcept { return owns_embedding() ? embed : input; }
  std::size_t class_count() const;
  std::string to_string() const;
  /// Throws std::invalid_argument naming the offending field.
  static ArchSpec parse(const std::string& descriptor);
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

/// sst-word, sst-char, ag-char.
const std::vector<std::string>& architecture_names();

/// Expands a named architecture; `vocab_size` sizes character tables and
/// `input_dim` is the external embedding width of word models.
ArchSpec named_architecture(const std::string& name, std::size_t vocab_size, std::size_t input_dim);

/// Accepts either a name or a descriptor (anything containing '='). A
/// descriptor may leave out vocab= (when it sets embed=) or input= (when it sets
/// neither); the given sizes fill them in.
ArchSpec resolve_architecture(const std::string& name_or_descriptor, std::size_t vocab_size,
                              std::size_t input_dim);

/// Zero-initialised network with the given structure.
template <typename T>
nn::Network<T> build_network(const ArchSpec& spec);

/// Resolves, builds and Glorot-initialises.
template <typename T>
nn::Network<T> build_model(const std::string& name_or_descriptor, std::size_t vocab_size,
                           std::size_t input_dim, std::uint64_t seed);

template <typename T>
ArchSpec describe(const nn::Network<T>& net);

}  // namespace ibp::harness
