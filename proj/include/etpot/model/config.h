#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "etpot/core/keyvalue.h"

namespace etpot::model {

enum class OutputHead { ScalarEnergy, Dipole, SpatialExtent };

/// How the first atom representation is produced.
///   Full:             intrinsic + distance-filtered neighbor embedding
///   PlainEmbedding:   atom-type embedding only
///   ExtraUpdateLayer: atom-type embedding followed by one more update layer
enum class NeighborEmbeddingMode { Full, PlainEmbedding, ExtraUpdateLayer };

std::string to_string(OutputHead head);
std::string to_string(NeighborEmbeddingMode mode);
/// Accept the names produced by to_string; throw std::invalid_argument otherwise.
OutputHead parse_output_head(std::string_view text);
NeighborEmbeddingMode parse_neighbor_embedding_mode(std::string_view text);

struct ModelConfig {
  std::size_t num_layers = 6;
  std::size_t feature_dim = 128;
  std::size_t num_rbf = 32;
  std::size_t num_heads = 8;
  double cutoff = 5.0;
  OutputHead output_head = OutputHead::ScalarEnergy;
  bool equivariance = true;
  NeighborEmbeddingMode neighbor_embedding = NeighborEmbeddingMode::Full;
  bool derivative_forces = true;
  /// Adds i == i pairs (zero distance, zero direction) to attention.
  bool self_attention = false;
  /// Embedding tables are indexed directly by atomic number.
  std::size_t max_z = 100;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;

  /// Update layers actually built (one extra in ExtraUpdateLayer mode).
  std::size_t update_layers() const;
  /// Width of the value pathway and of the attention output: 3F with vector
  /// features, F without.
  std::size_t value_dim() const { return equivariance ? 3 * feature_dim : feature_dim; }
  std::size_t head_dim() const { return feature_dim / num_heads; }

  bool operator==(const ModelConfig&) const = default;
};

/// Keys: model.layers, model.features, model.rbf, model.heads, model.cutoff,
/// model.head, model.equivariance, model.neighbor_embedding,
/// model.derivative_forces, model.self_attention, model.max_z.
void write_config(const ModelConfig& config, KeyValueConfig& out);
ModelConfig read_config(const KeyValueConfig& in, const ModelConfig& defaults = {});

}  // namespace etpot::model
