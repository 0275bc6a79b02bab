#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "etpot/ad/tape.h"
#include "etpot/geom/geometry.h"
#include "etpot/model/config.h"

namespace etpot::model {

/// Several molecules packed into one disconnected graph. Atoms are
/// concatenated; pair indices are global. Neighbor pairs come first, molecule
/// by molecule, followed by self pairs when self-attention is on.
struct GraphBatch {
  std::vector<int> atomic_numbers;
  std::vector<geom::Vec3> positions;
  std::vector<double> masses;
  /// atom_offset[m] is the first atom of molecule m; size molecules + 1.
  std::vector<std::size_t> atom_offset;
  ad::Index molecule;  // per atom
  ad::Index first;     // receiving atom i per pair
  ad::Index second;    // neighbor j per pair
  std::size_t neighbor_pairs = 0;

  std::size_t atoms() const noexcept { return atomic_numbers.size(); }
  std::size_t molecules() const noexcept { return atom_offset.empty() ? 0 : atom_offset.size() - 1; }
  std::size_t pairs() const noexcept { return first ? first->size() : 0; }
};

/// Validates every system and atomic number against the config.
GraphBatch make_batch(std::span<const geom::AtomicSystem* const> systems, const ModelConfig& config);
GraphBatch make_batch(const geom::AtomicSystem& system, const ModelConfig& config);

/// Pair geometry recorded on a tape so everything downstream is
/// differentiable in the positions.
struct Graph {
  const GraphBatch* batch = nullptr;
  ad::Var positions;  // (N, 3)
  ad::Var distance;   // (P)
  ad::Var direction;  // (P, 3), zero for self pairs
  ad::Var cutoff;     // (P)  cosine cutoff
  ad::Var rbf;        // (P, K)
};

/// `positions` must be an (N, 3) Var holding batch.positions.
Graph build_graph(ad::Tape& tape, const GraphBatch& batch, ad::Var positions,
                  const ModelConfig& config);

/// Leaf for batch.positions.
ad::Var position_leaf(ad::Tape& tape, const GraphBatch& batch, bool requires_grad);

}  // namespace etpot::model
