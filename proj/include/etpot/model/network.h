#pragma once

#include <cstddef>
#include <vector>

#include "etpot/ad/tape.h"
#include "etpot/geom/geometry.h"
#include "etpot/model/config.h"
#include "etpot/model/graph.h"
#include "etpot/model/parameters.h"

namespace etpot::model {

/// Parameters placed on a tape, looked up by name.
class BoundParameters {
 public:
  BoundParameters(ad::Tape& tape, const ParameterSet& params, bool trainable);
  ad::Var operator[](const std::string& name) const { return vars_[params_->index_of(name)]; }
  const std::vector<ad::Var>& vars() const noexcept { return vars_; }

 private:
  const ParameterSet* params_;
  std::vector<ad::Var> vars_;
};

/// x: (N, F) scalar features, v: (N, 3, F) vector features.
struct FeatureState {
  ad::Var x;
  ad::Var v;
};

struct AttentionOutput {
  ad::Var y;        // (N, 3F), or (N, F) without vector features
  ad::Var s1;       // (P, F) per-pair vector filter; invalid without vector features
  ad::Var s2;       // (P, F) per-pair direction filter; invalid without vector features
  ad::Var weights;  // (P, H) post-activation, post-cutoff attention
};

struct GatedOutput {
  ad::Var x;  // (N, out)
  ad::Var v;  // (N, 3, out)
};

/// sum_j embed_nbh(z_j) * (W^F e_rbf(d_ij)) over neighbor pairs: (N, F).
ad::Var neighborhood_embedding(const Graph& graph, const BoundParameters& p,
                               const ModelConfig& config);

/// Initial features; v is an exact zero constant.
FeatureState embed(const Graph& graph, const BoundParameters& p, const ModelConfig& config);

/// Modified multi-head attention of update layer `layer`; normalizes x first.
AttentionOutput attention_block(ad::Var x, const Graph& graph, const BoundParameters& p,
                                std::size_t layer, const ModelConfig& config);

/// Residual update: returns state + (dx, dv). `attention` receives the layer's
/// attention weights when non-null.
FeatureState update_layer(const FeatureState& state, const Graph& graph, const BoundParameters& p,
                          std::size_t layer, const ModelConfig& config,
                          ad::Var* attention = nullptr);

/// Output block `block` (0 or 1) of the output network.
GatedOutput gated_equivariant_block(ad::Var x, ad::Var v, const BoundParameters& p,
                                    std::size_t block, bool scalar_activation);

struct ForwardPass {
  FeatureState features;            // after the last update layer
  ad::Var atom_scalar;              // (N) output-network scalars
  ad::Var atom_vector;              // (N, 3) output-network vectors
  ad::Var prediction;               // (M) one value per molecule, per the output head
  std::vector<ad::Var> attention;   // (P, H) per update layer
};

ForwardPass forward(const Graph& graph, const BoundParameters& p, const ModelConfig& config);

/// Per-atom positions relative to their molecule's center of mass: (N, 3).
ad::Var center_of_mass_offsets(const Graph& graph);

/// Dense N x N attention of one head, one layer, for one molecule.
struct AttentionRecord {
  std::size_t layer = 0;
  std::size_t head = 0;
  std::size_t atoms = 0;
  std::vector<double> matrix;  // row-major; (i, j) = weight of i attending j

  double at(std::size_t i, std::size_t j) const { return matrix[i * atoms + j]; }
};

/// Scatters pair-level weights of every layer and head into dense matrices for
/// molecule `m` of the batch.
std::vector<AttentionRecord> attention_records(const GraphBatch& batch,
                                               const std::vector<ad::Tensor>& per_layer,
                                               std::size_t m);

/// Configuration plus parameters. Immutable; evaluation is thread-safe.
class Model {
 public:
  Model(ModelConfig config, ParameterSet params);
  static Model initialize(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  const ParameterSet& parameters() const noexcept { return params_; }

  struct Output {
    double value = 0.0;                 // energy, dipole magnitude or spatial extent
    std::vector<geom::Vec3> forces;     // filled when requested
    std::vector<AttentionRecord> attention;
  };
  Output evaluate(const geom::AtomicSystem& system, bool forces, bool attention) const;

 private:
  ModelConfig config_;
  ParameterSet params_;
};

struct EnergyResult {
  double energy = 0.0;
  std::vector<AttentionRecord> records;
};

struct ForceResult {
  double energy = 0.0;
  std::vector<geom::Vec3> forces;
};

/// Require the matching output head; throw std::invalid_argument otherwise.
EnergyResult predict_energy(const geom::AtomicSystem& system, const ParameterSet& params,
                            const ModelConfig& config);
ForceResult predict_forces(const geom::AtomicSystem& system, const ParameterSet& params,
                           const ModelConfig& config);
double predict_dipole(const geom::AtomicSystem& system, const ParameterSet& params,
                      const ModelConfig& config);
double predict_spatial_extent(const geom::AtomicSystem& system, const ParameterSet& params,
                              const ModelConfig& config);

}  // namespace etpot::model
