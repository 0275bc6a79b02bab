#pragma once

#include <vector>

#include "etpot/geom/geometry.h"
#include "etpot/model/config.h"
#include "etpot/model/parameters.h"

namespace etpot::testing {

// Straight loop transcription of the forward pass over all N x N atom pairs,
// masked only by the cosine cutoff. Shares no code with the tape model.
struct DenseResult {
  double value = 0.0;
  std::vector<std::vector<double>> x_embed;              // N x F
  std::vector<std::vector<double>> neighborhood;         // N x F
  std::vector<std::vector<double>> x_final;              // N x F
  std::vector<std::vector<std::vector<double>>> v_final;  // N x 3 x F
  std::vector<double> atom_scalar;                       // N
  // attention[layer][head][i * N + j]
  std::vector<std::vector<std::vector<double>>> attention;
};

DenseResult dense_forward(const geom::AtomicSystem& system, const model::ParameterSet& params,
                          const model::ModelConfig& config);

}  // namespace etpot::testing
