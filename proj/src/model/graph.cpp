#include "etpot/model/graph.h"

#include <numbers>
#include <string>

#include "etpot/core/elements.h"

namespace etpot::model {

using namespace etpot::ad;

GraphBatch make_batch(std::span<const geom::AtomicSystem* const> systems,
                      const ModelConfig& config) {
  GraphBatch b;
  std::vector<std::size_t> molecule, first, second;
  b.atom_offset.push_back(0);
  for (std::size_t m = 0; m < systems.size(); ++m) {
    const auto& s = *systems[m];
    s.validate();
    const std::size_t base = b.atoms();
    for (std::size_t a = 0; a < s.size(); ++a) {
      const int z = s.atomic_numbers[a];
      if (z <= 0 || static_cast<std::size_t>(z) >= config.max_z) {
        throw std::invalid_argument("atomic number " + std::to_string(z) +
                                    " outside the embedding table");
      }
      b.atomic_numbers.push_back(z);
      b.positions.push_back(s.positions[a]);
      b.masses.push_back(atomic_mass(z).value());
      molecule.push_back(m);
    }
    const auto table = geom::build_neighbor_table(s, config.cutoff);
    for (std::size_t k = 0; k < table.size(); ++k) {
      first.push_back(base + table.first[k]);
      second.push_back(base + table.second[k]);
    }
    b.atom_offset.push_back(b.atoms());
  }
  b.neighbor_pairs = first.size();
  if (config.self_attention) {
    for (std::size_t a = 0; a < b.atoms(); ++a) {
      first.push_back(a);
      second.push_back(a);
    }
  }
  b.molecule = make_index(std::move(molecule));
  b.first = make_index(std::move(first));
  b.second = make_index(std::move(second));
  return b;
}

GraphBatch make_batch(const geom::AtomicSystem& system, const ModelConfig& config) {
  const geom::AtomicSystem* one[] = {&system};
  return make_batch(one, config);
}

Var position_leaf(Tape& tape, const GraphBatch& batch, bool requires_grad) {
  std::vector<double> flat;
  flat.reserve(batch.atoms() * 3);
  for (const auto& p : batch.positions) flat.insert(flat.end(), p.begin(), p.end());
  return tape.leaf(Tensor({batch.atoms(), 3}, std::move(flat)), requires_grad);
}

Graph build_graph(Tape& tape, const GraphBatch& batch, Var positions, const ModelConfig& config) {
  const auto params = geom::init_rbf(config.num_rbf, config.cutoff);
  const std::size_t K = config.num_rbf;

  Graph g;
  g.batch = &batch;
  g.positions = positions;
  Var vec = sub(gather_rows(positions, batch.first), gather_rows(positions, batch.second));
  g.distance = l2_norm(vec, 1);
  g.direction = mul(vec, expand(safe_recip(g.distance), 1, 3));
  // All stored pairs satisfy d <= cutoff, so the cosine branch alone applies.
  g.cutoff = affine(cos(scale(g.distance, std::numbers::pi / config.cutoff)), 0.5, 0.5);

  std::vector<double> neg_beta(K);
  for (std::size_t k = 0; k < K; ++k) neg_beta[k] = -params.widths[k];
  Var mu = tape.constant(Tensor::vector(params.centers));
  Var nb = tape.constant(Tensor::vector(std::move(neg_beta)));
  Var shifted = sub(expand(exp(neg(g.distance)), 1, K), mu);
  g.rbf = mul(exp(mul(square(shifted), nb)), expand(g.cutoff, 1, K));
  return g;
}

}  // namespace etpot::model
