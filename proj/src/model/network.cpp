#include "etpot/model/network.h"

#include <stdexcept>

namespace etpot::model {

using namespace etpot::ad;

namespace {

Var linear(Var x, Var w, Var b) {
  Var y = matmul(x, w);
  return b.valid() ? add(y, b) : y;
}

// Applies w over the feature axis of an (N, 3, F) tensor.
Var linear_vector(Var v, Var w) {
  const std::size_t n = v.dim(0);
  Var y = matmul(reshape(v, {n * 3, v.dim(2)}), w);
  return reshape(y, {n, 3, w.dim(1)});
}

Var normalized(Var x, const BoundParameters& p, const std::string& name) {
  return add(mul(layer_norm(x), p[name + ".gamma"]), p[name + ".beta"]);
}

Index atom_types(const GraphBatch& batch) {
  std::vector<std::size_t> z(batch.atomic_numbers.begin(), batch.atomic_numbers.end());
  return make_index(std::move(z));
}

}  // namespace

BoundParameters::BoundParameters(Tape& tape, const ParameterSet& params, bool trainable)
    : params_(&params) {
  vars_.reserve(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    vars_.push_back(tape.leaf(params.at(k), trainable));
  }
}

Var neighborhood_embedding(const Graph& graph, const BoundParameters& p, const ModelConfig&) {
  const GraphBatch& b = *graph.batch;
  const std::size_t np = b.neighbor_pairs;
  Var rbf = np == b.pairs() ? graph.rbf : slice(graph.rbf, 0, 0, np);
  Var filter = matmul(rbf, p["embedding.filter.weight"]);
  Index neighbor_types;
  {
    std::vector<std::size_t> z(np);
    for (std::size_t k = 0; k < np; ++k) z[k] = b.atomic_numbers[(*b.second)[k]];
    neighbor_types = make_index(std::move(z));
  }
  Index receivers = b.first;
  if (np != b.pairs()) {
    receivers = make_index(std::vector<std::size_t>(b.first->begin(), b.first->begin() + np));
  }
  Var messages = mul(gather_rows(p["embedding.neighbor"], neighbor_types), filter);
  return scatter_add_rows(messages, receivers, b.atoms());
}

FeatureState embed(const Graph& graph, const BoundParameters& p, const ModelConfig& config) {
  const GraphBatch& b = *graph.batch;
  Tape& tape = *graph.positions.tape();
  Var intrinsic = gather_rows(p["embedding.intrinsic"], atom_types(b));
  FeatureState s;
  if (config.neighbor_embedding == NeighborEmbeddingMode::Full) {
    Var n = neighborhood_embedding(graph, p, config);
    Var both[] = {intrinsic, n};
    s.x = linear(concat(both, 1), p["embedding.combine.weight"], p["embedding.combine.bias"]);
  } else {
    s.x = intrinsic;
  }
  s.v = tape.constant(Tensor::zeros({b.atoms(), 3, config.feature_dim}));
  return s;
}

AttentionOutput attention_block(Var x, const Graph& graph, const BoundParameters& p,
                                std::size_t layer, const ModelConfig& config) {
  const GraphBatch& b = *graph.batch;
  const std::string pre = "layers." + std::to_string(layer) + ".";
  const std::size_t N = b.atoms();
  const std::size_t P = b.pairs();
  const std::size_t F = config.feature_dim;
  const std::size_t H = config.num_heads;
  const std::size_t D = config.head_dim();
  const std::size_t parts = config.equivariance ? 3 : 1;

  Var xn = normalized(x, p, pre + "norm");
  Var q = linear(xn, p[pre + "query.weight"], p[pre + "query.bias"]);
  Var k = linear(xn, p[pre + "key.weight"], p[pre + "key.bias"]);
  Var val = linear(xn, p[pre + "value.weight"], p[pre + "value.bias"]);
  Var dk = silu(linear(graph.rbf, p[pre + "filter_key.weight"], p[pre + "filter_key.bias"]));
  Var dv = silu(linear(graph.rbf, p[pre + "filter_value.weight"], p[pre + "filter_value.bias"]));

  Var qkd = mul(mul(gather_rows(q, b.first), gather_rows(k, b.second)), dk);
  Var dot = sum(reshape(qkd, {P, H, D}), 2);

  AttentionOutput out;
  out.weights = mul(silu(dot), expand(graph.cutoff, 1, H));

  Var values = reshape(mul(gather_rows(val, b.second), dv), {P, H, parts * D});
  Var s3 = values;
  if (config.equivariance) {
    out.s1 = reshape(slice(values, 2, 0, D), {P, F});
    out.s2 = reshape(slice(values, 2, D, D), {P, F});
    s3 = slice(values, 2, 2 * D, D);
  }
  Var weighted = reshape(mul(s3, expand(out.weights, 2, D)), {P, F});
  Var aggregated = scatter_add_rows(weighted, b.first, N);
  out.y = linear(aggregated, p[pre + "out.weight"], p[pre + "out.bias"]);
  return out;
}

FeatureState update_layer(const FeatureState& state, const Graph& graph, const BoundParameters& p,
                          std::size_t layer, const ModelConfig& config, Var* attention) {
  const GraphBatch& b = *graph.batch;
  const std::size_t N = b.atoms();
  const std::size_t F = config.feature_dim;
  AttentionOutput att = attention_block(state.x, graph, p, layer, config);
  if (attention) *attention = att.weights;

  FeatureState next;
  if (!config.equivariance) {
    next.x = add(state.x, att.y);
    next.v = state.v;
    return next;
  }

  const std::string pre = "layers." + std::to_string(layer) + ".";
  Var q1 = slice(att.y, 1, 0, F);
  Var q2 = slice(att.y, 1, F, F);
  Var q3 = slice(att.y, 1, 2 * F, F);
  Var u = linear_vector(state.v, p[pre + "vector.weight"]);
  Var u1 = slice(u, 2, 0, F);
  Var u2 = slice(u, 2, F, F);
  Var u3 = slice(u, 2, 2 * F, F);
  Var dx = add(q1, mul(q2, sum(mul(u1, u2), 1)));

  Var vj = gather_rows(state.v, b.second);
  Var directional = mul(expand(att.s2, 1, 3), expand(graph.direction, 2, F));
  Var message = add(mul(vj, expand(att.s1, 1, 3)), directional);
  // The cutoff keeps vector messages continuous as pairs leave the cutoff.
  message = mul(message, expand(expand(graph.cutoff, 1, 3), 2, F));
  Var w = scatter_add_rows(message, b.first, N);
  Var dv = add(w, mul(expand(q3, 1, 3), u3));

  next.x = add(state.x, dx);
  next.v = add(state.v, dv);
  return next;
}

GatedOutput gated_equivariant_block(Var x, Var v, const BoundParameters& p, std::size_t block,
                                    bool scalar_activation) {
  const std::string pre = "output." + std::to_string(block) + ".";
  Var norm = l2_norm(linear_vector(v, p[pre + "vector_norm.weight"]), 1);
  Var gated = linear_vector(v, p[pre + "vector_gate.weight"]);
  const std::size_t width = gated.dim(2);
  Var both[] = {x, norm};
  Var hidden = silu(linear(concat(both, 1), p[pre + "mlp_hidden.weight"], p[pre + "mlp_hidden.bias"]));
  Var out = linear(hidden, p[pre + "mlp_out.weight"], p[pre + "mlp_out.bias"]);
  GatedOutput r;
  r.x = slice(out, 1, 0, width);
  r.v = mul(expand(slice(out, 1, width, width), 1, 3), gated);
  if (scalar_activation) r.x = silu(r.x);
  return r;
}

Var center_of_mass_offsets(const Graph& graph) {
  const GraphBatch& b = *graph.batch;
  Tape& tape = *graph.positions.tape();
  const std::size_t M = b.molecules();
  std::vector<double> total(M, 0.0);
  for (std::size_t a = 0; a < b.atoms(); ++a) total[(*b.molecule)[a]] += b.masses[a];
  Var m = tape.constant(Tensor::vector(b.masses));
  Var weighted = scatter_add_rows(mul(graph.positions, expand(m, 1, 3)), b.molecule, M);
  Var com = div(weighted, expand(tape.constant(Tensor::vector(std::move(total))), 1, 3));
  return sub(graph.positions, gather_rows(com, b.molecule));
}

ForwardPass forward(const Graph& graph, const BoundParameters& p, const ModelConfig& config) {
  const GraphBatch& b = *graph.batch;
  const std::size_t N = b.atoms();
  const std::size_t M = b.molecules();
  ForwardPass out;
  FeatureState s = embed(graph, p, config);
  out.attention.resize(config.update_layers());
  for (std::size_t l = 0; l < config.update_layers(); ++l) {
    s = update_layer(s, graph, p, l, config, &out.attention[l]);
  }
  out.features = s;
  Var x = normalized(s.x, p, "out_norm");
  GatedOutput g0 = gated_equivariant_block(x, s.v, p, 0, true);
  GatedOutput g1 = gated_equivariant_block(g0.x, g0.v, p, 1, false);
  out.atom_scalar = reshape(g1.x, {N});
  out.atom_vector = reshape(g1.v, {N, 3});

  switch (config.output_head) {
    case OutputHead::ScalarEnergy:
      out.prediction = scatter_add_rows(out.atom_scalar, b.molecule, M);
      break;
    case OutputHead::Dipole: {
      Var rel = center_of_mass_offsets(graph);
      Var atomic = add(out.atom_vector, mul(rel, expand(out.atom_scalar, 1, 3)));
      out.prediction = l2_norm(scatter_add_rows(atomic, b.molecule, M), 1);
      break;
    }
    case OutputHead::SpatialExtent: {
      Var rel = center_of_mass_offsets(graph);
      Var r2 = sum(square(rel), 1);
      out.prediction = scatter_add_rows(mul(out.atom_scalar, r2), b.molecule, M);
      break;
    }
  }
  return out;
}

std::vector<AttentionRecord> attention_records(const GraphBatch& batch,
                                               const std::vector<Tensor>& per_layer,
                                               std::size_t m) {
  const std::size_t lo = batch.atom_offset.at(m);
  const std::size_t hi = batch.atom_offset.at(m + 1);
  const std::size_t n = hi - lo;
  std::vector<AttentionRecord> out;
  for (std::size_t l = 0; l < per_layer.size(); ++l) {
    const Tensor& w = per_layer[l];
    const std::size_t heads = w.dim(1);
    for (std::size_t h = 0; h < heads; ++h) {
      AttentionRecord r;
      r.layer = l;
      r.head = h;
      r.atoms = n;
      r.matrix.assign(n * n, 0.0);
      for (std::size_t k = 0; k < batch.pairs(); ++k) {
        const std::size_t i = (*batch.first)[k];
        if (i < lo || i >= hi) continue;
        const std::size_t j = (*batch.second)[k];
        r.matrix[(i - lo) * n + (j - lo)] = w[k * heads + h];
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

Model::Model(ModelConfig config, ParameterSet params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  check_parameters(params_, config_);
}

Model Model::initialize(const ModelConfig& config, std::uint64_t seed) {
  return Model(config, initialize_parameters(config, seed));
}

Model::Output Model::evaluate(const geom::AtomicSystem& system, bool forces,
                              bool attention) const {
  if (forces && !config_.derivative_forces) {
    throw std::invalid_argument("forces requested but derivative_forces is off");
  }
  const GraphBatch batch = make_batch(system, config_);
  Tape tape;
  BoundParameters p(tape, params_, false);
  Var pos = position_leaf(tape, batch, forces);
  Graph graph = build_graph(tape, batch, pos, config_);
  ForwardPass pass = forward(graph, p, config_);
  Output out;
  out.value = pass.prediction.value()[0];
  if (forces) {
    Var root = sum_all(pass.prediction);
    Var g = tape.grad(root, std::span<const Var>(&pos, 1))[0];
    const Tensor gv = g.value();
    out.forces.resize(batch.atoms());
    for (std::size_t a = 0; a < batch.atoms(); ++a) {
      for (int c = 0; c < 3; ++c) out.forces[a][c] = -gv[a * 3 + c];
    }
  }
  if (attention) {
    std::vector<Tensor> weights;
    for (const Var& w : pass.attention) weights.push_back(w.value());
    out.attention = attention_records(batch, weights, 0);
  }
  return out;
}

namespace {
void require_head(const ModelConfig& config, OutputHead head) {
  if (config.output_head != head) {
    throw std::invalid_argument("model is configured for the " + to_string(config.output_head) +
                                " head, not " + to_string(head));
  }
}
}  // namespace

EnergyResult predict_energy(const geom::AtomicSystem& system, const ParameterSet& params,
                            const ModelConfig& config) {
  require_head(config, OutputHead::ScalarEnergy);
  auto out = Model(config, params).evaluate(system, false, true);
  return {out.value, std::move(out.attention)};
}

ForceResult predict_forces(const geom::AtomicSystem& system, const ParameterSet& params,
                           const ModelConfig& config) {
  require_head(config, OutputHead::ScalarEnergy);
  auto out = Model(config, params).evaluate(system, true, false);
  return {out.value, std::move(out.forces)};
}

double predict_dipole(const geom::AtomicSystem& system, const ParameterSet& params,
                      const ModelConfig& config) {
  require_head(config, OutputHead::Dipole);
  return Model(config, params).evaluate(system, false, false).value;
}

double predict_spatial_extent(const geom::AtomicSystem& system, const ParameterSet& params,
                              const ModelConfig& config) {
  require_head(config, OutputHead::SpatialExtent);
  return Model(config, params).evaluate(system, false, false).value;
}

}  // namespace etpot::model
