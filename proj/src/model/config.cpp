#include "etpot/model/config.h"

#include <cstdio>

namespace etpot::model {

std::string to_string(OutputHead head) {
  switch (head) {
    case OutputHead::ScalarEnergy: return "scalar-energy";
    case OutputHead::Dipole: return "dipole";
    case OutputHead::SpatialExtent: return "spatial-extent";
  }
  return "unknown";
}

std::string to_string(NeighborEmbeddingMode mode) {
  switch (mode) {
    case NeighborEmbeddingMode::Full: return "full";
    case NeighborEmbeddingMode::PlainEmbedding: return "plain-embedding";
    case NeighborEmbeddingMode::ExtraUpdateLayer: return "extra-update-layer";
  }
  return "unknown";
}

OutputHead parse_output_head(std::string_view text) {
  for (auto h : {OutputHead::ScalarEnergy, OutputHead::Dipole, OutputHead::SpatialExtent}) {
    if (text == to_string(h)) return h;
  }
  throw std::invalid_argument("unknown output head '" + std::string(text) + "'");
}

NeighborEmbeddingMode parse_neighbor_embedding_mode(std::string_view text) {
  for (auto m : {NeighborEmbeddingMode::Full, NeighborEmbeddingMode::PlainEmbedding,
                 NeighborEmbeddingMode::ExtraUpdateLayer}) {
    if (text == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown neighbor embedding mode '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (num_layers < 1) fail("num_layers must be >= 1");
  if (feature_dim < 2) fail("feature_dim must be >= 2");
  if (num_heads < 1 || feature_dim % num_heads != 0) {
    fail("feature_dim " + std::to_string(feature_dim) + " not divisible by num_heads " +
         std::to_string(num_heads));
  }
  if (num_rbf < 2) fail("num_rbf must be >= 2");
  if (!(cutoff > 0.0)) fail("cutoff must be positive");
  if (max_z < 10) fail("max_z must cover the supported elements");
  if (derivative_forces && output_head != OutputHead::ScalarEnergy) {
    fail("derivative forces need the scalar-energy head");
  }
}

std::size_t ModelConfig::update_layers() const {
  return num_layers + (neighbor_embedding == NeighborEmbeddingMode::ExtraUpdateLayer ? 1 : 0);
}

namespace {
std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

void write_config(const ModelConfig& c, KeyValueConfig& out) {
  out.set("model.layers", std::to_string(c.num_layers));
  out.set("model.features", std::to_string(c.feature_dim));
  out.set("model.rbf", std::to_string(c.num_rbf));
  out.set("model.heads", std::to_string(c.num_heads));
  out.set("model.cutoff", exact(c.cutoff));
  out.set("model.head", to_string(c.output_head));
  out.set("model.equivariance", c.equivariance ? "true" : "false");
  out.set("model.neighbor_embedding", to_string(c.neighbor_embedding));
  out.set("model.derivative_forces", c.derivative_forces ? "true" : "false");
  out.set("model.self_attention", c.self_attention ? "true" : "false");
  out.set("model.max_z", std::to_string(c.max_z));
}

ModelConfig read_config(const KeyValueConfig& in, const ModelConfig& d) {
  auto count = [&](const std::string& key, std::size_t fallback) {
    long long v = in.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  ModelConfig c;
  c.num_layers = count("model.layers", d.num_layers);
  c.feature_dim = count("model.features", d.feature_dim);
  c.num_rbf = count("model.rbf", d.num_rbf);
  c.num_heads = count("model.heads", d.num_heads);
  c.cutoff = in.get_double("model.cutoff", d.cutoff);
  try {
    c.output_head = parse_output_head(in.get_string("model.head", to_string(d.output_head)));
    c.neighbor_embedding = parse_neighbor_embedding_mode(
        in.get_string("model.neighbor_embedding", to_string(d.neighbor_embedding)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.equivariance = in.get_bool("model.equivariance", d.equivariance);
  c.derivative_forces = in.get_bool("model.derivative_forces", d.derivative_forces);
  c.self_attention = in.get_bool("model.self_attention", d.self_attention);
  c.max_z = count("model.max_z", d.max_z);
  return c;
}

}  // namespace etpot::model
