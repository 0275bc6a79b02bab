#include "etpot/model/parameters.h"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "etpot/core/rng.h"

namespace etpot::model {

void TensorMap::add(std::string name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate tensor name '" + name + "'");
  index_.emplace(name, values_.size());
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

std::size_t TensorMap::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no tensor named '" + name + "'");
  return it->second;
}

void TensorMap::set(std::size_t index, Tensor value) {
  if (value.shape() != values_.at(index).shape()) {
    throw ad::ShapeError("tensor '" + names_[index] + "' expects shape " +
                         ad::shape_string(values_[index].shape()) + ", got " +
                         ad::shape_string(value.shape()));
  }
  values_[index] = std::move(value);
}

std::size_t TensorMap::element_count() const {
  std::size_t n = 0;
  for (const auto& t : values_) n += t.size();
  return n;
}

bool TensorMap::identical(const TensorMap& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!values_[k].identical(other.values_[k])) return false;
  }
  return true;
}

std::vector<ParameterSpec> parameter_layout(const ModelConfig& c) {
  c.validate();
  const std::size_t F = c.feature_dim;
  const std::size_t K = c.num_rbf;
  const std::size_t V = c.value_dim();
  std::vector<ParameterSpec> out;
  auto linear = [&](const std::string& name, std::size_t in, std::size_t width, bool bias) {
    out.push_back({name + ".weight", {in, width}, InitKind::Weight});
    if (bias) out.push_back({name + ".bias", {width}, InitKind::Zeros});
  };
  auto norm = [&](const std::string& name) {
    out.push_back({name + ".gamma", {F}, InitKind::Ones});
    out.push_back({name + ".beta", {F}, InitKind::Zeros});
  };

  out.push_back({"embedding.intrinsic", {c.max_z, F}, InitKind::Embedding});
  if (c.neighbor_embedding == NeighborEmbeddingMode::Full) {
    out.push_back({"embedding.neighbor", {c.max_z, F}, InitKind::Embedding});
    linear("embedding.filter", K, F, false);
    linear("embedding.combine", 2 * F, F, true);
  }
  for (std::size_t l = 0; l < c.update_layers(); ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    norm(p + "norm");
    linear(p + "query", F, F, true);
    linear(p + "key", F, F, true);
    linear(p + "value", F, V, true);
    linear(p + "filter_key", K, F, true);
    linear(p + "filter_value", K, V, true);
    linear(p + "out", F, V, true);
    if (c.equivariance) linear(p + "vector", F, 3 * F, false);
  }
  norm("out_norm");
  const std::size_t widths[3] = {F, F / 2, 1};
  for (std::size_t b = 0; b < 2; ++b) {
    const std::string p = "output." + std::to_string(b) + ".";
    const std::size_t in = widths[b];
    const std::size_t width = widths[b + 1];
    linear(p + "vector_norm", in, in, false);
    linear(p + "vector_gate", in, width, false);
    linear(p + "mlp_hidden", 2 * in, in, true);
    linear(p + "mlp_out", in, 2 * width, true);
  }
  return out;
}

ParameterSet initialize_parameters(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet params;
  const double embed_bound = std::sqrt(3.0 / static_cast<double>(config.feature_dim));
  for (const auto& spec : parameter_layout(config)) {
    std::vector<double> v(ad::shape_size(spec.shape), 0.0);
    switch (spec.init) {
      case InitKind::Embedding:
        for (double& x : v) x = rng.uniform(-embed_bound, embed_bound);
        break;
      case InitKind::Weight: {
        const double bound = std::sqrt(3.0 / static_cast<double>(spec.shape[0]));
        for (double& x : v) x = rng.uniform(-bound, bound);
        break;
      }
      case InitKind::Zeros:
        break;
      case InitKind::Ones:
        for (double& x : v) x = 1.0;
        break;
    }
    params.add(spec.name, Tensor(spec.shape, std::move(v)));
  }
  return params;
}

void check_parameters(const ParameterSet& params, const ModelConfig& config) {
  const auto layout = parameter_layout(config);
  if (layout.size() != params.size()) {
    throw std::invalid_argument("expected " + std::to_string(layout.size()) +
                                " parameter tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < layout.size(); ++k) {
    if (params.name(k) != layout[k].name) {
      throw std::invalid_argument("parameter " + std::to_string(k) + " is '" + params.name(k) +
                                  "', expected '" + layout[k].name + "'");
    }
    if (params.at(k).shape() != layout[k].shape) {
      throw std::invalid_argument("parameter '" + layout[k].name + "' has shape " +
                                  ad::shape_string(params.at(k).shape()) + ", expected " +
                                  ad::shape_string(layout[k].shape));
    }
    if (!params.at(k).all_finite()) {
      throw std::invalid_argument("parameter '" + layout[k].name + "' is not finite");
    }
  }
}

}  // namespace etpot::model
