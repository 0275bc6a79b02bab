#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "etpot/ad/tensor.h"
#include "etpot/model/config.h"

namespace etpot::model {

using ad::Shape;
using ad::Tensor;

/// Named tensors in insertion order.
class TensorMap {
 public:
  void add(std::string name, Tensor value);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t index_of(const std::string& name) const;
  const Tensor& at(const std::string& name) const { return values_[index_of(name)]; }
  const Tensor& at(std::size_t index) const { return values_.at(index); }
  const std::string& name(std::size_t index) const { return names_.at(index); }
  /// Replaces a tensor; the shape must not change.
  void set(std::size_t index, Tensor value);
  void set(const std::string& name, Tensor value) { set(index_of(name), std::move(value)); }

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  /// Total number of scalars.
  std::size_t element_count() const;
  /// Same names, order, shapes and bit-identical values.
  bool identical(const TensorMap& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

using ParameterSet = TensorMap;

enum class InitKind { Embedding, Weight, Zeros, Ones };

struct ParameterSpec {
  std::string name;
  Shape shape;
  InitKind init;
};

/// Every trainable tensor the configuration needs, in canonical order.
/// Linear weights are stored (in, out) and applied as x W + b.
std::vector<ParameterSpec> parameter_layout(const ModelConfig& config);

/// Weights uniform in +-sqrt(3 / fan_in), embeddings uniform in
/// +-sqrt(3 / F), biases 0, layer-norm gains 1. Deterministic in `seed`.
ParameterSet initialize_parameters(const ModelConfig& config, std::uint64_t seed);

/// Throws std::invalid_argument if names, order or shapes differ from the
/// layout, or a value is non-finite.
void check_parameters(const ParameterSet& params, const ModelConfig& config);

}  // namespace etpot::model
