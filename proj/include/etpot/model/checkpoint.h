#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "etpot/core/keyvalue.h"
#include "etpot/model/config.h"
#include "etpot/model/parameters.h"

namespace etpot::model {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to resume or evaluate a run.
///
/// File layout:
///   "ETPOTCKPT 1\n"
///   header length, 8 bytes little-endian
///   JSON header: model config, settings, seed, progress, tensor index
///   tensor data, little-endian IEEE-754 doubles in index order
struct Checkpoint {
  ModelConfig model;
  KeyValueConfig settings;
  std::uint64_t seed = 0;
  std::map<std::string, double> progress;
  ParameterSet parameters;
  TensorMap optimizer;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace etpot::model
