#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "etpot/core/keyvalue.h"
#include "etpot/geom/geometry.h"
#include "etpot/model/checkpoint.h"
#include "etpot/model/config.h"
#include "etpot/train/optim.h"

namespace etpot::train {

struct TrainConfig {
  model::ModelConfig model;
  double lr = 1e-3;
  std::size_t patience = 30;
  double decay_factor = 0.8;
  std::size_t warmup_steps = 1000;
  std::size_t batch_size = 8;
  std::size_t epochs = 500;
  double min_lr = 1e-7;
  double energy_weight = 0.2;
  double force_weight = 0.8;
  double smoothing = 0.05;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// "qm9", "md17", "ani1" or "tiny". Throws std::invalid_argument otherwise.
TrainConfig preset(std::string_view name);
std::vector<std::string> preset_names();

/// Keys: train.lr, train.patience, train.decay, train.warmup, train.batch,
/// train.epochs, train.min_lr, train.energy_weight, train.force_weight,
/// train.smoothing, plus the model.* keys.
void write_train_config(const TrainConfig& config, KeyValueConfig& out);
TrainConfig read_train_config(const KeyValueConfig& in, const TrainConfig& defaults);
/// Keys accepted by read_train_config.
std::vector<std::string> train_config_keys();

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Loss components of one pass over a split. Energy and force terms are
/// means over systems; `total` is w_E * energy + w_F * force.
struct LossBreakdown {
  double energy = 0.0;
  double force = 0.0;
  double total = 0.0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  LossBreakdown train;
  LossBreakdown val;
  double train_energy_smoothed = 0.0;
  double val_energy_smoothed = 0.0;
  double train_total_smoothed = 0.0;
  double val_total_smoothed = 0.0;
  double seconds = 0.0;
};

/// One JSON object per line, without wall time (bit-identical across reruns).
std::string metrics_line(const EpochMetrics& m);
/// {"epoch":..,"seconds":..}
std::string timing_line(const EpochMetrics& m);

struct TrainResult {
  model::Checkpoint best;   // lowest smoothed validation loss
  model::Checkpoint last;
  std::vector<EpochMetrics> history;
};

struct TrainOptions {
  /// When set: metrics.jsonl, timing.jsonl, best.ckpt and last.ckpt are
  /// written here as training proceeds.
  std::optional<std::filesystem::path> out_dir;
  /// Progress lines on stderr.
  bool verbose = false;
};

/// Losses of `params` over `systems` (no smoothing), batched like training.
LossBreakdown evaluate_loss(const model::ModelConfig& model, const model::ParameterSet& params,
                            const std::vector<geom::AtomicSystem>& systems, double energy_weight,
                            double force_weight, std::size_t batch_size);

/// Shuffled mini-batch training with Adam, warmup and plateau decay.
/// Deterministic in `seed`. Throws DivergenceError on a non-finite loss.
TrainResult train_loop(const TrainConfig& config, const std::vector<geom::AtomicSystem>& train,
                       const std::vector<geom::AtomicSystem>& val, std::uint64_t seed,
                       const TrainOptions& options = {});

}  // namespace etpot::train
