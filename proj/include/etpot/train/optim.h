#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "etpot/model/parameters.h"

namespace etpot::train {

using model::ParameterSet;
using model::TensorMap;

/// w_E * MSE(E) + w_F * MSE(F). Force MSE averages over all N x 3 components.
/// Throws std::invalid_argument on size mismatch.
double combined_loss(std::span<const double> energy_pred, std::span<const double> force_pred,
                     std::span<const double> energy_ref, std::span<const double> force_ref,
                     double energy_weight = 0.2, double force_weight = 0.8);

struct AdamState {
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  TensorMap m;
  TensorMap v;
};

/// Bias-corrected Adam:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// Moments are created on the first call. Throws on non-finite gradients or
/// lr <= 0.
void adam_step(ParameterSet& params, const TensorMap& grads, AdamState& state, double lr);

struct ScheduleState {
  double base_lr = 1e-3;
  std::size_t warmup_steps = 0;
  double decay_factor = 0.8;
  std::size_t patience = 30;
  double min_lr = 1e-7;

  double lr = 1e-3;  // post-warmup rate, reduced on plateaus
  std::optional<double> best_val;
  std::size_t bad_epochs = 0;
};

ScheduleState make_schedule(double base_lr, std::size_t warmup_steps, double decay_factor,
                            std::size_t patience, double min_lr = 1e-7);

/// Learning rate for optimizer step `step` (1-based). While step <=
/// warmup_steps the rate is base_lr * step / warmup_steps and validation
/// losses are ignored. Afterwards each validation loss counts as one epoch:
/// once more than `patience` epochs pass without a strict improvement the rate
/// is multiplied by decay_factor, never below min_lr.
double schedule_lr(ScheduleState& state, std::size_t step,
                   std::optional<double> epoch_val_loss = std::nullopt);

struct SmoothedLoss {
  std::optional<double> value;
  double alpha = 0.05;
};

/// value <- new_loss if unset, else (1 - alpha) value + alpha new_loss.
SmoothedLoss smooth(SmoothedLoss state, double new_loss);

}  // namespace etpot::train
