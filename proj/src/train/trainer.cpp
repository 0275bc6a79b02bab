#include "etpot/train/trainer.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "etpot/ad/tape.h"
#include "etpot/core/rng.h"
#include "etpot/model/network.h"
#include "json.hpp"

namespace etpot::train {

using namespace etpot::ad;
using model::GraphBatch;
using model::ModelConfig;

void TrainConfig::validate() const {
  model.validate();
  make_schedule(lr, warmup_steps, decay_factor, patience, min_lr);
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (energy_weight < 0 || force_weight < 0 || energy_weight + force_weight <= 0) {
    throw std::invalid_argument("loss weights must be non-negative and not both zero");
  }
  if (!(smoothing > 0.0 && smoothing <= 1.0)) throw std::invalid_argument("smoothing must lie in (0, 1]");
  if (force_weight > 0 && !model.derivative_forces) {
    throw std::invalid_argument("a force loss needs derivative forces");
  }
}

std::vector<std::string> preset_names() { return {"qm9", "md17", "ani1", "tiny"}; }

TrainConfig preset(std::string_view name) {
  TrainConfig c;
  c.model.cutoff = 5.0;
  c.model.num_heads = 8;
  if (name == "qm9") {
    c.lr = 4e-4;
    c.patience = 15;
    c.decay_factor = 0.8;
    c.warmup_steps = 10000;
    c.batch_size = 128;
    c.model.num_layers = 8;
    c.model.num_rbf = 64;
    c.model.feature_dim = 256;
  } else if (name == "md17") {
    c.lr = 1e-3;
    c.patience = 30;
    c.decay_factor = 0.8;
    c.warmup_steps = 1000;
    c.batch_size = 8;
    c.model.num_layers = 6;
    c.model.num_rbf = 32;
    c.model.feature_dim = 128;
  } else if (name == "ani1") {
    c.lr = 7e-4;
    c.patience = 5;
    c.decay_factor = 0.5;
    c.warmup_steps = 10000;
    c.batch_size = 2048;
    c.model.num_layers = 6;
    c.model.num_rbf = 32;
    c.model.feature_dim = 128;
  } else if (name == "tiny") {
    c.lr = 2e-3;
    c.patience = 10;
    c.decay_factor = 0.8;
    c.warmup_steps = 200;
    c.batch_size = 16;
    c.model.num_layers = 2;
    c.model.num_rbf = 16;
    c.model.feature_dim = 32;
    c.model.num_heads = 4;
  } else {
    throw std::invalid_argument("unknown preset '" + std::string(name) +
                                "' (expected qm9, md17, ani1 or tiny)");
  }
  if (name == "qm9" || name == "ani1") {
    // Energy-only targets.
    c.energy_weight = 1.0;
    c.force_weight = 0.0;
    c.model.derivative_forces = false;
  }
  return c;
}

namespace {
std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

void write_train_config(const TrainConfig& c, KeyValueConfig& out) {
  model::write_config(c.model, out);
  out.set("train.lr", exact(c.lr));
  out.set("train.patience", std::to_string(c.patience));
  out.set("train.decay", exact(c.decay_factor));
  out.set("train.warmup", std::to_string(c.warmup_steps));
  out.set("train.batch", std::to_string(c.batch_size));
  out.set("train.epochs", std::to_string(c.epochs));
  out.set("train.min_lr", exact(c.min_lr));
  out.set("train.energy_weight", exact(c.energy_weight));
  out.set("train.force_weight", exact(c.force_weight));
  out.set("train.smoothing", exact(c.smoothing));
}

TrainConfig read_train_config(const KeyValueConfig& in, const TrainConfig& d) {
  auto count = [&](const std::string& key, std::size_t fallback) {
    long long v = in.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  in.require_known(train_config_keys());
  TrainConfig c;
  c.model = model::read_config(in, d.model);
  c.lr = in.get_double("train.lr", d.lr);
  c.patience = count("train.patience", d.patience);
  c.decay_factor = in.get_double("train.decay", d.decay_factor);
  c.warmup_steps = count("train.warmup", d.warmup_steps);
  c.batch_size = count("train.batch", d.batch_size);
  c.epochs = count("train.epochs", d.epochs);
  c.min_lr = in.get_double("train.min_lr", d.min_lr);
  c.energy_weight = in.get_double("train.energy_weight", d.energy_weight);
  c.force_weight = in.get_double("train.force_weight", d.force_weight);
  c.smoothing = in.get_double("train.smoothing", d.smoothing);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::vector<std::string> train_config_keys() {
  KeyValueConfig kv;
  write_train_config(TrainConfig{}, kv);
  std::vector<std::string> keys;
  for (const auto& [k, v] : kv.values()) keys.push_back(k);
  return keys;
}

std::string metrics_line(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["step"] = m.step;
  j["lr"] = m.lr;
  j["train_energy"] = m.train.energy;
  j["train_force"] = m.train.force;
  j["train_total"] = m.train.total;
  j["train_energy_smoothed"] = m.train_energy_smoothed;
  j["train_total_smoothed"] = m.train_total_smoothed;
  j["val_energy"] = m.val.energy;
  j["val_force"] = m.val.force;
  j["val_total"] = m.val.total;
  j["val_energy_smoothed"] = m.val_energy_smoothed;
  j["val_total_smoothed"] = m.val_total_smoothed;
  return j.dump();
}

std::string timing_line(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["seconds"] = m.seconds;
  return j.dump();
}

namespace {

struct BatchLoss {
  Var energy;
  Var force;
  Var total;
};

bool wants_forces(const ModelConfig& model, double force_weight) {
  return force_weight > 0.0 && model.derivative_forces &&
         model.output_head == model::OutputHead::ScalarEnergy;
}

BatchLoss batch_loss(Tape& tape, const GraphBatch& batch,
                     const std::vector<const geom::AtomicSystem*>& systems,
                     const model::BoundParameters& params, const ModelConfig& config, double we,
                     double wf) {
  const bool forces = wants_forces(config, wf);
  Var pos = model::position_leaf(tape, batch, forces);
  model::Graph graph = model::build_graph(tape, batch, pos, config);
  model::ForwardPass pass = model::forward(graph, params, config);
  const std::size_t M = batch.molecules();

  std::vector<double> eref(M);
  for (std::size_t m = 0; m < M; ++m) eref[m] = *systems[m]->energy;
  BatchLoss out;
  out.energy = scale(sum_all(square(sub(pass.prediction, tape.constant(Tensor::vector(eref))))),
                     1.0 / static_cast<double>(M));
  if (!forces) {
    out.force = tape.constant(Tensor::scalar(0.0));
    out.total = scale(out.energy, we);
    return out;
  }
  Var grad = tape.grad(sum_all(pass.prediction), std::span<const Var>(&pos, 1))[0];
  std::vector<double> fref, weight;
  for (std::size_t m = 0; m < M; ++m) {
    const auto& s = *systems[m];
    for (const auto& f : *s.forces) fref.insert(fref.end(), f.begin(), f.end());
    const double w = 1.0 / (3.0 * static_cast<double>(s.size()) * static_cast<double>(M));
    weight.insert(weight.end(), s.size(), w);
  }
  // Predicted forces are -grad, so the residual is -(grad + F_ref).
  Var residual = add(grad, tape.constant(Tensor({batch.atoms(), 3}, std::move(fref))));
  out.force = sum_all(mul(sum(square(residual), 1), tape.constant(Tensor::vector(std::move(weight)))));
  out.total = add(scale(out.energy, we), scale(out.force, wf));
  return out;
}

void check_labels(const std::vector<geom::AtomicSystem>& systems, bool forces, const char* split) {
  for (std::size_t k = 0; k < systems.size(); ++k) {
    if (!systems[k].energy) {
      throw std::invalid_argument(std::string(split) + " system " + std::to_string(k) +
                                  " has no energy label");
    }
    if (forces && !systems[k].forces) {
      throw std::invalid_argument(std::string(split) + " system " + std::to_string(k) +
                                  " has no force labels but the force weight is nonzero");
    }
  }
}

std::vector<std::vector<const geom::AtomicSystem*>> make_batches(
    const std::vector<geom::AtomicSystem>& systems, const std::vector<std::size_t>& order,
    std::size_t batch_size) {
  std::vector<std::vector<const geom::AtomicSystem*>> out;
  for (std::size_t k = 0; k < order.size(); k += batch_size) {
    std::vector<const geom::AtomicSystem*> b;
    for (std::size_t i = k; i < std::min(order.size(), k + batch_size); ++i) {
      b.push_back(&systems[order[i]]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

LossBreakdown numeric(const BatchLoss& l) {
  return {l.energy.value().item(), l.force.value().item(), l.total.value().item()};
}

void accumulate(LossBreakdown& sum, const LossBreakdown& part, double weight) {
  sum.energy += part.energy * weight;
  sum.force += part.force * weight;
  sum.total += part.total * weight;
}

void check_finite(const LossBreakdown& l, std::size_t epoch, std::size_t step) {
  if (!std::isfinite(l.total) || !std::isfinite(l.energy) || !std::isfinite(l.force)) {
    throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch) +
                          ", step " + std::to_string(step));
  }
}

}  // namespace

LossBreakdown evaluate_loss(const ModelConfig& model, const model::ParameterSet& params,
                            const std::vector<geom::AtomicSystem>& systems, double we, double wf,
                            std::size_t batch_size) {
  check_labels(systems, wants_forces(model, wf), "evaluation");
  std::vector<std::size_t> order(systems.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  LossBreakdown total;
  for (const auto& b : make_batches(systems, order, batch_size)) {
    Tape tape;
    model::BoundParameters p(tape, params, false);
    const GraphBatch batch = model::make_batch(b, model);
    accumulate(total, numeric(batch_loss(tape, batch, b, p, model, we, wf)),
               static_cast<double>(b.size()) / static_cast<double>(systems.size()));
  }
  return total;
}

TrainResult train_loop(const TrainConfig& config, const std::vector<geom::AtomicSystem>& train,
                       const std::vector<geom::AtomicSystem>& val, std::uint64_t seed,
                       const TrainOptions& options) {
  config.validate();
  if (train.empty()) throw std::invalid_argument("training split is empty");
  const ModelConfig& mc = config.model;
  const double we = config.energy_weight;
  const double wf = config.force_weight;
  check_labels(train, wants_forces(mc, wf), "training");
  check_labels(val, wants_forces(mc, wf), "validation");

  std::ofstream metrics_file, timing_file;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    metrics_file.open(*options.out_dir / "metrics.jsonl", std::ios::trunc);
    timing_file.open(*options.out_dir / "timing.jsonl", std::ios::trunc);
    if (!metrics_file || !timing_file) {
      throw std::runtime_error("cannot write metrics under " + options.out_dir->string());
    }
  }

  model::ParameterSet params = model::initialize_parameters(mc, seed);
  AdamState adam;
  ScheduleState schedule =
      make_schedule(config.lr, config.warmup_steps, config.decay_factor, config.patience, config.min_lr);
  SmoothedLoss train_smooth{std::nullopt, config.smoothing};
  SmoothedLoss val_smooth{std::nullopt, config.smoothing};
  Rng shuffle_rng(seed ^ 0x5deece66dULL);

  KeyValueConfig settings;
  write_train_config(config, settings);
  auto snapshot = [&](std::size_t epoch, std::size_t step) {
    model::Checkpoint ck;
    ck.model = mc;
    ck.settings = settings;
    ck.seed = seed;
    ck.parameters = params;
    for (std::size_t k = 0; k < adam.m.size(); ++k) {
      ck.optimizer.add("adam.m." + adam.m.name(k), adam.m.at(k));
      ck.optimizer.add("adam.v." + adam.v.name(k), adam.v.at(k));
    }
    ck.progress = {{"epoch", static_cast<double>(epoch)},
                   {"step", static_cast<double>(step)},
                   {"adam_step", static_cast<double>(adam.step)},
                   {"lr", schedule.lr},
                   {"bad_epochs", static_cast<double>(schedule.bad_epochs)}};
    if (schedule.best_val) ck.progress["schedule_best_val"] = *schedule.best_val;
    if (train_smooth.value) ck.progress["train_energy_smoothed"] = *train_smooth.value;
    if (val_smooth.value) ck.progress["val_energy_smoothed"] = *val_smooth.value;
    return ck;
  };

  TrainResult result;
  std::optional<double> best;
  std::size_t step = 0;
  std::vector<std::size_t> order(train.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);
    EpochMetrics em;
    em.epoch = epoch;
    double lr = schedule.lr;
    for (const auto& b : make_batches(train, order, config.batch_size)) {
      ++step;
      lr = schedule_lr(schedule, step);
      LossBreakdown part;
      model::TensorMap grads;
      try {
        Tape tape;
        model::BoundParameters p(tape, params, true);
        const GraphBatch batch = model::make_batch(b, mc);
        BatchLoss loss = batch_loss(tape, batch, b, p, mc, we, wf);
        part = numeric(loss);
        check_finite(part, epoch, step);
        auto g = tape.grad(loss.total, p.vars());
        for (std::size_t k = 0; k < g.size(); ++k) grads.add(params.name(k), g[k].value());
      } catch (const NonFiniteError& e) {
        throw DivergenceError("non-finite value at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step) + ": " + e.what());
      }
      try {
        adam_step(params, grads, adam, lr);
      } catch (const std::invalid_argument& e) {
        throw DivergenceError("epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step) + ": " + e.what());
      }
      train_smooth = smooth(train_smooth, part.energy);
      accumulate(em.train, part, static_cast<double>(b.size()) / static_cast<double>(train.size()));
    }

    if (!val.empty()) {
      std::vector<std::size_t> vorder(val.size());
      for (std::size_t k = 0; k < vorder.size(); ++k) vorder[k] = k;
      for (const auto& b : make_batches(val, vorder, config.batch_size)) {
        Tape tape;
        model::BoundParameters p(tape, params, false);
        const GraphBatch batch = model::make_batch(b, mc);
        LossBreakdown part;
        try {
          part = numeric(batch_loss(tape, batch, b, p, mc, we, wf));
        } catch (const NonFiniteError& e) {
          throw DivergenceError("non-finite validation value at epoch " + std::to_string(epoch) +
                                ": " + e.what());
        }
        check_finite(part, epoch, step);
        val_smooth = smooth(val_smooth, part.energy);
        accumulate(em.val, part, static_cast<double>(b.size()) / static_cast<double>(val.size()));
      }
    }

    em.step = step;
    em.lr = lr;
    em.train_energy_smoothed = *train_smooth.value;
    em.train_total_smoothed = we * em.train_energy_smoothed + wf * em.train.force;
    if (val_smooth.value) {
      em.val_energy_smoothed = *val_smooth.value;
      em.val_total_smoothed = we * em.val_energy_smoothed + wf * em.val.force;
    }
    const double monitor = val.empty() ? em.train_total_smoothed : em.val_total_smoothed;
    schedule_lr(schedule, step, monitor);
    em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (!best || monitor < *best) {
      best = monitor;
      result.best = snapshot(epoch, step);
      if (options.out_dir) model::save_checkpoint(result.best, *options.out_dir / "best.ckpt");
    }
    if (options.out_dir) {
      metrics_file << metrics_line(em) << '\n' << std::flush;
      timing_file << timing_line(em) << '\n' << std::flush;
    }
    if (options.verbose) {
      std::fprintf(stderr, "epoch %zu  lr %.3g  train %.6g  val %.6g  (%.2fs)\n", epoch, lr,
                   em.train.total, em.val.total, em.seconds);
    }
    result.history.push_back(em);
  }
  result.last = snapshot(config.epochs, step);
  if (options.out_dir) model::save_checkpoint(result.last, *options.out_dir / "last.ckpt");
  return result;
}

}  // namespace etpot::train
