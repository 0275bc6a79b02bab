#include "etpot/cli/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>

#include "etpot/analysis/analysis.h"
#include "etpot/core/elements.h"
#include "etpot/data/dataset.h"
#include "etpot/data/synthetic.h"
#include "etpot/model/checkpoint.h"
#include "etpot/model/network.h"
#include "etpot/train/trainer.h"

namespace etpot::cli {
namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string command;
  std::string preset = "tiny";
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data;
  std::optional<std::string> checkpoint;
  std::string out;
  std::string exclude;
  std::optional<std::string> head;
  bool no_equivariance = false;
  std::optional<std::string> embedding_mode;
};

const std::vector<std::string> kDataKeys{"data.n_train", "data.n_val", "data.split_seed"};
const std::vector<std::string> kAnalysisKeys{"analysis.delta", "analysis.bond_factor",
                                             "analysis.probe_elements"};

void require_file(const std::optional<std::string>& path, const char* flag) {
  if (!path) throw UsageError(std::string(flag) + " is required");
  if (!fs::exists(*path)) throw MissingFileError(std::string(flag) + ": no such file: " + *path);
}

KeyValueConfig load_config(const Options& o) {
  if (!o.config) return {};
  require_file(o.config, "--config");
  return KeyValueConfig::load(*o.config);
}

// Keys with the given prefixes go to `picked`; the rest stay.
KeyValueConfig take_keys(KeyValueConfig& from, const std::vector<std::string>& keys) {
  KeyValueConfig picked, rest;
  for (const auto& [k, v] : from.values()) {
    if (std::find(keys.begin(), keys.end(), k) != keys.end()) {
      picked.set(k, v);
    } else {
      rest.set(k, v);
    }
  }
  from = rest;
  return picked;
}

std::set<int> parse_elements(const std::string& text) {
  std::set<int> out;
  for (const auto& sym : split_list(text)) {
    auto z = atomic_number_from_symbol(sym);
    if (!z) throw UsageError("unknown element symbol '" + sym + "'");
    out.insert(*z);
  }
  return out;
}

data::Dataset load_data(const Options& o) {
  require_file(o.data, "--data");
  auto ds = data::load_manifest(*o.data);
  if (!o.exclude.empty()) ds = data::filter_elements(ds, parse_elements(o.exclude));
  if (ds.size() == 0) throw UsageError("dataset is empty");
  return ds;
}

KeyValueConfig run_settings(const Options& o) {
  KeyValueConfig c;
  c.set("run.command", o.command);
  if (o.command == "train") c.set("run.preset", o.preset);
  if (o.seed) c.set("run.seed", std::to_string(*o.seed));
  if (o.config) c.set("run.config", *o.config);
  if (o.data) c.set("run.data", *o.data);
  if (o.checkpoint) c.set("run.checkpoint", *o.checkpoint);
  c.set("run.out", o.out);
  if (!o.exclude.empty()) c.set("run.exclude_elements", o.exclude);
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void prepare_out(const Options& o) {
  if (o.out.empty()) throw UsageError("--out is required");
  fs::create_directories(o.out);
}

int gen_data(const Options& o, std::ostream& out) {
  if (!o.seed) throw UsageError("--seed is required for gen-data");
  prepare_out(o);
  data::SynthSpec spec = data::morse_triatomic(100, 0.1, *o.seed);
  if (o.config) {
    auto kv = load_config(o);
    try {
      spec = data::read_synth_spec(kv);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
  spec.seed = *o.seed;
  const auto ds = data::generate_synthetic(spec);
  data::write_extxyz_file(fs::path(o.out) / "data.xyz", ds);
  data::write_manifest(fs::path(o.out) / "data.manifest", {"data.xyz"}, ds.energy_unit,
                       ds.provenance);
  KeyValueConfig resolved = run_settings(o);
  const KeyValueConfig spec_kv = data::write_synth_spec(spec);
  for (const auto& [k, v] : spec_kv.values()) resolved.set("synth." + k, v);
  write_text(fs::path(o.out) / "resolved_config.txt", resolved.to_string());
  out << "wrote " << ds.size() << " samples to " << (fs::path(o.out) / "data.xyz").string()
      << '\n';
  return kOk;
}

train::TrainConfig resolve_train_config(const Options& o, KeyValueConfig& kv) {
  train::TrainConfig cfg;
  try {
    cfg = train::preset(o.preset);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (o.head) kv.set("model.head", *o.head);
  if (o.no_equivariance) kv.set("model.equivariance", "false");
  if (o.embedding_mode) kv.set("model.neighbor_embedding", *o.embedding_mode);
  if (o.head && *o.head != "scalar-energy") {
    // Non-energy heads fit a scalar label with no force term.
    if (!kv.contains("model.derivative_forces")) kv.set("model.derivative_forces", "false");
    if (!kv.contains("train.energy_weight")) kv.set("train.energy_weight", "1");
    if (!kv.contains("train.force_weight")) kv.set("train.force_weight", "0");
  }
  try {
    return train::read_train_config(kv, cfg);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

int train_command(const Options& o, std::ostream& out) {
  if (!o.seed) throw UsageError("--seed is required for train");
  KeyValueConfig kv = load_config(o);
  KeyValueConfig split_kv = take_keys(kv, kDataKeys);
  const train::TrainConfig cfg = resolve_train_config(o, kv);
  auto ds = load_data(o);
  prepare_out(o);

  const std::size_t n = ds.size();
  const long long default_val = n >= 2 ? static_cast<long long>(std::max<std::size_t>(1, n / 10)) : 0;
  const long long n_val = split_kv.get_int("data.n_val", default_val);
  const long long n_train = split_kv.get_int("data.n_train", static_cast<long long>(n) - n_val);
  const long long split_seed =
      split_kv.get_int("data.split_seed", static_cast<long long>(*o.seed));
  if (n_val < 0 || n_train < 1 || split_seed < 0 ||
      static_cast<std::size_t>(n_train + n_val) > n) {
    throw UsageError("data.n_train/data.n_val do not fit a dataset of " + std::to_string(n));
  }
  const auto parts = data::split(ds, static_cast<std::size_t>(n_train),
                                 static_cast<std::size_t>(n_val),
                                 static_cast<std::uint64_t>(split_seed));

  KeyValueConfig resolved = run_settings(o);
  train::write_train_config(cfg, resolved);
  resolved.set("data.n_train", std::to_string(n_train));
  resolved.set("data.n_val", std::to_string(n_val));
  resolved.set("data.split_seed", std::to_string(split_seed));
  write_text(fs::path(o.out) / "resolved_config.txt", resolved.to_string());

  train::TrainOptions opts;
  opts.out_dir = fs::path(o.out);
  const auto result = train::train_loop(cfg, parts.train.systems, parts.val.systems, *o.seed, opts);
  const auto& last = result.history.back();
  out << "trained " << result.history.size() << " epochs; final train loss " << last.train.total;
  if (!parts.val.systems.empty()) out << ", val loss " << last.val.total;
  out << '\n';
  return kOk;
}

int eval_command(const Options& o, std::ostream& out) {
  require_file(o.checkpoint, "--checkpoint");
  const auto ck = model::load_checkpoint(*o.checkpoint);
  const auto ds = load_data(o);
  prepare_out(o);
  const model::Model m(ck.model, ck.parameters);
  const bool energy_head = ck.model.output_head == model::OutputHead::ScalarEnergy;
  const bool forces = energy_head && ck.model.derivative_forces &&
                      std::all_of(ds.systems.begin(), ds.systems.end(),
                                  [](const auto& s) { return s.forces.has_value(); });

  double e_abs = 0.0, e_sq = 0.0, f_abs = 0.0, f_sq = 0.0;
  std::size_t e_n = 0, f_n = 0;
  for (const auto& s : ds.systems) {
    if (!s.energy) continue;
    const auto r = m.evaluate(s, forces, false);
    const double de = r.value - *s.energy;
    e_abs += std::abs(de);
    e_sq += de * de;
    ++e_n;
    if (!forces) continue;
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (int c = 0; c < 3; ++c) {
        const double df = r.forces[i][c] - (*s.forces)[i][c];
        f_abs += std::abs(df);
        f_sq += df * df;
        ++f_n;
      }
    }
  }
  if (e_n == 0) throw UsageError("dataset has no labels to evaluate against");

  analysis::Table table{{"quantity", "count", "mae", "rmse"}, {}};
  auto row = [&](const std::string& name, std::size_t count, double abs, double sq) {
    char mae[40], rmse[40];
    std::snprintf(mae, sizeof mae, "%.17g", abs / static_cast<double>(count));
    std::snprintf(rmse, sizeof rmse, "%.17g", std::sqrt(sq / static_cast<double>(count)));
    table.rows.push_back({name, std::to_string(count), mae, rmse});
    out << name << "  n=" << count << "  mae=" << mae << "  rmse=" << rmse << '\n';
  };
  row(energy_head ? "energy" : model::to_string(ck.model.output_head), e_n, e_abs, e_sq);
  if (forces && f_n > 0) row("force", f_n, f_abs, f_sq);
  analysis::write_table(fs::path(o.out) / "eval.tsv", table);

  KeyValueConfig resolved = run_settings(o);
  model::write_config(ck.model, resolved);
  write_text(fs::path(o.out) / "resolved_config.txt", resolved.to_string());
  return kOk;
}

int analyze_command(const Options& o, std::ostream& out) {
  require_file(o.checkpoint, "--checkpoint");
  KeyValueConfig kv = load_config(o);
  kv.require_known(kAnalysisKeys);
  const auto ck = model::load_checkpoint(*o.checkpoint);
  const auto ds = load_data(o);
  prepare_out(o);
  const model::Model m(ck.model, ck.parameters);
  const std::size_t layers = ck.model.update_layers();

  analysis::ProbeOptions probe;
  double factor = 1.2;
  try {
    probe.delta = kv.get_double("analysis.delta", 0.4);
    factor = kv.get_double("analysis.bond_factor", 1.2);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  probe.seed = o.seed.value_or(0);
  if (kv.contains("analysis.probe_elements")) {
    probe.elements = parse_elements(*kv.get("analysis.probe_elements"));
  }

  std::vector<analysis::SquareMatrix> rollouts;
  analysis::SquareMatrix first_mean;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto r = m.evaluate(ds.systems[k], false, true);
    rollouts.push_back(analysis::rollout(r.attention, layers));
    if (k == 0) {
      const std::size_t n = ds.systems[0].size();
      first_mean = {n, std::vector<double>(n * n, 0.0)};
      std::size_t heads = 0;
      for (const auto& rec : r.attention) {
        if (rec.layer != 0) continue;
        ++heads;
        for (std::size_t e = 0; e < n * n; ++e) first_mean.values[e] += rec.matrix[e];
      }
      for (double& v : first_mean.values) v /= static_cast<double>(heads);
    }
  }
  const auto scores = analysis::pair_scores(rollouts, ds.systems);
  const auto bonds = analysis::bond_probabilities(ds.systems, analysis::default_covalent_radii(),
                                                  factor);
  const auto probed = analysis::displacement_probe(m, ds.systems, probe);

  const fs::path dir(o.out);
  analysis::write_table(dir / "pair_scores.tsv", analysis::to_table(scores));
  analysis::write_table(dir / "pair_scores_signed.tsv", analysis::pair_score_matrix(scores, false));
  analysis::write_table(dir / "pair_scores_abs.tsv", analysis::pair_score_matrix(scores, true));
  analysis::write_table(dir / "bond_probabilities.tsv", analysis::to_table(bonds));
  analysis::write_table(dir / "bond_matrix.tsv", analysis::bond_matrix(bonds));
  analysis::write_table(dir / "displacement.tsv", analysis::to_table(probed));
  analysis::write_table(dir / "rollout_0.tsv", analysis::matrix_table(rollouts.front()));
  analysis::write_table(dir / "attention_layer0_0.tsv", analysis::matrix_table(first_mean));

  KeyValueConfig resolved = run_settings(o);
  model::write_config(ck.model, resolved);
  resolved.set("analysis.delta", std::to_string(probe.delta));
  resolved.set("analysis.bond_factor", std::to_string(factor));
  if (kv.contains("analysis.probe_elements")) {
    resolved.set("analysis.probe_elements", *kv.get("analysis.probe_elements"));
  }
  write_text(dir / "resolved_config.txt", resolved.to_string());
  out << "analyzed " << ds.size() << " systems; " << scores.entries.size()
      << " element pairs, " << probed.samples.size() << " probe samples\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Equivariant transformer potential: data generation, training and analysis",
               "etpot"};
  app.require_subcommand(1);
  Options o;
  std::string seed_text;

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", seed_text, "random seed"); };
  auto add_out = [&](CLI::App* c) { c->add_option("--out", o.out, "output directory"); };
  auto add_data = [&](CLI::App* c) {
    c->add_option("--data", o.data, "dataset manifest");
    c->add_option("--exclude-elements", o.exclude, "element symbols to drop, e.g. H");
  };

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--config", o.config, "synthetic spec file");
  add_seed(gen);
  add_out(gen);

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--preset", o.preset, "qm9, md17, ani1 or tiny");
  tr->add_option("--config", o.config, "key-value overrides");
  tr->add_option("--head", o.head, "scalar-energy, dipole or spatial-extent");
  tr->add_flag("--no-equivariance", o.no_equivariance, "scalar features only");
  tr->add_option("--neighbor-embedding-mode", o.embedding_mode,
                 "full, plain-embedding or extra-update-layer");
  add_seed(tr);
  add_data(tr);
  add_out(tr);

  auto* ev = app.add_subcommand("eval", "mean absolute errors of a checkpoint");
  ev->add_option("--checkpoint", o.checkpoint, "checkpoint file");
  add_data(ev);
  add_out(ev);

  auto* an = app.add_subcommand("analyze", "attention and bond analyses");
  an->add_option("--checkpoint", o.checkpoint, "checkpoint file");
  an->add_option("--config", o.config, "analysis.* settings");
  add_seed(an);
  add_data(an);
  add_out(an);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (!seed_text.empty()) {
      std::size_t used = 0;
      long long s = -1;
      try {
        s = std::stoll(seed_text, &used);
      } catch (const std::exception&) {
      }
      if (s < 0 || used != seed_text.size()) {
        throw UsageError("--seed must be a non-negative integer");
      }
      o.seed = static_cast<std::uint64_t>(s);
    }
    if (gen->parsed()) {
      o.command = "gen-data";
      return gen_data(o, out);
    }
    if (tr->parsed()) {
      o.command = "train";
      return train_command(o, out);
    }
    if (ev->parsed()) {
      o.command = "eval";
      return eval_command(o, out);
    }
    o.command = "analyze";
    return analyze_command(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const MissingFileError& e) {
    err << "error: " << e.what() << '\n';
    return kMissingFile;
  } catch (const train::DivergenceError& e) {
    err << "error: training diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace etpot::cli
