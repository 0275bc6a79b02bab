#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "etpot/geom/geometry.h"
#include "etpot/model/network.h"

namespace etpot::analysis {

using geom::AtomicSystem;
using model::AttentionRecord;

class AnalysisError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense square matrix, row-major.
struct SquareMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  static SquareMatrix identity(std::size_t n);
  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
  bool operator==(const SquareMatrix&) const = default;
};

SquareMatrix multiply(const SquareMatrix& a, const SquareMatrix& b);

/// Heads averaged per layer, then (A_1 + I)(A_2 + I)...(A_L + I), multiplied
/// left to right. Signed; no row normalization. Throws AnalysisError when a
/// layer in [0, num_layers) has no record or matrix sizes disagree.
SquareMatrix rollout(std::span<const AttentionRecord> records, std::size_t num_layers);

/// Divides by the largest absolute off-diagonal entry. Matrices whose
/// off-diagonal part is all zero are returned unchanged.
SquareMatrix normalize_in_molecule(const SquareMatrix& m);

struct PairScore {
  int zi = 0;
  int zj = 0;
  std::size_t count = 0;
  double signed_mean = 0.0;
  double abs_mean = 0.0;

  bool operator==(const PairScore&) const = default;
};

/// Ordered element pairs with at least one contributing entry, sorted by (zi, zj).
struct PairScoreTable {
  std::vector<PairScore> entries;

  std::optional<PairScore> find(int zi, int zj) const;
  bool operator==(const PairScoreTable&) const = default;
};

/// Mean normalized rollout entry (i attends j, i != j) per ordered element
/// pair over all systems. Each rollout is normalized inside its molecule
/// first.
PairScoreTable pair_scores(std::span<const SquareMatrix> rollouts,
                           std::span<const AtomicSystem> systems);

/// Standard single-bond radii of the supported elements (Angstrom).
std::map<int, double> default_covalent_radii();

struct BondEntry {
  int zi = 0;
  int zj = 0;
  std::size_t bonds = 0;
  double probability = 0.0;  // P(bond to zj | atom zi)

  bool operator==(const BondEntry&) const = default;
};

struct BondTable {
  std::vector<BondEntry> entries;  // pairs with bonds > 0, sorted by (zi, zj)

  std::optional<BondEntry> find(int zi, int zj) const;
  bool operator==(const BondTable&) const = default;
};

/// Atoms i != j are bonded when d_ij <= factor * (r_i + r_j). Bonds are
/// counted from both ends, so each row is a conditional distribution.
/// Throws AnalysisError for an element without a radius.
BondTable bond_probabilities(std::span<const AtomicSystem> systems,
                             const std::map<int, double>& radii, double factor = 1.2);

/// One displaced atom. Values are mean absolute normalized rollout entries:
/// `displaced` over off-diagonal entries in the displaced atom's row or
/// column, `rest` over the remaining off-diagonal entries (absent for two-atom
/// systems), `equilibrium` the displaced-atom quantity on the unperturbed
/// geometry.
struct ProbeSample {
  std::size_t system = 0;
  std::size_t atom = 0;
  int element = 0;
  double displaced = 0.0;
  double equilibrium = 0.0;
  std::optional<double> rest;
};

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population

  bool operator==(const Summary&) const = default;
};

struct ProbeElement {
  int element = 0;
  Summary displaced;
  Summary equilibrium;
  Summary rest;

  bool operator==(const ProbeElement&) const = default;
};

struct ProbeResult {
  std::vector<ProbeSample> samples;
  std::vector<ProbeElement> elements;  // sorted by atomic number
};

struct ProbeOptions {
  double delta = 0.4;
  std::uint64_t seed = 0;
  /// When set, systems with any atom outside this set are skipped.
  std::optional<std::set<int>> elements;
};

/// Displaces every atom of every system in turn by `delta` along a random
/// unit direction and compares its rollout attention with the other atoms'.
ProbeResult displacement_probe(const model::Model& model, std::span<const AtomicSystem> systems,
                               const ProbeOptions& options = {});

/// Mean absolute normalized off-diagonal entry touching atom k, and over all
/// entries not touching it.
std::pair<double, std::optional<double>> attention_involving(const SquareMatrix& normalized,
                                                             std::size_t k);

/// Tab-separated table with one header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  bool operator==(const Table&) const = default;
};

void write_table(const std::filesystem::path& path, const Table& table);
/// Throws std::runtime_error on unreadable files or ragged rows.
Table read_table(const std::filesystem::path& path);

/// z_i z_j count signed_mean abs_mean
Table to_table(const PairScoreTable& scores);
PairScoreTable pair_scores_from_table(const Table& table);
/// z_i z_j bonds probability
Table to_table(const BondTable& bonds);
BondTable bonds_from_table(const Table& table);
/// element samples displaced_mean displaced_std equilibrium_mean
/// equilibrium_std rest_count rest_mean rest_std
Table to_table(const ProbeResult& probe);
std::vector<ProbeElement> probe_from_table(const Table& table);

/// Element-by-element matrix over the supported elements; first column is the
/// row element, cells without data are "NA". `absolute` picks abs_mean.
Table pair_score_matrix(const PairScoreTable& scores, bool absolute);
/// Same layout with bond probabilities.
Table bond_matrix(const BondTable& bonds);
/// Plain numeric matrix with atom-index headers.
Table matrix_table(const SquareMatrix& m);

}  // namespace etpot::analysis
