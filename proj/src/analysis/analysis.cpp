#include "etpot/analysis/analysis.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "etpot/core/elements.h"
#include "etpot/core/rng.h"

namespace etpot::analysis {

SquareMatrix SquareMatrix::identity(std::size_t n) {
  SquareMatrix m{n, std::vector<double>(n * n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

SquareMatrix multiply(const SquareMatrix& a, const SquareMatrix& b) {
  if (a.n != b.n) throw AnalysisError("matrix sizes differ");
  SquareMatrix out{a.n, std::vector<double>(a.n * a.n, 0.0)};
  for (std::size_t i = 0; i < a.n; ++i) {
    for (std::size_t k = 0; k < a.n; ++k) {
      const double x = a.at(i, k);
      for (std::size_t j = 0; j < a.n; ++j) out.at(i, j) += x * b.at(k, j);
    }
  }
  return out;
}

SquareMatrix rollout(std::span<const AttentionRecord> records, std::size_t num_layers) {
  if (records.empty()) throw AnalysisError("no attention records");
  const std::size_t n = records.front().atoms;
  std::vector<SquareMatrix> mean(num_layers, SquareMatrix{n, std::vector<double>(n * n, 0.0)});
  std::vector<std::size_t> heads(num_layers, 0);
  for (const auto& r : records) {
    if (r.atoms != n || r.matrix.size() != n * n) {
      throw AnalysisError("attention records of different sizes");
    }
    if (r.layer >= num_layers) {
      throw AnalysisError("record for layer " + std::to_string(r.layer) + " beyond " +
                          std::to_string(num_layers) + " layers");
    }
    for (std::size_t k = 0; k < n * n; ++k) mean[r.layer].values[k] += r.matrix[k];
    ++heads[r.layer];
  }
  SquareMatrix out = SquareMatrix::identity(n);
  for (std::size_t l = 0; l < num_layers; ++l) {
    if (heads[l] == 0) throw AnalysisError("no attention record for layer " + std::to_string(l));
    SquareMatrix factor = mean[l];
    for (double& v : factor.values) v /= static_cast<double>(heads[l]);
    for (std::size_t i = 0; i < n; ++i) factor.at(i, i) += 1.0;
    out = l == 0 ? factor : multiply(out, factor);
  }
  return out;
}

SquareMatrix normalize_in_molecule(const SquareMatrix& m) {
  double peak = 0.0;
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = 0; j < m.n; ++j) {
      if (i != j) peak = std::max(peak, std::abs(m.at(i, j)));
    }
  }
  if (peak == 0.0) return m;
  SquareMatrix out = m;
  for (double& v : out.values) v /= peak;
  return out;
}

std::optional<PairScore> PairScoreTable::find(int zi, int zj) const {
  for (const auto& e : entries) {
    if (e.zi == zi && e.zj == zj) return e;
  }
  return std::nullopt;
}

PairScoreTable pair_scores(std::span<const SquareMatrix> rollouts,
                           std::span<const AtomicSystem> systems) {
  if (rollouts.size() != systems.size()) {
    throw AnalysisError("need one rollout per system");
  }
  std::map<std::pair<int, int>, PairScore> acc;
  for (std::size_t s = 0; s < systems.size(); ++s) {
    const auto& z = systems[s].atomic_numbers;
    if (rollouts[s].n != z.size()) {
      throw AnalysisError("rollout " + std::to_string(s) + " does not match its system");
    }
    const SquareMatrix m = normalize_in_molecule(rollouts[s]);
    for (std::size_t i = 0; i < z.size(); ++i) {
      for (std::size_t j = 0; j < z.size(); ++j) {
        if (i == j) continue;
        auto& e = acc[{z[i], z[j]}];
        e.zi = z[i];
        e.zj = z[j];
        ++e.count;
        e.signed_mean += m.at(i, j);
        e.abs_mean += std::abs(m.at(i, j));
      }
    }
  }
  PairScoreTable table;
  for (auto& [key, e] : acc) {
    e.signed_mean /= static_cast<double>(e.count);
    e.abs_mean /= static_cast<double>(e.count);
    table.entries.push_back(e);
  }
  return table;
}

std::map<int, double> default_covalent_radii() {
  std::map<int, double> radii;
  for (int z : kSupportedElements) radii[z] = *covalent_radius(z);
  return radii;
}

std::optional<BondEntry> BondTable::find(int zi, int zj) const {
  for (const auto& e : entries) {
    if (e.zi == zi && e.zj == zj) return e;
  }
  return std::nullopt;
}

BondTable bond_probabilities(std::span<const AtomicSystem> systems,
                             const std::map<int, double>& radii, double factor) {
  if (!(factor > 0.0)) throw AnalysisError("tolerance factor must be positive");
  std::map<std::pair<int, int>, std::size_t> counts;
  std::map<int, std::size_t> rows;
  for (const auto& s : systems) {
    for (int z : s.atomic_numbers) {
      if (!radii.count(z)) {
        throw AnalysisError("no covalent radius for atomic number " + std::to_string(z));
      }
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (i == j) continue;
        const int zi = s.atomic_numbers[i], zj = s.atomic_numbers[j];
        if (geom::distance(s.positions[i], s.positions[j]) <=
            factor * (radii.at(zi) + radii.at(zj))) {
          ++counts[{zi, zj}];
          ++rows[zi];
        }
      }
    }
  }
  BondTable table;
  for (const auto& [key, n] : counts) {
    table.entries.push_back({key.first, key.second, n,
                             static_cast<double>(n) / static_cast<double>(rows[key.first])});
  }
  return table;
}

std::pair<double, std::optional<double>> attention_involving(const SquareMatrix& m,
                                                             std::size_t k) {
  double touch = 0.0, rest = 0.0;
  std::size_t n_touch = 0, n_rest = 0;
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = 0; j < m.n; ++j) {
      if (i == j) continue;
      if (i == k || j == k) {
        touch += std::abs(m.at(i, j));
        ++n_touch;
      } else {
        rest += std::abs(m.at(i, j));
        ++n_rest;
      }
    }
  }
  std::pair<double, std::optional<double>> out{0.0, std::nullopt};
  if (n_touch) out.first = touch / static_cast<double>(n_touch);
  if (n_rest) out.second = rest / static_cast<double>(n_rest);
  return out;
}

namespace {

Summary summarize(const std::vector<double>& xs) {
  Summary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

SquareMatrix normalized_rollout(const model::Model& model, const AtomicSystem& s) {
  const auto out = model.evaluate(s, false, true);
  return normalize_in_molecule(rollout(out.attention, model.config().update_layers()));
}

}  // namespace

ProbeResult displacement_probe(const model::Model& model, std::span<const AtomicSystem> systems,
                               const ProbeOptions& options) {
  if (!(options.delta >= 0.0)) throw AnalysisError("displacement must be non-negative");
  Rng rng(options.seed);
  ProbeResult result;
  std::map<int, std::vector<double>> displaced, equilibrium, rest;
  for (std::size_t s = 0; s < systems.size(); ++s) {
    const auto& sys = systems[s];
    if (options.elements &&
        std::any_of(sys.atomic_numbers.begin(), sys.atomic_numbers.end(),
                    [&](int z) { return !options.elements->count(z); })) {
      continue;
    }
    if (sys.size() < 2) continue;
    const SquareMatrix base = normalized_rollout(model, sys);
    for (std::size_t k = 0; k < sys.size(); ++k) {
      const auto dir = rng.unit_vector();
      AtomicSystem moved = sys;
      for (int c = 0; c < 3; ++c) moved.positions[k][c] += options.delta * dir[c];
      const auto [touch, others] = attention_involving(normalized_rollout(model, moved), k);
      ProbeSample p;
      p.system = s;
      p.atom = k;
      p.element = sys.atomic_numbers[k];
      p.displaced = touch;
      p.equilibrium = attention_involving(base, k).first;
      p.rest = others;
      displaced[p.element].push_back(p.displaced);
      equilibrium[p.element].push_back(p.equilibrium);
      if (p.rest) rest[p.element].push_back(*p.rest);
      result.samples.push_back(p);
    }
  }
  for (const auto& [z, xs] : displaced) {
    result.elements.push_back({z, summarize(xs), summarize(equilibrium[z]), summarize(rest[z])});
  }
  return result;
}

void write_table(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out << (k ? "\t" : "") << cells[k];
    out << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  if (!out) throw std::runtime_error("error writing " + path.string());
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Table t;
  std::string text;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    std::vector<std::string> cells;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, '\t')) cells.push_back(cell);
    if (first) {
      t.header = cells;
      first = false;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(t.header.size()) + " columns");
    }
    t.rows.push_back(cells);
  }
  if (first) throw std::runtime_error(path.string() + ": missing header");
  return t;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("'" + s + "' is not a number");
  }
  return v;
}

std::size_t to_count(const std::string& s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("'" + s + "' is not a count");
  }
  return v;
}

int to_element(const std::string& s) {
  auto z = atomic_number_from_symbol(s);
  if (!z) throw std::runtime_error("unknown element '" + s + "'");
  return *z;
}

void expect_header(const Table& t, const std::vector<std::string>& header) {
  if (t.header != header) throw std::runtime_error("unexpected table header");
}

const std::vector<std::string> kPairHeader{"z_i", "z_j", "count", "signed_mean", "abs_mean"};
const std::vector<std::string> kBondHeader{"z_i", "z_j", "bonds", "probability"};
const std::vector<std::string> kProbeHeader{
    "element",         "samples",          "displaced_mean", "displaced_std",
    "equilibrium_mean", "equilibrium_std", "rest_count",     "rest_mean",
    "rest_std"};

Table element_matrix(const std::function<std::optional<double>(int, int)>& cell) {
  Table t;
  t.header.push_back("element");
  for (int z : kSupportedElements) t.header.push_back(element_symbol(z));
  for (int zi : kSupportedElements) {
    std::vector<std::string> row{element_symbol(zi)};
    for (int zj : kSupportedElements) {
      const auto v = cell(zi, zj);
      row.push_back(v ? num(*v) : "NA");
    }
    t.rows.push_back(row);
  }
  return t;
}

}  // namespace

Table to_table(const PairScoreTable& scores) {
  Table t{kPairHeader, {}};
  for (const auto& e : scores.entries) {
    t.rows.push_back({element_symbol(e.zi), element_symbol(e.zj), std::to_string(e.count),
                      num(e.signed_mean), num(e.abs_mean)});
  }
  return t;
}

PairScoreTable pair_scores_from_table(const Table& t) {
  expect_header(t, kPairHeader);
  PairScoreTable out;
  for (const auto& r : t.rows) {
    out.entries.push_back(
        {to_element(r[0]), to_element(r[1]), to_count(r[2]), to_double(r[3]), to_double(r[4])});
  }
  return out;
}

Table to_table(const BondTable& bonds) {
  Table t{kBondHeader, {}};
  for (const auto& e : bonds.entries) {
    t.rows.push_back({element_symbol(e.zi), element_symbol(e.zj), std::to_string(e.bonds),
                      num(e.probability)});
  }
  return t;
}

BondTable bonds_from_table(const Table& t) {
  expect_header(t, kBondHeader);
  BondTable out;
  for (const auto& r : t.rows) {
    out.entries.push_back({to_element(r[0]), to_element(r[1]), to_count(r[2]), to_double(r[3])});
  }
  return out;
}

Table to_table(const ProbeResult& probe) {
  Table t{kProbeHeader, {}};
  for (const auto& e : probe.elements) {
    t.rows.push_back({element_symbol(e.element), std::to_string(e.displaced.count),
                      num(e.displaced.mean), num(e.displaced.stddev), num(e.equilibrium.mean),
                      num(e.equilibrium.stddev), std::to_string(e.rest.count), num(e.rest.mean),
                      num(e.rest.stddev)});
  }
  return t;
}

std::vector<ProbeElement> probe_from_table(const Table& t) {
  expect_header(t, kProbeHeader);
  std::vector<ProbeElement> out;
  for (const auto& r : t.rows) {
    ProbeElement e;
    e.element = to_element(r[0]);
    e.displaced = {to_count(r[1]), to_double(r[2]), to_double(r[3])};
    e.equilibrium = {to_count(r[1]), to_double(r[4]), to_double(r[5])};
    e.rest = {to_count(r[6]), to_double(r[7]), to_double(r[8])};
    out.push_back(e);
  }
  return out;
}

Table pair_score_matrix(const PairScoreTable& scores, bool absolute) {
  return element_matrix([&](int zi, int zj) -> std::optional<double> {
    const auto e = scores.find(zi, zj);
    if (!e) return std::nullopt;
    return absolute ? e->abs_mean : e->signed_mean;
  });
}

Table bond_matrix(const BondTable& bonds) {
  return element_matrix([&](int zi, int zj) -> std::optional<double> {
    const auto e = bonds.find(zi, zj);
    if (!e) return std::nullopt;
    return e->probability;
  });
}

Table matrix_table(const SquareMatrix& m) {
  Table t;
  t.header.push_back("atom");
  for (std::size_t j = 0; j < m.n; ++j) t.header.push_back(std::to_string(j));
  for (std::size_t i = 0; i < m.n; ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (std::size_t j = 0; j < m.n; ++j) row.push_back(num(m.at(i, j)));
    t.rows.push_back(row);
  }
  return t;
}

}  // namespace etpot::analysis
