#include "etpot/data/dataset.h"

#include <charconv>
#include <cmath>
#include <optional>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "etpot/core/elements.h"
#include "etpot/core/rng.h"

namespace etpot::data {

std::string to_string(EnergyUnit unit) {
  switch (unit) {
    case EnergyUnit::ModelUnit: return "model";
    case EnergyUnit::Ev: return "eV";
    case EnergyUnit::KcalPerMol: return "kcal/mol";
  }
  return "unknown";
}

EnergyUnit parse_energy_unit(std::string_view text) {
  for (auto u : {EnergyUnit::ModelUnit, EnergyUnit::Ev, EnergyUnit::KcalPerMol}) {
    if (text == to_string(u)) return u;
  }
  throw std::invalid_argument("unknown energy unit '" + std::string(text) +
                              "' (expected model, eV or kcal/mol)");
}

void Dataset::validate() const {
  for (std::size_t k = 0; k < systems.size(); ++k) {
    try {
      systems[k].validate();
    } catch (const geom::GeometryError& e) {
      throw geom::GeometryError("system " + std::to_string(k) + ": " + e.what());
    }
    if (systems[k].forces && !systems[k].energy) {
      throw geom::GeometryError("system " + std::to_string(k) + " has forces but no energy");
    }
  }
}

namespace {

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t k = 0;
  while (k < line.size()) {
    while (k < line.size() && (line[k] == ' ' || line[k] == '\t' || line[k] == '\r')) ++k;
    if (k >= line.size()) break;
    std::size_t start = k;
    while (k < line.size() && line[k] != ' ' && line[k] != '\t' && line[k] != '\r') ++k;
    out.push_back(line.substr(start, k - start));
  }
  return out;
}

// key=value pairs; values may be double-quoted and contain spaces.
std::vector<std::pair<std::string, std::string>> comment_pairs(std::string_view line) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t k = 0;
  while (k < line.size()) {
    while (k < line.size() && (line[k] == ' ' || line[k] == '\t' || line[k] == '\r')) ++k;
    std::size_t start = k;
    while (k < line.size() && line[k] != '=' && line[k] != ' ' && line[k] != '\t') ++k;
    std::string key(line.substr(start, k - start));
    if (k >= line.size() || line[k] != '=') {
      if (!key.empty()) out.emplace_back(key, "");
      continue;
    }
    ++k;
    std::string value;
    if (k < line.size() && line[k] == '"') {
      std::size_t end = line.find('"', k + 1);
      if (end == std::string_view::npos) end = line.size();
      value = std::string(line.substr(k + 1, end - k - 1));
      k = end + 1;
    } else {
      std::size_t vs = k;
      while (k < line.size() && line[k] != ' ' && line[k] != '\t' && line[k] != '\r') ++k;
      value = std::string(line.substr(vs, k - vs));
    }
    out.emplace_back(key, value);
  }
  return out;
}

double to_double(std::string_view text, std::size_t line, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ParseError(line, std::string("invalid ") + what + " '" + std::string(text) + "'");
  }
  return v;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Dataset parse_extxyz(std::string_view text, EnergyUnit unit, std::string provenance) {
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start <= text.size();) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }

  Dataset ds;
  ds.energy_unit = unit;
  ds.provenance = std::move(provenance);
  std::size_t k = 0;
  while (k < lines.size()) {
    if (tokens(lines[k]).empty()) {
      ++k;
      continue;
    }
    const std::size_t count_line = k + 1;
    auto count_tokens = tokens(lines[k]);
    std::size_t n = 0;
    auto [ptr, ec] = std::from_chars(count_tokens[0].data(),
                                     count_tokens[0].data() + count_tokens[0].size(), n);
    if (count_tokens.size() != 1 || ec != std::errc() ||
        ptr != count_tokens[0].data() + count_tokens[0].size() || n == 0) {
      throw ParseError(count_line, "expected a positive atom count, got '" +
                                       std::string(lines[k]) + "'");
    }
    if (k + 1 + n >= lines.size()) {
      throw ParseError(count_line, "frame declares " + std::to_string(n) +
                                       " atoms but the file ends early");
    }

    AtomicSystem s;
    std::optional<bool> has_forces;
    for (const auto& [key, value] : comment_pairs(lines[k + 1])) {
      if (key == "energy") {
        s.energy = to_double(value, k + 2, "energy");
      } else if (key == "Properties") {
        has_forces = value.find("forces:R:3") != std::string::npos;
      }
    }

    std::optional<std::size_t> columns;
    std::vector<Vec3> forces;
    for (std::size_t a = 0; a < n; ++a) {
      const std::size_t ln = k + 3 + a;
      auto t = tokens(lines[k + 2 + a]);
      if (t.size() != 4 && t.size() != 7) {
        throw ParseError(ln, "expected 4 or 7 columns, got " + std::to_string(t.size()));
      }
      if (columns && *columns != t.size()) {
        throw ParseError(ln, "column count changes within a frame");
      }
      columns = t.size();
      if (has_forces && *has_forces != (t.size() == 7)) {
        throw ParseError(ln, "columns do not match the Properties declaration");
      }
      auto z = atomic_number_from_symbol(t[0]);
      if (!z) throw ParseError(ln, "unknown element symbol '" + std::string(t[0]) + "'");
      s.atomic_numbers.push_back(*z);
      s.positions.push_back({to_double(t[1], ln, "coordinate"), to_double(t[2], ln, "coordinate"),
                             to_double(t[3], ln, "coordinate")});
      if (t.size() == 7) {
        forces.push_back({to_double(t[4], ln, "force"), to_double(t[5], ln, "force"),
                          to_double(t[6], ln, "force")});
      }
    }
    if (!forces.empty()) {
      if (!s.energy) throw ParseError(k + 2, "frame has forces but no energy");
      s.forces = std::move(forces);
    }
    try {
      s.validate();
    } catch (const geom::GeometryError& e) {
      throw ParseError(count_line, e.what());
    }
    ds.systems.push_back(std::move(s));
    k += 2 + n;
  }
  return ds;
}

std::string write_extxyz(const Dataset& ds) {
  std::string out;
  for (const auto& s : ds.systems) {
    out += std::to_string(s.size()) + "\n";
    out += s.forces ? "Properties=species:S:1:pos:R:3:forces:R:3" : "Properties=species:S:1:pos:R:3";
    if (s.energy) out += " energy=" + exact(*s.energy);
    out += " pbc=\"F F F\"\n";
    for (std::size_t a = 0; a < s.size(); ++a) {
      out += element_symbol(s.atomic_numbers[a]);
      for (double c : s.positions[a]) out += " " + exact(c);
      if (s.forces) {
        for (double f : (*s.forces)[a]) out += " " + exact(f);
      }
      out += "\n";
    }
  }
  return out;
}

Dataset read_extxyz_file(const std::filesystem::path& path, EnergyUnit unit) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_extxyz(buf.str(), unit, path.string());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

void write_extxyz_file(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << write_extxyz(ds);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Dataset load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("cannot open " + path.string());
  const auto cfg = KeyValueConfig::load(path);
  cfg.require_known({"files", "energy_unit", "provenance"});
  const auto files = split_list(cfg.get_string("files", ""));
  if (files.empty()) throw ConfigError(path.string() + ": manifest lists no files");
  Dataset ds;
  ds.energy_unit = parse_energy_unit(cfg.get_string("energy_unit", "model"));
  ds.provenance = cfg.get_string("provenance", path.string());
  for (const auto& f : files) {
    const auto part = read_extxyz_file(path.parent_path() / f, ds.energy_unit);
    ds.systems.insert(ds.systems.end(), part.systems.begin(), part.systems.end());
  }
  return ds;
}

void write_manifest(const std::filesystem::path& path, const std::vector<std::string>& files,
                    EnergyUnit unit, const std::string& provenance) {
  KeyValueConfig cfg;
  std::string joined;
  for (const auto& f : files) joined += (joined.empty() ? "" : ", ") + f;
  cfg.set("files", joined);
  cfg.set("energy_unit", to_string(unit));
  cfg.set("provenance", provenance);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << cfg.to_string();
}

Dataset convert_energy_unit(const Dataset& ds, EnergyUnit target) {
  if (ds.energy_unit == target) return ds;
  double factor = 0.0;
  if (ds.energy_unit == EnergyUnit::Ev && target == EnergyUnit::KcalPerMol) {
    factor = kKcalPerMolPerEv;
  } else if (ds.energy_unit == EnergyUnit::KcalPerMol && target == EnergyUnit::Ev) {
    factor = 1.0 / kKcalPerMolPerEv;
  } else {
    throw std::invalid_argument("no conversion from " + to_string(ds.energy_unit) + " to " +
                                to_string(target));
  }
  Dataset out = ds;
  out.energy_unit = target;
  for (auto& s : out.systems) {
    if (s.energy) *s.energy *= factor;
    if (s.forces) {
      for (auto& f : *s.forces) {
        for (double& c : f) c *= factor;
      }
    }
  }
  return out;
}

Splits split(const Dataset& ds, std::size_t n_train, std::size_t n_val, std::uint64_t seed) {
  if (n_train + n_val > ds.size()) {
    throw std::invalid_argument("split needs " + std::to_string(n_train + n_val) +
                                " samples, dataset has " + std::to_string(ds.size()));
  }
  std::vector<std::size_t> order(ds.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  Rng rng(seed);
  rng.shuffle(order);
  Splits out;
  for (Dataset* d : {&out.train, &out.val, &out.test}) {
    d->energy_unit = ds.energy_unit;
    d->provenance = ds.provenance;
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    Dataset& target = k < n_train ? out.train : (k < n_train + n_val ? out.val : out.test);
    target.systems.push_back(ds.systems[order[k]]);
  }
  return out;
}

Dataset filter_elements(const Dataset& ds, const std::set<int>& excluded) {
  Dataset out;
  out.energy_unit = ds.energy_unit;
  out.provenance = ds.provenance;
  for (const auto& s : ds.systems) {
    AtomicSystem kept;
    kept.energy = s.energy;
    std::vector<Vec3> forces;
    for (std::size_t a = 0; a < s.size(); ++a) {
      if (excluded.count(s.atomic_numbers[a])) continue;
      kept.atomic_numbers.push_back(s.atomic_numbers[a]);
      kept.positions.push_back(s.positions[a]);
      if (s.forces) forces.push_back((*s.forces)[a]);
    }
    if (kept.atomic_numbers.empty()) continue;
    if (s.forces) kept.forces = std::move(forces);
    out.systems.push_back(std::move(kept));
  }
  return out;
}

std::map<int, std::size_t> element_histogram(const Dataset& ds) {
  std::map<int, std::size_t> h;
  for (int z : kSupportedElements) h[z] = 0;
  for (const auto& s : ds.systems) {
    for (int z : s.atomic_numbers) ++h[z];
  }
  return h;
}

}  // namespace etpot::data
