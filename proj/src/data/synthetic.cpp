#include "etpot/data/synthetic.h"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "etpot/core/elements.h"
#include "etpot/core/rng.h"

namespace etpot::data {

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("synthetic spec: " + m); };
  if (atomic_numbers.empty()) fail("no atoms");
  if (atomic_numbers.size() != equilibrium.size()) fail("elements and positions differ in count");
  for (int z : atomic_numbers) {
    if (!is_supported_element(z)) fail("unsupported atomic number " + std::to_string(z));
  }
  for (const auto& b : bonds) {
    if (b.i >= atomic_numbers.size() || b.j >= atomic_numbers.size() || b.i == b.j) {
      fail("bond " + std::to_string(b.i) + "-" + std::to_string(b.j) + " is invalid");
    }
    if (!(b.length > 0 && b.stiffness > 0 && b.depth > 0 && b.width > 0)) {
      fail("bond parameters must be positive");
    }
  }
  if (!(displacement >= 0.0)) fail("displacement must be non-negative");
  if (samples < 1) fail("samples must be >= 1");
}

SynthSpec morse_triatomic(std::size_t samples, double displacement, std::uint64_t seed) {
  SynthSpec s;
  s.potential = Potential::Morse;
  s.atomic_numbers = {8, 1, 1};
  const double r = 0.9572;
  const double angle = 104.52 * std::numbers::pi / 180.0;
  s.equilibrium = {{0, 0, 0}, {r, 0, 0}, {r * std::cos(angle), r * std::sin(angle), 0}};
  for (auto [i, j] : {std::pair<std::size_t, std::size_t>{0, 1}, {0, 2}, {1, 2}}) {
    Bond b;
    b.i = i;
    b.j = j;
    b.length = geom::distance(s.equilibrium[i], s.equilibrium[j]);
    b.depth = 1.0;
    b.width = 2.0;
    s.bonds.push_back(b);
  }
  s.displacement = displacement;
  s.samples = samples;
  s.seed = seed;
  return s;
}

Evaluation evaluate_potential(const SynthSpec& spec, const std::vector<Vec3>& pos) {
  Evaluation out;
  out.forces.assign(pos.size(), {0, 0, 0});
  for (const auto& b : spec.bonds) {
    Vec3 diff{pos[b.i][0] - pos[b.j][0], pos[b.i][1] - pos[b.j][1], pos[b.i][2] - pos[b.j][2]};
    const double d = std::sqrt(diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2]);
    const double x = d - b.length;
    double dE_dd = 0.0;
    if (spec.potential == Potential::Harmonic) {
      out.energy += 0.5 * b.stiffness * x * x;
      dE_dd = b.stiffness * x;
    } else {
      const double e = std::exp(-b.width * x);
      out.energy += b.depth * (1.0 - e) * (1.0 - e);
      dE_dd = 2.0 * b.depth * b.width * e * (1.0 - e);
    }
    for (int a = 0; a < 3; ++a) {
      const double g = dE_dd * diff[a] / d;  // dE/dr_i
      out.forces[b.i][a] -= g;
      out.forces[b.j][a] += g;
    }
  }
  return out;
}

Dataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Dataset ds;
  ds.energy_unit = EnergyUnit::ModelUnit;
  ds.provenance = std::string(spec.potential == Potential::Morse ? "morse" : "harmonic") +
                  " synthetic, seed " + std::to_string(spec.seed);
  for (std::size_t k = 0; k < spec.samples; ++k) {
    AtomicSystem s;
    s.atomic_numbers = spec.atomic_numbers;
    s.positions = spec.equilibrium;
    for (auto& p : s.positions) {
      for (double& c : p) c += spec.displacement * rng.normal();
    }
    const auto e = evaluate_potential(spec, s.positions);
    s.energy = e.energy;
    s.forces = e.forces;
    ds.systems.push_back(std::move(s));
  }
  return ds;
}

namespace {

std::vector<double> numbers(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(key + ": '" + item + "' is not a number");
    }
  }
  return out;
}

std::vector<double> per_bond(const KeyValueConfig& c, const std::string& key, std::size_t bonds,
                             double fallback) {
  if (!c.contains(key)) return std::vector<double>(bonds, fallback);
  auto v = numbers(key, *c.get(key));
  if (v.size() == 1) return std::vector<double>(bonds, v[0]);
  if (v.size() != bonds) {
    throw ConfigError(key + ": expected 1 or " + std::to_string(bonds) + " values");
  }
  return v;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SynthSpec read_synth_spec(const KeyValueConfig& c) {
  c.require_known({"potential", "elements", "positions", "bonds", "lengths", "stiffness", "depth",
                   "width", "displacement", "samples", "seed"});
  SynthSpec s;
  const std::string pot = c.get_string("potential", "morse");
  if (pot == "morse") {
    s.potential = Potential::Morse;
  } else if (pot == "harmonic") {
    s.potential = Potential::Harmonic;
  } else {
    throw ConfigError("potential must be harmonic or morse, got '" + pot + "'");
  }
  for (const auto& sym : split_list(c.get_string("elements", ""))) {
    auto z = atomic_number_from_symbol(sym);
    if (!z) throw ConfigError("elements: unknown symbol '" + sym + "'");
    s.atomic_numbers.push_back(*z);
  }
  for (const auto& row : split_list(c.get_string("positions", ""), ';')) {
    std::istringstream in(row);
    Vec3 p{};
    std::string extra;
    if (!(in >> p[0] >> p[1] >> p[2]) || (in >> extra)) {
      throw ConfigError("positions: '" + row + "' is not three numbers");
    }
    s.equilibrium.push_back(p);
  }
  const std::size_t n = s.atomic_numbers.size();
  if (c.contains("bonds")) {
    for (const auto& item : split_list(*c.get("bonds"))) {
      const auto dash = item.find('-');
      try {
        if (dash == std::string::npos) throw std::invalid_argument(item);
        s.bonds.push_back({std::stoul(item.substr(0, dash)), std::stoul(item.substr(dash + 1))});
      } catch (const std::exception&) {
        throw ConfigError("bonds: '" + item + "' is not of the form i-j");
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) s.bonds.push_back({i, j});
    }
  }
  for (const auto& b : s.bonds) {
    if (b.i >= s.equilibrium.size() || b.j >= s.equilibrium.size()) {
      throw ConfigError("bond " + std::to_string(b.i) + "-" + std::to_string(b.j) +
                        " refers to a missing atom");
    }
  }
  std::vector<double> natural;
  for (const auto& b : s.bonds) natural.push_back(geom::distance(s.equilibrium[b.i], s.equilibrium[b.j]));
  std::vector<double> lengths = natural;
  if (c.contains("lengths")) lengths = per_bond(c, "lengths", s.bonds.size(), 1.0);
  const auto k = per_bond(c, "stiffness", s.bonds.size(), 1.0);
  const auto depth = per_bond(c, "depth", s.bonds.size(), 1.0);
  const auto width = per_bond(c, "width", s.bonds.size(), 2.0);
  for (std::size_t b = 0; b < s.bonds.size(); ++b) {
    s.bonds[b].length = lengths[b];
    s.bonds[b].stiffness = k[b];
    s.bonds[b].depth = depth[b];
    s.bonds[b].width = width[b];
  }
  s.displacement = c.get_double("displacement", 0.1);
  const long long samples = c.get_int("samples", 100);
  if (samples < 1) throw ConfigError("samples must be >= 1");
  s.samples = static_cast<std::size_t>(samples);
  const long long seed = c.get_int("seed", 0);
  if (seed < 0) throw ConfigError("seed must be non-negative");
  s.seed = static_cast<std::uint64_t>(seed);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  return read_synth_spec(KeyValueConfig::load(path));
}

KeyValueConfig write_synth_spec(const SynthSpec& s) {
  KeyValueConfig c;
  c.set("potential", s.potential == Potential::Morse ? "morse" : "harmonic");
  std::string elements, positions, bonds, lengths, stiffness, depth, width;
  auto join = [](std::string& acc, const std::string& item, const char* sep) {
    acc += (acc.empty() ? "" : sep) + item;
  };
  for (int z : s.atomic_numbers) join(elements, element_symbol(z), ", ");
  for (const auto& p : s.equilibrium) {
    join(positions, exact(p[0]) + " " + exact(p[1]) + " " + exact(p[2]), "; ");
  }
  for (const auto& b : s.bonds) {
    join(bonds, std::to_string(b.i) + "-" + std::to_string(b.j), ", ");
    join(lengths, exact(b.length), ", ");
    join(stiffness, exact(b.stiffness), ", ");
    join(depth, exact(b.depth), ", ");
    join(width, exact(b.width), ", ");
  }
  c.set("elements", elements);
  c.set("positions", positions);
  c.set("bonds", bonds);
  c.set("lengths", lengths);
  c.set("stiffness", stiffness);
  c.set("depth", depth);
  c.set("width", width);
  c.set("displacement", exact(s.displacement));
  c.set("samples", std::to_string(s.samples));
  c.set("seed", std::to_string(s.seed));
  return c;
}

}  // namespace etpot::data
