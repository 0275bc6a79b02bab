#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "etpot/core/keyvalue.h"
#include "etpot/geom/geometry.h"

namespace etpot::data {

using geom::AtomicSystem;
using geom::Vec3;

/// Energies are kept in the declared unit; lengths are always Angstrom and
/// forces are energy unit per Angstrom.
enum class EnergyUnit { ModelUnit, Ev, KcalPerMol };

std::string to_string(EnergyUnit unit);
/// "model", "eV", "kcal/mol".
EnergyUnit parse_energy_unit(std::string_view text);

struct Dataset {
  std::vector<AtomicSystem> systems;
  EnergyUnit energy_unit = EnergyUnit::ModelUnit;
  std::string provenance;

  std::size_t size() const noexcept { return systems.size(); }
  /// Every system valid; forces imply an energy.
  void validate() const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Extended XYZ: per frame a count line, a comment line of key=value pairs
/// (energy=... is read; Properties=... decides whether force columns are
/// expected) and one line per atom: symbol x y z [fx fy fz].
Dataset parse_extxyz(std::string_view text, EnergyUnit unit = EnergyUnit::ModelUnit,
                     std::string provenance = {});
/// Writes values with 17 significant digits so parsing restores them exactly.
std::string write_extxyz(const Dataset& dataset);

Dataset read_extxyz_file(const std::filesystem::path& path, EnergyUnit unit = EnergyUnit::ModelUnit);
void write_extxyz_file(const std::filesystem::path& path, const Dataset& dataset);

/// Manifest keys: files (comma list, relative to the manifest), energy_unit,
/// provenance.
Dataset load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<std::string>& files,
                    EnergyUnit unit, const std::string& provenance);

/// Explicit eV <-> kcal/mol conversion of energies and forces. Converting to
/// or from ModelUnit (other than identity) throws std::invalid_argument.
Dataset convert_energy_unit(const Dataset& dataset, EnergyUnit target);

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Seeded shuffle, then the first n_train, the next n_val, the rest as test.
Splits split(const Dataset& dataset, std::size_t n_train, std::size_t n_val, std::uint64_t seed);

/// Removes atoms of the excluded elements (and their force rows); drops
/// systems left without atoms.
Dataset filter_elements(const Dataset& dataset, const std::set<int>& excluded);

/// Atom counts per atomic number; supported elements always present.
std::map<int, std::size_t> element_histogram(const Dataset& dataset);

}  // namespace etpot::data
