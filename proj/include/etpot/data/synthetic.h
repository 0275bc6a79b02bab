#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "etpot/core/keyvalue.h"
#include "etpot/data/dataset.h"

namespace etpot::data {

enum class Potential { Harmonic, Morse };

/// Harmonic: E = k/2 (d - d0)^2.  Morse: E = D (1 - exp(-a (d - d0)))^2.
struct Bond {
  std::size_t i = 0;
  std::size_t j = 0;
  double length = 1.0;     // d0
  double stiffness = 1.0;  // k, harmonic
  double depth = 1.0;      // D, Morse
  double width = 1.0;      // a, Morse
};

struct SynthSpec {
  Potential potential = Potential::Morse;
  std::vector<int> atomic_numbers;
  std::vector<Vec3> equilibrium;
  std::vector<Bond> bonds;
  double displacement = 0.1;  // Gaussian sigma per coordinate, Angstrom
  std::size_t samples = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Bent triatomic (O, H, H) with all three pairs bonded at their equilibrium
/// lengths; Morse D = 1, a = 2.
SynthSpec morse_triatomic(std::size_t samples, double displacement, std::uint64_t seed);

/// Energy and exact analytic forces (-dE/dr) of one geometry.
struct Evaluation {
  double energy = 0.0;
  std::vector<Vec3> forces;
};
Evaluation evaluate_potential(const SynthSpec& spec, const std::vector<Vec3>& positions);

/// Equilibrium geometry plus independent Gaussian displacements of every
/// coordinate; energies in model units.
Dataset generate_synthetic(const SynthSpec& spec);

/// Key-value schema:
///   potential    = harmonic | morse
///   elements     = O, H, H
///   positions    = x y z; x y z; ...       (Angstrom)
///   bonds        = 0-1, 0-2                (default: every pair)
///   lengths      = d0 per bond             (default: equilibrium distances)
///   stiffness    = k, one value or per bond (harmonic)
///   depth, width = D and a, one value or per bond (Morse)
///   displacement = sigma, samples = count, seed = integer
SynthSpec read_synth_spec(const KeyValueConfig& config);
SynthSpec load_synth_spec(const std::filesystem::path& path);
KeyValueConfig write_synth_spec(const SynthSpec& spec);

}  // namespace etpot::data
