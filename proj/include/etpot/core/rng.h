#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace etpot {

/// Seeded random source with a fully specified output stream.
///
/// The raw bits come from std::mt19937_64, whose sequence is fixed by the
/// standard. Everything derived from it (uniforms, Gaussians, bounded integers,
/// shuffles) is computed here rather than through <random> distributions,
/// because those are implementation-defined and would make fixtures differ
/// between standard libraries.
///
///   uniform()  = (bits >> 11) * 2^-53, in [0, 1)
///   normal()   = Box-Muller on two uniforms, second value cached
///   below(n)   = rejection sampling on the top bits
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  /// Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n);

  /// Uniformly distributed point on the unit sphere.
  std::array<double, 3> unit_vector();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace etpot
