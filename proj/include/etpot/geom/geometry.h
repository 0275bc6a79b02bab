#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace etpot::geom {

using Vec3 = std::array<double, 3>;

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One molecule: atomic numbers, positions in Angstrom, optional labels.
struct AtomicSystem {
  std::vector<int> atomic_numbers;
  std::vector<Vec3> positions;
  std::optional<double> energy;
  std::optional<std::vector<Vec3>> forces;

  std::size_t size() const noexcept { return atomic_numbers.size(); }
  /// Throws GeometryError on a broken invariant.
  void validate() const;
};

/// Directed within-cutoff pairs. Entry k relates receiving atom first[k] to
/// neighbor second[k]; directions[k] = (r_first - r_second) / distance.
struct NeighborTable {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
  std::vector<double> distances;
  std::vector<Vec3> directions;

  std::size_t size() const noexcept { return first.size(); }
};

/// All ordered pairs i != j with |r_i - r_j| <= cutoff, sorted by (i, j).
/// Brute force O(N^2); no periodic images. Coincident atoms are an error.
NeighborTable build_neighbor_table(const AtomicSystem& system, double cutoff);

/// Exponential-normal radial basis: centers and widths in exp(-d) space.
struct RbfParams {
  std::vector<double> centers;
  std::vector<double> widths;
  double cutoff = 5.0;

  std::size_t size() const noexcept { return centers.size(); }
};

/// Centers equally spaced on [exp(-cutoff), 1]; every width
/// (2/K * (1 - exp(-cutoff)))^-2.
RbfParams init_rbf(std::size_t count, double cutoff);

/// 0.5 * (cos(pi d / cutoff) + 1) for d <= cutoff, exactly 0 beyond.
double cosine_cutoff(double distance, double cutoff);

/// phi(d) * exp(-beta_k (exp(-d) - mu_k)^2) for each basis function.
std::vector<double> rbf_expand(double distance, const RbfParams& params);

double distance(const Vec3& a, const Vec3& b);

}  // namespace etpot::geom
