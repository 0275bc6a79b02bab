#include "etpot/geom/geometry.h"

#include <cmath>
#include <numbers>
#include <string>

#include "etpot/core/elements.h"

namespace etpot::geom {

void AtomicSystem::validate() const {
  if (atomic_numbers.empty()) throw GeometryError("system has no atoms");
  if (positions.size() != atomic_numbers.size()) {
    throw GeometryError("positions count " + std::to_string(positions.size()) +
                        " != atom count " + std::to_string(atomic_numbers.size()));
  }
  for (int z : atomic_numbers) {
    if (!is_supported_element(z)) {
      throw GeometryError("unsupported atomic number " + std::to_string(z));
    }
  }
  for (const auto& p : positions) {
    for (double c : p) {
      if (!std::isfinite(c)) throw GeometryError("non-finite position");
    }
  }
  if (forces && forces->size() != atomic_numbers.size()) {
    throw GeometryError("forces shape does not match atom count");
  }
  if (energy && !std::isfinite(*energy)) throw GeometryError("non-finite energy");
}

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

NeighborTable build_neighbor_table(const AtomicSystem& system, double cutoff) {
  if (!(cutoff > 0.0)) throw GeometryError("cutoff must be positive");
  NeighborTable table;
  const auto& pos = system.positions;
  const std::size_t n = pos.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = distance(pos[i], pos[j]);
      if (d == 0.0) {
        throw GeometryError("atoms " + std::to_string(i) + " and " + std::to_string(j) +
                            " are at identical positions");
      }
      if (d > cutoff) continue;
      table.first.push_back(i);
      table.second.push_back(j);
      table.distances.push_back(d);
      table.directions.push_back({(pos[i][0] - pos[j][0]) / d, (pos[i][1] - pos[j][1]) / d,
                                  (pos[i][2] - pos[j][2]) / d});
    }
  }
  return table;
}

RbfParams init_rbf(std::size_t count, double cutoff) {
  if (count < 2) throw std::invalid_argument("init_rbf needs at least 2 basis functions");
  if (!(cutoff > 0.0)) throw std::invalid_argument("init_rbf needs a positive cutoff");
  RbfParams params;
  params.cutoff = cutoff;
  const double start = std::exp(-cutoff);
  const double step = (1.0 - start) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) {
    params.centers.push_back(k + 1 == count ? 1.0 : start + step * static_cast<double>(k));
  }
  const double width = 2.0 / static_cast<double>(count) * (1.0 - start);
  params.widths.assign(count, 1.0 / (width * width));
  return params;
}

double cosine_cutoff(double d, double cutoff) {
  if (d > cutoff) return 0.0;
  return 0.5 * (std::cos(std::numbers::pi * d / cutoff) + 1.0);
}

std::vector<double> rbf_expand(double d, const RbfParams& params) {
  std::vector<double> out(params.size(), 0.0);
  const double phi = cosine_cutoff(d, params.cutoff);
  if (phi == 0.0) return out;
  const double ed = std::exp(-d);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double diff = ed - params.centers[k];
    out[k] = phi * std::exp(-params.widths[k] * diff * diff);
  }
  return out;
}

}  // namespace etpot::geom
