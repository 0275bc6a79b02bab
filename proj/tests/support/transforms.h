#pragma once

#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "etpot/core/rng.h"
#include "etpot/geom/geometry.h"

namespace etpot::testing {

using geom::Vec3;
using Mat3 = std::array<std::array<double, 3>, 3>;

inline geom::AtomicSystem make_system(std::vector<int> z, std::vector<Vec3> pos) {
  geom::AtomicSystem s;
  s.atomic_numbers = std::move(z);
  s.positions = std::move(pos);
  return s;
}

// Rotation from a uniformly random unit quaternion.
inline Mat3 random_rotation(Rng& rng) {
  double q[4];
  double n = 0.0;
  for (double& c : q) {
    c = rng.normal();
    n += c * c;
  }
  n = std::sqrt(n);
  for (double& c : q) c /= n;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

inline Vec3 rotate(const Mat3& r, const Vec3& v) {
  Vec3 out{};
  for (int a = 0; a < 3; ++a) out[a] = r[a][0] * v[0] + r[a][1] * v[1] + r[a][2] * v[2];
  return out;
}

inline geom::AtomicSystem transformed(const geom::AtomicSystem& s, const Mat3& r, const Vec3& t) {
  geom::AtomicSystem out = s;
  for (auto& p : out.positions) {
    p = rotate(r, p);
    for (int a = 0; a < 3; ++a) p[a] += t[a];
  }
  return out;
}

inline geom::AtomicSystem permuted(const geom::AtomicSystem& s, const std::vector<std::size_t>& perm) {
  geom::AtomicSystem out = s;
  for (std::size_t k = 0; k < perm.size(); ++k) {
    out.atomic_numbers[k] = s.atomic_numbers[perm[k]];
    out.positions[k] = s.positions[perm[k]];
  }
  return out;
}

// Random molecule-like cloud: atoms placed one by one at least `min_sep`
// apart inside a box of side `box`.
inline geom::AtomicSystem random_system(Rng& rng, std::size_t n, double box = 3.0,
                                        double min_sep = 0.8) {
  static constexpr int kElements[] = {1, 6, 7, 8, 9};
  geom::AtomicSystem s;
  while (s.positions.size() < n) {
    Vec3 p{rng.uniform(0, box), rng.uniform(0, box), rng.uniform(0, box)};
    bool ok = true;
    for (const auto& q : s.positions) ok = ok && geom::distance(p, q) >= min_sep;
    if (!ok) continue;
    s.positions.push_back(p);
    s.atomic_numbers.push_back(kElements[rng.below(5)]);
  }
  return s;
}

}  // namespace etpot::testing
