#include "etpot/core/elements.h"

#include <algorithm>
#include <stdexcept>

namespace etpot {

namespace {

struct ElementData {
  int z;
  std::string_view symbol;
  double mass;
  double covalent_radius;
};

constexpr std::array<ElementData, 5> kElements{{
    {1, "H", 1.008, 0.31},
    {6, "C", 12.011, 0.76},
    {7, "N", 14.007, 0.71},
    {8, "O", 15.999, 0.66},
    {9, "F", 18.998, 0.57},
}};

const ElementData* find(int z) {
  auto it = std::find_if(kElements.begin(), kElements.end(),
                         [z](const ElementData& e) { return e.z == z; });
  return it == kElements.end() ? nullptr : &*it;
}

}  // namespace

bool is_supported_element(int atomic_number) {
  return find(atomic_number) != nullptr;
}

std::optional<int> atomic_number_from_symbol(std::string_view symbol) {
  for (const auto& e : kElements) {
    if (e.symbol == symbol) return e.z;
  }
  return std::nullopt;
}

std::string element_symbol(int atomic_number) {
  const auto* e = find(atomic_number);
  if (!e) {
    throw std::invalid_argument("unsupported atomic number " +
                                std::to_string(atomic_number));
  }
  return std::string(e->symbol);
}

std::optional<double> atomic_mass(int atomic_number) {
  const auto* e = find(atomic_number);
  if (!e) return std::nullopt;
  return e->mass;
}

std::optional<double> covalent_radius(int atomic_number) {
  const auto* e = find(atomic_number);
  if (!e) return std::nullopt;
  return e->covalent_radius;
}

}  // namespace etpot
