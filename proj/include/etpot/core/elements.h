#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace etpot {

/// Elements the model, parsers and analyses accept.
inline constexpr std::array<int, 5> kSupportedElements{1, 6, 7, 8, 9};

bool is_supported_element(int atomic_number);

/// Case-sensitive standard symbol lookup ("H", "C", ...). nullopt if unknown.
std::optional<int> atomic_number_from_symbol(std::string_view symbol);

/// Throws std::invalid_argument for elements outside the supported set.
std::string element_symbol(int atomic_number);

/// Standard atomic weights (u) used for centers of mass.
std::optional<double> atomic_mass(int atomic_number);

/// Single-bond covalent radii (Angstrom), Cordero et al. 2008.
std::optional<double> covalent_radius(int atomic_number);

/// eV -> kcal/mol.
inline constexpr double kKcalPerMolPerEv = 23.060548;

}  // namespace etpot
