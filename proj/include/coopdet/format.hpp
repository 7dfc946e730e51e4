// format.hpp: numeric text output shared by all CSV/JSON writers

#pragma once

#include <string>

namespace coopdet {

// hbar in eV * fs; converts model time (hbar/eV) to femtoseconds.
inline constexpr double kHbarEvFs = 0.6582119569;

// Scientific notation with 12 significant digits, e.g. "2.400000000000e+00".
std::string format_number(double x);

}  // namespace coopdet
