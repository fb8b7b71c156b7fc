#pragma once

#include <iosfwd>
#include <string>

#include "rkforge/tableau.hpp"

namespace rkforge {

/// Writes the structured-text tableau format. Field order is fixed:
/// s, u, c[], A[][], b[], B[][], d[][]. Numbers are exact p/q rationals
/// where the pair retains them and 17-significant-digit decimals otherwise.
/// Lines starting with '#' are comments.
void write_tableau(std::ostream& os, const ContinuousPair& pair);
void write_tableau_file(const std::string& path, const ContinuousPair& pair);

/// Parses the format above. Throws rkforge::error on malformed input.
ContinuousPair read_tableau(std::istream& is);
ContinuousPair read_tableau_file(const std::string& path);

/// Formats a double with 17 significant digits (round-trips bit-exactly).
std::string format_number(double v);

}  // namespace rkforge
