#pragma once

#include <string>

namespace mobprof {

/// Shortest-safe decimal form of a double: 17 significant digits.
std::string format_double(double value);

}  // namespace mobprof
