#pragma once

#include <string>

namespace psc {

// Shortest decimal that parses back to exactly v.
std::string format_number(double v);

}  // namespace psc
