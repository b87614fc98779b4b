#pragma once

#include <string>
#include <string_view>

namespace sketch_rl {

// Shortest round-trip decimal form; stable across runs.
std::string format_number(double value);

// Quotes a field when it contains a comma, quote or newline.
std::string csv_field(std::string_view text);

}  // namespace sketch_rl
