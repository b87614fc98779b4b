#pragma once

#include <string>
#include <string_view>

#include "sketch_rl/core.hpp"

namespace sketch_rl {

enum class ConversionSource { kLlm, kRule };

std::string_view to_string(ConversionSource source);
ConversionSource conversion_source_from_string(std::string_view text);

// A long reasoning trace paired with its sketch-style rewrite.
struct ConversionRecord {
  std::string id;
  Question question;
  std::string long_cot;
  std::string sketch_cot;
  ConversionSource source = ConversionSource::kRule;
  bool validated = false;
};

}  // namespace sketch_rl
