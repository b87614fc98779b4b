#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"

namespace sketch_rl {

using Json = nlohmann::json;

// One JSON object per line; blank lines are skipped.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& value);

// Required-field accessors that raise kIo errors naming the field and line.
std::string require_string(const Json& row, const char* field);

}  // namespace sketch_rl
