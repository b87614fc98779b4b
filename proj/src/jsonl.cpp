#include "sketch_rl/jsonl.hpp"

#include <fstream>
#include <string>

#include "sketch_rl/error.hpp"

namespace sketch_rl {

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::kIo, "cannot open " + path.string());
  std::vector<Json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      fail(ErrorCategory::kIo, path.string() + ":" + std::to_string(line_no) +
                                   ": " + e.what());
    }
    if (!rows.back().is_object()) {
      fail(ErrorCategory::kIo, path.string() + ":" + std::to_string(line_no) +
                                   ": expected a JSON object");
    }
  }
  return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::kIo, "cannot write " + path.string());
  for (const Json& row : rows) out << row.dump() << '\n';
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::kIo, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    fail(ErrorCategory::kIo, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& value) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::kIo, "cannot write " + path.string());
  out << value.dump(2) << '\n';
}

std::string require_string(const Json& row, const char* field) {
  auto it = row.find(field);
  if (it == row.end() || !it->is_string()) {
    fail(ErrorCategory::kIo,
         std::string("missing string field '") + field + "' in " + row.dump());
  }
  return it->get<std::string>();
}

}  // namespace sketch_rl
