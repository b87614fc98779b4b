#pragma once

// One function per pipeline stage. Each reads its inputs from the run
// config, writes its outputs under config.output_dir, and finishes with a
// manifest_<command>.json listing the config, seed and artifact hashes.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sketch_rl/run_config.hpp"

namespace sketch_rl {

struct CommandOutput {
  // Paths of the files written, in write order.
  std::vector<std::filesystem::path> artifacts;
};

CommandOutput cmd_convert(const RunConfig& config);
CommandOutput cmd_judge_data(const RunConfig& config);
CommandOutput cmd_train_sft(const RunConfig& config);
CommandOutput cmd_train_grpo(const RunConfig& config);
CommandOutput cmd_eval(const RunConfig& config);
// traces: line-delimited objects with a "thinking" field and an optional
// "id" (or "origin_id").
CommandOutput cmd_judge(const RunConfig& config, const std::filesystem::path& traces);

// Lower-case hex.
std::string sha256_file(const std::filesystem::path& path);

// Writes <output_dir>/manifest_<command>.json and returns its path.
std::filesystem::path write_manifest(const RunConfig& config, std::string_view command,
                                     const CommandOutput& output);

}  // namespace sketch_rl
