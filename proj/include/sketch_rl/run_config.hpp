#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "sketch_rl/core.hpp"
#include "sketch_rl/dataconv.hpp"
#include "sketch_rl/grpo.hpp"
#include "sketch_rl/jsonl.hpp"
#include "sketch_rl/judge.hpp"
#include "sketch_rl/llm_client.hpp"
#include "sketch_rl/metrics.hpp"
#include "sketch_rl/policy.hpp"
#include "sketch_rl/rewards.hpp"
#include "sketch_rl/sft.hpp"

namespace sketch_rl {

struct RunPaths {
  std::filesystem::path dataset;
  std::filesystem::path bank;
  std::filesystem::path conversion_inputs;
  // Empty: <output_dir>/corpus.jsonl
  std::filesystem::path corpus;
  // Starting policy for train-grpo. Empty: see GrpoInit.
  std::filesystem::path policy_init;
  // Policy for eval. Empty: <output_dir>/policy_grpo.json
  std::filesystem::path policy;
};

enum class JudgeKind { kRule, kExternal };
enum class ConverterKind { kRule, kLlm };
enum class GrpoInit { kUniform, kSft };

struct RunConfig {
  RunPaths paths;
  std::filesystem::path output_dir = "out";
  Tokenizer tokenizer = Tokenizer::whitespace();
  FormatSpec format;

  PolicyKind policy_kind = PolicyKind::kTemplate;
  int max_length = 64;

  JudgeKind judge_kind = JudgeKind::kRule;
  JudgeMode judge_mode = JudgeMode::kBinary;
  RuleJudgeConfig judge;

  // api_token is filled from SKETCH_RL_API_TOKEN, never from the file.
  HttpClientConfig client;

  ConverterKind converter_kind = ConverterKind::kRule;
  int max_step_tokens = 12;
  double min_validation_rate = 0.8;

  GrpoConfig grpo;
  // Used when paths.policy_init is empty.
  GrpoInit grpo_init = GrpoInit::kUniform;
  WeightSchedule schedule = WeightSchedule::make_fixed({0.5, 0.4, 0.1});
  SftConfig sft;

  bool eval_greedy = true;
  int eval_samples = 1;
  double eval_temperature = 1.0;

  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
  // Snapshot for manifests; contains no secrets.
  Json to_json() const;
};

// Relative paths in the file resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& yaml_text,
                           const std::filesystem::path& base_dir);

// Command-line overrides; flags win over the file.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::filesystem::path> output_dir;
};

void apply_overrides(RunConfig& config, const RunOverrides& overrides);

}  // namespace sketch_rl
