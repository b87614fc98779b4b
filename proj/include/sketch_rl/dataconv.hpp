#pragma once

// Long-to-sketch reasoning conversion and cold-start corpus construction.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sketch_rl/conversion_record.hpp"
#include "sketch_rl/core.hpp"
#include "sketch_rl/judge.hpp"
#include "sketch_rl/jsonl.hpp"
#include "sketch_rl/llm_client.hpp"

namespace sketch_rl {

// The conversion instructions with the worked example; long_cot fills the
// trailing slot.
std::string render_conversion_prompt(std::string_view long_cot);

// Sends the conversion prompt; returns the reply stripped of surrounding
// whitespace. Throws Error(kEmptyOutput) on a blank reply.
std::string convert_llm(LlmClient& client, std::string_view long_cot);

struct RuleConverterConfig {
  // Upper bound on tokens per emitted line, step marker included.
  int max_step_tokens = 12;
  // Leading discourse fillers, matched case-insensitively at the start of a
  // sentence. A sentence left with no alphanumeric text is dropped.
  std::vector<std::string> fillers = {
      "let's think step by step", "let me think", "let's see", "let us see",
      "first of all", "in other words", "we need to", "let's", "let us",
      "alright", "okay", "hmm", "well", "wait", "now", "so", "ok"};
  // Words whose trailing period does not end a sentence.
  std::vector<std::string> abbreviations = {"e.g.", "i.e.", "etc.", "vs.", "approx.",
                                            "dr.",  "mr.",  "mrs.", "ms.", "st.",
                                            "fig.", "no.",  "eq."};
  RuleJudgeConfig judge;
  Tokenizer tokenizer = Tokenizer::whitespace();
};

// Terminators are '.', '?', '!' followed by whitespace or end of text, and
// newlines. Abbreviations in the config do not terminate.
std::vector<std::string> split_sentences(std::string_view text,
                                         const RuleConverterConfig& config = {});

// Offline converter: numbered list of filler-free sentences, each cut to the
// step budget. Inputs already accepted by the rule judge come back unchanged.
// Throws Error(kEmptyOutput) for blank input.
std::string convert_rule_based(std::string_view long_cot,
                               const RuleConverterConfig& config = {});

// Sets validated from: rule judge accepts the sketch, sketch has strictly
// fewer tokens than the long trace, and no numbered step is empty.
ConversionRecord validate_record(ConversionRecord record, const Tokenizer& tokenizer,
                                 const RuleJudgeConfig& judge_config);

struct ConversionInput {
  Question question;
  std::string long_cot;
};

std::vector<ConversionInput> read_conversion_inputs(const std::filesystem::path& path);

Json to_json(const ConversionRecord& record);
ConversionRecord record_from_json(const Json& j);
std::vector<ConversionRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path,
                   std::span<const ConversionRecord> records);

struct ConversionFailure {
  std::string id;
  std::string message;
};

struct CorpusSummary {
  std::size_t count = 0;
  std::size_t validated = 0;
  // Empty for an empty corpus.
  std::optional<double> validation_rate;
  // Mean of sketch tokens / long tokens over converted records.
  std::optional<double> mean_compression_ratio;
  std::vector<ConversionFailure> failures;
  bool below_floor = false;

  Json to_json() const;
};

struct CorpusResult {
  std::vector<ConversionRecord> records;
  CorpusSummary summary;
};

struct CorpusOptions {
  // nullptr selects the rule converter.
  LlmClient* client = nullptr;
  RuleConverterConfig rule;
  double min_validation_rate = 0.8;
  int threads = 1;
};

// Order-preserving. Per-record failures are collected in the summary;
// summary.below_floor flags a validation rate under the configured floor.
CorpusResult build_cold_start_corpus(std::span<const ConversionInput> inputs,
                                     const CorpusOptions& options);

}  // namespace sketch_rl
