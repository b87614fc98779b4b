#pragma once

// Thinking-style judges: a deterministic rule-based reference judge and an
// adapter over an external chat model, plus the judge-training-set builder.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sketch_rl/conversion_record.hpp"
#include "sketch_rl/core.hpp"
#include "sketch_rl/llm_client.hpp"

namespace sketch_rl {

enum class JudgeMode { kBinary, kDense };
enum class JudgeSource { kRule, kExternal };

std::string_view to_string(JudgeMode mode);
JudgeMode judge_mode_from_string(std::string_view text);
std::string_view to_string(JudgeSource source);

struct JudgeVerdict {
  double score = 0.0;
  JudgeMode mode = JudgeMode::kBinary;
  JudgeSource source = JudgeSource::kRule;
};

struct RuleJudgeConfig {
  int min_numbered_steps = 2;
  int max_mean_step_tokens = 15;
  int max_total_tokens = 120;

  void validate() const;
};

// Shape of a thinking segment as seen by the rule judge. A numbered step is
// a line whose first non-blank characters are an integer followed by a
// period and then whitespace or end of line.
struct StepProfile {
  int numbered_steps = 0;
  // Tokens on numbered lines, step marker included.
  std::size_t step_tokens = 0;
  std::size_t total_tokens = 0;
  // Numbered lines with nothing after the marker.
  int empty_steps = 0;

  double mean_step_tokens() const {
    return numbered_steps == 0 ? 0.0
                               : static_cast<double>(step_tokens) / numbered_steps;
  }
};

StepProfile profile_thinking(std::string_view thinking, const Tokenizer& tokenizer);

// Binary: 1 iff enough numbered steps, short steps on average, and a short
// total. Dense: 0.5 * [step form holds] + 0.5 * max(0, 1 - total/max_total).
JudgeVerdict rule_judge(std::string_view thinking, const RuleJudgeConfig& config,
                        const Tokenizer& tokenizer,
                        JudgeMode mode = JudgeMode::kBinary);

std::string render_judge_prompt(std::string_view thinking);

// Appended to the judge prompt in dense mode.
extern const std::string_view kDenseScoreInstruction;

// First decimal literal in the text, if any ("Score: 0.7" -> 0.7).
std::optional<double> parse_first_number(std::string_view text);

// Throws UnparseableReplyError when the reply carries no number.
JudgeVerdict external_judge(LlmClient& client, std::string_view thinking,
                            JudgeMode mode);

class Judge {
 public:
  virtual ~Judge() = default;
  virtual JudgeVerdict score(std::string_view thinking, JudgeMode mode) const = 0;
};

class RuleJudge final : public Judge {
 public:
  RuleJudge(RuleJudgeConfig config, Tokenizer tokenizer)
      : config_(config), tokenizer_(tokenizer) {
    config_.validate();
  }

  JudgeVerdict score(std::string_view thinking, JudgeMode mode) const override {
    return rule_judge(thinking, config_, tokenizer_, mode);
  }

  const RuleJudgeConfig& config() const noexcept { return config_; }

 private:
  RuleJudgeConfig config_;
  Tokenizer tokenizer_;
};

class ExternalJudge final : public Judge {
 public:
  explicit ExternalJudge(LlmClient& client) : client_(&client) {}

  JudgeVerdict score(std::string_view thinking, JudgeMode mode) const override {
    return external_judge(*client_, thinking, mode);
  }

 private:
  LlmClient* client_;
};

struct JudgeExample {
  std::string thinking;
  int label = 0;
  std::string origin_id;
};

// Two examples per record: (long, 0) then (sketch, 1), in record order.
std::vector<JudgeExample> build_judge_dataset(std::span<const ConversionRecord> records);

}  // namespace sketch_rl
