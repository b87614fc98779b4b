#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sketch_rl/core.hpp"
#include "sketch_rl/jsonl.hpp"
#include "sketch_rl/policy.hpp"
#include "sketch_rl/rewards.hpp"

namespace sketch_rl {

// Efficiency of thinking: accuracy in percent over mean thinking tokens.
double eot(double accuracy_percent, double mean_tokens);

struct EvalRow {
  std::string question_id;
  // Greedy response, or the first sample in sampling mode.
  std::string response_raw;
  // Fraction of decoded responses judged correct (0 or 1 when greedy).
  double accuracy = 0.0;
  double thinking_tokens = 0.0;
};

struct EvalReport {
  double accuracy_percent = 0.0;
  double mean_thinking_tokens = 0.0;
  // NaN when mean_thinking_tokens is 0.
  double eot = 0.0;
  std::size_t n_questions = 0;
  std::vector<EvalRow> rows;

  Json summary_json() const;
  // question_id,accuracy,thinking_tokens,response_raw
  std::string rows_csv() const;
};

struct EvalOptions {
  bool greedy = true;
  int samples_per_question = 1;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  Tokenizer tokenizer = Tokenizer::whitespace();
  FormatSpec format;
  AnswerNormalizer normalizer;
};

// Token counts cover the thinking segment only.
EvalReport evaluate(const PolicyParams& policy, const std::vector<Question>& dataset,
                    const EvalOptions& options = {});

// Exact expectations under a template policy's softmax, from the bank's
// annotations.
struct ExpectedStats {
  double accuracy = 0.0;
  double format = 0.0;
  double style = 0.0;
  double thinking_tokens = 0.0;

  double composite(const RewardWeights& w) const {
    return w.accuracy * accuracy + w.format * format + w.style * style;
  }
};

ExpectedStats expected_stats(const PolicyParams& policy,
                             const std::vector<Question>& dataset,
                             double temperature = 1.0);

}  // namespace sketch_rl
