#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "sketch_rl/core.hpp"
#include "sketch_rl/judge.hpp"

namespace sketch_rl {

// Applied to both the model answer and the gold answer before comparison.
struct AnswerNormalizer {
  bool case_fold = true;
  bool collapse_whitespace = true;
  bool strip_trailing_punctuation = true;
  // Multiple choice only: "(b)", "[B]" -> "B".
  bool strip_brackets = true;

  std::string normalize(std::string_view text, AnswerKind kind) const;
};

double accuracy_reward(const Trace& trace, const Question& question,
                       const AnswerNormalizer& normalizer = {});
double format_reward(const Trace& trace);
double style_reward(const Trace& trace, const Judge& judge, JudgeMode mode);

struct RewardComponents {
  double accuracy = 0.0;
  double format = 0.0;
  double style = 0.0;
};

struct RewardWeights {
  double accuracy = 0.5;
  double format = 0.4;
  double style = 0.1;

  // Each in [0,1], sum 1 within 1e-9.
  void validate() const;
  // Scales the weights so they sum to 1 (used when a component is switched off).
  RewardWeights renormalized() const;
};

double composite_reward(const RewardComponents& components,
                        const RewardWeights& weights);

struct StagedWeights {
  // Exclusive upper bound on the 0-based step index.
  std::int64_t step_upper_bound = 0;
  RewardWeights weights;
};

struct WeightSchedule {
  enum class Kind { kFixed, kStaged, kDynamic };

  Kind kind = Kind::kFixed;
  RewardWeights fixed;
  std::vector<StagedWeights> stages;
  RewardWeights start;
  RewardWeights end;
  std::int64_t total_steps = 0;

  static WeightSchedule make_fixed(RewardWeights w);
  static WeightSchedule make_staged(std::vector<StagedWeights> stages);
  static WeightSchedule make_dynamic(RewardWeights start, RewardWeights end,
                                     std::int64_t total_steps);

  // 0.45/0.40/0.15 for steps [0,30), 0.50/0.40/0.10 for [30,60), then
  // 0.55/0.40/0.05.
  static WeightSchedule default_staged();
  // 0.45/0.40/0.15 -> 0.55/0.40/0.05 over total_steps.
  static WeightSchedule default_dynamic(std::int64_t total_steps);

  void validate() const;
};

std::string_view to_string(WeightSchedule::Kind kind);

RewardWeights weights_at(const WeightSchedule& schedule, std::int64_t step);

}  // namespace sketch_rl
