#include "sketch_rl/rewards.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "sketch_rl/error.hpp"

namespace sketch_rl {
namespace {

bool is_trailing_punct(char c) {
  return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?';
}

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    fail(ErrorCategory::kInvalidArgument,
         std::string("reward weight ") + name + " outside [0,1]");
  }
}

}  // namespace

std::string AnswerNormalizer::normalize(std::string_view text, AnswerKind kind) const {
  std::string out;
  if (collapse_whitespace) {
    for (std::string_view w : split_whitespace(text)) {
      if (!out.empty()) out += ' ';
      out += w;
    }
  } else {
    out = std::string(trim(text));
  }
  if (strip_trailing_punctuation) {
    while (!out.empty() && is_trailing_punct(out.back())) out.pop_back();
    out = std::string(trim(out));
  }
  if (kind == AnswerKind::kMultipleChoice && strip_brackets && out.size() >= 2) {
    const char open = out.front();
    const char close = out.back();
    if ((open == '(' && close == ')') || (open == '[' && close == ']')) {
      out = std::string(trim(std::string_view(out).substr(1, out.size() - 2)));
    }
  }
  if (case_fold) {
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

double accuracy_reward(const Trace& trace, const Question& question,
                       const AnswerNormalizer& normalizer) {
  if (!trace.well_formed) return 0.0;
  const std::string got = normalizer.normalize(trace.answer, question.answer_kind);
  const std::string want = normalizer.normalize(question.gold_answer, question.answer_kind);
  return !got.empty() && got == want ? 1.0 : 0.0;
}

double format_reward(const Trace& trace) { return trace.well_formed ? 1.0 : 0.0; }

double style_reward(const Trace& trace, const Judge& judge, JudgeMode mode) {
  return judge.score(trace.thinking, mode).score;
}

void RewardWeights::validate() const {
  check_unit(accuracy, "accuracy");
  check_unit(format, "format");
  check_unit(style, "style");
  if (std::abs(accuracy + format + style - 1.0) > 1e-9) {
    fail(ErrorCategory::kInvalidArgument, "reward weights must sum to 1");
  }
}

RewardWeights RewardWeights::renormalized() const {
  const double total = accuracy + format + style;
  if (!(total > 0.0)) fail(ErrorCategory::kInvalidArgument, "reward weights sum to 0");
  return {accuracy / total, format / total, style / total};
}

double composite_reward(const RewardComponents& c, const RewardWeights& w) {
  return w.accuracy * c.accuracy + w.format * c.format + w.style * c.style;
}

WeightSchedule WeightSchedule::make_fixed(RewardWeights w) {
  WeightSchedule s;
  s.kind = Kind::kFixed;
  s.fixed = w;
  s.validate();
  return s;
}

WeightSchedule WeightSchedule::make_staged(std::vector<StagedWeights> stages) {
  WeightSchedule s;
  s.kind = Kind::kStaged;
  s.stages = std::move(stages);
  s.validate();
  return s;
}

WeightSchedule WeightSchedule::make_dynamic(RewardWeights start, RewardWeights end,
                                            std::int64_t total_steps) {
  WeightSchedule s;
  s.kind = Kind::kDynamic;
  s.start = start;
  s.end = end;
  s.total_steps = total_steps;
  s.validate();
  return s;
}

WeightSchedule WeightSchedule::default_staged() {
  return make_staged({{30, {0.45, 0.40, 0.15}},
                      {60, {0.50, 0.40, 0.10}},
                      {std::numeric_limits<std::int64_t>::max(), {0.55, 0.40, 0.05}}});
}

WeightSchedule WeightSchedule::default_dynamic(std::int64_t total_steps) {
  return make_dynamic({0.45, 0.40, 0.15}, {0.55, 0.40, 0.05}, total_steps);
}

void WeightSchedule::validate() const {
  switch (kind) {
    case Kind::kFixed:
      fixed.validate();
      break;
    case Kind::kStaged:
      if (stages.empty()) fail(ErrorCategory::kConfig, "staged schedule has no stages");
      for (std::size_t i = 0; i < stages.size(); ++i) {
        stages[i].weights.validate();
        if (stages[i].step_upper_bound <= 0 ||
            (i > 0 && stages[i].step_upper_bound <= stages[i - 1].step_upper_bound)) {
          fail(ErrorCategory::kConfig,
               "staged schedule bounds must be positive and strictly increasing");
        }
      }
      break;
    case Kind::kDynamic:
      start.validate();
      end.validate();
      if (total_steps <= 0) {
        fail(ErrorCategory::kConfig, "dynamic schedule needs total_steps > 0");
      }
      break;
  }
}

std::string_view to_string(WeightSchedule::Kind kind) {
  switch (kind) {
    case WeightSchedule::Kind::kFixed: return "fixed";
    case WeightSchedule::Kind::kStaged: return "staged";
    case WeightSchedule::Kind::kDynamic: return "dynamic";
  }
  return "fixed";
}

RewardWeights weights_at(const WeightSchedule& schedule, std::int64_t step) {
  if (step < 0) fail(ErrorCategory::kInvalidArgument, "negative schedule step");
  switch (schedule.kind) {
    case WeightSchedule::Kind::kFixed:
      return schedule.fixed;
    case WeightSchedule::Kind::kStaged:
      for (const StagedWeights& stage : schedule.stages) {
        if (step < stage.step_upper_bound) return stage.weights;
      }
      return schedule.stages.back().weights;
    case WeightSchedule::Kind::kDynamic: {
      if (step > schedule.total_steps) {
        fail(ErrorCategory::kInvalidArgument,
             "step " + std::to_string(step) + " beyond dynamic schedule length " +
                 std::to_string(schedule.total_steps));
      }
      const double t = static_cast<double>(step) / static_cast<double>(schedule.total_steps);
      const RewardWeights& a = schedule.start;
      const RewardWeights& b = schedule.end;
      return {std::lerp(a.accuracy, b.accuracy, t), std::lerp(a.format, b.format, t),
              std::lerp(a.style, b.style, t)};
    }
  }
  return schedule.fixed;
}

}  // namespace sketch_rl
