#include "sketch_rl/judge.hpp"

#include <algorithm>
#include <charconv>
#include <regex>

#include "sketch_rl/error.hpp"

namespace sketch_rl {
namespace {

constexpr std::string_view kJudgePromptHead =
    "Give a score of 1 for sketch-style thinking and a score of 0 for normal "
    "thinking. Normal thinking contains detailed analysis. Sketch-style "
    "thinking contains only the key logic flow. Only output the final score. "
    "Now, score this thinking process: ";

// Returns the byte offset just past the step marker, or npos.
std::size_t step_marker_end(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  const std::size_t digits_begin = i;
  while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
  if (i == digits_begin || i >= line.size() || line[i] != '.') {
    return std::string_view::npos;
  }
  ++i;
  if (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
    return std::string_view::npos;
  }
  return i;
}

}  // namespace

const std::string_view kDenseScoreInstruction =
    "Respond with a single number between 0.0 and 1.0, where higher means "
    "more sketch-like.";

std::string_view to_string(JudgeMode mode) {
  return mode == JudgeMode::kBinary ? "binary" : "dense";
}

JudgeMode judge_mode_from_string(std::string_view text) {
  if (text == "binary") return JudgeMode::kBinary;
  if (text == "dense") return JudgeMode::kDense;
  fail(ErrorCategory::kConfig, "unknown judge mode '" + std::string(text) + "'");
}

std::string_view to_string(JudgeSource source) {
  return source == JudgeSource::kRule ? "rule" : "external";
}

void RuleJudgeConfig::validate() const {
  if (min_numbered_steps <= 0 || max_mean_step_tokens <= 0 || max_total_tokens <= 0) {
    fail(ErrorCategory::kConfig, "rule judge thresholds must be positive");
  }
}

StepProfile profile_thinking(std::string_view thinking, const Tokenizer& tokenizer) {
  StepProfile profile;
  profile.total_tokens = tokenizer.count(thinking);
  std::size_t pos = 0;
  while (pos <= thinking.size()) {
    std::size_t eol = thinking.find('\n', pos);
    if (eol == std::string_view::npos) eol = thinking.size();
    std::string_view line = thinking.substr(pos, eol - pos);
    const std::size_t marker_end = step_marker_end(line);
    if (marker_end != std::string_view::npos) {
      ++profile.numbered_steps;
      profile.step_tokens += tokenizer.count(line);
      if (trim(line.substr(marker_end)).empty()) ++profile.empty_steps;
    }
    pos = eol + 1;
  }
  return profile;
}

JudgeVerdict rule_judge(std::string_view thinking, const RuleJudgeConfig& config,
                        const Tokenizer& tokenizer, JudgeMode mode) {
  const StepProfile p = profile_thinking(thinking, tokenizer);
  const bool form = p.numbered_steps >= config.min_numbered_steps &&
                    p.mean_step_tokens() <= config.max_mean_step_tokens;
  const double total = static_cast<double>(p.total_tokens);
  JudgeVerdict v;
  v.mode = mode;
  v.source = JudgeSource::kRule;
  if (mode == JudgeMode::kBinary) {
    v.score = (form && total <= config.max_total_tokens) ? 1.0 : 0.0;
  } else {
    v.score = 0.5 * (form ? 1.0 : 0.0) +
              0.5 * std::max(0.0, 1.0 - total / config.max_total_tokens);
  }
  return v;
}

std::string render_judge_prompt(std::string_view thinking) {
  std::string out(kJudgePromptHead);
  out += thinking;
  return out;
}

std::optional<double> parse_first_number(std::string_view text) {
  static const std::regex kNumber(R"([-+]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, kNumber)) return std::nullopt;
  std::string literal = m.str();
  if (literal.front() == '+') literal.erase(0, 1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(literal.data(), literal.data() + literal.size(), value);
  if (ec != std::errc()) return std::nullopt;
  return value;
}

JudgeVerdict external_judge(LlmClient& client, std::string_view thinking,
                            JudgeMode mode) {
  std::string prompt = render_judge_prompt(thinking);
  if (mode == JudgeMode::kDense) {
    prompt += '\n';
    prompt += kDenseScoreInstruction;
  }
  const std::string reply = client.complete(prompt);
  const std::optional<double> value = parse_first_number(reply);
  if (!value) throw UnparseableReplyError("judge reply has no numeric score", reply);
  JudgeVerdict v;
  v.mode = mode;
  v.source = JudgeSource::kExternal;
  const double clamped = std::clamp(*value, 0.0, 1.0);
  v.score = mode == JudgeMode::kBinary ? (clamped >= 0.5 ? 1.0 : 0.0) : clamped;
  return v;
}

std::vector<JudgeExample> build_judge_dataset(std::span<const ConversionRecord> records) {
  std::vector<JudgeExample> out;
  out.reserve(records.size() * 2);
  for (const ConversionRecord& r : records) {
    if (trim(r.long_cot).empty() || trim(r.sketch_cot).empty()) {
      fail(ErrorCategory::kInvalidArgument,
           "record '" + r.id + "' has an empty reasoning field");
    }
    out.push_back({r.long_cot, 0, r.id});
    out.push_back({r.sketch_cot, 1, r.id});
  }
  return out;
}

}  // namespace sketch_rl
