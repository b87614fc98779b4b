#pragma once

// Desk-scale softmax policies standing in for a language-model backbone.
//
// Template policy: one logit per candidate response in a fixed per-question
// bank. Token-level policy: per question, a table of next-token logits
// conditioned on the previous token (or the start state), over a vocabulary
// plus an end marker. Both expose exact log-probabilities, seeded sampling
// and analytic gradients of log pi with respect to the logits.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sketch_rl/core.hpp"
#include "sketch_rl/judge.hpp"
#include "sketch_rl/jsonl.hpp"
#include "sketch_rl/rewards.hpp"

namespace sketch_rl {

enum class ThinkingStyle { kSketch, kNormal };

struct Candidate {
  std::string raw;
  Trace trace;
  bool is_correct = false;
  bool is_well_formed = false;
  ThinkingStyle style = ThinkingStyle::kNormal;
  // Tokens in the thinking segment.
  std::size_t token_count = 0;
};

struct BankAnnotator {
  FormatSpec format;
  RuleJudgeConfig judge_config;
  Tokenizer tokenizer = Tokenizer::whitespace();
  AnswerNormalizer normalizer;

  Candidate annotate(const Question& question, std::string raw) const;
};

// Finite per-question response sets. Annotations are always recomputed from
// the raw text, never read from disk.
class CandidateBank {
 public:
  CandidateBank() = default;

  // raw_by_question is keyed by question id and must cover every question.
  static CandidateBank build(
      const std::vector<Question>& questions,
      const std::unordered_map<std::string, std::vector<std::string>>& raw_by_question,
      const BankAnnotator& annotator = {});

  // Reads line-delimited {question_id, response_raw} objects.
  static CandidateBank load(const std::filesystem::path& path,
                            const std::vector<Question>& questions,
                            const BankAnnotator& annotator = {});

  bool contains(std::string_view question_id) const;
  const std::vector<Candidate>& candidates(std::string_view question_id) const;
  std::optional<std::size_t> find(std::string_view question_id,
                                  std::string_view raw) const;
  const std::vector<std::string>& question_ids() const noexcept { return ids_; }
  const Question& question(std::string_view question_id) const;

  // Every question must offer a correct sketch, a correct normal, an
  // incorrect and a malformed candidate.
  void check_composition() const;

 private:
  std::size_t index_of(std::string_view question_id) const;

  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Question> questions_;
  std::vector<std::vector<Candidate>> entries_;
};

enum class PolicyKind { kTemplate, kTokenLevel };

std::string_view to_string(PolicyKind kind);

// A response in the policy's own coordinates: the candidate index (template)
// or the token ids without the end marker (token-level).
struct ResponseKey {
  std::vector<int> ids;

  friend bool operator==(const ResponseKey&, const ResponseKey&) = default;
};

class PolicyParams {
 public:
  static PolicyParams make_template(std::shared_ptr<const CandidateBank> bank);
  static PolicyParams make_token_level(std::vector<std::string> question_ids,
                                       std::vector<std::string> vocabulary,
                                       int max_length);

  PolicyKind kind() const noexcept { return kind_; }

  std::span<double> logits() noexcept { return logits_; }
  std::span<const double> logits() const noexcept { return logits_; }

  std::size_t row_count() const noexcept { return row_offsets_.size() - 1; }
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  const std::vector<std::string>& question_ids() const noexcept { return question_ids_; }
  // Throws kUnknownQuestion.
  std::size_t question_index(std::string_view question_id) const;
  bool has_question(std::string_view question_id) const;

  // Template only.
  const CandidateBank& bank() const;
  std::shared_ptr<const CandidateBank> shared_bank() const noexcept { return bank_; }
  std::size_t template_row(std::size_t question) const { return question; }

  // Token-level only. Column vocab_size() of every row is the end marker;
  // row 0 of a question block is the start state, row 1+i follows token i.
  const std::vector<std::string>& vocabulary() const noexcept { return vocab_; }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  int end_id() const noexcept { return static_cast<int>(vocab_.size()); }
  int max_length() const noexcept { return max_length_; }
  std::optional<int> token_id(std::string_view token) const;
  std::size_t token_row(std::size_t question, int prev_token) const;

  // Maps a raw response onto the support. Throws kOutsideSupport naming it.
  ResponseKey resolve(std::string_view question_id, std::string_view response) const;
  std::string render(const ResponseKey& key, std::size_t question) const;

  void check_finite() const;

  nlohmann::json to_json() const;
  // Template parameters re-bind to the given bank; candidate texts must match.
  static PolicyParams from_json(const nlohmann::json& j,
                                std::shared_ptr<const CandidateBank> bank = nullptr);
  void save(const std::filesystem::path& path) const;
  static PolicyParams load(const std::filesystem::path& path,
                           std::shared_ptr<const CandidateBank> bank = nullptr);

 private:
  PolicyParams() = default;
  void index_questions();

  PolicyKind kind_ = PolicyKind::kTemplate;
  std::vector<double> logits_;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::string> question_ids_;
  std::unordered_map<std::string, std::size_t> question_index_;
  std::shared_ptr<const CandidateBank> bank_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> vocab_index_;
  int max_length_ = 0;
};

// Same layout as PolicyParams::logits().
using Gradient = std::vector<double>;

// Per-step log-probabilities of the response. Token-level responses include
// the end-marker step unless the response hit max_length, where the end is
// forced and contributes nothing.
std::vector<double> step_logprobs(const PolicyParams& params, std::size_t question,
                                  const ResponseKey& key, double temperature);
double logprob(const PolicyParams& params, std::size_t question,
               const ResponseKey& key, double temperature);
double logprob(const PolicyParams& params, std::string_view question_id,
               std::string_view response, double temperature);

// grad += weight * d log pi(response) / d logits
void accumulate_logprob_gradient(const PolicyParams& params, std::size_t question,
                                 const ResponseKey& key, double temperature,
                                 double weight, std::span<double> grad);
Gradient logprob_gradient(const PolicyParams& params, std::string_view question_id,
                          std::string_view response, double temperature);

// Probabilities of every row at the given temperature, same layout as logits.
std::vector<double> row_probabilities(const PolicyParams& params, double temperature);

struct Rollout {
  std::string response_raw;
  ResponseKey key;
  // Log-probs under the sampling snapshot (pi_old) and the reference.
  std::vector<double> steps_old;
  std::vector<double> steps_ref;
  double logprob_old = 0.0;
  double logprob_ref = 0.0;
  Trace trace;
  RewardComponents components;
  double reward = 0.0;
};

std::vector<Rollout> sample(const PolicyParams& params, const Question& question,
                            double temperature, int n, std::uint64_t rng_seed,
                            const FormatSpec& format = {});

// Argmax decoding; ties go to the lowest index.
ResponseKey greedy(const PolicyParams& params, std::size_t question);

}  // namespace sketch_rl
