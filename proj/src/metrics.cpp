#include "sketch_rl/metrics.hpp"

#include <cmath>
#include <limits>

#include "sketch_rl/csv.hpp"
#include "sketch_rl/error.hpp"
#include "sketch_rl/grpo.hpp"
#include "sketch_rl/kernels.hpp"

namespace sketch_rl {

double eot(double accuracy_percent, double mean_tokens) {
  if (!(mean_tokens > 0.0)) {
    fail(ErrorCategory::kInvalidArgument, "EoT needs a positive mean token count");
  }
  return accuracy_percent / mean_tokens;
}

Json EvalReport::summary_json() const {
  Json j = {{"accuracy_percent", accuracy_percent},
            {"mean_thinking_tokens", mean_thinking_tokens},
            {"n_questions", n_questions}};
  j["eot"] = std::isfinite(eot) ? Json(eot) : Json(nullptr);
  return j;
}

std::string EvalReport::rows_csv() const {
  std::string out = "question_id,accuracy,thinking_tokens,response_raw\n";
  for (const EvalRow& r : rows) {
    out += csv_field(r.question_id) + ',' + format_number(r.accuracy) + ',' +
           format_number(r.thinking_tokens) + ',' + csv_field(r.response_raw) + '\n';
  }
  return out;
}

EvalReport evaluate(const PolicyParams& policy, const std::vector<Question>& dataset,
                    const EvalOptions& options) {
  if (!options.greedy && options.samples_per_question < 1) {
    fail(ErrorCategory::kInvalidArgument, "samples_per_question must be >= 1");
  }
  EvalReport report;
  report.n_questions = dataset.size();
  double correct = 0.0;
  double tokens = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Question& question = dataset[i];
    if (policy.kind() == PolicyKind::kTemplate && !policy.bank().contains(question.id)) {
      fail(ErrorCategory::kUnknownQuestion,
           "candidate bank does not cover question '" + question.id + "'");
    }
    const std::size_t q = policy.question_index(question.id);
    std::vector<std::string> responses;
    if (options.greedy) {
      responses.push_back(policy.render(greedy(policy, q), q));
    } else {
      for (Rollout& r : sample(policy, question, options.temperature,
                               options.samples_per_question,
                               rollout_seed(options.seed, -1, i), options.format)) {
        responses.push_back(std::move(r.response_raw));
      }
    }
    EvalRow row;
    row.question_id = question.id;
    row.response_raw = responses.front();
    for (const std::string& raw : responses) {
      const Trace trace = parse_response(raw, options.format);
      row.accuracy += accuracy_reward(trace, question, options.normalizer);
      row.thinking_tokens += static_cast<double>(options.tokenizer.count(trace.thinking));
    }
    row.accuracy /= static_cast<double>(responses.size());
    row.thinking_tokens /= static_cast<double>(responses.size());
    correct += row.accuracy;
    tokens += row.thinking_tokens;
    report.rows.push_back(std::move(row));
  }
  if (!dataset.empty()) {
    report.accuracy_percent = 100.0 * correct / static_cast<double>(dataset.size());
    report.mean_thinking_tokens = tokens / static_cast<double>(dataset.size());
  }
  report.eot = report.mean_thinking_tokens > 0.0
                   ? eot(report.accuracy_percent, report.mean_thinking_tokens)
                   : std::numeric_limits<double>::quiet_NaN();
  return report;
}

ExpectedStats expected_stats(const PolicyParams& policy,
                             const std::vector<Question>& dataset, double temperature) {
  if (policy.kind() != PolicyKind::kTemplate) {
    fail(ErrorCategory::kInvalidArgument, "expected statistics need a template policy");
  }
  ExpectedStats s;
  if (dataset.empty()) return s;
  std::vector<double> probs;
  for (const Question& question : dataset) {
    const std::size_t q = policy.question_index(question.id);
    std::span<const double> row = policy.row(policy.template_row(q));
    probs.resize(row.size());
    kernels::softmax(row, temperature, probs);
    const auto& cands = policy.bank().candidates(question.id);
    for (std::size_t k = 0; k < cands.size(); ++k) {
      s.accuracy += probs[k] * (cands[k].is_correct ? 1.0 : 0.0);
      s.format += probs[k] * (cands[k].is_well_formed ? 1.0 : 0.0);
      s.style += probs[k] * (cands[k].style == ThinkingStyle::kSketch ? 1.0 : 0.0);
      s.thinking_tokens += probs[k] * static_cast<double>(cands[k].token_count);
    }
  }
  const double n = static_cast<double>(dataset.size());
  s.accuracy /= n;
  s.format /= n;
  s.style /= n;
  s.thinking_tokens /= n;
  return s;
}

}  // namespace sketch_rl
