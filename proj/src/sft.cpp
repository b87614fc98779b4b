#include "sketch_rl/sft.hpp"

#include <algorithm>
#include <set>

#include "sketch_rl/error.hpp"
#include "sketch_rl/kernels.hpp"

namespace sketch_rl {
namespace {

void require_token_level(const PolicyParams& params) {
  if (params.kind() != PolicyKind::kTokenLevel) {
    fail(ErrorCategory::kInvalidArgument, "supervised loss needs a token-level policy");
  }
}

void require_batch(const SftBatch& batch) {
  if (batch.size() == 0) fail(ErrorCategory::kInvalidArgument, "empty SFT batch");
}

ResponseKey target_key(const PolicyParams& params, const SftSample& sample) {
  ResponseKey key;
  key.ids.reserve(sample.target.count());
  for (const std::string& tok : sample.target.tokens) {
    std::optional<int> id = params.token_id(tok);
    if (!id) {
      fail(ErrorCategory::kOutsideSupport, "target token '" + tok + "' of question '" +
                                               sample.question.id +
                                               "' is outside the vocabulary");
    }
    key.ids.push_back(*id);
  }
  if (static_cast<int>(key.ids.size()) > params.max_length()) {
    fail(ErrorCategory::kOutsideSupport,
         "target of question '" + sample.question.id + "' exceeds max_length");
  }
  return key;
}

}  // namespace

std::vector<std::string> response_tokens(std::string_view thinking,
                                         std::string_view answer,
                                         const Tokenizer& tokenizer,
                                         const FormatSpec& format) {
  std::vector<std::string> out{format.think_open};
  for (std::string& t : tokenizer.tokenize(thinking).tokens) out.push_back(std::move(t));
  out.push_back(format.think_close);
  out.push_back(format.answer_open);
  for (std::string& t : tokenizer.tokenize(answer).tokens) out.push_back(std::move(t));
  out.push_back(format.answer_close);
  return out;
}

SftBatch make_sft_batch(std::span<const ConversionRecord> records,
                        const Tokenizer& tokenizer, const FormatSpec& format) {
  SftBatch batch;
  for (const ConversionRecord& r : records) {
    batch.samples.push_back(
        {r.question,
         TokenSequence{response_tokens(r.sketch_cot, r.question.gold_answer, tokenizer,
                                       format)}});
  }
  return batch;
}

std::vector<std::string> build_vocabulary(const SftBatch& batch) {
  std::set<std::string> unique;
  for (const SftSample& s : batch.samples) unique.insert(s.target.tokens.begin(), s.target.tokens.end());
  return {unique.begin(), unique.end()};
}

double sft_loss(const PolicyParams& params, const SftBatch& batch) {
  require_token_level(params);
  require_batch(batch);
  double total = 0.0;
  for (const SftSample& s : batch.samples) {
    total += logprob(params, params.question_index(s.question.id), target_key(params, s), 1.0);
  }
  return -total / static_cast<double>(batch.size());
}

Gradient sft_loss_gradient(const PolicyParams& params, const SftBatch& batch) {
  require_token_level(params);
  require_batch(batch);
  Gradient grad(params.logits().size(), 0.0);
  const double weight = -1.0 / static_cast<double>(batch.size());
  for (const SftSample& s : batch.samples) {
    accumulate_logprob_gradient(params, params.question_index(s.question.id),
                                target_key(params, s), 1.0, weight, grad);
  }
  return grad;
}

double sft_step(PolicyParams& params, const SftBatch& batch, double learning_rate,
                double weight_decay) {
  if (!(learning_rate >= 0.0)) {
    fail(ErrorCategory::kInvalidArgument, "learning rate must be non-negative");
  }
  const double loss = sft_loss(params, batch);
  const Gradient grad = sft_loss_gradient(params, batch);
  kernels::axpy(-learning_rate, grad, params.logits());
  if (weight_decay != 0.0) kernels::scale(1.0 - learning_rate * weight_decay, params.logits());
  return loss;
}

std::vector<double> train_sft(PolicyParams& params, const SftBatch& batch,
                              const SftConfig& config) {
  std::vector<double> losses;
  if (params.kind() == PolicyKind::kTemplate) {
    apply_template_cold_start(params, config.template_boost);
    return losses;
  }
  for (int step = 0; step < config.steps; ++step) {
    losses.push_back(sft_step(params, batch, config.learning_rate, config.weight_decay));
    if (config.target_loss > 0.0 && losses.back() < config.target_loss) break;
  }
  return losses;
}

void apply_template_cold_start(PolicyParams& params, double offset) {
  if (params.kind() != PolicyKind::kTemplate) {
    fail(ErrorCategory::kInvalidArgument, "logit boost applies to template policies");
  }
  for (std::size_t q = 0; q < params.question_ids().size(); ++q) {
    const auto& cands = params.bank().candidates(params.question_ids()[q]);
    std::span<double> row = params.row(params.template_row(q));
    for (std::size_t k = 0; k < cands.size(); ++k) {
      const Candidate& c = cands[k];
      if (c.is_well_formed && c.is_correct && c.style == ThinkingStyle::kSketch) {
        row[k] += offset;
      }
    }
  }
}

}  // namespace sketch_rl
