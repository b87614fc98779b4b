#pragma once

// Cold start: supervised negative log-likelihood on sketch-style targets for
// the token-level policy, and a logit boost for the template policy.

#include <span>
#include <string>
#include <vector>

#include "sketch_rl/conversion_record.hpp"
#include "sketch_rl/core.hpp"
#include "sketch_rl/policy.hpp"

namespace sketch_rl {

struct SftSample {
  Question question;
  // Target tokens, end marker excluded.
  TokenSequence target;
};

struct SftBatch {
  std::vector<SftSample> samples;

  std::size_t size() const noexcept { return samples.size(); }
};

// "<think>", thinking tokens, "</think>", "<answer>", answer tokens,
// "</answer>": the token-level policy's view of a formatted response.
std::vector<std::string> response_tokens(std::string_view thinking,
                                         std::string_view answer,
                                         const Tokenizer& tokenizer,
                                         const FormatSpec& format = {});

// One sample per record: sketch thinking plus the gold answer.
SftBatch make_sft_batch(std::span<const ConversionRecord> records,
                        const Tokenizer& tokenizer, const FormatSpec& format = {});

// Sorted unique tokens over all targets.
std::vector<std::string> build_vocabulary(const SftBatch& batch);

// -(1/N) sum_i sum_t log pi(o_it | o_i<t, q_i) at temperature 1, end step
// included. Throws kOutsideSupport for out-of-vocabulary targets.
double sft_loss(const PolicyParams& params, const SftBatch& batch);
Gradient sft_loss_gradient(const PolicyParams& params, const SftBatch& batch);

// One descent step in place; returns the pre-step loss. Weight decay is
// decoupled: logits -= lr * weight_decay * logits.
double sft_step(PolicyParams& params, const SftBatch& batch, double learning_rate,
                double weight_decay = 0.0);

struct SftConfig {
  int steps = 200;
  double learning_rate = 0.5;
  double weight_decay = 1e-2;
  // Stop early once the loss drops below this value (0 disables).
  double target_loss = 0.0;
  // Template policy only.
  double template_boost = 2.0;
};

// Returns the per-step pre-update losses.
std::vector<double> train_sft(PolicyParams& params, const SftBatch& batch,
                              const SftConfig& config);

// Adds offset to the logit of every well-formed, correct, sketch-style
// candidate.
void apply_template_cold_start(PolicyParams& params, double offset = 2.0);

}  // namespace sketch_rl
