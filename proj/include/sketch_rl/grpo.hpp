#pragma once

// Group-relative policy optimization over the desk-scale policies.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sketch_rl/core.hpp"
#include "sketch_rl/judge.hpp"
#include "sketch_rl/policy.hpp"
#include "sketch_rl/rewards.hpp"

namespace sketch_rl {

struct GrpoConfig {
  int group_size = 5;
  double clip_epsilon = 0.2;
  double kl_coefficient = 0.01;
  // Per-group step size; each question's logits receive the full gradient
  // of their own group's objective.
  double learning_rate = 0.2;
  double weight_decay = 1e-2;
  double temperature = 1.0;
  int rollout_batch_size = 128;
  int epochs = 15;
  // When > 0, overrides epochs * ceil(dataset / rollout_batch_size).
  std::int64_t total_steps = 0;
  double advantage_std_floor = 1e-8;
  std::uint64_t rng_seed = 0;
  // Policy updates per rollout batch. Values above 1 move pi_theta away from
  // pi_old so the clip becomes active.
  int inner_updates = 1;
  JudgeMode style_mode = JudgeMode::kBinary;
  int threads = 1;

  void validate() const;
  std::int64_t steps_for(std::size_t dataset_size) const;
};

// Rollout batch presets: 128 matches the main training setup, 512 the
// larger-batch variant.
inline constexpr int kRolloutBatchPresetSmall = 128;
inline constexpr int kRolloutBatchPresetLarge = 512;

struct RolloutGroup {
  Question question;
  std::size_t question_index = 0;
  std::vector<Rollout> rollouts;
  std::vector<double> advantages;
};

// (r - mean) / population std; all zeros when std < std_floor.
std::vector<double> normalize_advantages(std::span<const double> rewards,
                                         double std_floor);

// k3 estimator rho - log rho - 1 with rho = exp(logp_ref - logp_theta).
double kl_estimate(double logp_theta, double logp_ref);

// (1/G) sum_i [min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i) - beta KL_i]
// with sequence-level log-probs from the three snapshots.
double grpo_objective(const RolloutGroup& group, const PolicyParams& params,
                      const PolicyParams& params_old, const PolicyParams& params_ref,
                      const GrpoConfig& config);

// d objective / d logits for one group. Clipped terms whose clip branch is
// selected contribute no gradient.
Gradient grpo_objective_gradient(const RolloutGroup& group, const PolicyParams& params,
                                 const PolicyParams& params_old,
                                 const PolicyParams& params_ref, const GrpoConfig& config);

struct StepStats {
  // Batch mean of the group objectives before the update.
  double objective = 0.0;
  // Mean KL to the reference over all rollouts before the update.
  double mean_kl = 0.0;
};

// One ascent step in place: logits += lr * sum_g grad_g, then decoupled
// weight decay.
StepStats grpo_step(PolicyParams& params, std::span<const RolloutGroup> groups,
                    const PolicyParams& params_old, const PolicyParams& params_ref,
                    const GrpoConfig& config);

struct HistoryEntry {
  std::int64_t step = 0;
  double mean_reward = 0.0;
  double mean_accuracy = 0.0;
  double mean_tokens = 0.0;
  double mean_kl = 0.0;
  double objective = 0.0;
  RewardWeights weights;
};

struct TrainHistory {
  std::vector<HistoryEntry> entries;

  // step,mean_reward,mean_accuracy,mean_tokens,mean_kl,objective,w_acc,w_fmt,w_style
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct RewardContext {
  const Judge* judge = nullptr;
  Tokenizer tokenizer = Tokenizer::whitespace();
  AnswerNormalizer normalizer;
  FormatSpec format;
};

// Scores every rollout of a group and fills advantages.
void score_group(RolloutGroup& group, const RewardContext& rewards,
                 const RewardWeights& weights, const GrpoConfig& config);

struct TrainResult {
  TrainHistory history;
  PolicyParams params;
};

// pi_ref is a frozen copy of the input policy; pi_old is refreshed at the
// start of every rollout batch. Deterministic given config.rng_seed,
// independent of config.threads.
TrainResult train(const std::vector<Question>& dataset, const PolicyParams& policy,
                  const RewardContext& rewards, const WeightSchedule& schedule,
                  const GrpoConfig& config);

std::uint64_t rollout_seed(std::uint64_t base, std::int64_t step, std::size_t question);

}  // namespace sketch_rl
