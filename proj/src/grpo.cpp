#include "sketch_rl/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sketch_rl/csv.hpp"
#include "sketch_rl/error.hpp"
#include "sketch_rl/kernels.hpp"
#include "parallel.hpp"

namespace sketch_rl {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct TermParts {
  double value = 0.0;
  // d term / d logp_theta
  double slope = 0.0;
  double kl = 0.0;
};

TermParts objective_term(double logp_theta, double logp_old, double logp_ref,
                         double advantage, const GrpoConfig& config) {
  const double ratio = std::exp(logp_theta - logp_old);
  const double clipped =
      std::clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon);
  const double unclipped_term = ratio * advantage;
  const double clipped_term = clipped * advantage;
  TermParts t;
  t.kl = kl_estimate(logp_theta, logp_ref);
  t.value = std::min(unclipped_term, clipped_term) - config.kl_coefficient * t.kl;
  const double surrogate_slope = unclipped_term <= clipped_term ? ratio * advantage : 0.0;
  // d KL / d logp_theta = 1 - exp(logp_ref - logp_theta)
  const double kl_slope = 1.0 - std::exp(logp_ref - logp_theta);
  t.slope = surrogate_slope - config.kl_coefficient * kl_slope;
  return t;
}

void check_group(const RolloutGroup& group) {
  if (group.rollouts.empty()) fail(ErrorCategory::kInvalidArgument, "empty rollout group");
  if (group.advantages.size() != group.rollouts.size()) {
    fail(ErrorCategory::kInvalidArgument, "advantages not populated for group '" +
                                              group.question.id + "'");
  }
}

}  // namespace

void GrpoConfig::validate() const {
  if (group_size < 2) fail(ErrorCategory::kConfig, "group_size must be >= 2");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    fail(ErrorCategory::kConfig, "clip_epsilon must be in (0, 1)");
  }
  if (!(kl_coefficient >= 0.0)) fail(ErrorCategory::kConfig, "kl_coefficient must be >= 0");
  if (!(temperature > 0.0)) fail(ErrorCategory::kConfig, "temperature must be > 0");
  if (!(learning_rate >= 0.0)) fail(ErrorCategory::kConfig, "learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) fail(ErrorCategory::kConfig, "weight_decay must be >= 0");
  if (rollout_batch_size < 1) fail(ErrorCategory::kConfig, "rollout_batch_size must be >= 1");
  if (epochs < 0) fail(ErrorCategory::kConfig, "epochs must be >= 0");
  if (total_steps < 0) fail(ErrorCategory::kConfig, "total_steps must be >= 0");
  if (!(advantage_std_floor > 0.0)) {
    fail(ErrorCategory::kConfig, "advantage_std_floor must be > 0");
  }
  if (inner_updates < 1) fail(ErrorCategory::kConfig, "inner_updates must be >= 1");
  if (threads < 1) fail(ErrorCategory::kConfig, "threads must be >= 1");
}

std::int64_t GrpoConfig::steps_for(std::size_t dataset_size) const {
  if (total_steps > 0) return total_steps;
  const std::int64_t batches =
      (static_cast<std::int64_t>(dataset_size) + rollout_batch_size - 1) / rollout_batch_size;
  return static_cast<std::int64_t>(epochs) * batches;
}

std::vector<double> normalize_advantages(std::span<const double> rewards,
                                         double std_floor) {
  if (rewards.size() < 2) {
    fail(ErrorCategory::kInvalidArgument, "advantage normalization needs >= 2 rewards");
  }
  std::vector<double> out(rewards.begin(), rewards.end());
  const double sd = std::sqrt(kernels::pop_variance(rewards));
  if (!(sd >= std_floor)) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  kernels::shift_scale(kernels::mean(rewards), 1.0 / sd, out);
  return out;
}

double kl_estimate(double logp_theta, double logp_ref) {
  if (!std::isfinite(logp_theta) || !std::isfinite(logp_ref)) {
    fail(ErrorCategory::kInvalidArgument, "KL estimate needs finite log-probabilities");
  }
  const double log_ratio = logp_ref - logp_theta;
  // expm1 keeps the cancellation near rho = 1 exact to rounding.
  return std::expm1(log_ratio) - log_ratio;
}

double grpo_objective(const RolloutGroup& group, const PolicyParams& params,
                      const PolicyParams& params_old, const PolicyParams& params_ref,
                      const GrpoConfig& config) {
  check_group(group);
  const std::size_t q = group.question_index;
  double total = 0.0;
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    const ResponseKey& key = group.rollouts[i].key;
    total += objective_term(logprob(params, q, key, config.temperature),
                            logprob(params_old, q, key, config.temperature),
                            logprob(params_ref, q, key, config.temperature),
                            group.advantages[i], config)
                 .value;
  }
  return total / static_cast<double>(group.rollouts.size());
}

Gradient grpo_objective_gradient(const RolloutGroup& group, const PolicyParams& params,
                                 const PolicyParams& params_old,
                                 const PolicyParams& params_ref,
                                 const GrpoConfig& config) {
  check_group(group);
  Gradient grad(params.logits().size(), 0.0);
  const std::size_t q = group.question_index;
  const double inv_g = 1.0 / static_cast<double>(group.rollouts.size());
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    const ResponseKey& key = group.rollouts[i].key;
    const TermParts t = objective_term(logprob(params, q, key, config.temperature),
                                       logprob(params_old, q, key, config.temperature),
                                       logprob(params_ref, q, key, config.temperature),
                                       group.advantages[i], config);
    if (t.slope != 0.0) {
      accumulate_logprob_gradient(params, q, key, config.temperature, t.slope * inv_g, grad);
    }
  }
  return grad;
}

StepStats grpo_step(PolicyParams& params, std::span<const RolloutGroup> groups,
                    const PolicyParams& params_old, const PolicyParams& params_ref,
                    const GrpoConfig& config) {
  if (groups.empty()) fail(ErrorCategory::kInvalidArgument, "grpo_step needs groups");
  StepStats stats;
  Gradient total(params.logits().size(), 0.0);
  std::size_t rollouts = 0;
  for (const RolloutGroup& g : groups) {
    check_group(g);
    const std::size_t q = g.question_index;
    const double inv_g = 1.0 / static_cast<double>(g.rollouts.size());
    double group_obj = 0.0;
    for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
      const ResponseKey& key = g.rollouts[i].key;
      const TermParts t = objective_term(logprob(params, q, key, config.temperature),
                                         logprob(params_old, q, key, config.temperature),
                                         logprob(params_ref, q, key, config.temperature),
                                         g.advantages[i], config);
      group_obj += t.value;
      stats.mean_kl += t.kl;
      if (t.slope != 0.0) {
        accumulate_logprob_gradient(params, q, key, config.temperature, t.slope * inv_g,
                                    total);
      }
    }
    stats.objective += group_obj * inv_g;
    rollouts += g.rollouts.size();
  }
  stats.objective /= static_cast<double>(groups.size());
  stats.mean_kl /= static_cast<double>(rollouts);

  kernels::axpy(config.learning_rate, total, params.logits());
  if (config.weight_decay != 0.0) {
    kernels::scale(1.0 - config.learning_rate * config.weight_decay, params.logits());
  }
  return stats;
}

std::string TrainHistory::to_csv() const {
  std::string out =
      "step,mean_reward,mean_accuracy,mean_tokens,mean_kl,objective,w_acc,w_fmt,w_style\n";
  for (const HistoryEntry& e : entries) {
    out += std::to_string(e.step);
    for (double v : {e.mean_reward, e.mean_accuracy, e.mean_tokens, e.mean_kl, e.objective,
                     e.weights.accuracy, e.weights.format, e.weights.style}) {
      out += ',';
      out += format_number(v);
    }
    out += '\n';
  }
  return out;
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::kIo, "cannot write " + path.string());
  out << to_csv();
}

void score_group(RolloutGroup& group, const RewardContext& rewards,
                 const RewardWeights& weights, const GrpoConfig& config) {
  if (rewards.judge == nullptr) fail(ErrorCategory::kConfig, "no judge configured");
  std::vector<double> totals;
  totals.reserve(group.rollouts.size());
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    Rollout& r = group.rollouts[i];
    r.components.accuracy = accuracy_reward(r.trace, group.question, rewards.normalizer);
    r.components.format = format_reward(r.trace);
    try {
      r.components.style = style_reward(r.trace, *rewards.judge, config.style_mode);
    } catch (const Error& e) {
      fail(ErrorCategory::kJudge, "judge failed on question '" + group.question.id +
                                      "' rollout " + std::to_string(i) + ": " + e.what());
    }
    r.reward = composite_reward(r.components, weights);
    totals.push_back(r.reward);
  }
  group.advantages = normalize_advantages(totals, config.advantage_std_floor);
}

std::uint64_t rollout_seed(std::uint64_t base, std::int64_t step, std::size_t question) {
  return splitmix64(splitmix64(base ^ splitmix64(static_cast<std::uint64_t>(step))) +
                    static_cast<std::uint64_t>(question));
}

TrainResult train(const std::vector<Question>& dataset, const PolicyParams& policy,
                  const RewardContext& rewards, const WeightSchedule& schedule,
                  const GrpoConfig& config) {
  config.validate();
  schedule.validate();
  for (const Question& q : dataset) {
    if (!policy.has_question(q.id) ||
        (policy.kind() == PolicyKind::kTemplate && !policy.bank().contains(q.id))) {
      fail(ErrorCategory::kUnknownQuestion, "policy does not cover question '" + q.id + "'");
    }
  }

  TrainResult result{{}, policy};
  PolicyParams& params = result.params;
  const PolicyParams reference = policy;
  const std::int64_t steps = dataset.empty() ? 0 : config.steps_for(dataset.size());
  if (schedule.kind == WeightSchedule::Kind::kDynamic && steps > schedule.total_steps + 1) {
    fail(ErrorCategory::kConfig, "dynamic schedule covers " +
                                     std::to_string(schedule.total_steps + 1) +
                                     " steps but training runs " + std::to_string(steps));
  }
  const std::size_t batch = static_cast<std::size_t>(config.rollout_batch_size);
  const std::size_t batches_per_epoch = (dataset.size() + batch - 1) / std::max<std::size_t>(batch, 1);

  for (std::int64_t step = 0; step < steps; ++step) {
    const PolicyParams old = params;
    const RewardWeights weights = weights_at(schedule, step);
    const std::size_t b = static_cast<std::size_t>(step) % batches_per_epoch;
    const std::size_t first = b * batch;
    const std::size_t last = std::min(dataset.size(), first + batch);

    std::vector<RolloutGroup> groups(last - first);
    detail::parallel_for(groups.size(), config.threads, [&](std::size_t g) {
      const std::size_t position = first + g;
      RolloutGroup& group = groups[g];
      group.question = dataset[position];
      group.question_index = old.question_index(group.question.id);
      group.rollouts = sample(old, group.question, config.temperature, config.group_size,
                              rollout_seed(config.rng_seed, step, position), rewards.format);
      for (Rollout& r : group.rollouts) {
        r.steps_ref = step_logprobs(reference, group.question_index, r.key, config.temperature);
        r.logprob_ref = 0.0;
        for (double s : r.steps_ref) r.logprob_ref += s;
      }
      score_group(group, rewards, weights, config);
    });

    HistoryEntry entry;
    entry.step = step;
    entry.weights = weights;
    std::size_t n = 0;
    for (const RolloutGroup& g : groups) {
      for (const Rollout& r : g.rollouts) {
        entry.mean_reward += r.reward;
        entry.mean_accuracy += r.components.accuracy;
        entry.mean_tokens += static_cast<double>(rewards.tokenizer.count(r.trace.thinking));
        ++n;
      }
    }
    entry.mean_reward /= static_cast<double>(n);
    entry.mean_accuracy /= static_cast<double>(n);
    entry.mean_tokens /= static_cast<double>(n);

    for (int u = 0; u < config.inner_updates; ++u) {
      const StepStats stats = grpo_step(params, groups, old, reference, config);
      if (u == 0) {
        entry.objective = stats.objective;
        entry.mean_kl = stats.mean_kl;
      }
    }
    result.history.entries.push_back(entry);
  }
  return result;
}

}  // namespace sketch_rl
