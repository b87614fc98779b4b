#include "sketch_rl/run_config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sketch_rl/error.hpp"

namespace sketch_rl {
namespace {

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (!node || !node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception& e) {
    fail(ErrorCategory::kConfig, std::string("bad value for '") + key + "': " + e.what());
  }
}

void read_path(const YAML::Node& node, const char* key, const std::filesystem::path& base,
               std::filesystem::path& out) {
  std::string text;
  read(node, key, text);
  if (text.empty()) return;
  std::filesystem::path p(text);
  out = p.is_absolute() ? p : base / p;
}

RewardWeights read_weights(const YAML::Node& node, const char* what) {
  if (!node || !node.IsSequence() || node.size() != 3) {
    fail(ErrorCategory::kConfig, std::string(what) + " must be a list of 3 weights");
  }
  RewardWeights w{node[0].as<double>(), node[1].as<double>(), node[2].as<double>()};
  try {
    w.validate();
  } catch (const Error& e) {
    fail(ErrorCategory::kConfig, std::string(what) + ": " + e.what());
  }
  return w;
}

Json weights_json(const RewardWeights& w) {
  return Json::array({w.accuracy, w.format, w.style});
}

void require_exists(const std::filesystem::path& p, const char* what) {
  if (!p.empty() && !std::filesystem::exists(p)) {
    fail(ErrorCategory::kConfig, std::string(what) + " not found: " + p.string());
  }
}

}  // namespace

void RunConfig::validate() const {
  require_exists(paths.dataset, "paths.dataset");
  require_exists(paths.bank, "paths.bank");
  require_exists(paths.conversion_inputs, "paths.conversion_inputs");
  require_exists(paths.policy_init, "paths.policy_init");
  judge.validate();
  grpo.validate();
  schedule.validate();
  if (max_length < 1) fail(ErrorCategory::kConfig, "policy.max_length must be >= 1");
  if (max_step_tokens < 2) fail(ErrorCategory::kConfig, "converter.max_step_tokens must be >= 2");
  if (!(min_validation_rate >= 0.0 && min_validation_rate <= 1.0)) {
    fail(ErrorCategory::kConfig, "converter.min_validation_rate must be in [0,1]");
  }
  if (sft.steps < 0 || !(sft.learning_rate >= 0.0) || !(sft.weight_decay >= 0.0)) {
    fail(ErrorCategory::kConfig, "sft settings must be non-negative");
  }
  if (eval_samples < 1) fail(ErrorCategory::kConfig, "eval.samples_per_question must be >= 1");
  if (!(eval_temperature > 0.0)) fail(ErrorCategory::kConfig, "eval.temperature must be > 0");
  if (threads < 1) fail(ErrorCategory::kConfig, "threads must be >= 1");
  if (judge_kind == JudgeKind::kExternal || converter_kind == ConverterKind::kLlm) {
    if (client.endpoint.empty() || client.model.empty()) {
      fail(ErrorCategory::kConfig, "client.endpoint and client.model are required");
    }
  }
}

Json RunConfig::to_json() const {
  Json schedule_json = {{"kind", std::string(to_string(schedule.kind))}};
  switch (schedule.kind) {
    case WeightSchedule::Kind::kFixed:
      schedule_json["weights"] = weights_json(schedule.fixed);
      break;
    case WeightSchedule::Kind::kStaged: {
      Json stages = Json::array();
      for (const StagedWeights& s : schedule.stages) {
        stages.push_back({{"until", s.step_upper_bound}, {"weights", weights_json(s.weights)}});
      }
      schedule_json["stages"] = stages;
      break;
    }
    case WeightSchedule::Kind::kDynamic:
      schedule_json["start"] = weights_json(schedule.start);
      schedule_json["end"] = weights_json(schedule.end);
      schedule_json["total_steps"] = schedule.total_steps;
      break;
  }
  return {
      {"paths",
       {{"dataset", paths.dataset.string()},
        {"bank", paths.bank.string()},
        {"conversion_inputs", paths.conversion_inputs.string()},
        {"corpus", paths.corpus.string()},
        {"policy_init", paths.policy_init.string()},
        {"policy", paths.policy.string()}}},
      {"output_dir", output_dir.string()},
      {"tokenizer", tokenizer.describe()},
      {"format",
       {{"think_open", format.think_open},
        {"think_close", format.think_close},
        {"answer_open", format.answer_open},
        {"answer_close", format.answer_close}}},
      {"policy", {{"kind", std::string(to_string(policy_kind))}, {"max_length", max_length}}},
      {"judge",
       {{"kind", judge_kind == JudgeKind::kRule ? "rule" : "external"},
        {"mode", std::string(to_string(judge_mode))},
        {"min_numbered_steps", judge.min_numbered_steps},
        {"max_mean_step_tokens", judge.max_mean_step_tokens},
        {"max_total_tokens", judge.max_total_tokens}}},
      {"client",
       {{"endpoint", client.endpoint},
        {"model", client.model},
        {"timeout_ms", client.timeout.count()},
        {"retries", client.retries},
        {"backoff_ms", client.backoff.count()},
        {"max_in_flight", client.max_in_flight}}},
      {"converter",
       {{"kind", converter_kind == ConverterKind::kRule ? "rule" : "llm"},
        {"max_step_tokens", max_step_tokens},
        {"min_validation_rate", min_validation_rate}}},
      {"grpo",
       {{"group_size", grpo.group_size},
        {"clip_epsilon", grpo.clip_epsilon},
        {"kl_coefficient", grpo.kl_coefficient},
        {"learning_rate", grpo.learning_rate},
        {"weight_decay", grpo.weight_decay},
        {"temperature", grpo.temperature},
        {"rollout_batch_size", grpo.rollout_batch_size},
        {"epochs", grpo.epochs},
        {"total_steps", grpo.total_steps},
        {"advantage_std_floor", grpo.advantage_std_floor},
        {"inner_updates", grpo.inner_updates},
        {"init", grpo_init == GrpoInit::kUniform ? "uniform" : "sft"}}},
      {"schedule", schedule_json},
      {"sft",
       {{"steps", sft.steps},
        {"learning_rate", sft.learning_rate},
        {"weight_decay", sft.weight_decay},
        {"target_loss", sft.target_loss},
        {"template_boost", sft.template_boost}}},
      {"eval",
       {{"greedy", eval_greedy},
        {"samples_per_question", eval_samples},
        {"temperature", eval_temperature}}},
      {"seed", seed},
      {"threads", threads},
  };
}

RunConfig parse_run_config(const std::string& yaml_text,
                           const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    fail(ErrorCategory::kConfig, std::string("config is not valid YAML: ") + e.what());
  }
  if (root && !root.IsNull() && !root.IsMap()) {
    fail(ErrorCategory::kConfig, "config root must be a mapping");
  }

  RunConfig c;
  const YAML::Node paths = root["paths"];
  read_path(paths, "dataset", base_dir, c.paths.dataset);
  read_path(paths, "bank", base_dir, c.paths.bank);
  read_path(paths, "conversion_inputs", base_dir, c.paths.conversion_inputs);
  read_path(paths, "corpus", base_dir, c.paths.corpus);
  read_path(paths, "policy_init", base_dir, c.paths.policy_init);
  read_path(paths, "policy", base_dir, c.paths.policy);
  read_path(root, "output_dir", base_dir, c.output_dir);
  if (c.output_dir == "out") c.output_dir = base_dir / "out";

  std::string tokenizer = "whitespace";
  read(root, "tokenizer", tokenizer);
  c.tokenizer = tokenizer_from_string(tokenizer);

  const YAML::Node format = root["format"];
  read(format, "think_open", c.format.think_open);
  read(format, "think_close", c.format.think_close);
  read(format, "answer_open", c.format.answer_open);
  read(format, "answer_close", c.format.answer_close);

  const YAML::Node policy = root["policy"];
  std::string kind = "template";
  read(policy, "kind", kind);
  if (kind == "template") {
    c.policy_kind = PolicyKind::kTemplate;
  } else if (kind == "token_level") {
    c.policy_kind = PolicyKind::kTokenLevel;
  } else {
    fail(ErrorCategory::kConfig, "policy.kind must be template or token_level");
  }
  read(policy, "max_length", c.max_length);

  const YAML::Node judge = root["judge"];
  std::string judge_kind = "rule";
  read(judge, "kind", judge_kind);
  if (judge_kind == "rule") {
    c.judge_kind = JudgeKind::kRule;
  } else if (judge_kind == "external") {
    c.judge_kind = JudgeKind::kExternal;
  } else {
    fail(ErrorCategory::kConfig, "judge.kind must be rule or external");
  }
  std::string mode = "binary";
  read(judge, "mode", mode);
  c.judge_mode = judge_mode_from_string(mode);
  read(judge, "min_numbered_steps", c.judge.min_numbered_steps);
  read(judge, "max_mean_step_tokens", c.judge.max_mean_step_tokens);
  read(judge, "max_total_tokens", c.judge.max_total_tokens);

  const YAML::Node client = root["client"];
  read(client, "endpoint", c.client.endpoint);
  read(client, "model", c.client.model);
  if (client && client["api_token"]) {
    fail(ErrorCategory::kConfig,
         std::string("api tokens are read from ") + kApiTokenEnv + ", not the config file");
  }
  std::int64_t ms = c.client.timeout.count();
  read(client, "timeout_ms", ms);
  c.client.timeout = std::chrono::milliseconds(ms);
  ms = c.client.backoff.count();
  read(client, "backoff_ms", ms);
  c.client.backoff = std::chrono::milliseconds(ms);
  read(client, "retries", c.client.retries);
  read(client, "max_in_flight", c.client.max_in_flight);
  if (const char* token = std::getenv(kApiTokenEnv)) c.client.api_token = token;

  const YAML::Node converter = root["converter"];
  std::string converter_kind = "rule";
  read(converter, "kind", converter_kind);
  if (converter_kind == "rule") {
    c.converter_kind = ConverterKind::kRule;
  } else if (converter_kind == "llm") {
    c.converter_kind = ConverterKind::kLlm;
  } else {
    fail(ErrorCategory::kConfig, "converter.kind must be rule or llm");
  }
  read(converter, "max_step_tokens", c.max_step_tokens);
  read(converter, "min_validation_rate", c.min_validation_rate);

  const YAML::Node grpo = root["grpo"];
  read(grpo, "group_size", c.grpo.group_size);
  read(grpo, "clip_epsilon", c.grpo.clip_epsilon);
  read(grpo, "kl_coefficient", c.grpo.kl_coefficient);
  read(grpo, "learning_rate", c.grpo.learning_rate);
  read(grpo, "weight_decay", c.grpo.weight_decay);
  read(grpo, "temperature", c.grpo.temperature);
  if (grpo && grpo["rollout_batch_preset"]) {
    const std::string preset = grpo["rollout_batch_preset"].as<std::string>();
    if (preset == "small") {
      c.grpo.rollout_batch_size = kRolloutBatchPresetSmall;
    } else if (preset == "large") {
      c.grpo.rollout_batch_size = kRolloutBatchPresetLarge;
    } else {
      fail(ErrorCategory::kConfig, "grpo.rollout_batch_preset must be small or large");
    }
  }
  read(grpo, "rollout_batch_size", c.grpo.rollout_batch_size);
  read(grpo, "epochs", c.grpo.epochs);
  read(grpo, "total_steps", c.grpo.total_steps);
  read(grpo, "advantage_std_floor", c.grpo.advantage_std_floor);
  read(grpo, "inner_updates", c.grpo.inner_updates);
  std::string init = "uniform";
  read(grpo, "init", init);
  if (init == "uniform") {
    c.grpo_init = GrpoInit::kUniform;
  } else if (init == "sft") {
    c.grpo_init = GrpoInit::kSft;
  } else {
    fail(ErrorCategory::kConfig, "grpo.init must be uniform or sft");
  }

  const YAML::Node schedule = root["schedule"];
  std::string schedule_kind = "fixed";
  read(schedule, "kind", schedule_kind);
  if (schedule_kind == "fixed") {
    c.schedule = WeightSchedule::make_fixed(
        schedule && schedule["weights"] ? read_weights(schedule["weights"], "schedule.weights")
                                        : RewardWeights{0.5, 0.4, 0.1});
  } else if (schedule_kind == "staged") {
    if (!schedule["stages"]) {
      c.schedule = WeightSchedule::default_staged();
    } else {
      std::vector<StagedWeights> stages;
      for (const YAML::Node& s : schedule["stages"]) {
        stages.push_back({s["until"].as<std::int64_t>(), read_weights(s["weights"], "stage weights")});
      }
      try {
        c.schedule = WeightSchedule::make_staged(std::move(stages));
      } catch (const Error& e) {
        fail(ErrorCategory::kConfig, e.what());
      }
    }
  } else if (schedule_kind == "dynamic") {
    std::int64_t total = 0;
    read(schedule, "total_steps", total);
    RewardWeights start{0.45, 0.40, 0.15};
    RewardWeights end{0.55, 0.40, 0.05};
    if (schedule["start"]) start = read_weights(schedule["start"], "schedule.start");
    if (schedule["end"]) end = read_weights(schedule["end"], "schedule.end");
    try {
      c.schedule = WeightSchedule::make_dynamic(start, end, total);
    } catch (const Error& e) {
      fail(ErrorCategory::kConfig, e.what());
    }
  } else {
    fail(ErrorCategory::kConfig, "schedule.kind must be fixed, staged or dynamic");
  }

  const YAML::Node sft = root["sft"];
  read(sft, "steps", c.sft.steps);
  read(sft, "learning_rate", c.sft.learning_rate);
  read(sft, "weight_decay", c.sft.weight_decay);
  read(sft, "target_loss", c.sft.target_loss);
  read(sft, "template_boost", c.sft.template_boost);

  const YAML::Node eval = root["eval"];
  read(eval, "greedy", c.eval_greedy);
  read(eval, "samples_per_question", c.eval_samples);
  read(eval, "temperature", c.eval_temperature);

  read(root, "seed", c.seed);
  read(root, "threads", c.threads);
  c.grpo.rng_seed = c.seed;
  c.grpo.threads = c.threads;
  c.grpo.style_mode = c.judge_mode;
  return c;
}

void apply_overrides(RunConfig& config, const RunOverrides& overrides) {
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.threads) config.threads = *overrides.threads;
  if (overrides.output_dir) config.output_dir = *overrides.output_dir;
  config.grpo.rng_seed = config.seed;
  config.grpo.threads = config.threads;
  if (config.threads < 1) fail(ErrorCategory::kConfig, "threads must be >= 1");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::kConfig, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
  RunConfig c = parse_run_config(buf.str(), base);
  c.validate();
  return c;
}

}  // namespace sketch_rl
