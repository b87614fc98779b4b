#include "sketch_rl/commands.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>
#include <unordered_set>

#include "sketch_rl/csv.hpp"
#include "sketch_rl/error.hpp"

namespace sketch_rl {
namespace {

namespace fs = std::filesystem;

fs::path out_path(const RunConfig& config, std::string_view name) {
  fs::create_directories(config.output_dir);
  return config.output_dir / name;
}

void require_input(const fs::path& path, const char* what) {
  if (path.empty()) fail(ErrorCategory::kConfig, std::string(what) + " is not configured");
  if (!fs::exists(path)) {
    fail(ErrorCategory::kIo, std::string(what) + " not found: " + path.string());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCategory::kIo, "write failed for " + path.string());
}

fs::path corpus_path(const RunConfig& config) {
  return config.paths.corpus.empty() ? config.output_dir / "corpus.jsonl"
                                     : config.paths.corpus;
}

std::unique_ptr<LlmClient> make_client(const RunConfig& config) {
  return std::make_unique<HttpLlmClient>(config.client);
}

std::vector<Question> load_dataset(const RunConfig& config) {
  require_input(config.paths.dataset, "paths.dataset");
  std::vector<Question> questions = read_questions(config.paths.dataset);
  validate_questions(questions);
  return questions;
}

std::shared_ptr<const CandidateBank> load_bank(const RunConfig& config,
                                               const std::vector<Question>& questions) {
  require_input(config.paths.bank, "paths.bank");
  BankAnnotator annotator;
  annotator.format = config.format;
  annotator.judge_config = config.judge;
  annotator.tokenizer = config.tokenizer;
  auto bank = std::make_shared<CandidateBank>(
      CandidateBank::load(config.paths.bank, questions, annotator));
  bank->check_composition();
  return bank;
}

std::vector<ConversionRecord> validated_records(const RunConfig& config) {
  const fs::path path = corpus_path(config);
  require_input(path, "corpus (run convert first)");
  std::vector<ConversionRecord> out;
  for (ConversionRecord& r : read_records(path)) {
    if (r.validated) out.push_back(std::move(r));
  }
  return out;
}

// Uniform token-level policy over the questions of the dataset and the
// vocabulary of the validated corpus.
PolicyParams fresh_token_policy(const RunConfig& config,
                                const std::vector<Question>& questions,
                                const SftBatch& batch) {
  std::vector<std::string> ids;
  ids.reserve(questions.size());
  for (const Question& q : questions) ids.push_back(q.id);
  return PolicyParams::make_token_level(std::move(ids), build_vocabulary(batch),
                                        config.max_length);
}

std::string sft_loss_csv(const std::vector<double>& losses) {
  std::string out = "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_number(losses[i]);
    out += '\n';
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::array<char, 32> buf{};
  std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf.data();
}

CommandOutput finish(const RunConfig& config, std::string_view command,
                     CommandOutput output) {
  write_manifest(config, command, output);
  return output;
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kIo, "cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    fail(ErrorCategory::kIo, "sha256 unavailable");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), in.gcount());
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[md[i] >> 4];
    hex += kHex[md[i] & 0xf];
  }
  return hex;
}

fs::path write_manifest(const RunConfig& config, std::string_view command,
                        const CommandOutput& output) {
  Json artifacts = Json::array();
  for (const fs::path& p : output.artifacts) {
    artifacts.push_back({{"path", p.filename().string()}, {"sha256", sha256_file(p)}});
  }
  const Json manifest = {
      {"command", std::string(command)},
      {"seed", config.seed},
      {"threads", config.threads},
      {"created_at", utc_timestamp()},
      {"config", config.to_json()},
      {"artifacts", artifacts},
  };
  const fs::path path = out_path(config, "manifest_" + std::string(command) + ".json");
  write_json(path, manifest);
  return path;
}

CommandOutput cmd_convert(const RunConfig& config) {
  require_input(config.paths.conversion_inputs, "paths.conversion_inputs");
  const std::vector<ConversionInput> inputs =
      read_conversion_inputs(config.paths.conversion_inputs);

  std::unique_ptr<LlmClient> client;
  if (config.converter_kind == ConverterKind::kLlm) client = make_client(config);

  CorpusOptions options;
  options.client = client.get();
  options.rule.max_step_tokens = config.max_step_tokens;
  options.rule.judge = config.judge;
  options.rule.tokenizer = config.tokenizer;
  options.min_validation_rate = config.min_validation_rate;
  options.threads = config.threads;
  const CorpusResult result = build_cold_start_corpus(inputs, options);

  CommandOutput output;
  const fs::path corpus = out_path(config, "corpus.jsonl");
  write_records(corpus, result.records);
  output.artifacts.push_back(corpus);
  const fs::path summary = out_path(config, "corpus_summary.json");
  write_json(summary, result.summary.to_json());
  output.artifacts.push_back(summary);
  finish(config, "convert", output);

  if (result.summary.below_floor) {
    fail(ErrorCategory::kValidationRate,
         "validation rate " + format_number(result.summary.validation_rate.value_or(0.0)) +
             " is below the floor " + format_number(config.min_validation_rate));
  }
  return output;
}

CommandOutput cmd_judge_data(const RunConfig& config) {
  const std::vector<ConversionRecord> records = validated_records(config);
  const std::vector<JudgeExample> examples = build_judge_dataset(records);
  std::vector<Json> rows;
  rows.reserve(examples.size());
  for (const JudgeExample& e : examples) {
    rows.push_back({{"thinking", e.thinking}, {"label", e.label}, {"origin_id", e.origin_id}});
  }
  CommandOutput output;
  const fs::path path = out_path(config, "judge_dataset.jsonl");
  write_jsonl(path, rows);
  output.artifacts.push_back(path);
  return finish(config, "judge-data", output);
}

CommandOutput cmd_train_sft(const RunConfig& config) {
  const std::vector<Question> questions = load_dataset(config);
  std::vector<double> losses;
  std::optional<PolicyParams> params;
  if (config.policy_kind == PolicyKind::kTemplate) {
    params = PolicyParams::make_template(load_bank(config, questions));
    apply_template_cold_start(*params, config.sft.template_boost);
  } else {
    const std::vector<ConversionRecord> records = validated_records(config);
    const SftBatch batch = make_sft_batch(records, config.tokenizer, config.format);
    if (batch.size() == 0) fail(ErrorCategory::kInvalidArgument, "no validated records to train on");
    params = fresh_token_policy(config, questions, batch);
    losses = train_sft(*params, batch, config.sft);
  }
  params->check_finite();

  CommandOutput output;
  const fs::path policy = out_path(config, "policy_sft.json");
  params->save(policy);
  output.artifacts.push_back(policy);
  const fs::path curve = out_path(config, "sft_loss.csv");
  write_text(curve, sft_loss_csv(losses));
  output.artifacts.push_back(curve);
  return finish(config, "train-sft", output);
}

CommandOutput cmd_train_grpo(const RunConfig& config) {
  const std::vector<Question> questions = load_dataset(config);
  std::shared_ptr<const CandidateBank> bank;
  if (config.policy_kind == PolicyKind::kTemplate) bank = load_bank(config, questions);

  fs::path init = config.paths.policy_init;
  if (init.empty() && config.grpo_init == GrpoInit::kSft) {
    init = config.output_dir / "policy_sft.json";
    require_input(init, "cold-start policy (run train-sft first)");
  }

  std::optional<PolicyParams> policy;
  if (!init.empty()) {
    policy = PolicyParams::load(init, bank);
    if (policy->kind() != config.policy_kind) {
      fail(ErrorCategory::kConfig, "policy file kind does not match policy.kind");
    }
  } else if (config.policy_kind == PolicyKind::kTemplate) {
    policy = PolicyParams::make_template(bank);
  } else {
    const std::vector<ConversionRecord> records = validated_records(config);
    policy = fresh_token_policy(config, questions,
                                make_sft_batch(records, config.tokenizer, config.format));
  }

  std::unique_ptr<LlmClient> client;
  std::unique_ptr<Judge> judge;
  if (config.judge_kind == JudgeKind::kExternal) {
    client = make_client(config);
    judge = std::make_unique<ExternalJudge>(*client);
  } else {
    judge = std::make_unique<RuleJudge>(config.judge, config.tokenizer);
  }
  RewardContext rewards;
  rewards.judge = judge.get();
  rewards.tokenizer = config.tokenizer;
  rewards.format = config.format;

  const TrainResult result = train(questions, *policy, rewards, config.schedule, config.grpo);
  result.params.check_finite();

  CommandOutput output;
  const fs::path params = out_path(config, "policy_grpo.json");
  result.params.save(params);
  output.artifacts.push_back(params);
  const fs::path history = out_path(config, "history.csv");
  result.history.write_csv(history);
  output.artifacts.push_back(history);
  return finish(config, "train-grpo", output);
}

CommandOutput cmd_eval(const RunConfig& config) {
  const std::vector<Question> questions = load_dataset(config);
  std::shared_ptr<const CandidateBank> bank;
  if (config.policy_kind == PolicyKind::kTemplate) bank = load_bank(config, questions);
  const fs::path policy_path = config.paths.policy.empty()
                                   ? config.output_dir / "policy_grpo.json"
                                   : config.paths.policy;
  require_input(policy_path, "policy to evaluate");
  const PolicyParams policy = PolicyParams::load(policy_path, bank);

  EvalOptions options;
  options.greedy = config.eval_greedy;
  options.samples_per_question = config.eval_samples;
  options.seed = config.seed;
  options.temperature = config.eval_temperature;
  options.tokenizer = config.tokenizer;
  options.format = config.format;
  const EvalReport report = evaluate(policy, questions, options);

  CommandOutput output;
  const fs::path summary = out_path(config, "eval_summary.json");
  write_json(summary, report.summary_json());
  output.artifacts.push_back(summary);
  const fs::path rows = out_path(config, "eval_rows.csv");
  write_text(rows, report.rows_csv());
  output.artifacts.push_back(rows);
  return finish(config, "eval", output);
}

CommandOutput cmd_judge(const RunConfig& config, const fs::path& traces) {
  require_input(traces, "traces file");
  const std::vector<Json> rows = read_jsonl(traces);

  std::unique_ptr<LlmClient> client;
  std::unique_ptr<Judge> judge;
  if (config.judge_kind == JudgeKind::kExternal) {
    client = make_client(config);
    judge = std::make_unique<ExternalJudge>(*client);
  } else {
    judge = std::make_unique<RuleJudge>(config.judge, config.tokenizer);
  }

  std::vector<Json> verdicts;
  verdicts.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Json& row = rows[i];
    std::string id = std::to_string(i);
    if (row.contains("id") && row["id"].is_string()) {
      id = row["id"].get<std::string>();
    } else if (row.contains("origin_id") && row["origin_id"].is_string()) {
      id = row["origin_id"].get<std::string>();
    }
    const std::string thinking = require_string(row, "thinking");
    const JudgeVerdict v = judge->score(thinking, config.judge_mode);
    verdicts.push_back({{"id", id},
                        {"score", v.score},
                        {"mode", std::string(to_string(v.mode))},
                        {"source", std::string(to_string(v.source))}});
  }

  CommandOutput output;
  const fs::path path = out_path(config, "verdicts.jsonl");
  write_jsonl(path, verdicts);
  output.artifacts.push_back(path);
  return finish(config, "judge", output);
}

}  // namespace sketch_rl
