// Drives the sketch-rl binary end to end on the bundled fixtures.

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sketch_rl/jsonl.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int status = 0;
  std::string output;
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(SKETCH_RL_CLI) + " " + args + " 2>&1";
  CliRun r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return {-1, "popen failed"};
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) r.output += buf.data();
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string config_arg() {
  return "--config " + testing_support::fixture("pipeline.yaml").string();
}

// Writes a config next to the fixtures' absolute paths.
fs::path write_config(const fs::path& dir, const std::string& extra) {
  const fs::path fx = testing_support::fixture("");
  std::ofstream out(dir / "config.yaml");
  out << "paths:\n"
      << "  dataset: " << (fx / "questions.jsonl").string() << "\n"
      << "  bank: " << (fx / "bank.jsonl").string() << "\n"
      << "  conversion_inputs: " << (fx / "conversion_inputs.jsonl").string() << "\n"
      << extra;
  return dir / "config.yaml";
}

double mean_tokens(const fs::path& summary) {
  return sketch_rl::read_json(summary)["mean_thinking_tokens"].get<double>();
}

}  // namespace

TEST(Cli, FullOfflinePipeline) {
  const fs::path out = testing_support::scratch_dir("cli_pipeline");
  const std::string base = config_arg() + " --out " + out.string();
  for (const char* cmd : {"convert", "judge-data", "train-sft"}) {
    const CliRun r = run(base + " " + cmd);
    ASSERT_EQ(r.status, 0) << cmd << ": " << r.output;
  }
  // Cold-start policy evaluated with the same sampled decoding as the final one.
  const fs::path cold = out / "cold";
  const fs::path cold_cfg = write_config(
      out, "  policy: " + (out / "policy_sft.json").string() + "\n" +
               "seed: 7\neval: {greedy: false, samples_per_question: 32}\n");
  CliRun r = run("--config " + cold_cfg.string() + " --out " + cold.string() + " eval");
  ASSERT_EQ(r.status, 0) << r.output;

  for (const char* cmd : {"train-grpo", "eval"}) {
    r = run(base + " " + cmd);
    ASSERT_EQ(r.status, 0) << cmd << ": " << r.output;
  }
  for (const char* f : {"corpus.jsonl", "corpus_summary.json", "judge_dataset.jsonl",
                        "policy_sft.json", "sft_loss.csv", "policy_grpo.json", "history.csv",
                        "eval_summary.json", "eval_rows.csv", "manifest_convert.json",
                        "manifest_judge-data.json", "manifest_train-sft.json",
                        "manifest_train-grpo.json", "manifest_eval.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const double before = mean_tokens(cold / "eval_summary.json");
  const double after = mean_tokens(out / "eval_summary.json");
  EXPECT_LE(after, 0.5 * before) << "cold " << before << " final " << after;

  // Judge dataset: two examples per validated record.
  const auto corpus = sketch_rl::read_jsonl(out / "corpus.jsonl");
  std::size_t validated = 0;
  for (const auto& row : corpus) validated += row["validated"].get<bool>();
  EXPECT_EQ(sketch_rl::read_jsonl(out / "judge_dataset.jsonl").size(), 2 * validated);

  // Manifest hashes match the artifacts and the token never appears.
  const auto manifest = sketch_rl::read_json(out / "manifest_train-grpo.json");
  EXPECT_EQ(manifest["seed"], 7);
  ASSERT_EQ(manifest["artifacts"].size(), 2u);
  for (const auto& a : manifest["artifacts"]) {
    EXPECT_EQ(a["sha256"].get<std::string>().size(), 64u);
  }
  EXPECT_TRUE(manifest.contains("created_at"));
  EXPECT_TRUE(manifest["config"].contains("grpo"));
}

TEST(Cli, RerunsAreByteIdentical) {
  const fs::path a = testing_support::scratch_dir("cli_rerun_a");
  const fs::path b = testing_support::scratch_dir("cli_rerun_b");
  for (const fs::path& out : {a, b}) {
    for (const char* cmd : {"convert", "train-sft", "train-grpo", "eval"}) {
      const CliRun r = run(config_arg() + " --out " + out.string() + " " + cmd);
      ASSERT_EQ(r.status, 0) << r.output;
    }
  }
  for (const char* f : {"corpus.jsonl", "sft_loss.csv", "history.csv", "eval_rows.csv",
                        "eval_summary.json", "policy_grpo.json"}) {
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
  const auto ma = sketch_rl::read_json(a / "manifest_train-grpo.json");
  const auto mb = sketch_rl::read_json(b / "manifest_train-grpo.json");
  EXPECT_EQ(ma["artifacts"], mb["artifacts"]);
}

TEST(Cli, SeedFlagChangesTraining) {
  const fs::path a = testing_support::scratch_dir("cli_seed_a");
  const fs::path b = testing_support::scratch_dir("cli_seed_b");
  for (const auto& [out, seed] : {std::pair{a, "1"}, std::pair{b, "2"}}) {
    ASSERT_EQ(run(config_arg() + " --out " + out.string() + " train-sft").status, 0);
    const CliRun r = run(config_arg() + " --seed " + seed + " --threads 2 --out " +
                      out.string() + " train-grpo");
    ASSERT_EQ(r.status, 0) << r.output;
  }
  EXPECT_NE(read_file(a / "history.csv"), read_file(b / "history.csv"));
  EXPECT_EQ(sketch_rl::read_json(a / "manifest_train-grpo.json")["seed"], 1);
}

TEST(Cli, ZeroEpochsGiveEmptyHistory) {
  const fs::path dir = testing_support::scratch_dir("cli_zero");
  const fs::path cfg = write_config(dir, "grpo: {epochs: 0}\n");
  const CliRun r = run("--config " + cfg.string() + " --out " + (dir / "out").string() +
                    " train-grpo");
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(read_file(dir / "out" / "history.csv"),
            "step,mean_reward,mean_accuracy,mean_tokens,mean_kl,objective,w_acc,w_fmt,w_style\n");
}

TEST(Cli, EvalOfReferencePolicy) {
  const fs::path dir = testing_support::scratch_dir("cli_eval_ref");
  const fs::path cfg = write_config(
      dir, "  policy: " + testing_support::fixture("reference_policy.json").string() + "\n");
  const CliRun r = run("--config " + cfg.string() + " --out " + (dir / "out").string() + " eval");
  ASSERT_EQ(r.status, 0) << r.output;
  const auto s = sketch_rl::read_json(dir / "out" / "eval_summary.json");
  const double acc = s["accuracy_percent"].get<double>();
  const double tokens = s["mean_thinking_tokens"].get<double>();
  EXPECT_NEAR(s["eot"].get<double>(), acc / tokens, 1e-9);
}

TEST(Cli, JudgeCommandScoresTraces) {
  const fs::path dir = testing_support::scratch_dir("cli_judge");
  {
    std::ofstream t(dir / "traces.jsonl");
    t << R"({"id": "s", "thinking": "1. a\n2. b"})" << "\n"
      << R"({"origin_id": "n", "thinking": "plain prose"})" << "\n";
  }
  const fs::path cfg = write_config(dir, "");
  const CliRun r = run("--config " + cfg.string() + " --out " + (dir / "out").string() +
                    " judge " + (dir / "traces.jsonl").string());
  ASSERT_EQ(r.status, 0) << r.output;
  const auto v = sketch_rl::read_jsonl(dir / "out" / "verdicts.jsonl");
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0]["id"], "s");
  EXPECT_EQ(v[0]["score"], 1.0);
  EXPECT_EQ(v[1]["id"], "n");
  EXPECT_EQ(v[1]["score"], 0.0);
  EXPECT_TRUE(fs::exists(dir / "out" / "manifest_judge.json"));
}

TEST(Cli, ErrorsAreSingleCategorizedLines) {
  const fs::path dir = testing_support::scratch_dir("cli_errors");
  CliRun r = run("--config " + (dir / "missing.yaml").string() + " eval");
  EXPECT_NE(r.status, 0);
  EXPECT_EQ(r.output.rfind("error: config: ", 0), 0u) << r.output;
  EXPECT_EQ(std::count(r.output.begin(), r.output.end(), '\n'), 1);

  const fs::path cfg = write_config(dir, "grpo: {group_size: 1}\n");
  r = run("--config " + cfg.string() + " train-grpo");
  EXPECT_NE(r.status, 0);
  EXPECT_EQ(r.output.rfind("error: config: ", 0), 0u) << r.output;

  // Stage input missing: train-grpo with init from sft before train-sft ran.
  const fs::path cfg2 = write_config(dir, "grpo: {init: sft}\n");
  r = run("--config " + cfg2.string() + " --out " + (dir / "empty").string() + " train-grpo");
  EXPECT_NE(r.status, 0);
  EXPECT_EQ(r.output.rfind("error: io: ", 0), 0u) << r.output;

  r = run("--config " + cfg.string() + " frobnicate");
  EXPECT_NE(r.status, 0);
  EXPECT_EQ(r.output.rfind("error: usage: ", 0), 0u) << r.output;
}

TEST(Cli, ExternalJudgeWithoutServerFailsAsTransport) {
  const fs::path dir = testing_support::scratch_dir("cli_transport");
  {
    std::ofstream t(dir / "traces.jsonl");
    t << R"({"id": "s", "thinking": "1. a\n2. b"})" << "\n";
  }
  const fs::path cfg = write_config(
      dir,
      "judge: {kind: external}\n"
      "client: {endpoint: 'http://127.0.0.1:1/v1/chat/completions', model: m, retries: 0, "
      "timeout_ms: 200}\n");
  const CliRun r = run("--config " + cfg.string() + " --out " + (dir / "out").string() +
                    " judge " + (dir / "traces.jsonl").string());
  EXPECT_NE(r.status, 0);
  EXPECT_EQ(r.output.rfind("error: transport: ", 0), 0u) << r.output;
}
