// sketch-rl: one subcommand per pipeline stage.
//
// Errors are reported on stderr as a single line "error: <category>: <message>".

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sketch_rl/commands.hpp"
#include "sketch_rl/error.hpp"

namespace {

std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

int report(std::string_view category, const std::string& message) {
  std::cerr << "error: " << category << ": " << one_line(message) << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sketch-style reasoning RL pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "YAML run config")->required();
  app.add_option("--seed", seed, "Override the run seed");
  app.add_option("--threads", threads, "Cap on worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Override the output directory");

  CLI::App* convert = app.add_subcommand("convert", "Build the cold-start corpus");
  CLI::App* judge_data = app.add_subcommand("judge-data", "Build the judge training set");
  CLI::App* train_sft = app.add_subcommand("train-sft", "Cold-start the policy");
  CLI::App* train_grpo = app.add_subcommand("train-grpo", "Run GRPO training");
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a policy");
  CLI::App* judge = app.add_subcommand("judge", "Score stored thinking traces");
  std::string traces;
  judge->add_option("traces", traces, "JSONL file with a thinking field per line")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report("usage", e.what());
  }

  try {
    sketch_rl::RunConfig config = sketch_rl::load_run_config(config_path);
    sketch_rl::RunOverrides overrides;
    overrides.seed = seed;
    overrides.threads = threads;
    if (out_dir) overrides.output_dir = std::filesystem::path(*out_dir);
    sketch_rl::apply_overrides(config, overrides);

    sketch_rl::CommandOutput output;
    if (convert->parsed()) {
      output = sketch_rl::cmd_convert(config);
    } else if (judge_data->parsed()) {
      output = sketch_rl::cmd_judge_data(config);
    } else if (train_sft->parsed()) {
      output = sketch_rl::cmd_train_sft(config);
    } else if (train_grpo->parsed()) {
      output = sketch_rl::cmd_train_grpo(config);
    } else if (eval->parsed()) {
      output = sketch_rl::cmd_eval(config);
    } else if (judge->parsed()) {
      output = sketch_rl::cmd_judge(config, traces);
    }
    for (const auto& path : output.artifacts) std::cout << path.string() << '\n';
  } catch (const sketch_rl::Error& e) {
    return report(sketch_rl::category_name(e.category()), e.what());
  } catch (const std::exception& e) {
    return report("internal", e.what());
  }
  return 0;
}
