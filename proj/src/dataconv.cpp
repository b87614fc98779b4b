#include "sketch_rl/dataconv.hpp"

#include <algorithm>
#include <cctype>

#include "parallel.hpp"
#include "sketch_rl/error.hpp"

namespace sketch_rl {
namespace {

constexpr std::string_view kConversionPrompt =
    "You are a reasoning compression assistant. Your task is to transform long, "
    "detailed reasoning into ultra-short, sketch-style reasoning as a numbered list.\n"
    "\n"
    "Instructions:\n"
    "\n"
    "1. Read the long reasoning carefully.\n"
    "\n"
    "2. Keep only the key facts and logic.\n"
    "\n"
    "3. Remove all extra words, details, and examples.\n"
    "\n"
    "4. Keep reasoning order intact.\n"
    "\n"
    "5. Each step must be extremely short.\n"
    "\n"
    "6. Output numbered steps (1., 2., 3., \xE2\x80\xA6).\n"
    "\n"
    "7. Steps should still form a clear logical chain to the conclusion.\n"
    "\n"
    "Example:\n"
    "\n"
    "Input reasoning:\n"
    "\n"
    "The highlighted country is within the Pacific Islands region. Based on its "
    "position relative to neighboring larger landmasses like Australia and nearby "
    "countries such as Papua New Guinea and New Zealand, the highlighted country "
    "aligns with the location of Vanuatu. According to the context, Vanuatu has a "
    "territorial dispute over Matthew and Hunter Islands, claimed by both Vanuatu "
    "and France. Therefore, the presence of a dashed box labeled \"Disputed "
    "island\" suggests the inclusion of this dispute in the overview of the "
    "country's territories.\n"
    "\n"
    "Output:\n"
    "\n"
    "1. In Pacific Islands.\n"
    "\n"
    "2. Near Australia, Papua New Guinea, New Zealand\n"
    "\n"
    "3. Likely Vanuatu.\n"
    "\n"
    "4. Dispute with France.\n"
    "\n"
    "5. Dashed box marks dispute.\n"
    "\n"
    "Task:\n"
    "\n"
    "Convert the following reasoning into sketch-style reasoning:\n";

std::string lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool has_alnum(std::string_view text) {
  return std::any_of(text.begin(), text.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)); });
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '\'';
}

// Strips leading filler phrases (and the punctuation after them).
std::string strip_fillers(std::string_view sentence, const RuleConverterConfig& config) {
  std::vector<std::string> fillers = config.fillers;
  std::sort(fillers.begin(), fillers.end(),
            [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
  std::string_view rest = trim(sentence);
  bool changed = true;
  while (changed && !rest.empty()) {
    changed = false;
    const std::string head = lower(rest);
    for (const std::string& f : fillers) {
      const std::string lf = lower(f);
      if (lf.empty() || !head.starts_with(lf)) continue;
      if (head.size() > lf.size() && is_word_char(head[lf.size()])) continue;
      rest.remove_prefix(lf.size());
      while (!rest.empty() && (rest.front() == ',' || rest.front() == ':' ||
                               rest.front() == ';' || rest.front() == ' ')) {
        rest.remove_prefix(1);
      }
      changed = true;
      break;
    }
  }
  std::string out(trim(rest));
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string build_steps(const std::vector<std::vector<std::string_view>>& sentences,
                        int budget) {
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i > 0) out += '\n';
    out += std::to_string(i + 1) + ".";
    const std::size_t keep = std::min<std::size_t>(sentences[i].size(),
                                                   static_cast<std::size_t>(budget - 1));
    for (std::size_t w = 0; w < keep; ++w) {
      out += ' ';
      out += sentences[i][w];
    }
  }
  return out;
}

}  // namespace

std::string render_conversion_prompt(std::string_view long_cot) {
  std::string out(kConversionPrompt);
  out += long_cot;
  return out;
}

std::string convert_llm(LlmClient& client, std::string_view long_cot) {
  const std::string reply = client.complete(render_conversion_prompt(long_cot));
  std::string_view stripped = trim(reply);
  if (stripped.empty()) fail(ErrorCategory::kEmptyOutput, "converter returned an empty reply");
  return std::string(stripped);
}

std::vector<std::string> split_sentences(std::string_view text,
                                         const RuleConverterConfig& config) {
  std::vector<std::string> abbreviations;
  for (const std::string& a : config.abbreviations) abbreviations.push_back(lower(a));

  std::vector<std::string> out;
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    std::string_view s = trim(text.substr(start, end - start));
    if (!s.empty()) out.emplace_back(s);
    start = end;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      emit(i);
      start = i + 1;
      continue;
    }
    if (c != '.' && c != '?' && c != '!') continue;
    const bool at_boundary = i + 1 == text.size() ||
                             std::isspace(static_cast<unsigned char>(text[i + 1]));
    if (!at_boundary) continue;
    if (c == '.') {
      std::size_t w = i;
      while (w > start && !std::isspace(static_cast<unsigned char>(text[w - 1]))) --w;
      const std::string word = lower(text.substr(w, i + 1 - w));
      if (std::find(abbreviations.begin(), abbreviations.end(), word) != abbreviations.end()) {
        continue;
      }
    }
    emit(i + 1);
  }
  emit(text.size());
  return out;
}

std::string convert_rule_based(std::string_view long_cot, const RuleConverterConfig& config) {
  if (trim(long_cot).empty()) fail(ErrorCategory::kEmptyOutput, "empty reasoning to convert");
  if (config.max_step_tokens < 2) {
    fail(ErrorCategory::kConfig, "max_step_tokens must be >= 2");
  }
  if (rule_judge(long_cot, config.judge, config.tokenizer).score == 1.0) {
    return std::string(long_cot);
  }

  std::vector<std::string> kept;
  for (const std::string& s : split_sentences(long_cot, config)) {
    std::string cleaned = strip_fillers(s, config);
    if (has_alnum(cleaned)) kept.push_back(std::move(cleaned));
  }
  if (kept.empty()) kept.emplace_back(trim(long_cot));

  // Two tokens per step is the floor, so cap the step count to fit the
  // total budget; the last sentence usually carries the conclusion.
  const std::size_t max_steps =
      std::max<std::size_t>(1, static_cast<std::size_t>(config.judge.max_total_tokens / 2));
  if (kept.size() > max_steps) {
    std::string last = kept.back();
    kept.resize(max_steps - 1);
    kept.push_back(std::move(last));
  }

  std::vector<std::vector<std::string_view>> words;
  for (const std::string& s : kept) words.push_back(split_whitespace(s));

  const std::size_t input_tokens = config.tokenizer.count(long_cot);
  const bool must_shrink = kept.size() > 1;
  std::string best;
  for (int budget = config.max_step_tokens; budget >= 2; --budget) {
    best = build_steps(words, budget);
    const std::size_t n = config.tokenizer.count(best);
    if (n <= static_cast<std::size_t>(config.judge.max_total_tokens) &&
        (!must_shrink || n < input_tokens)) {
      break;
    }
  }
  return best;
}

ConversionRecord validate_record(ConversionRecord record, const Tokenizer& tokenizer,
                                 const RuleJudgeConfig& judge_config) {
  const StepProfile profile = profile_thinking(record.sketch_cot, tokenizer);
  const bool judged =
      rule_judge(record.sketch_cot, judge_config, tokenizer).score == 1.0;
  const bool shorter = tokenizer.count(record.sketch_cot) < tokenizer.count(record.long_cot);
  record.validated = judged && shorter && profile.empty_steps == 0;
  return record;
}

std::vector<ConversionInput> read_conversion_inputs(const std::filesystem::path& path) {
  std::vector<ConversionInput> out;
  std::vector<Question> questions;
  for (const Json& row : read_jsonl(path)) {
    ConversionInput in;
    in.question.id = require_string(row, "id");
    in.question.context = row.value("context", "");
    in.question.prompt = row.value("prompt", "");
    in.question.gold_answer = require_string(row, "gold_answer");
    in.question.answer_kind = answer_kind_from_string(require_string(row, "answer_kind"));
    in.long_cot = require_string(row, "long_cot");
    questions.push_back(in.question);
    out.push_back(std::move(in));
  }
  validate_questions(questions);
  return out;
}

std::string_view to_string(ConversionSource source) {
  return source == ConversionSource::kLlm ? "llm" : "rule";
}

ConversionSource conversion_source_from_string(std::string_view text) {
  if (text == "llm") return ConversionSource::kLlm;
  if (text == "rule") return ConversionSource::kRule;
  fail(ErrorCategory::kIo, "unknown conversion source '" + std::string(text) + "'");
}

Json to_json(const ConversionRecord& r) {
  return {{"id", r.id},
          {"context", r.question.context},
          {"prompt", r.question.prompt},
          {"gold_answer", r.question.gold_answer},
          {"answer_kind", std::string(to_string(r.question.answer_kind))},
          {"long_cot", r.long_cot},
          {"sketch_cot", r.sketch_cot},
          {"source", std::string(to_string(r.source))},
          {"validated", r.validated}};
}

ConversionRecord record_from_json(const Json& j) {
  ConversionRecord r;
  r.id = require_string(j, "id");
  r.question.id = r.id;
  r.question.context = j.value("context", "");
  r.question.prompt = j.value("prompt", "");
  r.question.gold_answer = require_string(j, "gold_answer");
  r.question.answer_kind = answer_kind_from_string(require_string(j, "answer_kind"));
  r.long_cot = require_string(j, "long_cot");
  r.sketch_cot = require_string(j, "sketch_cot");
  r.source = conversion_source_from_string(require_string(j, "source"));
  r.validated = j.value("validated", false);
  return r;
}

std::vector<ConversionRecord> read_records(const std::filesystem::path& path) {
  std::vector<ConversionRecord> out;
  for (const Json& row : read_jsonl(path)) out.push_back(record_from_json(row));
  return out;
}

void write_records(const std::filesystem::path& path,
                   std::span<const ConversionRecord> records) {
  std::vector<Json> rows;
  rows.reserve(records.size());
  for (const ConversionRecord& r : records) rows.push_back(to_json(r));
  write_jsonl(path, rows);
}

Json CorpusSummary::to_json() const {
  Json failures_json = Json::array();
  for (const ConversionFailure& f : failures) {
    failures_json.push_back({{"id", f.id}, {"message", f.message}});
  }
  return {{"count", count},
          {"validated", validated},
          {"validation_rate", validation_rate ? Json(*validation_rate) : Json(nullptr)},
          {"mean_compression_ratio",
           mean_compression_ratio ? Json(*mean_compression_ratio) : Json(nullptr)},
          {"failures", failures_json}};
}

CorpusResult build_cold_start_corpus(std::span<const ConversionInput> inputs,
                                     const CorpusOptions& options) {
  struct Slot {
    std::optional<ConversionRecord> record;
    std::string error;
  };
  std::vector<Slot> slots(inputs.size());
  const Tokenizer& tokenizer = options.rule.tokenizer;

  detail::parallel_for(inputs.size(), options.threads, [&](std::size_t i) {
    const ConversionInput& in = inputs[i];
    try {
      ConversionRecord r;
      r.id = in.question.id;
      r.question = in.question;
      r.long_cot = in.long_cot;
      if (options.client != nullptr) {
        r.sketch_cot = convert_llm(*options.client, in.long_cot);
        r.source = ConversionSource::kLlm;
      } else {
        r.sketch_cot = convert_rule_based(in.long_cot, options.rule);
        r.source = ConversionSource::kRule;
      }
      slots[i].record = validate_record(std::move(r), tokenizer, options.rule.judge);
    } catch (const Error& e) {
      slots[i].error = e.what();
    }
  });

  CorpusResult result;
  double ratio_sum = 0.0;
  std::size_t ratio_n = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].record) {
      result.summary.failures.push_back({inputs[i].question.id, slots[i].error});
      continue;
    }
    ConversionRecord& r = *slots[i].record;
    const std::size_t long_tokens = tokenizer.count(r.long_cot);
    if (long_tokens > 0) {
      ratio_sum += static_cast<double>(tokenizer.count(r.sketch_cot)) /
                   static_cast<double>(long_tokens);
      ++ratio_n;
    }
    if (r.validated) ++result.summary.validated;
    result.records.push_back(std::move(r));
  }
  result.summary.count = result.records.size();
  if (!inputs.empty()) {
    result.summary.validation_rate =
        static_cast<double>(result.summary.validated) / static_cast<double>(inputs.size());
    result.summary.below_floor = *result.summary.validation_rate < options.min_validation_rate;
  }
  if (ratio_n > 0) result.summary.mean_compression_ratio = ratio_sum / static_cast<double>(ratio_n);
  return result;
}

}  // namespace sketch_rl
