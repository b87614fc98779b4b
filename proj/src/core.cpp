#include "sketch_rl/core.hpp"

#include <algorithm>
#include <charconv>
#include <unordered_set>

#include "sketch_rl/error.hpp"
#include "sketch_rl/jsonl.hpp"

namespace sketch_rl {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool only_space(std::string_view text) {
  return std::all_of(text.begin(), text.end(), is_space);
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

void erase_all(std::string& text, std::string_view needle) {
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos)) {
    text.erase(pos, needle.size());
  }
}

std::string strip_markers(std::string_view text, const FormatSpec& format) {
  std::string out(text);
  for (const std::string* m : {&format.think_open, &format.think_close,
                               &format.answer_open, &format.answer_close}) {
    erase_all(out, *m);
  }
  return out;
}

// Length in bytes of the UTF-8 sequence starting with lead byte c.
std::size_t utf8_length(unsigned char c) {
  if (c < 0x80) return 1;
  if ((c >> 5) == 0x6) return 2;
  if ((c >> 4) == 0xE) return 3;
  if ((c >> 3) == 0x1E) return 4;
  return 1;
}

}  // namespace

std::string_view to_string(AnswerKind kind) {
  return kind == AnswerKind::kMultipleChoice ? "multiple_choice" : "free_form";
}

AnswerKind answer_kind_from_string(std::string_view text) {
  if (text == "multiple_choice") return AnswerKind::kMultipleChoice;
  if (text == "free_form") return AnswerKind::kFreeForm;
  fail(ErrorCategory::kInvalidArgument,
       "unknown answer_kind '" + std::string(text) + "'");
}

Tokenizer Tokenizer::char_ngram(int n) {
  if (n < 1) fail(ErrorCategory::kInvalidArgument, "char_ngram needs n >= 1");
  return Tokenizer(Scheme::kCharNgram, n);
}

std::string Tokenizer::describe() const {
  return scheme_ == Scheme::kWhitespace ? "whitespace"
                                        : "char_ngram:" + std::to_string(n_);
}

TokenSequence Tokenizer::tokenize(std::string_view text) const {
  TokenSequence out;
  for (std::string_view word : split_whitespace(text)) {
    if (scheme_ == Scheme::kWhitespace) {
      out.tokens.emplace_back(word);
      continue;
    }
    std::size_t pos = 0;
    while (pos < word.size()) {
      std::size_t end = pos;
      for (int k = 0; k < n_ && end < word.size(); ++k) {
        end += utf8_length(static_cast<unsigned char>(word[end]));
      }
      end = std::min(end, word.size());
      out.tokens.emplace_back(word.substr(pos, end - pos));
      pos = end;
    }
  }
  return out;
}

Tokenizer tokenizer_from_string(std::string_view text) {
  if (text == "whitespace") return Tokenizer::whitespace();
  constexpr std::string_view kPrefix = "char_ngram:";
  if (text.starts_with(kPrefix)) {
    std::string_view digits = text.substr(kPrefix.size());
    int n = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec == std::errc() && ptr == digits.data() + digits.size()) {
      return Tokenizer::char_ngram(n);
    }
  }
  fail(ErrorCategory::kConfig, "unknown tokenizer '" + std::string(text) + "'");
}

TokenSequence tokenize(std::string_view text, const Tokenizer& tokenizer) {
  return tokenizer.tokenize(text);
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

bool is_step_number(std::string_view token) {
  if (token.size() < 2 || token.back() != '.') return false;
  return std::all_of(token.begin(), token.end() - 1,
                     [](char c) { return c >= '0' && c <= '9'; });
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += is_step_number(tokens[i]) ? '\n' : ' ';
    out += tokens[i];
  }
  return out;
}

std::string render_response(std::string_view thinking, std::string_view answer,
                            const FormatSpec& format) {
  std::string out;
  out.reserve(thinking.size() + answer.size() + 40);
  out += format.think_open;
  out += thinking;
  out += format.think_close;
  out += format.answer_open;
  out += answer;
  out += format.answer_close;
  return out;
}

Trace parse_response(std::string_view raw, const FormatSpec& format) {
  Trace trace;
  trace.raw = std::string(raw);

  const bool one_each = count_occurrences(raw, format.think_open) == 1 &&
                        count_occurrences(raw, format.think_close) == 1 &&
                        count_occurrences(raw, format.answer_open) == 1 &&
                        count_occurrences(raw, format.answer_close) == 1;
  const std::size_t to = raw.find(format.think_open);
  const std::size_t tc = raw.find(format.think_close);
  const std::size_t ao = raw.find(format.answer_open);
  const std::size_t ac = raw.find(format.answer_close);

  if (one_each && to < tc && tc < ao && ao < ac) {
    const std::size_t think_begin = to + format.think_open.size();
    const std::size_t think_end = tc;
    const std::size_t answer_begin = ao + format.answer_open.size();
    const std::size_t answer_end = ac;
    const bool clean =
        only_space(raw.substr(0, to)) &&
        only_space(raw.substr(tc + format.think_close.size(),
                              ao - tc - format.think_close.size())) &&
        only_space(raw.substr(ac + format.answer_close.size()));
    if (clean) {
      trace.thinking = std::string(raw.substr(think_begin, think_end - think_begin));
      trace.answer = std::string(raw.substr(answer_begin, answer_end - answer_begin));
      trace.well_formed = true;
      return trace;
    }
  }

  // Best-effort thinking extraction for malformed responses.
  std::string_view thinking;
  if (to != std::string_view::npos) {
    const std::size_t begin = to + format.think_open.size();
    std::size_t end = raw.find(format.think_close, begin);
    if (end == std::string_view::npos) end = raw.find(format.answer_open, begin);
    if (end == std::string_view::npos) end = raw.size();
    thinking = raw.substr(begin, end - begin);
  } else if (tc != std::string_view::npos) {
    thinking = raw.substr(0, tc);
  } else if (ao != std::string_view::npos) {
    thinking = raw.substr(0, ao);
  } else {
    thinking = raw;
  }
  trace.thinking = strip_markers(trim(thinking), format);
  trace.answer.clear();
  trace.well_formed = false;
  return trace;
}

std::string_view trim(std::string_view text) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  return text.substr(b, e - b);
}

std::vector<Question> read_questions(const std::filesystem::path& path) {
  std::vector<Question> out;
  for (const Json& row : read_jsonl(path)) {
    Question q;
    q.id = require_string(row, "id");
    q.context = row.value("context", "");
    q.prompt = row.value("prompt", "");
    q.gold_answer = require_string(row, "gold_answer");
    q.answer_kind = answer_kind_from_string(require_string(row, "answer_kind"));
    out.push_back(std::move(q));
  }
  validate_questions(out);
  return out;
}

void write_questions(const std::filesystem::path& path,
                     const std::vector<Question>& questions) {
  std::vector<Json> rows;
  rows.reserve(questions.size());
  for (const Question& q : questions) {
    rows.push_back({{"id", q.id},
                    {"context", q.context},
                    {"prompt", q.prompt},
                    {"gold_answer", q.gold_answer},
                    {"answer_kind", std::string(to_string(q.answer_kind))}});
  }
  write_jsonl(path, rows);
}

void validate_questions(const std::vector<Question>& questions) {
  std::unordered_set<std::string> seen;
  for (const Question& q : questions) {
    if (q.id.empty()) fail(ErrorCategory::kInvalidArgument, "question with empty id");
    if (!seen.insert(q.id).second) {
      fail(ErrorCategory::kInvalidArgument, "duplicate question id '" + q.id + "'");
    }
    if (q.gold_answer.empty()) {
      fail(ErrorCategory::kInvalidArgument,
           "question '" + q.id + "' has an empty gold answer");
    }
  }
}

}  // namespace sketch_rl
