#pragma once

// Shared domain types: questions, parsed responses and tokenization.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sketch_rl {

enum class AnswerKind { kMultipleChoice, kFreeForm };

std::string_view to_string(AnswerKind kind);
AnswerKind answer_kind_from_string(std::string_view text);

struct Question {
  std::string id;
  // Opaque stand-in for the image or scene description.
  std::string context;
  std::string prompt;
  std::string gold_answer;
  AnswerKind answer_kind = AnswerKind::kMultipleChoice;
};

// Open/close markers of the two response segments.
struct FormatSpec {
  std::string think_open = "<think>";
  std::string think_close = "</think>";
  std::string answer_open = "<answer>";
  std::string answer_close = "</answer>";
};

struct Trace {
  std::string thinking;
  std::string answer;
  std::string raw;
  bool well_formed = false;
};

struct TokenSequence {
  std::vector<std::string> tokens;

  std::size_t count() const noexcept { return tokens.size(); }
};

class Tokenizer {
 public:
  enum class Scheme { kWhitespace, kCharNgram };

  static Tokenizer whitespace() { return Tokenizer(Scheme::kWhitespace, 0); }
  // Each whitespace-delimited word is cut into chunks of n code points.
  static Tokenizer char_ngram(int n);

  Scheme scheme() const noexcept { return scheme_; }
  int ngram() const noexcept { return n_; }
  std::string describe() const;

  TokenSequence tokenize(std::string_view text) const;
  std::size_t count(std::string_view text) const { return tokenize(text).count(); }

 private:
  Tokenizer(Scheme scheme, int n) : scheme_(scheme), n_(n) {}

  Scheme scheme_;
  int n_;
};

// Parses tokenizer names such as "whitespace" or "char_ngram:3".
Tokenizer tokenizer_from_string(std::string_view text);

TokenSequence tokenize(std::string_view text, const Tokenizer& tokenizer);

// Splits on maximal runs of ASCII whitespace.
std::vector<std::string_view> split_whitespace(std::string_view text);

// Joins tokens with single spaces, except that a step-number token ("1.",
// "2.", ...) starts a new line. Whitespace tokenization of the result gives
// back the same tokens.
std::string detokenize(const std::vector<std::string>& tokens);

bool is_step_number(std::string_view token);

std::string render_response(std::string_view thinking, std::string_view answer,
                            const FormatSpec& format = {});

// Never fails: malformedness is reported through Trace::well_formed.
Trace parse_response(std::string_view raw, const FormatSpec& format = {});

std::string_view trim(std::string_view text);

std::vector<Question> read_questions(const std::filesystem::path& path);
void write_questions(const std::filesystem::path& path,
                     const std::vector<Question>& questions);
// Throws on empty or duplicate ids and empty gold answers.
void validate_questions(const std::vector<Question>& questions);

}  // namespace sketch_rl
