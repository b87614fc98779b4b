#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "sketch_rl/core.hpp"
#include "sketch_rl/error.hpp"
#include "test_support.hpp"

using namespace sketch_rl;

TEST(Tokenize, WhitespaceCounts) {
  const Tokenizer ws = Tokenizer::whitespace();
  EXPECT_EQ(tokenize("1. In Pacific Islands.", ws).count(), 4u);
  EXPECT_EQ(tokenize("", ws).count(), 0u);
  EXPECT_EQ(tokenize("a  b", ws).count(), 2u);
  EXPECT_EQ(tokenize(" \t\na\n\nb \r\n", ws).count(), 2u);
}

TEST(Tokenize, CountEqualsListLength) {
  const TokenSequence s = tokenize("x y z", Tokenizer::whitespace());
  EXPECT_EQ(s.count(), s.tokens.size());
  EXPECT_EQ(s.tokens, (std::vector<std::string>{"x", "y", "z"}));
}

TEST(Tokenize, CharNgramChunksWords) {
  const Tokenizer t = Tokenizer::char_ngram(3);
  EXPECT_EQ(tokenize("abcdefg hi", t).tokens,
            (std::vector<std::string>{"abc", "def", "g", "hi"}));
  // Multi-byte code points are never split.
  EXPECT_EQ(tokenize("\xC3\xA9\xC3\xA9\xC3\xA9\xC3\xA9", t).count(), 2u);
}

TEST(Tokenize, FromString) {
  EXPECT_EQ(tokenizer_from_string("whitespace").scheme(), Tokenizer::Scheme::kWhitespace);
  const Tokenizer t = tokenizer_from_string("char_ngram:4");
  EXPECT_EQ(t.scheme(), Tokenizer::Scheme::kCharNgram);
  EXPECT_EQ(t.ngram(), 4);
  EXPECT_EQ(t.describe(), "char_ngram:4");
  EXPECT_THROW(tokenizer_from_string("bpe"), Error);
  EXPECT_THROW(tokenizer_from_string("char_ngram:0"), Error);
}

TEST(Tokenize, DeterministicAndIdempotentInCount) {
  std::mt19937_64 rng(3);
  const std::string alphabet = "ab c\t\n.1";
  const Tokenizer ws = Tokenizer::whitespace();
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const int len = static_cast<int>(rng() % 40);
    for (int i = 0; i < len; ++i) text += alphabet[rng() % alphabet.size()];
    const TokenSequence a = tokenize(text, ws);
    EXPECT_EQ(a.tokens, tokenize(text, ws).tokens);
    std::string joined;
    for (const auto& tok : a.tokens) joined += tok + " ";
    EXPECT_EQ(tokenize(joined, ws).count(), a.count());
  }
}

TEST(Detokenize, StepNumbersStartLines) {
  const std::vector<std::string> tokens{"1.", "Add", "it", "2.", "Done"};
  const std::string text = detokenize(tokens);
  EXPECT_EQ(text, "1. Add it\n2. Done");
  EXPECT_EQ(tokenize(text, Tokenizer::whitespace()).tokens, tokens);
  EXPECT_TRUE(is_step_number("12."));
  EXPECT_FALSE(is_step_number("1.5"));
  EXPECT_FALSE(is_step_number("."));
  EXPECT_FALSE(is_step_number("a."));
}

TEST(ParseResponse, ExactTemplate) {
  const Trace t = parse_response("<think>1. A.</think><answer>B</answer>");
  EXPECT_TRUE(t.well_formed);
  EXPECT_EQ(t.thinking, "1. A.");
  EXPECT_EQ(t.answer, "B");
}

TEST(ParseResponse, NoMarkers) {
  const Trace t = parse_response("no markers at all");
  EXPECT_FALSE(t.well_formed);
  EXPECT_EQ(t.answer, "");
  EXPECT_EQ(t.thinking, "no markers at all");
}

TEST(ParseResponse, DuplicateSegmentIsMalformed) {
  const Trace t = parse_response("<think>x</think><answer>y</answer><answer>z</answer>");
  EXPECT_FALSE(t.well_formed);
  EXPECT_EQ(t.answer, "");
}

TEST(ParseResponse, MalformedCases) {
  // Wrong order.
  EXPECT_FALSE(parse_response("<answer>y</answer><think>x</think>").well_formed);
  // Text outside the segments.
  EXPECT_FALSE(parse_response("hi <think>x</think><answer>y</answer>").well_formed);
  EXPECT_FALSE(parse_response("<think>x</think> and <answer>y</answer>").well_formed);
  // Missing answer segment.
  const Trace t = parse_response("<think>x</think>");
  EXPECT_FALSE(t.well_formed);
  EXPECT_EQ(t.thinking, "x");
  // Unclosed thinking.
  EXPECT_FALSE(parse_response("<think>x<answer>y</answer>").well_formed);
}

TEST(ParseResponse, SurroundingWhitespaceAllowed) {
  const Trace t = parse_response("  \n<think>a</think>\n<answer>b</answer>\n");
  EXPECT_TRUE(t.well_formed);
  EXPECT_EQ(t.thinking, "a");
  EXPECT_EQ(t.answer, "b");
}

TEST(ParseResponse, EmptyThinkingIsWellFormed) {
  const Trace t = parse_response("<think></think><answer>x</answer>");
  EXPECT_TRUE(t.well_formed);
  EXPECT_EQ(t.thinking, "");
}

TEST(ParseResponse, CustomMarkers) {
  FormatSpec f{"[T]", "[/T]", "[A]", "[/A]"};
  const Trace t = parse_response("[T]go[/T][A]7[/A]", f);
  EXPECT_TRUE(t.well_formed);
  EXPECT_EQ(t.answer, "7");
  EXPECT_FALSE(parse_response("<think>go</think><answer>7</answer>", f).well_formed);
}

TEST(ParseResponse, RoundTripsRenderedResponses) {
  std::mt19937_64 rng(9);
  const std::string alphabet = "abc XYZ\n1.?!";
  for (int trial = 0; trial < 300; ++trial) {
    auto gen = [&] {
      std::string s;
      const int len = static_cast<int>(rng() % 30);
      for (int i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
      return std::string(trim(s));
    };
    const std::string thinking = gen();
    const std::string answer = gen();
    const std::string raw = render_response(thinking, answer);
    const Trace t = parse_response(raw);
    ASSERT_TRUE(t.well_formed) << raw;
    EXPECT_EQ(t.thinking, thinking);
    EXPECT_EQ(t.answer, answer);
    EXPECT_EQ(t.raw, raw);
  }
}

TEST(Questions, ValidateRejectsBadDatasets) {
  using testing_support::make_question;
  EXPECT_NO_THROW(validate_questions({make_question("a", "A"), make_question("b", "B")}));
  EXPECT_THROW(validate_questions({make_question("", "A")}), Error);
  EXPECT_THROW(validate_questions({make_question("a", "A"), make_question("a", "B")}), Error);
  EXPECT_THROW(validate_questions({make_question("a", "")}), Error);
}

TEST(Questions, FileRoundTrip) {
  const auto dir = testing_support::scratch_dir("questions");
  std::vector<Question> qs{testing_support::make_question("q1", "C"),
                           testing_support::make_question("q2", "42", AnswerKind::kFreeForm)};
  qs[0].context = "a red square";
  write_questions(dir / "q.jsonl", qs);
  const auto back = read_questions(dir / "q.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].context, "a red square");
  EXPECT_EQ(back[1].answer_kind, AnswerKind::kFreeForm);
  EXPECT_EQ(back[1].gold_answer, "42");
}

TEST(Questions, BundledFixtureIsValid) {
  const auto qs = read_questions(testing_support::fixture("questions.jsonl"));
  EXPECT_EQ(qs.size(), 20u);
  EXPECT_NO_THROW(validate_questions(qs));
}

TEST(Questions, MissingFieldIsIoError) {
  const auto dir = testing_support::scratch_dir("questions_bad");
  {
    std::ofstream out(dir / "q.jsonl");
    out << R"({"id": "x", "answer_kind": "free_form"})" << "\n";
  }
  try {
    read_questions(dir / "q.jsonl");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kIo);
    EXPECT_NE(std::string(e.what()).find("gold_answer"), std::string::npos);
  }
}
