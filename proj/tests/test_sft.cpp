#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sketch_rl/error.hpp"
#include "sketch_rl/judge.hpp"
#include "sketch_rl/sft.hpp"
#include "test_support.hpp"

using namespace sketch_rl;
using testing_support::make_question;
using testing_support::rel_err;

namespace {

SftSample sample_of(const std::string& qid, std::vector<std::string> tokens) {
  return {make_question(qid, "A"), TokenSequence{std::move(tokens)}};
}

void randomize(PolicyParams& p, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : p.logits()) v = n(rng);
}

ConversionRecord record(const std::string& id, const std::string& sketch,
                        const std::string& gold) {
  ConversionRecord r;
  r.id = id;
  r.question = make_question(id, gold);
  r.long_cot = "long";
  r.sketch_cot = sketch;
  r.validated = true;
  return r;
}

}  // namespace

TEST(SftLoss, UniformHandValue) {
  // Five tokens plus end: each of the three steps has probability 1/6.
  const PolicyParams p =
      PolicyParams::make_token_level({"q"}, {"a", "b", "c", "d", "e"}, 8);
  SftBatch batch{{sample_of("q", {"a", "b"})}};
  EXPECT_NEAR(sft_loss(p, batch), 3.0 * std::log(6.0), 1e-12);
  EXPECT_NEAR(sft_loss(p, batch), 5.375, 1e-3);
}

TEST(SftLoss, MeanOverSamplesAndPermutationInvariant) {
  std::mt19937_64 rng(4);
  PolicyParams p = PolicyParams::make_token_level({"q", "r"}, {"a", "b", "c"}, 5);
  randomize(p, rng);
  const SftSample s1 = sample_of("q", {"a", "c"});
  const SftSample s2 = sample_of("r", {"b"});
  EXPECT_NEAR(sft_loss(p, {{s1}}), sft_loss(p, {{s1, s1}}), 1e-14);
  EXPECT_NEAR(sft_loss(p, {{s1, s2}}), sft_loss(p, {{s2, s1}}), 1e-14);
}

TEST(SftLoss, ZeroWhenDeterministicOnTargets) {
  PolicyParams p = PolicyParams::make_token_level({"q"}, {"a", "b"}, 4);
  // Start -> a, after a -> b, after b -> end.
  const std::size_t width = 3;
  auto set_row = [&](int prev, int chosen) {
    auto row = p.row(p.token_row(0, prev));
    std::fill(row.begin(), row.end(), -800.0);
    row[chosen] = 800.0;
    (void)width;
  };
  set_row(-1, 0);
  set_row(0, 1);
  set_row(1, p.end_id());
  EXPECT_NEAR(sft_loss(p, {{sample_of("q", {"a", "b"})}}), 0.0, 1e-12);
}

TEST(SftLoss, OutOfVocabularyTarget) {
  const PolicyParams p = PolicyParams::make_token_level({"q"}, {"a"}, 4);
  try {
    sft_loss(p, {{sample_of("q", {"zz"})}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kOutsideSupport);
  }
}

TEST(SftLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    PolicyParams p = PolicyParams::make_token_level({"q", "r"}, {"a", "b", "c"}, 4);
    randomize(p, rng);
    SftBatch batch;
    const int n = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> toks;
      const int len = static_cast<int>(rng() % 5);
      for (int t = 0; t < len; ++t) toks.push_back(p.vocabulary()[rng() % 3]);
      batch.samples.push_back(sample_of(rng() % 2 ? "q" : "r", toks));
    }
    const Gradient g = sft_loss_gradient(p, batch);
    const double h = 1e-5;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double saved = p.logits()[i];
      p.logits()[i] = saved + h;
      const double up = sft_loss(p, batch);
      p.logits()[i] = saved - h;
      const double down = sft_loss(p, batch);
      p.logits()[i] = saved;
      ASSERT_LT(rel_err(g[i], (up - down) / (2 * h)), 1e-6) << "trial " << trial;
    }
  }
}

TEST(SftStep, ZeroLearningRateLeavesParams) {
  std::mt19937_64 rng(2);
  PolicyParams p = PolicyParams::make_token_level({"q"}, {"a", "b"}, 3);
  randomize(p, rng);
  const std::vector<double> before(p.logits().begin(), p.logits().end());
  const SftBatch batch{{sample_of("q", {"a"})}};
  const double loss = sft_step(p, batch, 0.0);
  EXPECT_NEAR(loss, sft_loss(p, batch), 1e-15);
  EXPECT_TRUE(std::equal(before.begin(), before.end(), p.logits().begin()));
}

TEST(SftStep, LossNonIncreasing) {
  std::mt19937_64 rng(8);
  PolicyParams p = PolicyParams::make_token_level({"q", "r"}, {"1.", "x", "y", "z"}, 6);
  randomize(p, rng);
  const SftBatch batch{{sample_of("q", {"1.", "x", "y"}), sample_of("r", {"1.", "z"}),
                        sample_of("q", {"1.", "x", "z"})}};
  double prev = sft_loss(p, batch);
  for (int step = 0; step < 100; ++step) {
    const double pre = sft_step(p, batch, 0.1);
    EXPECT_NEAR(pre, prev, 1e-12);
    const double post = sft_loss(p, batch);
    EXPECT_LE(post, prev + 1e-12) << "step " << step;
    prev = post;
  }
}

TEST(SftTrain, GreedyGenerationsBecomeSketches) {
  std::vector<ConversionRecord> records;
  for (int i = 0; i < 8; ++i) {
    const std::string n = std::to_string(i + 10);
    // Tokens stay unique within a target so a previous-token policy can fit it.
    records.push_back(record("q" + std::to_string(i),
                             "1. " + n + " + 1 = " + std::to_string(i + 11) + "\n2. Sum checked",
                             "B"));
  }
  const Tokenizer ws = Tokenizer::whitespace();
  const SftBatch batch = make_sft_batch(records, ws);
  ASSERT_EQ(batch.size(), 8u);
  EXPECT_EQ(batch.samples[0].target.tokens.front(), "<think>");
  EXPECT_EQ(batch.samples[0].target.tokens.back(), "</answer>");
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.id);
  PolicyParams p = PolicyParams::make_token_level(ids, build_vocabulary(batch), 24);
  SftConfig config;
  config.steps = 2000;
  config.learning_rate = 2.0;
  config.weight_decay = 0.0;
  config.target_loss = 0.1;
  const auto losses = train_sft(p, batch, config);
  ASSERT_FALSE(losses.empty());
  EXPECT_LT(sft_loss(p, batch), 0.1);

  int sketch = 0;
  for (std::size_t q = 0; q < ids.size(); ++q) {
    const Trace t = parse_response(p.render(greedy(p, q), q));
    if (rule_judge(t.thinking, {}, ws).score == 1.0) ++sketch;
  }
  EXPECT_GE(sketch, static_cast<int>(0.9 * ids.size()));
}

TEST(SftTrain, VocabularySortedUnique) {
  const SftBatch batch{{sample_of("q", {"b", "a", "b"}), sample_of("q", {"c", "a"})}};
  EXPECT_EQ(build_vocabulary(batch), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(TemplateColdStart, BoostsCorrectSketchOnly) {
  std::vector<Question> qs{make_question("q0", "A")};
  std::unordered_map<std::string, std::vector<std::string>> raw{
      {"q0", testing_support::four_class_candidates("A", "C")}};
  auto bank = std::make_shared<CandidateBank>(CandidateBank::build(qs, raw));
  PolicyParams p = PolicyParams::make_template(bank);
  apply_template_cold_start(p, 2.0);
  EXPECT_EQ(std::vector<double>(p.logits().begin(), p.logits().end()),
            (std::vector<double>{2.0, 0.0, 0.0, 0.0}));
}
