#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sketch_rl/error.hpp"
#include "sketch_rl/grpo.hpp"
#include "sketch_rl/metrics.hpp"
#include "test_support.hpp"

using namespace sketch_rl;
using testing_support::four_class_candidates;
using testing_support::make_question;
using testing_support::rel_err;

namespace {

std::shared_ptr<const CandidateBank> small_bank(int questions) {
  std::vector<Question> qs;
  std::unordered_map<std::string, std::vector<std::string>> raw;
  for (int i = 0; i < questions; ++i) {
    qs.push_back(make_question("q" + std::to_string(i), "A"));
    raw[qs.back().id] = four_class_candidates("A", "C");
  }
  return std::make_shared<CandidateBank>(CandidateBank::build(qs, raw));
}

RolloutGroup group_of(const PolicyParams& p, std::size_t q, std::vector<int> candidates,
                      std::vector<double> advantages) {
  RolloutGroup g;
  g.question_index = q;
  g.question.id = p.question_ids()[q];
  for (int c : candidates) {
    Rollout r;
    r.key.ids = {c};
    g.rollouts.push_back(r);
  }
  g.advantages = std::move(advantages);
  return g;
}

void randomize(PolicyParams& p, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (double& v : p.logits()) v = n(rng);
}

class ThrowingJudge final : public Judge {
 public:
  JudgeVerdict score(std::string_view, JudgeMode) const override {
    throw Error(ErrorCategory::kTransport, "judge offline");
  }
};

struct FixtureRun {
  std::vector<Question> questions;
  std::shared_ptr<const CandidateBank> bank;
};

FixtureRun load_fixture() {
  FixtureRun f;
  f.questions = read_questions(testing_support::fixture("questions.jsonl"));
  f.bank = std::make_shared<CandidateBank>(
      CandidateBank::load(testing_support::fixture("bank.jsonl"), f.questions));
  return f;
}

}  // namespace

TEST(Advantages, MeanZeroStdOne) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> r(2 + rng() % 15);
    for (double& v : r) v = u(rng);
    const auto a = normalize_advantages(r, 1e-8);
    double mean = 0.0, var = 0.0;
    for (double v : a) mean += v;
    mean /= a.size();
    for (double v : a) var += (v - mean) * (v - mean);
    var /= a.size();
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(var), 1.0, 1e-9);
  }
}

TEST(Advantages, HandValues) {
  const std::vector<double> r{1.0, 0.0};
  const auto a = normalize_advantages(r, 1e-8);
  EXPECT_DOUBLE_EQ(a[0], 1.0);
  EXPECT_DOUBLE_EQ(a[1], -1.0);
  const std::vector<double> r3{0.9, 0.9, 0.0};
  const auto b = normalize_advantages(r3, 1e-8);
  EXPECT_NEAR(b[0], 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(b[2], -std::sqrt(2.0), 1e-12);
}

TEST(Advantages, ZeroVarianceGivesZeros) {
  const std::vector<double> r{0.7, 0.7, 0.7};
  for (double v : normalize_advantages(r, 1e-8)) EXPECT_EQ(v, 0.0);
  const std::vector<double> tiny{0.5, 0.5 + 1e-10};
  for (double v : normalize_advantages(tiny, 1e-8)) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(normalize_advantages(std::vector<double>{1.0}, 1e-8), Error);
}

TEST(Advantages, AffineInvariance) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> r(2 + rng() % 10);
    for (double& v : r) v = u(rng);
    const double a = 0.1 + 5 * u(rng), b = -3 + 6 * u(rng);
    std::vector<double> t = r;
    for (double& v : t) v = a * v + b;
    const auto x = normalize_advantages(r, 1e-8);
    const auto y = normalize_advantages(t, 1e-8);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], y[i], 1e-9);
  }
}

TEST(Kl, HandValues) {
  EXPECT_NEAR(kl_estimate(0.0, std::log(2.0)), 0.30685, 1e-5);
  EXPECT_NEAR(kl_estimate(0.0, std::log(0.5)), 0.19315, 1e-5);
  EXPECT_EQ(kl_estimate(-1.3, -1.3), 0.0);
}

TEST(Kl, NonNegativeAndConvex) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int i = 0; i < 10000; ++i) {
    const double a = u(rng), b = u(rng);
    EXPECT_GE(kl_estimate(a, b), 0.0);
    if (a != b) {
      EXPECT_GT(kl_estimate(a, b), 0.0);
    }
  }
  // Midpoint convexity in log rho.
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) / 4, y = u(rng) / 4;
    const double mid = kl_estimate(0.0, (x + y) / 2);
    EXPECT_LE(mid, (kl_estimate(0.0, x) + kl_estimate(0.0, y)) / 2 + 1e-12);
  }
}

TEST(Objective, ClipExamples) {
  const auto bank = small_bank(1);
  PolicyParams old = PolicyParams::make_template(bank);
  PolicyParams cur = PolicyParams::make_template(bank);
  // Old probability of candidate 0 is 1/4; current is 3/8, so rho = 1.5.
  cur.logits()[0] = std::log(1.8);
  GrpoConfig c;
  c.kl_coefficient = 0.0;
  ASSERT_NEAR(std::exp(logprob(cur, 0, {{0}}, 1.0) - logprob(old, 0, {{0}}, 1.0)), 1.5, 1e-12);
  EXPECT_NEAR(grpo_objective(group_of(cur, 0, {0}, {1.0}), cur, old, old, c), 1.2, 1e-12);
  EXPECT_NEAR(grpo_objective(group_of(cur, 0, {0}, {-1.0}), cur, old, old, c), -1.5, 1e-12);
}

TEST(Objective, InsideClipRangeIsMeanRatioTimesAdvantage) {
  std::mt19937_64 rng(4);
  const auto bank = small_bank(1);
  GrpoConfig c;
  c.kl_coefficient = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    PolicyParams old = PolicyParams::make_template(bank);
    randomize(old, rng, 1.0);
    PolicyParams cur = old;
    for (double& v : cur.logits()) v += std::normal_distribution<double>(0, 0.02)(rng);
    const RolloutGroup g = group_of(cur, 0, {0, 1, 2, 3, 1}, {0.5, -1.0, 1.5, 0.2, -1.2});
    double expected = 0.0;
    bool inside = true;
    for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
      const double rho = std::exp(logprob(cur, 0, g.rollouts[i].key, 1.0) -
                                  logprob(old, 0, g.rollouts[i].key, 1.0));
      inside = inside && rho >= 0.8 && rho <= 1.2;
      expected += rho * g.advantages[i];
    }
    ASSERT_TRUE(inside);
    EXPECT_NEAR(grpo_objective(g, cur, old, old, c), expected / 5.0, 1e-12);
  }
}

TEST(ObjectiveGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const auto bank = small_bank(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    PolicyParams cur = PolicyParams::make_template(bank);
    PolicyParams old = cur, ref = cur;
    randomize(cur, rng, 1.0);
    randomize(old, rng, 1.0);
    randomize(ref, rng, 1.0);
    GrpoConfig c;
    c.kl_coefficient = trial % 3 == 0 ? 0.0 : 0.05 * (trial % 7);
    c.temperature = trial % 2 ? 1.0 : 0.7;
    std::vector<int> cands;
    std::vector<double> adv;
    for (int i = 0; i < 5; ++i) {
      cands.push_back(static_cast<int>(rng() % 4));
      adv.push_back(n(rng));
    }
    const RolloutGroup g = group_of(cur, trial % 2, cands, adv);
    const Gradient grad = grpo_objective_gradient(g, cur, old, ref, c);
    const double h = 1e-6;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double saved = cur.logits()[i];
      cur.logits()[i] = saved + h;
      const double up = grpo_objective(g, cur, old, ref, c);
      cur.logits()[i] = saved - h;
      const double down = grpo_objective(g, cur, old, ref, c);
      cur.logits()[i] = saved;
      EXPECT_LT(rel_err(grad[i], (up - down) / (2 * h)), 1e-5) << "trial " << trial;
    }
  }
}

TEST(ObjectiveGradient, TokenLevelMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    PolicyParams cur = PolicyParams::make_token_level({"q"}, {"a", "b"}, 3);
    PolicyParams old = cur, ref = cur;
    randomize(cur, rng, 0.8);
    randomize(old, rng, 0.8);
    randomize(ref, rng, 0.8);
    GrpoConfig c;
    c.kl_coefficient = 0.1;
    const Question q = make_question("q", "A");
    RolloutGroup g;
    g.question = q;
    g.question_index = 0;
    g.rollouts = sample(old, q, 1.0, 4, rng());
    g.advantages = {1.0, -0.5, 0.25, -0.75};
    const Gradient grad = grpo_objective_gradient(g, cur, old, ref, c);
    const double h = 1e-6;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double saved = cur.logits()[i];
      cur.logits()[i] = saved + h;
      const double up = grpo_objective(g, cur, old, ref, c);
      cur.logits()[i] = saved - h;
      const double down = grpo_objective(g, cur, old, ref, c);
      cur.logits()[i] = saved;
      EXPECT_LT(rel_err(grad[i], (up - down) / (2 * h)), 1e-5) << "trial " << trial;
    }
  }
}

TEST(ObjectiveGradient, OnPolicyEqualsVanillaPolicyGradientMinusKl) {
  std::mt19937_64 rng(7);
  const auto bank = small_bank(1);
  PolicyParams cur = PolicyParams::make_template(bank);
  PolicyParams ref = cur;
  randomize(cur, rng, 1.0);
  randomize(ref, rng, 1.0);
  GrpoConfig c;
  c.kl_coefficient = 0.3;
  const RolloutGroup g = group_of(cur, 0, {0, 2, 3, 2}, {1.2, -0.4, 0.1, -0.9});
  const Gradient grad = grpo_objective_gradient(g, cur, cur, ref, c);

  Gradient expected(cur.logits().size(), 0.0);
  for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
    accumulate_logprob_gradient(cur, 0, g.rollouts[i].key, 1.0, g.advantages[i] / 4.0,
                                expected);
  }
  // KL gradient by finite differences of the mean KL term.
  auto mean_kl = [&](const PolicyParams& p) {
    double k = 0.0;
    for (const auto& r : g.rollouts) {
      k += kl_estimate(logprob(p, 0, r.key, 1.0), logprob(ref, 0, r.key, 1.0));
    }
    return k / 4.0;
  };
  const double h = 1e-6;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    PolicyParams up = cur, down = cur;
    up.logits()[i] += h;
    down.logits()[i] -= h;
    expected[i] -= c.kl_coefficient * (mean_kl(up) - mean_kl(down)) / (2 * h);
    EXPECT_LT(rel_err(grad[i], expected[i]), 1e-6);
  }
}

TEST(GrpoStep, ZeroAdvantagesOnlyDecay) {
  const auto bank = small_bank(1);
  PolicyParams p = PolicyParams::make_template(bank);
  std::mt19937_64 rng(8);
  randomize(p, rng, 1.0);
  const PolicyParams old = p;
  GrpoConfig c;
  c.kl_coefficient = 0.0;
  const std::vector<RolloutGroup> groups{group_of(p, 0, {0, 1, 2}, {0.0, 0.0, 0.0})};
  grpo_step(p, groups, old, old, c);
  for (std::size_t i = 0; i < p.logits().size(); ++i) {
    EXPECT_NEAR(p.logits()[i], old.logits()[i] * (1.0 - c.learning_rate * c.weight_decay),
                1e-15);
  }
}

TEST(GrpoStep, PositiveAdvantageRaisesLogit) {
  const auto bank = small_bank(1);
  PolicyParams p = PolicyParams::make_template(bank);
  const PolicyParams old = p;
  GrpoConfig c;
  const std::vector<RolloutGroup> groups{
      group_of(p, 0, {0, 1, 2, 3}, normalize_advantages(std::vector<double>{1.0, 0.9, 0.5, 0.0},
                                                        1e-8))};
  const StepStats stats = grpo_step(p, groups, old, old, c);
  EXPECT_GT(p.logits()[0], old.logits()[0]);
  EXPECT_NEAR(stats.mean_kl, 0.0, 1e-15);
}

TEST(Train, ZeroStepsLeavesParams) {
  const auto bank = small_bank(2);
  const PolicyParams p = PolicyParams::make_template(bank);
  const RuleJudge judge({}, Tokenizer::whitespace());
  RewardContext ctx;
  ctx.judge = &judge;
  GrpoConfig c;
  c.epochs = 0;
  const auto result = train({bank->question("q0"), bank->question("q1")}, p, ctx,
                            WeightSchedule::make_fixed({0.5, 0.4, 0.1}), c);
  EXPECT_TRUE(result.history.entries.empty());
  EXPECT_TRUE(std::equal(p.logits().begin(), p.logits().end(), result.params.logits().begin()));
  EXPECT_EQ(result.history.to_csv(),
            "step,mean_reward,mean_accuracy,mean_tokens,mean_kl,objective,w_acc,w_fmt,w_style\n");
}

TEST(Train, DeterministicAndThreadIndependent) {
  const FixtureRun f = load_fixture();
  const PolicyParams p = PolicyParams::make_template(f.bank);
  const RuleJudge judge({}, Tokenizer::whitespace());
  RewardContext ctx;
  ctx.judge = &judge;
  GrpoConfig c;
  c.total_steps = 20;
  c.rng_seed = 77;
  const auto schedule = WeightSchedule::default_staged();
  const auto a = train(f.questions, p, ctx, schedule, c);
  const auto b = train(f.questions, p, ctx, schedule, c);
  c.threads = 3;
  const auto d = train(f.questions, p, ctx, schedule, c);
  EXPECT_EQ(a.history.to_csv(), b.history.to_csv());
  EXPECT_EQ(a.history.to_csv(), d.history.to_csv());
  EXPECT_TRUE(std::equal(a.params.logits().begin(), a.params.logits().end(),
                         d.params.logits().begin()));
  c.threads = 1;
  c.rng_seed = 78;
  EXPECT_NE(train(f.questions, p, ctx, schedule, c).history.to_csv(), a.history.to_csv());
}

TEST(Train, StepCountFromEpochsAndBatches) {
  GrpoConfig c;
  EXPECT_EQ(c.steps_for(20), 15);
  c.rollout_batch_size = 8;
  EXPECT_EQ(c.steps_for(20), 45);
  c.total_steps = 105;
  EXPECT_EQ(c.steps_for(20), 105);
}

TEST(Train, JudgeFailureNamesQuestionAndRollout) {
  const auto bank = small_bank(1);
  const ThrowingJudge judge;
  RewardContext ctx;
  ctx.judge = &judge;
  GrpoConfig c;
  c.total_steps = 1;
  try {
    train({bank->question("q0")}, PolicyParams::make_template(bank), ctx,
          WeightSchedule::make_fixed({0.5, 0.4, 0.1}), c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kJudge);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("q0"), std::string::npos);
    EXPECT_NE(msg.find("rollout 0"), std::string::npos);
  }
}

TEST(Train, RejectsUncoveredQuestionsAndShortDynamicSchedules) {
  const auto bank = small_bank(1);
  const RuleJudge judge({}, Tokenizer::whitespace());
  RewardContext ctx;
  ctx.judge = &judge;
  GrpoConfig c;
  c.total_steps = 10;
  EXPECT_THROW(train({make_question("other", "A")}, PolicyParams::make_template(bank), ctx,
                     WeightSchedule::make_fixed({0.5, 0.4, 0.1}), c),
               Error);
  EXPECT_THROW(train({bank->question("q0")}, PolicyParams::make_template(bank), ctx,
                     WeightSchedule::default_dynamic(5), c),
               Error);
  EXPECT_NO_THROW(train({bank->question("q0")}, PolicyParams::make_template(bank), ctx,
                        WeightSchedule::default_dynamic(9), c));
}

TEST(Train, MonotonePressureTowardCorrectSketch) {
  const FixtureRun f = load_fixture();
  const PolicyParams p = PolicyParams::make_template(f.bank);
  const RuleJudge judge({}, Tokenizer::whitespace());
  RewardContext ctx;
  ctx.judge = &judge;
  GrpoConfig c;
  c.total_steps = 105;
  c.rng_seed = 1;
  const auto result = train(f.questions, p, ctx, WeightSchedule::make_fixed({0.5, 0.4, 0.1}), c);
  const auto before = row_probabilities(p, 1.0);
  const auto after = row_probabilities(result.params, 1.0);
  for (std::size_t q = 0; q < f.questions.size(); ++q) {
    const auto& cands = f.bank->candidates(f.questions[q].id);
    const std::size_t offset = p.row(q).data() - p.logits().data();
    for (std::size_t k = 0; k < cands.size(); ++k) {
      if (cands[k].is_correct && cands[k].is_well_formed &&
          cands[k].style == ThinkingStyle::kSketch) {
        EXPECT_GT(after[offset + k], before[offset + k]) << f.questions[q].id;
      }
    }
  }
}

TEST(Train, TokenLevelPolicyTrains) {
  // Smoke run of the token-level path: rewards flow and params stay finite.
  const Question q = make_question("q", "A");
  PolicyParams p = PolicyParams::make_token_level(
      {"q"}, {"<think>", "</think>", "<answer>", "</answer>", "1.", "2.", "x", "A", "B"}, 10);
  const RuleJudge judge({}, Tokenizer::whitespace());
  RewardContext ctx;
  ctx.judge = &judge;
  GrpoConfig c;
  c.total_steps = 5;
  c.group_size = 8;
  const auto result = train({q}, p, ctx, WeightSchedule::make_fixed({0.5, 0.4, 0.1}), c);
  EXPECT_EQ(result.history.entries.size(), 5u);
  EXPECT_NO_THROW(result.params.check_finite());
}

TEST(Train, MultipleInnerUpdatesActivateClip) {
  const FixtureRun f = load_fixture();
  const PolicyParams p = PolicyParams::make_template(f.bank);
  const RuleJudge judge({}, Tokenizer::whitespace());
  RewardContext ctx;
  ctx.judge = &judge;
  GrpoConfig c;
  c.total_steps = 3;
  c.inner_updates = 4;
  c.learning_rate = 2.0;
  const auto result = train(f.questions, p, ctx, WeightSchedule::make_fixed({0.5, 0.4, 0.1}), c);
  EXPECT_NO_THROW(result.params.check_finite());
  EXPECT_EQ(result.history.entries.size(), 3u);
}

TEST(Config, Validation) {
  GrpoConfig c;
  EXPECT_NO_THROW(c.validate());
  c.group_size = 1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.clip_epsilon = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.temperature = 0.0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_EQ(kRolloutBatchPresetSmall, 128);
  EXPECT_EQ(kRolloutBatchPresetLarge, 512);
}
