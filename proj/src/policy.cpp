#include "sketch_rl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sketch_rl/error.hpp"
#include "sketch_rl/kernels.hpp"

namespace sketch_rl {
namespace {

void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    fail(ErrorCategory::kInvalidArgument, "temperature must be positive and finite");
  }
}

int draw(std::span<const double> probs, std::mt19937_64& rng) {
  const double u = std::generate_canonical<double, 53>(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  // u landed in the rounding slack above the last partial sum.
  for (std::size_t k = probs.size(); k-- > 0;) {
    if (probs[k] > 0.0) return static_cast<int>(k);
  }
  return 0;
}

int argmax(std::span<const double> row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

// Log-softmax entry k of a row without materializing the distribution.
double log_softmax_at(std::span<const double> row, int k, double temperature) {
  return row[k] / temperature - kernels::log_sum_exp(row, temperature);
}

// grad_row += weight * (onehot(k) - softmax(row / T)) / T
void add_softmax_gradient(std::span<const double> row, int k, double temperature,
                          double weight, std::span<double> grad_row) {
  std::vector<double> probs(row.size());
  kernels::softmax(row, temperature, probs);
  kernels::axpy(-weight / temperature, probs, grad_row);
  grad_row[k] += weight / temperature;
}

}  // namespace

Candidate BankAnnotator::annotate(const Question& question, std::string raw) const {
  Candidate c;
  c.trace = parse_response(raw, format);
  c.raw = std::move(raw);
  c.is_well_formed = c.trace.well_formed;
  c.is_correct = accuracy_reward(c.trace, question, normalizer) == 1.0;
  c.style = rule_judge(c.trace.thinking, judge_config, tokenizer).score == 1.0
                ? ThinkingStyle::kSketch
                : ThinkingStyle::kNormal;
  c.token_count = tokenizer.count(c.trace.thinking);
  return c;
}

CandidateBank CandidateBank::build(
    const std::vector<Question>& questions,
    const std::unordered_map<std::string, std::vector<std::string>>& raw_by_question,
    const BankAnnotator& annotator) {
  CandidateBank bank;
  for (const Question& q : questions) {
    auto it = raw_by_question.find(q.id);
    if (it == raw_by_question.end()) {
      fail(ErrorCategory::kUnknownQuestion, "no bank entry for question '" + q.id + "'");
    }
    if (it->second.size() < 2) {
      fail(ErrorCategory::kInvalidArgument,
           "question '" + q.id + "' needs at least 2 candidates");
    }
    std::vector<Candidate> cands;
    for (const std::string& raw : it->second) {
      if (std::any_of(cands.begin(), cands.end(),
                      [&](const Candidate& c) { return c.raw == raw; })) {
        fail(ErrorCategory::kInvalidArgument,
             "duplicate candidate for question '" + q.id + "'");
      }
      cands.push_back(annotator.annotate(q, raw));
    }
    bank.index_.emplace(q.id, bank.ids_.size());
    bank.ids_.push_back(q.id);
    bank.questions_.push_back(q);
    bank.entries_.push_back(std::move(cands));
  }
  return bank;
}

CandidateBank CandidateBank::load(const std::filesystem::path& path,
                                  const std::vector<Question>& questions,
                                  const BankAnnotator& annotator) {
  std::unordered_map<std::string, std::vector<std::string>> raw;
  std::unordered_map<std::string, bool> known;
  for (const Question& q : questions) known.emplace(q.id, true);
  for (const Json& row : read_jsonl(path)) {
    std::string id = require_string(row, "question_id");
    if (!known.contains(id)) {
      fail(ErrorCategory::kUnknownQuestion,
           "bank entry for unknown question '" + id + "'");
    }
    raw[id].push_back(require_string(row, "response_raw"));
  }
  return build(questions, raw, annotator);
}

bool CandidateBank::contains(std::string_view question_id) const {
  return index_.contains(std::string(question_id));
}

std::size_t CandidateBank::index_of(std::string_view question_id) const {
  auto it = index_.find(std::string(question_id));
  if (it == index_.end()) {
    fail(ErrorCategory::kUnknownQuestion,
         "question '" + std::string(question_id) + "' is not in the candidate bank");
  }
  return it->second;
}

const std::vector<Candidate>& CandidateBank::candidates(std::string_view question_id) const {
  return entries_[index_of(question_id)];
}

const Question& CandidateBank::question(std::string_view question_id) const {
  return questions_[index_of(question_id)];
}

std::optional<std::size_t> CandidateBank::find(std::string_view question_id,
                                               std::string_view raw) const {
  const auto& cands = candidates(question_id);
  for (std::size_t k = 0; k < cands.size(); ++k) {
    if (cands[k].raw == raw) return k;
  }
  return std::nullopt;
}

void CandidateBank::check_composition() const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    bool sketch_correct = false, normal_correct = false, incorrect = false,
         malformed = false;
    for (const Candidate& c : entries_[i]) {
      if (!c.is_well_formed) {
        malformed = true;
      } else if (!c.is_correct) {
        incorrect = true;
      } else if (c.style == ThinkingStyle::kSketch) {
        sketch_correct = true;
      } else {
        normal_correct = true;
      }
    }
    if (!(sketch_correct && normal_correct && incorrect && malformed)) {
      fail(ErrorCategory::kInvalidArgument,
           "bank for question '" + ids_[i] +
               "' must contain correct-sketch, correct-normal, incorrect and "
               "malformed candidates");
    }
  }
}

std::string_view to_string(PolicyKind kind) {
  return kind == PolicyKind::kTemplate ? "template" : "token_level";
}

PolicyParams PolicyParams::make_template(std::shared_ptr<const CandidateBank> bank) {
  if (!bank) fail(ErrorCategory::kInvalidArgument, "template policy needs a bank");
  PolicyParams p;
  p.kind_ = PolicyKind::kTemplate;
  p.question_ids_ = bank->question_ids();
  for (const std::string& id : p.question_ids_) {
    p.row_offsets_.push_back(p.row_offsets_.back() + bank->candidates(id).size());
  }
  p.logits_.assign(p.row_offsets_.back(), 0.0);
  p.bank_ = std::move(bank);
  p.index_questions();
  return p;
}

PolicyParams PolicyParams::make_token_level(std::vector<std::string> question_ids,
                                            std::vector<std::string> vocabulary,
                                            int max_length) {
  if (vocabulary.empty()) fail(ErrorCategory::kInvalidArgument, "empty vocabulary");
  if (max_length < 1) fail(ErrorCategory::kInvalidArgument, "max_length must be >= 1");
  PolicyParams p;
  p.kind_ = PolicyKind::kTokenLevel;
  p.question_ids_ = std::move(question_ids);
  p.vocab_ = std::move(vocabulary);
  p.max_length_ = max_length;
  for (std::size_t i = 0; i < p.vocab_.size(); ++i) {
    if (!p.vocab_index_.emplace(p.vocab_[i], static_cast<int>(i)).second) {
      fail(ErrorCategory::kInvalidArgument, "duplicate vocabulary token '" + p.vocab_[i] + "'");
    }
  }
  const std::size_t width = p.vocab_.size() + 1;
  const std::size_t rows = p.question_ids_.size() * width;
  for (std::size_t r = 0; r < rows; ++r) p.row_offsets_.push_back(p.row_offsets_.back() + width);
  p.logits_.assign(rows * width, 0.0);
  p.index_questions();
  return p;
}

void PolicyParams::index_questions() {
  question_index_.clear();
  for (std::size_t i = 0; i < question_ids_.size(); ++i) {
    if (!question_index_.emplace(question_ids_[i], i).second) {
      fail(ErrorCategory::kInvalidArgument, "duplicate question id '" + question_ids_[i] + "'");
    }
  }
}

std::span<double> PolicyParams::row(std::size_t r) {
  return std::span<double>(logits_).subspan(row_offsets_[r],
                                            row_offsets_[r + 1] - row_offsets_[r]);
}

std::span<const double> PolicyParams::row(std::size_t r) const {
  return std::span<const double>(logits_).subspan(row_offsets_[r],
                                                  row_offsets_[r + 1] - row_offsets_[r]);
}

std::size_t PolicyParams::question_index(std::string_view question_id) const {
  auto it = question_index_.find(std::string(question_id));
  if (it == question_index_.end()) {
    fail(ErrorCategory::kUnknownQuestion,
         "unknown question id '" + std::string(question_id) + "'");
  }
  return it->second;
}

bool PolicyParams::has_question(std::string_view question_id) const {
  return question_index_.contains(std::string(question_id));
}

const CandidateBank& PolicyParams::bank() const {
  if (!bank_) fail(ErrorCategory::kInvalidArgument, "policy has no candidate bank");
  return *bank_;
}

std::optional<int> PolicyParams::token_id(std::string_view token) const {
  auto it = vocab_index_.find(std::string(token));
  if (it == vocab_index_.end()) return std::nullopt;
  return it->second;
}

std::size_t PolicyParams::token_row(std::size_t question, int prev_token) const {
  return question * (vocab_.size() + 1) + static_cast<std::size_t>(prev_token + 1);
}

ResponseKey PolicyParams::resolve(std::string_view question_id,
                                  std::string_view response) const {
  const std::size_t q = question_index(question_id);
  auto outside = [&](const std::string& why) -> ResponseKey {
    fail(ErrorCategory::kOutsideSupport, "response '" + std::string(response) +
                                             "' is outside the support: " + why);
  };
  if (kind_ == PolicyKind::kTemplate) {
    std::optional<std::size_t> k = bank_->find(question_ids_[q], response);
    if (!k) return outside("not a bank candidate");
    return {{static_cast<int>(*k)}};
  }
  ResponseKey key;
  for (std::string_view tok : split_whitespace(response)) {
    std::optional<int> id = token_id(tok);
    if (!id) return outside("token '" + std::string(tok) + "' not in vocabulary");
    key.ids.push_back(*id);
  }
  if (static_cast<int>(key.ids.size()) > max_length_) return outside("longer than max_length");
  return key;
}

std::string PolicyParams::render(const ResponseKey& key, std::size_t question) const {
  if (kind_ == PolicyKind::kTemplate) {
    return bank_->candidates(question_ids_[question])[key.ids.at(0)].raw;
  }
  std::vector<std::string> tokens;
  tokens.reserve(key.ids.size());
  for (int id : key.ids) tokens.push_back(vocab_.at(id));
  return detokenize(tokens);
}

void PolicyParams::check_finite() const {
  for (double v : logits_) {
    if (!std::isfinite(v)) fail(ErrorCategory::kInvalidArgument, "non-finite logit");
  }
}

nlohmann::json PolicyParams::to_json() const {
  Json j;
  j["kind"] = std::string(to_string(kind_));
  Json questions = Json::array();
  if (kind_ == PolicyKind::kTemplate) {
    for (std::size_t q = 0; q < question_ids_.size(); ++q) {
      Json cands = Json::array();
      for (const Candidate& c : bank_->candidates(question_ids_[q])) cands.push_back(c.raw);
      std::span<const double> r = row(q);
      questions.push_back({{"id", question_ids_[q]},
                           {"candidates", cands},
                           {"logits", std::vector<double>(r.begin(), r.end())}});
    }
  } else {
    j["vocabulary"] = vocab_;
    j["max_length"] = max_length_;
    const std::size_t block = (vocab_.size() + 1) * (vocab_.size() + 1);
    for (std::size_t q = 0; q < question_ids_.size(); ++q) {
      auto first = logits_.begin() + static_cast<std::ptrdiff_t>(q * block);
      questions.push_back({{"id", question_ids_[q]},
                           {"logits", std::vector<double>(first, first + block)}});
    }
  }
  j["questions"] = std::move(questions);
  return j;
}

PolicyParams PolicyParams::from_json(const nlohmann::json& j,
                                     std::shared_ptr<const CandidateBank> bank) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "template") {
      PolicyParams p = make_template(std::move(bank));
      const Json& qs = j.at("questions");
      if (qs.size() != p.question_ids_.size()) {
        fail(ErrorCategory::kIo, "policy file and bank cover different questions");
      }
      for (const Json& qj : qs) {
        const std::size_t q = p.question_index(qj.at("id").get<std::string>());
        const auto cands = qj.at("candidates").get<std::vector<std::string>>();
        const auto& bank_cands = p.bank_->candidates(p.question_ids_[q]);
        if (cands.size() != bank_cands.size()) {
          fail(ErrorCategory::kIo, "candidate count mismatch for '" + p.question_ids_[q] + "'");
        }
        for (std::size_t k = 0; k < cands.size(); ++k) {
          if (cands[k] != bank_cands[k].raw) {
            fail(ErrorCategory::kIo, "candidate text mismatch for '" + p.question_ids_[q] + "'");
          }
        }
        const auto values = qj.at("logits").get<std::vector<double>>();
        std::span<double> r = p.row(q);
        if (values.size() != r.size()) fail(ErrorCategory::kIo, "logit row size mismatch");
        std::copy(values.begin(), values.end(), r.begin());
      }
      p.check_finite();
      return p;
    }
    if (kind == "token_level") {
      std::vector<std::string> ids;
      for (const Json& qj : j.at("questions")) ids.push_back(qj.at("id").get<std::string>());
      PolicyParams p = make_token_level(ids, j.at("vocabulary").get<std::vector<std::string>>(),
                                        j.at("max_length").get<int>());
      const std::size_t block = (p.vocab_.size() + 1) * (p.vocab_.size() + 1);
      std::size_t q = 0;
      for (const Json& qj : j.at("questions")) {
        const auto values = qj.at("logits").get<std::vector<double>>();
        if (values.size() != block) fail(ErrorCategory::kIo, "logit block size mismatch");
        std::copy(values.begin(), values.end(),
                  p.logits_.begin() + static_cast<std::ptrdiff_t>(q * block));
        ++q;
      }
      p.check_finite();
      return p;
    }
    fail(ErrorCategory::kIo, "unknown policy kind '" + kind + "'");
  } catch (const Json::exception& e) {
    fail(ErrorCategory::kIo, std::string("malformed policy file: ") + e.what());
  }
}

void PolicyParams::save(const std::filesystem::path& path) const {
  write_json(path, to_json());
}

PolicyParams PolicyParams::load(const std::filesystem::path& path,
                                std::shared_ptr<const CandidateBank> bank) {
  return from_json(read_json(path), std::move(bank));
}

std::vector<double> step_logprobs(const PolicyParams& params, std::size_t question,
                                  const ResponseKey& key, double temperature) {
  check_temperature(temperature);
  std::vector<double> steps;
  if (params.kind() == PolicyKind::kTemplate) {
    steps.push_back(log_softmax_at(params.row(params.template_row(question)),
                                   key.ids.at(0), temperature));
    return steps;
  }
  int prev = -1;
  for (int id : key.ids) {
    steps.push_back(log_softmax_at(params.row(params.token_row(question, prev)), id,
                                   temperature));
    prev = id;
  }
  if (static_cast<int>(key.ids.size()) < params.max_length()) {
    steps.push_back(log_softmax_at(params.row(params.token_row(question, prev)),
                                   params.end_id(), temperature));
  }
  return steps;
}

double logprob(const PolicyParams& params, std::size_t question, const ResponseKey& key,
               double temperature) {
  double total = 0.0;
  for (double s : step_logprobs(params, question, key, temperature)) total += s;
  return total;
}

double logprob(const PolicyParams& params, std::string_view question_id,
               std::string_view response, double temperature) {
  return logprob(params, params.question_index(question_id),
                 params.resolve(question_id, response), temperature);
}

void accumulate_logprob_gradient(const PolicyParams& params, std::size_t question,
                                 const ResponseKey& key, double temperature,
                                 double weight, std::span<double> grad) {
  check_temperature(temperature);
  auto grad_row = [&](std::size_t r) {
    const std::span<const double> row = params.row(r);
    const std::size_t offset = static_cast<std::size_t>(row.data() - params.logits().data());
    return grad.subspan(offset, row.size());
  };
  if (params.kind() == PolicyKind::kTemplate) {
    const std::size_t r = params.template_row(question);
    add_softmax_gradient(params.row(r), key.ids.at(0), temperature, weight, grad_row(r));
    return;
  }
  int prev = -1;
  for (int id : key.ids) {
    const std::size_t r = params.token_row(question, prev);
    add_softmax_gradient(params.row(r), id, temperature, weight, grad_row(r));
    prev = id;
  }
  if (static_cast<int>(key.ids.size()) < params.max_length()) {
    const std::size_t r = params.token_row(question, prev);
    add_softmax_gradient(params.row(r), params.end_id(), temperature, weight, grad_row(r));
  }
}

Gradient logprob_gradient(const PolicyParams& params, std::string_view question_id,
                          std::string_view response, double temperature) {
  Gradient grad(params.logits().size(), 0.0);
  accumulate_logprob_gradient(params, params.question_index(question_id),
                              params.resolve(question_id, response), temperature, 1.0,
                              grad);
  return grad;
}

std::vector<double> row_probabilities(const PolicyParams& params, double temperature) {
  check_temperature(temperature);
  std::vector<double> probs(params.logits().size());
  std::span<double> out(probs);
  for (std::size_t r = 0; r < params.row_count(); ++r) {
    std::span<const double> row = params.row(r);
    const std::size_t offset = static_cast<std::size_t>(row.data() - params.logits().data());
    kernels::softmax(row, temperature, out.subspan(offset, row.size()));
  }
  return probs;
}

std::vector<Rollout> sample(const PolicyParams& params, const Question& question,
                            double temperature, int n, std::uint64_t rng_seed,
                            const FormatSpec& format) {
  check_temperature(temperature);
  if (n < 1) fail(ErrorCategory::kInvalidArgument, "sample count must be >= 1");
  if (params.kind() == PolicyKind::kTemplate && !params.bank().contains(question.id)) {
    fail(ErrorCategory::kUnknownQuestion,
         "question '" + question.id + "' is not in the candidate bank");
  }
  const std::size_t q = params.question_index(question.id);
  std::mt19937_64 rng(rng_seed);
  std::vector<Rollout> out;
  out.reserve(static_cast<std::size_t>(n));
  std::vector<double> probs;
  for (int i = 0; i < n; ++i) {
    Rollout r;
    if (params.kind() == PolicyKind::kTemplate) {
      std::span<const double> row = params.row(params.template_row(q));
      probs.resize(row.size());
      kernels::softmax(row, temperature, probs);
      const int k = draw(probs, rng);
      r.key.ids.push_back(k);
      r.steps_old.push_back(log_softmax_at(row, k, temperature));
    } else {
      int prev = -1;
      while (static_cast<int>(r.key.ids.size()) < params.max_length()) {
        std::span<const double> row = params.row(params.token_row(q, prev));
        probs.resize(row.size());
        kernels::softmax(row, temperature, probs);
        const int next = draw(probs, rng);
        r.steps_old.push_back(log_softmax_at(row, next, temperature));
        if (next == params.end_id()) break;
        r.key.ids.push_back(next);
        prev = next;
      }
    }
    for (double s : r.steps_old) r.logprob_old += s;
    r.response_raw = params.render(r.key, q);
    r.trace = parse_response(r.response_raw, format);
    out.push_back(std::move(r));
  }
  return out;
}

ResponseKey greedy(const PolicyParams& params, std::size_t question) {
  ResponseKey key;
  if (params.kind() == PolicyKind::kTemplate) {
    key.ids.push_back(argmax(params.row(params.template_row(question))));
    return key;
  }
  int prev = -1;
  while (static_cast<int>(key.ids.size()) < params.max_length()) {
    const int next = argmax(params.row(params.token_row(question, prev)));
    if (next == params.end_id()) break;
    key.ids.push_back(next);
    prev = next;
  }
  return key;
}

}  // namespace sketch_rl
