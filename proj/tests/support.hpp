#pragma once

// Fixtures shared by the unit and acceptance tests.

#include <cmath>
#include <string>
#include <vector>

#include "doge/doge.hpp"

namespace doge::testing {

// Random distribution over n tokens; every entry is positive.
inline ProbDist random_dist(Rng& rng, std::size_t n) {
  std::vector<double> logits(n);
  for (double& l : logits) l = rng.uniform(-3.0, 3.0);
  return softmax(logits);
}

inline Vector random_vector(Rng& rng, std::size_t d) {
  Vector v(d);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Three-step scripted session: GROUND, DIVERSIFY, GROUND ending in eos.
// Vocabulary 0..5 with eos 5, hidden size 2. The expected values live in the
// tests and come from tests/oracles/scripted_scenario.py.
struct Scenario {
  TraceBackend backend;
  AssembledPrompt prompt;
  DecodeConfig config;
};

inline Scenario scripted_scenario() {
  using Record = TraceBackend::Record;
  const std::vector<TokenId> e0 = {0, 1, 2};
  const std::vector<TokenId> m0 = {0, 4, 2};
  const std::vector<Vector> e0_hiddens = {{1.0, 0.0}, {0.6, 0.8}, {0.2, 1.0}};
  const std::vector<Vector> m0_hiddens = {{1.0, 0.0}, {0.1, 0.9}, {0.4, 0.4}};
  const Vector zeros(6, 0.0);

  auto seq = [](std::vector<TokenId> base, std::initializer_list<TokenId> tail) {
    base.insert(base.end(), tail);
    return base;
  };
  auto extend = [](std::vector<Vector> base, std::initializer_list<Vector> tail) {
    base.insert(base.end(), tail);
    return base;
  };
  auto record = [](std::vector<TokenId> s, Vector logits, std::vector<Vector> hiddens, Vector attn) {
    Record r;
    r.seq = std::move(s);
    r.outputs.logits = std::move(logits);
    r.outputs.hiddens = std::move(hiddens);
    r.outputs.attn_pooled = std::move(attn);
    return r;
  };

  std::vector<Record> records;
  // Step 0.
  records.push_back(record(e0, {0.1, 1.6, 1.5, 0.3, 1.2, -1.0}, e0_hiddens, {0.4, 0.4, 0.2}));
  records.push_back(record(m0, {0.2, 0.1, 0.0, 0.1, 0.2, 0.0}, m0_hiddens, {0.4, 0.4, 0.2}));
  records.push_back(record(seq(e0, {1}), zeros, extend(e0_hiddens, {{0.5, 0.5}}), {0.1, 0.6, 0.2, 0.1}));
  records.push_back(record(seq(e0, {2}), zeros, extend(e0_hiddens, {{0.9, 0.1}}), {0.2, 0.2, 0.3, 0.3}));
  records.push_back(record(seq(e0, {3}), zeros, extend(e0_hiddens, {{-0.2, 1.0}}), {0.4, 0.1, 0.3, 0.2}));
  // Also the step-1 exposed forward.
  records.push_back(record(seq(e0, {4}), {0.3, 1.2, 0.1, 0.0, 0.2, 0.4}, extend(e0_hiddens, {{0.6, 0.8}}),
                           {0.1, 0.8, 0.05, 0.05}));
  // Step 1.
  records.push_back(record(seq(m0, {4}), {0.0, 5.0, 0.0, 0.0, 0.0, 0.0}, extend(m0_hiddens, {{0.3, 0.3}}),
                           {0.25, 0.25, 0.25, 0.25}));
  // Step 2.
  const std::vector<Vector> e2_hiddens = extend(e0_hiddens, {{0.6, 0.8}, {0.3, 0.9}});
  records.push_back(record(seq(e0, {4, 1}), {0.0, 0.5, 0.2, 0.1, 0.3, 2.5}, e2_hiddens, {0.2, 0.2, 0.2, 0.2, 0.2}));
  records.push_back(record(seq(m0, {4, 1}), {0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
                           extend(m0_hiddens, {{0.3, 0.3}, {0.5, 0.1}}), {0.2, 0.2, 0.2, 0.2, 0.2}));
  records.push_back(record(seq(e0, {4, 1, 5}), zeros, extend(e2_hiddens, {{0.8, -0.6}}),
                           {0.1, 0.5, 0.1, 0.1, 0.1, 0.1}));
  records.push_back(record(seq(e0, {4, 1, 1}), zeros, extend(e2_hiddens, {{0.3, 0.9}}),
                           {0.1, 0.1, 0.2, 0.2, 0.2, 0.2}));
  records.push_back(record(seq(e0, {4, 1, 4}), zeros, extend(e2_hiddens, {{0.6, 0.8}}),
                           {0.1, 0.7, 0.1, 0.0, 0.05, 0.05}));
  records.push_back(record(seq(e0, {4, 1, 2}), zeros, extend(e2_hiddens, {{1.0, 0.0}}),
                           {0.3, 0.2, 0.1, 0.1, 0.1, 0.2}));

  AssembledPrompt prompt;
  prompt.exposed_tokens = e0;
  prompt.masked_tokens = m0;
  prompt.knowledge_span = {1, 2};
  prompt.gen_offset_exposed = 3;
  prompt.gen_offset_masked = 3;

  DecodeConfig config;
  config.epsilon_variant = EpsilonVariant::kGrowth;
  config.max_new_tokens = 3;
  return {TraceBackend(records, TokenId{5}), prompt, config};
}

// Synthetic knowledge-grounded dialogues. Knowledge sentences are assembled
// from small word lists so that a byte n-gram prior trained on them can
// reproduce them.
inline std::vector<DialogueSample> synthetic_dialogues(std::size_t n, std::uint64_t seed = 7) {
  static const std::vector<std::string> subjects = {
      "the red fox",     "a river otter", "the old lighthouse", "marie curie",  "the jazz band",
      "the small robot", "a blue whale",  "the mountain town",  "the gardener", "an ancient library"};
  static const std::vector<std::string> verbs = {"lives near", "was built beside", "studied", "plays music at",
                                                 "repairs clocks in", "sings songs about", "guards",
                                                 "collects maps of"};
  static const std::vector<std::string> objects = {
      "the northern coast", "quiet pine forests", "radioactive metals", "a busy harbor",   "frozen lakes",
      "desert canyons",     "the city museum",    "green tea farms",    "volcanic islands", "paper lanterns"};
  static const std::vector<std::string> openers = {"Tell me something about", "What do you know about",
                                                   "Have you heard of", "I am curious about"};
  Rng rng(seed);
  auto pick = [&rng](const std::vector<std::string>& v) {
    return v[static_cast<std::size_t>(rng.uniform() * static_cast<double>(v.size()))];
  };
  std::vector<DialogueSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    DialogueSample s;
    s.id = "syn" + std::to_string(i);
    const std::string subject = pick(subjects);
    s.knowledge = subject + " " + pick(verbs) + " " + pick(objects) + ".";
    s.history = {{"user", "I have been reading a lot lately."}, {"assistant", "That sounds lovely."}};
    s.user_utterance = pick(openers) + " " + subject + "?";
    s.reference = "I know that " + s.knowledge;
    out.push_back(std::move(s));
  }
  return out;
}

inline ToyTransformerSpec toy_spec_for(const std::vector<DialogueSample>& samples, double prior_weight = 1.0,
                                       double copy_weight = 2.0) {
  ToyTransformerSpec spec;
  for (const DialogueSample& s : samples) spec.prior.corpus.push_back(s.knowledge);
  spec.prior.weight = prior_weight;
  spec.prior.copy_weight = copy_weight;
  return spec;
}

}  // namespace doge::testing
