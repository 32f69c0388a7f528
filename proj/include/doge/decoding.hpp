#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "doge/backend.hpp"
#include "doge/confidence.hpp"
#include "doge/config.hpp"
#include "doge/data.hpp"
#include "doge/kad.hpp"
#include "doge/rng.hpp"
#include "doge/sampling.hpp"
#include "doge/tokenizer.hpp"

namespace doge {

/// Per-token audit record of a DoGe step.
struct StepDecision {
  std::size_t t = 0;
  ConfidenceScore f_c;  // knowledge masked
  ConfidenceScore f_k;  // knowledge exposed
  Branch branch = Branch::kDiversify;
  TokenId chosen_token = 0;
  std::optional<std::vector<CandidateScore>> candidate_table;  // GROUND only
  std::optional<std::size_t> nucleus_size;                     // DIVERSIFY only
};

struct DecodeResult {
  std::vector<TokenId> tokens;  // includes the terminating eos, if one was produced
  std::vector<StepDecision> trace;
};

enum class PromptStream { kExposed, kMasked };

namespace detail {

inline bool is_eos(const Backend& backend, TokenId token) {
  const std::optional<TokenId> eos = backend.eos_id();
  return eos && *eos == token;
}

inline std::vector<Vector> knowledge_hiddens_of(const StepOutputs& out, TokenSpan span) {
  if (span.empty() || span.end > out.hiddens.size()) throw InvalidInputError("knowledge span outside the prompt");
  return {out.hiddens.begin() + static_cast<std::ptrdiff_t>(span.begin),
          out.hiddens.begin() + static_cast<std::ptrdiff_t>(span.end)};
}

inline TokenId argmax_logit(const Vector& logits) {
  return static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

inline Vector log_softmax(const Vector& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - m);
  const double log_z = m + std::log(total);
  Vector out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
  return out;
}

}  // namespace detail

/// Dynamic switching between nucleus sampling on the knowledge-masked stream
/// and knowledge-attentive re-ranking on the knowledge-exposed stream.
///
/// Each step runs both streams, scores each next-token distribution for
/// factual confidence, and lets the indicator pick the branch. The chosen
/// token is appended to both streams. Stops after eos or max_new_tokens.
inline DecodeResult doge_decode(const AssembledPrompt& prompt, const Backend& backend, const DecodeConfig& config,
                                Rng& rng) {
  config.validate();
  DecodeResult result;
  DualStream stream = DualStream::from_prompt(prompt);
  for (std::size_t t = 0; t < config.max_new_tokens; ++t) {
    const StepOutputs exposed = backend.forward(stream.exposed);
    if (t == 0) {
      // Causal attention keeps these fixed for the whole session.
      stream.knowledge_hiddens = detail::knowledge_hiddens_of(exposed, prompt.knowledge_span);
    } else {
      stream.generated_hiddens.push_back(exposed.hiddens.back());
    }
    const StepOutputs masked = backend.forward(stream.masked);
    const ProbDist p_k = softmax(exposed.logits);
    const ProbDist p_c = softmax(masked.logits);

    StepDecision step;
    step.t = t;
    step.f_c = factual_confidence(p_c, config.eta, config.gamma, config.confidence_variant);
    step.f_k = factual_confidence(p_k, config.eta, config.gamma, config.confidence_variant);
    step.branch = config.force_ground ? Branch::kGround : branch_indicator(step.f_c, step.f_k);
    if (step.branch == Branch::kDiversify) {
      const Nucleus nucleus = nucleus_truncate(p_c, config.top_p);
      step.chosen_token = sample_token(nucleus.dist, rng);
      step.nucleus_size = nucleus.kept;
    } else {
      KadChoice choice = kad_select(p_k, backend, config, stream, prompt.knowledge_span, t);
      step.chosen_token = choice.token;
      step.candidate_table = std::move(choice.table);
    }
    stream.append_token(step.chosen_token);
    result.tokens.push_back(step.chosen_token);
    result.trace.push_back(std::move(step));
    if (detail::is_eos(backend, result.tokens.back())) break;
  }
  return result;
}

inline DecodeResult greedy_decode(std::span<const TokenId> prefix, const Backend& backend,
                                  const DecodeConfig& config) {
  config.validate();
  DecodeResult result;
  std::vector<TokenId> seq(prefix.begin(), prefix.end());
  for (std::size_t t = 0; t < config.max_new_tokens; ++t) {
    const TokenId token = detail::argmax_logit(backend.forward(seq).logits);
    seq.push_back(token);
    result.tokens.push_back(token);
    if (detail::is_eos(backend, token)) break;
  }
  return result;
}

/// Nucleus sampling with top-p probability mass per step, where top_p_at(t, ts)
/// gives the mass at step t and in-sentence index ts (1-based).
template <typename TopP>
DecodeResult sampling_decode(std::span<const TokenId> prefix, const Backend& backend, const DecodeConfig& config,
                             Rng& rng, TopP top_p_at) {
  DecodeResult result;
  std::vector<TokenId> seq(prefix.begin(), prefix.end());
  std::size_t in_sentence = 1;
  for (std::size_t t = 0; t < config.max_new_tokens; ++t) {
    const ProbDist p = softmax(backend.forward(seq).logits, config.temperature);
    const TokenId token = sample_token(nucleus_truncate(p, top_p_at(t, in_sentence)).dist, rng);
    seq.push_back(token);
    result.tokens.push_back(token);
    if (detail::is_eos(backend, token)) break;
    in_sentence = ByteTokenizer::is_sentence_end(token) ? 1 : in_sentence + 1;
  }
  return result;
}

inline DecodeResult nucleus_decode(std::span<const TokenId> prefix, const Backend& backend,
                                   const DecodeConfig& config, Rng& rng) {
  config.validate();
  return sampling_decode(prefix, backend, config, rng, [&](std::size_t, std::size_t) { return config.top_p; });
}

/// Per-sentence decaying top-p: max(fn_omega, top_p * fn_lambda^(ts - 1)),
/// with ts reset after '.', '!' or '?'.
inline double f_nucleus_top_p(const DecodeConfig& config, std::size_t in_sentence) {
  return std::max(config.fn_omega, config.top_p * std::pow(config.fn_lambda, static_cast<double>(in_sentence) - 1.0));
}

inline DecodeResult f_nucleus_decode(std::span<const TokenId> prefix, const Backend& backend,
                                     const DecodeConfig& config, Rng& rng) {
  config.validate();
  return sampling_decode(prefix, backend, config, rng,
                         [&](std::size_t, std::size_t ts) { return f_nucleus_top_p(config, ts); });
}

/// Beam search over summed log-probabilities. Finished and surviving
/// hypotheses are compared by log-probability per generated token.
inline DecodeResult beam_decode(std::span<const TokenId> prefix, const Backend& backend,
                                const DecodeConfig& config) {
  config.validate();
  struct Hypothesis {
    std::vector<TokenId> tokens;
    double log_prob = 0.0;
  };
  struct Expansion {
    std::size_t parent;
    TokenId token;
    double log_prob;
  };
  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;
  std::vector<TokenId> seq;
  for (std::size_t t = 0; t < config.max_new_tokens && !live.empty(); ++t) {
    std::vector<Expansion> expansions;
    for (std::size_t h = 0; h < live.size(); ++h) {
      seq.assign(prefix.begin(), prefix.end());
      seq.insert(seq.end(), live[h].tokens.begin(), live[h].tokens.end());
      const Vector lp = detail::log_softmax(backend.forward(seq).logits);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        expansions.push_back({h, static_cast<TokenId>(v), live[h].log_prob + lp[v]});
      }
    }
    const std::size_t keep = std::min(config.beam_size, expansions.size());
    std::partial_sort(expansions.begin(), expansions.begin() + static_cast<std::ptrdiff_t>(keep), expansions.end(),
                      [](const Expansion& a, const Expansion& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      Hypothesis h{live[expansions[i].parent].tokens, expansions[i].log_prob};
      h.tokens.push_back(expansions[i].token);
      (detail::is_eos(backend, expansions[i].token) ? finished : next).push_back(std::move(h));
    }
    live = std::move(next);
  }
  finished.insert(finished.end(), live.begin(), live.end());
  const Hypothesis* best = nullptr;
  double best_score = 0.0;
  for (const Hypothesis& h : finished) {
    const double score = h.log_prob / static_cast<double>(h.tokens.size());
    if (!best || score > best_score) {
      best = &h;
      best_score = score;
    }
  }
  return DecodeResult{best ? best->tokens : std::vector<TokenId>{}, {}};
}

namespace detail {

// Shared loop of contrastive search and its faithfulness-enhanced variant;
// the latter passes a knowledge span.
inline DecodeResult contrastive_loop(std::span<const TokenId> prefix, std::optional<TokenSpan> knowledge_span,
                                     const Backend& backend, const DecodeConfig& config, double alpha,
                                     double beta, std::vector<std::vector<CandidateScore>>* tables) {
  DecodeResult result;
  std::vector<TokenId> seq(prefix.begin(), prefix.end());
  std::vector<Vector> generated_hiddens;
  std::vector<Vector> knowledge_hiddens;
  for (std::size_t t = 0; t < config.max_new_tokens; ++t) {
    const StepOutputs out = backend.forward(seq);
    if (t == 0) {
      if (knowledge_span) knowledge_hiddens = knowledge_hiddens_of(out, *knowledge_span);
    } else {
      generated_hiddens.push_back(out.hiddens.back());
    }
    const ProbDist p = softmax(out.logits);
    const std::vector<TokenId> candidates = p.top_k(config.K);
    std::vector<CandidateScore> table;
    for (const CandidateEval& ev : backend.eval_candidates(seq, candidates)) {
      CandidateScore c;
      c.token = ev.token;
      c.p_k = p.at(ev.token);
      c.s_d = degeneration_score(ev, generated_hiddens);
      if (knowledge_span) {
        double faith = cosine_similarity(ev.hidden, knowledge_hiddens.front());
        for (const Vector& kh : knowledge_hiddens) faith = std::max(faith, cosine_similarity(ev.hidden, kh));
        c.s_k = faith;
      }
      c.score = (1.0 - alpha - beta) * c.p_k - alpha * c.s_d + beta * c.s_k;
      table.push_back(c);
    }
    const TokenId token = argmax_lowest_id(table);
    if (tables) tables->push_back(table);
    seq.push_back(token);
    result.tokens.push_back(token);
    if (is_eos(backend, token)) break;
  }
  return result;
}

}  // namespace detail

/// Contrastive search: (1 - alpha) p(v) - alpha * degeneration_score(v).
/// `tables`, when given, receives each step's scored candidates.
inline DecodeResult cs_decode(std::span<const TokenId> prefix, const Backend& backend, const DecodeConfig& config,
                              std::vector<std::vector<CandidateScore>>* tables = nullptr) {
  config.validate();
  return detail::contrastive_loop(prefix, std::nullopt, backend, config, config.alpha, 0.0, tables);
}

/// Contrastive search plus beta times the best cosine between the candidate
/// and any knowledge-token hidden state.
inline DecodeResult fecs_decode(std::span<const TokenId> prefix, TokenSpan knowledge_span, const Backend& backend,
                                const DecodeConfig& config) {
  config.validate();
  return detail::contrastive_loop(prefix, knowledge_span, backend, config, config.alpha, config.beta, nullptr);
}

/// Runs config.strategy. Baselines read the exposed prompt unless `stream`
/// selects the masked one.
inline DecodeResult decode(const AssembledPrompt& prompt, const Backend& backend, const DecodeConfig& config,
                           Rng& rng, PromptStream stream = PromptStream::kExposed) {
  const std::vector<TokenId>& prefix = stream == PromptStream::kExposed ? prompt.exposed_tokens : prompt.masked_tokens;
  switch (config.strategy) {
    case Strategy::kDoge:
      return doge_decode(prompt, backend, config, rng);
    case Strategy::kGreedy:
      return greedy_decode(prefix, backend, config);
    case Strategy::kBeam:
      return beam_decode(prefix, backend, config);
    case Strategy::kNucleus:
      return nucleus_decode(prefix, backend, config, rng);
    case Strategy::kFNucleus:
      return f_nucleus_decode(prefix, backend, config, rng);
    case Strategy::kCs:
      return cs_decode(prefix, backend, config);
    case Strategy::kFecs:
      if (stream == PromptStream::kMasked) throw ConfigError("fecs needs the knowledge-exposed prompt");
      return fecs_decode(prefix, prompt.knowledge_span, backend, config);
  }
  throw ConfigError("unknown strategy");
}

}  // namespace doge
