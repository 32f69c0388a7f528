#pragma once

// Knowledge-attentive re-ranking of the top-K tokens of the knowledge-exposed
// distribution:
//   score(v) = (1 - alpha - beta) * p_k(v) - alpha * s_d(v) + beta * s_k(v)
// s_d penalizes similarity to already generated tokens, s_k rewards attention
// to the knowledge span and semantic closeness of the response to it.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "doge/backend.hpp"
#include "doge/config.hpp"
#include "doge/data.hpp"
#include "doge/prob_dist.hpp"

namespace doge {

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInputError("cosine of vectors with different sizes");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine similarity of a zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline Vector mean_pool(std::span<const Vector> vectors) {
  if (vectors.empty()) throw InvalidInputError("mean pool of no vectors");
  Vector out(vectors.front().size(), 0.0);
  for (const Vector& v : vectors) {
    if (v.size() != out.size()) throw InvalidInputError("mean pool of vectors with different sizes");
    for (std::size_t i = 0; i < v.size(); ++i) out[i] += v[i];
  }
  for (double& x : out) x /= static_cast<double>(vectors.size());
  return out;
}

/// Weight of the sentence-level reward at step t of an N-token budget.
inline double epsilon_schedule(std::size_t t, std::size_t n, double lambda, double omega, EpsilonVariant variant) {
  if (n == 0) throw InvalidInputError("generation budget must be positive");
  const double td = static_cast<double>(t);
  const double nd = static_cast<double>(n);
  if (variant == EpsilonVariant::kLiteralClamped) {
    const double e = std::max(omega, std::pow(lambda, td / nd - 1.0));
    return std::clamp(e, 0.0, 1.0);
  }
  return std::max(omega, std::pow(lambda, nd / std::max(td, 1.0) - 1.0));
}

/// Max cosine similarity between the candidate and any generated token; 0
/// before anything has been generated.
inline double degeneration_score(const CandidateEval& candidate, std::span<const Vector> generated_hiddens) {
  double best = 0.0;
  bool first = true;
  for (const Vector& h : generated_hiddens) {
    const double s = cosine_similarity(candidate.hidden, h);
    if (first || s > best) best = s;
    first = false;
  }
  return best;
}

inline double knowledge_attentive_score(const CandidateEval& candidate, std::span<const Vector> generated_hiddens,
                                        std::span<const Vector> knowledge_hiddens, TokenSpan knowledge_span,
                                        double epsilon) {
  if (knowledge_span.empty()) throw InvalidInputError("empty knowledge span");
  if (candidate.attn_pooled.size() < knowledge_span.end) {
    throw InvalidInputError("candidate attention does not cover the knowledge span");
  }
  std::vector<Vector> response(generated_hiddens.begin(), generated_hiddens.end());
  response.push_back(candidate.hidden);
  const double sentence = cosine_similarity(mean_pool(response), mean_pool(knowledge_hiddens));
  double token = candidate.attn_pooled[knowledge_span.begin];
  for (std::size_t j = knowledge_span.begin + 1; j < knowledge_span.end; ++j) {
    token = std::max(token, candidate.attn_pooled[j]);
  }
  return epsilon * sentence + (1.0 - epsilon) * token;
}

struct CandidateScore {
  TokenId token = 0;
  double p_k = 0.0;
  double s_d = 0.0;
  double s_k = 0.0;
  double score = 0.0;

  bool operator==(const CandidateScore&) const = default;
};

struct KadChoice {
  TokenId token = 0;
  std::vector<CandidateScore> table;  // in candidate (top-K) order
};

// Highest score; the lower token id wins ties.
inline TokenId argmax_lowest_id(const std::vector<CandidateScore>& table) {
  const CandidateScore* best = &table.front();
  for (const CandidateScore& c : table) {
    if (c.score > best->score || (c.score == best->score && c.token < best->token)) best = &c;
  }
  return best->token;
}

/// Re-ranks the top-K tokens of p_k on the exposed stream at step t.
inline KadChoice kad_select(const ProbDist& p_k, const Backend& backend, const DecodeConfig& config,
                            const DualStream& stream, TokenSpan knowledge_span, std::size_t t) {
  if (config.K > p_k.size()) throw ConfigError("K exceeds the vocabulary size");
  const std::vector<TokenId> candidates = p_k.top_k(config.K);
  const std::vector<CandidateEval> evals = backend.eval_candidates(stream.exposed, candidates);
  const double epsilon =
      epsilon_schedule(t, config.max_new_tokens, config.lambda, config.omega, config.epsilon_variant);
  KadChoice choice;
  choice.table.reserve(evals.size());
  for (const CandidateEval& ev : evals) {
    CandidateScore c;
    c.token = ev.token;
    c.p_k = p_k.at(ev.token);
    c.s_d = degeneration_score(ev, stream.generated_hiddens);
    c.s_k = knowledge_attentive_score(ev, stream.generated_hiddens, stream.knowledge_hiddens, knowledge_span,
                                      epsilon);
    c.score = (1.0 - config.alpha - config.beta) * c.p_k - config.alpha * c.s_d + config.beta * c.s_k;
    choice.table.push_back(c);
  }
  choice.token = argmax_lowest_id(choice.table);
  return choice;
}

}  // namespace doge
