#pragma once

#include <optional>
#include <span>
#include <vector>

#include "doge/errors.hpp"
#include "doge/prob_dist.hpp"

namespace doge {

using Vector = std::vector<double>;

/// Everything a decoder needs from one forward pass.
struct StepOutputs {
  Vector logits;                // next-token logits after the final position
  Vector last_hidden;           // final-layer hidden state of the final position
  std::vector<Vector> hiddens;  // final-layer hidden state of every position
  Vector attn_pooled;           // final position -> every position, max over layers and heads

  bool operator==(const StepOutputs&) const = default;
};

/// Final-position view of forward(prefix + [token]).
struct CandidateEval {
  TokenId token = 0;
  Vector hidden;
  Vector attn_pooled;

  bool operator==(const CandidateEval&) const = default;
};

/// Read-only language-model backend. Implementations are immutable after
/// construction and may be shared by concurrent decode sessions.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t hidden_size() const = 0;
  virtual std::optional<TokenId> eos_id() const = 0;

  virtual StepOutputs forward(std::span<const TokenId> sequence) const = 0;

  // Element i equals the final position of forward(prefix + [candidates[i]]).
  // Overrides may batch, but must match this definition exactly.
  virtual std::vector<CandidateEval> eval_candidates(std::span<const TokenId> prefix,
                                                     std::span<const TokenId> candidates) const {
    if (candidates.empty()) throw InvalidInputError("no candidates to evaluate");
    std::vector<CandidateEval> out;
    out.reserve(candidates.size());
    std::vector<TokenId> seq(prefix.begin(), prefix.end());
    seq.push_back(0);
    for (TokenId token : candidates) {
      seq.back() = token;
      StepOutputs step = forward(seq);
      out.push_back(CandidateEval{token, std::move(step.last_hidden), std::move(step.attn_pooled)});
    }
    return out;
  }

 protected:
  void check_token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size()) {
      throw InvalidInputError("unknown token id " + std::to_string(id));
    }
  }
};

}  // namespace doge
