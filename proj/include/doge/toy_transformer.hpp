#pragma once

// Small seeded decoder-only transformer used as a desk-scale model backend.
//
// Architecture: learned token and position embeddings, `layers` pre-norm
// blocks of causal multi-head self-attention followed by a GELU feed-forward
// (no biases, unit-gain layer norms), a final layer norm, and a linear output
// head. Weights are drawn uniformly from [-0.1, 0.1] in this order:
//   token embeddings (vocab x d), position embeddings (max_positions x d),
//   then per layer Wq, Wk, Wv, Wo (d x d each), W1 (d x d_ff), W2 (d_ff x d),
//   and finally the output head (d x vocab). All matrices are row-major and
//   multiply row vectors from the left (y = x W).
// The draw stream is Rng(seed).uniform(-0.1, 0.1).

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "doge/backend.hpp"
#include "doge/logit_prior.hpp"
#include "doge/rng.hpp"
#include "doge/tokenizer.hpp"

namespace doge {

struct ToyTransformerSpec {
  std::size_t vocab_size = ByteTokenizer::kVocabSize;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t d_model = 32;
  std::size_t d_ff = 64;
  std::size_t max_positions = 512;
  std::uint64_t seed = 42;
  LogitPriorSpec prior;
  // Number of cached positions before the prefix cache is flushed; 0 disables it.
  std::size_t cache_capacity = 16384;

  void validate() const {
    if (vocab_size < 1 || layers < 1 || heads < 1 || d_model < 1 || d_ff < 1 || max_positions < 1) {
      throw ConfigError("toy transformer dimensions must all be >= 1");
    }
    if (d_model % heads != 0) throw ConfigError("d_model must be divisible by heads");
  }
};

class ToyTransformer final : public Backend {
 public:
  // Raw attention weights of one position: [layer][head][source position].
  using AttentionMaps = std::vector<std::vector<std::vector<double>>>;

  explicit ToyTransformer(ToyTransformerSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const std::size_t d = spec_.d_model;
    Rng rng(spec_.seed);
    auto draw = [&rng](std::size_t n) {
      std::vector<double> w(n);
      for (double& x : w) x = rng.uniform(-0.1, 0.1);
      return w;
    };
    token_embedding_ = draw(spec_.vocab_size * d);
    position_embedding_ = draw(spec_.max_positions * d);
    blocks_.resize(spec_.layers);
    for (Block& b : blocks_) {
      b.wq = draw(d * d);
      b.wk = draw(d * d);
      b.wv = draw(d * d);
      b.wo = draw(d * d);
      b.w1 = draw(d * spec_.d_ff);
      b.w2 = draw(spec_.d_ff * d);
    }
    output_head_ = draw(d * spec_.vocab_size);
    const TokenId bos = has_specials() ? ByteTokenizer::kBos : 0;
    const TokenId eos = has_specials() ? ByteTokenizer::kEos : 0;
    prior_ = LogitPrior(spec_.prior, spec_.vocab_size, bos, eos);
  }

  const ToyTransformerSpec& spec() const { return spec_; }

  std::size_t vocab_size() const override { return spec_.vocab_size; }
  std::size_t hidden_size() const override { return spec_.d_model; }
  std::optional<TokenId> eos_id() const override {
    if (has_specials()) return ByteTokenizer::kEos;
    return std::nullopt;
  }

  StepOutputs forward(std::span<const TokenId> sequence) const override {
    check_sequence(sequence);
    std::vector<StatePtr> chain = states_for(sequence);
    StepOutputs out;
    out.hiddens.reserve(chain.size());
    for (const StatePtr& s : chain) out.hiddens.push_back(s->hidden);
    out.last_hidden = chain.back()->hidden;
    out.attn_pooled = chain.back()->attn_pooled;
    out.logits = project_logits(chain.back()->hidden);
    if (prior_.enabled()) prior_.apply(sequence, out.logits);
    return out;
  }

  // Batched: the prefix is resolved once and every candidate shares it.
  std::vector<CandidateEval> eval_candidates(std::span<const TokenId> prefix,
                                             std::span<const TokenId> candidates) const override {
    if (candidates.empty()) throw InvalidInputError("no candidates to evaluate");
    for (TokenId t : candidates) check_token(t);
    if (prefix.size() + 1 > spec_.max_positions) throw CapacityError("sequence exceeds max_positions");
    for (TokenId t : prefix) check_token(t);

    std::vector<StatePtr> chain = prefix.empty() ? std::vector<StatePtr>{} : states_for(prefix);
    std::vector<const PositionState*> ancestors;
    ancestors.reserve(chain.size());
    for (const StatePtr& s : chain) ancestors.push_back(s.get());

    std::vector<TokenId> seq(prefix.begin(), prefix.end());
    seq.push_back(0);
    std::vector<CandidateEval> out;
    out.reserve(candidates.size());
    for (TokenId token : candidates) {
      seq.back() = token;
      StatePtr state = lookup_exact(seq);
      if (!state) {
        state = compute_position(token, prefix.size(), ancestors, chain.empty() ? nullptr : chain.back(), nullptr);
        insert(seq, {state}, prefix.size());
      }
      out.push_back(CandidateEval{token, state->hidden, state->attn_pooled});
    }
    return out;
  }

  // Uncached, unpooled attention weights of the final position.
  AttentionMaps raw_attention(std::span<const TokenId> sequence) const {
    check_sequence(sequence);
    std::vector<StatePtr> chain;
    std::vector<const PositionState*> ancestors;
    AttentionMaps maps;
    for (std::size_t i = 0; i < sequence.size(); ++i) {
      const bool last = i + 1 == sequence.size();
      StatePtr s = compute_position(sequence[i], i, ancestors, chain.empty() ? nullptr : chain.back(),
                                    last ? &maps : nullptr);
      ancestors.push_back(s.get());
      chain.push_back(std::move(s));
    }
    return maps;
  }

  // Positions currently held by the prefix cache.
  std::size_t cached_positions() const {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    return cache_size_;
  }

 private:
  struct Block {
    std::vector<double> wq, wk, wv, wo, w1, w2;
  };

  // Immutable per-position state. Keys and values of every layer are all a
  // later position needs, so a prefix is fully described by its chain.
  struct PositionState {
    TokenId token = 0;
    std::size_t position = 0;
    std::shared_ptr<const PositionState> parent;
    std::vector<double> keys;    // layers x d
    std::vector<double> values;  // layers x d
    Vector hidden;
    Vector attn_pooled;
  };
  using StatePtr = std::shared_ptr<const PositionState>;

  struct TrieNode {
    StatePtr state;
    std::unordered_map<TokenId, std::unique_ptr<TrieNode>> children;
  };

  bool has_specials() const { return spec_.vocab_size >= ByteTokenizer::kVocabSize; }

  void check_sequence(std::span<const TokenId> sequence) const {
    if (sequence.empty()) throw InvalidInputError("empty sequence");
    if (sequence.size() > spec_.max_positions) throw CapacityError("sequence exceeds max_positions");
    for (TokenId t : sequence) check_token(t);
  }

  static void layer_norm(std::span<const double> x, std::span<double> out) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv;
  }

  // out = x W with W stored row-major as rows(x) x cols.
  static void matvec(std::span<const double> x, const std::vector<double>& w, std::size_t cols,
                     std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double xi = x[i];
      const double* row = w.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j) out[j] += xi * row[j];
    }
  }

  static double gelu(double x) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    return 0.5 * x * (1.0 + std::tanh(kC * (x + 0.044715 * x * x * x)));
  }

  StatePtr compute_position(TokenId token, std::size_t pos, const std::vector<const PositionState*>& ancestors,
                            StatePtr parent, AttentionMaps* raw) const {
    const std::size_t d = spec_.d_model;
    const std::size_t dh = d / spec_.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    auto state = std::make_shared<PositionState>();
    state->token = token;
    state->position = pos;
    state->parent = std::move(parent);
    state->keys.resize(spec_.layers * d);
    state->values.resize(spec_.layers * d);
    state->attn_pooled.assign(pos + 1, 0.0);
    if (raw) raw->assign(spec_.layers, std::vector<std::vector<double>>(spec_.heads));

    std::vector<double> x(d), a(d), q(d), attn(d), proj(d), ff(spec_.d_ff), weights(pos + 1);
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = token_embedding_[static_cast<std::size_t>(token) * d + i] + position_embedding_[pos * d + i];
    }
    for (std::size_t l = 0; l < spec_.layers; ++l) {
      const Block& b = blocks_[l];
      std::span<double> k_self(state->keys.data() + l * d, d);
      std::span<double> v_self(state->values.data() + l * d, d);
      layer_norm(x, a);
      matvec(a, b.wq, d, q);
      matvec(a, b.wk, d, k_self);
      matvec(a, b.wv, d, v_self);

      for (std::size_t h = 0; h < spec_.heads; ++h) {
        const std::size_t off = h * dh;
        auto key_at = [&](std::size_t j) -> const double* {
          return j == pos ? k_self.data() + off : ancestors[j]->keys.data() + l * d + off;
        };
        auto value_at = [&](std::size_t j) -> const double* {
          return j == pos ? v_self.data() + off : ancestors[j]->values.data() + l * d + off;
        };
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= pos; ++j) {
          const double* kj = key_at(j);
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += q[off + c] * kj[c];
          weights[j] = s * scale;
          max_score = std::max(max_score, weights[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j <= pos; ++j) {
          weights[j] = std::exp(weights[j] - max_score);
          total += weights[j];
        }
        for (std::size_t c = 0; c < dh; ++c) attn[off + c] = 0.0;
        for (std::size_t j = 0; j <= pos; ++j) {
          weights[j] /= total;
          state->attn_pooled[j] = std::max(state->attn_pooled[j], weights[j]);
          const double* vj = value_at(j);
          for (std::size_t c = 0; c < dh; ++c) attn[off + c] += weights[j] * vj[c];
        }
        if (raw) (*raw)[l][h].assign(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(pos + 1));
      }
      matvec(attn, b.wo, d, proj);
      for (std::size_t i = 0; i < d; ++i) x[i] += proj[i];

      layer_norm(x, a);
      matvec(a, b.w1, spec_.d_ff, ff);
      for (double& v : ff) v = gelu(v);
      matvec(ff, b.w2, d, proj);
      for (std::size_t i = 0; i < d; ++i) x[i] += proj[i];
    }
    state->hidden.resize(d);
    layer_norm(x, state->hidden);
    return state;
  }

  Vector project_logits(const Vector& hidden) const {
    Vector logits(spec_.vocab_size);
    matvec(hidden, output_head_, spec_.vocab_size, logits);
    return logits;
  }

  // States for every position of `sequence`, reusing the longest cached prefix.
  std::vector<StatePtr> states_for(std::span<const TokenId> sequence) const {
    StatePtr deepest;
    std::size_t depth = 0;
    if (spec_.cache_capacity > 0) {
      std::lock_guard<std::mutex> lock(cache_mutex_);
      const TrieNode* node = &root_;
      for (TokenId t : sequence) {
        auto it = node->children.find(t);
        if (it == node->children.end()) break;
        node = it->second.get();
        deepest = node->state;
        ++depth;
      }
    }
    std::vector<StatePtr> chain(depth);
    for (StatePtr s = deepest; s; s = s->parent) chain[s->position] = s;
    std::vector<const PositionState*> ancestors;
    ancestors.reserve(sequence.size());
    for (const StatePtr& s : chain) ancestors.push_back(s.get());
    for (std::size_t i = depth; i < sequence.size(); ++i) {
      StatePtr s = compute_position(sequence[i], i, ancestors, chain.empty() ? nullptr : chain.back(), nullptr);
      ancestors.push_back(s.get());
      chain.push_back(std::move(s));
    }
    if (depth < sequence.size()) {
      insert(sequence, std::vector<StatePtr>(chain.begin() + static_cast<std::ptrdiff_t>(depth), chain.end()),
             depth);
    }
    return chain;
  }

  StatePtr lookup_exact(std::span<const TokenId> sequence) const {
    if (spec_.cache_capacity == 0) return nullptr;
    std::lock_guard<std::mutex> lock(cache_mutex_);
    const TrieNode* node = &root_;
    for (TokenId t : sequence) {
      auto it = node->children.find(t);
      if (it == node->children.end()) return nullptr;
      node = it->second.get();
    }
    return node->state;
  }

  // Records states for positions [from, from + states.size()) of `sequence`.
  void insert(std::span<const TokenId> sequence, const std::vector<StatePtr>& states, std::size_t from) const {
    if (spec_.cache_capacity == 0) return;
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (cache_size_ + states.size() > spec_.cache_capacity) {
      root_.children.clear();
      cache_size_ = 0;
    }
    TrieNode* node = &root_;
    for (std::size_t i = 0; i < from + states.size(); ++i) {
      if (i < from) {
        auto it = node->children.find(sequence[i]);
        if (it == node->children.end()) return;  // prefix was flushed
        node = it->second.get();
        continue;
      }
      auto& child = node->children[sequence[i]];
      if (!child) {
        child = std::make_unique<TrieNode>();
        child->state = states[i - from];
        ++cache_size_;
      }
      node = child.get();
    }
  }

  ToyTransformerSpec spec_;
  std::vector<double> token_embedding_;
  std::vector<double> position_embedding_;
  std::vector<Block> blocks_;
  std::vector<double> output_head_;
  LogitPrior prior_;

  mutable std::mutex cache_mutex_;
  mutable TrieNode root_;
  mutable std::size_t cache_size_ = 0;
};

}  // namespace doge
