#pragma once

// Additive logit bias for the toy transformer. Random weights alone give a
// near-uniform next-byte distribution, so the toy backend can optionally mix
// in (a) a smoothed byte n-gram model trained on a text corpus, standing in
// for knowledge stored in parameters, and (b) an in-context copy bias that
// favours continuing a substring already present in the sequence, standing
// in for attention-driven copying from the prompt.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "doge/errors.hpp"
#include "doge/prob_dist.hpp"

namespace doge {

struct LogitPriorSpec {
  std::vector<std::string> corpus;  // one document per entry
  std::size_t order = 4;            // n-gram order, context is order-1 tokens
  double weight = 1.0;              // logit += weight * log p_ngram
  double smoothing = 0.5;           // Dirichlet mass given to the shorter context
  bool append_eos = true;           // train an end-of-text transition per document
  double copy_weight = 0.0;         // logit += copy_weight * share of continuations
  std::size_t copy_min_match = 3;
  std::size_t copy_max_match = 8;

  bool enabled() const { return (!corpus.empty() && weight != 0.0) || copy_weight != 0.0; }
};

class LogitPrior {
 public:
  static constexpr std::size_t kMaxOrder = 7;

  LogitPrior() = default;

  LogitPrior(LogitPriorSpec spec, std::size_t vocab_size, TokenId bos, TokenId eos)
      : spec_(std::move(spec)), vocab_size_(vocab_size), unigram_(vocab_size, 0) {
    if (spec_.order < 1 || spec_.order > kMaxOrder) throw ConfigError("prior order must be in [1, 7]");
    if (!(spec_.smoothing > 0.0)) throw ConfigError("prior smoothing must be positive");
    if (spec_.copy_min_match < 1 || spec_.copy_max_match < spec_.copy_min_match) {
      throw ConfigError("copy match bounds are inconsistent");
    }
    if (vocab_size_ < 256 && !spec_.corpus.empty()) {
      throw ConfigError("corpus prior needs a byte-level vocabulary");
    }
    for (const std::string& doc : spec_.corpus) train(doc, bos, eos);
  }

  const LogitPriorSpec& spec() const { return spec_; }
  bool enabled() const { return spec_.enabled(); }

  void apply(std::span<const TokenId> seq, std::span<double> logits) const {
    if (!spec_.corpus.empty() && spec_.weight != 0.0) {
      std::vector<double> p = ngram_probs(seq);
      for (std::size_t w = 0; w < vocab_size_; ++w) logits[w] += spec_.weight * std::log(p[w]);
    }
    if (spec_.copy_weight != 0.0) apply_copy(seq, logits);
  }

  // Smoothed n-gram distribution over the vocabulary given the sequence tail.
  std::vector<double> ngram_probs(std::span<const TokenId> seq) const {
    std::vector<double> p(vocab_size_, 1.0 / static_cast<double>(vocab_size_));
    mix(p, unigram_, unigram_total_);
    const std::size_t max_ctx = std::min(spec_.order - 1, seq.size());
    for (std::size_t k = 1; k <= max_ctx; ++k) {
      auto it = contexts_.find(context_key(seq.subspan(seq.size() - k)));
      if (it == contexts_.end()) break;
      const ContextCounts& cc = it->second;
      const double denom = static_cast<double>(cc.total) + spec_.smoothing;
      for (double& v : p) v *= spec_.smoothing / denom;
      for (const auto& [tok, count] : cc.next) p[static_cast<std::size_t>(tok)] += count / denom;
    }
    return p;
  }

 private:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::vector<std::pair<TokenId, std::uint32_t>> next;
  };

  static std::uint64_t context_key(std::span<const TokenId> ctx) {
    std::uint64_t key = ctx.size();
    for (TokenId t : ctx) key = (key << 9) | static_cast<std::uint64_t>(t & 0x1FF);
    return key;
  }

  void mix(std::vector<double>& p, const std::vector<std::uint32_t>& counts, std::uint64_t total) const {
    const double denom = static_cast<double>(total) + spec_.smoothing;
    for (std::size_t w = 0; w < vocab_size_; ++w) {
      p[w] = (static_cast<double>(counts[w]) + spec_.smoothing * p[w]) / denom;
    }
  }

  void train(const std::string& doc, TokenId bos, TokenId eos) {
    std::vector<TokenId> seq;
    seq.push_back(bos);
    for (char c : doc) seq.push_back(static_cast<TokenId>(static_cast<unsigned char>(c)));
    if (spec_.append_eos) seq.push_back(eos);
    for (std::size_t i = 1; i < seq.size(); ++i) {
      const TokenId next = seq[i];
      ++unigram_[static_cast<std::size_t>(next)];
      ++unigram_total_;
      for (std::size_t k = 1; k < spec_.order && k <= i; ++k) {
        ContextCounts& cc = contexts_[context_key(std::span<const TokenId>(seq).subspan(i - k, k))];
        ++cc.total;
        auto it = std::find_if(cc.next.begin(), cc.next.end(), [next](const auto& e) { return e.first == next; });
        if (it == cc.next.end()) {
          cc.next.emplace_back(next, 1);
        } else {
          ++it->second;
        }
      }
    }
  }

  // Finds the longest earlier occurrence of the sequence suffix and biases the
  // tokens that followed it, in proportion to how often each did.
  void apply_copy(std::span<const TokenId> seq, std::span<double> logits) const {
    const std::size_t n = seq.size();
    if (n < spec_.copy_min_match + 1) return;
    std::size_t best = 0;
    std::vector<std::size_t> match_len(n - 1, 0);
    for (std::size_t p = 0; p + 1 < n; ++p) {
      std::size_t k = 0;
      while (k < spec_.copy_max_match && k <= p && seq[p - k] == seq[n - 1 - k]) ++k;
      match_len[p] = k;
      best = std::max(best, k);
    }
    if (best < spec_.copy_min_match) return;
    std::size_t total = 0;
    for (std::size_t p = 0; p + 1 < n; ++p) total += match_len[p] == best ? 1 : 0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      if (match_len[p] == best) {
        logits[static_cast<std::size_t>(seq[p + 1])] += spec_.copy_weight / static_cast<double>(total);
      }
    }
  }

  LogitPriorSpec spec_;
  std::size_t vocab_size_ = 0;
  std::vector<std::uint32_t> unigram_;
  std::uint64_t unigram_total_ = 0;
  std::unordered_map<std::uint64_t, ContextCounts> contexts_;
};

}  // namespace doge
