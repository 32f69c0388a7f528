#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "doge/errors.hpp"

namespace doge {

using TokenId = std::int32_t;

/// Probability vector indexed by token id.
class ProbDist {
 public:
  static constexpr double kSumTolerance = 1e-9;

  ProbDist() = default;

  // Validates entries: finite, non-negative, summing to one.
  explicit ProbDist(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw InvalidInputError("empty distribution");
    double total = 0.0;
    for (double p : probs_) {
      if (!std::isfinite(p) || p < 0.0) throw InvalidInputError("distribution entry is negative or not finite");
      total += p;
    }
    if (std::abs(total - 1.0) > kSumTolerance) {
      throw InvalidInputError("distribution does not sum to 1");
    }
  }

  std::size_t size() const noexcept { return probs_.size(); }
  bool empty() const noexcept { return probs_.empty(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  double at(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= probs_.size()) {
      throw InvalidInputError("token id out of range");
    }
    return probs_[static_cast<std::size_t>(id)];
  }
  std::span<const double> values() const noexcept { return probs_; }

  TokenId argmax() const {
    if (probs_.empty()) throw InvalidInputError("empty distribution");
    // max_element returns the first maximum, so ties go to the lower id.
    return static_cast<TokenId>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
  }

  // Token ids ordered by descending probability, ascending id on ties.
  std::vector<TokenId> ranked() const {
    std::vector<TokenId> order(probs_.size());
    std::iota(order.begin(), order.end(), TokenId{0});
    std::stable_sort(order.begin(), order.end(), [this](TokenId a, TokenId b) {
      return probs_[static_cast<std::size_t>(a)] > probs_[static_cast<std::size_t>(b)];
    });
    return order;
  }

  // The k most probable ids in ranked() order.
  std::vector<TokenId> top_k(std::size_t k) const {
    std::vector<TokenId> order(probs_.size());
    std::iota(order.begin(), order.end(), TokenId{0});
    k = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [this](TokenId a, TokenId b) {
                        double pa = probs_[static_cast<std::size_t>(a)];
                        double pb = probs_[static_cast<std::size_t>(b)];
                        return pa > pb || (pa == pb && a < b);
                      });
    order.resize(k);
    return order;
  }

 private:
  std::vector<double> probs_;
};

/// Numerically stable softmax of `logits / temperature`.
inline ProbDist softmax(std::span<const double> logits, double temperature = 1.0) {
  if (logits.empty()) throw InvalidInputError("empty logits");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  double max_logit = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(max_logit)) throw NumericError("non-finite logits");
  std::vector<double> probs(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp((logits[i] - max_logit) / temperature);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return ProbDist(std::move(probs));
}

}  // namespace doge
