#pragma once

// Factual-confidence indicator: combines the peak probability of a next-token
// distribution (local confidence) with its entropy (global uncertainty) and
// decides whether the knowledge-masked stream can be trusted at this step.

#include <cmath>
#include <string>
#include <string_view>

#include "doge/errors.hpp"
#include "doge/prob_dist.hpp"

namespace doge {

enum class ConfidenceVariant { kGeometric, kArithmetic, kHarmonic };

enum class Branch {
  kDiversify,  // sample from the knowledge-masked stream
  kGround,     // re-rank the knowledge-exposed stream
};

struct ConfidenceScore {
  double p_max = 0.0;
  double entropy_bits = 0.0;
  double score = 0.0;
};

inline std::string_view to_string(ConfidenceVariant v) {
  switch (v) {
    case ConfidenceVariant::kGeometric: return "geometric";
    case ConfidenceVariant::kArithmetic: return "arithmetic";
    case ConfidenceVariant::kHarmonic: return "harmonic";
  }
  return "geometric";
}

inline ConfidenceVariant parse_confidence_variant(std::string_view s) {
  if (s == "geometric") return ConfidenceVariant::kGeometric;
  if (s == "arithmetic") return ConfidenceVariant::kArithmetic;
  if (s == "harmonic") return ConfidenceVariant::kHarmonic;
  throw ConfigError("unknown confidence variant: " + std::string(s));
}

inline std::string_view to_string(Branch b) { return b == Branch::kDiversify ? "DIVERSIFY" : "GROUND"; }

inline Branch parse_branch(std::string_view s) {
  if (s == "DIVERSIFY") return Branch::kDiversify;
  if (s == "GROUND") return Branch::kGround;
  throw InvalidInputError("unknown branch: " + std::string(s));
}

inline double local_confidence(const ProbDist& dist) {
  if (dist.empty()) throw InvalidInputError("empty distribution");
  return dist[static_cast<std::size_t>(dist.argmax())];
}

/// Shannon entropy in bits; zero-probability entries contribute nothing.
inline double global_uncertainty(const ProbDist& dist) {
  if (dist.empty()) throw InvalidInputError("empty distribution");
  double h = 0.0;
  for (double p : dist.values()) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  // Rounding can leave -0.0 or a hair below zero for one-hot inputs.
  return h > 0.0 ? h : 0.0;
}

/// Score from its two ingredients: local confidence p_max and entropy in bits.
inline double combine_confidence(double p_max, double entropy_bits, double eta, double gamma,
                                 ConfidenceVariant variant = ConfidenceVariant::kGeometric) {
  if (!(eta >= 0.0)) throw ConfigError("eta must be non-negative");
  const double damped = eta * entropy_bits + 1.0;  // global confidence is 1/damped
  double combined = 0.0;
  switch (variant) {
    case ConfidenceVariant::kGeometric:
      combined = std::sqrt(p_max / damped);
      break;
    case ConfidenceVariant::kArithmetic:
      combined = 0.5 * (p_max + 1.0 / damped);
      break;
    case ConfidenceVariant::kHarmonic:
      combined = 2.0 * p_max / (1.0 + p_max * damped);
      break;
  }
  return combined - gamma;
}

inline ConfidenceScore factual_confidence(const ProbDist& dist, double eta, double gamma,
                                          ConfidenceVariant variant = ConfidenceVariant::kGeometric) {
  ConfidenceScore out;
  out.p_max = local_confidence(dist);
  out.entropy_bits = global_uncertainty(dist);
  out.score = combine_confidence(out.p_max, out.entropy_bits, eta, gamma, variant);
  return out;
}

/// DIVERSIFY when the masked stream is already confident, or when exposing
/// the knowledge lowers confidence. A zero difference is not "lower".
inline Branch branch_indicator(const ConfidenceScore& f_c, const ConfidenceScore& f_k) {
  if (f_c.score > 0.0 || f_k.score - f_c.score < 0.0) return Branch::kDiversify;
  return Branch::kGround;
}

}  // namespace doge
