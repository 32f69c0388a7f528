#pragma once

#include <vector>

#include "doge/prob_dist.hpp"
#include "doge/rng.hpp"

namespace doge {

struct Nucleus {
  ProbDist dist;           // renormalized over the kept tokens, zero elsewhere
  std::size_t kept = 0;    // |V^(p)|
  double kept_mass = 0.0;  // mass of the kept tokens before renormalization
};

/// Keeps the shortest run of tokens, in descending-probability order (lower id
/// first on ties), whose mass reaches top_p, and renormalizes over it.
inline Nucleus nucleus_truncate(const ProbDist& dist, double top_p) {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must lie in (0, 1]");
  const std::vector<TokenId> order = dist.ranked();
  Nucleus out;
  double mass = 0.0;
  std::size_t kept = 0;
  while (kept < order.size()) {
    mass += dist[static_cast<std::size_t>(order[kept])];
    ++kept;
    if (mass >= top_p) break;
  }
  // Rounding can leave the full sum a hair below top_p = 1; drop zero tails.
  while (kept > 1 && dist[static_cast<std::size_t>(order[kept - 1])] == 0.0) --kept;
  std::vector<double> probs(dist.size(), 0.0);
  double kept_mass = 0.0;
  for (std::size_t i = 0; i < kept; ++i) kept_mass += dist[static_cast<std::size_t>(order[i])];
  for (std::size_t i = 0; i < kept; ++i) {
    const auto id = static_cast<std::size_t>(order[i]);
    probs[id] = dist[id] / kept_mass;
  }
  out.dist = ProbDist(std::move(probs));
  out.kept = kept;
  out.kept_mass = kept_mass;
  return out;
}

/// Inverse-CDF draw over tokens ordered by descending probability, ascending
/// id on ties. Consumes exactly one uniform from `rng`.
inline TokenId sample_token(const ProbDist& dist, Rng& rng) {
  const double u = rng.uniform();
  const std::vector<TokenId> order = dist.ranked();
  double cumulative = 0.0;
  TokenId last_positive = order.front();
  for (TokenId id : order) {
    const double p = dist[static_cast<std::size_t>(id)];
    if (p <= 0.0) break;
    last_positive = id;
    cumulative += p;
    if (u < cumulative) return id;
  }
  return last_positive;
}

}  // namespace doge
