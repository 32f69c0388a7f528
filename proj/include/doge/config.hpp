#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "doge/confidence.hpp"
#include "doge/errors.hpp"

namespace doge {

enum class Strategy { kDoge, kGreedy, kBeam, kNucleus, kFNucleus, kCs, kFecs };

enum class EpsilonVariant {
  kLiteralClamped,  // clamp(max{omega, lambda^(t/N - 1)}, 0, 1)
  kGrowth,          // max{omega, lambda^(N/max(t,1) - 1)}
};

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kDoge: return "doge";
    case Strategy::kGreedy: return "greedy";
    case Strategy::kBeam: return "beam";
    case Strategy::kNucleus: return "nucleus";
    case Strategy::kFNucleus: return "f_nucleus";
    case Strategy::kCs: return "cs";
    case Strategy::kFecs: return "fecs";
  }
  return "doge";
}

inline Strategy parse_strategy(std::string_view s) {
  for (Strategy st : {Strategy::kDoge, Strategy::kGreedy, Strategy::kBeam, Strategy::kNucleus, Strategy::kFNucleus,
                      Strategy::kCs, Strategy::kFecs}) {
    if (to_string(st) == s) return st;
  }
  throw ConfigError("unknown strategy: " + std::string(s));
}

inline std::string_view to_string(EpsilonVariant v) {
  return v == EpsilonVariant::kLiteralClamped ? "literal_clamped" : "growth";
}

inline EpsilonVariant parse_epsilon_variant(std::string_view s) {
  if (s == "literal_clamped") return EpsilonVariant::kLiteralClamped;
  if (s == "growth") return EpsilonVariant::kGrowth;
  throw ConfigError("unknown epsilon variant: " + std::string(s));
}

struct DecodeConfig {
  Strategy strategy = Strategy::kDoge;

  // DoGe; alpha, beta and K are shared with the contrastive baselines.
  double alpha = 0.4;
  double beta = 0.35;
  double lambda = 0.8;
  double omega = 0.4;
  std::size_t K = 4;
  double top_p = 0.9;
  double eta = 1.0;
  double gamma = 0.3;
  ConfidenceVariant confidence_variant = ConfidenceVariant::kGeometric;
  EpsilonVariant epsilon_variant = EpsilonVariant::kLiteralClamped;
  bool force_ground = false;  // pin the indicator to GROUND at every step

  std::size_t max_new_tokens = 64;
  std::uint64_t seed = 42;

  // Baselines.
  std::size_t beam_size = 3;
  double fn_lambda = 0.9;  // F-nucleus decay
  double fn_omega = 0.7;   // F-nucleus floor
  double temperature = 1.0;  // sampling baselines only

  /// Published hyper-parameters for each strategy.
  static DecodeConfig defaults_for(Strategy s) {
    DecodeConfig c;
    c.strategy = s;
    switch (s) {
      case Strategy::kCs:
        c.K = 3;
        c.alpha = 0.6;
        c.beta = 0.0;
        break;
      case Strategy::kFecs:
        c.K = 3;
        c.alpha = 0.3;
        c.beta = 0.3;
        break;
      default:
        break;
    }
    return c;
  }

  void validate() const {
    if (alpha + beta > 1.0) throw ConfigError("alpha + beta must be <= 1");
    if (alpha < 0.0 || beta < 0.0) throw ConfigError("alpha and beta must be non-negative");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must lie in (0, 1]");
    if (K < 1) throw ConfigError("K must be >= 1");
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    if (!(omega >= 0.0 && omega <= 1.0)) throw ConfigError("omega must lie in [0, 1]");
    if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
    if (!(eta >= 0.0)) throw ConfigError("eta must be non-negative");
    if (beam_size < 1) throw ConfigError("beam_size must be >= 1");
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
    if (!(fn_lambda > 0.0 && fn_lambda <= 1.0)) throw ConfigError("fn_lambda must lie in (0, 1]");
    if (!(fn_omega > 0.0 && fn_omega <= 1.0)) throw ConfigError("fn_omega must lie in (0, 1]");
  }
};

inline nlohmann::json to_json(const DecodeConfig& c) {
  return {{"strategy", to_string(c.strategy)},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"lambda", c.lambda},
          {"omega", c.omega},
          {"K", c.K},
          {"top_p", c.top_p},
          {"eta", c.eta},
          {"gamma", c.gamma},
          {"confidence_variant", to_string(c.confidence_variant)},
          {"epsilon_variant", to_string(c.epsilon_variant)},
          {"force_ground", c.force_ground},
          {"max_new_tokens", c.max_new_tokens},
          {"seed", c.seed},
          {"beam_size", c.beam_size},
          {"fn_lambda", c.fn_lambda},
          {"fn_omega", c.fn_omega},
          {"temperature", c.temperature}};
}

}  // namespace doge
