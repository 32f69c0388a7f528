#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doge/decoding.hpp"
#include "doge/errors.hpp"

namespace doge {

inline nlohmann::json to_json(const ConfidenceScore& s) {
  return {{"p_max", s.p_max}, {"entropy_bits", s.entropy_bits}, {"score", s.score}};
}

inline nlohmann::json to_json(const CandidateScore& c) {
  return {{"token", c.token}, {"p_k", c.p_k}, {"s_d", c.s_d}, {"s_k", c.s_k}, {"score", c.score}};
}

inline nlohmann::json to_json(const StepDecision& d) {
  nlohmann::json j = {{"t", d.t},
                      {"f_c", to_json(d.f_c)},
                      {"f_k", to_json(d.f_k)},
                      {"branch", std::string(to_string(d.branch))},
                      {"token", d.chosen_token}};
  if (d.candidate_table) {
    nlohmann::json table = nlohmann::json::array();
    for (const CandidateScore& c : *d.candidate_table) table.push_back(to_json(c));
    j["candidates"] = std::move(table);
  }
  if (d.nucleus_size) j["nucleus_size"] = *d.nucleus_size;
  return j;
}

inline ConfidenceScore confidence_from_json(const nlohmann::json& j) {
  return {j.at("p_max").get<double>(), j.at("entropy_bits").get<double>(), j.at("score").get<double>()};
}

inline StepDecision step_from_json(const nlohmann::json& j) {
  StepDecision d;
  d.t = j.at("t").get<std::size_t>();
  d.f_c = confidence_from_json(j.at("f_c"));
  d.f_k = confidence_from_json(j.at("f_k"));
  d.branch = parse_branch(j.at("branch").get<std::string>());
  d.chosen_token = j.at("token").get<TokenId>();
  if (j.contains("candidates")) {
    std::vector<CandidateScore> table;
    for (const auto& c : j["candidates"]) {
      table.push_back({c.at("token").get<TokenId>(), c.at("p_k").get<double>(), c.at("s_d").get<double>(),
                       c.at("s_k").get<double>(), c.at("score").get<double>()});
    }
    d.candidate_table = std::move(table);
  }
  if (j.contains("nucleus_size")) d.nucleus_size = j["nucleus_size"].get<std::size_t>();
  return d;
}

/// One line of decode output: a result or an inline error.
struct DecodeRecord {
  std::string id;
  Strategy strategy = Strategy::kDoge;
  std::optional<DecodeResult> result;
  std::optional<std::string> error;

  std::string response() const { return result ? ByteTokenizer::decode(result->tokens) : std::string(); }
};

inline nlohmann::json to_json(const DecodeRecord& r) {
  nlohmann::json j = {{"id", r.id}, {"strategy", std::string(to_string(r.strategy))}};
  if (r.result) {
    j["response"] = r.response();
    j["tokens"] = r.result->tokens;
    nlohmann::json trace = nlohmann::json::array();
    for (const StepDecision& d : r.result->trace) trace.push_back(to_json(d));
    j["trace"] = std::move(trace);
  } else {
    j["error"] = r.error.value_or("unknown error");
  }
  return j;
}

/// Serialized form used for every file this library writes. Invalid UTF-8 in
/// byte-level responses is replaced rather than rejected.
inline std::string dump_json(const nlohmann::json& j, int indent = -1) {
  return j.dump(indent, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline DecodeRecord record_from_json(const nlohmann::json& j) {
  DecodeRecord r;
  r.id = j.at("id").get<std::string>();
  r.strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (j.contains("error")) {
    r.error = j["error"].get<std::string>();
    return r;
  }
  DecodeResult res;
  res.tokens = j.at("tokens").get<std::vector<TokenId>>();
  for (const auto& s : j.at("trace")) res.trace.push_back(step_from_json(s));
  r.result = std::move(res);
  return r;
}

/// Raw JSON objects of a decode-output file, one per non-blank line.
inline std::vector<nlohmann::json> read_json_lines(std::istream& in) {
  std::vector<nlohmann::json> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line, std::string("invalid JSON: ") + e.what());
    }
    if (!out.back().is_object()) throw ParseError(line, "record is not an object");
  }
  return out;
}

}  // namespace doge
