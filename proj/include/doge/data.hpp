#pragma once

#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "doge/backend.hpp"
#include "doge/errors.hpp"
#include "doge/tokenizer.hpp"

namespace doge {

struct DialogueTurn {
  std::string speaker;
  std::string text;
};

struct DialogueSample {
  std::string id;
  std::vector<DialogueTurn> history;
  std::string user_utterance;
  std::string knowledge;
  std::optional<std::string> reference;
};

// Reads one sample per non-blank line:
//   {"id": str, "history": [[speaker, text], ...], "user": str, "knowledge": str, "reference": str?}
inline std::vector<DialogueSample> load_jsonl(std::istream& in) {
  std::vector<DialogueSample> samples;
  std::string text;
  std::size_t line = 0;
  auto require_string = [&line](const nlohmann::json& j, const char* field) -> std::string {
    if (!j.contains(field)) throw SchemaError(line, field, std::string("missing field \"") + field + "\"");
    if (!j[field].is_string()) throw SchemaError(line, field, std::string("field \"") + field + "\" must be a string");
    return j[field].get<std::string>();
  };
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line, "record is not an object");

    DialogueSample s;
    s.id = require_string(j, "id");
    s.user_utterance = require_string(j, "user");
    s.knowledge = require_string(j, "knowledge");
    if (s.user_utterance.empty()) throw SchemaError(line, "user", "field \"user\" must be non-empty");
    if (s.knowledge.empty()) throw SchemaError(line, "knowledge", "field \"knowledge\" must be non-empty");
    if (j.contains("history")) {
      const auto& h = j["history"];
      if (!h.is_array()) throw SchemaError(line, "history", "field \"history\" must be an array");
      for (const auto& turn : h) {
        if (!turn.is_array() || turn.size() != 2 || !turn[0].is_string() || !turn[1].is_string()) {
          throw SchemaError(line, "history", "history entries must be [speaker, text] string pairs");
        }
        s.history.push_back({turn[0].get<std::string>(), turn[1].get<std::string>()});
      }
    }
    if (j.contains("reference") && !j["reference"].is_null()) s.reference = require_string(j, "reference");
    samples.push_back(std::move(s));
  }
  return samples;
}

inline std::vector<DialogueSample> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open dataset: " + path);
  return load_jsonl(in);
}

// History rendered in the demonstrations' style: "<first user turn>  Your
// response: ...  User's utterance: ...". The template supplies the first label.
inline std::string render_history(const std::vector<DialogueTurn>& history) {
  std::string out;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const DialogueTurn& turn = history[i];
    const bool is_user = turn.speaker == "user" || turn.speaker == "User" || turn.speaker == "apprentice";
    if (i > 0) out += "  ";
    if (i > 0 || !is_user) out += is_user ? "User's utterance: " : "Your response: ";
    out += turn.text;
  }
  return out;
}

inline constexpr std::string_view kHistorySlot = "{Dialogue History}";
inline constexpr std::string_view kQuerySlot = "{User's Query}";
inline constexpr std::string_view kKnowledgeSlot = "{External Knowledge}";
inline constexpr std::string_view kMaskedKnowledge = "none";

/// Token spans [begin, end) are half-open.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool operator==(const TokenSpan&) const = default;
};

struct AssembledPrompt {
  std::vector<TokenId> exposed_tokens;
  std::vector<TokenId> masked_tokens;
  TokenSpan knowledge_span;
  std::size_t gen_offset_exposed = 0;
  std::size_t gen_offset_masked = 0;
};

/// Fills the template twice: once with the knowledge and once with the
/// placeholder word in its slot. Both prompts start with BOS. The knowledge
/// slot must appear exactly once; the other slots at least once.
inline AssembledPrompt assemble_prompt(const DialogueSample& sample, std::string_view tmpl) {
  for (std::string_view slot : {kHistorySlot, kQuerySlot, kKnowledgeSlot}) {
    if (tmpl.find(slot) == std::string_view::npos) {
      throw TemplateError("template is missing placeholder " + std::string(slot));
    }
  }
  const std::size_t kpos = tmpl.find(kKnowledgeSlot);
  if (tmpl.find(kKnowledgeSlot, kpos + 1) != std::string_view::npos) {
    throw TemplateError("template must contain {External Knowledge} exactly once");
  }
  if (sample.knowledge.empty()) throw InvalidInputError("sample knowledge is empty");

  auto fill = [&](std::string_view text) {
    std::string out(text);
    const std::string history = render_history(sample.history);
    for (auto [slot, value] : {std::pair{kHistorySlot, std::string_view(history)},
                               std::pair{kQuerySlot, std::string_view(sample.user_utterance)}}) {
      for (std::size_t at = out.find(slot); at != std::string::npos; at = out.find(slot, at + value.size())) {
        out.replace(at, slot.size(), value);
      }
    }
    return out;
  };
  const std::string before = fill(tmpl.substr(0, kpos));
  const std::string after = fill(tmpl.substr(kpos + kKnowledgeSlot.size()));

  AssembledPrompt p;
  auto build = [&](std::string_view knowledge, std::vector<TokenId>& out) {
    out.push_back(ByteTokenizer::kBos);
    for (TokenId t : ByteTokenizer::encode(before)) out.push_back(t);
    const std::size_t begin = out.size();
    for (TokenId t : ByteTokenizer::encode(knowledge)) out.push_back(t);
    const std::size_t end = out.size();
    for (TokenId t : ByteTokenizer::encode(after)) out.push_back(t);
    return TokenSpan{begin, end};
  };
  p.knowledge_span = build(sample.knowledge, p.exposed_tokens);
  build(kMaskedKnowledge, p.masked_tokens);
  p.gen_offset_exposed = p.exposed_tokens.size();
  p.gen_offset_masked = p.masked_tokens.size();
  return p;
}

/// Knowledge-masked and knowledge-exposed token streams that share one
/// realized response.
struct DualStream {
  std::vector<TokenId> exposed;
  std::vector<TokenId> masked;
  std::vector<TokenId> generated;
  std::vector<Vector> generated_hiddens;  // exposed-stream hidden state of each generated token
  std::vector<Vector> knowledge_hiddens;  // exposed-stream hidden states of the knowledge span

  static DualStream from_prompt(const AssembledPrompt& prompt) {
    return DualStream{prompt.exposed_tokens, prompt.masked_tokens, {}, {}, {}};
  }

  void append_token(TokenId token) {
    exposed.push_back(token);
    masked.push_back(token);
    generated.push_back(token);
  }
};

}  // namespace doge
