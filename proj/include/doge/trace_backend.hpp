#pragma once

// Replay backend: returns scripted StepOutputs keyed by the exact token
// sequence. Used to drive decoders through hand-computed scenarios.
//
// File format is JSONL, one record per scripted sequence:
//   {"seq": [ids], "logits": [...], "hiddens": [[...], ...], "attn_pooled": [...]}
// hiddens and attn_pooled have one entry per sequence position. An optional
// record {"meta": {"eos": id}} sets the end-of-sequence token.

#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "doge/backend.hpp"

namespace doge {

class TraceBackend final : public Backend {
 public:
  struct Record {
    std::vector<TokenId> seq;
    StepOutputs outputs;
  };

  TraceBackend(const std::vector<Record>& records, std::optional<TokenId> eos) : eos_(eos) {
    std::size_t line = 0;
    for (const Record& r : records) add(++line, r.seq, r.outputs);
  }

  static TraceBackend load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open trace file: " + path);
    return load(in);
  }

  static TraceBackend load(std::istream& in) {
    TraceBackend backend;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
      ++line;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(line, std::string("invalid JSON: ") + e.what());
      }
      try {
        if (!j.is_object()) throw ParseError(line, "record is not an object");
        if (j.contains("meta")) {
          if (j["meta"].contains("eos")) backend.eos_ = j["meta"]["eos"].get<TokenId>();
          continue;
        }
        for (const char* key : {"seq", "logits", "hiddens", "attn_pooled"}) {
          if (!j.contains(key)) throw ParseError(line, std::string("missing field \"") + key + "\"");
        }
        StepOutputs out;
        auto seq = j["seq"].get<std::vector<TokenId>>();
        out.logits = j["logits"].get<Vector>();
        out.hiddens = j["hiddens"].get<std::vector<Vector>>();
        out.attn_pooled = j["attn_pooled"].get<Vector>();
        backend.add(line, std::move(seq), std::move(out));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(line, std::string("bad field type: ") + e.what());
      }
    }
    if (backend.scripts_.empty()) throw ParseError(line, "trace file has no records");
    return backend;
  }

  std::size_t vocab_size() const override { return vocab_size_; }
  std::size_t hidden_size() const override { return hidden_size_; }
  std::optional<TokenId> eos_id() const override { return eos_; }

  StepOutputs forward(std::span<const TokenId> sequence) const override {
    if (sequence.empty()) throw InvalidInputError("empty sequence");
    for (TokenId t : sequence) check_token(t);
    auto it = scripts_.find(std::vector<TokenId>(sequence.begin(), sequence.end()));
    if (it == scripts_.end()) {
      std::string desc;
      for (TokenId t : sequence) desc += (desc.empty() ? "" : ",") + std::to_string(t);
      throw ScriptedMissError("no scripted outputs for sequence [" + desc + "]");
    }
    return it->second;
  }

  static nlohmann::json to_json(const Record& r) {
    return {{"seq", r.seq},
            {"logits", r.outputs.logits},
            {"hiddens", r.outputs.hiddens},
            {"attn_pooled", r.outputs.attn_pooled}};
  }

 private:
  TraceBackend() = default;

  void add(std::size_t line, std::vector<TokenId> seq, StepOutputs out) {
    if (seq.empty()) throw ParseError(line, "seq must be non-empty");
    if (out.logits.empty()) throw ParseError(line, "logits must be non-empty");
    if (vocab_size_ == 0) vocab_size_ = out.logits.size();
    if (out.logits.size() != vocab_size_) throw ParseError(line, "logits length differs from earlier records");
    if (out.hiddens.size() != seq.size()) throw ParseError(line, "hiddens must have one vector per position");
    if (out.attn_pooled.size() != seq.size()) throw ParseError(line, "attn_pooled must have one entry per position");
    for (const Vector& h : out.hiddens) {
      if (h.empty()) throw ParseError(line, "hidden vectors must be non-empty");
      if (hidden_size_ == 0) hidden_size_ = h.size();
      if (h.size() != hidden_size_) throw ParseError(line, "hidden size differs from earlier records");
    }
    for (double a : out.attn_pooled) {
      if (!(a >= 0.0 && a <= 1.0)) throw ParseError(line, "attn_pooled entries must lie in [0, 1]");
    }
    for (TokenId t : seq) {
      if (t < 0) throw ParseError(line, "negative token id");
    }
    out.last_hidden = out.hiddens.back();
    if (!scripts_.emplace(std::move(seq), std::move(out)).second) {
      throw ParseError(line, "duplicate seq");
    }
  }

  std::map<std::vector<TokenId>, StepOutputs> scripts_;
  std::size_t vocab_size_ = 0;
  std::size_t hidden_size_ = 0;
  std::optional<TokenId> eos_;
};

}  // namespace doge
