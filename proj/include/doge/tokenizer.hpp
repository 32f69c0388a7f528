#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "doge/prob_dist.hpp"

namespace doge {

/// Byte-level vocabulary: ids 0..255 are raw bytes, followed by three specials.
struct ByteTokenizer {
  static constexpr TokenId kBos = 256;
  static constexpr TokenId kEos = 257;
  static constexpr TokenId kPad = 258;
  static constexpr std::size_t kVocabSize = 259;

  static std::vector<TokenId> encode(std::string_view text) {
    std::vector<TokenId> ids;
    ids.reserve(text.size());
    for (char c : text) ids.push_back(static_cast<TokenId>(static_cast<unsigned char>(c)));
    return ids;
  }

  // Special and out-of-range ids are dropped.
  static std::string decode(std::span<const TokenId> ids) {
    std::string out;
    out.reserve(ids.size());
    for (TokenId id : ids) {
      if (id >= 0 && id < 256) out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
    }
    return out;
  }

  static bool is_sentence_end(TokenId id) { return id == '.' || id == '!' || id == '?'; }
};

}  // namespace doge
