#pragma once

// Lexical metrics for generated responses. Every metric works on the same
// word tokenization: lowercase, split on whitespace, strip leading and
// trailing punctuation, drop tokens that end up empty.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "doge/errors.hpp"

namespace doge {

using Words = std::vector<std::string>;

inline Words tokenize_words(std::string_view text) {
  Words out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && std::ispunct(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) {
      std::string w(text.substr(b, e - b));
      for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(std::move(w));
    }
    i = j;
  }
  return out;
}

namespace detail {

inline std::string join_ngram(const Words& words, std::size_t at, std::size_t n) {
  std::string key;
  for (std::size_t k = 0; k < n; ++k) {
    if (k) key += '\x1f';
    key += words[at + k];
  }
  return key;
}

// Ordered so iteration, and hence floating-point summation, is reproducible.
inline std::map<std::string, std::size_t> ngram_counts(const std::vector<Words>& corpus, std::size_t n) {
  if (n < 1) throw InvalidInputError("n-gram order must be >= 1");
  if (corpus.empty()) throw UndefinedMetricError("metric over an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const Words& words : corpus) {
    for (std::size_t i = 0; i + n <= words.size(); ++i) ++counts[join_ngram(words, i, n)];
  }
  return counts;
}

}  // namespace detail

/// Unique n-grams over total n-grams, pooled over the corpus. A non-empty
/// corpus with no n-gram of order n scores 0.
inline double distinct_n(const std::vector<Words>& corpus, std::size_t n) {
  const auto counts = detail::ngram_counts(corpus, n);
  std::size_t total = 0;
  for (const auto& [_, c] : counts) total += c;
  return total == 0 ? 0.0 : static_cast<double>(counts.size()) / static_cast<double>(total);
}

/// Shannon entropy, in bits, of the corpus n-gram frequency distribution.
inline double entropy_n(const std::vector<Words>& corpus, std::size_t n) {
  const auto counts = detail::ngram_counts(corpus, n);
  std::size_t total = 0;
  for (const auto& [_, c] : counts) total += c;
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h > 0.0 ? h : 0.0;
}

/// Length of the longest common subsequence, bit-parallel over `a`.
inline std::size_t lcs_length(const Words& a, const Words& b) {
  if (a.empty() || b.empty()) return 0;
  const std::size_t blocks = (a.size() + 63) / 64;
  std::unordered_map<std::string_view, std::vector<std::uint64_t>> match;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto& m = match[a[i]];
    if (m.empty()) m.assign(blocks, 0);
    m[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  std::vector<std::uint64_t> v(blocks, ~std::uint64_t{0});
  for (const std::string& w : b) {
    auto it = match.find(w);
    if (it == match.end()) continue;
    std::uint64_t carry = 0;
    for (std::size_t k = 0; k < blocks; ++k) {
      const std::uint64_t u = v[k] & it->second[k];
      const std::uint64_t sum = v[k] + u;
      const std::uint64_t next_carry = (sum < v[k]) ? 1 : 0;
      const std::uint64_t with_carry = sum + carry;
      carry = next_carry | (with_carry < sum ? 1 : 0);
      v[k] = with_carry | (v[k] & ~u);
    }
  }
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < a.size(); ++i) zeros += ((v[i / 64] >> (i % 64)) & 1) ? 0 : 1;
  return zeros;
}

/// LCS length over the response length; 0 for an empty response.
inline double p_lcs(const Words& response, const Words& knowledge) {
  if (response.empty()) return 0.0;
  return static_cast<double>(lcs_length(response, knowledge)) / static_cast<double>(response.size());
}

/// Sentence BLEU up to order n (1 or 2) with brevity penalty. Orders >= 2
/// with no matches use add-one counts.
inline double bleu(const Words& response, const Words& reference, std::size_t n) {
  if (n < 1 || n > 2) throw InvalidInputError("bleu order must be 1 or 2");
  if (reference.empty()) throw UndefinedMetricError("bleu against an empty reference");
  if (response.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    std::unordered_map<std::string, std::size_t> ref_counts;
    for (std::size_t i = 0; i + k <= reference.size(); ++i) ++ref_counts[detail::join_ngram(reference, i, k)];
    std::unordered_map<std::string, std::size_t> resp_counts;
    std::size_t total = 0;
    for (std::size_t i = 0; i + k <= response.size(); ++i, ++total) ++resp_counts[detail::join_ngram(response, i, k)];
    std::size_t clipped = 0;
    for (const auto& [gram, c] : resp_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) clipped += std::min(c, it->second);
    }
    double precision;
    if (clipped > 0) {
      precision = static_cast<double>(clipped) / static_cast<double>(total);
    } else if (k == 1) {
      return 0.0;
    } else {
      precision = 1.0 / static_cast<double>(total + 1);
    }
    log_sum += std::log(precision);
  }
  const double r = static_cast<double>(reference.size());
  const double c = static_cast<double>(response.size());
  const double bp = std::min(1.0, std::exp(1.0 - r / c));
  return bp * std::exp(log_sum / static_cast<double>(n));
}

struct Fragment {
  std::size_t response_begin = 0;
  std::size_t knowledge_begin = 0;
  std::size_t length = 0;
};

/// Greedy extractive fragments: from the current response word, take the
/// longest run shared with any knowledge position (earliest on ties), then
/// continue after it. Words with no match are skipped.
inline std::vector<Fragment> extractive_fragments(const Words& response, const Words& knowledge) {
  const std::size_t n = response.size(), m = knowledge.size();
  // run[i][j]: length of the common run starting at response[i], knowledge[j].
  std::vector<std::vector<std::size_t>> run(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      if (response[i] == knowledge[j]) run[i][j] = run[i + 1][j + 1] + 1;
    }
  }
  std::vector<Fragment> out;
  std::size_t i = 0;
  while (i < n) {
    Fragment best{i, 0, 0};
    for (std::size_t j = 0; j < m; ++j) {
      if (run[i][j] > best.length) best = {i, j, run[i][j]};
    }
    if (best.length == 0) {
      ++i;
    } else {
      out.push_back(best);
      i += best.length;
    }
  }
  return out;
}

struct CoverageDensity {
  double coverage = 0.0;
  double density = 0.0;
};

inline CoverageDensity fragments_coverage_density(const Words& response, const Words& knowledge) {
  if (response.empty()) return {};
  double sum = 0.0, sum_sq = 0.0;
  for (const Fragment& f : extractive_fragments(response, knowledge)) {
    const auto len = static_cast<double>(f.length);
    sum += len;
    sum_sq += len * len;
  }
  const auto n = static_cast<double>(response.size());
  return {sum / n, sum_sq / n};
}

/// Geometric mean of two percentages.
inline double cfd(double faithfulness_percent, double distinct2_percent) {
  if (faithfulness_percent < 0.0 || distinct2_percent < 0.0) throw InvalidInputError("cfd inputs must be >= 0");
  return std::sqrt(faithfulness_percent * distinct2_percent);
}

inline const std::unordered_set<std::string>& english_stop_words() {
  static const std::unordered_set<std::string> words = {
      "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at", "be",
      "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could", "did", "do",
      "does", "doing", "don't", "down", "during", "each", "few", "for", "from", "further", "had", "has", "have",
      "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "i'm", "if", "in",
      "into", "is", "it", "it's", "its", "itself", "just", "me", "more", "most", "my", "myself", "no", "nor", "not",
      "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own",
      "same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "themselves",
      "then", "there", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "very",
      "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with",
      "would", "yes", "you", "you're", "your", "yours", "yourself", "yourselves"};
  return words;
}

struct ProxyScore {
  double value = 0.0;
  bool undefined = false;  // the response has no content words
};

/// Share of the response's content words (stop words removed) that occur in
/// the knowledge. A lexical stand-in for a trained faithfulness classifier.
inline ProxyScore faithfulness_proxy(const Words& response, const Words& knowledge) {
  const auto& stop = english_stop_words();
  const std::unordered_set<std::string> known(knowledge.begin(), knowledge.end());
  std::size_t content = 0, supported = 0;
  for (const std::string& w : response) {
    if (stop.count(w)) continue;
    ++content;
    supported += known.count(w);
  }
  if (content == 0) return {0.0, true};
  return {static_cast<double>(supported) / static_cast<double>(content), false};
}

struct EvalEntry {
  std::string response;
  std::string knowledge;
  std::optional<std::string> reference;
};

struct SampleMetrics {
  double p_lcs = 0.0;
  double coverage = 0.0;
  double density = 0.0;
  ProxyScore faithfulness;
  std::optional<double> bleu1;
  std::optional<double> bleu2;
};

struct MetricsReport {
  std::size_t samples = 0;
  std::size_t with_reference = 0;
  std::size_t proxy_undefined = 0;
  std::optional<double> bleu1;  // mean over samples with a reference
  std::optional<double> bleu2;
  double distinct1 = 0.0;
  double distinct2 = 0.0;
  double ent1 = 0.0;
  double ent2 = 0.0;
  double p_lcs = 0.0;
  double coverage_mean = 0.0;
  double density_mean = 0.0;
  double faithfulness_proxy = 0.0;  // proxy-undefined samples count as 0
  double cfd = 0.0;                 // cfd(100 * faithfulness_proxy, 100 * distinct2)
  std::vector<SampleMetrics> per_sample;
};

inline SampleMetrics score_sample(const EvalEntry& e) {
  const Words r = tokenize_words(e.response);
  const Words k = tokenize_words(e.knowledge);
  SampleMetrics s;
  s.p_lcs = p_lcs(r, k);
  const CoverageDensity cd = fragments_coverage_density(r, k);
  s.coverage = cd.coverage;
  s.density = cd.density;
  s.faithfulness = faithfulness_proxy(r, k);
  if (e.reference) {
    const Words ref = tokenize_words(*e.reference);
    if (!ref.empty()) {
      s.bleu1 = bleu(r, ref, 1);
      s.bleu2 = bleu(r, ref, 2);
    }
  }
  return s;
}

inline MetricsReport evaluate_corpus(const std::vector<EvalEntry>& entries) {
  if (entries.empty()) throw UndefinedMetricError("evaluation of an empty corpus");
  MetricsReport rep;
  rep.samples = entries.size();
  std::vector<Words> responses;
  responses.reserve(entries.size());
  double b1 = 0.0, b2 = 0.0;
  for (const EvalEntry& e : entries) {
    responses.push_back(tokenize_words(e.response));
    SampleMetrics s = score_sample(e);
    rep.p_lcs += s.p_lcs;
    rep.coverage_mean += s.coverage;
    rep.density_mean += s.density;
    rep.faithfulness_proxy += s.faithfulness.value;
    rep.proxy_undefined += s.faithfulness.undefined ? 1 : 0;
    if (s.bleu1) {
      ++rep.with_reference;
      b1 += *s.bleu1;
      b2 += *s.bleu2;
    }
    rep.per_sample.push_back(std::move(s));
  }
  const auto n = static_cast<double>(entries.size());
  rep.p_lcs /= n;
  rep.coverage_mean /= n;
  rep.density_mean /= n;
  rep.faithfulness_proxy /= n;
  if (rep.with_reference > 0) {
    rep.bleu1 = b1 / static_cast<double>(rep.with_reference);
    rep.bleu2 = b2 / static_cast<double>(rep.with_reference);
  }
  rep.distinct1 = distinct_n(responses, 1);
  rep.distinct2 = distinct_n(responses, 2);
  rep.ent1 = entropy_n(responses, 1);
  rep.ent2 = entropy_n(responses, 2);
  rep.cfd = cfd(100.0 * rep.faithfulness_proxy, 100.0 * rep.distinct2);
  return rep;
}

}  // namespace doge
