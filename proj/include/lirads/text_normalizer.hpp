#pragma once

// Token normalization for liver findings: lowercase, split, spell out small
// integers, stem, drop stop words; then corpus-level frequency filtering,
// PMI bigram collocations and controlled-term tagging.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lirads/error.hpp"
#include "lirads/porter_stemmer.hpp"
#include "lirads/stopwords.hpp"

namespace lirads {

/// Lowercase tokens in order; joined bigrams use '_' and tags are uppercase.
using TokenSeq = std::vector<std::string>;

inline constexpr std::string_view kNumToken = "NUM";

/// True for tag tokens (NUM, NEGEX, ...): at least one uppercase letter and
/// no lowercase ones.
inline bool is_tag_token(std::string_view t) {
  bool upper = false;
  for (char c : t) {
    if (c >= 'a' && c <= 'z') return false;
    if (c >= 'A' && c <= 'Z') upper = true;
  }
  return upper;
}

namespace norm_detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_alpha(char c) { return c >= 'a' && c <= 'z'; }

/// Splits lowercase text into letter runs and number runs; a '.' between
/// digits is kept inside the number.
inline std::vector<std::string> split_raw(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  enum class Kind { None, Alpha, Digit } kind = Kind::None;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
    kind = Kind::None;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (is_alpha(c)) {
      if (kind != Kind::Alpha) flush();
      kind = Kind::Alpha;
      cur.push_back(c);
    } else if (is_digit(c)) {
      if (kind != Kind::Digit) flush();
      kind = Kind::Digit;
      cur.push_back(c);
    } else if (c == '.' && kind == Kind::Digit && i + 1 < text.size() &&
               is_digit(text[i + 1]) && cur.find('.') == std::string::npos) {
      cur.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

inline void number_words(int n, std::vector<std::string>& out) {
  static const char* const kOnes[] = {
      "zero",    "one",     "two",       "three",    "four",     "five",    "six",
      "seven",   "eight",   "nine",      "ten",      "eleven",   "twelve",  "thirteen",
      "fourteen", "fifteen", "sixteen",  "seventeen", "eighteen", "nineteen"};
  static const char* const kTens[] = {"",      "",      "twenty",  "thirty", "forty",
                                      "fifty", "sixty", "seventy", "eighty", "ninety"};
  if (n < 20) {
    out.emplace_back(kOnes[n]);
    return;
  }
  out.emplace_back(kTens[n / 10]);
  if (n % 10) out.emplace_back(kOnes[n % 10]);
}

}  // namespace norm_detail

/// Per-token pipeline: lowercase, split, numbers (0-99 spelled out, other
/// numerals -> NUM), Porter stemming, stop-word removal. Stop words are
/// matched on the word before stemming and on its stem.
class TextNormalizer {
 public:
  TextNormalizer() : stopwords_(&default_stopwords()) {}
  explicit TextNormalizer(const std::unordered_set<std::string>& stopwords,
                          std::unordered_set<std::string> removal = {})
      : stopwords_(&stopwords), removal_(std::move(removal)) {}

  TokenSeq operator()(std::string_view text) const {
    TokenSeq out;
    std::vector<std::string> words;
    for (auto& raw : norm_detail::split_raw(text)) {
      words.clear();
      if (norm_detail::is_digit(raw.front())) {
        if (raw.find('.') != std::string::npos) {
          out.emplace_back(kNumToken);
          continue;
        }
        const auto nz = raw.find_first_not_of('0');
        const std::string_view digits =
            nz == std::string::npos ? std::string_view("0") : std::string_view(raw).substr(nz);
        if (digits.size() > 2) {
          out.emplace_back(kNumToken);
          continue;
        }
        norm_detail::number_words(std::stoi(std::string(digits)), words);
      } else {
        words.push_back(std::move(raw));
      }
      for (auto& w : words) {
        if (stopwords_->count(w)) continue;
        std::string stem = stemmer_(w);
        if (stopwords_->count(stem) || removal_.count(w) || removal_.count(stem)) continue;
        out.push_back(std::move(stem));
      }
    }
    return out;
  }

 private:
  const std::unordered_set<std::string>* stopwords_;
  std::unordered_set<std::string> removal_;
  PorterStemmer stemmer_;
};

/// Normalizes text with the bundled stop-word list.
inline TokenSeq tokenize_normalize(std::string_view text) {
  static const TextNormalizer normalizer;
  return normalizer(text);
}

// ---------------------------------------------------------------------------
// Frequency filtering

/// Removes tokens whose corpus-wide count is below min_count. Tag tokens
/// are never removed.
inline std::vector<TokenSeq> filter_low_frequency(const std::vector<TokenSeq>& corpus,
                                                  std::size_t min_count = 50) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& seq : corpus)
    for (const auto& t : seq) ++counts[t];
  std::vector<TokenSeq> out;
  out.reserve(corpus.size());
  for (const auto& seq : corpus) {
    TokenSeq kept;
    kept.reserve(seq.size());
    for (const auto& t : seq)
      if (is_tag_token(t) || counts[t] >= min_count) kept.push_back(t);
    out.push_back(std::move(kept));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bigram collocations

struct BigramOptions {
  std::size_t min_count = 50;
  std::size_t top_k = 1000;
  /// Rank by normalized PMI instead of raw PMI.
  bool normalized = false;
};

class BigramTable {
 public:
  struct Entry {
    std::string first;
    std::string second;
    double score = 0.0;
    std::size_t count = 0;  // 0 when loaded from file
  };

  BigramTable() = default;
  explicit BigramTable(std::vector<Entry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      index_.emplace(key(entries_[i].first, entries_[i].second), i);
  }

  /// Entries in descending score order.
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  bool contains(std::string_view a, std::string_view b) const {
    return index_.count(key(a, b)) != 0;
  }

  const Entry* find(std::string_view a, std::string_view b) const {
    auto it = index_.find(key(a, b));
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  /// TSV: first TAB second TAB score (6 decimals).
  void write_tsv(std::ostream& os) const {
    char buf[64];
    for (const auto& e : entries_) {
      std::snprintf(buf, sizeof buf, "%.6f", e.score);
      os << e.first << '\t' << e.second << '\t' << buf << '\n';
    }
  }

  static BigramTable read_tsv(std::istream& is) {
    std::vector<Entry> entries;
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      Entry e;
      std::string score;
      if (!std::getline(ls, e.first, '\t') || !std::getline(ls, e.second, '\t') ||
          !std::getline(ls, score))
        throw DataError("malformed bigram line: " + line);
      try {
        e.score = std::stod(score);
      } catch (const std::exception&) {
        throw DataError("malformed bigram score: " + line);
      }
      entries.push_back(std::move(e));
    }
    return BigramTable(std::move(entries));
  }

 private:
  static std::string key(std::string_view a, std::string_view b) {
    std::string k;
    k.reserve(a.size() + b.size() + 1);
    k.append(a);
    k.push_back('\x1f');
    k.append(b);
    return k;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Scores ordered adjacent pairs by PMI(x,y) = log(p(x,y) / (p(x) p(y))),
/// p(x,y) over all adjacent pairs and p(x) over all tokens. Pairs seen fewer
/// than min_count times are dropped; the top_k by score are kept (ties:
/// higher count first, then lexicographic).
inline BigramTable learn_bigrams(const std::vector<TokenSeq>& corpus,
                                 const BigramOptions& opt = {}) {
  if (corpus.empty()) throw DataError("empty corpus");

  std::unordered_map<std::string, std::size_t> unigram;
  std::map<std::pair<std::string, std::string>, std::size_t> pairs;
  std::size_t n_tokens = 0;
  std::size_t n_pairs = 0;
  for (const auto& seq : corpus) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      ++unigram[seq[i]];
      ++n_tokens;
      if (i + 1 < seq.size()) {
        ++pairs[{seq[i], seq[i + 1]}];
        ++n_pairs;
      }
    }
  }
  if (n_tokens == 0) throw DataError("empty corpus");

  std::vector<BigramTable::Entry> cand;
  for (const auto& [pair, c] : pairs) {
    if (c < opt.min_count) continue;
    const double pxy = static_cast<double>(c) / static_cast<double>(n_pairs);
    const double px = static_cast<double>(unigram[pair.first]) / static_cast<double>(n_tokens);
    const double py = static_cast<double>(unigram[pair.second]) / static_cast<double>(n_tokens);
    double score = std::log(pxy / (px * py));
    if (opt.normalized) score = pxy >= 1.0 ? 1.0 : score / -std::log(pxy);
    cand.push_back({pair.first, pair.second, score, c});
  }
  std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.count != b.count) return a.count > b.count;
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  });
  if (cand.size() > opt.top_k) cand.resize(opt.top_k);
  return BigramTable(std::move(cand));
}

/// One greedy left-to-right pass: a pair in the table is emitted as
/// "first_second" and both positions are consumed.
inline TokenSeq apply_bigrams(const TokenSeq& tokens, const BigramTable& table) {
  TokenSeq out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i + 1 < tokens.size() && table.contains(tokens[i], tokens[i + 1])) {
      out.push_back(tokens[i] + "_" + tokens[i + 1]);
      ++i;
    } else {
      out.push_back(tokens[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Controlled-term mapping

class TermMapping {
 public:
  /// Adds surface -> tag. Re-adding the same pair is a no-op; mapping a term
  /// to a second tag is an error.
  void add(const std::string& term, const std::string& tag) {
    if (term.empty() || std::any_of(term.begin(), term.end(), [](char c) {
          return (c >= 'A' && c <= 'Z') || c == ' ' || c == '\t';
        }))
      throw ConfigError("term mapping: surface term must be lowercase: '" + term + "'");
    if (tag.empty() || !std::all_of(tag.begin(), tag.end(), [](char c) {
          return (c >= 'A' && c <= 'Z') || c == '_';
        }))
      throw ConfigError("term mapping: tag must be uppercase: '" + tag + "'");
    auto [it, inserted] = rules_.emplace(term, tag);
    if (!inserted && it->second != tag)
      throw ConfigError("term mapping: '" + term + "' mapped to both " + it->second + " and " +
                        tag);
  }

  const std::string* find(const std::string& term) const {
    auto it = rules_.find(term);
    return it == rules_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, std::string>& rules() const { return rules_; }
  std::size_t size() const { return rules_.size(); }

  /// Copy that also maps the stemmed form of every term (each underscore
  /// part stemmed), so it applies to normalized token streams.
  TermMapping with_stemmed_forms() const {
    TermMapping out = *this;
    PorterStemmer stem;
    for (const auto& [term, tag] : rules_) {
      std::string stemmed;
      std::size_t start = 0;
      while (true) {
        const auto us = term.find('_', start);
        const auto part = term.substr(start, us == std::string::npos ? us : us - start);
        if (!stemmed.empty()) stemmed += '_';
        stemmed += stem(part);
        if (us == std::string::npos) break;
        start = us + 1;
      }
      out.add(stemmed, tag);
    }
    return out;
  }

  void write_tsv(std::ostream& os) const {
    for (const auto& [term, tag] : rules_) os << term << '\t' << tag << '\n';
  }

  /// TSV: term TAB TAG; '#' starts a comment line.
  static TermMapping read_tsv(std::istream& is) {
    TermMapping m;
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw ConfigError("term mapping: missing TAB in '" + line + "'");
      m.add(line.substr(0, tab), line.substr(tab + 1));
    }
    return m;
  }

 private:
  std::map<std::string, std::string> rules_;
};

/// Bundled mapping (mirrors assets/term_mapping.tsv).
inline constexpr std::string_view kDefaultTermMappingTsv =
    R"(# Controlled-term mapping: lowercase surface term <TAB> uppercase tag.
# Multi-word terms use the underscore form produced by bigram joining.
# Surface forms are stemmed at load time, so inflections need not be listed.
mother	FAMILY
father	FAMILY
brother	FAMILY
sister	FAMILY
wife	FAMILY
husband	FAMILY
son	FAMILY
daughter	FAMILY
family	FAMILY
no	NEGEX
not	NEGEX
nor	NEGEX
without	NEGEX
absent	NEGEX
negative	NEGEX
none	NEGEX
suspicion	RISK
suspicious	RISK
probable	RISK
probably	RISK
possible	RISK
possibly	RISK
likely	RISK
concerning	RISK
worrisome	RISK
questionable	RISK
suggestive	RISK
increase	QUAL
increased	QUAL
invasive	QUAL
diffuse	QUAL
diffusely	QUAL
decreased	QUAL
enlarging	QUAL
growing	QUAL
new	QUAL
)";

inline TermMapping default_term_mapping() {
  std::istringstream is{std::string(kDefaultTermMappingTsv)};
  return TermMapping::read_tsv(is);
}

/// Replaces every mapped token by its tag; length is preserved.
inline TokenSeq map_dictionary(const TokenSeq& tokens, const TermMapping& mapping) {
  TokenSeq out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    const std::string* tag = mapping.find(t);
    out.push_back(tag ? *tag : t);
  }
  return out;
}

}  // namespace lirads
