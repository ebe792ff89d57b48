#pragma once

// Lesion measurement extraction from raw report text.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <ostream>
#include <regex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lirads {

struct MeasurementMention {
  std::vector<double> dims_mm;
  std::pair<std::size_t, std::size_t> span;  // [start, end) byte offsets
  bool prior_context = false;
  bool organ_context = false;

  double long_axis_mm() const {
    return dims_mm.empty() ? 0.0 : *std::max_element(dims_mm.begin(), dims_mm.end());
  }

  friend bool operator==(const MeasurementMention&, const MeasurementMention&) = default;
};

struct LesionFeatures {
  int lesion_count = 0;
  double max_long_axis_mm = 0.0;

  friend bool operator==(const LesionFeatures&, const LesionFeatures&) = default;
};

struct MeasureOptions {
  std::vector<std::string> prior_cues{"previously", "prior", "previous", "was"};
  std::vector<std::string> organ_cues{"liver length", "liver span", "spleen", "kidney", "aorta"};
  /// Keep prior-clause mentions in lesion_features (organ mentions are still dropped).
  bool literal = false;
};

namespace measure_detail {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

inline bool is_boundary(std::string_view text, std::size_t i) {
  const char c = text[i];
  if (c == ',' || c == ';' || c == '!' || c == '?' || c == '\n') return true;
  if (c == '.') return i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]));
  return false;
}

/// Clause containing [begin, end): from just after the preceding boundary
/// to just before the following one.
inline std::pair<std::size_t, std::size_t> clause_of(std::string_view text, std::size_t begin,
                                                     std::size_t end) {
  std::size_t lo = begin;
  while (lo > 0 && !is_boundary(text, lo - 1)) --lo;
  std::size_t hi = end;
  while (hi < text.size() && !is_boundary(text, hi)) ++hi;
  return {lo, hi};
}

/// Case-insensitive search for `cue` starting at a word boundary.
inline bool has_cue(std::string_view text, std::string_view cue, bool whole_word) {
  if (cue.empty() || cue.size() > text.size()) return false;
  for (std::size_t i = 0; i + cue.size() <= text.size(); ++i) {
    if (i > 0 && is_word_char(text[i - 1])) continue;
    bool eq = true;
    for (std::size_t k = 0; k < cue.size() && eq; ++k)
      eq = std::tolower(static_cast<unsigned char>(text[i + k])) ==
           std::tolower(static_cast<unsigned char>(cue[k]));
    if (!eq) continue;
    if (whole_word && i + cue.size() < text.size() && is_word_char(text[i + cue.size()])) continue;
    return true;
  }
  return false;
}

inline const std::regex& measurement_pattern() {
  static const std::regex re(
      R"(([0-9]+(?:\.[0-9]+)?)(?:\s*(?:x|X|\xC3\x97)\s*([0-9]+(?:\.[0-9]+)?)(?:\s*(?:x|X|\xC3\x97)\s*([0-9]+(?:\.[0-9]+)?))?)?\s?([cCmM][mM])(?![A-Za-z]))");
  return re;
}

}  // namespace measure_detail

/// All 1D/2D/3D measurements with an mm or cm unit, in text order, in mm.
inline std::vector<MeasurementMention> extract_measurements(std::string_view text,
                                                            const MeasureOptions& opt = {}) {
  using namespace measure_detail;
  std::vector<MeasurementMention> out;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), measurement_pattern());
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const std::size_t begin = static_cast<std::size_t>(m.position(0));
    const std::size_t end = begin + static_cast<std::size_t>(m.length(0));
    // The number must start a token: no digit/letter/'.' just before it, and
    // no "1,5 cm" style comma decimal.
    if (begin > 0) {
      const char p = s[begin - 1];
      if (is_word_char(p) || p == '.') continue;
      if (p == ',' && begin > 1 && std::isdigit(static_cast<unsigned char>(s[begin - 2]))) continue;
    }
    const char u = static_cast<char>(std::tolower(static_cast<unsigned char>(m.str(4)[0])));
    const double scale = u == 'c' ? 10.0 : 1.0;

    MeasurementMention mention;
    bool ok = true;
    for (int g = 1; g <= 3; ++g) {
      if (!m[g].matched) break;
      const std::string num = m.str(g);
      double v = 0.0;
      std::from_chars(num.data(), num.data() + num.size(), v);
      v *= scale;
      if (!(v > 0.0)) ok = false;
      mention.dims_mm.push_back(v);
    }
    if (!ok) continue;
    mention.span = {begin, end};

    const auto [clo, chi] = clause_of(text, begin, end);
    const std::string_view before = text.substr(clo, begin - clo);
    const std::string_view clause = text.substr(clo, chi - clo);
    for (const auto& cue : opt.prior_cues)
      if (has_cue(before, cue, true)) mention.prior_context = true;
    for (const auto& cue : opt.organ_cues)
      if (has_cue(clause, cue, false)) mention.organ_context = true;
    out.push_back(std::move(mention));
  }
  return out;
}

/// Count and largest dimension of the lesion mentions in `text`.
inline LesionFeatures lesion_features(std::string_view text, const MeasureOptions& opt = {}) {
  LesionFeatures f;
  for (const auto& m : extract_measurements(text, opt)) {
    if (m.organ_context) continue;
    if (m.prior_context && !opt.literal) continue;
    ++f.lesion_count;
    f.max_long_axis_mm = std::max(f.max_long_axis_mm, m.long_axis_mm());
  }
  return f;
}

/// Debug TSV: span_start, span_end, dims_mm (semicolon-joined), prior, organ.
inline void write_measurements_tsv(std::ostream& os, const std::vector<MeasurementMention>& ms) {
  char buf[40];
  for (const auto& m : ms) {
    os << m.span.first << '\t' << m.span.second << '\t';
    for (std::size_t i = 0; i < m.dims_mm.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.10g", m.dims_mm[i]);
      os << (i ? ";" : "") << buf;
    }
    os << '\t' << (m.prior_context ? 1 : 0) << '\t' << (m.organ_context ? 1 : 0) << '\n';
  }
}

}  // namespace lirads
