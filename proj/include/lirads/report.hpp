#pragma once

// Report ingestion: section segmentation, liver-findings extraction and
// LI-RADS label extraction from templated impressions.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lirads/category.hpp"
#include "lirads/error.hpp"

namespace lirads {

struct Section {
  std::string name;
  std::string body;

  friend bool operator==(const Section&, const Section&) = default;
};

struct Report {
  std::string id;
  Date exam_date;
  std::vector<Section> sections;
  bool templated = false;
  std::optional<LiradsCategory> label;

  friend bool operator==(const Report&, const Report&) = default;

  /// Case-insensitive lookup by section name.
  const Section* find(std::string_view name) const;
  /// First section whose name starts with IMPRESSION or CONCLUSION.
  const Section* impression() const;
};

inline constexpr std::string_view kPreamble = "PREAMBLE";

namespace detail {

inline std::string to_upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline bool is_impression_name(std::string_view upper_name) {
  return upper_name.starts_with("IMPRESSION") || upper_name.starts_with("CONCLUSION");
}

struct Heading {
  std::size_t start;     // first character of the heading name
  std::size_t body_pos;  // first character after the colon
  std::string name;
};

// A heading is a run of uppercase words followed directly by ':' that
// starts a line, or follows a sentence terminator or another colon.
inline bool heading_may_start(std::string_view text, std::size_t i) {
  if (i == 0) return true;
  if (!is_space(text[i - 1])) return false;
  std::size_t j = i;
  while (j > 0 && (text[j - 1] == ' ' || text[j - 1] == '\t')) --j;
  if (j == 0) return true;
  const char prev = text[j - 1];
  return prev == '\n' || prev == '\r' || prev == '.' || prev == '!' || prev == '?' ||
         prev == ':' || prev == ';';
}

inline std::vector<Heading> find_headings(std::string_view text) {
  std::vector<Heading> out;
  auto is_upper = [](char c) { return c >= 'A' && c <= 'Z'; };
  auto is_name_char = [&](char c) {
    return is_upper(c) || (c >= '0' && c <= '9') || c == ' ' || c == '/' || c == '&' ||
           c == '(' || c == ')';
  };
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_upper(text[i]) || !heading_may_start(text, i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_name_char(text[j]) && j - i < 48) ++j;
    const bool colon = j < text.size() && text[j] == ':';
    const std::string_view name = text.substr(i, j - i);
    const auto letters = std::count_if(name.begin(), name.end(), is_upper);
    if (colon && letters >= 2 && text[j - 1] != ' ') {
      // Collapse internal whitespace runs.
      std::string clean;
      for (char c : name) {
        if (c == ' ' && !clean.empty() && clean.back() == ' ') continue;
        clean.push_back(c);
      }
      out.push_back({i, j + 1, std::move(clean)});
      i = j + 1;
    } else {
      // Skip the rest of this word so its interior is never a start.
      while (i < text.size() && !is_space(text[i])) ++i;
    }
  }
  return out;
}

inline const std::regex& lirads_pattern() {
  static const std::regex re(
      R"((?:us[\s-]*)?li[\s-]?rads[\s:-]*(?:category[\s:-]*)?(?:lr[\s-]*)?([0-9]+))",
      std::regex::icase | std::regex::optimize);
  return re;
}

/// Digits of the last LI-RADS statement in text, if any.
inline std::optional<int> last_lirads_number(std::string_view text) {
  std::optional<int> last;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), lirads_pattern());
       it != std::sregex_iterator(); ++it) {
    const std::string digits = (*it)[1].str();
    last = digits.size() > 3 ? 1000 : std::stoi(digits);
  }
  return last;
}

}  // namespace detail

inline const Section* Report::find(std::string_view name) const {
  const std::string want = detail::to_upper(name);
  for (const auto& s : sections)
    if (detail::to_upper(s.name) == want) return &s;
  return nullptr;
}

inline const Section* Report::impression() const {
  for (const auto& s : sections)
    if (detail::is_impression_name(detail::to_upper(s.name))) return &s;
  return nullptr;
}

/// Splits raw report text into named sections. Headings are UPPERCASE
/// words terminated by a colon; text before the first heading goes into
/// PREAMBLE. Repeated headings (after case folding) are merged.
inline Report parse_report(std::string_view raw, std::string id, Date exam_date) {
  if (detail::trim(raw).empty()) throw DataError("empty report");

  Report r;
  r.id = std::move(id);
  r.exam_date = exam_date;

  auto add = [&](std::string name, std::string_view body) {
    body = detail::trim(body);
    const std::string key = detail::to_upper(name);
    for (auto& s : r.sections) {
      if (detail::to_upper(s.name) == key) {
        if (!body.empty()) {
          if (!s.body.empty()) s.body += "\n";
          s.body += body;
        }
        return;
      }
    }
    r.sections.push_back({std::move(name), std::string(body)});
  };

  const auto headings = detail::find_headings(raw);
  const std::size_t first = headings.empty() ? raw.size() : headings.front().start;
  if (!detail::trim(raw.substr(0, first)).empty())
    add(std::string(kPreamble), raw.substr(0, first));
  for (std::size_t h = 0; h < headings.size(); ++h) {
    const std::size_t end = h + 1 < headings.size() ? headings[h + 1].start : raw.size();
    add(headings[h].name, raw.substr(headings[h].body_pos, end - headings[h].body_pos));
  }

  if (const Section* imp = r.impression())
    r.templated = detail::last_lirads_number(imp->body).has_value();
  return r;
}

/// Reads the recorded LI-RADS category from the impression section only.
/// The last statement wins; returns nullopt when there is none.
inline std::optional<LiradsCategory> extract_lirads_label(const Report& report) {
  const Section* imp = report.impression();
  if (imp == nullptr) return std::nullopt;
  const auto n = detail::last_lirads_number(imp->body);
  if (!n) return std::nullopt;
  return category_from_number(*n);
}

/// Word lists driving the liver segmenter. All matching is case-insensitive
/// and anchored at word starts (so "hepatic" also matches "hepatic's").
struct LiverSegmenterConfig {
  std::vector<std::string> cue_words{"liver", "hepatic", "lobe", "segment", "portal", "biliary"};
  std::vector<std::string> liver_headings{"LIVER", "HEPATIC"};
  std::vector<std::string> lesion_words{"lesion", "mass", "nodule", "focus", "cyst",
                                        "observation", "hemangioma"};
  std::vector<std::string> anaphora{"it", "this", "these", "which", "the lesion", "the mass",
                                    "the nodule", "the focus", "the cyst"};
  std::vector<std::string> skipped_sections{"EXAM",       "EXAMINATION", "HISTORY",
                                            "CLINICAL HISTORY", "INDICATION",
                                            "CLINICAL INDICATION", "TECHNIQUE",
                                            "COMPARISON", "REASON FOR EXAM"};
};

namespace detail {

inline std::vector<std::string_view> split_sentences(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    auto s = trim(text.substr(start, end - start));
    if (!s.empty()) out.push_back(s);
    start = end;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      flush(i + 1);
    } else if (c == '.' || c == '!' || c == '?' || c == ';') {
      if (i + 1 == text.size() || is_space(text[i + 1])) flush(i + 1);
    }
  }
  flush(text.size());
  return out;
}

inline bool has_word_prefix(std::string_view lower_text, std::string_view word) {
  std::size_t pos = 0;
  while ((pos = lower_text.find(word, pos)) != std::string_view::npos) {
    const bool boundary =
        pos == 0 || !std::isalnum(static_cast<unsigned char>(lower_text[pos - 1]));
    if (boundary) return true;
    ++pos;
  }
  return false;
}

inline bool contains_any(std::string_view lower_text, const std::vector<std::string>& words) {
  return std::any_of(words.begin(), words.end(),
                     [&](const std::string& w) { return has_word_prefix(lower_text, w); });
}

inline bool starts_with_anaphor(std::string_view lower_sentence,
                                const std::vector<std::string>& anaphora) {
  for (const auto& a : anaphora) {
    if (lower_sentence.starts_with(a) &&
        (lower_sentence.size() == a.size() ||
         !std::isalnum(static_cast<unsigned char>(lower_sentence[a.size()]))))
      return true;
  }
  return false;
}

}  // namespace detail

/// Liver findings text: bodies of liver-headed sections plus sentences from
/// other findings sections that carry a liver cue. A lesion sentence (or an
/// anaphoric one) directly following an included sentence is carried along.
/// The impression section is never read. Returns "" when nothing matches.
inline std::string extract_liver_section(const Report& report,
                                         const LiverSegmenterConfig& cfg = {}) {
  std::vector<std::string> pieces;
  for (const auto& section : report.sections) {
    const std::string name = detail::to_upper(section.name);
    if (detail::is_impression_name(name)) continue;
    if (std::find(cfg.skipped_sections.begin(), cfg.skipped_sections.end(), name) !=
        cfg.skipped_sections.end())
      continue;

    const bool liver_heading =
        std::any_of(cfg.liver_headings.begin(), cfg.liver_headings.end(),
                    [&](const std::string& h) { return name.find(h) != std::string::npos; });
    if (liver_heading) {
      const auto body = detail::trim(section.body);
      if (!body.empty()) pieces.emplace_back(body);
      continue;
    }

    bool previous_included = false;
    for (const auto sentence : detail::split_sentences(section.body)) {
      const std::string lower = detail::to_lower(sentence);
      bool include = detail::contains_any(lower, cfg.cue_words);
      if (!include && previous_included)
        include = detail::contains_any(lower, cfg.lesion_words) ||
                  detail::starts_with_anaphor(lower, cfg.anaphora);
      if (include) pieces.emplace_back(sentence);
      previous_included = include;
    }
  }

  std::string out;
  for (const auto& p : pieces) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report JSONL

inline nlohmann::ordered_json report_to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["exam_date"] = r.exam_date.iso();
  auto sections = nlohmann::ordered_json::array();
  for (const auto& s : r.sections) {
    nlohmann::ordered_json js;
    js["name"] = s.name;
    js["body"] = s.body;
    sections.push_back(std::move(js));
  }
  j["sections"] = std::move(sections);
  j["templated"] = r.templated;
  if (r.label)
    j["label"] = category_number(*r.label);
  else
    j["label"] = nullptr;
  return j;
}

inline Report report_from_json(const nlohmann::json& j) {
  try {
    Report r;
    r.id = j.at("id").get<std::string>();
    r.exam_date = Date::parse_iso(j.at("exam_date").get<std::string>());
    for (const auto& s : j.at("sections"))
      r.sections.push_back({s.at("name").get<std::string>(), s.at("body").get<std::string>()});
    r.templated = j.at("templated").get<bool>();
    const auto& label = j.at("label");
    if (!label.is_null()) r.label = category_from_number(label.get<int>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report record: ") + e.what());
  }
}

inline std::string report_to_jsonl_line(const Report& r) { return report_to_json(r).dump(); }

inline void write_reports_jsonl(std::ostream& os, const std::vector<Report>& reports) {
  for (const auto& r : reports) os << report_to_jsonl_line(r) << '\n';
}

inline std::vector<Report> read_reports_jsonl(std::istream& is) {
  std::vector<Report> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(report_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<Report> read_reports_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_reports_jsonl(in);
}

}  // namespace lirads
