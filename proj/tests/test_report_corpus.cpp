#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "test_util.hpp"

namespace lirads {
namespace {

const Date kDate{2017, 3, 14};

TEST(ParseReport, TemplatedReportHasTwoSections) {
  const auto r = parse_report("FINDINGS: liver normal. IMPRESSION: US LI-RADS Category: 1.", "a", kDate);
  ASSERT_EQ(r.sections.size(), 2u);
  EXPECT_EQ(r.sections[0].name, "FINDINGS");
  EXPECT_EQ(r.sections[0].body, "liver normal.");
  EXPECT_EQ(r.sections[1].name, "IMPRESSION");
  EXPECT_TRUE(r.templated);
}

TEST(ParseReport, NoHeadingsGoesToPreamble) {
  const auto r = parse_report("liver is unremarkable", "b", kDate);
  ASSERT_EQ(r.sections.size(), 1u);
  EXPECT_EQ(r.sections[0].name, "PREAMBLE");
  EXPECT_FALSE(r.templated);
}

TEST(ParseReport, EmptyInputIsAnError) {
  try {
    parse_report("", "c", kDate);
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "empty report");
  }
  EXPECT_THROW(parse_report("  \n ", "c", kDate), DataError);
}

TEST(ParseReport, SectionNamesUniqueAfterCaseFolding) {
  const auto r = parse_report("FINDINGS: one.\nLIVER: two.\nFINDINGS: three.", "d", kDate);
  std::vector<std::string> names;
  for (const auto& s : r.sections) names.push_back(detail::to_upper(s.name));
  std::sort(names.begin(), names.end());
  EXPECT_EQ(std::adjacent_find(names.begin(), names.end()), names.end());
  EXPECT_EQ(r.find("findings")->body, "one.\nthree.");
}

TEST(LiverSection, KeepsLengthAndLesionClauses) {
  const auto r = parse_report(
      "FINDINGS:\nLIVER: liver length: 14.2 cm. segment 5 lesion measures 7 x 6 x 7 mm.\n"
      "IMPRESSION: US LI-RADS Category: 2.",
      "e", kDate);
  const auto liver = extract_liver_section(r);
  EXPECT_NE(liver.find("liver length: 14.2 cm"), std::string::npos);
  EXPECT_NE(liver.find("segment 5 lesion"), std::string::npos);
  EXPECT_EQ(liver.find("LI-RADS"), std::string::npos);
}

TEST(LiverSection, KidneyOnlyIsEmpty) {
  const auto r = parse_report("FINDINGS:\nKIDNEYS: normal.", "f", kDate);
  EXPECT_EQ(extract_liver_section(r), "");
}

TEST(LiverSection, ImpressionIsNeverRead) {
  const auto r = parse_report(
      "FINDINGS: gallbladder normal.\nIMPRESSION: liver lesion in segment 4.", "g", kDate);
  EXPECT_EQ(extract_liver_section(r), "");
}

TEST(LiverSection, CueSentencesAndFollowingLesionSentence) {
  const auto r = parse_report(
      "FINDINGS: The gallbladder is normal. A mass is seen in the right hepatic lobe. "
      "It measures 2.1 cm. The spleen is normal.",
      "h", kDate);
  EXPECT_EQ(extract_liver_section(r),
            "A mass is seen in the right hepatic lobe. It measures 2.1 cm.");
}

TEST(Label, DirectMatch) {
  const auto r = parse_report("FINDINGS: x.\nIMPRESSION: US LI-RADS Category: 3", "i", kDate);
  EXPECT_EQ(extract_lirads_label(r), LiradsCategory::LR3);
}

TEST(Label, AbsentIsNone) {
  const auto r = parse_report("FINDINGS: x.\nIMPRESSION: normal liver.", "j", kDate);
  EXPECT_EQ(extract_lirads_label(r), std::nullopt);
  EXPECT_FALSE(r.templated);
}

TEST(Label, CaseAndFormatTolerance) {
  for (const char* imp : {"li-rads 2.", "LIRADS 2", "LI RADS category - 2", "US LI-RADS: LR-2"}) {
    const auto r = parse_report(std::string("FINDINGS: x.\nIMPRESSION: ") + imp, "k", kDate);
    EXPECT_EQ(extract_lirads_label(r), LiradsCategory::LR2) << imp;
  }
}

TEST(Label, LastMatchWins) {
  const auto r = parse_report(
      "FINDINGS: x.\nIMPRESSION: LI-RADS 2. Addendum: US LI-RADS Category: 3.", "l", kDate);
  EXPECT_EQ(extract_lirads_label(r), LiradsCategory::LR3);
}

TEST(Label, UnsupportedCategory) {
  const auto r = parse_report("FINDINGS: x.\nIMPRESSION: US LI-RADS Category: 4", "m", kDate);
  try {
    extract_lirads_label(r);
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "unsupported LI-RADS category");
  }
}

TEST(Label, FindingsMentionIsIgnored) {
  const auto r = parse_report("FINDINGS: LI-RADS 3 lesion.\nIMPRESSION: stable.", "n", kDate);
  EXPECT_EQ(extract_lirads_label(r), std::nullopt);
}

SynthConfig synth_cfg(std::size_t n, double legacy, std::uint64_t seed) {
  SynthConfig c;
  c.n_reports = n;
  c.category_weights = {0.8, 0.1, 0.1};
  c.legacy_fraction = legacy;
  c.seed = seed;
  return c;
}

std::string to_jsonl(const std::vector<Report>& rs) {
  std::ostringstream os;
  write_reports_jsonl(os, rs);
  return os.str();
}

TEST(Synth, TemplatedLabelsAreExtractable) {
  const auto rs = generate_synthetic_corpus(synth_cfg(100, 0.0, 7));
  ASSERT_EQ(rs.size(), 100u);
  for (const auto& r : rs) {
    EXPECT_TRUE(r.templated);
    EXPECT_EQ(extract_lirads_label(r), r.label);
  }
}

TEST(Synth, SameSeedIsByteIdentical) {
  EXPECT_EQ(to_jsonl(generate_synthetic_corpus(synth_cfg(200, 0.5, 7))),
            to_jsonl(generate_synthetic_corpus(synth_cfg(200, 0.5, 7))));
  EXPECT_NE(to_jsonl(generate_synthetic_corpus(synth_cfg(200, 0.5, 7))),
            to_jsonl(generate_synthetic_corpus(synth_cfg(200, 0.5, 8))));
}

TEST(Synth, GenerativeRulesHoldUnderTheMeasurementParser) {
  auto cfg = synth_cfg(2000, 0.5, 3);
  cfg.category_weights = {0.34, 0.33, 0.33};
  for (const auto& r : generate_synthetic_corpus(cfg)) {
    const auto liver = extract_liver_section(r);
    const auto f = lesion_features(liver);
    std::string lower = detail::to_lower(liver);
    bool suspicious = false;
    for (const auto& w : synth_suspicious_words()) suspicious |= lower.find(w) != std::string::npos;
    switch (*r.label) {
      case LiradsCategory::LR1:
        EXPECT_EQ(f.lesion_count, 0) << r.id;
        break;
      case LiradsCategory::LR2:
        EXPECT_GE(f.lesion_count, 1) << r.id;
        EXPECT_LE(f.lesion_count, 3) << r.id;
        EXPECT_LT(f.max_long_axis_mm, 10.0) << r.id;
        EXPECT_FALSE(suspicious) << r.id;
        break;
      case LiradsCategory::LR3:
        EXPECT_TRUE(f.max_long_axis_mm >= 10.0 || suspicious) << r.id;
        break;
    }
  }
}

TEST(Synth, LegacyReportsOmitTheCategoryLine) {
  for (const auto& r : generate_synthetic_corpus(synth_cfg(200, 1.0, 4))) {
    EXPECT_FALSE(r.templated);
    EXPECT_EQ(extract_lirads_label(r), std::nullopt);
    EXPECT_TRUE(r.label.has_value());
  }
}

TEST(Synth, LiverSectionNeverContainsImpression) {
  for (const auto& r : generate_synthetic_corpus(synth_cfg(500, 0.5, 5))) {
    const auto liver = extract_liver_section(r);
    const Section* imp = r.impression();
    ASSERT_NE(imp, nullptr);
    std::istringstream lines(imp->body);
    std::string line;
    while (std::getline(lines, line)) {
      const auto t = std::string(detail::trim(line));
      if (!t.empty()) {
        EXPECT_EQ(liver.find(t), std::string::npos) << r.id << ": " << t;
      }
    }
  }
}

TEST(Synth, CategoryFrequenciesMatchWeights) {
  // Chi-square goodness of fit, 2 degrees of freedom: p > 0.01 iff stat < 9.2103.
  auto cfg = synth_cfg(10000, 0.3, 21);
  cfg.category_weights = {0.6, 0.25, 0.15};
  std::array<double, 3> observed{};
  for (const auto& r : generate_synthetic_corpus(cfg)) observed[category_index(*r.label)] += 1.0;
  double chi2 = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double expected = cfg.category_weights[c] * 10000.0;
    chi2 += (observed[c] - expected) * (observed[c] - expected) / expected;
  }
  EXPECT_LT(chi2, 9.2103);
}

TEST(Synth, InvalidConfig) {
  auto cfg = synth_cfg(10, 0.0, 1);
  cfg.category_weights = {0.5, 0.5, 0.5};
  EXPECT_THROW(generate_synthetic_corpus(cfg), ConfigError);
  cfg = synth_cfg(0, 0.0, 1);
  EXPECT_THROW(generate_synthetic_corpus(cfg), ConfigError);
  cfg = synth_cfg(10, 1.5, 1);
  EXPECT_THROW(generate_synthetic_corpus(cfg), ConfigError);
}

TEST(Jsonl, RoundTrip) {
  auto rs = generate_synthetic_corpus(synth_cfg(300, 0.5, 9));
  rs.push_back(parse_report("liver is unremarkable", "unlabeled", kDate));
  std::istringstream is(to_jsonl(rs));
  EXPECT_EQ(read_reports_jsonl(is), rs);
}

TEST(Jsonl, MalformedLineNamesTheLine) {
  std::istringstream is("{\"id\":\"x\"}\n");
  try {
    read_reports_jsonl(is);
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
}

}  // namespace
}  // namespace lirads
