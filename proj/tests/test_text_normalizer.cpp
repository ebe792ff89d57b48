#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "test_util.hpp"

namespace lirads {
namespace {

using testing::data_path;
using testing::source_path;

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize_normalize("The liver is hyperechogenic"), (TokenSeq{"liver", "hyperechogen"}));
  EXPECT_EQ(tokenize_normalize(""), TokenSeq{});
  EXPECT_EQ(tokenize_normalize("3 lesions"), (TokenSeq{"three", "lesion"}));
}

TEST(Tokenize, Numbers) {
  EXPECT_EQ(tokenize_normalize("0 7 25 99"),
            (TokenSeq{"zero", "seven", "twenti", "five", "nineti", "nine"}));
  EXPECT_EQ(tokenize_normalize("100 1.2 3.45"), (TokenSeq{"NUM", "NUM", "NUM"}));
  EXPECT_EQ(tokenize_normalize("07"), (TokenSeq{"seven"}));
  EXPECT_EQ(tokenize_normalize("1.2x1.3cm"), (TokenSeq{"NUM", "x", "NUM", "cm"}));
}

TEST(Tokenize, StopWordsAndCase) {
  EXPECT_EQ(tokenize_normalize("There IS NO Lesion in THE Liver."),
            (TokenSeq{"no", "lesion", "liver"}));
}

TEST(Tokenize, NoEmptyOrWhitespaceTokens) {
  SynthConfig cfg;
  cfg.n_reports = 200;
  cfg.legacy_fraction = 0.5;
  for (const auto& r : generate_synthetic_corpus(cfg))
    for (const auto& s : r.sections)
      for (const auto& t : tokenize_normalize(s.body)) {
        EXPECT_FALSE(t.empty());
        EXPECT_EQ(t.find_first_of(" \t\n"), std::string::npos);
      }
}

// Porter stemming is not idempotent ("diffus" -> "diffu"), so a second pass
// may stem a token again. Everything else is a fixed point: no token is
// split, dropped or renumbered.
TEST(Tokenize, StableOnOwnOutputUpToRestemming) {
  SynthConfig cfg;
  cfg.n_reports = 200;
  cfg.category_weights = {0.2, 0.4, 0.4};
  cfg.legacy_fraction = 0.5;
  PorterStemmer stem;
  for (const auto& r : generate_synthetic_corpus(cfg)) {
    const auto once = tokenize_normalize(extract_liver_section(r));
    std::string joined;
    TokenSeq want;
    for (const auto& t : once) {
      joined += (t == kNumToken ? "1000" : t) + " ";
      want.push_back(t == kNumToken ? t : stem(t));
    }
    EXPECT_EQ(tokenize_normalize(joined), want) << r.id;
  }
}

TEST(Stemmer, FrozenGoldenStems) {
  std::ifstream in(data_path("stems.tsv"));
  ASSERT_TRUE(in) << "missing stems.tsv";
  PorterStemmer stem;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    ASSERT_NE(tab, std::string::npos);
    EXPECT_EQ(stem(line.substr(0, tab)), line.substr(tab + 1)) << line;
    ++n;
  }
  EXPECT_GT(n, 500u);
}

TEST(Stemmer, LexiconForms) {
  PorterStemmer stem;
  EXPECT_EQ(stem("hyperechogenic"), "hyperechogen");
  EXPECT_EQ(stem("hypoechogenicity"), "hypoechogen");
  EXPECT_EQ(stem("septations"), "septat");
  EXPECT_EQ(stem("multiloculated"), "multilocul");
}

TEST(Assets, StopwordFileMatchesBundledList) {
  std::ifstream in(source_path("assets/stopwords.txt"));
  ASSERT_TRUE(in);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') words.push_back(line);
  EXPECT_EQ(words, default_stopword_list());
}

TEST(Assets, TermMappingFileMatchesBundledMapping) {
  std::ifstream in(source_path("assets/term_mapping.tsv"));
  ASSERT_TRUE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), std::string(kDefaultTermMappingTsv));
}

std::vector<TokenSeq> repeat(const TokenSeq& seq, std::size_t times) {
  return std::vector<TokenSeq>(times, seq);
}

TEST(Bigrams, IllDefinedIsKept) {
  std::vector<TokenSeq> corpus = repeat({"ill", "defin", "margin"}, 60);
  const auto more = repeat({"lesion", "ill", "defin"}, 60);
  corpus.insert(corpus.end(), more.begin(), more.end());
  const auto more2 = repeat({"margin", "lesion", "round"}, 60);
  corpus.insert(corpus.end(), more2.begin(), more2.end());
  const auto t = learn_bigrams(corpus, {50, 1000, false});
  ASSERT_TRUE(t.contains("ill", "defin"));
  const auto* ill = t.find("ill", "defin");
  for (const auto& e : t.entries())
    if (e.count == ill->count) {
      EXPECT_LE(e.score, ill->score + 1e-12);
    }
}

TEST(Bigrams, ThresholdBoundary) {
  std::vector<TokenSeq> corpus = repeat({"a", "b"}, 50);
  const auto rare = repeat({"c", "d"}, 49);
  corpus.insert(corpus.end(), rare.begin(), rare.end());
  const auto t = learn_bigrams(corpus, {50, 1000, false});
  EXPECT_TRUE(t.contains("a", "b"));
  EXPECT_FALSE(t.contains("c", "d"));
}

TEST(Bigrams, EmptyCorpusIsAnError) {
  try {
    learn_bigrams({});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "empty corpus");
  }
}

TEST(Bigrams, IndependentStreamHasNearZeroPmi) {
  Rng rng(12345);
  TokenSeq seq;
  for (int i = 0; i < 100000; ++i) seq.push_back(rng.bernoulli(0.5) ? "x" : "y");
  const auto t = learn_bigrams({seq}, {1, 1000, false});
  ASSERT_EQ(t.size(), 4u);
  // Brute-force PMI from raw counts.
  std::map<std::string, double> uni;
  std::map<std::pair<std::string, std::string>, double> bi;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    uni[seq[i]] += 1;
    if (i + 1 < seq.size()) bi[{seq[i], seq[i + 1]}] += 1;
  }
  const double n = static_cast<double>(seq.size()), np = n - 1;
  for (const auto& e : t.entries()) {
    const double pmi = std::log((bi[{e.first, e.second}] / np) / ((uni[e.first] / n) * (uni[e.second] / n)));
    EXPECT_NEAR(e.score, pmi, 1e-12);
    EXPECT_LT(std::abs(e.score), 0.05);
  }
}

TEST(Bigrams, DirectionalCountsMatchBruteForce) {
  Rng rng(99);
  const std::vector<std::string> alphabet{"a", "b", "c", "d", "e"};
  TokenSeq seq;
  for (int i = 0; i < 1000; ++i) {
    // "a" is always followed by "b", and "b" is never followed by "a".
    if (!seq.empty() && seq.back() == "a") {
      seq.push_back("b");
      continue;
    }
    std::string t = rng.pick(alphabet);
    while (t == "b" || (!seq.empty() && seq.back() == "b" && t == "a")) t = rng.pick(alphabet);
    seq.push_back(t);
  }
  const auto t = learn_bigrams({seq}, {1, 1000, false});
  for (const auto& e : t.entries()) {
    std::size_t c = 0;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) c += seq[i] == e.first && seq[i + 1] == e.second;
    EXPECT_EQ(e.count, c) << e.first << " " << e.second;
  }
  EXPECT_TRUE(t.contains("a", "b"));
  EXPECT_FALSE(t.contains("b", "a"));
}

TEST(Bigrams, SizeOrderAndCountInvariants) {
  SynthConfig cfg;
  cfg.n_reports = 400;
  cfg.legacy_fraction = 0.5;
  std::vector<TokenSeq> corpus;
  for (const auto& r : generate_synthetic_corpus(cfg))
    corpus.push_back(tokenize_normalize(extract_liver_section(r)));
  const auto t = learn_bigrams(corpus, {20, 30, false});
  EXPECT_LE(t.size(), 30u);
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_GE(t.entries()[i].count, 20u);
    if (i > 0) {
      const auto& a = t.entries()[i - 1];
      const auto& b = t.entries()[i];
      EXPECT_TRUE(a.score > b.score ||
                  (a.score == b.score && (a.count > b.count ||
                                          (a.count == b.count && a.first + " " + a.second <=
                                                                     b.first + " " + b.second))));
    }
  }
}

TEST(Bigrams, EqualScoresAndCountsOrderLexicographically) {
  // Both pairs have the same PMI and count.
  std::vector<TokenSeq> corpus = repeat({"p", "q"}, 3);
  const auto r = repeat({"m", "n"}, 3);
  corpus.insert(corpus.end(), r.begin(), r.end());
  const auto t = learn_bigrams(corpus, {1, 10, false});
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.entries()[0].first, "m");
  EXPECT_EQ(t.entries()[1].first, "p");
}

TEST(Bigrams, TsvRoundTripSixDecimals) {
  const BigramTable t({{"ill", "defin", 5.123456789, 60}, {"thin", "septat", 4.5, 51}});
  std::ostringstream os;
  t.write_tsv(os);
  EXPECT_EQ(os.str(), "ill\tdefin\t5.123457\nthin\tseptat\t4.500000\n");
  std::istringstream is(os.str());
  const auto back = BigramTable::read_tsv(is);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(back.contains("thin", "septat"));
}

TEST(ApplyBigrams, Examples) {
  const BigramTable t({{"ill", "defined", 1.0, 50}});
  EXPECT_EQ(apply_bigrams({"ill", "defined", "margin"}, t), (TokenSeq{"ill_defined", "margin"}));
  const BigramTable ab({{"a", "b", 1.0, 50}, {"b", "c", 2.0, 50}});
  EXPECT_EQ(apply_bigrams({"a", "b", "c"}, ab), (TokenSeq{"a_b", "c"}));
  EXPECT_EQ(apply_bigrams({}, ab), TokenSeq{});
}

TEST(ApplyBigrams, LengthAndMergeCount) {
  const BigramTable t({{"a", "b", 1.0, 50}, {"b", "a", 1.0, 50}, {"c", "c", 1.0, 50}});
  Rng rng(5);
  const std::vector<std::string> alphabet{"a", "b", "c", "d"};
  for (int trial = 0; trial < 200; ++trial) {
    TokenSeq in;
    const int n = rng.between(0, 30);
    for (int i = 0; i < n; ++i) in.push_back(rng.pick(alphabet));
    const auto out = apply_bigrams(in, t);
    std::size_t merged = 0;
    for (const auto& tok : out) merged += tok.find('_') != std::string::npos;
    EXPECT_LE(out.size(), in.size());
    EXPECT_EQ(in.size() - out.size(), merged);
  }
}

TEST(MapDictionary, Examples) {
  const auto m = default_term_mapping();
  EXPECT_EQ(map_dictionary({"no", "lesion"}, m), (TokenSeq{"NEGEX", "lesion"}));
  EXPECT_EQ(map_dictionary({"probable", "hcc"}, m), (TokenSeq{"RISK", "hcc"}));
  const TokenSeq plain{"liver", "lesion", "segment"};
  EXPECT_EQ(map_dictionary(plain, m), plain);
}

TEST(MapDictionary, StemmedFormsAndMultiWordTerms) {
  TermMapping m = default_term_mapping();
  m.add("family_history", "FAMILY");
  const auto s = m.with_stemmed_forms();
  EXPECT_EQ(map_dictionary({"suspici", "famili_histori", "concern"}, s),
            (TokenSeq{"RISK", "FAMILY", "RISK"}));
}

TEST(MapDictionary, PreservesLength) {
  const auto m = default_term_mapping().with_stemmed_forms();
  SynthConfig cfg;
  cfg.n_reports = 100;
  cfg.legacy_fraction = 0.5;
  for (const auto& r : generate_synthetic_corpus(cfg)) {
    const auto toks = tokenize_normalize(extract_liver_section(r));
    EXPECT_EQ(map_dictionary(toks, m).size(), toks.size());
  }
}

TEST(TermMappingFile, Validation) {
  std::istringstream bad_tag("liver\tliver\n");
  EXPECT_THROW(TermMapping::read_tsv(bad_tag), ConfigError);
  std::istringstream dup("no\tNEGEX\nno\tRISK\n");
  EXPECT_THROW(TermMapping::read_tsv(dup), ConfigError);
  std::istringstream upper("Liver\tX\n");
  EXPECT_THROW(TermMapping::read_tsv(upper), ConfigError);
  std::istringstream ok("# comment\nabsent\tNEGEX\n");
  EXPECT_EQ(TermMapping::read_tsv(ok).size(), 1u);
}

TEST(FilterLowFrequency, Boundary) {
  std::vector<TokenSeq> corpus(50, TokenSeq{"kept"});
  for (int i = 0; i < 49; ++i) corpus[i].push_back("dropped");
  const auto out = filter_low_frequency(corpus, 50);
  for (const auto& seq : out) EXPECT_EQ(seq, TokenSeq{"kept"});
}

TEST(FilterLowFrequency, TrivialCases) {
  EXPECT_TRUE(filter_low_frequency({}, 50).empty());
  const std::vector<TokenSeq> same(60, TokenSeq{"liver"});
  EXPECT_EQ(filter_low_frequency(same, 50), same);
}

TEST(FilterLowFrequency, TagsAreExempt) {
  const std::vector<TokenSeq> corpus{{"RISK", "rare"}, {"NEGEX"}};
  EXPECT_EQ(filter_low_frequency(corpus, 50), (std::vector<TokenSeq>{{"RISK"}, {"NEGEX"}}));
}

}  // namespace
}  // namespace lirads
