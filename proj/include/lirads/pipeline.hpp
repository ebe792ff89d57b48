#pragma once

// End-to-end training and inference, the key=value config format and the
// on-disk model bundle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "lirads/classifiers.hpp"
#include "lirads/embeddings.hpp"
#include "lirads/error.hpp"
#include "lirads/evaluation.hpp"
#include "lirads/hash.hpp"
#include "lirads/lexicon.hpp"
#include "lirads/measure_parser.hpp"
#include "lirads/porter_stemmer.hpp"
#include "lirads/report.hpp"
#include "lirads/stopwords.hpp"
#include "lirads/synth.hpp"
#include "lirads/text_normalizer.hpp"

namespace lirads {

// ---------------------------------------------------------------------------
// Config

struct PipelineConfig {
  // normalizer
  std::size_t min_count = 50;
  BigramOptions bigrams;
  std::string stopwords_path;     // empty: bundled list
  std::string term_mapping_path;  // empty: bundled mapping
  std::string removal_path;       // optional extra removal list

  // embeddings
  CbowParams cbow;
  std::size_t vocab_cap = 2000;
  std::size_t vocab_min_count = 50;
  std::vector<std::string> lexicon_roots = default_lexicon_roots();
  double synonym_threshold = 0.80;
  std::size_t synonym_k = 20;

  // classifiers
  EnsembleParams ensemble;
  double validation_fraction = 0.1;
  std::uint64_t split_seed = 11;

  // measurement parser
  bool literal_measurements = false;

  // inference / evaluation
  double band_low = 0.5;
  double band_high = 0.9;
  double low_coverage = 0.5;
  int infer_threads = 1;

  // synthetic corpus
  SynthConfig synth;

  /// Single-threaded embedding training; required for reproducible bundles.
  bool deterministic = true;

  void validate() const {
    if (min_count < 1 || vocab_min_count < 1) throw ConfigError("config: counts must be positive");
    if (bigrams.min_count < 1 || bigrams.top_k < 1)
      throw ConfigError("config: bigram settings must be positive");
    if (vocab_cap < 2) throw ConfigError("config: embedding.cap must be >= 2");
    cbow.validate();
    if (!(synonym_threshold > 0.0) || synonym_k < 1)
      throw ConfigError("config: synonym settings must be positive");
    if (ensemble.smote_k < 1) throw ConfigError("config: smote.k must be >= 1");
    if (!(ensemble.logreg.lambda >= 0.0) || ensemble.logreg.epochs < 1 ||
        !(ensemble.logreg.tol > 0.0))
      throw ConfigError("config: bad logistic regression settings");
    if (ensemble.tree.max_depth < 1 || ensemble.tree.min_leaf < 1)
      throw ConfigError("config: bad tree settings");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
      throw ConfigError("config: split.validation_fraction must lie in [0, 1)");
    if (!(band_low >= 0.0 && band_low <= band_high && band_high <= 1.0))
      throw ConfigError("config: bands require 0 <= low <= high <= 1");
    if (infer_threads < 1) throw ConfigError("config: infer.threads must be >= 1");
    synth.validate();
  }

  CbowParams effective_cbow() const {
    CbowParams p = cbow;
    if (deterministic) p.threads = 1;
    return p;
  }
};

namespace config_detail {

inline std::string trim(std::string_view s) { return std::string(detail::trim(s)); }

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out{};
  if constexpr (std::is_unsigned_v<T>) {
    if (!v.empty() && v[0] == '-') throw ConfigError("config: " + key + " must be non-negative");
  }
  if (!(is >> out) || !(is >> std::ws).eof())
    throw ConfigError("config: bad value for " + key + ": " + v);
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: bad boolean for " + key + ": " + v);
}

}  // namespace config_detail

/// Applies one key=value setting. Relative asset paths resolve against `base`.
inline void apply_config_setting(PipelineConfig& c, const std::string& key,
                                 const std::string& value,
                                 const std::filesystem::path& base = {}) {
  using namespace config_detail;
  auto num = [&]<typename T>(T& field) { field = parse_number<T>(key, value); };
  auto path = [&](std::string& field) {
    std::filesystem::path p(value);
    field = (p.is_relative() && !base.empty()) ? (base / p).lexically_normal().string() : value;
  };

  if (key == "normalizer.min_count") num(c.min_count);
  else if (key == "bigram.min_count") num(c.bigrams.min_count);
  else if (key == "bigram.top_k") num(c.bigrams.top_k);
  else if (key == "bigram.normalized") c.bigrams.normalized = parse_bool(key, value);
  else if (key == "assets.stopwords") path(c.stopwords_path);
  else if (key == "assets.term_mapping") path(c.term_mapping_path);
  else if (key == "assets.removal") path(c.removal_path);
  else if (key == "embedding.dim") num(c.cbow.dim);
  else if (key == "embedding.window") num(c.cbow.window);
  else if (key == "embedding.negatives") num(c.cbow.negatives);
  else if (key == "embedding.epochs") num(c.cbow.epochs);
  else if (key == "embedding.lr0") num(c.cbow.lr0);
  else if (key == "embedding.noise_exponent") num(c.cbow.noise_exponent);
  else if (key == "embedding.seed") num(c.cbow.seed);
  else if (key == "embedding.threads") num(c.cbow.threads);
  else if (key == "embedding.cap") num(c.vocab_cap);
  else if (key == "embedding.min_count") num(c.vocab_min_count);
  else if (key == "lexicon.roots") c.lexicon_roots = split_list(value);
  else if (key == "synonym.threshold") num(c.synonym_threshold);
  else if (key == "synonym.k") num(c.synonym_k);
  else if (key == "smote.k") num(c.ensemble.smote_k);
  else if (key == "smote.seed") num(c.ensemble.smote_seed);
  else if (key == "logreg.lambda") num(c.ensemble.logreg.lambda);
  else if (key == "logreg.epochs") num(c.ensemble.logreg.epochs);
  else if (key == "logreg.tol") num(c.ensemble.logreg.tol);
  else if (key == "logreg.seed") num(c.ensemble.logreg.seed);
  else if (key == "tree.max_depth") num(c.ensemble.tree.max_depth);
  else if (key == "tree.min_leaf") num(c.ensemble.tree.min_leaf);
  else if (key == "split.validation_fraction") num(c.validation_fraction);
  else if (key == "split.seed") num(c.split_seed);
  else if (key == "measure.literal") c.literal_measurements = parse_bool(key, value);
  else if (key == "bands.low") num(c.band_low);
  else if (key == "bands.high") num(c.band_high);
  else if (key == "infer.low_coverage") num(c.low_coverage);
  else if (key == "infer.threads") num(c.infer_threads);
  else if (key == "synth.n_reports") num(c.synth.n_reports);
  else if (key == "synth.legacy_fraction") num(c.synth.legacy_fraction);
  else if (key == "synth.seed") num(c.synth.seed);
  else if (key == "synth.weights") {
    const auto parts = split_list(value);
    if (parts.size() != kNumCategories) throw ConfigError("config: synth.weights needs 3 values");
    for (std::size_t i = 0; i < kNumCategories; ++i)
      c.synth.category_weights[i] = parse_number<double>(key, parts[i]);
  } else if (key == "mode.deterministic") c.deterministic = parse_bool(key, value);
  else throw ConfigError("config: unknown key " + key);
}

/// key = value lines; '#' starts a comment.
inline PipelineConfig parse_config(std::istream& is, const std::filesystem::path& base = {}) {
  PipelineConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = config_detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    apply_config_setting(c, config_detail::trim(t.substr(0, eq)),
                         config_detail::trim(t.substr(eq + 1)), base);
  }
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  PipelineConfig c = parse_config(in, std::filesystem::path(path).parent_path());
  return c;
}

// ---------------------------------------------------------------------------
// Normalization assets

struct NormalizerAssets {
  std::unordered_set<std::string> stopwords;
  std::unordered_set<std::string> removal;
  TermMapping mapping;          // as loaded
  TermMapping stemmed_mapping;  // with stemmed forms, applied to token streams

  /// Hash of the canonical (sorted) stop-word list.
  std::string stopwords_hash() const { return hash_set(stopwords); }
  std::string removal_hash() const { return hash_set(removal); }
  std::string term_mapping_hash() const {
    std::ostringstream os;
    mapping.write_tsv(os);
    return hash_text(os.str());
  }

 private:
  static std::string hash_set(const std::unordered_set<std::string>& s) {
    std::vector<std::string> v(s.begin(), s.end());
    std::sort(v.begin(), v.end());
    std::string joined;
    for (const auto& w : v) joined += w + '\n';
    return hash_text(joined);
  }
};

inline std::unordered_set<std::string> read_word_list(const std::string& path) {
  std::istringstream is(read_file(path));
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    const std::string t = config_detail::trim(line);
    if (!t.empty() && t[0] != '#') out.insert(t);
  }
  return out;
}

inline NormalizerAssets load_assets(const PipelineConfig& c) {
  NormalizerAssets a;
  if (c.stopwords_path.empty()) {
    a.stopwords = default_stopwords();
  } else {
    a.stopwords = read_word_list(c.stopwords_path);
  }
  if (!c.removal_path.empty()) a.removal = read_word_list(c.removal_path);
  if (c.term_mapping_path.empty()) {
    a.mapping = default_term_mapping();
  } else {
    std::istringstream is(read_file(c.term_mapping_path));
    a.mapping = TermMapping::read_tsv(is);
  }
  a.stemmed_mapping = a.mapping.with_stemmed_forms();
  return a;
}

/// Normalizes a lexicon term (words joined by '_', '-' or space) the way
/// corpus tokens are normalized: each word stemmed, joined by '_'.
inline std::string normalize_lexicon_term(std::string_view term) {
  std::string out;
  std::string word;
  PorterStemmer stem;
  auto flush = [&] {
    if (word.empty()) return;
    if (!out.empty()) out += '_';
    out += stem(word);
    word.clear();
  };
  for (char ch : term) {
    if (ch == '_' || ch == '-' || ch == ' ')
      flush();
    else
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  flush();
  return out;
}

// ---------------------------------------------------------------------------
// Trained pipeline

struct TrainedPipeline {
  std::set<std::string> kept_unigrams;
  BigramTable bigrams;
  Vocabulary vocab;
  EmbeddingModel embedding;
  std::vector<std::string> lexicon_roots;  // normalized
  SynonymMap synonyms;
  EnsembleModel ensemble;
  // Fingerprints of the normalization assets used in training.
  std::string stopwords_hash;
  std::string removal_hash;
  std::string term_mapping_hash;
  bool literal_measurements = false;
};

struct ReportFeatures {
  std::string liver_text;
  TokenSeq tokens;  // after unigram filter, bigrams and dictionary mapping
  LesionFeatures lesion;
};

struct ReportPrediction {
  std::string id;
  Prediction prediction;
  double coverage = 0.0;
  bool low_coverage = false;
  LesionFeatures lesion;
};

inline MeasureOptions measure_options(bool literal) {
  MeasureOptions o;
  o.literal = literal;
  return o;
}

/// Rounds every entry to what the embedding file stores (9 significant
/// digits), so training and inference read identical vectors.
inline void round_to_file_precision(Matrix& m) {
  char buf[40];
  for (auto& v : m.data()) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    v = std::strtod(buf, nullptr);
  }
}

/// Liver text -> tokens: normalize, map single terms, drop the unigrams
/// training filtered out, join bigrams, map joined terms.
inline TokenSeq pipeline_tokens(const std::string& liver_text, const TextNormalizer& normalizer,
                                const TrainedPipeline& p, const NormalizerAssets& assets) {
  TokenSeq raw = map_dictionary(normalizer(liver_text), assets.stemmed_mapping);
  TokenSeq kept;
  kept.reserve(raw.size());
  for (auto& t : raw)
    if (is_tag_token(t) || p.kept_unigrams.count(t)) kept.push_back(std::move(t));
  return map_dictionary(apply_bigrams(kept, p.bigrams), assets.stemmed_mapping);
}

/// Embedding input for one token stream: lexicon normalization, then averaging.
inline DocEmbedding pipeline_embedding(const TokenSeq& tokens, const TrainedPipeline& p) {
  return embed_document(normalize_with_lexicon(tokens, p.synonyms), p.embedding, p.vocab);
}

inline std::array<double, 2> lesion_vector(const LesionFeatures& f) {
  return {static_cast<double>(f.lesion_count), f.max_long_axis_mm};
}

/// Deterministic validation membership from the report id.
inline bool in_validation_split(const std::string& id, std::uint64_t seed, double fraction) {
  const std::uint64_t h = mix_seed(seed, fnv1a64(id));
  return static_cast<double>(h >> 11) * 0x1.0p-53 < fraction;
}

/// Runs `f`, prefixing any pipeline error with the stage name.
template <typename F>
auto run_stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(name) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(name) + ": " + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(std::string(name) + ": " + e.what());
  }
}

struct TrainReport {
  std::size_t n_reports = 0;
  std::size_t n_labeled = 0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t corpus_tokens = 0;
  std::vector<std::string> warnings;
  std::optional<double> val_f1_embed;
  std::optional<double> val_f1_lesion;
  std::optional<ConfusionMatrix> val_confusion;  // ensemble on the validation split
  std::vector<double> cbow_epoch_loss;
};

/// segment -> normalize -> mapping -> filter -> bigrams -> mapping -> vocabulary ->
/// CBOW -> synonyms -> lexicon normalization -> document vectors + lesion
/// features -> SMOTE -> base classifiers -> ensemble.
///
/// Embeddings are trained on every report; the classifiers on templated
/// reports whose impression carries a category.
/// Output of the unsupervised half of training: everything up to and
/// including the synonym map, plus the per-report intermediate texts.
struct TextStage {
  TrainedPipeline pipeline;
  std::vector<std::string> liver;
  std::vector<TokenSeq> tokens;
};

inline TextStage train_text_stage(const std::vector<Report>& reports, const PipelineConfig& cfg,
                                  const NormalizerAssets& assets, TrainReport& rep) {
  cfg.validate();
  if (reports.empty()) throw DataError("empty corpus");
  rep.n_reports = reports.size();

  TextStage stage;
  TrainedPipeline& p = stage.pipeline;
  auto& liver = stage.liver;
  auto& tokens = stage.tokens;
  p.stopwords_hash = assets.stopwords_hash();
  p.removal_hash = assets.removal_hash();
  p.term_mapping_hash = assets.term_mapping_hash();
  p.literal_measurements = cfg.literal_measurements;
  const TextNormalizer normalizer(assets.stopwords, assets.removal);

  liver.resize(reports.size());
  tokens.resize(reports.size());
  run_stage("segment", [&] {
    for (std::size_t i = 0; i < reports.size(); ++i) liver[i] = extract_liver_section(reports[i]);
  });
  run_stage("normalize", [&] {
    for (std::size_t i = 0; i < reports.size(); ++i)
      tokens[i] = map_dictionary(normalizer(liver[i]), assets.stemmed_mapping);
    tokens = filter_low_frequency(tokens, cfg.min_count);
    for (const auto& seq : tokens)
      for (const auto& t : seq)
        if (!is_tag_token(t)) p.kept_unigrams.insert(t);
  });
  run_stage("bigrams", [&] {
    p.bigrams = learn_bigrams(tokens, cfg.bigrams);
    for (auto& seq : tokens) seq = map_dictionary(apply_bigrams(seq, p.bigrams), assets.stemmed_mapping);
  });
  for (const auto& seq : tokens) rep.corpus_tokens += seq.size();
  run_stage("vocabulary",
            [&] { p.vocab = build_vocabulary(tokens, cfg.vocab_cap, cfg.vocab_min_count); });
  run_stage("embedding", [&] {
    CbowStats stats;
    p.embedding = train_cbow(tokens, p.vocab, cfg.effective_cbow(), &stats);
    round_to_file_precision(p.embedding.w_in);
    round_to_file_precision(p.embedding.w_out);
    rep.cbow_epoch_loss = stats.epoch_loss;
  });
  run_stage("synonyms", [&] {
    p.lexicon_roots.clear();
    for (const auto& r : cfg.lexicon_roots) {
      const std::string n = normalize_lexicon_term(r);
      if (!n.empty() && std::find(p.lexicon_roots.begin(), p.lexicon_roots.end(), n) ==
                            p.lexicon_roots.end())
        p.lexicon_roots.push_back(n);
    }
    auto d = derive_lexicon_synonyms(p.embedding, p.vocab, p.lexicon_roots,
                                     cfg.synonym_threshold, cfg.synonym_k);
    p.synonyms = std::move(d.map);
    rep.warnings.insert(rep.warnings.end(), d.warnings.begin(), d.warnings.end());
  });
  return stage;
}

inline TrainedPipeline train_pipeline(const std::vector<Report>& reports, const PipelineConfig& cfg,
                                      const NormalizerAssets& assets, TrainReport* info = nullptr) {
  TrainReport local;
  TrainReport& rep = info ? *info : local;
  auto stage = train_text_stage(reports, cfg, assets, rep);
  TrainedPipeline p = std::move(stage.pipeline);
  const auto& liver = stage.liver;
  const auto& tokens = stage.tokens;

  std::vector<EnsembleSample> train, val;
  run_stage("features", [&] {
    const auto mopt = measure_options(cfg.literal_measurements);
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (!reports[i].templated) continue;
      const auto label = extract_lirads_label(reports[i]);
      if (!label) continue;
      EnsembleSample s;
      s.embed = pipeline_embedding(tokens[i], p).vector;
      s.lesion = lesion_vector(lesion_features(liver[i], mopt));
      s.label = *label;
      (in_validation_split(reports[i].id, cfg.split_seed, cfg.validation_fraction) ? val : train)
          .push_back(std::move(s));
    }
    rep.n_labeled = train.size() + val.size();
    rep.n_train = train.size();
    rep.n_val = val.size();
    if (rep.n_labeled == 0) throw DataError("no labeled reports");
  });
  run_stage("classifiers", [&] {
    auto fit = fit_ensemble(train, val, cfg.ensemble);
    p.ensemble = std::move(fit.model);
    rep.val_f1_embed = fit.val_f1_embed;
    rep.val_f1_lesion = fit.val_f1_lesion;
    if (!val.empty()) {
      std::vector<LiradsCategory> truth, pred;
      for (const auto& s : val) {
        truth.push_back(s.label);
        pred.push_back(ensemble_predict(p.ensemble, s.embed, s.lesion).argmax);
      }
      rep.val_confusion = confusion(truth, pred);
    }
  });
  return p;
}

inline ReportPrediction predict_report(const Report& r, const TrainedPipeline& p,
                                       const NormalizerAssets& assets, double low_coverage = 0.5) {
  const TextNormalizer normalizer(assets.stopwords, assets.removal);
  const std::string liver = extract_liver_section(r);
  const TokenSeq tokens = pipeline_tokens(liver, normalizer, p, assets);
  const DocEmbedding doc = pipeline_embedding(tokens, p);
  ReportPrediction out;
  out.id = r.id;
  out.lesion = lesion_features(liver, measure_options(p.literal_measurements));
  out.coverage = doc.coverage;
  out.low_coverage = doc.coverage < low_coverage;
  out.prediction = ensemble_predict(p.ensemble, doc.vector, lesion_vector(out.lesion));
  check_invariant(is_probability_vector(out.prediction.probs), "prediction is not a distribution");
  return out;
}

/// Predictions in input order; `threads` > 1 splits the reports into chunks.
inline std::vector<ReportPrediction> predict_reports(const std::vector<Report>& reports,
                                                     const TrainedPipeline& p,
                                                     const NormalizerAssets& assets,
                                                     double low_coverage = 0.5, int threads = 1) {
  std::vector<ReportPrediction> out(reports.size());
  const std::size_t n_threads =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(threads), reports.size()));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < reports.size(); ++i)
      out[i] = predict_report(reports[i], p, assets, low_coverage);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = reports.size() * t / n_threads;
             i < reports.size() * (t + 1) / n_threads; ++i)
          out[i] = predict_report(reports[i], p, assets, low_coverage);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Prediction JSONL

inline double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

inline nlohmann::ordered_json prediction_to_json(const ReportPrediction& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["probs"] = nlohmann::ordered_json::array();
  for (double v : r.prediction.probs) j["probs"].push_back(round3(v));
  j["argmax"] = category_number(r.prediction.argmax);
  j["coverage"] = round3(r.coverage);
  j["low_coverage"] = r.low_coverage;
  j["lesion_count"] = r.lesion.lesion_count;
  j["max_long_axis_mm"] = r.lesion.max_long_axis_mm;
  return j;
}

struct PredictionRecord {
  std::string id;
  Prediction prediction;
};

/// Reads prediction lines ("id", "probs", optional "argmax").
inline std::vector<PredictionRecord> read_predictions_jsonl(std::istream& is) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PredictionRecord r;
      r.id = j.at("id").get<std::string>();
      const auto& probs = j.at("probs");
      if (!probs.is_array() || probs.size() != kNumCategories)
        throw DataError("probs must have 3 entries");
      for (std::size_t c = 0; c < kNumCategories; ++c) r.prediction.probs[c] = probs[c].get<double>();
      r.prediction.argmax = j.contains("argmax")
                                ? category_from_number(j["argmax"].get<int>())
                                : argmax_category(r.prediction.probs);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// Ground truth by id from a JSONL file of reports ("label") or predictions ("argmax").
inline std::map<std::string, std::optional<LiradsCategory>> read_truth_jsonl(std::istream& is) {
  std::map<std::string, std::optional<LiradsCategory>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      std::optional<LiradsCategory> c;
      if (j.contains("label") && !j["label"].is_null())
        c = category_from_number(j["label"].get<int>());
      else if (j.contains("argmax") && !j["argmax"].is_null())
        c = category_from_number(j["argmax"].get<int>());
      out[j.at("id").get<std::string>()] = c;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// Joins predictions with truth on id; any prediction id without a labeled
/// truth record is an error.
inline ConfusionMatrix join_and_confuse(
    const std::vector<PredictionRecord>& preds,
    const std::map<std::string, std::optional<LiradsCategory>>& truth) {
  std::vector<LiradsCategory> yt, yp;
  std::vector<std::string> missing, unlabeled;
  for (const auto& p : preds) {
    auto it = truth.find(p.id);
    if (it == truth.end()) {
      missing.push_back(p.id);
    } else if (!it->second) {
      unlabeled.push_back(p.id);
    } else {
      yt.push_back(*it->second);
      yp.push_back(p.prediction.argmax);
    }
  }
  auto listing = [](const std::vector<std::string>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size() && i < 20; ++i) s += (i ? ", " : "") + ids[i];
    if (ids.size() > 20) s += ", ... (" + std::to_string(ids.size()) + " total)";
    return s;
  };
  if (!missing.empty()) throw DataError("ids missing from truth: " + listing(missing));
  if (!unlabeled.empty()) throw DataError("truth has no label for ids: " + listing(unlabeled));
  if (yt.empty()) throw DataError("no predictions to evaluate");
  return confusion(yt, yp);
}

// ---------------------------------------------------------------------------
// Bundle

namespace bundle_files {
inline constexpr const char* kManifest = "manifest.tsv";
inline constexpr const char* kEmbedding = "embedding.txt";
inline constexpr const char* kEmbeddingOut = "embedding_out.txt";
inline constexpr const char* kVocab = "vocab.tsv";
inline constexpr const char* kBigrams = "bigrams.tsv";
inline constexpr const char* kUnigrams = "unigrams.tsv";
inline constexpr const char* kSynonyms = "synonyms.tsv";
inline constexpr const char* kRoots = "lexicon_roots.txt";
inline constexpr const char* kLogreg = "logreg.txt";
inline constexpr const char* kTree = "tree.tsv";
inline constexpr const char* kWeights = "weights.tsv";
inline constexpr const char* kFormat = "lirads-bundle-1";
}  // namespace bundle_files

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

inline std::map<std::string, std::string> bundle_payload(const TrainedPipeline& p) {
  using namespace bundle_files;
  std::map<std::string, std::string> files;
  auto render = [](auto&& writer) {
    std::ostringstream os;
    writer(os);
    return os.str();
  };
  files[kEmbedding] = render([&](std::ostream& os) {
    write_embedding_matrix(os, p.vocab, p.embedding.w_in);
  });
  files[kEmbeddingOut] = render([&](std::ostream& os) {
    write_embedding_matrix(os, p.vocab, p.embedding.w_out);
  });
  files[kVocab] = render([&](std::ostream& os) { p.vocab.write_tsv(os); });
  files[kBigrams] = render([&](std::ostream& os) { p.bigrams.write_tsv(os); });
  files[kUnigrams] = render([&](std::ostream& os) {
    for (const auto& t : p.kept_unigrams) os << t << '\n';
  });
  files[kSynonyms] = render([&](std::ostream& os) { p.synonyms.write_tsv(os); });
  files[kRoots] = render([&](std::ostream& os) {
    for (const auto& r : p.lexicon_roots) os << r << '\n';
  });
  files[kLogreg] = render([&](std::ostream& os) { write_logreg(os, p.ensemble.embed_clf); });
  files[kTree] = render([&](std::ostream& os) { write_tree(os, p.ensemble.lesion_clf); });
  files[kWeights] = render([&](std::ostream& os) { write_weights(os, p.ensemble); });
  return files;
}

/// Writes every artifact plus a manifest of content hashes and the
/// fingerprints of the normalization assets.
inline void save_bundle(const TrainedPipeline& p, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create bundle directory " + dir.string());
  const auto files = bundle_payload(p);
  std::ostringstream manifest;
  manifest << "format\t" << bundle_files::kFormat << '\n'
           << "stopwords_hash\t" << p.stopwords_hash << '\n'
           << "removal_hash\t" << p.removal_hash << '\n'
           << "term_mapping_hash\t" << p.term_mapping_hash << '\n'
           << "measure_literal\t" << (p.literal_measurements ? 1 : 0) << '\n'
           << "embedding_epochs\t" << p.embedding.trained_epochs << '\n';
  for (const auto& [name, text] : files) {
    write_text_file(dir / name, text);
    manifest << "file:" << name << '\t' << hash_text(text) << '\n';
  }
  write_text_file(dir / bundle_files::kManifest, manifest.str());
}

inline std::map<std::string, std::string> read_manifest(const std::filesystem::path& dir) {
  std::istringstream is(read_file((dir / bundle_files::kManifest).string()));
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("manifest: malformed line");
    kv[line.substr(0, tab)] = line.substr(tab + 1);
  }
  if (kv["format"] != bundle_files::kFormat) throw DataError("manifest: unknown bundle format");
  return kv;
}

/// Loads a bundle and checks it against the current normalization assets.
/// Any hash disagreement raises "bundle/pipeline mismatch".
inline TrainedPipeline load_bundle(const std::filesystem::path& dir,
                                   const NormalizerAssets& assets) {
  using namespace bundle_files;
  auto kv = read_manifest(dir);
  auto mismatch = [](const std::string& what) {
    return DataError("bundle/pipeline mismatch: " + what);
  };
  if (kv["stopwords_hash"] != assets.stopwords_hash()) throw mismatch("stop-word list");
  if (kv["removal_hash"] != assets.removal_hash()) throw mismatch("removal list");
  if (kv["term_mapping_hash"] != assets.term_mapping_hash()) throw mismatch("term mapping");

  std::map<std::string, std::string> text;
  for (const char* name : {kEmbedding, kEmbeddingOut, kVocab, kBigrams, kUnigrams, kSynonyms,
                           kRoots, kLogreg, kTree, kWeights}) {
    const std::string content = read_file((dir / name).string());
    const auto it = kv.find(std::string("file:") + name);
    if (it == kv.end() || it->second != hash_text(content)) throw mismatch(name);
    text[name] = content;
  }

  TrainedPipeline p;
  p.stopwords_hash = kv["stopwords_hash"];
  p.removal_hash = kv["removal_hash"];
  p.term_mapping_hash = kv["term_mapping_hash"];
  p.literal_measurements = kv["measure_literal"] == "1";
  {
    std::istringstream is(text[kVocab]);
    p.vocab = Vocabulary::read_tsv(is);
  }
  auto load_matrix = [&](const char* name) {
    std::istringstream is(text[name]);
    auto f = read_embedding_matrix(is);
    if (f.tokens.size() != p.vocab.size()) throw mismatch(std::string(name) + " vs vocabulary");
    for (std::size_t i = 0; i < f.tokens.size(); ++i)
      if (f.tokens[i] != p.vocab.token(i)) throw mismatch(std::string(name) + " vs vocabulary");
    return std::move(f.matrix);
  };
  p.embedding.w_in = load_matrix(kEmbedding);
  p.embedding.w_out = load_matrix(kEmbeddingOut);
  p.embedding.trained_epochs = std::stoi(kv["embedding_epochs"].empty() ? "0" : kv["embedding_epochs"]);
  {
    std::istringstream is(text[kBigrams]);
    p.bigrams = BigramTable::read_tsv(is);
  }
  {
    std::istringstream is(text[kUnigrams]);
    std::string line;
    while (std::getline(is, line))
      if (!line.empty()) p.kept_unigrams.insert(line);
  }
  {
    std::istringstream is(text[kRoots]);
    std::string line;
    while (std::getline(is, line))
      if (!line.empty()) p.lexicon_roots.push_back(line);
    for (const auto& r : p.lexicon_roots) p.synonyms.add_root(r);
    std::istringstream ss(text[kSynonyms]);
    const auto stored = SynonymMap::read_tsv(ss);
    for (const auto& e : stored.entries())
      for (const auto& syn : e.synonyms) p.synonyms.add(e.root, syn);
  }
  {
    std::istringstream is(text[kLogreg]);
    p.ensemble.embed_clf = read_logreg(is);
  }
  {
    std::istringstream is(text[kTree]);
    p.ensemble.lesion_clf = read_tree(is);
  }
  {
    std::istringstream is(text[kWeights]);
    std::tie(p.ensemble.w_embed, p.ensemble.w_lesion) = read_weights(is);
  }
  if (p.ensemble.embed_clf.dim() != p.embedding.dim()) throw mismatch("classifier width");
  if (p.ensemble.lesion_clf.n_features != 2) throw mismatch("tree features");
  return p;
}

}  // namespace lirads
