// lirads: train and apply the LI-RADS inference pipeline.
//
// Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 internal error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lirads/lirads.hpp"

namespace {

using namespace lirads;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;

  PipelineConfig load() const {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value: " + kv);
      apply_config_setting(c, std::string(detail::trim(kv.substr(0, eq))),
                           std::string(detail::trim(kv.substr(eq + 1))));
    }
    c.validate();
    return c;
  }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

void print_metrics(std::ostream& os, const char* title, const ConfusionMatrix& cm) {
  os << title << '\n';
  write_metrics_table(os, metrics(cm));
}

int cmd_synth(const Common& common, const std::string& out_path) {
  const auto cfg = common.load();
  const auto reports = generate_synthetic_corpus(cfg.synth);
  auto out = open_out(out_path);
  write_reports_jsonl(out, reports);
  std::cerr << "wrote " << reports.size() << " reports to " << out_path << '\n';
  return 0;
}

int cmd_train(const Common& common, const std::string& corpus, const std::string& bundle,
              const std::string& metrics_out) {
  const auto cfg = common.load();
  const auto assets = load_assets(cfg);
  const auto reports = read_reports_jsonl(corpus);
  TrainReport info;
  const auto p = train_pipeline(reports, cfg, assets, &info);
  save_bundle(p, bundle);

  std::cerr << "reports: " << info.n_reports << ", labeled: " << info.n_labeled
            << " (train " << info.n_train << ", validation " << info.n_val << ")\n"
            << "corpus tokens: " << info.corpus_tokens << ", vocabulary: " << p.vocab.size()
            << ", bigrams: " << p.bigrams.entries().size()
            << ", synonyms: " << p.synonyms.synonym_count() << '\n';
  for (const auto& w : info.warnings) std::cerr << "warning: " << w << '\n';

  char buf[160];
  std::snprintf(buf, sizeof buf, "ensemble weights: embed %.4f, lesion %.4f\n",
                p.ensemble.w_embed, p.ensemble.w_lesion);
  std::cout << buf;
  if (info.val_confusion) {
    std::snprintf(buf, sizeof buf, "validation macro-F1: embedding %.4f, lesion %.4f\n",
                  *info.val_f1_embed, *info.val_f1_lesion);
    std::cout << buf;
    print_metrics(std::cout, "validation (ensemble):", *info.val_confusion);
    if (!metrics_out.empty()) {
      auto out = open_out(metrics_out);
      out << metrics_to_json(*info.val_confusion, metrics(*info.val_confusion)).dump(2) << '\n';
    }
  } else {
    std::cout << "no validation split\n";
  }
  std::cerr << "bundle written to " << bundle << '\n';
  return 0;
}

int cmd_infer(const Common& common, const std::string& bundle, const std::string& corpus,
              const std::string& out_path) {
  const auto cfg = common.load();
  const auto assets = load_assets(cfg);
  const auto p = load_bundle(bundle, assets);
  const auto reports = read_reports_jsonl(corpus);
  const auto preds = predict_reports(reports, p, assets, cfg.low_coverage, cfg.infer_threads);
  auto out = open_out(out_path);
  for (const auto& r : preds) out << prediction_to_json(r).dump() << '\n';
  std::cerr << "wrote " << preds.size() << " predictions to " << out_path << '\n';
  return 0;
}

int cmd_evaluate(const std::string& predictions, const std::string& truth_path,
                 const std::string& out_path, bool table) {
  auto pin = open_in(predictions);
  auto tin = open_in(truth_path);
  const auto cm = join_and_confuse(read_predictions_jsonl(pin), read_truth_jsonl(tin));
  const auto m = metrics(cm);
  const std::string json = metrics_to_json(cm, m).dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << json;
  } else {
    auto out = open_out(out_path);
    out << json;
  }
  if (table) write_metrics_table(out_path.empty() ? std::cerr : std::cout, m);
  return 0;
}

int cmd_bands(const Common& common, const std::string& predictions) {
  const auto cfg = common.load();
  auto in = open_in(predictions);
  const auto recs = read_predictions_jsonl(in);
  std::vector<Prediction> preds;
  for (const auto& r : recs) preds.push_back(r.prediction);
  const auto bands = select_probability_bands(preds, cfg.band_low, cfg.band_high);
  char buf[64];
  auto emit = [&](const char* band, const std::vector<std::size_t>& idx) {
    for (auto i : idx) {
      std::snprintf(buf, sizeof buf, "%.3f", max_probability(preds[i]));
      std::cout << band << '\t' << recs[i].id << '\t' << buf << '\n';
    }
  };
  emit("low", bands.low);
  emit("high", bands.high);
  std::cerr << "low: " << bands.low.size() << ", high: " << bands.high.size()
            << ", middle: " << preds.size() - bands.low.size() - bands.high.size() << '\n';
  return 0;
}

int cmd_synonyms(const Common& common, const std::string& bundle) {
  const auto cfg = common.load();
  const auto p = load_bundle(bundle, load_assets(cfg));
  p.synonyms.write_tsv(std::cout);
  return 0;
}

int cmd_measures(const Common& common, bool literal, bool features) {
  auto cfg = common.load();
  const std::string text((std::istreambuf_iterator<char>(std::cin)),
                         std::istreambuf_iterator<char>());
  const auto opt = measure_options(literal || cfg.literal_measurements);
  write_measurements_tsv(std::cout, extract_measurements(text, opt));
  if (features) {
    const auto f = lesion_features(text, opt);
    char buf[96];
    std::snprintf(buf, sizeof buf, "# lesion_count=%d max_long_axis_mm=%.10g\n", f.lesion_count,
                  f.max_long_axis_mm);
    std::cout << buf;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LI-RADS category inference from liver ultrasound reports"};
  app.require_subcommand(1);
  Common common;
  app.add_option("-c,--config", common.config_path, "pipeline config file (key = value)");
  app.add_option("--set", common.overrides, "override one config key (key=value)");
  app.fallthrough();

  std::string out, corpus, bundle, predictions, truth, metrics_out;
  bool table = false, literal = false, features = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic report corpus");
  synth->add_option("-o,--out", out, "output JSONL")->required();

  auto* train = app.add_subcommand("train", "train a model bundle");
  train->add_option("--corpus", corpus, "report JSONL")->required();
  train->add_option("--bundle", bundle, "bundle directory to write")->required();
  train->add_option("--metrics", metrics_out, "validation metrics JSON");

  auto* infer = app.add_subcommand("infer", "predict categories for reports");
  infer->add_option("--bundle", bundle, "bundle directory")->required();
  infer->add_option("--corpus", corpus, "report JSONL")->required();
  infer->add_option("-o,--out", out, "predictions JSONL")->required();

  auto* evaluate = app.add_subcommand("evaluate", "score predictions against truth");
  evaluate->add_option("--predictions", predictions, "predictions JSONL")->required();
  evaluate->add_option("--truth", truth, "reports or predictions JSONL")->required();
  evaluate->add_option("-o,--out", out, "metrics JSON (default stdout)");
  evaluate->add_flag("--table", table, "also print a plain-text table");

  auto* bands = app.add_subcommand("bands", "list low/high confidence predictions");
  bands->add_option("--predictions", predictions, "predictions JSONL")->required();

  auto* synonyms = app.add_subcommand("synonyms", "dump the derived synonym map");
  synonyms->add_option("--bundle", bundle, "bundle directory")->required();

  auto* measures = app.add_subcommand("measures", "extract measurements from stdin");
  measures->add_flag("--literal", literal, "keep prior-size mentions");
  measures->add_flag("--features", features, "append lesion count and max long axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(common, out);
    if (*train) return cmd_train(common, corpus, bundle, metrics_out);
    if (*infer) return cmd_infer(common, bundle, corpus, out);
    if (*evaluate) return cmd_evaluate(predictions, truth, out, table);
    if (*bands) return cmd_bands(common, predictions);
    if (*synonyms) return cmd_synonyms(common, bundle);
    if (*measures) return cmd_measures(common, literal, features);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
