// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lirads/lirads.hpp"

using namespace lirads;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PipelineConfig synthetic_config() {
  return load_config(std::string(LIRADS_SOURCE_DIR) + "/config/synthetic.conf");
}

// ---------------------------------------------------------------------------

double direct_loss(const EmbeddingModel& m, const std::vector<std::size_t>& ctx, std::size_t target,
                   const std::vector<std::size_t>& neg) {
  const std::size_t d = m.dim();
  std::vector<double> h(d, 0.0);
  for (auto c : ctx)
    for (std::size_t k = 0; k < d; ++k) h[k] += m.w_in(c, k) / static_cast<double>(ctx.size());
  auto score = [&](std::size_t r) {
    double s = 0;
    for (std::size_t k = 0; k < d; ++k) s += m.w_out(r, k) * h[k];
    return s;
  };
  double e = std::log1p(std::exp(-score(target)));
  for (auto n : neg) e += std::log1p(std::exp(score(n)));
  return e;
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2718);
  double worst = 0.0;
  const std::size_t V = 40;
  for (int cfg = 0; cfg < 100; ++cfg) {
    const std::size_t d = cfg % 2 ? 32 : 8;
    EmbeddingModel m;
    m.w_in = Matrix(V, d);
    m.w_out = Matrix(V, d);
    for (auto& x : m.w_in.data()) x = rng.uniform() - 0.5;
    for (auto& x : m.w_out.data()) x = rng.uniform() - 0.5;
    const std::size_t target = rng.below(V);
    std::vector<std::size_t> ctx, neg;
    for (int i = 0, n = 1 + cfg % 8; i < n; ++i) ctx.push_back(rng.below(V));
    for (int i = 0, n = 1 + cfg % 10; i < n; ++i) {
      std::size_t x;
      do x = rng.below(V);
      while (x == target);
      neg.push_back(x);
    }
    const auto g = cbow_ns_loss_and_grads(m, ctx, target, neg);
    double diff = 0.0, na = 0.0, nf = 0.0;
    auto probe = [&](Matrix& W, const std::vector<RowGradient>& rows) {
      for (const auto& r : rows)
        for (std::size_t k = 0; k < d; ++k) {
          const double keep = W(r.row, k);
          W(r.row, k) = keep + 1e-5;
          const double up = direct_loss(m, ctx, target, neg);
          W(r.row, k) = keep - 1e-5;
          const double down = direct_loss(m, ctx, target, neg);
          W(r.row, k) = keep;
          const double fd = (up - down) / 2e-5;
          diff += (fd - r.grad[k]) * (fd - r.grad[k]);
          na += r.grad[k] * r.grad[k];
          nf += fd * fd;
        }
    };
    probe(m.w_in, g.w_in);
    probe(m.w_out, g.w_out);
    worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(std::max(na, nf)), 1e-12));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 10.0, fmt("100 configs, max relative error %.2e, %.2fs", worst, secs)};
}

Outcome planted_synonyms() {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = synthetic_config();
  cfg.synth.n_reports = 6000;
  cfg.synth.category_weights = {0.0, 0.5, 0.5};
  cfg.synth.legacy_fraction = 0.5;
  cfg.synth.seed = 5;
  const auto assets = load_assets(cfg);
  TrainReport rep;
  const auto stage = train_text_stage(generate_synthetic_corpus(cfg.synth), cfg, assets, rep);
  const auto& p = stage.pipeline;

  // Planted pairs: (root, variant) whose normalized forms differ.
  std::map<std::string, std::string> owner;
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& fam : synth_descriptor_families())
    for (const auto& c : fam.concepts) {
      const auto r = normalize_lexicon_term(c.root);
      owner[r] = r;
      for (const auto& v : c.variants) {
        const auto s = normalize_lexicon_term(v);
        owner[s] = r;
        if (s != r) pairs.emplace_back(r, s);
      }
    }
  std::size_t recovered = 0;
  for (const auto& [r, s] : pairs) {
    const auto* e = p.synonyms.find_entry(r);
    if (!e) continue;
    for (const auto& x : e->synonyms) recovered += x.token == s;
  }
  std::size_t cross = 0;
  for (const auto& e : p.synonyms.entries())
    for (const auto& x : e.synonyms) {
      const auto it = owner.find(x.token);
      if (it != owner.end() && it->second != e.root) ++cross;
    }
  const double secs = seconds_since(t0);
  const double frac = pairs.empty() ? 0.0 : static_cast<double>(recovered) / pairs.size();
  const bool ok = rep.corpus_tokens >= 200000 && frac >= 0.80 && cross == 0 && secs < 300.0 &&
                  cfg.synonym_threshold == 0.80;
  return {ok, fmt("%zu tokens, recovered %zu/%zu planted pairs (%.0f%%), %zu cross-root, %.1fs",
                  rep.corpus_tokens, recovered, pairs.size(), 100 * frac, cross, secs)};
}

Outcome measurement_goldens() {
  int failed = 0, total = 0;
  auto dims = [&](const char* text, std::vector<std::vector<double>> want,
                  std::vector<bool> prior = {}) {
    ++total;
    const auto ms = extract_measurements(text);
    bool ok = ms.size() == want.size();
    for (std::size_t i = 0; ok && i < ms.size(); ++i) {
      ok = ms[i].dims_mm.size() == want[i].size();
      for (std::size_t k = 0; ok && k < want[i].size(); ++k)
        ok = std::abs(ms[i].dims_mm[k] - want[i][k]) < 1e-9;
      if (ok && !prior.empty()) ok = ms[i].prior_context == prior[i];
    }
    if (!ok) ++failed, std::printf("  golden mismatch: %s\n", text);
  };
  auto feats = [&](const char* text, int count, double max_mm) {
    ++total;
    const auto f = lesion_features(text);
    if (f.lesion_count != count || std::abs(f.max_long_axis_mm - max_mm) > 1e-9)
      ++failed, std::printf("  golden mismatch: %s\n", text);
  };
  dims("1.2 x 1.3 x 0.9 cm", {{12, 13, 9}});
  dims("measures 7 x 6 x 7 mm, previously 10 x 9 x 9 mm", {{7, 6, 7}, {10, 9, 9}}, {false, true});
  {
    ++total;
    const auto ms = extract_measurements("liver length: 14.2 cm");
    if (ms.size() != 1 || std::abs(ms[0].dims_mm[0] - 142) > 1e-9 || !ms[0].organ_context)
      ++failed, std::printf("  golden mismatch: liver length\n");
  }
  feats("0.6 x 1.1 x 1.3 cm hyperechoic focus", 1, 13);
  feats("no focal hepatic lesion", 0, 0);
  feats("lesion 7 x 6 x 7 mm, previously 10 x 9 x 9 mm; liver length: 14.2 cm", 1, 7);
  dims("3D - 1.2 \xC3\x97 1.3 \xC3\x97 0.9cm", {{12, 13, 9}});
  dims("2D - 1.2 \xC3\x97 1.3cm", {{12, 13}});
  dims("1D - 1.2cm", {{12}});
  return {failed == 0, fmt("%d/%d golden cases", total - failed, total)};
}

LabeledDataset rule_points(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset ds{Matrix(0, 2), {}, FeatureKind::LesionFeatures};
  for (std::size_t i = 0; i < n; ++i) {
    const int c = rng.between(1, 3);
    double x[2] = {0, 0};
    if (c == 2) x[0] = rng.between(1, 3), x[1] = 1.0 + rng.uniform() * 8.9;
    if (c == 3) x[0] = rng.between(1, 3), x[1] = 10.0 + rng.uniform() * 35.0;
    ds.add(x, category_from_number(c));
  }
  return ds;
}

Outcome decision_rule() {
  const auto train = rule_points(2000, 101);
  const auto test = rule_points(1000, 202);
  const auto t = train_decision_tree(train);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    ok += argmax_category(predict_proba_tree(t, test.X.row(i))) == test.y[i];
  double lr2 = 0, lr3 = 1e300;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train.y[i] == LiradsCategory::LR2) lr2 = std::max(lr2, train.X(i, 1));
    if (train.y[i] == LiradsCategory::LR3) lr3 = std::min(lr3, train.X(i, 1));
  }
  double thr = std::nan("");
  for (const auto& n : t.nodes)
    if (n.feature == 1 && n.threshold > lr2 && n.threshold < lr3) thr = n.threshold;
  const double acc = ok / 1000.0;
  return {acc >= 0.99 && !std::isnan(thr),
          fmt("held-out accuracy %.3f, max_mm threshold %.3f in (%.3f, %.3f)", acc, thr, lr2, lr3)};
}

double segment_residual(std::span<const double> p, std::span<const double> a,
                        std::span<const double> b) {
  double ab2 = 0.0, t = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    ab2 += (b[j] - a[j]) * (b[j] - a[j]);
    t += (p[j] - a[j]) * (b[j] - a[j]);
  }
  t = ab2 > 0.0 ? std::clamp(t / ab2, 0.0, 1.0) : 0.0;
  double r = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) r += std::pow(p[j] - a[j] - t * (b[j] - a[j]), 2);
  return std::sqrt(r);
}

Outcome smote() {
  Rng rng(77);
  LabeledDataset ds{Matrix(0, 2), {}, FeatureKind::SectionEmbedding};
  const std::size_t counts[3] = {1589, 93, 62};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < counts[c]; ++i) {
      const double x[2] = {rng.uniform() * 10, rng.uniform() * 10};
      ds.add(x, category_from_index(c));
    }
  const auto out = smote_oversample(ds, 5, 1);
  const auto oc = out.counts();
  const bool balanced = oc[0] == 1589 && oc[1] == 1589 && oc[2] == 1589;
  bool preserved = true;
  for (std::size_t i = 0; i < ds.size(); ++i)
    preserved &= out.y[i] == ds.y[i] && out.X(i, 0) == ds.X(i, 0) && out.X(i, 1) == ds.X(i, 1);
  double worst = 0.0;
  for (std::size_t r = ds.size(); r < out.size(); ++r) {
    double best = 1e300;
    for (std::size_t a = 0; a < ds.size() && best >= 1e-9; ++a) {
      if (ds.y[a] != out.y[r]) continue;
      for (std::size_t b = a + 1; b < ds.size() && best >= 1e-9; ++b)
        if (ds.y[b] == out.y[r]) best = std::min(best, segment_residual(out.X.row(r), ds.X.row(a), ds.X.row(b)));
    }
    worst = std::max(worst, best);
  }
  return {balanced && preserved && worst < 1e-9,
          fmt("counts %zu/%zu/%zu, originals %s, max segment residual %.1e", oc[0], oc[1], oc[2],
              preserved ? "preserved" : "CHANGED", worst)};
}

Outcome sag() {
  Rng rng(3);
  LabeledDataset ds{Matrix(0, 2), {}, FeatureKind::SectionEmbedding};
  const double centres[3][2] = {{-3, 0}, {3, 0}, {0, 4}};
  for (std::size_t c = 0; c < 3; ++c)
    for (int i = 0; i < 10; ++i) {
      const double x[2] = {centres[c][0] + rng.uniform() - 0.5, centres[c][1] + rng.uniform() - 0.5};
      ds.add(x, category_from_index(c));
    }
  LogRegParams hp;
  hp.lambda = 1e-2;
  hp.epochs = 20000;
  hp.tol = 1e-13;
  const auto m = train_logreg_sag(ds, hp);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    ok += argmax_category(predict_proba_logreg(m, ds.X.row(i))) == ds.y[i];
  const double acc = static_cast<double>(ok) / ds.size();
  const double gnorm = std::sqrt(squared_norm(logreg_gradient(m, ds).data()));

  auto twice = ds;
  for (std::size_t i = 0; i < ds.size(); ++i) twice.add(ds.X.row(i), ds.y[i]);
  const auto m2 = train_logreg_sag(twice, hp);
  double dmax = 0.0;
  for (int t = 0; t < 200; ++t) {
    const double x[2] = {rng.uniform() * 12 - 6, rng.uniform() * 12 - 6};
    const auto a = predict_proba_logreg(m, x), b = predict_proba_logreg(m2, x);
    for (std::size_t c = 0; c < 3; ++c) dmax = std::max(dmax, std::abs(a[c] - b[c]));
  }
  return {acc == 1.0 && gnorm < 1e-3 && dmax < 1e-9,
          fmt("training accuracy %.3f, gradient norm %.1e, duplicate-set max prob diff %.1e", acc,
              gnorm, dmax)};
}

struct EndToEnd {
  Outcome e2e;
  Outcome determinism;
};

SynthConfig synth_like(const PipelineConfig& cfg, std::size_t n, double legacy, std::uint64_t seed) {
  SynthConfig s = cfg.synth;
  s.n_reports = n;
  s.legacy_fraction = legacy;
  s.seed = seed;
  return s;
}

double report_f1(const std::vector<Report>& rs, const TrainedPipeline& p,
                 const NormalizerAssets& assets) {
  const auto preds = predict_reports(rs, p, assets);
  std::vector<LiradsCategory> truth, got;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    truth.push_back(*rs[i].label);
    got.push_back(preds[i].prediction.argmax);
  }
  return macro_f1(truth, got);
}

EndToEnd end_to_end() {
  EndToEnd out;
  const auto cfg = synthetic_config();
  const auto assets = load_assets(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const auto train = generate_synthetic_corpus(synth_like(cfg, 3000, 0.0, 1));
  const auto held = generate_synthetic_corpus(synth_like(cfg, 1000, 0.0, 2));
  const auto legacy = generate_synthetic_corpus(synth_like(cfg, 1000, 1.0, 3));
  const auto p = train_pipeline(train, cfg, assets);
  const double f_templ = report_f1(held, p, assets);
  const double f_legacy = report_f1(legacy, p, assets);
  const double secs = seconds_since(t0);
  out.e2e = {f_templ >= 0.95 && f_legacy >= 0.90 && secs < 600.0,
             fmt("templated held-out macro-F1 %.3f, legacy macro-F1 %.3f, %.1fs", f_templ, f_legacy,
                 secs)};

  const auto base = fs::temp_directory_path() / "lirads_acceptance";
  fs::remove_all(base);
  save_bundle(p, base / "a");
  save_bundle(train_pipeline(train, cfg, assets), base / "b");
  std::size_t files = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(base / "a")) {
    ++files;
    const auto other = base / "b" / e.path().filename();
    if (!fs::exists(other) || read_file(e.path().string()) != read_file(other.string())) ++differ;
  }
  fs::remove_all(base);
  out.determinism = {differ == 0 && files > 0,
                     fmt("%zu bundle files compared, %zu differ", files, differ)};
  return out;
}

Outcome bands() {
  const std::vector<Prediction> ps{make_prediction({0.56, 0.06, 0.38}),
                                   make_prediction({0.55, 0.06, 0.4}),
                                   make_prediction({0.45, 0.10, 0.44}),
                                   make_prediction({0.43, 0.17, 0.40})};
  const auto b = select_probability_bands(ps, 0.5, 0.9);
  const bool ok = b.low == std::vector<std::size_t>{2, 3} && b.high.empty();
  return {ok, fmt("low rows %zu, high rows %zu (expected rows 3 and 4 low, none high)", b.low.size(),
                  b.high.size())};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* name, const Outcome& o) {
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  auto guarded = [&](const char* name, const std::function<Outcome()>& f) {
    try {
      report(name, f());
    } catch (const std::exception& e) {
      report(name, {false, std::string("error: ") + e.what()});
    }
  };
  guarded("cbow-gradient-check", gradient_check);
  guarded("planted-synonym-recovery", planted_synonyms);
  guarded("measurement-golden-suite", measurement_goldens);
  guarded("decision-rule-recovery", decision_rule);
  guarded("smote-interpolation", smote);
  guarded("sag-convergence", sag);
  try {
    const auto r = end_to_end();
    report("end-to-end-f1", r.e2e);
    report("bundle-determinism", r.determinism);
  } catch (const std::exception& e) {
    report("end-to-end-f1", {false, std::string("error: ") + e.what()});
    report("bundle-determinism", {false, "not run"});
  }
  guarded("probability-bands", bands);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
