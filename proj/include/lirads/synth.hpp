#pragma once

// Seeded synthetic liver ultrasound corpus. Stands in for a clinical report
// repository so the whole pipeline can be trained and checked at desk scale.
//
// Generative rules:
//   LR1  no liver lesion is measured.
//   LR2  1-3 lesions, every current dimension < 10 mm.
//   LR3  at least one lesion >= 10 mm, some with a suspicious phrase.
// Descriptor words are drawn uniformly from lexicon synonym sets. Each one is
// written next to a companion word of its own concept, so concepts differ by
// context while variants of one concept are interchangeable.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "lirads/category.hpp"
#include "lirads/error.hpp"
#include "lirads/random.hpp"
#include "lirads/report.hpp"

namespace lirads {

struct SynthConfig {
  std::size_t n_reports = 1000;
  std::array<double, 3> category_weights{0.8, 0.1, 0.1};
  double legacy_fraction = 0.0;
  std::uint64_t seed = 7;

  void validate() const {
    if (n_reports < 1) throw ConfigError("synth: n_reports must be >= 1");
    double sum = 0.0;
    for (double w : category_weights) {
      if (!(w >= 0.0) || !std::isfinite(w))
        throw ConfigError("synth: category weights must be non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("synth: category weights must sum to 1");
    if (!(legacy_fraction >= 0.0 && legacy_fraction <= 1.0))
      throw ConfigError("synth: legacy_fraction must lie in [0, 1]");
  }
};

/// A descriptor concept: the lexicon root, the interchangeable surface
/// variants (root included) and context words specific to the concept.
struct DescriptorConcept {
  std::string root;
  std::vector<std::string> variants;
  std::vector<std::string> companions;
};

enum class DescriptorGroup { Echogenicity, Vascularity, Architecture, Morphology };

struct DescriptorFamily {
  DescriptorGroup group;
  double use_probability;
  std::vector<DescriptorConcept> concepts;
};

inline const std::vector<DescriptorFamily>& synth_descriptor_families() {
  static const std::vector<DescriptorFamily> families = {
      {DescriptorGroup::Echogenicity,
       1.0,
       {
           {"hyperechoic",
            {"hyperechoic", "hyperechogenic", "hyperecho"},
            {"bright", "reflective", "glistening"}},
           {"isoechoic", {"isoechoic", "isoecho"}, {"subtle", "inconspicuous", "camouflaged"}},
           {"hypoechoic",
            {"hypoechoic", "hypoechogenic", "hypoechogenicity", "hypoecho"},
            {"dark", "solid", "dim"}},
           {"cystic", {"cystic", "anechoic", "anecho"}, {"fluid", "transmission", "watery"}},
           {"nonshadowing",
            {"nonshadowing", "non-shadowing"},
            {"reverberation", "artifact", "ringdown"}},
       }},
      {DescriptorGroup::Vascularity,
       0.5,
       {
           {"hypovascular", {"hypovascular", "nonenhancing"}, {"sluggish", "faint", "sparse"}},
           {"avascular", {"avascular", "nonvascular"}, {"silent", "quiescent", "flowless"}},
           {"hypervascular",
            {"hypervascular", "hypervascularity"},
            {"arterial", "feeding", "pulsatile"}},
       }},
      {DescriptorGroup::Architecture,
       0.4,
       {
           {"septation",
            {"septation", "septated", "septations", "multicystic", "septa", "internal septation",
             "thin septation", "multiseptated", "reticulated", "fishnet", "multiloculated"},
            {"partitions", "compartments", "chambers"}},
           {"complex", {"complex", "complicated"}, {"heterogeneous", "debris", "mixed"}},
       }},
      {DescriptorGroup::Morphology,
       0.6,
       {
           {"lobulated",
            {"lobulated", "bilobed", "macrolobulated", "microlobulated"},
            {"contour", "undulating", "scalloped"}},
           {"round",
            {"round", "oval", "rounded", "ovoid", "oblong"},
            {"symmetric", "globular", "spherical"}},
           {"ill-define",
            {"ill-defined", "vague", "indistinct"},
            {"infiltrative", "blurred", "hazy"}},
           {"exophytic",
            {"exophytic", "bulging"},
            {"protruding", "pedunculated", "outpouching"}},
           {"well_defined",
            {"well-defined", "well-circumscribed", "margined"},
            {"sharp", "crisp", "encapsulated"}},
       }},
  };
  return families;
}

/// Phrases attached to some LR3 lesions. Their key words never occur in LR1
/// or LR2 reports.
inline const std::vector<std::string>& synth_suspicious_phrases() {
  static const std::vector<std::string> phrases = {
      "suspicious for malignancy", "concerning for hcc", "worrisome for neoplasm",
      "suspicious for hcc"};
  return phrases;
}

inline const std::vector<std::string>& synth_suspicious_words() {
  static const std::vector<std::string> words = {"suspicious", "concerning", "worrisome"};
  return words;
}

namespace synth_detail {

inline std::string fmt_cm(double cm) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", cm);
  return buf;
}

/// Renders lesion dimensions (whole millimeters) in a random unit and style.
inline std::string render_dims(Rng& rng, const std::vector<int>& dims_mm, bool legacy) {
  const bool cm = rng.bernoulli(0.5);
  const char* sep = (legacy && rng.bernoulli(0.3)) ? " \xC3\x97 " : " x ";
  std::string out;
  for (std::size_t i = 0; i < dims_mm.size(); ++i) {
    if (i) out += sep;
    out += cm ? fmt_cm(dims_mm[i] / 10.0) : std::to_string(dims_mm[i]);
  }
  if (cm)
    out += " cm";
  else
    out += (legacy && rng.bernoulli(0.3)) ? "mm" : " mm";
  return out;
}

/// 1-3 dimensions whose maximum is exactly max_mm.
inline std::vector<int> make_dims(Rng& rng, int max_mm) {
  const int n = rng.between(1, 3);
  std::vector<int> dims(static_cast<std::size_t>(n));
  const std::size_t at = rng.below(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i)
    dims[i] = i == at ? max_mm : rng.between(std::max(2, max_mm / 2), max_mm);
  return dims;
}

struct Lesion {
  int max_mm = 0;
  bool suspicious = false;
};

inline std::vector<Lesion> plan_lesions(Rng& rng, LiradsCategory cat) {
  std::vector<Lesion> out;
  if (cat == LiradsCategory::LR1) return out;
  const int n = rng.between(1, 3);
  for (int i = 0; i < n; ++i) out.push_back({rng.between(3, 9), false});
  if (cat == LiradsCategory::LR3) {
    out[0].max_mm = rng.between(10, 45);
    out[0].suspicious = rng.bernoulli(0.4);
  }
  // Shuffle so the defining lesion is not always first.
  for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[rng.below(i)]);
  return out;
}

/// One phrase per chosen concept: a surface variant next to one of the
/// concept's companion words.
inline std::vector<std::string> pick_descriptors(Rng& rng) {
  std::vector<std::string> phrases;
  for (const auto& fam : synth_descriptor_families()) {
    if (!rng.bernoulli(fam.use_probability)) continue;
    const auto& concept_ = rng.pick(fam.concepts);
    const std::string& v = rng.pick(concept_.variants);
    const std::string& c = rng.pick(concept_.companions);
    switch (rng.below(3)) {
      case 0: phrases.push_back(v + " " + c); break;
      case 1: phrases.push_back(c + " " + v); break;
      default: phrases.push_back(v + " and " + c); break;
    }
  }
  for (std::size_t i = phrases.size(); i > 1; --i)
    std::swap(phrases[i - 1], phrases[rng.below(i)]);
  return phrases;
}

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

inline const std::vector<std::string>& nouns() {
  static const std::vector<std::string> v = {"lesion", "focus", "nodule", "observation"};
  return v;
}

inline std::string location(Rng& rng, bool legacy) {
  switch (rng.below(legacy ? 5 : 4)) {
    case 0: return "segment " + std::to_string(rng.between(1, 8));
    case 1: return "the right hepatic lobe";
    case 2: return "the left hepatic lobe";
    case 3: return "the caudate lobe";
    default: return "the dome of the liver";
  }
}

inline std::string prior_clause(Rng& rng, bool legacy) {
  if (!rng.bernoulli(0.3)) return "";
  const auto dims = make_dims(rng, rng.between(3, 20));
  return std::string(legacy ? ", previously measuring " : ", previously ") +
         render_dims(rng, dims, legacy);
}

inline std::string suspicious_clause(Rng& rng, const Lesion& l) {
  return l.suspicious ? ", " + rng.pick(synth_suspicious_phrases()) : "";
}

inline std::string templated_lesion(Rng& rng, const Lesion& l) {
  const auto d = pick_descriptors(rng);
  return render_dims(rng, make_dims(rng, l.max_mm), false) + " " + rng.pick(nouns()) + " in " +
         location(rng, false) + ", " + join(d, ", ") + suspicious_clause(rng, l) +
         prior_clause(rng, false) + ".";
}

inline std::string legacy_lesion(Rng& rng, const Lesion& l) {
  const auto d = pick_descriptors(rng);
  const std::string dims = render_dims(rng, make_dims(rng, l.max_mm), true);
  const std::string noun = rng.pick(nouns());
  const std::string loc = location(rng, true);
  switch (rng.below(3)) {
    case 0:
      return "There is a " + noun + " in " + loc + " measuring " + dims +
             suspicious_clause(rng, l) + prior_clause(rng, true) + ". The " + noun + " is " +
             join(d, " and ") + ".";
    case 1:
      return "A " + dims + " " + noun + " is noted in " + loc + suspicious_clause(rng, l) +
             prior_clause(rng, true) + ". It appears " + join(d, ", ") + ".";
    default:
      return "In " + loc + ", a " + noun + " measures " + dims + suspicious_clause(rng, l) +
             prior_clause(rng, true) + ". It is " + join(d, " and ") + ".";
  }
}

inline std::string appearance(Rng& rng) {
  static const std::vector<std::string> v = {"normal", "mild steatosis", "moderate steatosis",
                                             "coarsened echotexture", "nodular contour"};
  return rng.pick(v);
}

inline std::string history(Rng& rng) {
  static const std::vector<std::string> v = {"cirrhosis", "hepatitis b", "hepatitis c",
                                             "alcoholic liver disease", "nash"};
  return rng.pick(v);
}

inline Date random_date(Rng& rng, int year_lo, int year_hi) {
  const int y = rng.between(year_lo, year_hi);
  const int m = rng.between(1, 12);
  return {y, m, rng.between(1, Date::days_in_month(y, m))};
}

inline std::string templated_text(Rng& rng, LiradsCategory cat) {
  const auto lesions = plan_lesions(rng, cat);
  std::string obs;
  if (lesions.empty()) {
    static const std::vector<std::string> none = {
        "no focal hepatic lesion.", "no focal liver observation.",
        "no liver observation is seen."};
    obs = rng.pick(none);
  } else {
    for (const auto& l : lesions) {
      if (!obs.empty()) obs += ' ';
      obs += templated_lesion(rng, l);
    }
  }

  std::string imp;
  switch (cat) {
    case LiradsCategory::LR1: imp = "No sonographic evidence of hepatic malignancy."; break;
    case LiradsCategory::LR2: imp = "Subcentimeter observation, likely benign."; break;
    case LiradsCategory::LR3: imp = "Observation requiring multiphase contrast imaging."; break;
  }

  char sizes[160];
  std::snprintf(sizes, sizeof sizes,
                "SPLEEN: spleen length: %s cm.\nKIDNEYS: right kidney: %s cm. left kidney: %s cm.\n",
                fmt_cm(rng.between(80, 140) / 10.0).c_str(),
                fmt_cm(rng.between(95, 125) / 10.0).c_str(),
                fmt_cm(rng.between(95, 125) / 10.0).c_str());

  return "EXAM: US ABDOMEN LIMITED\n"
         "CLINICAL HISTORY: " + history(rng) + ". hcc screening.\n"
         "COMPARISON: prior ultrasound.\n"
         "FINDINGS:\n"
         "LIVER:\nliver length: " + fmt_cm(rng.between(120, 190) / 10.0) +
         " cm. liver appearance: " + appearance(rng) + ". liver observations: " + obs +
         " liver doppler: hepatic veins: patent with normal triphasic waveforms. "
         "main portal vein: patent with hepatopetal flow.\n"
         "GALLBLADDER: normal. no gallstones.\n" +
         std::string(sizes) + "IMPRESSION:\n" + imp + "\nUS LI-RADS Category: " +
         std::to_string(category_number(cat)) + ".\n";
}

inline std::string legacy_text(Rng& rng, LiradsCategory cat) {
  const auto lesions = plan_lesions(rng, cat);
  std::string obs;
  if (lesions.empty()) {
    static const std::vector<std::string> none = {
        "No focal hepatic mass is identified.", "No focal liver lesion is seen.",
        "There is no focal lesion in the liver."};
    obs = rng.pick(none);
  } else {
    for (const auto& l : lesions) {
      if (!obs.empty()) obs += ' ';
      obs += legacy_lesion(rng, l);
    }
  }
  static const std::vector<std::string> parenchyma = {
      "homogeneous", "diffusely echogenic", "coarse", "mildly heterogeneous"};
  const std::string findings =
      "The liver spans " + fmt_cm(rng.between(120, 190) / 10.0) +
      " cm. The hepatic parenchyma is " + rng.pick(parenchyma) + ". " + obs +
      " The portal vein is patent with normal direction of flow. The gallbladder is "
      "unremarkable. The spleen is " +
      fmt_cm(rng.between(80, 140) / 10.0) + " cm in length. The right kidney measures " +
      fmt_cm(rng.between(95, 125) / 10.0) + " cm.";

  std::string imp;
  switch (cat) {
    case LiradsCategory::LR1: imp = "Unremarkable liver."; break;
    case LiradsCategory::LR2: imp = "Small liver lesions, likely benign."; break;
    case LiradsCategory::LR3: imp = "Liver mass, further evaluation with MRI is recommended."; break;
  }

  if (rng.bernoulli(0.5))
    return "HISTORY: " + history(rng) + ".\n\nFINDINGS:\n" + findings + "\n\nIMPRESSION:\n" + imp +
           "\n";
  return "Ultrasound of the abdomen for " + history(rng) + ".\n" + findings +
         "\nIMPRESSION: " + imp + "\n";
}

}  // namespace synth_detail

/// Deterministic for a fixed seed. Every report carries its generative
/// category as its label; templated reports also state it in the impression.
inline std::vector<Report> generate_synthetic_corpus(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<Report> out;
  out.reserve(cfg.n_reports);
  const auto& w = cfg.category_weights;
  for (std::size_t i = 0; i < cfg.n_reports; ++i) {
    const double u = rng.uniform();
    LiradsCategory cat = LiradsCategory::LR3;
    if (u < w[0])
      cat = LiradsCategory::LR1;
    else if (u < w[0] + w[1])
      cat = LiradsCategory::LR2;
    else if (w[2] == 0.0)  // rounding at the top of the cumulative sum
      cat = w[1] > 0.0 ? LiradsCategory::LR2 : LiradsCategory::LR1;

    const bool legacy = rng.bernoulli(cfg.legacy_fraction);
    const Date date = legacy ? synth_detail::random_date(rng, 2007, 2016)
                             : synth_detail::random_date(rng, 2017, 2017);
    const std::string text =
        legacy ? synth_detail::legacy_text(rng, cat) : synth_detail::templated_text(rng, cat);

    char id[48];
    std::snprintf(id, sizeof id, "s%llu-%06zu", static_cast<unsigned long long>(cfg.seed), i);
    Report r = parse_report(text, id, date);
    r.label = cat;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace lirads
