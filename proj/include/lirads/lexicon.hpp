#pragma once

#include <string>
#include <vector>

namespace lirads {

/// One row of the US LI-RADS lexicon table: a root term with the corpus
/// variants it is expected to absorb.
struct LexiconRow {
  std::string group;
  std::string root;
  std::vector<std::string> synonyms;
};

/// Lexicon rows with synonym sets as observed in liver ultrasound reports.
/// Entries are surface forms as reported; most are already stems.
inline const std::vector<LexiconRow>& lirads_lexicon_table() {
  static const std::vector<LexiconRow> rows = {
      {"Echogenicity", "hyperechoic", {"hyperechogenic", "hyperecho"}},
      {"Echogenicity", "isoechoic", {"isoecho"}},
      {"Echogenicity", "hypoechoic", {"hypoechogenicity", "hypoechogen", "hypoecho"}},
      {"Echogenicity", "cystic", {"anecho", "anechoic"}},
      {"Echogenicity", "nonshadowing", {"non_shadowing"}},
      {"Doppler vascularity", "hypovascular", {"nonenhancing"}},
      {"Doppler vascularity", "avascular", {"nonvascular"}},
      {"Doppler vascularity", "hypervascular", {"hypervascularity"}},
      {"Architecture",
       "septation",
       {"septat", "septations", "multicystic", "septa", "complex_cyst", "intern_septation",
        "thin_septation", "multispet", "reticul", "fishnet", "multilocul"}},
      {"Architecture", "complex", {"complicated", "solid_and_cystic"}},
      {"Morphology", "lobulated", {"bilobe", "macrolobulated", "microlobulated"}},
      {"Morphology", "round", {"oval", "rounded", "ovoid", "oblong"}},
      {"Morphology", "ill-define", {"vague", "indistinct"}},
      {"Morphology", "exophytic", {"bulge"}},
      {"Morphology", "well_defined", {"well_circumcribed", "margined"}},
  };
  return rows;
}

/// Root terms of the lexicon, in table order.
inline std::vector<std::string> default_lexicon_roots() {
  std::vector<std::string> roots;
  for (const auto& row : lirads_lexicon_table()) roots.push_back(row.root);
  return roots;
}

}  // namespace lirads
