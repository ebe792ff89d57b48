#pragma once

#include <array>
#include <cmath>

#include "lirads/category.hpp"
#include "lirads/error.hpp"

namespace lirads {

using ProbVector = std::array<double, kNumCategories>;

struct Prediction {
  ProbVector probs{};
  LiradsCategory argmax = LiradsCategory::LR1;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Index of the largest entry; exact ties go to the lower category.
inline LiradsCategory argmax_category(const ProbVector& p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return category_from_index(best);
}

inline bool is_probability_vector(const ProbVector& p, double tol = 1e-9) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    s += v;
  }
  return std::abs(s - 1.0) <= tol;
}

inline Prediction make_prediction(const ProbVector& p) { return {p, argmax_category(p)}; }

}  // namespace lirads
