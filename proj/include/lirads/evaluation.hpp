#pragma once

// Confusion matrices, precision/recall/F1 and probability-band selection.

#include <algorithm>
#include <array>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lirads/category.hpp"
#include "lirads/error.hpp"
#include "lirads/prediction.hpp"

namespace lirads {

/// Rows are true categories, columns predicted.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumCategories>, kNumCategories> m{};

  std::size_t total() const {
    std::size_t s = 0;
    for (const auto& r : m)
      for (auto v : r) s += v;
    return s;
  }
  std::size_t row_sum(std::size_t t) const {
    std::size_t s = 0;
    for (auto v : m[t]) s += v;
    return s;
  }
  std::size_t col_sum(std::size_t p) const {
    std::size_t s = 0;
    for (const auto& r : m) s += r[p];
    return s;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(const std::vector<LiradsCategory>& y_true,
                                 const std::vector<LiradsCategory>& y_pred) {
  if (y_true.size() != y_pred.size()) throw DataError("confusion: length mismatch");
  if (y_true.empty()) throw DataError("confusion: no pairs");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i)
    ++cm.m[category_index(y_true[i])][category_index(y_pred[i])];
  return cm;
}

struct CategoryMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  // Set when the ratio was 0/0 and reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

struct MetricsReport {
  std::array<CategoryMetrics, kNumCategories> per_category{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

/// Per-category and macro (unweighted over all three categories) metrics.
inline MetricsReport metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DataError("metrics: empty confusion matrix");
  MetricsReport r;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    auto& pc = r.per_category[c];
    const double tp = static_cast<double>(cm.m[c][c]);
    const std::size_t col = cm.col_sum(c);
    const std::size_t row = cm.row_sum(c);
    pc.support = row;
    if (col == 0)
      pc.precision_undefined = true;
    else
      pc.precision = tp / static_cast<double>(col);
    if (row == 0)
      pc.recall_undefined = true;
    else
      pc.recall = tp / static_cast<double>(row);
    const double denom = pc.precision + pc.recall;
    pc.f1 = denom > 0.0 ? 2.0 * pc.precision * pc.recall / denom : 0.0;
    r.macro_precision += pc.precision / kNumCategories;
    r.macro_recall += pc.recall / kNumCategories;
    r.macro_f1 += pc.f1 / kNumCategories;
  }
  return r;
}

inline double macro_f1(const std::vector<LiradsCategory>& y_true,
                       const std::vector<LiradsCategory>& y_pred) {
  return metrics(confusion(y_true, y_pred)).macro_f1;
}

struct BandSelection {
  std::vector<std::size_t> low;   // max prob < low threshold
  std::vector<std::size_t> high;  // max prob > high threshold
};

inline double max_probability(const Prediction& p) {
  double m = p.probs[0];
  for (double v : p.probs) m = std::max(m, v);
  return m;
}

inline BandSelection select_probability_bands(const std::vector<Prediction>& preds,
                                              double low = 0.5, double high = 0.9) {
  if (!(low >= 0.0 && low <= high && high <= 1.0))
    throw ConfigError("probability bands require 0 <= low <= high <= 1");
  BandSelection out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double m = max_probability(preds[i]);
    if (m < low)
      out.low.push_back(i);
    else if (m > high)
      out.high.push_back(i);
  }
  return out;
}

inline nlohmann::ordered_json metrics_to_json(const ConfusionMatrix& cm, const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["confusion"] = nlohmann::ordered_json::array();
  for (const auto& row : cm.m) j["confusion"].push_back(row);
  j["per_category"] = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    const auto& pc = r.per_category[c];
    j["per_category"][category_name(category_from_index(c))] = {
        {"precision", pc.precision},
        {"recall", pc.recall},
        {"f1", pc.f1},
        {"support", pc.support},
        {"precision_undefined", pc.precision_undefined},
        {"recall_undefined", pc.recall_undefined}};
  }
  j["macro"] = {{"precision", r.macro_precision},
                {"recall", r.macro_recall},
                {"f1", r.macro_f1},
                {"averaging", "macro"}};
  return j;
}

inline void write_metrics_table(std::ostream& os, const MetricsReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-18s %9s %9s %9s %8s\n", "category", "precision", "recall",
                "f1", "support");
  os << buf;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    const auto& pc = r.per_category[c];
    std::snprintf(buf, sizeof buf, "%-18s %9.3f %9.3f %9.3f %8zu\n",
                  category_name(category_from_index(c)).c_str(), pc.precision, pc.recall, pc.f1,
                  pc.support);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-18s %9.3f %9.3f %9.3f\n", "average (macro)",
                r.macro_precision, r.macro_recall, r.macro_f1);
  os << buf;
}

}  // namespace lirads
