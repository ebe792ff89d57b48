#pragma once

// Supervised layer: SMOTE, multinomial logistic regression (SAG), CART tree
// and the weighted-voting ensemble.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "lirads/category.hpp"
#include "lirads/error.hpp"
#include "lirads/evaluation.hpp"
#include "lirads/matrix.hpp"
#include "lirads/prediction.hpp"
#include "lirads/random.hpp"

namespace lirads {

enum class FeatureKind { SectionEmbedding, LesionFeatures };

struct LabeledDataset {
  Matrix X;
  std::vector<LiradsCategory> y;
  FeatureKind kind = FeatureKind::SectionEmbedding;

  std::size_t size() const { return y.size(); }
  std::size_t dim() const { return X.cols(); }

  void add(std::span<const double> x, LiradsCategory c) {
    X.append_row(x);
    y.push_back(c);
  }

  std::array<std::size_t, kNumCategories> counts() const {
    std::array<std::size_t, kNumCategories> n{};
    for (auto c : y) ++n[category_index(c)];
    return n;
  }

  void validate() const {
    if (X.rows() != y.size()) throw InvariantError("dataset: rows and labels differ");
    if (!X.all_finite()) throw DataError("dataset: non-finite feature value");
    if (kind == FeatureKind::LesionFeatures && !y.empty() && X.cols() != 2)
      throw InvariantError("dataset: lesion features must have 2 columns");
  }
};

// ---------------------------------------------------------------------------
// SMOTE

/// Where a synthetic row came from: x + u (z - x).
struct SmoteOrigin {
  std::size_t row;  // index of the synthetic row in the output
  std::size_t x;    // source rows (input indices)
  std::size_t z;
  double u;
};

/// Grows every category to the majority count by interpolating between a
/// random sample and one of its k nearest same-category neighbours.
/// Original rows come first, unchanged and in order.
inline LabeledDataset smote_oversample(const LabeledDataset& ds, int k, std::uint64_t seed,
                                       std::vector<SmoteOrigin>* origins = nullptr) {
  ds.validate();
  if (k < 1) throw ConfigError("SMOTE: k must be >= 1");
  LabeledDataset out = ds;
  if (ds.size() == 0) return out;
  const auto counts = ds.counts();
  const std::size_t majority = *std::max_element(counts.begin(), counts.end());

  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (counts[c] == majority) continue;
    if (counts[c] < 2)
      throw DataError("SMOTE requires at least 2 samples per minority category");
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (category_index(ds.y[i]) == c) members.push_back(i);
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), members.size() - 1);

    // k nearest neighbours within the category (distance, then index).
    std::vector<std::vector<std::size_t>> nn(members.size());
    for (std::size_t a = 0; a < members.size(); ++a) {
      std::vector<std::pair<double, std::size_t>> d;
      const auto xa = ds.X.row(members[a]);
      for (std::size_t b = 0; b < members.size(); ++b) {
        if (a == b) continue;
        const auto xb = ds.X.row(members[b]);
        double s = 0.0;
        for (std::size_t j = 0; j < xa.size(); ++j) s += (xa[j] - xb[j]) * (xa[j] - xb[j]);
        d.emplace_back(s, b);
      }
      std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
      for (std::size_t t = 0; t < kk; ++t) nn[a].push_back(d[t].second);
    }

    Rng rng(mix_seed(seed, c));
    std::vector<double> row(ds.dim());
    for (std::size_t made = members.size(); made < majority; ++made) {
      const std::size_t a = rng.below(members.size());
      const std::size_t b = nn[a][rng.below(nn[a].size())];
      const double u = rng.uniform_closed();
      const auto xa = ds.X.row(members[a]);
      const auto xb = ds.X.row(members[b]);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = xa[j] + u * (xb[j] - xa[j]);
      if (origins) origins->push_back({out.size(), members[a], members[b], u});
      out.add(row, category_from_index(c));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multinomial logistic regression

struct LogRegModel {
  Matrix W;  // 3 x p
  std::array<double, kNumCategories> b{};
  double lambda = 1e-4;

  std::size_t dim() const { return W.cols(); }

  friend bool operator==(const LogRegModel&, const LogRegModel&) = default;
};

struct LogRegParams {
  double lambda = 1e-4;
  int epochs = 50;
  /// Stop once an epoch moves the parameters by less than this (L2 norm).
  double tol = 1e-8;
  std::uint64_t seed = 1;
};

struct LogRegStats {
  int epochs_run = 0;
  double step = 0.0;
  std::vector<double> epoch_objective;
};

namespace logreg_detail {

inline ProbVector softmax_scores(const LogRegModel& m, std::span<const double> x) {
  ProbVector s{};
  for (std::size_t c = 0; c < kNumCategories; ++c) s[c] = dot(m.W.row(c), x) + m.b[c];
  const double mx = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (auto& v : s) z += (v = std::exp(v - mx));
  for (auto& v : s) v /= z;
  return s;
}

}  // namespace logreg_detail

inline ProbVector predict_proba_logreg(const LogRegModel& m, std::span<const double> x) {
  if (x.size() != m.dim()) throw DataError("logistic regression: feature dimension mismatch");
  return logreg_detail::softmax_scores(m, x);
}

/// Mean cross-entropy plus (lambda/2)||W||^2; intercepts are not penalized.
inline double logreg_objective(const LogRegModel& m, const LabeledDataset& ds) {
  double loss = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto p = logreg_detail::softmax_scores(m, ds.X.row(i));
    loss -= std::log(std::max(p[category_index(ds.y[i])], std::numeric_limits<double>::min()));
  }
  loss /= static_cast<double>(ds.size());
  return loss + 0.5 * m.lambda * squared_norm(m.W.data());
}

/// Full-batch gradient of logreg_objective: 3 rows of [dW_c, db_c].
inline Matrix logreg_gradient(const LogRegModel& m, const LabeledDataset& ds) {
  const std::size_t p = m.dim();
  Matrix g(kNumCategories, p + 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto x = ds.X.row(i);
    auto pr = logreg_detail::softmax_scores(m, x);
    pr[category_index(ds.y[i])] -= 1.0;
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      for (std::size_t j = 0; j < p; ++j) g(c, j) += pr[c] * x[j];
      g(c, p) += pr[c];
    }
  }
  const double inv = 1.0 / static_cast<double>(ds.size());
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    for (std::size_t j = 0; j < p; ++j) g(c, j) = g(c, j) * inv + m.lambda * m.W(c, j);
    g(c, p) *= inv;
  }
  return g;
}

/// Stochastic average gradient: each step refreshes one sample's stored
/// residual and moves along the average of all stored gradients. Step 1/L
/// with L = 0.25 max ||[x, 1]||^2 + lambda. From the second epoch on, an
/// epoch that raises the full objective is undone and the step halved, so
/// the per-epoch objective never increases.
inline LogRegModel train_logreg_sag(const LabeledDataset& ds, const LogRegParams& hp,
                                    LogRegStats* stats = nullptr) {
  ds.validate();
  if (hp.epochs < 1) throw ConfigError("logistic regression: epochs must be >= 1");
  if (!(hp.lambda >= 0.0)) throw ConfigError("logistic regression: lambda must be >= 0");
  const auto counts = ds.counts();
  for (auto n : counts)
    if (n == 0) throw DataError("all categories required for training");
  const std::size_t n = ds.size();
  const std::size_t p = ds.dim();

  LogRegModel m;
  m.W = Matrix(kNumCategories, p);
  m.lambda = hp.lambda;

  double max_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_sq = std::max(max_sq, squared_norm(ds.X.row(i)) + 1.0);
  double step = 1.0 / (0.25 * max_sq + hp.lambda);

  Matrix residual(n, kNumCategories);
  std::vector<char> seen(n, 0);
  std::size_t n_seen = 0;
  Matrix G(kNumCategories, p);
  std::array<double, kNumCategories> gb{};
  Rng rng(hp.seed);

  std::vector<double> before;
  double last_obj = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    before = m.W.data();
    before.insert(before.end(), m.b.begin(), m.b.end());
    for (std::size_t it = 0; it < n; ++it) {
      const std::size_t i = rng.below(n);
      const auto x = ds.X.row(i);
      auto r = logreg_detail::softmax_scores(m, x);
      r[category_index(ds.y[i])] -= 1.0;
      for (std::size_t c = 0; c < kNumCategories; ++c) {
        const double delta = r[c] - residual(i, c);
        residual(i, c) = r[c];
        if (delta != 0.0) {
          auto g = G.row(c);
          for (std::size_t j = 0; j < p; ++j) g[j] += delta * x[j];
          gb[c] += delta;
        }
      }
      if (!seen[i]) seen[i] = 1, ++n_seen;
      const double inv = 1.0 / static_cast<double>(n_seen);
      for (std::size_t c = 0; c < kNumCategories; ++c) {
        auto w = m.W.row(c);
        const auto g = G.row(c);
        for (std::size_t j = 0; j < p; ++j) w[j] -= step * (g[j] * inv + hp.lambda * w[j]);
        m.b[c] -= step * gb[c] * inv;
      }
    }
    const double obj = logreg_objective(m, ds);
    if (epoch > 0 && obj > last_obj + 1e-12 * std::max(1.0, last_obj)) {
      std::copy(before.begin(), before.begin() + static_cast<std::ptrdiff_t>(m.W.data().size()),
                m.W.data().begin());
      for (std::size_t c = 0; c < kNumCategories; ++c) m.b[c] = before[m.W.data().size() + c];
      step *= 0.5;
      if (stats) {
        stats->epochs_run = epoch + 1;
        stats->epoch_objective.push_back(last_obj);
      }
      continue;
    }
    last_obj = obj;
    double change = 0.0;
    for (std::size_t t = 0; t < m.W.data().size(); ++t) {
      const double d = m.W.data()[t] - before[t];
      change += d * d;
    }
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      const double d = m.b[c] - before[m.W.data().size() + c];
      change += d * d;
    }
    if (stats) {
      stats->epochs_run = epoch + 1;
      stats->epoch_objective.push_back(obj);
    }
    if (std::sqrt(change) < hp.tol) break;
  }
  if (stats) stats->step = step;
  check_invariant(m.W.all_finite(), "logistic regression diverged");
  return m;
}

// ---------------------------------------------------------------------------
// Decision tree

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  int left = -1;  // x[feature] <= threshold
  int right = -1;
  ProbVector probs{};
  std::size_t samples = 0;

  bool is_leaf() const { return feature < 0; }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // pre-order; nodes[0] is the root
  int max_depth = 4;
  std::size_t n_features = 0;

  friend bool operator==(const TreeModel&, const TreeModel&) = default;
};

struct TreeParams {
  int max_depth = 4;
  int min_leaf = 5;
};

/// Gini impurity of a category histogram.
template <typename Counts>
double gini(const Counts& counts) {
  double n = 0.0;
  for (auto v : counts) n += static_cast<double>(v);
  if (n == 0.0) return 0.0;
  double s = 0.0;
  for (auto v : counts) s += (static_cast<double>(v) / n) * (static_cast<double>(v) / n);
  return 1.0 - s;
}

namespace tree_detail {

using Hist = std::array<std::size_t, kNumCategories>;

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();  // weighted, times n
};

/// Sum over children of n_child * gini(child).
inline double weighted_impurity(const Hist& l, const Hist& r) {
  double nl = 0.0, nr = 0.0;
  for (auto v : l) nl += static_cast<double>(v);
  for (auto v : r) nr += static_cast<double>(v);
  return nl * gini(l) + nr * gini(r);
}

/// Best (feature, midpoint) split; ties keep the lower feature, then lower threshold.
inline Split best_split(const LabeledDataset& ds, const std::vector<std::size_t>& idx,
                        std::size_t min_leaf) {
  Split best;
  const std::size_t n = idx.size();
  Hist total{};
  for (auto i : idx) ++total[category_index(ds.y[i])];
  std::vector<std::size_t> order(idx);
  for (std::size_t f = 0; f < ds.dim(); ++f) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = ds.X(a, f), vb = ds.X(b, f);
      return va != vb ? va < vb : a < b;
    });
    Hist left{};
    for (std::size_t t = 0; t + 1 < n; ++t) {
      ++left[category_index(ds.y[order[t]])];
      const double v = ds.X(order[t], f);
      const double next = ds.X(order[t + 1], f);
      if (v == next) continue;
      const std::size_t nl = t + 1;
      if (nl < min_leaf || n - nl < min_leaf) continue;
      Hist right{};
      for (std::size_t c = 0; c < kNumCategories; ++c) right[c] = total[c] - left[c];
      const double imp = weighted_impurity(left, right);
      if (imp < best.impurity) {
        best.feature = static_cast<int>(f);
        best.threshold = v + (next - v) / 2.0;
        best.impurity = imp;
      }
    }
  }
  return best;
}

inline ProbVector frequencies(const LabeledDataset& ds, const std::vector<std::size_t>& idx) {
  ProbVector p{};
  for (auto i : idx) p[category_index(ds.y[i])] += 1.0;
  for (auto& v : p) v /= static_cast<double>(idx.size());
  return p;
}

inline int grow(TreeModel& t, const LabeledDataset& ds, std::vector<std::size_t> idx, int depth,
                const TreeParams& hp) {
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.push_back({});
  t.nodes[id].probs = frequencies(ds, idx);
  t.nodes[id].samples = idx.size();
  Hist h{};
  for (auto i : idx) ++h[category_index(ds.y[i])];
  const double parent = static_cast<double>(idx.size()) * gini(h);
  if (depth >= hp.max_depth || parent == 0.0) return id;
  const Split s = best_split(ds, idx, static_cast<std::size_t>(hp.min_leaf));
  if (s.feature < 0 || !(s.impurity < parent)) return id;

  std::vector<std::size_t> l, r;
  for (auto i : idx) (ds.X(i, static_cast<std::size_t>(s.feature)) <= s.threshold ? l : r).push_back(i);
  t.nodes[id].feature = s.feature;
  t.nodes[id].threshold = s.threshold;
  const int li = grow(t, ds, std::move(l), depth + 1, hp);
  const int ri = grow(t, ds, std::move(r), depth + 1, hp);
  t.nodes[id].left = li;
  t.nodes[id].right = ri;
  return id;
}

}  // namespace tree_detail

/// CART growth on weighted Gini impurity with midpoint thresholds. A node
/// becomes a leaf at max_depth, when pure, or when no split leaving
/// min_leaf samples per side strictly lowers the impurity.
inline TreeModel train_decision_tree(const LabeledDataset& ds, const TreeParams& hp = {}) {
  ds.validate();
  if (ds.size() == 0) throw DataError("decision tree: empty dataset");
  if (hp.max_depth < 0 || hp.min_leaf < 1) throw ConfigError("decision tree: bad hyperparameters");
  if (ds.size() < static_cast<std::size_t>(hp.min_leaf))
    throw DataError("decision tree: fewer samples than min_leaf");
  TreeModel t;
  t.max_depth = hp.max_depth;
  t.n_features = ds.dim();
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  tree_detail::grow(t, ds, std::move(idx), 0, hp);
  return t;
}

inline const TreeNode& tree_leaf(const TreeModel& t, std::span<const double> x) {
  if (t.nodes.empty()) throw InvariantError("decision tree: empty model");
  if (x.size() != t.n_features) throw DataError("decision tree: feature dimension mismatch");
  const TreeNode* n = &t.nodes[0];
  while (!n->is_leaf())
    n = &t.nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(n->feature)] <= n->threshold
                                              ? n->left
                                              : n->right)];
  return *n;
}

inline ProbVector predict_proba_tree(const TreeModel& t, std::span<const double> x) {
  return tree_leaf(t, x).probs;
}

// ---------------------------------------------------------------------------
// Ensemble

struct EnsembleModel {
  LogRegModel embed_clf;
  TreeModel lesion_clf;
  double w_embed = 1.0;
  double w_lesion = 1.0;

  friend bool operator==(const EnsembleModel&, const EnsembleModel&) = default;
};

inline void check_weights(double we, double wl) {
  if (!(we >= 0.0) || !(wl >= 0.0) || !std::isfinite(we) || !std::isfinite(wl))
    throw ConfigError("ensemble weights must be non-negative");
  if (we + wl == 0.0) throw ConfigError("ensemble weights must not both be zero");
}

inline ProbVector combine_probabilities(const ProbVector& pe, const ProbVector& pl, double we,
                                        double wl) {
  check_weights(we, wl);
  ProbVector p{};
  for (std::size_t c = 0; c < kNumCategories; ++c) p[c] = (we * pe[c] + wl * pl[c]) / (we + wl);
  return p;
}

inline Prediction ensemble_predict(const EnsembleModel& m, std::span<const double> embed_x,
                                   std::span<const double> lesion_x) {
  return make_prediction(combine_probabilities(predict_proba_logreg(m.embed_clf, embed_x),
                                               predict_proba_tree(m.lesion_clf, lesion_x),
                                               m.w_embed, m.w_lesion));
}

struct EnsembleSample {
  std::vector<double> embed;
  std::array<double, 2> lesion{};
  LiradsCategory label = LiradsCategory::LR1;
};

struct EnsembleParams {
  int smote_k = 5;
  std::uint64_t smote_seed = 1;
  LogRegParams logreg;
  TreeParams tree;
};

struct EnsembleFit {
  EnsembleModel model;
  /// Validation macro-F1 of each base classifier (absent when val is empty).
  std::optional<double> val_f1_embed;
  std::optional<double> val_f1_lesion;
};

/// Ensemble weights from validation macro-F1 of the two base classifiers.
inline std::pair<double, double> weights_from_f1(std::optional<double> fe,
                                                 std::optional<double> fl) {
  if (!fe || !fl || (*fe == 0.0 && *fl == 0.0)) return {1.0, 1.0};
  return {*fe, *fl};
}

/// SMOTE on each view (same seed), both base classifiers, then weights.
inline EnsembleFit fit_ensemble(const std::vector<EnsembleSample>& train,
                                const std::vector<EnsembleSample>& val,
                                const EnsembleParams& hp) {
  if (train.empty()) throw DataError("ensemble: empty training set");
  LabeledDataset de{Matrix(0, train.front().embed.size()), {}, FeatureKind::SectionEmbedding};
  LabeledDataset dl{Matrix(0, 2), {}, FeatureKind::LesionFeatures};
  for (const auto& s : train) {
    if (s.embed.size() != de.dim()) throw DataError("ensemble: inconsistent embedding width");
    de.add(s.embed, s.label);
    dl.add(s.lesion, s.label);
  }
  for (auto n : de.counts())
    if (n == 0) throw DataError("all categories required for training");

  EnsembleFit fit;
  const auto be = smote_oversample(de, hp.smote_k, hp.smote_seed);
  const auto bl = smote_oversample(dl, hp.smote_k, hp.smote_seed);
  fit.model.embed_clf = train_logreg_sag(be, hp.logreg);
  fit.model.lesion_clf = train_decision_tree(bl, hp.tree);

  if (!val.empty()) {
    std::vector<LiradsCategory> truth, pe, pl;
    for (const auto& s : val) {
      truth.push_back(s.label);
      pe.push_back(argmax_category(predict_proba_logreg(fit.model.embed_clf, s.embed)));
      pl.push_back(argmax_category(predict_proba_tree(fit.model.lesion_clf, s.lesion)));
    }
    fit.val_f1_embed = macro_f1(truth, pe);
    fit.val_f1_lesion = macro_f1(truth, pl);
  }
  std::tie(fit.model.w_embed, fit.model.w_lesion) =
      weights_from_f1(fit.val_f1_embed, fit.val_f1_lesion);
  return fit;
}

// ---------------------------------------------------------------------------
// Serialization

namespace model_io {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DataError("bad number: " + s);
  }
  if (used != s.size()) throw DataError("bad number: " + s);
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ls(line);
  while (std::getline(ls, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace model_io

/// Three lines, one per category: w_1 ... w_p b.
inline void write_logreg(std::ostream& os, const LogRegModel& m) {
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    for (double v : m.W.row(c)) os << model_io::fmt17(v) << ' ';
    os << model_io::fmt17(m.b[c]) << '\n';
  }
}

inline LogRegModel read_logreg(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) row.push_back(model_io::parse_double(tok));
    rows.push_back(std::move(row));
  }
  if (rows.size() != kNumCategories || rows[0].size() < 1)
    throw DataError("logistic regression file: expected 3 rows");
  LogRegModel m;
  const std::size_t p = rows[0].size() - 1;
  m.W = Matrix(kNumCategories, p);
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (rows[c].size() != p + 1) throw DataError("logistic regression file: ragged rows");
    for (std::size_t j = 0; j < p; ++j) m.W(c, j) = rows[c][j];
    m.b[c] = rows[c][p];
  }
  return m;
}

/// Pre-order TSV: node_id, feature, threshold, left_id, right_id, leaf_probs.
inline void write_tree(std::ostream& os, const TreeModel& t) {
  os << "# n_features=" << t.n_features << " max_depth=" << t.max_depth << '\n';
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    os << i << '\t' << n.feature << '\t' << model_io::fmt17(n.threshold) << '\t' << n.left << '\t'
       << n.right << '\t';
    for (std::size_t c = 0; c < kNumCategories; ++c)
      os << (c ? ";" : "") << model_io::fmt17(n.probs[c]);
    os << '\n';
  }
}

inline TreeModel read_tree(std::istream& is) {
  TreeModel t;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      unsigned long nf = 0;
      int md = 0;
      if (std::sscanf(line.c_str(), "# n_features=%lu max_depth=%d", &nf, &md) == 2) {
        t.n_features = nf;
        t.max_depth = md;
      }
      continue;
    }
    const auto f = model_io::split(line, '\t');
    if (f.size() != 6) throw DataError("tree file: expected 6 columns");
    if (std::stoul(f[0]) != t.nodes.size()) throw DataError("tree file: node ids out of order");
    TreeNode n;
    n.feature = std::stoi(f[1]);
    n.threshold = model_io::parse_double(f[2]);
    n.left = std::stoi(f[3]);
    n.right = std::stoi(f[4]);
    const auto p = model_io::split(f[5], ';');
    if (p.size() != kNumCategories) throw DataError("tree file: expected 3 probabilities");
    for (std::size_t c = 0; c < kNumCategories; ++c) n.probs[c] = model_io::parse_double(p[c]);
    t.nodes.push_back(n);
  }
  if (t.nodes.empty()) throw DataError("tree file: no nodes");
  const int n = static_cast<int>(t.nodes.size());
  for (const auto& node : t.nodes) {
    if (node.is_leaf()) continue;
    if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n ||
        static_cast<std::size_t>(node.feature) >= t.n_features)
      throw DataError("tree file: dangling node reference");
  }
  return t;
}

inline void write_weights(std::ostream& os, const EnsembleModel& m) {
  os << "embed\t" << model_io::fmt17(m.w_embed) << '\n'
     << "lesion\t" << model_io::fmt17(m.w_lesion) << '\n';
}

inline std::pair<double, double> read_weights(std::istream& is) {
  std::map<std::string, double> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = model_io::split(line, '\t');
    if (f.size() != 2) throw DataError("weights file: malformed line");
    kv[f[0]] = model_io::parse_double(f[1]);
  }
  if (!kv.count("embed") || !kv.count("lesion")) throw DataError("weights file: missing weight");
  check_weights(kv["embed"], kv["lesion"]);
  return {kv["embed"], kv["lesion"]};
}

}  // namespace lirads
