#pragma once

// Word embeddings: vocabulary, CBOW with negative sampling, cosine
// similarity, lexicon synonym derivation and document averaging.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lirads/error.hpp"
#include "lirads/matrix.hpp"
#include "lirads/random.hpp"
#include "lirads/text_normalizer.hpp"

namespace lirads {

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  Vocabulary() = default;

  /// Tokens in index order with their corpus counts.
  explicit Vocabulary(std::vector<std::pair<std::string, std::size_t>> entries)
      : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!index_.emplace(entries_[i].first, i).second)
        throw DataError("duplicate vocabulary token: " + entries_[i].first);
    }
  }

  std::size_t size() const { return entries_.size(); }
  const std::string& token(std::size_t i) const { return entries_[i].first; }
  std::size_t count(std::size_t i) const { return entries_[i].second; }

  std::optional<std::size_t> index(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::string_view token) const { return index(token).has_value(); }

  const std::vector<std::pair<std::string, std::size_t>>& entries() const { return entries_; }

  /// TSV: token TAB count, in index order.
  void write_tsv(std::ostream& os) const {
    for (const auto& [t, c] : entries_) os << t << '\t' << c << '\n';
  }

  static Vocabulary read_tsv(std::istream& is) {
    std::vector<std::pair<std::string, std::size_t>> entries;
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw DataError("malformed vocabulary line: " + line);
      entries.emplace_back(line.substr(0, tab), std::stoull(line.substr(tab + 1)));
    }
    return Vocabulary(std::move(entries));
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<std::pair<std::string, std::size_t>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Tokens with count >= min_count ranked by descending count (ties
/// lexicographic); the first `cap` are kept and indexed in rank order.
inline Vocabulary build_vocabulary(const std::vector<TokenSeq>& corpus, std::size_t cap = 2000,
                                   std::size_t min_count = 50) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& seq : corpus)
    for (const auto& t : seq) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [t, c] : counts)
    if (c >= min_count) ranked.emplace_back(t, c);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > cap) ranked.resize(cap);
  if (ranked.size() < 2) throw DataError("vocabulary too small");
  return Vocabulary(std::move(ranked));
}

// ---------------------------------------------------------------------------
// Model

struct EmbeddingModel {
  Matrix w_in;   // V x d context (input) vectors; used for similarity and documents
  Matrix w_out;  // V x d output vectors
  int trained_epochs = 0;

  std::size_t dim() const { return w_in.cols(); }
  std::size_t vocab_size() const { return w_in.rows(); }

  friend bool operator==(const EmbeddingModel&, const EmbeddingModel&) = default;
};

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

struct RowGradient {
  std::size_t row;
  std::vector<double> grad;
};

struct CbowLossGrad {
  double loss = 0.0;
  std::vector<RowGradient> w_in;   // one entry per distinct context row
  std::vector<RowGradient> w_out;  // one entry per distinct target/negative row
};

/// Negative-sampling CBOW loss for one (context, target) example,
///   E = -log s(u_t . h) - sum_j log s(-u_j . h),  h = mean of W_in[context],
/// with exact gradients for every touched row. Repeated indices accumulate.
inline CbowLossGrad cbow_ns_loss_and_grads(const EmbeddingModel& model,
                                           std::span<const std::size_t> context,
                                           std::size_t target,
                                           std::span<const std::size_t> negatives) {
  if (context.empty()) throw DataError("empty context window");
  const std::size_t V = model.vocab_size();
  const std::size_t d = model.dim();
  auto check = [&](std::size_t i) {
    if (i >= V) throw DataError("token index out of range");
  };
  for (auto c : context) check(c);
  check(target);
  for (auto n : negatives) {
    check(n);
    if (n == target) throw DataError("target must not be among the negatives");
  }

  std::vector<double> h(d, 0.0);
  for (auto c : context) {
    const auto row = model.w_in.row(c);
    for (std::size_t k = 0; k < d; ++k) h[k] += row[k];
  }
  const double inv = 1.0 / static_cast<double>(context.size());
  for (auto& v : h) v *= inv;

  CbowLossGrad out;
  std::vector<double> grad_h(d, 0.0);
  std::map<std::size_t, std::size_t> out_slot;
  auto accumulate_out = [&](std::size_t row, double g) {
    auto [it, fresh] = out_slot.emplace(row, out.w_out.size());
    if (fresh) out.w_out.push_back({row, std::vector<double>(d, 0.0)});
    auto& gr = out.w_out[it->second].grad;
    const auto u = model.w_out.row(row);
    for (std::size_t k = 0; k < d; ++k) {
      gr[k] += g * h[k];
      grad_h[k] += g * u[k];
    }
  };

  const double st = dot(model.w_out.row(target), h);
  out.loss -= log_sigmoid(st);
  accumulate_out(target, sigmoid(st) - 1.0);
  for (auto n : negatives) {
    const double sn = dot(model.w_out.row(n), h);
    out.loss -= log_sigmoid(-sn);
    accumulate_out(n, sigmoid(sn));
  }

  std::map<std::size_t, std::size_t> in_slot;
  for (auto c : context) {
    auto [it, fresh] = in_slot.emplace(c, out.w_in.size());
    if (fresh) out.w_in.push_back({c, std::vector<double>(d, 0.0)});
    auto& gr = out.w_in[it->second].grad;
    for (std::size_t k = 0; k < d; ++k) gr[k] += grad_h[k] * inv;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct CbowParams {
  int dim = 100;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double lr0 = 0.025;
  double noise_exponent = 0.75;
  std::uint64_t seed = 1;
  /// 1 = deterministic single-threaded; >1 = unsynchronized parallel updates.
  int threads = 1;

  void validate() const {
    if (window < 1) throw ConfigError("cbow: window must be >= 1");
    if (dim < 2) throw ConfigError("cbow: dim must be >= 2");
    if (epochs < 1) throw ConfigError("cbow: epochs must be >= 1");
    if (negatives < 0) throw ConfigError("cbow: negatives must be >= 0");
    if (!(lr0 > 0.0)) throw ConfigError("cbow: lr0 must be positive");
    if (threads < 1) throw ConfigError("cbow: threads must be >= 1");
  }
};

struct CbowStats {
  /// Mean per-example loss of each epoch.
  std::vector<double> epoch_loss;
};

/// Samples token indices from counts^exponent.
class NoiseSampler {
 public:
  NoiseSampler(const Vocabulary& vocab, double exponent) {
    cumulative_.reserve(vocab.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      acc += std::pow(static_cast<double>(vocab.count(i)), exponent);
      cumulative_.push_back(acc);
    }
    total_ = acc;
  }

  std::size_t operator()(Rng& rng) const {
    const double u = rng.uniform() * total_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<std::size_t>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

namespace cbow_detail {

template <bool Shared>
inline double load(const double& x) {
  if constexpr (Shared)
    return std::atomic_ref<double>(const_cast<double&>(x)).load(std::memory_order_relaxed);
  else
    return x;
}

template <bool Shared>
inline void store(double& x, double v) {
  if constexpr (Shared)
    std::atomic_ref<double>(x).store(v, std::memory_order_relaxed);
  else
    x = v;
}

struct Worker {
  std::vector<double> h, grad_h;
  std::vector<std::size_t> context, negatives;
  double loss = 0.0;
  std::size_t examples = 0;
};

/// One SGD step on the exact negative-sampling gradient.
template <bool Shared>
inline void sgd_step(EmbeddingModel& m, Worker& w, std::size_t target, double lr) {
  const std::size_t d = m.dim();
  std::fill(w.h.begin(), w.h.end(), 0.0);
  std::fill(w.grad_h.begin(), w.grad_h.end(), 0.0);
  for (auto c : w.context) {
    const double* row = m.w_in.row(c).data();
    for (std::size_t k = 0; k < d; ++k) w.h[k] += load<Shared>(row[k]);
  }
  const double inv = 1.0 / static_cast<double>(w.context.size());
  for (auto& v : w.h) v *= inv;

  auto update_out = [&](std::size_t row_index, double label) {
    double* u = m.w_out.row(row_index).data();
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += load<Shared>(u[k]) * w.h[k];
    w.loss -= label > 0 ? log_sigmoid(s) : log_sigmoid(-s);
    const double g = sigmoid(s) - label;
    for (std::size_t k = 0; k < d; ++k) {
      const double uk = load<Shared>(u[k]);
      w.grad_h[k] += g * uk;
      store<Shared>(u[k], uk - lr * g * w.h[k]);
    }
  };
  update_out(target, 1.0);
  for (auto n : w.negatives) update_out(n, 0.0);

  for (auto c : w.context) {
    double* row = m.w_in.row(c).data();
    for (std::size_t k = 0; k < d; ++k)
      store<Shared>(row[k], load<Shared>(row[k]) - lr * w.grad_h[k] * inv);
  }
  ++w.examples;
}

template <bool Shared>
inline void train_range(EmbeddingModel& m, const std::vector<std::vector<std::size_t>>& seqs,
                        std::size_t begin, std::size_t end, const CbowParams& hp,
                        const NoiseSampler& noise, Rng& rng, Worker& w,
                        std::atomic<std::size_t>& processed, std::size_t total) {
  const std::size_t win = static_cast<std::size_t>(hp.window);
  std::size_t local = 0;
  std::size_t seen = processed.load(std::memory_order_relaxed);
  for (std::size_t s = begin; s < end; ++s) {
    const auto& seq = seqs[s];
    for (std::size_t t = 0; t < seq.size(); ++t) {
      w.context.clear();
      const std::size_t lo = t >= win ? t - win : 0;
      const std::size_t hi = std::min(seq.size() - 1, t + win);
      for (std::size_t c = lo; c <= hi; ++c)
        if (c != t) w.context.push_back(seq[c]);
      if (w.context.empty()) continue;
      const std::size_t target = seq[t];
      w.negatives.clear();
      for (int k = 0; k < hp.negatives; ++k) {
        std::size_t n;
        do {
          n = noise(rng);
        } while (n == target);
        w.negatives.push_back(n);
      }
      const double progress =
          total > 1 ? static_cast<double>(seen + local) / static_cast<double>(total - 1) : 0.0;
      const double lr = hp.lr0 * (1.0 - 0.99 * std::min(1.0, progress));
      sgd_step<Shared>(m, w, target, lr);
      if (++local == 10000) {
        seen = processed.fetch_add(local, std::memory_order_relaxed) + local;
        local = 0;
      }
    }
  }
  processed.fetch_add(local, std::memory_order_relaxed);
}

}  // namespace cbow_detail

/// Trains CBOW vectors with negative sampling by plain SGD.
///
/// Out-of-vocabulary tokens are dropped before windows are formed; windows
/// are symmetric and truncated at sequence ends. W_in starts uniform in
/// [-0.5/d, 0.5/d], W_out at zero, and the learning rate decays linearly
/// from lr0 to lr0/100 over all updates. With threads == 1 the result is a
/// pure function of (corpus, vocab, hp).
inline EmbeddingModel train_cbow(const std::vector<TokenSeq>& corpus, const Vocabulary& vocab,
                                 const CbowParams& hp, CbowStats* stats = nullptr) {
  hp.validate();
  if (vocab.size() < 2) throw DataError("vocabulary too small");
  const std::size_t V = vocab.size();
  const std::size_t d = static_cast<std::size_t>(hp.dim);

  std::vector<std::vector<std::size_t>> seqs;
  std::size_t per_epoch = 0;
  for (const auto& tokens : corpus) {
    std::vector<std::size_t> ids;
    for (const auto& t : tokens)
      if (auto i = vocab.index(t)) ids.push_back(*i);
    if (ids.size() >= 2) {
      per_epoch += ids.size();
      seqs.push_back(std::move(ids));
    }
  }

  EmbeddingModel m;
  m.w_in = Matrix(V, d);
  m.w_out = Matrix(V, d);
  Rng init(mix_seed(hp.seed, 0));
  for (auto& v : m.w_in.data()) v = (init.uniform() - 0.5) / static_cast<double>(d);

  const NoiseSampler noise(vocab, hp.noise_exponent);
  const std::size_t total = per_epoch * static_cast<std::size_t>(hp.epochs);
  std::atomic<std::size_t> processed{0};
  const std::size_t n_threads =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(hp.threads), seqs.size()));

  std::vector<Rng> rngs;
  std::vector<cbow_detail::Worker> workers(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    rngs.emplace_back(mix_seed(hp.seed, 1 + t));
    workers[t].h.assign(d, 0.0);
    workers[t].grad_h.assign(d, 0.0);
  }

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    for (auto& w : workers) w.loss = 0.0, w.examples = 0;
    if (n_threads == 1) {
      cbow_detail::train_range<false>(m, seqs, 0, seqs.size(), hp, noise, rngs[0], workers[0],
                                      processed, total);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < n_threads; ++t) {
        const std::size_t b = seqs.size() * t / n_threads;
        const std::size_t e = seqs.size() * (t + 1) / n_threads;
        pool.emplace_back([&, t, b, e] {
          cbow_detail::train_range<true>(m, seqs, b, e, hp, noise, rngs[t], workers[t],
                                         processed, total);
        });
      }
      for (auto& th : pool) th.join();
    }
    double loss = 0.0;
    std::size_t n = 0;
    for (const auto& w : workers) loss += w.loss, n += w.examples;
    if (stats) stats->epoch_loss.push_back(n ? loss / static_cast<double>(n) : 0.0);
    ++m.trained_epochs;
  }
  check_invariant(m.w_in.all_finite() && m.w_out.all_finite(),
                  "cbow training produced non-finite weights");
  return m;
}

// ---------------------------------------------------------------------------
// Similarity and lexicon

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("cosine similarity: dimension mismatch");
  const double na = squared_norm(a);
  const double nb = squared_norm(b);
  if (na == 0.0 || nb == 0.0) throw DataError("undefined similarity for zero vector");
  const double c = dot(a, b) / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

struct Synonym {
  std::string token;
  double score = 0.0;

  friend bool operator==(const Synonym&, const Synonym&) = default;
};

/// Root lexicon term -> derived synonyms. Each synonym belongs to one root.
class SynonymMap {
 public:
  struct Entry {
    std::string root;
    std::vector<Synonym> synonyms;

    friend bool operator==(const Entry&, const Entry&) = default;
  };

  void add_root(const std::string& root) {
    if (find_entry(root) == nullptr) entries_.push_back({root, {}});
  }

  void add(const std::string& root, Synonym syn) {
    add_root(root);
    if (auto it = root_of_.find(syn.token); it != root_of_.end()) {
      if (it->second == root) return;
      throw InvariantError("synonym '" + syn.token + "' already assigned to root '" +
                           it->second + "'");
    }
    root_of_.emplace(syn.token, root);
    for (auto& e : entries_)
      if (e.root == root) e.synonyms.push_back(std::move(syn));
  }

  const std::vector<Entry>& entries() const { return entries_; }

  const Entry* find_entry(std::string_view root) const {
    for (const auto& e : entries_)
      if (e.root == root) return &e;
    return nullptr;
  }

  /// Root the token is a synonym of, if any.
  const std::string* root_of(const std::string& token) const {
    auto it = root_of_.find(token);
    return it == root_of_.end() ? nullptr : &it->second;
  }

  std::size_t synonym_count() const { return root_of_.size(); }
  bool empty() const { return root_of_.empty(); }

  /// TSV: root TAB synonym TAB score.
  void write_tsv(std::ostream& os) const {
    char buf[32];
    for (const auto& e : entries_)
      for (const auto& s : e.synonyms) {
        std::snprintf(buf, sizeof buf, "%.6f", s.score);
        os << e.root << '\t' << s.token << '\t' << buf << '\n';
      }
  }

  static SynonymMap read_tsv(std::istream& is) {
    SynonymMap m;
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      std::string root, token, score;
      if (!std::getline(ls, root, '\t') || !std::getline(ls, token, '\t') ||
          !std::getline(ls, score))
        throw DataError("malformed synonym line: " + line);
      m.add(root, {token, std::stod(score)});
    }
    return m;
  }

  friend bool operator==(const SynonymMap& a, const SynonymMap& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::string> root_of_;
};

struct SynonymDerivation {
  SynonymMap map;
  std::vector<std::string> warnings;
};

/// For every in-vocabulary root, the k nearest vocabulary tokens (cosine over
/// W_in) scoring above `threshold`, excluding all roots. A token qualifying
/// for several roots goes to the most similar one (earlier root on ties).
inline SynonymDerivation derive_lexicon_synonyms(const EmbeddingModel& model,
                                                 const Vocabulary& vocab,
                                                 const std::vector<std::string>& roots,
                                                 double threshold = 0.80, std::size_t k = 20) {
  SynonymDerivation out;
  std::unordered_map<std::string, std::size_t> root_rank;
  for (std::size_t r = 0; r < roots.size(); ++r) root_rank.emplace(roots[r], r);

  auto nonzero = [&](std::size_t i) { return squared_norm(model.w_in.row(i)) > 0.0; };

  struct Candidate {
    std::size_t root;
    std::size_t token;
    double score;
  };
  std::vector<Candidate> all;
  for (std::size_t r = 0; r < roots.size(); ++r) {
    const auto ri = vocab.index(roots[r]);
    if (!ri) {
      out.warnings.push_back("lexicon root not in vocabulary: " + roots[r]);
      continue;
    }
    if (!nonzero(*ri)) {
      out.warnings.push_back("lexicon root has a zero vector: " + roots[r]);
      continue;
    }
    std::vector<Candidate> mine;
    for (std::size_t t = 0; t < vocab.size(); ++t) {
      if (t == *ri || root_rank.count(vocab.token(t)) || !nonzero(t)) continue;
      const double s = cosine_similarity(model.w_in.row(*ri), model.w_in.row(t));
      if (s > threshold) mine.push_back({r, t, s});
    }
    std::sort(mine.begin(), mine.end(), [&](const auto& a, const auto& b) {
      return a.score != b.score ? a.score > b.score : vocab.token(a.token) < vocab.token(b.token);
    });
    if (mine.size() > k) mine.resize(k);
    all.insert(all.end(), mine.begin(), mine.end());
  }

  // Keep each token under its best root.
  std::unordered_map<std::size_t, Candidate> best;
  for (const auto& c : all) {
    auto [it, fresh] = best.emplace(c.token, c);
    if (!fresh && (c.score > it->second.score ||
                   (c.score == it->second.score && c.root < it->second.root)))
      it->second = c;
  }
  for (std::size_t r = 0; r < roots.size(); ++r) out.map.add_root(roots[r]);
  for (const auto& c : all) {
    const auto& b = best.at(c.token);
    if (b.root == c.root) out.map.add(roots[c.root], {vocab.token(c.token), c.score});
  }
  return out;
}

/// Replaces synonyms by their lexicon root; order and length preserved.
inline TokenSeq normalize_with_lexicon(const TokenSeq& tokens, const SynonymMap& syn) {
  TokenSeq out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    const std::string* root = syn.root_of(t);
    out.push_back(root ? *root : t);
  }
  return out;
}

struct DocEmbedding {
  std::vector<double> vector;
  /// Fraction of tokens found in the vocabulary (0 for an empty document).
  double coverage = 0.0;
};

/// Per-occurrence mean of W_in rows over in-vocabulary tokens; the zero
/// vector when none is known.
inline DocEmbedding embed_document(const TokenSeq& tokens, const EmbeddingModel& model,
                                   const Vocabulary& vocab) {
  DocEmbedding out;
  out.vector.assign(model.dim(), 0.0);
  std::size_t known = 0;
  for (const auto& t : tokens) {
    const auto i = vocab.index(t);
    if (!i) continue;
    const auto row = model.w_in.row(*i);
    for (std::size_t k = 0; k < row.size(); ++k) out.vector[k] += row[k];
    ++known;
  }
  if (known > 0) {
    const double inv = 1.0 / static_cast<double>(known);
    for (auto& v : out.vector) v *= inv;
  }
  out.coverage = tokens.empty() ? 0.0
                                : static_cast<double>(known) / static_cast<double>(tokens.size());
  return out;
}

// ---------------------------------------------------------------------------
// Embedding file: "V d" header, then "token v1 ... vd" with 9 significant digits.

inline void write_embedding_matrix(std::ostream& os, const Vocabulary& vocab, const Matrix& m) {
  if (m.rows() != vocab.size()) throw InvariantError("embedding rows do not match vocabulary");
  os << m.rows() << ' ' << m.cols() << '\n';
  char buf[40];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    os << vocab.token(i);
    for (double v : m.row(i)) {
      std::snprintf(buf, sizeof buf, " %.9g", v);
      os << buf;
    }
    os << '\n';
  }
}

struct EmbeddingFile {
  std::vector<std::string> tokens;
  Matrix matrix;
};

inline EmbeddingFile read_embedding_matrix(std::istream& is) {
  EmbeddingFile out;
  std::size_t V = 0, d = 0;
  std::string header;
  if (!std::getline(is, header)) throw DataError("embedding file: missing header");
  {
    std::istringstream hs(header);
    if (!(hs >> V >> d) || d == 0) throw DataError("embedding file: bad header");
  }
  out.matrix = Matrix(V, d);
  std::string line;
  for (std::size_t i = 0; i < V; ++i) {
    if (!std::getline(is, line)) throw DataError("embedding file: truncated");
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    for (std::size_t k = 0; k < d; ++k) {
      std::string num;
      if (!(ls >> num)) throw DataError("embedding file: short row for " + token);
      out.matrix(i, k) = std::stod(num);
    }
    out.tokens.push_back(std::move(token));
  }
  return out;
}

}  // namespace lirads
