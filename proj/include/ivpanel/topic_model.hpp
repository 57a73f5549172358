#pragma once

// Latent Dirichlet allocation over grant texts, fitted by collapsed Gibbs
// sampling.

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "ivpanel/error.hpp"
#include "ivpanel/rng.hpp"

namespace ivpanel {

using StopWords = std::unordered_set<std::string>;

inline StopWords load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("topic_model", "load_stopwords", "cannot open stop-word list: " + path);
  StopWords out;
  std::string line;
  while (std::getline(in, line)) {
    std::string w;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) w += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!w.empty()) out.insert(w);
  }
  return out;
}

/// Lowercased runs of ASCII letters and digits.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 128 && std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

struct Corpus {
  std::vector<std::vector<int>> docs;  // token ids
  std::vector<std::string> vocab;      // sorted
  std::unordered_map<std::string, int> index;
  std::vector<std::string> doc_ids;
  std::vector<bool> empty;  // true when nothing survived preprocessing

  std::size_t size() const { return docs.size(); }
  std::size_t tokens() const {
    std::size_t n = 0;
    for (const auto& d : docs) n += d.size();
    return n;
  }
  std::size_t empty_count() const { return static_cast<std::size_t>(std::count(empty.begin(), empty.end(), true)); }

  std::vector<std::string> words(std::size_t d) const {
    std::vector<std::string> out;
    for (int w : docs[d]) out.push_back(vocab[static_cast<std::size_t>(w)]);
    return out;
  }
};

/// Builds a corpus with an alphabetically ordered vocabulary. `ids` may be
/// empty, in which case documents are numbered.
inline Corpus preprocess(const std::vector<std::string>& raw_docs, const StopWords& stopwords,
                         std::vector<std::string> ids = {}) {
  if (raw_docs.empty()) throw DataError("topic_model", "preprocess", "no documents");
  if (!ids.empty() && ids.size() != raw_docs.size())
    throw DataError("topic_model", "preprocess", "document ids do not match document count");
  std::vector<std::vector<std::string>> toks;
  std::set<std::string> vocab;
  for (const auto& text : raw_docs) {
    auto t = tokenize(text);
    std::erase_if(t, [&](const std::string& w) { return stopwords.count(w) > 0; });
    vocab.insert(t.begin(), t.end());
    toks.push_back(std::move(t));
  }
  if (vocab.empty()) throw DataError("topic_model", "preprocess", "every document is empty after preprocessing");

  Corpus c;
  c.vocab.assign(vocab.begin(), vocab.end());
  for (std::size_t i = 0; i < c.vocab.size(); ++i) c.index[c.vocab[i]] = static_cast<int>(i);
  for (std::size_t d = 0; d < toks.size(); ++d) {
    std::vector<int> doc;
    doc.reserve(toks[d].size());
    for (const auto& w : toks[d]) doc.push_back(c.index.at(w));
    c.empty.push_back(doc.empty());
    c.docs.push_back(std::move(doc));
    c.doc_ids.push_back(ids.empty() ? std::to_string(d) : ids[d]);
  }
  return c;
}

/// Corpus from pre-tokenized integer documents over a vocabulary of size V
/// (words named w0, w1, ...). Used for synthetic corpora.
inline Corpus corpus_from_ids(const std::vector<std::vector<int>>& docs, int vocab_size) {
  Corpus c;
  for (int v = 0; v < vocab_size; ++v) {
    c.vocab.push_back("w" + std::to_string(v));
    c.index[c.vocab.back()] = v;
  }
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (int w : docs[d])
      if (w < 0 || w >= vocab_size) throw DataError("topic_model", "corpus_from_ids", "token id out of range");
    c.docs.push_back(docs[d]);
    c.empty.push_back(docs[d].empty());
    c.doc_ids.push_back(std::to_string(d));
  }
  return c;
}

struct LdaConfig {
  int K = 30;
  std::optional<double> alpha;  // default 50 / K
  double eta = 0.01;
  int iterations = 1000;
  int burn_in = 200;
  std::uint64_t seed = 1;

  double alpha_value() const { return alpha ? *alpha : 50.0 / K; }

  void validate() const {
    if (K < 1) throw ConfigError("topic_model", "fit_lda", "K must be >= 1");
    if (iterations < 1) throw ConfigError("topic_model", "fit_lda", "iterations must be >= 1");
    if (burn_in < 0 || burn_in >= iterations)
      throw ConfigError("topic_model", "fit_lda", "burn_in must lie in [0, iterations)");
    if (!(alpha_value() > 0.0) || !(eta > 0.0)) throw ConfigError("topic_model", "fit_lda", "priors must be positive");
  }
};

struct TopicModel {
  int K = 0;
  std::vector<std::string> vocab;
  std::vector<std::string> doc_ids;
  Eigen::MatrixXd topic_word;  // K x V
  Eigen::MatrixXd doc_topic;   // M x K
  double alpha = 0.0;
  double eta = 0.0;
  int iterations = 0;
  int burn_in = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> assignments;  // final topic of each token
  std::vector<double> log_likelihood_trace;   // after burn-in, every 10 sweeps and at the end
  std::vector<std::string> warnings;
  bool fitted = false;

  void require_fitted(const char* op) const {
    if (!fitted) throw StateError("topic_model", op, "model has not been fitted");
  }
};

/// Collapsed joint log-likelihood log p(w | z) + log p(z) of a topic
/// assignment under symmetric Dirichlet priors.
inline double lda_log_likelihood(const Corpus& c, const std::vector<std::vector<int>>& z, int K, double alpha,
                                 double eta) {
  const auto V = c.vocab.size();
  std::vector<double> nkw(static_cast<std::size_t>(K) * V, 0.0), nk(static_cast<std::size_t>(K), 0.0);
  double doc_part = 0.0;
  std::vector<double> ndk(static_cast<std::size_t>(K));
  for (std::size_t d = 0; d < c.docs.size(); ++d) {
    std::fill(ndk.begin(), ndk.end(), 0.0);
    for (std::size_t i = 0; i < c.docs[d].size(); ++i) {
      const auto k = static_cast<std::size_t>(z[d][i]);
      ndk[k] += 1.0;
      nkw[k * V + static_cast<std::size_t>(c.docs[d][i])] += 1.0;
      nk[k] += 1.0;
    }
    doc_part += std::lgamma(K * alpha) - K * std::lgamma(alpha) - std::lgamma(c.docs[d].size() + K * alpha);
    for (double n : ndk) doc_part += std::lgamma(n + alpha);
  }
  double word_part = 0.0;
  const double Vd = static_cast<double>(V);
  for (std::size_t k = 0; k < static_cast<std::size_t>(K); ++k) {
    word_part += std::lgamma(Vd * eta) - Vd * std::lgamma(eta) - std::lgamma(nk[k] + Vd * eta);
    for (std::size_t w = 0; w < V; ++w) word_part += std::lgamma(nkw[k * V + w] + eta);
  }
  return word_part + doc_part;
}

/// Collapsed Gibbs sampler. Initial topics come from a per-document stream
/// mix_seed(seed, d); sweeps share one stream seeded from `seed`. Estimates
/// use the final sample.
inline TopicModel fit_lda(const Corpus& c, const LdaConfig& cfg) {
  cfg.validate();
  const auto K = static_cast<std::size_t>(cfg.K);
  const auto V = c.vocab.size();
  const auto M = c.docs.size();
  const double alpha = cfg.alpha_value(), eta = cfg.eta, Veta = static_cast<double>(V) * eta;

  TopicModel m;
  m.K = cfg.K;
  m.vocab = c.vocab;
  m.doc_ids = c.doc_ids;
  m.alpha = alpha;
  m.eta = eta;
  m.iterations = cfg.iterations;
  m.burn_in = cfg.burn_in;
  m.seed = cfg.seed;
  if (V < K)
    m.warnings.push_back("vocabulary size " + std::to_string(V) + " is smaller than K = " + std::to_string(K));

  std::vector<int> nwk(V * K, 0), ndk(M * K, 0), nk(K, 0);
  auto& z = m.assignments;
  z.resize(M);
  for (std::size_t d = 0; d < M; ++d) {
    Rng init(mix_seed(cfg.seed, d, 0x1DA));
    z[d].resize(c.docs[d].size());
    for (std::size_t i = 0; i < c.docs[d].size(); ++i) {
      const auto k = static_cast<std::size_t>(init.below(K));
      const auto w = static_cast<std::size_t>(c.docs[d][i]);
      z[d][i] = static_cast<int>(k);
      ++nwk[w * K + k];
      ++ndk[d * K + k];
      ++nk[k];
    }
  }

  Rng rng(mix_seed(cfg.seed, 0x5EED, 0x1DA));
  std::vector<double> p(K);
  for (int it = 1; it <= cfg.iterations; ++it) {
    for (std::size_t d = 0; d < M; ++d) {
      int* nd = &ndk[d * K];
      for (std::size_t i = 0; i < c.docs[d].size(); ++i) {
        const auto w = static_cast<std::size_t>(c.docs[d][i]);
        int* nw = &nwk[w * K];
        auto k = static_cast<std::size_t>(z[d][i]);
        --nw[k];
        --nd[k];
        --nk[k];
        double total = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
          total += (nd[j] + alpha) * (nw[j] + eta) / (nk[j] + Veta);
          p[j] = total;
        }
        const double u = rng.uniform() * total;
        k = 0;
        while (k + 1 < K && p[k] <= u) ++k;
        z[d][i] = static_cast<int>(k);
        ++nw[k];
        ++nd[k];
        ++nk[k];
      }
    }
    if (it > cfg.burn_in && ((it - cfg.burn_in) % 10 == 0 || it == cfg.iterations))
      m.log_likelihood_trace.push_back(lda_log_likelihood(c, z, cfg.K, alpha, eta));
  }

  m.topic_word.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(V));
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t w = 0; w < V; ++w)
      m.topic_word(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(w)) = (nwk[w * K + k] + eta) / (nk[k] + Veta);
  m.doc_topic.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(K));
  for (std::size_t d = 0; d < M; ++d) {
    const double nd = static_cast<double>(c.docs[d].size());
    for (std::size_t k = 0; k < K; ++k)
      m.doc_topic(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) =
          (ndk[d * K + k] + alpha) / (nd + static_cast<double>(K) * alpha);
  }
  m.fitted = true;
  return m;
}

/// argmax of the document's topic row; ties go to the lowest topic index.
inline int assign_topic(const TopicModel& m, std::size_t doc_index) {
  m.require_fitted("assign_topic");
  if (doc_index >= static_cast<std::size_t>(m.doc_topic.rows()))
    throw DataError("topic_model", "assign_topic", "document index " + std::to_string(doc_index) + " out of range");
  const auto row = m.doc_topic.row(static_cast<Eigen::Index>(doc_index));
  int best = 0;
  for (Eigen::Index k = 1; k < row.size(); ++k)
    if (row(k) > row(best)) best = static_cast<int>(k);
  return best;
}

struct Keyword {
  std::string word;
  double probability = 0.0;
};

/// The k most probable words per topic, descending (ties: vocabulary order).
inline std::vector<std::vector<Keyword>> top_keywords(const TopicModel& m, std::size_t k = 5,
                                                      std::vector<std::string>* warnings = nullptr) {
  m.require_fitted("top_keywords");
  const auto V = m.vocab.size();
  if (k > V) {
    if (warnings) warnings->push_back("requested " + std::to_string(k) + " keywords, vocabulary has " + std::to_string(V));
    k = V;
  }
  std::vector<std::vector<Keyword>> out;
  std::vector<std::size_t> order(V);
  for (int t = 0; t < m.K; ++t) {
    std::iota(order.begin(), order.end(), 0);
    const auto row = m.topic_word.row(t);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return row(static_cast<Eigen::Index>(a)) > row(static_cast<Eigen::Index>(b));
    });
    std::vector<Keyword> kw;
    for (std::size_t i = 0; i < k; ++i) kw.push_back({m.vocab[order[i]], row(static_cast<Eigen::Index>(order[i]))});
    out.push_back(std::move(kw));
  }
  return out;
}

inline nlohmann::json to_json(const TopicModel& m) {
  m.require_fitted("export");
  auto rows = [](const Eigen::MatrixXd& a) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      std::vector<double> r(static_cast<std::size_t>(a.cols()));
      for (Eigen::Index j = 0; j < a.cols(); ++j) r[static_cast<std::size_t>(j)] = a(i, j);
      out.push_back(r);
    }
    return out;
  };
  return {{"K", m.K},
          {"vocab", m.vocab},
          {"doc_ids", m.doc_ids},
          {"topic_word", rows(m.topic_word)},
          {"doc_topic", rows(m.doc_topic)},
          {"config", {{"alpha", m.alpha}, {"eta", m.eta}, {"iterations", m.iterations}, {"burn_in", m.burn_in}}},
          {"seed", m.seed},
          {"log_likelihood", m.log_likelihood_trace.empty() ? 0.0 : m.log_likelihood_trace.back()}};
}

}  // namespace ivpanel
