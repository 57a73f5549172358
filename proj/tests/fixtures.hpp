#pragma once

// Small hand-built datasets shared by unit tests and the acceptance binary.

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <tuple>
#include <string>
#include <vector>

#include "ivpanel/instruments.hpp"
#include "ivpanel/panel_data.hpp"
#include "ivpanel/rng.hpp"
#include "ivpanel/topic_model.hpp"

namespace fixtures {

/// Four universities x three topics over 2000-2009. Two scholars per
/// university; the cells below have award streams of different shapes,
/// including an empty cell, a single award, an award only in the first year
/// (constant cumulative series) and awards outside the window.
struct UniversityTopicFixture {
  int start = 2000;
  int end = 2009;
  std::vector<ivpanel::ScholarRecord> scholars;
  std::vector<ivpanel::GrantRecord> grants;
};

inline UniversityTopicFixture university_topic_fixture() {
  UniversityTopicFixture f;
  const std::vector<std::string> unis{"mich", "ucla", "mit", "osu"};
  for (const auto& u : unis)
    for (int k = 1; k <= 2; ++k) {
      ivpanel::ScholarRecord s;
      s.scholar_id = u + "_" + std::to_string(k);
      s.gender = ivpanel::Gender::Male;
      s.gender_confidence = 1.0;
      s.first_pub_year = 1990;
      s.affiliation_id = u;
      f.scholars.push_back(s);
    }
  // (scholar, year, topic)
  const std::vector<std::tuple<std::string, int, int>> awards{
      {"mich_1", 2001, 0}, {"mich_2", 2001, 0}, {"mich_1", 2004, 0}, {"mich_2", 2008, 0},  // rising stream
      {"mich_1", 2003, 1},                                                                  // single award
      {"ucla_1", 2000, 2},                                                                  // first-year only
      {"ucla_1", 2002, 1}, {"ucla_2", 2002, 1}, {"ucla_2", 2009, 1},                        // ends on last year
      {"mit_1", 2005, 0},  {"mit_2", 1998, 0},  {"mit_1", 2011, 0},                         // outside window
      {"mit_2", 2006, 2},  {"mit_2", 2007, 2},  {"mit_1", 2007, 2},
      {"osu_1", 1995, 1},                                                                   // only before window
      {"osu_2", 2003, 2},  {"osu_2", 2003, 0},  {"osu_1", 2009, 0},
  };
  int id = 0;
  for (const auto& [s, y, t] : awards) {
    ivpanel::GrantRecord g;
    g.grant_id = "g" + std::to_string(100 + id++);
    g.scholar_id = s;
    g.award_year = y;
    g.amount_usd = 10000.0;
    g.duration_years = 3;
    g.topic_id = t;
    f.grants.push_back(g);
  }
  return f;
}

/// Brute-force dominance for one cell: r(t) = number of in-window awards
/// up to year end + start - t, then min-max scaled within the cell.
inline std::map<ivpanel::Cell, std::vector<double>> dominance_oracle(const UniversityTopicFixture& f) {
  std::map<std::string, std::string> aff;
  for (const auto& s : f.scholars) aff[s.scholar_id] = s.affiliation_id;
  std::map<ivpanel::Cell, std::vector<int>> years;
  for (const auto& g : f.grants) years[{aff[g.scholar_id], *g.topic_id}].push_back(g.award_year);
  std::map<ivpanel::Cell, std::vector<double>> out;
  for (const auto& [cell, ys] : years) {
    std::vector<double> r;
    for (int t = f.start; t <= f.end; ++t) {
      int n = 0;
      for (int y : ys)
        if (y >= f.start && y <= f.end + f.start - t) ++n;
      r.push_back(n);
    }
    double lo = r[0], hi = r[0];
    for (double v : r) {
      lo = v < lo ? v : lo;
      hi = v > hi ? v : hi;
    }
    std::vector<double> n(r.size(), 0.0);
    if (hi > lo)
      for (std::size_t i = 0; i < r.size(); ++i) n[i] = (r[i] - lo) / (hi - lo);
    out[cell] = n;
  }
  return out;
}

struct SyntheticCorpus {
  Eigen::MatrixXd topic_word;  // generating K x V rows
  ivpanel::Corpus corpus;
};

/// Documents drawn from the LDA generative model: topic rows ~ Dirichlet(0.1),
/// document mixtures ~ Dirichlet(doc_alpha).
inline SyntheticCorpus synthetic_lda_corpus(std::uint64_t seed, int K = 3, int V = 50, int M = 300, int N = 100,
                                            double doc_alpha = 0.5) {
  ivpanel::Rng rng(seed);
  auto dirichlet = [&](int n, double a) {
    std::vector<double> v(static_cast<std::size_t>(n));
    double s = 0.0;
    for (auto& x : v) s += x = rng.gamma(a);
    for (auto& x : v) x /= s;
    return v;
  };
  auto draw = [&](const std::vector<double>& p) {
    double u = rng.uniform(), acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (u < (acc += p[i])) return static_cast<int>(i);
    return static_cast<int>(p.size()) - 1;
  };
  SyntheticCorpus out;
  out.topic_word.resize(K, V);
  std::vector<std::vector<double>> rows;
  for (int k = 0; k < K; ++k) {
    rows.push_back(dirichlet(V, 0.1));
    for (int w = 0; w < V; ++w) out.topic_word(k, w) = rows.back()[static_cast<std::size_t>(w)];
  }
  std::vector<std::vector<int>> docs;
  for (int d = 0; d < M; ++d) {
    const auto theta = dirichlet(K, doc_alpha);
    std::vector<int> doc;
    for (int i = 0; i < N; ++i) doc.push_back(draw(rows[static_cast<std::size_t>(draw(theta))]));
    docs.push_back(std::move(doc));
  }
  out.corpus = ivpanel::corpus_from_ids(docs, V);
  return out;
}

/// Smallest over topic permutations of the largest per-topic total-variation
/// distance between fitted and generating rows.
inline double best_match_max_tv(const Eigen::MatrixXd& fitted, const Eigen::MatrixXd& truth) {
  std::vector<int> perm(static_cast<std::size_t>(truth.rows()));
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  double best = 1e300;
  do {
    double worst = 0.0;
    for (Eigen::Index k = 0; k < truth.rows(); ++k)
      worst = std::max(worst, 0.5 * (fitted.row(perm[static_cast<std::size_t>(k)]) - truth.row(k)).cwiseAbs().sum());
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace fixtures
