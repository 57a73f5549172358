#pragma once

// Scholar / grant / publication / context records and the scholar-year panel.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ivpanel/csv.hpp"
#include "ivpanel/error.hpp"

namespace ivpanel {

enum class Gender { Male, Female, Unknown };

inline Gender parse_gender(const std::string& s, const std::string& where) {
  std::string v;
  for (char c : s) v += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (v == "male" || v == "m") return Gender::Male;
  if (v == "female" || v == "f") return Gender::Female;
  if (v.empty() || v == "unknown") return Gender::Unknown;
  throw SchemaError("panel_data", "load_panel", where + ": gender must be male, female or unknown, got '" + s + "'");
}

inline std::string to_string(Gender g) {
  return g == Gender::Male ? "male" : g == Gender::Female ? "female" : "unknown";
}

struct ScholarRecord {
  std::string scholar_id;
  Gender gender = Gender::Unknown;
  double gender_confidence = 0.0;
  std::optional<int> first_pub_year;
  std::string affiliation_id;
};

struct GrantRecord {
  std::string grant_id;
  std::string scholar_id;
  int award_year = 0;
  double amount_usd = 0.0;
  int duration_years = 1;
  std::string title;
  std::string abstract;
  std::optional<int> topic_id;
};

struct PublicationRecord {
  std::string pub_id;
  std::string scholar_id;
  int year = 0;
  double citations = 0.0;
  double citescore = 0.0;
  std::vector<std::string> coauthor_ids;
};

/// One context.csv row. Empty cells stay unset; rows that need them are
/// rejected rather than imputed.
struct ContextRecord {
  std::string affiliation_id;
  int year = 0;
  std::optional<long long> qs_rank;
  std::optional<long long> usnews_rank;
  std::optional<double> employer_reputation;
  std::optional<double> ln_pubs_affil;
  std::optional<double> ln_cites_affil;
  std::string field_id;
  std::optional<double> ln_pubs_field;
  std::optional<double> ln_cites_field;
};

enum class Metric { ArticleCount, AvgCitations, AvgCitescore };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::ArticleCount: return "article_count";
    case Metric::AvgCitations: return "avg_citations";
    case Metric::AvgCitescore: return "avg_citescore";
  }
  return "?";
}

inline Metric parse_metric(const std::string& s) {
  if (s == "article_count") return Metric::ArticleCount;
  if (s == "avg_citations") return Metric::AvgCitations;
  if (s == "avg_citescore") return Metric::AvgCitescore;
  throw ConfigError("panel_data", "parse_metric", "unknown metric '" + s + "'");
}

struct PanelObservation {
  std::string scholar_id;
  std::string affiliation_id;
  int year = 0;
  int funded = 0;
  double article_count = 0.0;
  double avg_citations = 0.0;
  double avg_citescore = 0.0;
  double citescore_top10 = 0.0;
  double citescore_bottom10 = 0.0;
  double academic_age = 0.0;
  double ln_grant_amount = 0.0;
  double gender = 0.0;  // male = 1
  double initial_article_count = 0.0;
  double initial_avg_citations = 0.0;
  double initial_avg_citescore = 0.0;
  double ln_pubs_field = 0.0;
  double ln_cites_field = 0.0;
  double ln_pubs_affil = 0.0;
  double ln_cites_affil = 0.0;
  double qs_rank = 0.0;
  double usnews_rank = 0.0;
  double employer_reputation = 0.0;
};

/// Names accepted by observation_value().
inline const std::vector<std::string>& observation_columns() {
  static const std::vector<std::string> cols{
      "funded",          "article_count",         "avg_citations",         "avg_citescore",
      "citescore_top10", "citescore_bottom10",    "academic_age",          "ln_grant_amount",
      "gender",          "initial_article_count", "initial_avg_citations", "initial_avg_citescore",
      "ln_pubs_field",   "ln_cites_field",        "ln_pubs_affil",         "ln_cites_affil",
      "qs_rank",         "usnews_rank",           "employer_reputation"};
  return cols;
}

inline double observation_value(const PanelObservation& o, const std::string& name) {
  if (name == "funded") return o.funded;
  if (name == "article_count") return o.article_count;
  if (name == "avg_citations") return o.avg_citations;
  if (name == "avg_citescore") return o.avg_citescore;
  if (name == "citescore_top10") return o.citescore_top10;
  if (name == "citescore_bottom10") return o.citescore_bottom10;
  if (name == "academic_age") return o.academic_age;
  if (name == "ln_grant_amount") return o.ln_grant_amount;
  if (name == "gender") return o.gender;
  if (name == "initial_article_count") return o.initial_article_count;
  if (name == "initial_avg_citations") return o.initial_avg_citations;
  if (name == "initial_avg_citescore") return o.initial_avg_citescore;
  if (name == "ln_pubs_field") return o.ln_pubs_field;
  if (name == "ln_cites_field") return o.ln_cites_field;
  if (name == "ln_pubs_affil") return o.ln_pubs_affil;
  if (name == "ln_cites_affil") return o.ln_cites_affil;
  if (name == "qs_rank") return o.qs_rank;
  if (name == "usnews_rank") return o.usnews_rank;
  if (name == "employer_reputation") return o.employer_reputation;
  throw ConfigError("panel_data", "observation_value", "unknown panel column '" + name + "'");
}

struct Exclusion {
  std::string stage;  // e.g. "missing_context", "gender_confidence"
  std::string scholar_id;
  std::optional<int> year;
  std::string reason;
};

struct PanelConfig {
  int start_year = 2000;
  int end_year = 2019;
  int treatment_cap = 5;     // maximum funded years per grant
  int initial_years = 3;     // history used for initial performance
  double tail_quantile = 0.10;

  void validate() const {
    if (start_year > end_year) throw ConfigError("panel_data", "load_panel", "start_year must be <= end_year");
    if (treatment_cap < 1) throw ConfigError("panel_data", "load_panel", "treatment_cap must be >= 1");
    if (initial_years < 1) throw ConfigError("panel_data", "load_panel", "initial_years must be >= 1");
    if (!(tail_quantile > 0.0 && tail_quantile < 0.5))
      throw ConfigError("panel_data", "load_panel", "tail_quantile must lie in (0, 0.5)");
  }
};

struct PanelDataset {
  PanelConfig config;
  std::vector<ScholarRecord> scholars;
  std::vector<GrantRecord> grants;
  std::vector<PublicationRecord> pubs;
  std::vector<ContextRecord> context;
  std::vector<PanelObservation> observations;  // scholar order of `scholars`, then year
  std::vector<Exclusion> exclusions;

  std::size_t excluded(const std::string& stage) const {
    return static_cast<std::size_t>(
        std::count_if(exclusions.begin(), exclusions.end(), [&](const Exclusion& e) { return e.stage == stage; }));
  }

  const ScholarRecord* find_scholar(const std::string& id) const {
    for (const auto& s : scholars)
      if (s.scholar_id == id) return &s;
    return nullptr;
  }

  std::set<std::string> panel_scholars() const {
    std::set<std::string> ids;
    for (const auto& o : observations) ids.insert(o.scholar_id);
    return ids;
  }
};

// --- Per-scholar derivations -------------------------------------------------

struct AnnualMetrics {
  double avg_citations = 0.0;
  double avg_citescore = 0.0;
  double article_count = 0.0;

  double get(Metric m) const {
    switch (m) {
      case Metric::ArticleCount: return article_count;
      case Metric::AvgCitations: return avg_citations;
      case Metric::AvgCitescore: return avg_citescore;
    }
    return 0.0;
  }
};

namespace detail {

/// Order-independent sum: the values are sorted first so any permutation of
/// the input gives a bit-identical result.
inline double stable_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return std::accumulate(v.begin(), v.end(), 0.0);
}

}  // namespace detail

inline AnnualMetrics aggregate_annual_metrics(const std::vector<PublicationRecord>& pubs, const std::string& scholar_id,
                                              int year) {
  std::vector<double> cites, scores;
  for (const auto& p : pubs) {
    if (p.scholar_id != scholar_id || p.year != year) continue;
    cites.push_back(p.citations);
    scores.push_back(p.citescore);
  }
  AnnualMetrics m;
  if (cites.empty()) return m;
  const double n = static_cast<double>(cites.size());
  m.article_count = n;
  m.avg_citations = detail::stable_sum(std::move(cites)) / n;
  m.avg_citescore = detail::stable_sum(std::move(scores)) / n;
  return m;
}

inline int derive_academic_age(const ScholarRecord& s, int award_year) {
  if (!s.first_pub_year)
    throw DataError("panel_data", "derive_academic_age", "scholar '" + s.scholar_id + "' has no first_pub_year");
  return std::max(0, (award_year - 1) - *s.first_pub_year);
}

/// ln(1 + mean of `metric` over the `years` calendar years before
/// window_start_year). Years without publications contribute zero.
inline double derive_initial_performance(const std::vector<PublicationRecord>& pubs, const std::string& scholar_id,
                                         int window_start_year, Metric metric, int years = 3) {
  double sum = 0.0;
  for (int y = window_start_year - years; y < window_start_year; ++y)
    sum += aggregate_annual_metrics(pubs, scholar_id, y).get(metric);
  return std::log1p(sum / years);
}

/// Removes scholars whose gender_confidence is below `threshold`, together
/// with their panel rows, and records one exclusion per removed scholar.
inline PanelDataset filter_gender_confidence(PanelDataset ds, double threshold = 0.95) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw ConfigError("panel_data", "filter_gender_confidence", "threshold must lie in [0, 1]");
  std::set<std::string> dropped;
  for (const auto& s : ds.scholars)
    if (s.gender_confidence < threshold) dropped.insert(s.scholar_id);
  for (const auto& id : dropped)
    ds.exclusions.push_back({"gender_confidence", id, std::nullopt, "gender_confidence below " + csv::format_double(threshold)});
  auto gone = [&](const std::string& id) { return dropped.count(id) > 0; };
  std::erase_if(ds.scholars, [&](const ScholarRecord& s) { return gone(s.scholar_id); });
  std::erase_if(ds.observations, [&](const PanelObservation& o) { return gone(o.scholar_id); });
  return ds;
}

// --- CiteScore tails ---------------------------------------------------------

enum class Tail { Top, Bottom };

/// Type-7 (linear interpolation) sample quantile of unsorted data.
inline double sample_quantile(std::vector<double> v, double q) {
  if (v.empty()) throw StateError("panel_data", "sample_quantile", "empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct CitescoreTails {
  double bottom = 0.0;  // publications with citescore <= bottom are in the bottom tail
  double top = 0.0;     // publications with citescore >= top are in the top tail

  static CitescoreTails from(const std::vector<PublicationRecord>& all, double q = 0.10) {
    std::vector<double> v;
    v.reserve(all.size());
    for (const auto& p : all) v.push_back(p.citescore);
    if (v.empty())
      throw StateError("panel_data", "citescore_tail_outcome", "global CiteScore distribution is empty");
    return {sample_quantile(v, q), sample_quantile(v, 1.0 - q)};
  }

  bool inside(double citescore, Tail tail) const { return tail == Tail::Top ? citescore >= top : citescore <= bottom; }
};

/// Yearly mean CiteScore where publications outside the tail are replaced by
/// the scholar's average CiteScore over all of their publications.
inline double citescore_tail_outcome(const std::vector<PublicationRecord>& pubs, const std::string& scholar_id,
                                     int year, Tail tail, const CitescoreTails& cut) {
  std::vector<double> all, values;
  for (const auto& p : pubs) {
    if (p.scholar_id != scholar_id) continue;
    all.push_back(p.citescore);
    if (p.year == year) values.push_back(p.citescore);
  }
  if (values.empty()) return 0.0;
  const double scholar_avg = detail::stable_sum(all) / static_cast<double>(all.size());
  for (double& v : values)
    if (!cut.inside(v, tail)) v = scholar_avg;
  const double n = static_cast<double>(values.size());
  return detail::stable_sum(std::move(values)) / n;
}

inline double citescore_tail_outcome(const std::vector<PublicationRecord>& pubs, const std::string& scholar_id,
                                     int year, Tail tail, double q = 0.10) {
  return citescore_tail_outcome(pubs, scholar_id, year, tail, CitescoreTails::from(pubs, q));
}

// --- Record parsing ----------------------------------------------------------

namespace detail {

inline std::optional<double> optional_number(const csv::Table& t, std::size_t r, const std::string& col) {
  if (csv::Table::trim(t.cell(r, col)).empty()) return std::nullopt;
  return t.number(r, col);
}

inline std::optional<long long> optional_integer(const csv::Table& t, std::size_t r, const std::string& col) {
  if (csv::Table::trim(t.cell(r, col)).empty()) return std::nullopt;
  return t.integer(r, col);
}

[[noreturn]] inline void bad(const csv::Table& t, std::size_t r, const std::string& col, const std::string& what) {
  throw SchemaError("panel_data", "load_panel", t.where(r, col) + ": " + what);
}

inline void require_unique(const std::vector<std::string>& ids, const std::string& what) {
  std::set<std::string> seen, dup;
  for (const auto& id : ids)
    if (!seen.insert(id).second) dup.insert(id);
  if (dup.empty()) return;
  std::string list;
  for (const auto& d : dup) list += (list.empty() ? "" : ", ") + d;
  throw IntegrityError("panel_data", "load_panel", "duplicate " + what + ": " + list);
}

}  // namespace detail

inline std::vector<ScholarRecord> parse_scholars(const csv::Table& t) {
  t.require_columns({"scholar_id", "gender", "gender_confidence", "first_pub_year", "affiliation_id"});
  std::vector<ScholarRecord> out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    ScholarRecord s;
    s.scholar_id = csv::Table::trim(t.cell(r, "scholar_id"));
    if (s.scholar_id.empty()) detail::bad(t, r, "scholar_id", "empty id");
    s.gender = parse_gender(csv::Table::trim(t.cell(r, "gender")), t.where(r, "gender"));
    s.gender_confidence = t.number(r, "gender_confidence");
    if (s.gender_confidence < 0.0 || s.gender_confidence > 1.0)
      detail::bad(t, r, "gender_confidence", "must lie in [0, 1]");
    if (auto y = detail::optional_integer(t, r, "first_pub_year")) s.first_pub_year = static_cast<int>(*y);
    s.affiliation_id = csv::Table::trim(t.cell(r, "affiliation_id"));
    out.push_back(std::move(s));
  }
  std::vector<std::string> ids;
  for (const auto& s : out) ids.push_back(s.scholar_id);
  detail::require_unique(ids, "scholar_id in " + t.source());
  return out;
}

inline std::vector<GrantRecord> parse_grants(const csv::Table& t) {
  t.require_columns({"grant_id", "scholar_id", "award_year", "amount_usd", "duration_years", "title", "abstract"});
  const bool has_topic = t.has_column("topic_id");
  std::vector<GrantRecord> out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    GrantRecord g;
    g.grant_id = csv::Table::trim(t.cell(r, "grant_id"));
    g.scholar_id = csv::Table::trim(t.cell(r, "scholar_id"));
    g.award_year = static_cast<int>(t.integer(r, "award_year"));
    g.amount_usd = t.number(r, "amount_usd");
    if (!(g.amount_usd > 0.0)) detail::bad(t, r, "amount_usd", "must be positive");
    g.duration_years = static_cast<int>(t.integer(r, "duration_years"));
    if (g.duration_years < 1) detail::bad(t, r, "duration_years", "must be >= 1");
    g.title = t.cell(r, "title");
    g.abstract = t.cell(r, "abstract");
    if (has_topic) {
      if (auto k = detail::optional_integer(t, r, "topic_id")) {
        if (*k < 0) detail::bad(t, r, "topic_id", "must be non-negative");
        g.topic_id = static_cast<int>(*k);
      }
    }
    out.push_back(std::move(g));
  }
  std::vector<std::string> ids;
  for (const auto& g : out) ids.push_back(g.grant_id);
  detail::require_unique(ids, "grant_id in " + t.source());
  return out;
}

inline std::vector<std::string> split_ids(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = std::min(s.find(';', start), s.size());
    auto id = csv::Table::trim(std::string_view(s).substr(start, end - start));
    if (!id.empty()) out.push_back(std::move(id));
    start = end + 1;
  }
  return out;
}

inline std::vector<PublicationRecord> parse_pubs(const csv::Table& t) {
  t.require_columns({"pub_id", "scholar_id", "year", "citations", "citescore", "coauthor_ids"});
  std::vector<PublicationRecord> out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    PublicationRecord p;
    p.pub_id = csv::Table::trim(t.cell(r, "pub_id"));
    p.scholar_id = csv::Table::trim(t.cell(r, "scholar_id"));
    p.year = static_cast<int>(t.integer(r, "year"));
    p.citations = t.number(r, "citations");
    if (p.citations < 0.0) detail::bad(t, r, "citations", "must be non-negative");
    p.citescore = t.number(r, "citescore");
    if (p.citescore < 0.0) detail::bad(t, r, "citescore", "must be non-negative");
    p.coauthor_ids = split_ids(t.cell(r, "coauthor_ids"));
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<ContextRecord> parse_context(const csv::Table& t) {
  t.require_columns({"affiliation_id", "year", "qs_rank", "usnews_rank", "employer_reputation", "ln_pubs_affil",
                     "ln_cites_affil", "field_id", "ln_pubs_field", "ln_cites_field"});
  std::vector<ContextRecord> out;
  std::set<std::pair<std::string, int>> keys;
  for (std::size_t r = 0; r < t.size(); ++r) {
    ContextRecord c;
    c.affiliation_id = csv::Table::trim(t.cell(r, "affiliation_id"));
    c.year = static_cast<int>(t.integer(r, "year"));
    c.qs_rank = detail::optional_integer(t, r, "qs_rank");
    if (c.qs_rank && *c.qs_rank < 1) detail::bad(t, r, "qs_rank", "must be a positive integer");
    c.usnews_rank = detail::optional_integer(t, r, "usnews_rank");
    if (c.usnews_rank && *c.usnews_rank < 1) detail::bad(t, r, "usnews_rank", "must be a positive integer");
    c.employer_reputation = detail::optional_number(t, r, "employer_reputation");
    if (c.employer_reputation && (*c.employer_reputation < 1.0 || *c.employer_reputation > 100.0))
      detail::bad(t, r, "employer_reputation", "must lie in [1, 100]");
    c.ln_pubs_affil = detail::optional_number(t, r, "ln_pubs_affil");
    c.ln_cites_affil = detail::optional_number(t, r, "ln_cites_affil");
    c.field_id = csv::Table::trim(t.cell(r, "field_id"));
    c.ln_pubs_field = detail::optional_number(t, r, "ln_pubs_field");
    c.ln_cites_field = detail::optional_number(t, r, "ln_cites_field");
    if (!keys.emplace(c.affiliation_id, c.year).second)
      throw IntegrityError("panel_data", "load_panel",
                           t.source() + ": duplicate (affiliation_id, year) = (" + c.affiliation_id + ", " +
                               std::to_string(c.year) + ")");
    out.push_back(std::move(c));
  }
  return out;
}

// --- Assembly ----------------------------------------------------------------

namespace detail {

template <typename Rec>
void check_references(const std::vector<Rec>& recs, const std::set<std::string>& known, const std::string& file) {
  std::set<std::string> dangling;
  for (const auto& r : recs)
    if (!known.count(r.scholar_id)) dangling.insert(r.scholar_id);
  if (dangling.empty()) return;
  std::string list;
  for (const auto& d : dangling) list += (list.empty() ? "" : ", ") + d;
  throw IntegrityError("panel_data", "load_panel", file + " references unknown scholar_id(s): " + list);
}

/// First and last year a grant marks its holder as funded.
inline std::pair<int, int> active_years(const GrantRecord& g, int cap) {
  return {g.award_year, g.award_year + std::min(g.duration_years, cap) - 1};
}

}  // namespace detail

/// Builds the scholar-year panel from parsed records. Rows that lack a
/// required control are skipped and listed in `exclusions`.
inline PanelDataset build_panel(std::vector<ScholarRecord> scholars, std::vector<GrantRecord> grants,
                                std::vector<PublicationRecord> pubs, std::vector<ContextRecord> context,
                                const PanelConfig& cfg = {}) {
  cfg.validate();
  std::set<std::string> known;
  for (const auto& s : scholars) known.insert(s.scholar_id);
  detail::check_references(grants, known, "grants");
  detail::check_references(pubs, known, "pubs");

  PanelDataset ds;
  ds.config = cfg;

  std::map<std::pair<std::string, int>, const ContextRecord*> ctx;
  for (const auto& c : context) ctx[{c.affiliation_id, c.year}] = &c;
  std::unordered_map<std::string, std::vector<PublicationRecord>> pubs_by;
  for (const auto& p : pubs) pubs_by[p.scholar_id].push_back(p);
  std::unordered_map<std::string, std::vector<const GrantRecord*>> grants_by;
  for (const auto& g : grants) grants_by[g.scholar_id].push_back(&g);
  std::optional<CitescoreTails> tails;
  if (!pubs.empty()) tails = CitescoreTails::from(pubs, cfg.tail_quantile);

  static const std::vector<PublicationRecord> kNoPubs;
  for (const auto& s : scholars) {
    auto exclude = [&](std::optional<int> year, const std::string& stage, const std::string& why) {
      ds.exclusions.push_back({stage, s.scholar_id, year, why});
    };
    if (!s.first_pub_year) {
      exclude(std::nullopt, "missing_first_pub_year", "first_pub_year is empty");
      continue;
    }
    if (s.gender == Gender::Unknown) {
      exclude(std::nullopt, "unknown_gender", "gender is unknown");
      continue;
    }
    auto pit = pubs_by.find(s.scholar_id);
    const auto& own = pit == pubs_by.end() ? kNoPubs : pit->second;
    const double init_articles = derive_initial_performance(own, s.scholar_id, cfg.start_year, Metric::ArticleCount,
                                                            cfg.initial_years);
    const double init_cites = derive_initial_performance(own, s.scholar_id, cfg.start_year, Metric::AvgCitations,
                                                         cfg.initial_years);
    const double init_score = derive_initial_performance(own, s.scholar_id, cfg.start_year, Metric::AvgCitescore,
                                                         cfg.initial_years);
    const auto git = grants_by.find(s.scholar_id);

    for (int year = std::max(cfg.start_year, *s.first_pub_year); year <= cfg.end_year; ++year) {
      auto cit = ctx.find({s.affiliation_id, year});
      if (cit == ctx.end()) {
        exclude(year, "missing_context", "no context row for affiliation '" + s.affiliation_id + "'");
        continue;
      }
      const ContextRecord& c = *cit->second;
      std::string missing;
      auto need = [&](bool ok, const char* name) {
        if (!ok) missing += (missing.empty() ? "" : ", ") + std::string(name);
      };
      need(c.qs_rank.has_value(), "qs_rank");
      need(c.usnews_rank.has_value(), "usnews_rank");
      need(c.employer_reputation.has_value(), "employer_reputation");
      need(c.ln_pubs_affil.has_value(), "ln_pubs_affil");
      need(c.ln_cites_affil.has_value(), "ln_cites_affil");
      need(c.ln_pubs_field.has_value(), "ln_pubs_field");
      need(c.ln_cites_field.has_value(), "ln_cites_field");
      if (!missing.empty()) {
        exclude(year, "missing_control", "missing " + missing);
        continue;
      }

      PanelObservation o;
      o.scholar_id = s.scholar_id;
      o.affiliation_id = s.affiliation_id;
      o.year = year;
      double amount = 0.0;
      if (git != grants_by.end()) {
        for (const GrantRecord* g : git->second) {
          const auto [first, last] = detail::active_years(*g, cfg.treatment_cap);
          if (year >= first && year <= last) {
            o.funded = 1;
            amount += g->amount_usd;
          }
        }
      }
      o.ln_grant_amount = std::log1p(amount);
      const auto m = aggregate_annual_metrics(own, s.scholar_id, year);
      o.article_count = m.article_count;
      o.avg_citations = m.avg_citations;
      o.avg_citescore = m.avg_citescore;
      if (tails) {
        o.citescore_top10 = citescore_tail_outcome(own, s.scholar_id, year, Tail::Top, *tails);
        o.citescore_bottom10 = citescore_tail_outcome(own, s.scholar_id, year, Tail::Bottom, *tails);
      }
      o.academic_age = derive_academic_age(s, year);
      o.gender = s.gender == Gender::Male ? 1.0 : 0.0;
      o.initial_article_count = init_articles;
      o.initial_avg_citations = init_cites;
      o.initial_avg_citescore = init_score;
      o.ln_pubs_field = *c.ln_pubs_field;
      o.ln_cites_field = *c.ln_cites_field;
      o.ln_pubs_affil = *c.ln_pubs_affil;
      o.ln_cites_affil = *c.ln_cites_affil;
      o.qs_rank = static_cast<double>(*c.qs_rank);
      o.usnews_rank = static_cast<double>(*c.usnews_rank);
      o.employer_reputation = *c.employer_reputation;
      ds.observations.push_back(std::move(o));
    }
  }
  ds.scholars = std::move(scholars);
  ds.grants = std::move(grants);
  ds.pubs = std::move(pubs);
  ds.context = std::move(context);
  return ds;
}

inline PanelDataset load_panel(const std::string& scholars_csv, const std::string& grants_csv,
                               const std::string& pubs_csv, const std::string& context_csv,
                               const PanelConfig& cfg = {}) {
  return build_panel(parse_scholars(csv::Table::from_file(scholars_csv)),
                     parse_grants(csv::Table::from_file(grants_csv)), parse_pubs(csv::Table::from_file(pubs_csv)),
                     parse_context(csv::Table::from_file(context_csv)), cfg);
}

}  // namespace ivpanel
