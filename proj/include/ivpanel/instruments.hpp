#pragma once

// The three instrument series: political hegemony (employment), imitation
// isomorphism (dominance) and project familiarity.

#include <algorithm>
#include <cctype>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ivpanel/csv.hpp"
#include "ivpanel/error.hpp"
#include "ivpanel/panel_data.hpp"

namespace ivpanel {

enum class Tier { Leadership, Membership };
enum class Body { NSF, APS, AAAS };
enum class TierFilter { All, Leadership, Membership };
enum class DominanceMode { TimeReverse, MultiplicativeInverse };
enum class NormalizationScope { Cell, Global };

struct RoleRecord {
  std::string scholar_id;
  int role_year = 0;
  Tier tier = Tier::Leadership;
  Body body = Body::NSF;
};

struct TrainingEvent {
  std::string affiliation_id;
  int event_year = 0;
  std::string kind;
};

/// Instrument values aligned 1:1 with PanelDataset::observations.
struct InstrumentSet {
  std::vector<double> employment;
  std::vector<double> dominance;
  std::vector<double> familiarity;
  std::vector<std::string> warnings;

  std::size_t size() const { return employment.size(); }
};

namespace detail {

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline void check_window(int window, const char* op) {
  if (window != 3 && window != 5 && window != 7)
    throw ConfigError("instruments", op, "window must be 3, 5 or 7, got " + std::to_string(window));
}

}  // namespace detail

inline TierFilter parse_tier_filter(const std::string& s) {
  const auto v = detail::lower(s);
  if (v == "all") return TierFilter::All;
  if (v == "leadership") return TierFilter::Leadership;
  if (v == "membership") return TierFilter::Membership;
  throw ConfigError("instruments", "parse_tier_filter", "tier filter must be all, leadership or membership");
}

inline DominanceMode parse_dominance_mode(const std::string& s) {
  if (s == "time_reverse") return DominanceMode::TimeReverse;
  if (s == "multiplicative_inverse") return DominanceMode::MultiplicativeInverse;
  throw ConfigError("instruments", "parse_dominance_mode", "mode must be time_reverse or multiplicative_inverse");
}

inline NormalizationScope parse_scope(const std::string& s) {
  if (s == "cell") return NormalizationScope::Cell;
  if (s == "global") return NormalizationScope::Global;
  throw ConfigError("instruments", "parse_scope", "scope must be cell or global");
}

inline std::vector<RoleRecord> parse_roles(const csv::Table& t, int earliest_year = 1990) {
  t.require_columns({"scholar_id", "role_year", "tier", "body"});
  std::vector<RoleRecord> out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    RoleRecord rr;
    rr.scholar_id = csv::Table::trim(t.cell(r, "scholar_id"));
    rr.role_year = static_cast<int>(t.integer(r, "role_year"));
    if (rr.role_year < earliest_year)
      throw SchemaError("instruments", "load_roles",
                        t.where(r, "role_year") + ": must be >= " + std::to_string(earliest_year));
    const auto tier = detail::lower(csv::Table::trim(t.cell(r, "tier")));
    if (tier == "leadership") rr.tier = Tier::Leadership;
    else if (tier == "membership") rr.tier = Tier::Membership;
    else throw SchemaError("instruments", "load_roles", t.where(r, "tier") + ": must be leadership or membership");
    const auto body = detail::lower(csv::Table::trim(t.cell(r, "body")));
    if (body == "nsf") rr.body = Body::NSF;
    else if (body == "aps") rr.body = Body::APS;
    else if (body == "aaas") rr.body = Body::AAAS;
    else throw SchemaError("instruments", "load_roles", t.where(r, "body") + ": must be NSF, APS or AAAS");
    out.push_back(std::move(rr));
  }
  return out;
}

inline std::vector<TrainingEvent> parse_events(const csv::Table& t) {
  t.require_columns({"affiliation_id", "event_year", "kind"});
  std::vector<TrainingEvent> out;
  for (std::size_t r = 0; r < t.size(); ++r)
    out.push_back({csv::Table::trim(t.cell(r, "affiliation_id")), static_cast<int>(t.integer(r, "event_year")),
                   t.cell(r, "kind")});
  return out;
}

/// Throws IntegrityError if a role names a scholar missing from the dataset.
inline void validate_roles(const std::vector<RoleRecord>& roles, const PanelDataset& ds) {
  std::set<std::string> known, dangling;
  for (const auto& s : ds.scholars) known.insert(s.scholar_id);
  for (const auto& r : roles)
    if (!known.count(r.scholar_id)) dangling.insert(r.scholar_id);
  if (dangling.empty()) return;
  std::string list;
  for (const auto& d : dangling) list += (list.empty() ? "" : ", ") + d;
  throw IntegrityError("instruments", "load_roles", "roles reference unknown scholar_id(s): " + list);
}

// --- Political hegemony ------------------------------------------------------

inline std::vector<double> political_hegemony(const std::vector<RoleRecord>& roles,
                                              const std::vector<PanelObservation>& obs, int window = 5,
                                              TierFilter filter = TierFilter::All) {
  detail::check_window(window, "political_hegemony");
  std::unordered_map<std::string, std::vector<int>> starts;
  for (const auto& r : roles) {
    if (filter == TierFilter::Leadership && r.tier != Tier::Leadership) continue;
    if (filter == TierFilter::Membership && r.tier != Tier::Membership) continue;
    starts[r.scholar_id].push_back(r.role_year);
  }
  std::vector<double> out(obs.size(), 0.0);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    auto it = starts.find(obs[i].scholar_id);
    if (it == starts.end()) continue;
    for (int y : it->second)
      if (obs[i].year >= y && obs[i].year <= y + window - 1) out[i] = 1.0;
  }
  return out;
}

// --- Imitation isomorphism ---------------------------------------------------

/// (x - min) / (max - min). A constant series maps to zeros and appends a
/// warning when `warnings` is given.
inline std::vector<double> minmax_normalize(const std::vector<double>& s, std::vector<std::string>* warnings = nullptr,
                                            const std::string& label = "series") {
  if (s.empty()) throw DataError("instruments", "minmax_normalize", "empty series");
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  const double min = *lo, range = *hi - *lo;
  std::vector<double> out(s.size(), 0.0);
  if (range == 0.0) {
    if (warnings) warnings->push_back(label + ": constant series, normalized to 0");
    return out;
  }
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = (s[i] - min) / range;
  return out;
}

using Cell = std::pair<std::string, int>;  // (affiliation_id, topic_id)

/// Per-cell dominance series over the contiguous years [start, end].
struct DominanceTable {
  int start_year = 0;
  int end_year = 0;
  std::map<Cell, std::vector<double>> cells;
  std::vector<std::string> warnings;

  double value(const Cell& c, int year) const {
    auto it = cells.find(c);
    if (it == cells.end() || year < start_year || year > end_year) return 0.0;
    return it->second[static_cast<std::size_t>(year - start_year)];
  }
};

namespace detail {

inline std::string cell_label(const Cell& c) {
  return "cell (" + c.first + ", topic " + std::to_string(c.second) + ")";
}

inline std::unordered_map<std::string, std::string> affiliation_of(const std::vector<ScholarRecord>& scholars) {
  std::unordered_map<std::string, std::string> m;
  for (const auto& s : scholars) m[s.scholar_id] = s.affiliation_id;
  return m;
}

}  // namespace detail

inline DominanceTable dominance_table(const std::vector<GrantRecord>& grants, const std::vector<ScholarRecord>& scholars,
                                      int start_year, int end_year, DominanceMode mode = DominanceMode::TimeReverse,
                                      NormalizationScope scope = NormalizationScope::Cell) {
  if (start_year > end_year) throw ConfigError("instruments", "imitation_isomorphism", "start_year must be <= end_year");
  std::string untagged;
  for (const auto& g : grants)
    if (!g.topic_id) untagged += (untagged.empty() ? "" : ", ") + g.grant_id;
  if (!untagged.empty())
    throw StateError("instruments", "imitation_isomorphism", "grants without topic_id: " + untagged);

  const auto aff = detail::affiliation_of(scholars);
  const auto T = static_cast<std::size_t>(end_year - start_year + 1);

  // Step 2: yearly award counts per cell.
  std::map<Cell, std::vector<double>> counts;
  for (const auto& g : grants) {
    auto a = aff.find(g.scholar_id);
    if (a == aff.end())
      throw IntegrityError("instruments", "imitation_isomorphism", "grant " + g.grant_id + " has unknown scholar");
    auto& c = counts[{a->second, *g.topic_id}];
    if (c.empty()) c.assign(T, 0.0);
    if (g.award_year >= start_year && g.award_year <= end_year)
      c[static_cast<std::size_t>(g.award_year - start_year)] += 1.0;
  }

  // Step 3: cumulative sum, then the time-reversed or inverse transform.
  DominanceTable out;
  out.start_year = start_year;
  out.end_year = end_year;
  std::map<Cell, std::vector<double>> raw;
  for (const auto& [cell, c] : counts) {
    std::vector<double> cum(T);
    double run = 0.0;
    for (std::size_t t = 0; t < T; ++t) cum[t] = run += c[t];
    if (run == 0.0) continue;  // no awards inside the window: cell stays 0
    std::vector<double> v(T);
    for (std::size_t t = 0; t < T; ++t)
      v[t] = mode == DominanceMode::TimeReverse ? cum[T - 1 - t] : 1.0 / (1.0 + cum[t]);
    raw[cell] = std::move(v);
  }

  // Step 4: min-max normalization.
  if (scope == NormalizationScope::Cell) {
    for (auto& [cell, v] : raw) out.cells[cell] = minmax_normalize(v, &out.warnings, detail::cell_label(cell));
  } else if (!raw.empty()) {
    double lo = raw.begin()->second.front(), hi = lo;
    for (const auto& [cell, v] : raw)
      for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    for (const auto& [cell, v] : raw) {
      std::vector<double> n(T, 0.0);
      if (hi > lo)
        for (std::size_t t = 0; t < T; ++t) n[t] = (v[t] - lo) / (hi - lo);
      out.cells[cell] = std::move(n);
    }
    if (hi == lo) out.warnings.push_back("global dominance series is constant, normalized to 0");
  }
  return out;
}

/// The topic of each scholar's earliest grant (ties: lowest grant_id).
inline std::unordered_map<std::string, int> scholar_topics(const std::vector<GrantRecord>& grants) {
  std::unordered_map<std::string, const GrantRecord*> first;
  for (const auto& g : grants) {
    if (!g.topic_id) continue;
    auto& f = first[g.scholar_id];
    if (!f || g.award_year < f->award_year || (g.award_year == f->award_year && g.grant_id < f->grant_id)) f = &g;
  }
  std::unordered_map<std::string, int> out;
  for (const auto& [s, g] : first) out[s] = *g->topic_id;
  return out;
}

inline std::vector<double> imitation_isomorphism(const std::vector<GrantRecord>& grants, const PanelDataset& ds,
                                                 DominanceMode mode = DominanceMode::TimeReverse,
                                                 NormalizationScope scope = NormalizationScope::Cell,
                                                 std::vector<std::string>* warnings = nullptr) {
  const auto table = dominance_table(grants, ds.scholars, ds.config.start_year, ds.config.end_year, mode, scope);
  if (warnings) warnings->insert(warnings->end(), table.warnings.begin(), table.warnings.end());
  const auto topic = scholar_topics(grants);
  std::vector<double> out(ds.observations.size(), 0.0);
  for (std::size_t i = 0; i < ds.observations.size(); ++i) {
    const auto& o = ds.observations[i];
    auto t = topic.find(o.scholar_id);
    if (t == topic.end()) continue;
    out[i] = table.value({o.affiliation_id, t->second}, o.year);
  }
  return out;
}

// --- Project familiarity -----------------------------------------------------

/// Events at the scholar's affiliation in [t - window, t - 1], times the
/// indicator that at least one such event occurred.
inline std::vector<double> project_familiarity(const std::vector<TrainingEvent>& events,
                                               const std::vector<PanelObservation>& obs, int window = 3) {
  detail::check_window(window, "project_familiarity");
  std::unordered_map<std::string, std::vector<int>> by_aff;
  for (const auto& e : events) by_aff[e.affiliation_id].push_back(e.event_year);
  std::vector<double> out(obs.size(), 0.0);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    auto it = by_aff.find(obs[i].affiliation_id);
    if (it == by_aff.end()) continue;
    double count = 0.0;
    for (int y : it->second)
      if (y >= obs[i].year - window && y <= obs[i].year - 1) count += 1.0;
    const double occurred = count > 0.0 ? 1.0 : 0.0;
    out[i] = count * occurred;
  }
  return out;
}

// --- Co-author exclusion -----------------------------------------------------

/// Removes unfunded scholars who share a publication with a funded scholar
/// at the same affiliation.
inline PanelDataset exclude_coauthors(PanelDataset ds, const std::vector<PublicationRecord>& pubs,
                                      const std::set<std::string>& funded_ids) {
  const auto aff = detail::affiliation_of(ds.scholars);
  std::set<std::string> removed;
  for (const auto& p : pubs) {
    std::set<std::string> authors(p.coauthor_ids.begin(), p.coauthor_ids.end());
    authors.insert(p.scholar_id);
    for (const auto& i : authors) {
      if (!funded_ids.count(i) || !aff.count(i)) continue;
      for (const auto& j : authors) {
        if (j == i || funded_ids.count(j) || !aff.count(j)) continue;
        if (aff.at(i) == aff.at(j)) removed.insert(j);
      }
    }
  }
  for (const auto& j : removed)
    ds.exclusions.push_back({"coauthor_of_funded", j, std::nullopt, "co-authored with a funded scholar at " + aff.at(j)});
  std::erase_if(ds.scholars, [&](const ScholarRecord& s) { return removed.count(s.scholar_id) > 0; });
  std::erase_if(ds.observations, [&](const PanelObservation& o) { return removed.count(o.scholar_id) > 0; });
  return ds;
}

/// Scholars with at least one funded panel year.
inline std::set<std::string> funded_scholars(const std::vector<PanelObservation>& obs) {
  std::set<std::string> out;
  for (const auto& o : obs)
    if (o.funded) out.insert(o.scholar_id);
  return out;
}

// --- Assembly and export -----------------------------------------------------

struct InstrumentOptions {
  int employment_window = 5;
  int familiarity_window = 3;
  TierFilter tier_filter = TierFilter::All;
  DominanceMode dominance_mode = DominanceMode::TimeReverse;
  NormalizationScope scope = NormalizationScope::Cell;
};

inline InstrumentSet build_instruments(const PanelDataset& ds, const std::vector<RoleRecord>& roles,
                                       const std::vector<TrainingEvent>& events, const InstrumentOptions& opt = {}) {
  InstrumentSet s;
  s.employment = political_hegemony(roles, ds.observations, opt.employment_window, opt.tier_filter);
  s.dominance = imitation_isomorphism(ds.grants, ds, opt.dominance_mode, opt.scope, &s.warnings);
  s.familiarity = project_familiarity(events, ds.observations, opt.familiarity_window);
  return s;
}

inline void write_instruments_csv(std::ostream& os, const std::vector<PanelObservation>& obs, const InstrumentSet& s) {
  if (s.size() != obs.size())
    throw StateError("instruments", "export", "instrument set is not aligned with the panel");
  csv::write_row(os, {"scholar_id", "year", "employment", "dominance", "familiarity"});
  for (std::size_t i = 0; i < obs.size(); ++i)
    csv::write_row(os, {obs[i].scholar_id, std::to_string(obs[i].year), csv::format_double(s.employment[i]),
                        csv::format_double(s.dominance[i]), csv::format_double(s.familiarity[i])});
}

}  // namespace ivpanel
