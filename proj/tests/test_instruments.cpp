#include <catch_amalgamated.hpp>

#include <sstream>

#include "fixtures.hpp"
#include "ivpanel/instruments.hpp"
#include "ivpanel/rng.hpp"

using namespace ivpanel;
using Catch::Approx;

namespace {

std::vector<PanelObservation> rows(const std::string& scholar, const std::string& aff, int from, int to) {
  std::vector<PanelObservation> out;
  for (int y = from; y <= to; ++y) {
    PanelObservation o;
    o.scholar_id = scholar;
    o.affiliation_id = aff;
    o.year = y;
    out.push_back(o);
  }
  return out;
}

RoleRecord role(const std::string& s, int year, Tier tier = Tier::Leadership) { return {s, year, tier, Body::NSF}; }

PanelDataset dataset_from(const fixtures::UniversityTopicFixture& f) {
  PanelDataset ds;
  ds.config.start_year = f.start;
  ds.config.end_year = f.end;
  ds.scholars = f.scholars;
  ds.grants = f.grants;
  for (const auto& s : f.scholars) {
    auto r = rows(s.scholar_id, s.affiliation_id, f.start, f.end);
    ds.observations.insert(ds.observations.end(), r.begin(), r.end());
  }
  return ds;
}

}  // namespace

TEST_CASE("political_hegemony marks the window after each role", "[instruments]") {
  const auto obs = rows("a", "u", 2000, 2012);
  const auto e = political_hegemony({role("a", 2005)}, obs, 5);
  for (std::size_t i = 0; i < obs.size(); ++i)
    CHECK(e[i] == ((obs[i].year >= 2005 && obs[i].year <= 2009) ? 1.0 : 0.0));
  CHECK(political_hegemony({}, obs) == std::vector<double>(obs.size(), 0.0));
  CHECK_THROWS_AS(political_hegemony({}, obs, 4), ConfigError);
}

TEST_CASE("political_hegemony unions overlapping roles and honours the tier filter", "[instruments]") {
  const auto obs = rows("a", "u", 2000, 2015);
  const std::vector<RoleRecord> roles{role("a", 2002), role("a", 2004, Tier::Membership), role("b", 2000)};
  const auto all = political_hegemony(roles, obs, 3);
  const auto lead = political_hegemony(roles, obs, 3, TierFilter::Leadership);
  const auto mem = political_hegemony(roles, obs, 3, TierFilter::Membership);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const int y = obs[i].year;
    const double l = (y >= 2002 && y <= 2004) ? 1.0 : 0.0;
    const double m = (y >= 2004 && y <= 2006) ? 1.0 : 0.0;
    CHECK(lead[i] == l);
    CHECK(mem[i] == m);
    CHECK(all[i] == std::max(l, m));
  }
}

TEST_CASE("employment never decreases as the window widens", "[instruments]") {
  Rng rng(12);
  std::vector<RoleRecord> roles;
  std::vector<PanelObservation> obs;
  for (int s = 0; s < 20; ++s) {
    const auto id = "s" + std::to_string(s);
    auto r = rows(id, "u", 2000, 2019);
    obs.insert(obs.end(), r.begin(), r.end());
    for (std::uint64_t k = rng.below(3); k > 0; --k) roles.push_back(role(id, 1995 + static_cast<int>(rng.below(25))));
  }
  const auto w3 = political_hegemony(roles, obs, 3);
  const auto w5 = political_hegemony(roles, obs, 5);
  const auto w7 = political_hegemony(roles, obs, 7);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    CHECK(w3[i] <= w5[i]);
    CHECK(w5[i] <= w7[i]);
    // Per-row formula oracle.
    double want = 0.0;
    for (const auto& r : roles)
      if (r.scholar_id == obs[i].scholar_id && obs[i].year >= r.role_year && obs[i].year < r.role_year + 5) want = 1.0;
    CHECK(w5[i] == want);
  }
}

TEST_CASE("minmax_normalize", "[instruments]") {
  CHECK(minmax_normalize({15, 10, 5}) == std::vector<double>{1.0, 0.5, 0.0});
  std::vector<std::string> warnings;
  CHECK(minmax_normalize({7, 7}, &warnings) == std::vector<double>{0.0, 0.0});
  CHECK(warnings.size() == 1);
  CHECK_THROWS_AS(minmax_normalize({}), DataError);
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s;
    for (std::uint64_t k = 0; k < 1 + rng.below(12); ++k) s.push_back(rng.normal() * 100.0);
    const auto once = minmax_normalize(s);
    CHECK(minmax_normalize(once) == once);
    for (double v : once) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("dominance: worked example with 15 cumulative awards", "[instruments]") {
  std::vector<ScholarRecord> scholars(1);
  scholars[0].scholar_id = "m";
  scholars[0].affiliation_id = "michigan";
  std::vector<GrantRecord> grants;
  // Cumulative 0 in 2000, 15 by 2019.
  for (int k = 0; k < 15; ++k) {
    GrantRecord g;
    g.grant_id = "g" + std::to_string(k);
    g.scholar_id = "m";
    g.award_year = 2001 + k;
    g.topic_id = 3;
    grants.push_back(g);
  }
  const auto t = dominance_table(grants, scholars, 2000, 2019);
  CHECK(t.value({"michigan", 3}, 2000) == 1.0);
  CHECK(t.value({"michigan", 3}, 2019) == 0.0);
  CHECK(t.value({"michigan", 3}, 2005) == Approx(14.0 / 15.0));
  CHECK(t.value({"michigan", 0}, 2005) == 0.0);
}

TEST_CASE("dominance: single-award cell is a two-point min-max", "[instruments]") {
  std::vector<ScholarRecord> scholars(1);
  scholars[0].scholar_id = "a";
  scholars[0].affiliation_id = "u";
  GrantRecord g;
  g.grant_id = "g";
  g.scholar_id = "a";
  g.award_year = 2003;
  g.topic_id = 0;
  const auto t = dominance_table({g}, scholars, 2000, 2005);
  // cumulative 0 0 0 1 1 1, reversed 1 1 1 0 0 0
  const std::vector<double> want{1, 1, 1, 0, 0, 0};
  CHECK(t.cells.at({"u", 0}) == want);
  // Award in the first year: constant cumulative series, defined as 0 with a warning.
  g.award_year = 2000;
  const auto c = dominance_table({g}, scholars, 2000, 2005);
  CHECK(c.cells.at({"u", 0}) == std::vector<double>(6, 0.0));
  CHECK(c.warnings.size() == 1);
}

TEST_CASE("dominance matches the brute-force oracle on the 4x3 fixture", "[instruments]") {
  const auto f = fixtures::university_topic_fixture();
  const auto table = dominance_table(f.grants, f.scholars, f.start, f.end);
  const auto oracle = fixtures::dominance_oracle(f);
  REQUIRE(oracle.size() >= 9);
  for (const auto& [cell, series] : oracle)
    for (int y = f.start; y <= f.end; ++y) {
      const double v = table.value(cell, y);
      CHECK(v == series[static_cast<std::size_t>(y - f.start)]);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  // Within every cell the series is non-increasing.
  for (const auto& [cell, s] : table.cells)
    for (std::size_t t = 1; t < s.size(); ++t) CHECK(s[t] <= s[t - 1]);
}

TEST_CASE("dominance aligned to the panel uses each scholar's first-grant topic", "[instruments]") {
  const auto f = fixtures::university_topic_fixture();
  const auto ds = dataset_from(f);
  const auto table = dominance_table(f.grants, f.scholars, f.start, f.end);
  const auto series = imitation_isomorphism(f.grants, ds);
  REQUIRE(series.size() == ds.observations.size());
  // mich_1's earliest grant is 2001 topic 0; osu_1's earliest is 1995 topic 1 (no in-window awards).
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& o = ds.observations[i];
    if (o.scholar_id == "mich_1") CHECK(series[i] == table.value({"mich", 0}, o.year));
    if (o.scholar_id == "osu_1") CHECK(series[i] == 0.0);
    if (o.scholar_id == "ucla_1") CHECK(series[i] == table.value({"ucla", 2}, o.year));
  }
}

TEST_CASE("dominance modes and scopes", "[instruments]") {
  const auto f = fixtures::university_topic_fixture();
  const auto inv = dominance_table(f.grants, f.scholars, f.start, f.end, DominanceMode::MultiplicativeInverse);
  // 1 / (1 + cumulative) is non-increasing; min-max keeps it in [0, 1] with 1 at the first year.
  for (const auto& [cell, s] : inv.cells) {
    for (std::size_t t = 1; t < s.size(); ++t) CHECK(s[t] <= s[t - 1]);
    if (s.front() > 0.0) CHECK(s.front() == 1.0);
  }
  const auto glob =
      dominance_table(f.grants, f.scholars, f.start, f.end, DominanceMode::TimeReverse, NormalizationScope::Global);
  double hi = 0.0;
  for (const auto& [cell, s] : glob.cells)
    for (double v : s) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      hi = std::max(hi, v);
    }
  CHECK(hi == 1.0);
  // mich/0 has the largest in-window total (4 awards) so it alone reaches 1 in 2000.
  CHECK(glob.value({"mich", 0}, 2000) == 1.0);
  CHECK(glob.value({"mich", 1}, 2000) == Approx(0.25));
}

TEST_CASE("dominance requires topic ids", "[instruments]") {
  auto f = fixtures::university_topic_fixture();
  f.grants[3].topic_id.reset();
  CHECK_THROWS_AS(dominance_table(f.grants, f.scholars, f.start, f.end), StateError);
}

TEST_CASE("project_familiarity counts prior-window events at the affiliation", "[instruments]") {
  const std::vector<TrainingEvent> events{{"u", 2007, "nsf day"}, {"u", 2008, "workshop"}, {"u", 2010, "workshop"},
                                          {"v", 2009, "workshop"}};
  const auto obs = rows("a", "u", 2005, 2014);
  const auto f3 = project_familiarity(events, obs, 3);
  const auto f5 = project_familiarity(events, obs, 5);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const int t = obs[i].year;
    double c3 = 0, c5 = 0;
    for (const auto& e : events) {
      if (e.affiliation_id != "u") continue;
      c3 += (e.event_year >= t - 3 && e.event_year <= t - 1);
      c5 += (e.event_year >= t - 5 && e.event_year <= t - 1);
    }
    CHECK(f3[i] == c3);
    CHECK(f5[i] == c5);
  }
  // 2010: events in 2007-2009 -> 2.
  CHECK(f3[5] == 2.0);
  CHECK(project_familiarity({}, obs) == std::vector<double>(obs.size(), 0.0));
  CHECK_THROWS_AS(project_familiarity(events, obs, 2), ConfigError);
}

TEST_CASE("exclude_coauthors removes same-affiliation unfunded co-authors only", "[instruments]") {
  PanelDataset ds;
  for (auto [id, aff] : std::vector<std::pair<std::string, std::string>>{
           {"i", "u"}, {"j", "u"}, {"k", "v"}, {"m", "u"}, {"n", "u"}, {"p", "u"}}) {
    ScholarRecord s;
    s.scholar_id = id;
    s.affiliation_id = aff;
    ds.scholars.push_back(s);
    auto r = rows(id, aff, 2000, 2001);
    ds.observations.insert(ds.observations.end(), r.begin(), r.end());
  }
  auto pub = [](const std::string& a, std::vector<std::string> co) {
    PublicationRecord p;
    p.scholar_id = a;
    p.coauthor_ids = std::move(co);
    return p;
  };
  // j: co-author of funded i at u -> removed. k: different affiliation -> kept.
  // m: lists funded i as co-author on their own paper -> removed.
  // p: shares an external author's paper with i -> removed. n: only linked to p -> kept.
  const std::vector<PublicationRecord> pubs{pub("i", {"j", "k"}), pub("m", {"i"}), pub("n", {"p"}),
                                            pub("x_external", {"i", "p"})};
  const auto out = exclude_coauthors(ds, pubs, {"i"});
  // Graph oracle: unfunded scholars adjacent to i on some paper and sharing i's affiliation.
  CHECK(out.panel_scholars() == std::set<std::string>{"i", "k", "n"});
  CHECK(out.excluded("coauthor_of_funded") == 3);
  CHECK(out.observations.size() == 6);
}

TEST_CASE("instrument CSV export", "[instruments]") {
  const auto obs = rows("a", "u", 2000, 2001);
  InstrumentSet s{{1, 0}, {0.5, 0.25}, {2, 0}, {}};
  std::ostringstream os;
  write_instruments_csv(os, obs, s);
  CHECK(os.str() == "scholar_id,year,employment,dominance,familiarity\na,2000,1,0.5,2\na,2001,0,0.25,0\n");
  s.dominance.pop_back();
  s.employment.pop_back();
  CHECK_THROWS_AS(write_instruments_csv(os, obs, s), StateError);
}

TEST_CASE("roles and events parse from CSV", "[instruments]") {
  const auto roles = parse_roles(csv::Table("roles.csv", csv::parse("scholar_id,role_year,tier,body\na,2005,Leadership,NSF\n"
                                                                  "b,1999,membership,aaas\n")));
  REQUIRE(roles.size() == 2);
  CHECK(roles[1].tier == Tier::Membership);
  CHECK(roles[1].body == Body::AAAS);
  CHECK_THROWS_AS(parse_roles(csv::Table("r.csv", csv::parse("scholar_id,role_year,tier,body\na,1980,leadership,NSF\n"))),
                  SchemaError);
  CHECK_THROWS_AS(parse_roles(csv::Table("r.csv", csv::parse("scholar_id,role_year,tier,body\na,2000,chair,NSF\n"))),
                  SchemaError);
  const auto ev = parse_events(csv::Table("e.csv", csv::parse("affiliation_id,event_year,kind\nu,2004,NSF day\n")));
  CHECK(ev.at(0).event_year == 2004);
}
