#include <catch_amalgamated.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include "ivpanel/robustness.hpp"
#include "ivpanel/synth_records.hpp"
#include "ivpanel/synthgen.hpp"

using namespace ivpanel;

namespace {

// 100 ever-funded scholars (f000..f099) and 60 never-funded (c000..c059),
// three rows each; funded scholars are funded in one of their rows.
struct Rows {
  std::vector<std::string> scholar;
  std::vector<double> funded;
};

Rows group_rows(int n_funded = 100, int n_control = 60) {
  Rows r;
  auto id = [](char p, int i) { return std::string(1, p) + (i < 10 ? "00" : i < 100 ? "0" : "") + std::to_string(i); };
  for (int i = 0; i < n_funded; ++i)
    for (int t = 0; t < 3; ++t) {
      r.scholar.push_back(id('f', i));
      r.funded.push_back(t == 1 ? 1.0 : 0.0);
    }
  for (int i = 0; i < n_control; ++i)
    for (int t = 0; t < 3; ++t) {
      r.scholar.push_back(id('c', i));
      r.funded.push_back(0.0);
    }
  return r;
}

const SyntheticRecords& small_records() {
  static const SyntheticRecords r = [] {
    RecordDgpConfig c;
    c.n_scholars = 120;
    c.seed = 21;
    return generate_records(c);
  }();
  return r;
}

PanelDataset small_panel() {
  const auto& r = small_records();
  PanelConfig pc;
  pc.start_year = r.config.start_year;
  pc.end_year = r.config.end_year;
  return build_panel(r.scholars, r.grants, r.pubs, r.context, pc);
}

}  // namespace

TEST_CASE("pseudo_split partitions each group at the requested ratio", "[robustness]") {
  const auto rows = group_rows();
  const auto s = pseudo_split(rows.scholar, rows.funded, 42);
  CHECK(s.funded.size() == 100);
  CHECK(s.unfunded.size() == 60);
  CHECK(s.count(s.funded, PseudoGroup::Treated) == 50);
  CHECK(s.count(s.funded, PseudoGroup::Control) == 50);
  CHECK(s.count(s.unfunded, PseudoGroup::Treated) == 30);
  CHECK(s.assignment.size() == 160);
  for (const auto& id : rows.scholar) {
    CHECK(s.assignment.count(id) == 1);
    CHECK(s.funded.count(id) + s.unfunded.count(id) == 1);
  }
  const auto third = pseudo_split(rows.scholar, rows.funded, 42, 0.3);
  CHECK(third.count(third.funded, PseudoGroup::Treated) == 30);
  CHECK(third.count(third.unfunded, PseudoGroup::Treated) == 18);
}

TEST_CASE("pseudo_split is reproducible from its seed", "[robustness]") {
  const auto rows = group_rows();
  CHECK(pseudo_split(rows.scholar, rows.funded, 7).assignment == pseudo_split(rows.scholar, rows.funded, 7).assignment);
  CHECK(pseudo_split(rows.scholar, rows.funded, 7).assignment != pseudo_split(rows.scholar, rows.funded, 8).assignment);
  // Row order does not matter; only the set of scholars does.
  Rows rev = rows;
  std::reverse(rev.scholar.begin(), rev.scholar.end());
  std::reverse(rev.funded.begin(), rev.funded.end());
  CHECK(pseudo_split(rev.scholar, rev.funded, 7).assignment == pseudo_split(rows.scholar, rows.funded, 7).assignment);
}

TEST_CASE("pseudo-treatment frequencies over 1000 seeds are binomial", "[robustness]") {
  const auto rows = group_rows(40, 20);
  std::map<std::string, int> hits;
  const int seeds = 1000;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto s = pseudo_split(rows.scholar, rows.funded, static_cast<std::uint64_t>(seed));
    for (const auto& [id, g] : s.assignment) hits[id] += g == PseudoGroup::Treated;
  }
  // Each scholar: Binomial(1000, 0.5), mean 500, sd 15.81.
  const double sd = std::sqrt(seeds * 0.25);
  for (const char* id : {"f000", "f020", "f039", "c000", "c019"}) CHECK(std::fabs(hits.at(id) - 500.0) <= 3.0 * sd);
  // Jointly, the standardized squares sum to roughly chi-square(n - 1).
  double stat = 0.0;
  for (const auto& [id, h] : hits) stat += (h - 500.0) * (h - 500.0) / (sd * sd);
  const boost::math::chi_squared chi(static_cast<double>(hits.size() - 1));
  CHECK(stat < boost::math::quantile(chi, 0.999));
  CHECK(stat > boost::math::quantile(chi, 0.001));
}

TEST_CASE("pseudo_split rejects tiny groups and bad ratios", "[robustness]") {
  auto rows = group_rows(1, 10);
  CHECK_THROWS_AS(pseudo_split(rows.scholar, rows.funded, 1), DataError);
  rows = group_rows(10, 1);
  CHECK_THROWS_AS(pseudo_split(rows.scholar, rows.funded, 1), DataError);
  rows = group_rows(4, 4);
  CHECK_NOTHROW(pseudo_split(rows.scholar, rows.funded, 1));
  CHECK_THROWS_AS(pseudo_split(rows.scholar, rows.funded, 1, 0.0), ConfigError);
  CHECK_THROWS_AS(pseudo_split(rows.scholar, rows.funded, 1, 1.0), ConfigError);
}

TEST_CASE("placebo relabelling changes only the treatment column", "[robustness]") {
  DgpConfig c;
  c.n_scholars = 80;
  c.n_years = 5;
  c.treatment_kind = TreatmentKind::BinaryThreshold;
  c.eligible_share = 0.5;
  c.seed = 3;
  const auto p = generate(c);
  std::vector<std::string> ids;
  for (auto s : p.scholar) ids.push_back("s" + std::to_string(s));
  std::vector<double> d(p.design.d.data(), p.design.d.data() + p.design.d.size());
  const auto split = pseudo_split(ids, d, 11);

  for (const bool treated : {true, false}) {
    const auto sub = placebo_design(p.design, ids, split, treated);
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (split.funded.count(ids[i]) != (treated ? 1u : 0u)) continue;
      const auto r = static_cast<Eigen::Index>(i);
      CHECK(sub.y(k) == p.design.y(r));
      CHECK(sub.z.row(k) == p.design.z.row(r));
      CHECK(sub.x.row(k) == p.design.x.row(r));
      const bool pt = split.pseudo_treated(ids[i]);
      const double expect = treated ? (pt ? p.design.d(r) : 0.0) : (pt ? 1.0 : 0.0);
      CHECK(sub.d(k) == expect);
      ++k;
    }
    CHECK(k == sub.n());
    CHECK(sub.instrument_labels == p.design.instrument_labels);
    CHECK(sub.control_labels == p.design.control_labels);
  }
}

TEST_CASE("a failing subgroup is reported without stopping the other", "[robustness]") {
  DgpConfig c;
  c.n_scholars = 60;
  c.n_years = 5;
  c.treatment_kind = TreatmentKind::BinaryThreshold;
  c.eligible_share = 0.5;
  auto p = generate(c);
  std::vector<std::string> ids;
  for (auto s : p.scholar) ids.push_back("s" + std::to_string(s));
  std::vector<double> d(p.design.d.data(), p.design.d.data() + p.design.d.size());
  const auto split = pseudo_split(ids, d, 5);
  // Zero instruments for never-funded scholars: that side has no first stage.
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (split.unfunded.count(ids[i])) p.design.z.row(static_cast<Eigen::Index>(i)).setZero();
  const auto res = placebo_on_design(p.design, ids, split);
  REQUIRE(res.size() == 2);
  CHECK(res[0].subgroup == "treated_side");
  CHECK(res[0].estimate.has_value());
  CHECK(res[0].error.empty());
  CHECK(res[1].subgroup == "control_side");
  CHECK_FALSE(res[1].estimate.has_value());
  CHECK_FALSE(res[1].error.empty());
}

TEST_CASE("placebo_run on a record-level panel is deterministic per seed", "[robustness]") {
  const auto ds = small_panel();
  const auto& r = small_records();
  const auto iv = build_instruments(ds, r.roles, r.events);
  const std::vector<std::string> outcomes{"avg_citations", "article_count"};
  const auto a = placebo_run(ds, iv, outcomes, 9);
  const auto b = placebo_run(ds, iv, outcomes, 9);
  REQUIRE(a.results.size() == 4);
  CHECK(a.split.assignment == b.split.assignment);
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    INFO(a.results[i].outcome << " " << a.results[i].subgroup << " " << a.results[i].error);
    REQUIRE(a.results[i].estimate);
    CHECK(a.results[i].estimate->coefficients == b.results[i].estimate->coefficients);
    CHECK(a.results[i].estimate->standard_errors == b.results[i].estimate->standard_errors);
    CHECK(a.results[i].diagnostics->cragg_donald_f == b.results[i].diagnostics->cragg_donald_f);
  }
  // Row counts of the two sides add up to the panel.
  CHECK(a.results[0].n + a.results[1].n == ds.observations.size());
  // Never-funded scholars have no grant topic, so dominance is all zero there.
  CHECK(a.results[0].dropped_instruments.empty());
  CHECK(a.results[1].dropped_instruments == std::vector<std::string>{"dominance"});
  CHECK(a.results[1].estimate->index_of("funded"));

  const auto many = placebo_runs(ds, iv, {"avg_citations"}, {1, 2, 3, 4}, 0.5, CovType::HC1, {}, 3);
  const auto serial = placebo_runs(ds, iv, {"avg_citations"}, {1, 2, 3, 4}, 0.5, CovType::HC1, {}, 1);
  REQUIRE(many.size() == 4);
  for (std::size_t i = 0; i < many.size(); ++i) {
    CHECK(many[i].seed == i + 1);
    CHECK(many[i].results[0].estimate->coefficients == serial[i].results[0].estimate->coefficients);
  }
  CHECK_THROWS_AS(placebo_run(ds, iv, {"ln_grant_amount"}, 1), ConfigError);
}

TEST_CASE("window [5] reproduces the main-run diagnostics", "[robustness]") {
  const auto ds = small_panel();
  const auto& r = small_records();
  DesignSpec spec;
  spec.outcome = "avg_citations";
  const auto main = diagnose(make_design(ds.observations, build_instruments(ds, r.roles, r.events), spec));
  const auto rows = window_sensitivity(ds, r.roles, r.events, {5}, {}, spec);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].error.empty());
  CHECK(rows[0].n == main.n);
  CHECK(rows[0].robust_f == main.first_stage_robust_f.statistic);
  CHECK(rows[0].min_eigenvalue == main.min_eigenvalue);
  CHECK(rows[0].kp_rk_lm == main.kp_rk_lm.statistic);
}

TEST_CASE("each window row is recomputable by rebuilding instruments by hand", "[robustness]") {
  const auto ds = small_panel();
  const auto& r = small_records();
  DesignSpec spec;
  spec.outcome = "avg_citations";
  const auto rows = window_sensitivity(ds, r.roles, r.events, {3, 5, 7}, {}, spec, true);
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) {
    InstrumentOptions o;
    o.employment_window = row.window;
    o.familiarity_window = row.window;
    const auto dm = make_design(ds.observations, build_instruments(ds, r.roles, r.events, o), spec);
    CHECK(row.robust_f == first_stage_robust_f(dm).statistic);
    CHECK(row.min_eigenvalue == cragg_donald_f(dm));
    CHECK(row.robust_f > 10.0);
  }
  // Longer windows never switch employment off.
  const auto e3 = political_hegemony(r.roles, ds.observations, 3);
  const auto e7 = political_hegemony(r.roles, ds.observations, 7);
  for (std::size_t i = 0; i < e3.size(); ++i) CHECK(e7[i] >= e3[i]);

  CHECK_THROWS_AS(window_sensitivity(ds, r.roles, r.events, {}, {}, spec), ConfigError);
  CHECK_THROWS_AS(window_sensitivity(ds, r.roles, r.events, {4}, {}, spec), ConfigError);
}

TEST_CASE("record-level generator feeds the panel builder without exclusions", "[robustness]") {
  const auto& r = small_records();
  const auto ds = small_panel();
  CHECK(ds.exclusions.empty());
  CHECK(ds.observations.size() == r.scholars.size() * 10);
  // Funded rows coincide with the generated grant windows.
  std::set<std::pair<std::string, int>> active;
  for (const auto& g : r.grants)
    for (int y = g.award_year; y < g.award_year + g.duration_years; ++y) active.insert({g.scholar_id, y});
  for (const auto& o : ds.observations) CHECK((o.funded == 1) == active.count({o.scholar_id, o.year}));
  CHECK(generate_records(r.config).grants.size() == r.grants.size());
}
