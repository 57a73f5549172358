#pragma once

// Raw-record synthetic data: scholars, grants, publications, institution
// context, leadership roles and training events, in the input CSV schemas.
//
// Latent funding index for scholar i in year t:
//   index = g_emp * employment + g_fam * familiarity + 0.3 * (gender - 0.5) + u
//   funded = eligible_i * 1[index > threshold]
// Average citations:
//   y = beta0 + beta1 * funded + 0.5 * gender + 0.05 * academic_age + eps
// with corr(u, eps) = rho. Each publication's citation count is y plus
// independent N(0, pub_noise_sd) noise. Employment and familiarity are computed
// by the same library functions the pipeline uses, so the generated
// instruments are exactly what the pipeline reconstructs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivpanel/csv.hpp"
#include "ivpanel/error.hpp"
#include "ivpanel/instruments.hpp"
#include "ivpanel/panel_data.hpp"
#include "ivpanel/rng.hpp"

namespace ivpanel {

struct RecordDgpConfig {
  std::size_t n_scholars = 200;
  std::size_t n_affiliations = 10;
  int n_topics = 3;
  int start_year = 2000;
  int end_year = 2009;
  double beta0 = 20.0;
  double beta1 = 2.0;
  double rho = 0.5;
  double gamma_employment = 0.8;
  double gamma_familiarity = 0.3;
  double threshold = 0.5;
  double eligible_share = 0.6;  // the rest are never funded
  double role_rate = 0.05;    // chance of a new role per scholar-year
  double event_rate = 0.5;    // mean training events per affiliation-year
  double noise_sd = 1.0;
  double pub_noise_sd = 1.0;
  double pub_rate = 1.5;      // extra publications per year beyond the first
  double pub_effect = 1.0;    // extra publications per year when funded
  std::uint64_t seed = 1;

  void validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("synthgen", "generate_records", what); };
    if (!(std::fabs(rho) < 1.0)) fail("rho must lie in (-1, 1)");
    if (!(noise_sd > 0.0)) fail("noise_sd must be positive");
    if (n_scholars < 4) fail("need at least 4 scholars");
    if (n_affiliations == 0) fail("need at least one affiliation");
    if (n_topics < 1) fail("n_topics must be positive");
    if (!(eligible_share >= 0.0 && eligible_share <= 1.0)) fail("eligible_share must lie in [0, 1]");
    if (start_year > end_year) fail("start_year must be <= end_year");
    if (start_year - 8 < 1990) fail("start_year must leave an 8-year lookback after 1990");
  }
};

struct SyntheticRecords {
  RecordDgpConfig config;
  std::vector<ScholarRecord> scholars;
  std::vector<GrantRecord> grants;
  std::vector<PublicationRecord> pubs;
  std::vector<ContextRecord> context;
  std::vector<RoleRecord> roles;
  std::vector<TrainingEvent> events;
  std::map<std::string, int> true_topic;  // scholar -> generating topic

  nlohmann::json ground_truth() const {
    const auto& c = config;
    return {{"beta1", c.beta1},
            {"beta0", c.beta0},
            {"rho", c.rho},
            {"gamma", {c.gamma_employment, 0.0, c.gamma_familiarity}},
            {"flags",
             {{"treatment_kind", "binary_threshold"},
              {"outcome", "avg_citations"},
              {"employment_invalid", false},
              {"dominance_invalid", false},
              {"familiarity_invalid", false}}},
            {"seed", c.seed}};
  }
};

namespace detail {

inline const std::vector<std::vector<std::string>>& topic_lexicon() {
  static const std::vector<std::vector<std::string>> lex{
      {"climate", "carbon", "emissions", "warming", "ocean", "drought", "adaptation", "temperature", "glacier",
       "rainfall", "coastal", "atmosphere"},
      {"voters", "election", "party", "legislature", "policy", "democracy", "campaign", "ballot", "congress",
       "partisan", "governance", "turnout"},
      {"children", "schooling", "teachers", "classroom", "literacy", "curriculum", "students", "reading",
       "learning", "tutoring", "enrollment", "preschool"},
      {"migration", "refugees", "borders", "labor", "remittances", "asylum", "diaspora", "settlement",
       "citizenship", "workers", "mobility", "integration"},
      {"genome", "protein", "cells", "molecular", "enzyme", "sequencing", "mutation", "tissue", "neurons",
       "receptor", "pathway", "signaling"},
  };
  return lex;
}

inline std::string synth_abstract(Rng& rng, int topic, std::size_t words) {
  const auto& lex = topic_lexicon();
  const auto& own = lex[static_cast<std::size_t>(topic) % lex.size()];
  static const std::vector<std::string> shared{"analysis", "evidence", "data", "model", "survey", "effects"};
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    const bool common = rng.uniform() < 0.15;
    const auto& pool = common ? shared : own;
    out += (i ? " " : "") + pool[rng.below(pool.size())];
  }
  return out;
}

inline std::string pad(std::size_t v, int width) {
  auto s = std::to_string(v);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace detail

inline SyntheticRecords generate_records(const RecordDgpConfig& cfg) {
  cfg.validate();
  SyntheticRecords out;
  out.config = cfg;
  const int lookback_start = cfg.start_year - 8;
  const double shrink = std::sqrt(1.0 - cfg.rho * cfg.rho);

  // Affiliations and their yearly context rows.
  std::vector<std::string> affs;
  for (std::size_t a = 0; a < cfg.n_affiliations; ++a) affs.push_back("u" + detail::pad(a + 1, 2));
  for (std::size_t a = 0; a < affs.size(); ++a) {
    Rng rng(mix_seed(cfg.seed, a, 0xC0A7));
    const double base_rank = 1.0 + std::floor(rng.uniform() * 400.0);
    const double base_rep = 10.0 + 80.0 * rng.uniform();
    const double base_pubs = rng.normal(10.0, 1.0);
    for (int y = lookback_start; y <= cfg.end_year; ++y) {
      ContextRecord c;
      c.affiliation_id = affs[a];
      c.year = y;
      c.qs_rank = static_cast<long long>(std::max(1.0, base_rank + std::round(rng.normal(0.0, 5.0))));
      c.usnews_rank = static_cast<long long>(std::max(1.0, std::round(base_rank / 2.0 + rng.normal(0.0, 5.0))));
      c.employer_reputation = std::clamp(base_rep + rng.normal(0.0, 2.0), 1.0, 100.0);
      c.ln_pubs_affil = base_pubs + 0.02 * (y - cfg.start_year) + rng.normal(0.0, 0.05);
      c.ln_cites_affil = *c.ln_pubs_affil + 2.0 + rng.normal(0.0, 0.1);
      c.field_id = "social_science";
      c.ln_pubs_field = 12.0 + 0.03 * (y - cfg.start_year) + rng.normal(0.0, 0.05);
      c.ln_cites_field = 15.0 + 0.05 * (y - cfg.start_year) + rng.normal(0.0, 0.05);
      out.context.push_back(std::move(c));
    }
  }

  // Training events per affiliation-year.
  for (std::size_t a = 0; a < affs.size(); ++a) {
    for (int y = lookback_start; y <= cfg.end_year; ++y) {
      Rng rng(mix_seed(cfg.seed, a, static_cast<std::uint64_t>(y), 0xE7));
      const auto k = rng.poisson(cfg.event_rate);
      for (std::uint64_t e = 0; e < k; ++e)
        out.events.push_back({affs[a], y, rng.uniform() < 0.5 ? "nsf_day" : "workshop"});
    }
  }

  // Scholars and their roles.
  for (std::size_t s = 0; s < cfg.n_scholars; ++s) {
    Rng rng(mix_seed(cfg.seed, s, 0x5C01));
    ScholarRecord r;
    r.scholar_id = "s" + detail::pad(s + 1, 4);
    r.gender = rng.uniform() < 0.69 ? Gender::Male : Gender::Female;
    r.gender_confidence = 0.95 + 0.05 * rng.uniform();
    r.first_pub_year = cfg.start_year - 1 - static_cast<int>(rng.below(15));
    r.affiliation_id = affs[rng.below(affs.size())];
    out.true_topic[r.scholar_id] = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.n_topics)));
    for (int y = lookback_start; y <= cfg.end_year; ++y) {
      if (rng.uniform() >= cfg.role_rate) continue;
      RoleRecord role;
      role.scholar_id = r.scholar_id;
      role.role_year = y;
      role.tier = rng.uniform() < 0.4 ? Tier::Leadership : Tier::Membership;
      role.body = static_cast<Body>(rng.below(3));
      out.roles.push_back(role);
    }
    out.scholars.push_back(std::move(r));
  }

  // Skeleton rows for the instrument functions.
  std::vector<PanelObservation> skel;
  for (const auto& s : out.scholars)
    for (int y = cfg.start_year; y <= cfg.end_year; ++y) {
      PanelObservation o;
      o.scholar_id = s.scholar_id;
      o.affiliation_id = s.affiliation_id;
      o.year = y;
      skel.push_back(std::move(o));
    }
  const auto emp = political_hegemony(out.roles, skel, 5);
  const auto fam = project_familiarity(out.events, skel, 3);

  std::size_t row = 0, grant_no = 0, pub_no = 0;
  for (std::size_t s = 0; s < out.scholars.size(); ++s) {
    const auto& sc = out.scholars[s];
    const double male = sc.gender == Gender::Male ? 1.0 : 0.0;
    const int topic = out.true_topic.at(sc.scholar_id);
    const bool eligible = Rng(mix_seed(cfg.seed, s, 0xE11B)).uniform() < cfg.eligible_share;
    auto add_pubs = [&](Rng& rng, int year, double mean_citations, std::uint64_t extra) {
      const auto k = 1 + rng.poisson(cfg.pub_rate) + extra;
      for (std::uint64_t j = 0; j < k; ++j) {
        PublicationRecord p;
        p.pub_id = "p" + detail::pad(++pub_no, 6);
        p.scholar_id = sc.scholar_id;
        p.year = year;
        p.citations = std::max(0.0, mean_citations + rng.normal(0.0, cfg.pub_noise_sd));
        p.citescore = std::exp(rng.normal(1.0, 0.5));
        if (rng.uniform() < 0.1) {
          const auto& other = out.scholars[rng.below(out.scholars.size())];
          if (other.scholar_id != sc.scholar_id) p.coauthor_ids.push_back(other.scholar_id);
        }
        out.pubs.push_back(std::move(p));
      }
    };

    // Pre-window publication history.
    for (int y = cfg.start_year - 3; y < cfg.start_year; ++y) {
      if (y < *sc.first_pub_year) continue;
      Rng rng(mix_seed(cfg.seed, s, static_cast<std::uint64_t>(y), 0x9B));
      add_pubs(rng, y, cfg.beta0 + 0.5 * male, 0);
    }

    std::vector<int> funded;
    for (int y = cfg.start_year; y <= cfg.end_year; ++y, ++row) {
      Rng rng(mix_seed(cfg.seed, s, static_cast<std::uint64_t>(y)));
      const double u = rng.normal();
      const double eps = cfg.noise_sd * (cfg.rho * u + shrink * rng.normal());
      const double index =
          cfg.gamma_employment * emp[row] + cfg.gamma_familiarity * fam[row] + 0.3 * (male - 0.5) + u;
      const int d = eligible && index > cfg.threshold ? 1 : 0;
      funded.push_back(d);
      const double age = std::max(0, y - 1 - *sc.first_pub_year);
      const double y_mean = cfg.beta0 + cfg.beta1 * d + 0.5 * male + 0.05 * age + eps;
      add_pubs(rng, y, y_mean, d ? static_cast<std::uint64_t>(std::llround(cfg.pub_effect)) : 0);
    }

    // Consecutive funded years become grants of at most five years.
    Rng grng(mix_seed(cfg.seed, s, 0x6A));
    for (std::size_t t = 0; t < funded.size();) {
      if (!funded[t]) {
        ++t;
        continue;
      }
      std::size_t len = 0;
      while (t + len < funded.size() && funded[t + len] && len < 5) ++len;
      GrantRecord g;
      g.grant_id = "g" + detail::pad(++grant_no, 6);
      g.scholar_id = sc.scholar_id;
      g.award_year = cfg.start_year + static_cast<int>(t);
      g.duration_years = static_cast<int>(len);
      g.amount_usd = std::round(std::exp(grng.normal(12.5, 0.5)));
      g.topic_id = topic;
      g.title = detail::synth_abstract(grng, topic, 4);
      g.abstract = detail::synth_abstract(grng, topic, 30);
      out.grants.push_back(std::move(g));
      t += len;
    }
  }
  return out;
}

// --- CSV emission --------------------------------------------------------------

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("synthgen", "write", "cannot write file: " + p.string());
  return os;
}

template <typename T>
std::string opt_str(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_floating_point_v<T>) return csv::format_double(*v);
  else return std::to_string(*v);
}

inline const char* tier_name(Tier t) { return t == Tier::Leadership ? "leadership" : "membership"; }
inline const char* body_name(Body b) { return b == Body::NSF ? "NSF" : b == Body::APS ? "APS" : "AAAS"; }

}  // namespace detail

inline void write_scholars_csv(std::ostream& os, const std::vector<ScholarRecord>& v) {
  csv::write_row(os, {"scholar_id", "gender", "gender_confidence", "first_pub_year", "affiliation_id"});
  for (const auto& s : v)
    csv::write_row(os, {s.scholar_id, to_string(s.gender), csv::format_double(s.gender_confidence),
                        detail::opt_str(s.first_pub_year), s.affiliation_id});
}

inline void write_grants_csv(std::ostream& os, const std::vector<GrantRecord>& v) {
  csv::write_row(os, {"grant_id", "scholar_id", "award_year", "amount_usd", "duration_years", "title", "abstract",
                      "topic_id"});
  for (const auto& g : v)
    csv::write_row(os, {g.grant_id, g.scholar_id, std::to_string(g.award_year), csv::format_double(g.amount_usd),
                        std::to_string(g.duration_years), g.title, g.abstract, detail::opt_str(g.topic_id)});
}

inline void write_pubs_csv(std::ostream& os, const std::vector<PublicationRecord>& v) {
  csv::write_row(os, {"pub_id", "scholar_id", "year", "citations", "citescore", "coauthor_ids"});
  for (const auto& p : v) {
    std::string co;
    for (const auto& c : p.coauthor_ids) co += (co.empty() ? "" : ";") + c;
    csv::write_row(os, {p.pub_id, p.scholar_id, std::to_string(p.year), csv::format_double(p.citations),
                        csv::format_double(p.citescore), co});
  }
}

inline void write_context_csv(std::ostream& os, const std::vector<ContextRecord>& v) {
  csv::write_row(os, {"affiliation_id", "year", "qs_rank", "usnews_rank", "employer_reputation", "ln_pubs_affil",
                      "ln_cites_affil", "field_id", "ln_pubs_field", "ln_cites_field"});
  for (const auto& c : v)
    csv::write_row(os, {c.affiliation_id, std::to_string(c.year), detail::opt_str(c.qs_rank),
                        detail::opt_str(c.usnews_rank), detail::opt_str(c.employer_reputation),
                        detail::opt_str(c.ln_pubs_affil), detail::opt_str(c.ln_cites_affil), c.field_id,
                        detail::opt_str(c.ln_pubs_field), detail::opt_str(c.ln_cites_field)});
}

inline void write_roles_csv(std::ostream& os, const std::vector<RoleRecord>& v) {
  csv::write_row(os, {"scholar_id", "role_year", "tier", "body"});
  for (const auto& r : v)
    csv::write_row(os, {r.scholar_id, std::to_string(r.role_year), detail::tier_name(r.tier), detail::body_name(r.body)});
}

inline void write_events_csv(std::ostream& os, const std::vector<TrainingEvent>& v) {
  csv::write_row(os, {"affiliation_id", "event_year", "kind"});
  for (const auto& e : v) csv::write_row(os, {e.affiliation_id, std::to_string(e.event_year), e.kind});
}

/// Writes scholars/grants/pubs/context/roles/events CSVs and
/// ground_truth.json into `dir`, which is created if needed.
inline void write_records(const SyntheticRecords& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("synthgen", "write", "cannot create directory " + dir.string() + ": " + ec.message());
  {
    auto os = detail::open_out(dir / "scholars.csv");
    write_scholars_csv(os, r.scholars);
  }
  {
    auto os = detail::open_out(dir / "grants.csv");
    write_grants_csv(os, r.grants);
  }
  {
    auto os = detail::open_out(dir / "pubs.csv");
    write_pubs_csv(os, r.pubs);
  }
  {
    auto os = detail::open_out(dir / "context.csv");
    write_context_csv(os, r.context);
  }
  {
    auto os = detail::open_out(dir / "roles.csv");
    write_roles_csv(os, r.roles);
  }
  {
    auto os = detail::open_out(dir / "events.csv");
    write_events_csv(os, r.events);
  }
  auto os = detail::open_out(dir / "ground_truth.json");
  os << r.ground_truth().dump(2) << '\n';
}

}  // namespace ivpanel
