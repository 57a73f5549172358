#pragma once

// Config-driven orchestration: ingest, topics, instruments, estimation,
// diagnostics, robustness and reports. Artifacts are assembled in memory and
// written only after every requested stage has succeeded.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivpanel/config.hpp"
#include "ivpanel/design.hpp"
#include "ivpanel/diagnostics.hpp"
#include "ivpanel/estimator.hpp"
#include "ivpanel/instruments.hpp"
#include "ivpanel/panel_data.hpp"
#include "ivpanel/report.hpp"
#include "ivpanel/rng.hpp"
#include "ivpanel/robustness.hpp"
#include "ivpanel/topic_model.hpp"

namespace ivpanel::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

inline const std::map<std::string, std::string>& module_versions() {
  static const std::map<std::string, std::string> v{
      {"panel_data", "1.0"}, {"topic_model", "1.0"}, {"instruments", "1.0"}, {"estimator", "1.0"},
      {"diagnostics", "1.0"}, {"robustness", "1.0"}, {"synthgen", "1.0"},   {"report", "1.0"}};
  return v;
}

inline const config::Values& defaults() {
  static const config::Values v{
      {"run.seed", "1"},
      {"input.dir", "."},
      {"input.scholars", "scholars.csv"},
      {"input.grants", "grants.csv"},
      {"input.pubs", "pubs.csv"},
      {"input.context", "context.csv"},
      {"input.roles", "roles.csv"},
      {"input.events", "events.csv"},
      {"input.stopwords", ""},
      {"panel.start_year", "2000"},
      {"panel.end_year", "2019"},
      {"panel.treatment_cap", "5"},
      {"panel.initial_years", "3"},
      {"panel.gender_threshold", "0.95"},
      {"panel.exclude_coauthors", "false"},
      {"topics.assign", "lda"},
      {"topics.k", "30"},
      {"topics.alpha", ""},
      {"topics.eta", "0.01"},
      {"topics.iterations", "1000"},
      {"topics.burn_in", "200"},
      {"topics.keywords", "5"},
      {"instruments.employment_window", "5"},
      {"instruments.familiarity_window", "3"},
      {"instruments.tier_filter", "all"},
      {"instruments.dominance_mode", "time_reverse"},
      {"instruments.scope", "cell"},
      {"estimate.outcomes", "[article_count, avg_citations, avg_citescore]"},
      {"estimate.controls", "[]"},
      {"estimate.cov_type", "HC1"},
      {"robustness.placebo_count", "1"},
      {"robustness.placebo_ratio", "0.5"},
      {"robustness.windows", "[3, 5, 7]"},
      {"robustness.vary_familiarity", "false"},
      {"robustness.threads", "0"},
      {"output.dir", "out"},
      {"output.formats", "[text, json, csv]"},
  };
  return v;
}

enum class Stage { Ingest, Topics, Instruments, Estimate, Diagnose, Placebo, Windows };

inline const std::vector<std::pair<Stage, std::string>>& stage_names() {
  static const std::vector<std::pair<Stage, std::string>> v{
      {Stage::Ingest, "ingest"},     {Stage::Topics, "topics"},   {Stage::Instruments, "instruments"},
      {Stage::Estimate, "estimate"}, {Stage::Diagnose, "diagnose"}, {Stage::Placebo, "placebo"},
      {Stage::Windows, "windows"}};
  return v;
}

inline std::string to_string(Stage s) {
  for (const auto& [st, name] : stage_names())
    if (st == s) return name;
  return "?";
}

inline std::set<Stage> all_stages() {
  std::set<Stage> s;
  for (const auto& [st, name] : stage_names()) s.insert(st);
  return s;
}

struct InputPaths {
  fs::path scholars, grants, pubs, context, roles, events, stopwords;
};

struct PipelineConfig {
  config::Values values;  // effective layered values
  fs::path base_dir;      // relative paths in values resolve against this

  std::uint64_t seed = 1;
  InputPaths inputs;
  PanelConfig panel;
  double gender_threshold = 0.95;
  bool exclude_coauthors = false;
  std::string topic_assign = "lda";
  LdaConfig lda;
  std::size_t keywords = 5;
  InstrumentOptions instruments;
  std::vector<std::string> outcomes;
  std::vector<std::string> controls;
  CovType cov = CovType::HC1;
  std::size_t placebo_count = 1;
  double placebo_ratio = 0.5;
  std::vector<int> windows;
  bool vary_familiarity = false;
  unsigned threads = 0;
  fs::path output_dir;
  std::vector<report::Format> formats;

  std::vector<std::uint64_t> placebo_seeds() const {
    std::vector<std::uint64_t> s;
    for (std::size_t i = 0; i < placebo_count; ++i) s.push_back(seed + i);
    return s;
  }

  /// Hashed description of the computation; excludes where outputs go and
  /// the thread count, neither of which changes results.
  std::string canonical() const { return config::canonical(values, {"output.dir", "robustness.threads"}); }

  std::string hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical())));
    return buf;
  }
};

namespace detail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p))
    throw ConfigError("cli", "validate", what + " input file not found: " + p.string());
}

}  // namespace detail

/// Builds a validated configuration from layered values. `file_dir` anchors
/// relative paths from the config file; flag paths should already be absolute.
inline PipelineConfig make_config(const config::Values& effective, const fs::path& base_dir = ".",
                                  bool check_paths = true) {
  PipelineConfig c;
  c.values = effective;
  c.base_dir = base_dir;
  const auto& v = effective;
  auto need_range = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("cli", "validate", what);
  };

  c.seed = static_cast<std::uint64_t>(config::integer(v, "run.seed"));
  const fs::path dir = detail::resolve(base_dir, config::raw(v, "input.dir"));
  c.inputs.scholars = detail::resolve(dir, config::raw(v, "input.scholars"));
  c.inputs.grants = detail::resolve(dir, config::raw(v, "input.grants"));
  c.inputs.pubs = detail::resolve(dir, config::raw(v, "input.pubs"));
  c.inputs.context = detail::resolve(dir, config::raw(v, "input.context"));
  c.inputs.roles = detail::resolve(dir, config::raw(v, "input.roles"));
  c.inputs.events = detail::resolve(dir, config::raw(v, "input.events"));
  const auto& sw = config::raw(v, "input.stopwords");
  c.inputs.stopwords = sw.empty() ? fs::path(IVPANEL_DATA_DIR) / "stopwords.txt" : detail::resolve(dir, sw);

  c.panel.start_year = static_cast<int>(config::integer(v, "panel.start_year"));
  c.panel.end_year = static_cast<int>(config::integer(v, "panel.end_year"));
  c.panel.treatment_cap = static_cast<int>(config::integer(v, "panel.treatment_cap"));
  c.panel.initial_years = static_cast<int>(config::integer(v, "panel.initial_years"));
  try {
    c.panel.validate();
  } catch (const Error& e) {
    throw ConfigError("cli", "validate", e.detail());
  }
  c.gender_threshold = config::number(v, "panel.gender_threshold");
  need_range(c.gender_threshold >= 0.0 && c.gender_threshold <= 1.0, "panel.gender_threshold must lie in [0, 1]");
  c.exclude_coauthors = config::boolean(v, "panel.exclude_coauthors");

  c.topic_assign = config::raw(v, "topics.assign");
  need_range(c.topic_assign == "lda" || c.topic_assign == "given", "topics.assign must be lda or given");
  c.lda.K = static_cast<int>(config::integer(v, "topics.k"));
  if (!config::raw(v, "topics.alpha").empty()) c.lda.alpha = config::number(v, "topics.alpha");
  c.lda.eta = config::number(v, "topics.eta");
  c.lda.iterations = static_cast<int>(config::integer(v, "topics.iterations"));
  c.lda.burn_in = static_cast<int>(config::integer(v, "topics.burn_in"));
  c.lda.seed = c.seed;
  try {
    c.lda.validate();
  } catch (const Error& e) {
    throw ConfigError("cli", "validate", e.detail());
  }
  const auto kw = config::integer(v, "topics.keywords");
  need_range(kw >= 1, "topics.keywords must be positive");
  c.keywords = static_cast<std::size_t>(kw);

  c.instruments.employment_window = static_cast<int>(config::integer(v, "instruments.employment_window"));
  c.instruments.familiarity_window = static_cast<int>(config::integer(v, "instruments.familiarity_window"));
  for (int w : {c.instruments.employment_window, c.instruments.familiarity_window})
    need_range(w == 3 || w == 5 || w == 7, "instrument windows must be 3, 5 or 7");
  c.instruments.tier_filter = parse_tier_filter(config::raw(v, "instruments.tier_filter"));
  c.instruments.dominance_mode = parse_dominance_mode(config::raw(v, "instruments.dominance_mode"));
  c.instruments.scope = parse_scope(config::raw(v, "instruments.scope"));

  c.outcomes = config::list(config::raw(v, "estimate.outcomes"), "estimate.outcomes");
  need_range(!c.outcomes.empty(), "estimate.outcomes is empty");
  const auto& cols = observation_columns();
  for (const auto& o : c.outcomes)
    need_range(std::find(cols.begin(), cols.end(), o) != cols.end() && o != "funded",
               "estimate.outcomes: unknown outcome '" + o + "'");
  c.controls = config::list(config::raw(v, "estimate.controls"), "estimate.controls");
  for (const auto& x : c.controls)
    need_range(std::find(cols.begin(), cols.end(), x) != cols.end() && x != "funded",
               "estimate.controls: unknown column '" + x + "'");
  c.cov = parse_cov_type(config::raw(v, "estimate.cov_type"));

  const auto pc = config::integer(v, "robustness.placebo_count");
  need_range(pc >= 0, "robustness.placebo_count must be >= 0");
  c.placebo_count = static_cast<std::size_t>(pc);
  c.placebo_ratio = config::number(v, "robustness.placebo_ratio");
  need_range(c.placebo_ratio > 0.0 && c.placebo_ratio < 1.0, "robustness.placebo_ratio must lie in (0, 1)");
  for (const auto& w : config::list(config::raw(v, "robustness.windows"), "robustness.windows")) {
    config::Values one{{"w", w}};
    const int win = static_cast<int>(config::integer(one, "w"));
    need_range(win == 3 || win == 5 || win == 7, "robustness.windows must be a subset of {3, 5, 7}");
    c.windows.push_back(win);
  }
  c.vary_familiarity = config::boolean(v, "robustness.vary_familiarity");
  const auto th = config::integer(v, "robustness.threads");
  need_range(th >= 0, "robustness.threads must be >= 0");
  c.threads = static_cast<unsigned>(th);

  c.output_dir = detail::resolve(base_dir, config::raw(v, "output.dir"));
  for (const auto& f : config::list(config::raw(v, "output.formats"), "output.formats"))
    c.formats.push_back(report::parse_format(f));
  need_range(!c.formats.empty(), "output.formats is empty");

  if (check_paths) {
    detail::require_file(c.inputs.scholars, "scholars");
    detail::require_file(c.inputs.grants, "grants");
    detail::require_file(c.inputs.pubs, "pubs");
    detail::require_file(c.inputs.context, "context");
    detail::require_file(c.inputs.roles, "roles");
    detail::require_file(c.inputs.events, "events");
    if (c.topic_assign == "lda") detail::require_file(c.inputs.stopwords, "stopwords");
  }
  return c;
}

/// Defaults, then the config file (if any), then flag overrides. Relative
/// paths in the file resolve against the file's directory; relative paths in
/// overrides resolve against the working directory.
inline PipelineConfig load_config(const std::optional<fs::path>& file, config::Values overrides,
                                  bool check_paths = true) {
  config::Values from_file;
  fs::path base = fs::current_path();
  if (file) {
    from_file = config::load(*file);
    base = fs::absolute(*file).parent_path();
    // Re-anchor file-relative paths so they survive merging with flags.
    for (const char* key : {"input.dir", "output.dir"}) {
      auto it = from_file.find(key);
      if (it != from_file.end() && !fs::path(it->second).is_absolute())
        it->second = (base / it->second).lexically_normal().string();
    }
  }
  for (const char* key : {"input.dir", "output.dir"}) {
    auto it = overrides.find(key);
    if (it != overrides.end() && !fs::path(it->second).is_absolute())
      it->second = fs::absolute(it->second).lexically_normal().string();
  }
  const auto merged = config::merge(defaults(), {from_file, overrides});
  return make_config(merged, base, check_paths);
}

// --- Run state ------------------------------------------------------------------

struct StageCount {
  std::string stage;
  std::size_t rows = 0;
};

struct OutcomeResults {
  std::string outcome;
  EstimateResult ols;
  report::TslsFit tsls;
  std::optional<DiagnosticsReport> diagnostics;
};

struct RunResult {
  PipelineConfig config;
  PanelDataset panel;
  std::optional<TopicModel> topics;
  std::optional<InstrumentSet> instruments;
  std::vector<OutcomeResults> outcomes;
  std::vector<PlaceboRun> placebo;
  std::vector<WindowRow> windows;
  std::vector<StageCount> counts;
  std::vector<std::string> log;
  std::map<std::string, std::string> artifacts;  // file name -> content
  json manifest;
};

namespace detail {

class Logger {
 public:
  Logger(RunResult& r, std::ostream* echo) : r_(r), echo_(echo) {}

  void line(const std::string& s) {
    r_.log.push_back(s);
    if (echo_) *echo_ << s << '\n';
  }

  /// Records a row count and checks it does not exceed the previous stage.
  void count(const std::string& stage, std::size_t rows, bool chained = true) {
    if (chained && !r_.counts.empty() && rows > r_.counts.back().rows)
      throw StateError("cli", stage, "row count grew from " + std::to_string(r_.counts.back().rows) + " to " +
                                         std::to_string(rows));
    r_.counts.push_back({stage, rows});
    line(stage + ": rows=" + std::to_string(rows));
  }

 private:
  RunResult& r_;
  std::ostream* echo_;
};

inline std::string read_text(const fs::path& p) { return csv::read_file(p.string()); }

inline std::string fnv_hex(const std::string& s) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(s)));
  return buf;
}

inline std::string panel_csv(const std::vector<PanelObservation>& obs) {
  std::ostringstream os;
  csv::Row header{"scholar_id", "affiliation_id", "year"};
  const auto& cols = observation_columns();
  header.insert(header.end(), cols.begin(), cols.end());
  csv::write_row(os, header);
  for (const auto& o : obs) {
    csv::Row r{o.scholar_id, o.affiliation_id, std::to_string(o.year)};
    for (const auto& c : cols) r.push_back(csv::format_double(observation_value(o, c)));
    csv::write_row(os, r);
  }
  return os.str();
}

inline std::string exclusions_csv(const std::vector<Exclusion>& ex) {
  std::ostringstream os;
  csv::write_row(os, {"stage", "scholar_id", "year", "reason"});
  for (const auto& e : ex)
    csv::write_row(os, {e.stage, e.scholar_id, e.year ? std::to_string(*e.year) : "", e.reason});
  return os.str();
}

inline std::string grant_topics_csv(const std::vector<GrantRecord>& grants) {
  std::ostringstream os;
  csv::write_row(os, {"grant_id", "scholar_id", "award_year", "topic_id"});
  for (const auto& g : grants)
    csv::write_row(os, {g.grant_id, g.scholar_id, std::to_string(g.award_year),
                        g.topic_id ? std::to_string(*g.topic_id) : ""});
  return os.str();
}

}  // namespace detail

/// Output files each stage produces, for dry runs and manifests.
inline std::vector<std::string> planned_artifacts(const PipelineConfig& c, const std::set<Stage>& stages) {
  std::vector<std::string> out{"manifest.json", "run.log"};
  auto tables = [&](const std::string& stem) {
    for (auto f : c.formats) out.push_back(stem + "." + report::extension(f));
  };
  if (stages.count(Stage::Ingest)) {
    out.push_back("panel.csv");
    out.push_back("exclusions.csv");
  }
  if (stages.count(Stage::Topics)) {
    out.push_back("grant_topics.csv");
    if (c.topic_assign == "lda") {
      out.push_back("topic_model.json");
      tables("topics");
    }
  }
  if (stages.count(Stage::Instruments)) out.push_back("instruments.csv");
  if (stages.count(Stage::Estimate)) {
    tables("ols");
    tables("tsls");
    out.push_back("estimates.json");
  }
  if (stages.count(Stage::Diagnose)) {
    tables("diagnostics");
    out.push_back("diagnostics_report.json");
  }
  if (stages.count(Stage::Placebo) && c.placebo_count > 0) {
    out.push_back("placebo.json");
    out.push_back("placebo_summary.csv");
  }
  if (stages.count(Stage::Windows) && !c.windows.empty()) {
    out.push_back("window_sensitivity.csv");
    tables("windows");
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Runs the requested stages (plus their prerequisites) and renders the
/// artifacts of the requested stages. Nothing is written to disk.
inline RunResult execute(const PipelineConfig& cfg, std::set<Stage> stages, std::ostream* echo = nullptr) {
  RunResult r;
  r.config = cfg;
  detail::Logger log(r, echo);
  const std::set<Stage> wanted = stages;
  auto needs = [&](std::initializer_list<Stage> any) {
    return std::any_of(any.begin(), any.end(), [&](Stage s) { return stages.count(s) > 0; });
  };
  const bool need_iv = needs({Stage::Instruments, Stage::Estimate, Stage::Diagnose, Stage::Placebo, Stage::Windows});
  const bool need_topics = need_iv || needs({Stage::Topics});
  auto put = [&](const std::string& name, std::string content) { r.artifacts[name] = std::move(content); };
  auto put_table = [&](const std::string& stem, const report::Table& t) {
    for (auto f : cfg.formats) put(stem + "." + report::extension(f), report::render(t, f));
  };

  // Ingest.
  log.line("ivpanel " + std::string(kVersion) + " config " + cfg.hash());
  r.panel = load_panel(cfg.inputs.scholars.string(), cfg.inputs.grants.string(), cfg.inputs.pubs.string(),
                       cfg.inputs.context.string(), cfg.panel);
  log.line("ingest: scholars=" + std::to_string(r.panel.scholars.size()) + " grants=" +
           std::to_string(r.panel.grants.size()) + " pubs=" + std::to_string(r.panel.pubs.size()) +
           " context=" + std::to_string(r.panel.context.size()) + " excluded_rows=" +
           std::to_string(r.panel.exclusions.size()));
  log.count("ingest", r.panel.observations.size());
  r.panel = filter_gender_confidence(std::move(r.panel), cfg.gender_threshold);
  log.count("gender_filter", r.panel.observations.size());
  if (cfg.exclude_coauthors) {
    const auto funded = funded_scholars(r.panel.observations);
    const auto pubs = r.panel.pubs;
    r.panel = exclude_coauthors(std::move(r.panel), pubs, funded);
    log.count("coauthor_exclusion", r.panel.observations.size());
  }
  if (r.panel.observations.empty()) throw DataError("panel_data", "load_panel", "no observations left after filtering");
  if (wanted.count(Stage::Ingest)) {
    put("panel.csv", detail::panel_csv(r.panel.observations));
    put("exclusions.csv", detail::exclusions_csv(r.panel.exclusions));
  }

  // Topics.
  if (need_topics) {
    if (cfg.topic_assign == "given") {
      for (const auto& g : r.panel.grants)
        if (!g.topic_id)
          throw DataError("topic_model", "assign_topic", "grant " + g.grant_id + " has no topic_id and topics.assign = given");
      log.line("topics: using given topic_id for " + std::to_string(r.panel.grants.size()) + " grants");
    } else if (!r.panel.grants.empty()) {
      const auto stop = load_stopwords(cfg.inputs.stopwords.string());
      std::vector<std::string> docs, ids;
      for (const auto& g : r.panel.grants) {
        docs.push_back(g.title + " " + g.abstract);
        ids.push_back(g.grant_id);
      }
      const auto corpus = preprocess(docs, stop, ids);
      r.topics = fit_lda(corpus, cfg.lda);
      for (std::size_t d = 0; d < r.panel.grants.size(); ++d) r.panel.grants[d].topic_id = assign_topic(*r.topics, d);
      for (const auto& w : r.topics->warnings) log.line("topics: warning: " + w);
      log.line("topics: documents=" + std::to_string(corpus.size()) + " empty=" +
               std::to_string(corpus.empty_count()) + " vocabulary=" + std::to_string(corpus.vocab.size()) +
               " K=" + std::to_string(cfg.lda.K));
    }
    if (wanted.count(Stage::Topics)) {
      put("grant_topics.csv", detail::grant_topics_csv(r.panel.grants));
      if (r.topics) {
        put("topic_model.json", to_json(*r.topics).dump(1) + "\n");
        put_table("topics", report::topic_table(*r.topics, cfg.keywords));
      }
    }
  }

  // Instruments.
  if (need_iv) {
    const auto roles = parse_roles(csv::Table::from_file(cfg.inputs.roles.string()));
    validate_roles(roles, r.panel);
    const auto events = parse_events(csv::Table::from_file(cfg.inputs.events.string()));
    r.instruments = build_instruments(r.panel, roles, events, cfg.instruments);
    for (const auto& w : r.instruments->warnings) log.line("instruments: warning: " + w);
    log.count("instruments", r.instruments->size());
    if (wanted.count(Stage::Instruments)) {
      std::ostringstream os;
      write_instruments_csv(os, r.panel.observations, *r.instruments);
      put("instruments.csv", os.str());
    }

    // Estimation and diagnostics, per outcome.
    if (needs({Stage::Estimate, Stage::Diagnose})) {
      for (const auto& outcome : cfg.outcomes) {
        DesignSpec spec;
        spec.outcome = outcome;
        spec.controls = cfg.controls;
        const auto dm = make_design(r.panel.observations, *r.instruments, spec);
        log.count("estimate[" + outcome + "]", static_cast<std::size_t>(dm.n()), false);
        OutcomeResults o;
        o.outcome = outcome;
        if (stages.count(Stage::Estimate)) {
          o.ols = ols(dm.y, hcat(dm.treatment(), dm.controls()), cfg.cov, "ols");
          o.ols.outcome_label = outcome;
          o.tsls.first = first_stage(dm, cfg.cov);
          o.tsls.second = tsls(dm, cfg.cov);
          o.tsls.first_stage_f = first_stage_robust_f(dm, cfg.cov);
        }
        if (stages.count(Stage::Diagnose)) o.diagnostics = diagnose(dm, cfg.cov);
        r.outcomes.push_back(std::move(o));
      }
      if (wanted.count(Stage::Estimate)) {
        std::vector<EstimateResult> ols_fits;
        std::vector<report::TslsFit> tsls_fits;
        json est = json::array();
        for (const auto& o : r.outcomes) {
          ols_fits.push_back(o.ols);
          tsls_fits.push_back(o.tsls);
          est.push_back({{"outcome", o.outcome},
                         {"ols", report::to_json(o.ols)},
                         {"first_stage", report::to_json(o.tsls.first)},
                         {"tsls", report::to_json(o.tsls.second)},
                         {"first_stage_robust_f", report::to_json(*o.tsls.first_stage_f)}});
        }
        put_table("ols", report::ols_table(ols_fits));
        put_table("tsls", report::tsls_table(tsls_fits));
        put("estimates.json", est.dump(1) + "\n");
      }
      if (wanted.count(Stage::Diagnose)) {
        std::vector<std::pair<std::string, DiagnosticsReport>> reps;
        json dj = json::array();
        for (const auto& o : r.outcomes) {
          reps.emplace_back(o.outcome, *o.diagnostics);
          dj.push_back({{"outcome", o.outcome}, {"diagnostics", report::to_json(*o.diagnostics)}});
        }
        put_table("diagnostics", report::diagnostics_table(reps));
        put("diagnostics_report.json", dj.dump(1) + "\n");
      }
    }

    // Robustness.
    if (stages.count(Stage::Placebo) && cfg.placebo_count > 0) {
      std::vector<std::string> placebo_outcomes;
      for (const auto& o : cfg.outcomes)
        if (o == "article_count" || o == "avg_citations" || o == "avg_citescore") placebo_outcomes.push_back(o);
      if (placebo_outcomes.empty())
        throw ConfigError("robustness", "placebo_run", "no performance outcome among estimate.outcomes");
      r.placebo = placebo_runs(r.panel, *r.instruments, placebo_outcomes, cfg.placebo_seeds(), cfg.placebo_ratio,
                               cfg.cov, cfg.controls, cfg.threads);
      for (const auto& run : r.placebo)
        for (const auto& res : run.results) {
          const auto tag = "placebo[seed=" + std::to_string(run.seed) + "," + res.outcome + "," + res.subgroup + "]";
          if (res.n > r.panel.observations.size()) throw StateError("cli", "placebo", "subgroup exceeds the panel");
          log.count(tag, res.n, false);
          if (!res.error.empty()) log.line(tag + ": error: " + res.error);
        }
      put("placebo.json", report::placebo_json(r.placebo).dump(1) + "\n");
      put("placebo_summary.csv", report::placebo_summary_csv(r.placebo));
    }
    if (stages.count(Stage::Windows) && !cfg.windows.empty()) {
      const auto roles = parse_roles(csv::Table::from_file(cfg.inputs.roles.string()));
      const auto events = parse_events(csv::Table::from_file(cfg.inputs.events.string()));
      DesignSpec spec;
      spec.outcome = cfg.outcomes.front();
      spec.controls = cfg.controls;
      r.windows = window_sensitivity(r.panel, roles, events, cfg.windows, cfg.instruments, spec,
                                     cfg.vary_familiarity, cfg.cov);
      for (const auto& w : r.windows) {
        const auto tag = "windows[" + std::to_string(w.window) + "]";
        log.count(tag, w.n, false);
        if (!w.error.empty()) log.line(tag + ": error: " + w.error);
      }
      put("window_sensitivity.csv", report::windows_csv(r.windows));
      put_table("windows", report::windows_table(r.windows));
    }
  }

  // Manifest and log.
  std::string log_text;
  for (const auto& l : r.log) log_text += l + "\n";
  put("run.log", log_text);
  json inputs = json::object();
  for (const auto& [name, path] : std::vector<std::pair<std::string, fs::path>>{
           {"scholars", cfg.inputs.scholars}, {"grants", cfg.inputs.grants}, {"pubs", cfg.inputs.pubs},
           {"context", cfg.inputs.context},   {"roles", cfg.inputs.roles},   {"events", cfg.inputs.events}})
    inputs[name] = {{"file", path.filename().string()}, {"fnv1a64", detail::fnv_hex(detail::read_text(path))}};
  json stages_j = json::array();
  for (const auto& c : r.counts) stages_j.push_back({{"stage", c.stage}, {"rows", c.rows}});
  json artifacts = json::array();
  for (const auto& [name, content] : r.artifacts)
    artifacts.push_back({{"file", name}, {"bytes", content.size()}, {"fnv1a64", detail::fnv_hex(content)}});
  json cfg_j = json::object();
  for (const auto& [k, v] : cfg.values)
    if (k != "output.dir" && k != "robustness.threads") cfg_j[k] = v;
  json requested = json::array();
  for (auto s : wanted) requested.push_back(to_string(s));
  r.manifest = {{"tool", "ivpanel"},       {"version", kVersion},  {"modules", module_versions()},
                {"config_hash", cfg.hash()}, {"config", cfg_j},      {"stages_requested", requested},
                {"inputs", inputs},          {"row_counts", stages_j}, {"artifacts", artifacts}};
  put("manifest.json", r.manifest.dump(2) + "\n");
  return r;
}

/// Writes every artifact into the configured output directory.
inline void write_artifacts(const RunResult& r) {
  std::error_code ec;
  fs::create_directories(r.config.output_dir, ec);
  if (ec) throw DataError("cli", "write", "cannot create output directory " + r.config.output_dir.string());
  for (const auto& [name, content] : r.artifacts) {
    const auto path = r.config.output_dir / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cli", "write", "cannot write " + path.string());
    os << content;
  }
}

/// Config file for a synthetic record set written next to its CSVs.
inline std::string synth_config_text(int start_year, int end_year, int topics, std::uint64_t seed) {
  config::Values v{{"run.seed", std::to_string(seed)},
                   {"input.dir", "."},
                   {"panel.start_year", std::to_string(start_year)},
                   {"panel.end_year", std::to_string(end_year)},
                   {"topics.k", std::to_string(topics)},
                   {"topics.iterations", "200"},
                   {"topics.burn_in", "50"},
                   {"estimate.outcomes", "[avg_citations, article_count, avg_citescore]"},
                   {"output.dir", "out"}};
  return "# Pipeline configuration for a synthetic data set.\n" + config::to_text(v);
}

/// Full run: every stage, artifacts written. Returns the in-memory result.
inline RunResult run_pipeline(const PipelineConfig& cfg, std::ostream* echo = nullptr) {
  auto r = execute(cfg, all_stages(), echo);
  write_artifacts(r);
  return r;
}

}  // namespace ivpanel::pipeline
