#pragma once

// Regression tables and machine-readable reports.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivpanel/csv.hpp"
#include "ivpanel/diagnostics.hpp"
#include "ivpanel/error.hpp"
#include "ivpanel/estimator.hpp"
#include "ivpanel/robustness.hpp"
#include "ivpanel/topic_model.hpp"

namespace ivpanel::report {

using nlohmann::json;

enum class Format { Text, Json, Csv };

inline Format parse_format(const std::string& s) {
  if (s == "text" || s == "txt") return Format::Text;
  if (s == "json") return Format::Json;
  if (s == "csv") return Format::Csv;
  throw ConfigError("report", "render_tables", "unknown format '" + s + "' (expected text, json or csv)");
}

inline std::string extension(Format f) {
  return f == Format::Text ? "txt" : f == Format::Json ? "json" : "csv";
}

/// Significance stars: * p < 0.05, ** p < 0.01, *** p < 0.001.
inline std::string stars(double p) {
  if (!(p < 0.05)) return "";
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  return "*";
}

inline std::string fixed(double v, int decimals = 3) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);  // no "-0.000"
  return s;
}

/// "2.816*** (0.331)".
inline std::string format_cell(double coef, double se, double p, int decimals = 3) {
  return fixed(coef, decimals) + stars(p) + " (" + fixed(se, decimals) + ")";
}

// --- Generic table ----------------------------------------------------------------

struct Cell {
  std::string text;
  std::optional<double> coef, se, p;  // present for coefficient cells
  std::optional<double> value;        // present for scalar statistics
};

struct Table {
  std::string name;
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::pair<std::string, std::vector<Cell>>> rows;
  std::vector<std::string> notes;

  std::vector<Cell>& row(const std::string& label) {
    for (auto& [l, cells] : rows)
      if (l == label) return cells;
    rows.emplace_back(label, std::vector<Cell>(columns.size()));
    return rows.back().second;
  }
};

inline Cell coef_cell(const EstimateResult& r, const std::string& label, int decimals = 3) {
  const auto i = r.index_of(label);
  if (!i) return {};
  const double b = r.coefficients(static_cast<Eigen::Index>(*i));
  const double se = r.standard_errors(static_cast<Eigen::Index>(*i));
  const double p = r.p_value(*i);
  return {format_cell(b, se, p, decimals), b, se, p, std::nullopt};
}

inline Cell value_cell(double v, int decimals = 3) { return {fixed(v, decimals), std::nullopt, std::nullopt, std::nullopt, v}; }
inline Cell count_cell(std::size_t n) {
  return {std::to_string(n), std::nullopt, std::nullopt, std::nullopt, static_cast<double>(n)};
}
inline Cell text_cell(std::string s) { return {std::move(s), std::nullopt, std::nullopt, std::nullopt, std::nullopt}; }

namespace detail {

inline json num(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double num(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) return j.get<std::string>() == "inf" ? std::numeric_limits<double>::infinity()
                                                          : -std::numeric_limits<double>::infinity();
  return j.get<double>();
}

inline json opt(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

}  // namespace detail

inline std::string render_text(const Table& t) {
  std::vector<std::size_t> width(t.columns.size() + 1, 0);
  for (const auto& [label, cells] : t.rows) width[0] = std::max(width[0], label.size());
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    width[c + 1] = t.columns[c].size();
    for (const auto& [label, cells] : t.rows) width[c + 1] = std::max(width[c + 1], cells[c].text.size());
  }
  std::ostringstream os;
  os << t.title << '\n';
  std::size_t total = width[0];
  for (std::size_t c = 1; c < width.size(); ++c) total += 2 + width[c];
  const std::string rule(total, '-');
  os << rule << '\n' << std::left << std::setw(static_cast<int>(width[0])) << "";
  for (std::size_t c = 0; c < t.columns.size(); ++c)
    os << "  " << std::right << std::setw(static_cast<int>(width[c + 1])) << t.columns[c];
  os << '\n' << rule << '\n';
  for (const auto& [label, cells] : t.rows) {
    os << std::left << std::setw(static_cast<int>(width[0])) << label;
    for (std::size_t c = 0; c < cells.size(); ++c)
      os << "  " << std::right << std::setw(static_cast<int>(width[c + 1])) << cells[c].text;
    os << '\n';
  }
  os << rule << '\n';
  for (const auto& n : t.notes) os << n << '\n';
  return os.str();
}

inline std::string render_csv(const Table& t) {
  std::ostringstream os;
  csv::Row header{"row"};
  header.insert(header.end(), t.columns.begin(), t.columns.end());
  csv::write_row(os, header);
  for (const auto& [label, cells] : t.rows) {
    csv::Row r{label};
    for (const auto& c : cells) r.push_back(c.text);
    csv::write_row(os, r);
  }
  return os.str();
}

inline json table_to_json(const Table& t) {
  json rows = json::array();
  for (const auto& [label, cells] : t.rows) {
    json cj = json::array();
    for (const auto& c : cells) {
      json o{{"text", c.text}};
      if (c.coef) o["coef"] = detail::num(*c.coef);
      if (c.se) o["se"] = detail::num(*c.se);
      if (c.p) o["p"] = detail::num(*c.p);
      if (c.value) o["value"] = detail::num(*c.value);
      cj.push_back(std::move(o));
    }
    rows.push_back({{"label", label}, {"cells", cj}});
  }
  return {{"name", t.name}, {"title", t.title}, {"columns", t.columns}, {"rows", rows}, {"notes", t.notes}};
}

inline Table table_from_json(const json& j) {
  Table t;
  t.name = j.at("name").get<std::string>();
  t.title = j.at("title").get<std::string>();
  t.columns = j.at("columns").get<std::vector<std::string>>();
  t.notes = j.at("notes").get<std::vector<std::string>>();
  for (const auto& r : j.at("rows")) {
    std::vector<Cell> cells;
    for (const auto& c : r.at("cells")) {
      Cell cell;
      cell.text = c.at("text").get<std::string>();
      if (c.contains("coef")) cell.coef = detail::num(c["coef"]);
      if (c.contains("se")) cell.se = detail::num(c["se"]);
      if (c.contains("p")) cell.p = detail::num(c["p"]);
      if (c.contains("value")) cell.value = detail::num(c["value"]);
      cells.push_back(std::move(cell));
    }
    t.rows.emplace_back(r.at("label").get<std::string>(), std::move(cells));
  }
  return t;
}

inline std::string render(const Table& t, Format f) {
  switch (f) {
    case Format::Text: return render_text(t);
    case Format::Csv: return render_csv(t);
    case Format::Json: return table_to_json(t).dump(2) + "\n";
  }
  throw ConfigError("report", "render_tables", "unknown format");
}

// --- Estimates ----------------------------------------------------------------------

/// Everything reported about a fit except per-row residuals and fitted values.
inline json to_json(const EstimateResult& r) {
  json coef = json::array(), se = json::array(), cov = json::array();
  for (Eigen::Index i = 0; i < r.coefficients.size(); ++i) {
    coef.push_back(detail::num(r.coefficients(i)));
    se.push_back(detail::num(r.standard_errors(i)));
    json row = json::array();
    for (Eigen::Index j = 0; j < r.covariance.cols(); ++j) row.push_back(detail::num(r.covariance(i, j)));
    cov.push_back(std::move(row));
  }
  return {{"estimator", r.estimator}, {"outcome", r.outcome_label}, {"labels", r.labels},
          {"coefficients", coef},     {"standard_errors", se},      {"covariance", cov},
          {"r_squared", detail::num(r.r_squared)}, {"n", r.n}, {"df", r.df}, {"cov_type", to_string(r.cov_type)}};
}

inline EstimateResult estimate_from_json(const json& j) {
  EstimateResult r;
  r.estimator = j.at("estimator").get<std::string>();
  r.outcome_label = j.at("outcome").get<std::string>();
  r.labels = j.at("labels").get<std::vector<std::string>>();
  const auto k = static_cast<Eigen::Index>(r.labels.size());
  r.coefficients.resize(k);
  r.standard_errors.resize(k);
  r.covariance.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    r.coefficients(i) = detail::num(j.at("coefficients")[static_cast<std::size_t>(i)]);
    r.standard_errors(i) = detail::num(j.at("standard_errors")[static_cast<std::size_t>(i)]);
    for (Eigen::Index c = 0; c < k; ++c)
      r.covariance(i, c) = detail::num(j.at("covariance")[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]);
  }
  r.r_squared = detail::num(j.at("r_squared"));
  r.n = j.at("n").get<std::size_t>();
  r.df = j.at("df").get<std::size_t>();
  r.cov_type = parse_cov_type(j.at("cov_type").get<std::string>());
  return r;
}

inline json to_json(const TestStatistic& t) {
  return {{"statistic", detail::num(t.statistic)}, {"df1", t.df1}, {"df2", t.df2},
          {"p_value", detail::num(t.p_value)},     {"capped", t.capped}};
}

inline json to_json(const StockYogoVerdict& v) {
  return {{"criterion", v.criterion}, {"critical_value", detail::opt(v.critical_value)},
          {"pass", v.pass ? json(*v.pass) : json(nullptr)}};
}

inline json to_json(const DiagnosticsReport& d) {
  return {{"n", d.n},
          {"instruments", d.instruments},
          {"endogenous", d.endogenous},
          {"dwh_chi2", to_json(d.dwh_chi2)},
          {"dwh_f", to_json(d.dwh_f)},
          {"hansen_j", d.hansen_j ? to_json(*d.hansen_j) : json(nullptr)},
          {"kp_rk_lm", to_json(d.kp_rk_lm)},
          {"cragg_donald_f", detail::num(d.cragg_donald_f)},
          {"first_stage_robust_f", to_json(d.first_stage_robust_f)},
          {"min_eigenvalue", detail::num(d.min_eigenvalue)},
          {"stock_yogo",
           {{"relative_bias_5pct", to_json(d.stock_yogo.relative_bias_5pct)},
            {"size_10pct", to_json(d.stock_yogo.size_10pct)},
            {"size_15pct", to_json(d.stock_yogo.size_15pct)}}},
          {"near_singular", d.near_singular},
          {"notes", d.notes}};
}

// --- Result tables -----------------------------------------------------------------

/// Outcome-by-column OLS table: treatment, controls and constant, with N and R^2.
inline Table ols_table(const std::vector<EstimateResult>& fits, int decimals = 3) {
  if (fits.empty()) throw StateError("report", "render_tables", "no OLS results to render");
  Table t;
  t.name = "ols";
  t.title = "OLS estimates of funding on scholar performance";
  for (const auto& f : fits) t.columns.push_back(f.outcome_label);
  for (std::size_t c = 0; c < fits.size(); ++c)
    for (const auto& label : fits[c].labels) t.row(label)[c] = coef_cell(fits[c], label, decimals);
  for (std::size_t c = 0; c < fits.size(); ++c) {
    t.row("N")[c] = count_cell(fits[c].n);
    t.row("R-squared")[c] = value_cell(fits[c].r_squared, decimals);
  }
  t.notes = {"Values in parentheses are standard errors (" + to_string(fits.front().cov_type) + ").",
             "* p < 0.05, ** p < 0.01, *** p < 0.001."};
  return t;
}

struct TslsFit {
  EstimateResult first;
  EstimateResult second;
  std::optional<TestStatistic> first_stage_f;
};

/// First and second stage side by side for each outcome.
inline Table tsls_table(const std::vector<TslsFit>& fits, int decimals = 3) {
  if (fits.empty()) throw StateError("report", "render_tables", "no 2SLS results to render");
  Table t;
  t.name = "tsls";
  t.title = "2SLS estimates: first stage (funded) and second stage";
  for (const auto& f : fits) {
    t.columns.push_back("first_stage:" + f.second.outcome_label);
    t.columns.push_back("second_stage:" + f.second.outcome_label);
  }
  // Treatment, then instruments and controls, with the constant last.
  std::vector<std::string> order;
  auto add = [&](const std::string& l) {
    if (l != "_cons" && std::find(order.begin(), order.end(), l) == order.end()) order.push_back(l);
  };
  for (const auto& f : fits) add(f.second.labels.front());
  for (const auto& f : fits)
    for (const auto& l : f.first.labels) add(l);
  for (const auto& f : fits)
    for (const auto& l : f.second.labels) add(l);
  order.push_back("_cons");
  for (const auto& l : order) t.row(l);
  for (std::size_t k = 0; k < fits.size(); ++k) {
    const auto& f = fits[k];
    for (const auto& label : f.first.labels) t.row(label)[2 * k] = coef_cell(f.first, label, decimals);
    for (const auto& label : f.second.labels) t.row(label)[2 * k + 1] = coef_cell(f.second, label, decimals);
  }
  for (std::size_t k = 0; k < fits.size(); ++k) {
    t.row("N")[2 * k] = count_cell(fits[k].first.n);
    t.row("N")[2 * k + 1] = count_cell(fits[k].second.n);
    t.row("R-squared")[2 * k] = value_cell(fits[k].first.r_squared, decimals);
    t.row("R-squared")[2 * k + 1] = value_cell(fits[k].second.r_squared, decimals);
    if (fits[k].first_stage_f) t.row("First-stage robust F")[2 * k] = value_cell(fits[k].first_stage_f->statistic, decimals);
  }
  t.notes = {"Values in parentheses are standard errors (" + to_string(fits.front().second.cov_type) + ").",
             "* p < 0.05, ** p < 0.01, *** p < 0.001."};
  return t;
}

/// One column per outcome; statistic rows followed by their p-values.
inline Table diagnostics_table(const std::vector<std::pair<std::string, DiagnosticsReport>>& reports,
                               int decimals = 3) {
  if (reports.empty()) throw StateError("report", "render_tables", "no diagnostics to render");
  Table t;
  t.name = "diagnostics";
  t.title = "Validity and strength tests of the instruments";
  for (const auto& [outcome, r] : reports) t.columns.push_back(outcome);
  auto stat = [&](const std::string& label, std::size_t c, const TestStatistic& s) {
    t.row(label)[c] = value_cell(s.statistic, decimals);
    t.row(label + " p-value")[c] = value_cell(s.p_value, decimals);
  };
  for (std::size_t c = 0; c < reports.size(); ++c) {
    const auto& r = reports[c].second;
    stat("Durbin-Wu-Hausman chi2", c, r.dwh_chi2);
    if (r.hansen_j) {
      stat("Hansen J", c, *r.hansen_j);
    } else {
      t.row("Hansen J")[c] = text_cell("n/a");
      t.row("Hansen J p-value")[c] = text_cell("n/a");
    }
    stat("Kleibergen-Paap rk LM", c, r.kp_rk_lm);
    t.row("Cragg-Donald Wald F")[c] = value_cell(r.cragg_donald_f, decimals);
    for (const auto* v : {&r.stock_yogo.relative_bias_5pct, &r.stock_yogo.size_10pct, &r.stock_yogo.size_15pct})
      t.row("Stock-Yogo " + v->criterion)[c] =
          v->critical_value ? value_cell(*v->critical_value, decimals) : text_cell("n/a");
    stat("First-stage robust F", c, r.first_stage_robust_f);
    t.row("N")[c] = count_cell(r.n);
  }
  t.notes = {"Hansen J is not defined when the model is just-identified."};
  return t;
}

/// Topic number, top keywords and number of grants assigned to the topic.
inline Table topic_table(const TopicModel& m, std::size_t k = 5) {
  m.require_fitted("topic_table");
  const auto kw = top_keywords(m, k);
  std::vector<std::size_t> docs(static_cast<std::size_t>(m.K), 0);
  for (std::size_t d = 0; d < static_cast<std::size_t>(m.doc_topic.rows()); ++d)
    ++docs[static_cast<std::size_t>(assign_topic(m, d))];
  Table t;
  t.name = "topics";
  t.title = "Research topics and keywords";
  t.columns = {"keywords", "grants"};
  for (std::size_t topic = 0; topic < kw.size(); ++topic) {
    std::string words;
    for (const auto& w : kw[topic]) words += (words.empty() ? "" : ", ") + w.word;
    auto& row = t.row("Topic " + std::to_string(topic + 1));
    row[0] = text_cell(words);
    row[1] = count_cell(docs[topic]);
  }
  return t;
}

// --- Robustness reports -------------------------------------------------------------

inline json to_json(const PlaceboResult& r) {
  json j{{"outcome", r.outcome}, {"subgroup", r.subgroup}, {"n", r.n}, {"dropped_instruments", r.dropped_instruments}};
  j["estimate"] = r.estimate ? to_json(*r.estimate) : json(nullptr);
  j["diagnostics"] = r.diagnostics ? to_json(*r.diagnostics) : json(nullptr);
  j["error"] = r.error.empty() ? json(nullptr) : json(r.error);
  return j;
}

inline json to_json(const PlaceboRun& run) {
  json split = json::object();
  for (const auto& [id, g] : run.split.assignment) split[id] = g == PseudoGroup::Treated ? "pseudo_treated" : "pseudo_control";
  json results = json::array();
  for (const auto& r : run.results) results.push_back(to_json(r));
  return {{"seed", run.seed}, {"ratio", run.split.ratio}, {"split", split}, {"results", results}};
}

inline json placebo_json(const std::vector<PlaceboRun>& runs) {
  json a = json::array();
  for (const auto& r : runs) a.push_back(to_json(r));
  return a;
}

/// seed, outcome, subgroup, coef, se, p for the pseudo-funding coefficient.
inline std::string placebo_summary_csv(const std::vector<PlaceboRun>& runs) {
  std::ostringstream os;
  csv::write_row(os, {"seed", "outcome", "subgroup", "coef", "se", "p"});
  for (const auto& run : runs)
    for (const auto& r : run.results) {
      csv::Row row{std::to_string(run.seed), r.outcome, r.subgroup, "", "", ""};
      if (r.estimate) {
        const auto i = *r.estimate->index_of(r.estimate->labels.front());
        row[3] = csv::format_double(r.estimate->coefficients(static_cast<Eigen::Index>(i)));
        row[4] = csv::format_double(r.estimate->standard_errors(static_cast<Eigen::Index>(i)));
        row[5] = csv::format_double(r.estimate->p_value(i));
      }
      csv::write_row(os, row);
    }
  return os.str();
}

inline std::string windows_csv(const std::vector<WindowRow>& rows) {
  std::ostringstream os;
  csv::write_row(os, {"window", "n", "robust_f", "robust_f_p", "min_eigenvalue", "kp_rk_lm", "error"});
  for (const auto& r : rows)
    csv::write_row(os, {std::to_string(r.window), std::to_string(r.n), csv::format_double(r.robust_f),
                        csv::format_double(r.robust_f_p), csv::format_double(r.min_eigenvalue),
                        csv::format_double(r.kp_rk_lm), r.error});
  return os.str();
}

inline Table windows_table(const std::vector<WindowRow>& rows, int decimals = 3) {
  Table t;
  t.name = "windows";
  t.title = "First-stage strength by employment window";
  for (const auto& r : rows) t.columns.push_back(std::to_string(r.window) + "y");
  for (std::size_t c = 0; c < rows.size(); ++c) {
    t.row("Robust F")[c] = value_cell(rows[c].robust_f, decimals);
    t.row("Robust F p-value")[c] = value_cell(rows[c].robust_f_p, decimals);
    t.row("Minimum eigenvalue")[c] = value_cell(rows[c].min_eigenvalue, decimals);
    t.row("Kleibergen-Paap rk LM")[c] = value_cell(rows[c].kp_rk_lm, decimals);
    t.row("N")[c] = count_cell(rows[c].n);
  }
  return t;
}

}  // namespace ivpanel::report
