#pragma once

// Assembles estimation designs from panel rows and instrument series.

#include <string>
#include <vector>

#include "ivpanel/error.hpp"
#include "ivpanel/estimator.hpp"
#include "ivpanel/instruments.hpp"
#include "ivpanel/panel_data.hpp"

namespace ivpanel {

inline const std::vector<std::string>& default_instruments() {
  static const std::vector<std::string> v{"employment", "dominance", "familiarity"};
  return v;
}

/// Baseline controls for an outcome: the matching initial-performance term
/// plus scholar and institution characteristics.
inline std::vector<std::string> default_controls(const std::string& outcome) {
  std::string initial = "initial_avg_citescore";
  if (outcome == "article_count") initial = "initial_article_count";
  if (outcome == "avg_citations") initial = "initial_avg_citations";
  return {"academic_age",   "gender",         initial,   "ln_pubs_field", "ln_cites_field", "ln_pubs_affil",
          "ln_cites_affil", "qs_rank",        "usnews_rank", "employer_reputation"};
}

struct DesignSpec {
  std::string outcome = "article_count";
  std::vector<std::string> controls;  // empty: default_controls(outcome)
  std::vector<std::string> instruments = default_instruments();

  std::vector<std::string> resolved_controls() const { return controls.empty() ? default_controls(outcome) : controls; }
};

inline const std::vector<double>& instrument_series(const InstrumentSet& iv, const std::string& name) {
  if (name == "employment") return iv.employment;
  if (name == "dominance") return iv.dominance;
  if (name == "familiarity") return iv.familiarity;
  throw ConfigError("design", "make_design", "unknown instrument '" + name + "'");
}

inline DesignMatrix make_design(const std::vector<PanelObservation>& obs, const InstrumentSet& iv,
                                const DesignSpec& spec) {
  if (iv.size() != obs.size())
    throw StateError("design", "make_design", "instrument set is not aligned with the panel");
  if (obs.empty()) throw DataError("design", "make_design", "panel has no observations");
  const auto controls = spec.resolved_controls();
  const auto n = static_cast<Eigen::Index>(obs.size());
  DesignMatrix dm;
  dm.outcome_label = spec.outcome;
  dm.treatment_label = "funded";
  dm.instrument_labels = spec.instruments;
  dm.control_labels = controls;
  dm.y.resize(n);
  dm.d.resize(n);
  dm.z.resize(n, static_cast<Eigen::Index>(spec.instruments.size()));
  dm.x.resize(n, static_cast<Eigen::Index>(controls.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = obs[static_cast<std::size_t>(i)];
    dm.y(i) = observation_value(o, spec.outcome);
    dm.d(i) = o.funded;
    for (std::size_t j = 0; j < controls.size(); ++j) dm.x(i, static_cast<Eigen::Index>(j)) = observation_value(o, controls[j]);
  }
  for (std::size_t j = 0; j < spec.instruments.size(); ++j) {
    const auto& s = instrument_series(iv, spec.instruments[j]);
    for (Eigen::Index i = 0; i < n; ++i) dm.z(i, static_cast<Eigen::Index>(j)) = s[static_cast<std::size_t>(i)];
  }
  return dm;
}

}  // namespace ivpanel
