#pragma once

// Pseudo-group placebo regressions and instrument-window sensitivity.

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "ivpanel/design.hpp"
#include "ivpanel/diagnostics.hpp"
#include "ivpanel/error.hpp"
#include "ivpanel/estimator.hpp"
#include "ivpanel/instruments.hpp"
#include "ivpanel/panel_data.hpp"
#include "ivpanel/rng.hpp"

namespace ivpanel {

enum class PseudoGroup { Treated, Control };

/// Scholar-level partition of each original group (ever funded / never
/// funded) into pseudo-treated and pseudo-control members.
struct PseudoSplit {
  std::uint64_t seed = 0;
  double ratio = 0.5;
  std::set<std::string> funded;  // original treated group
  std::set<std::string> unfunded;
  std::map<std::string, PseudoGroup> assignment;

  bool pseudo_treated(const std::string& s) const { return assignment.at(s) == PseudoGroup::Treated; }

  std::size_t count(const std::set<std::string>& group, PseudoGroup g) const {
    return static_cast<std::size_t>(std::count_if(group.begin(), group.end(),
                                                  [&](const std::string& s) { return assignment.at(s) == g; }));
  }
};

namespace detail {

/// Shuffles the (sorted) group with its own stream and marks the first
/// round(ratio * n) members as pseudo-treated.
inline void split_group(const std::set<std::string>& group, std::uint64_t seed, std::uint64_t tag, double ratio,
                        std::map<std::string, PseudoGroup>& out) {
  std::vector<std::string> ids(group.begin(), group.end());
  Rng rng(mix_seed(seed, tag, 0x5B17));
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
  const auto treated = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(ids.size())));
  for (std::size_t i = 0; i < ids.size(); ++i) out[ids[i]] = i < treated ? PseudoGroup::Treated : PseudoGroup::Control;
}

}  // namespace detail

/// `scholar[i]` and `funded[i]` describe row i. A scholar belongs to the
/// treated group when any of their rows is funded.
inline PseudoSplit pseudo_split(const std::vector<std::string>& scholar, const std::vector<double>& funded,
                                std::uint64_t seed, double ratio = 0.5) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("robustness", "pseudo_split", "ratio must lie in (0, 1)");
  if (scholar.size() != funded.size()) throw StateError("robustness", "pseudo_split", "row vectors differ in length");
  PseudoSplit s;
  s.seed = seed;
  s.ratio = ratio;
  std::set<std::string> all;
  for (std::size_t i = 0; i < scholar.size(); ++i) {
    all.insert(scholar[i]);
    if (funded[i] != 0.0) s.funded.insert(scholar[i]);
  }
  for (const auto& id : all)
    if (!s.funded.count(id)) s.unfunded.insert(id);
  if (s.funded.size() < 2 || s.unfunded.size() < 2)
    throw DataError("robustness", "pseudo_split",
                    "each group needs at least 2 scholars (funded " + std::to_string(s.funded.size()) +
                        ", unfunded " + std::to_string(s.unfunded.size()) + ")");
  detail::split_group(s.funded, seed, 1, ratio, s.assignment);
  detail::split_group(s.unfunded, seed, 2, ratio, s.assignment);
  return s;
}

inline PseudoSplit pseudo_split(const PanelDataset& ds, std::uint64_t seed, double ratio = 0.5) {
  std::vector<std::string> ids;
  std::vector<double> funded;
  for (const auto& o : ds.observations) {
    ids.push_back(o.scholar_id);
    funded.push_back(o.funded);
  }
  return pseudo_split(ids, funded, seed, ratio);
}

struct PlaceboResult {
  std::string outcome;
  std::string subgroup;  // "treated_side" or "control_side"
  std::size_t n = 0;
  std::optional<EstimateResult> estimate;
  std::optional<DiagnosticsReport> diagnostics;
  std::vector<std::string> dropped_instruments;  // constant within the subgroup
  std::string error;  // set when estimation failed for this subgroup
};

struct PlaceboRun {
  std::uint64_t seed = 0;
  PseudoSplit split;
  std::vector<PlaceboResult> results;
};

/// Rows of one original group with the treatment relabelled. Treated side:
/// pseudo-control rows become unfunded. Control side: pseudo-treated scholars
/// become funded in every row. Outcome, controls and instruments are copied.
inline DesignMatrix placebo_design(const DesignMatrix& dm, const std::vector<std::string>& scholar,
                                   const PseudoSplit& split, bool treated_side) {
  if (scholar.size() != static_cast<std::size_t>(dm.n()))
    throw StateError("robustness", "placebo_run", "scholar ids are not aligned with the design");
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < scholar.size(); ++i)
    if (split.funded.count(scholar[i]) == (treated_side ? 1u : 0u)) idx.push_back(static_cast<Eigen::Index>(i));
  DesignMatrix sub = dm.rows(idx);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const bool pt = split.pseudo_treated(scholar[static_cast<std::size_t>(idx[k])]);
    const auto i = static_cast<Eigen::Index>(k);
    if (treated_side && !pt) sub.d(i) = 0.0;
    if (!treated_side && pt) sub.d(i) = 1.0;
  }
  return sub;
}

/// Reruns 2SLS and diagnostics on both relabelled groups. Instruments that are
/// constant within a group (for example dominance among never-funded
/// scholars, who have no grant topic) are dropped for that group and listed.
/// A failure in one group is recorded in its result and does not stop the
/// other.
inline std::vector<PlaceboResult> placebo_on_design(const DesignMatrix& dm, const std::vector<std::string>& scholar,
                                                    const PseudoSplit& split, CovType cov = CovType::HC1,
                                                    bool with_diagnostics = true) {
  std::vector<PlaceboResult> out;
  for (const bool treated_side : {true, false}) {
    PlaceboResult r;
    r.outcome = dm.outcome_label;
    r.subgroup = treated_side ? "treated_side" : "control_side";
    DesignMatrix sub = placebo_design(dm, scholar, split, treated_side);
    r.n = static_cast<std::size_t>(sub.n());
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < sub.z.cols(); ++j) {
      if (sub.n() > 0 && sub.z.col(j).maxCoeff() == sub.z.col(j).minCoeff())
        r.dropped_instruments.push_back(sub.instrument_labels[static_cast<std::size_t>(j)]);
      else
        keep.push_back(j);
    }
    if (!r.dropped_instruments.empty()) {
      std::vector<std::string> labels;
      for (auto j : keep) labels.push_back(sub.instrument_labels[static_cast<std::size_t>(j)]);
      sub.z = Eigen::MatrixXd(sub.z(Eigen::all, keep));
      sub.instrument_labels = labels;
    }
    try {
      if (keep.empty()) throw RankError("robustness", "placebo_run", "every instrument is constant in " + r.subgroup);
      r.estimate = tsls(sub, cov);
      if (with_diagnostics) r.diagnostics = diagnose(sub, cov);
    } catch (const Error& e) {
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline PlaceboRun placebo_run(const PanelDataset& ds, const InstrumentSet& iv, const std::vector<std::string>& outcomes,
                              std::uint64_t seed, double ratio = 0.5, CovType cov = CovType::HC1,
                              const std::vector<std::string>& controls = {}) {
  for (const auto& o : outcomes)
    if (o != "article_count" && o != "avg_citations" && o != "avg_citescore")
      throw ConfigError("robustness", "placebo_run", "placebo outcome must be a performance metric, got '" + o + "'");
  PlaceboRun run;
  run.seed = seed;
  run.split = pseudo_split(ds, seed, ratio);
  std::vector<std::string> scholar;
  for (const auto& o : ds.observations) scholar.push_back(o.scholar_id);
  for (const auto& outcome : outcomes) {
    DesignSpec spec;
    spec.outcome = outcome;
    spec.controls = controls;
    const auto dm = make_design(ds.observations, iv, spec);
    auto res = placebo_on_design(dm, scholar, run.split, cov);
    run.results.insert(run.results.end(), res.begin(), res.end());
  }
  return run;
}

/// One placebo run per seed. Runs are independent and share only read-only
/// inputs, so results are identical for any thread count.
inline std::vector<PlaceboRun> placebo_runs(const PanelDataset& ds, const InstrumentSet& iv,
                                            const std::vector<std::string>& outcomes,
                                            const std::vector<std::uint64_t>& seeds, double ratio = 0.5,
                                            CovType cov = CovType::HC1, const std::vector<std::string>& controls = {},
                                            unsigned threads = 0) {
  std::vector<std::optional<PlaceboRun>> slots(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  auto run = [&](std::size_t i) {
    try {
      slots[i] = placebo_run(ds, iv, outcomes, seeds[i], ratio, cov, controls);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  threads = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, seeds.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < seeds.size(); i += threads) run(i);
      });
    for (auto& th : pool) th.join();
  }
  std::vector<PlaceboRun> out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

// --- Window sensitivity ------------------------------------------------------

struct WindowRow {
  int window = 0;
  std::size_t n = 0;
  double robust_f = 0.0;
  double robust_f_p = 0.0;
  double min_eigenvalue = 0.0;
  double kp_rk_lm = 0.0;
  std::string error;
};

/// Rebuilds the employment instrument (and familiarity when requested) for
/// each window and reruns the first-stage strength diagnostics.
inline std::vector<WindowRow> window_sensitivity(const PanelDataset& ds, const std::vector<RoleRecord>& roles,
                                                 const std::vector<TrainingEvent>& events, const std::vector<int>& windows,
                                                 const InstrumentOptions& base, const DesignSpec& spec,
                                                 bool vary_familiarity = false, CovType cov = CovType::HC1) {
  if (windows.empty()) throw ConfigError("robustness", "window_sensitivity", "window list is empty");
  for (int w : windows)
    if (w != 3 && w != 5 && w != 7)
      throw ConfigError("robustness", "window_sensitivity", "window must be 3, 5 or 7, got " + std::to_string(w));
  std::vector<WindowRow> out;
  InstrumentSet iv = build_instruments(ds, roles, events, base);
  for (int w : windows) {
    WindowRow row;
    row.window = w;
    iv.employment = political_hegemony(roles, ds.observations, w, base.tier_filter);
    iv.familiarity = project_familiarity(events, ds.observations, vary_familiarity ? w : base.familiarity_window);
    const auto dm = make_design(ds.observations, iv, spec);
    row.n = static_cast<std::size_t>(dm.n());
    try {
      const auto f = first_stage_robust_f(dm, cov);
      row.robust_f = f.statistic;
      row.robust_f_p = f.p_value;
      row.min_eigenvalue = cragg_donald_f(dm);
      row.kp_rk_lm = kp_rk_lm(dm).statistic;
    } catch (const Error& e) {
      row.error = e.what();
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace ivpanel
