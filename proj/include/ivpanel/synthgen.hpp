#pragma once

// Synthetic scholar-year panels from a known data-generating process.
//
//   d = gamma' z + delta' x + u            (thresholded for binary treatment)
//   y = beta0 + beta1 d + beta2' x + eps   (+ loading * z_j for invalid z_j)
//   corr(u, eps) = rho
//
// Every (scholar, year) row draws from its own xoshiro256** stream keyed by
// mix_seed(seed, scholar, year), so any subset of rows is reproducible on its
// own and results do not depend on thread scheduling.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ivpanel/diagnostics.hpp"
#include "ivpanel/error.hpp"
#include "ivpanel/estimator.hpp"
#include "ivpanel/rng.hpp"

namespace ivpanel {

enum class TreatmentKind { Continuous, BinaryThreshold };

inline constexpr std::array<const char*, 3> kInstrumentNames{"employment", "dominance", "familiarity"};

struct DgpConfig {
  std::size_t n_scholars = 500;
  std::size_t n_years = 20;
  int first_year = 2000;
  double true_beta0 = 1.0;
  double true_beta1 = 2.0;
  double rho = 0.5;
  std::array<double, 3> gamma{0.5, 0.5, 0.5};
  TreatmentKind treatment_kind = TreatmentKind::Continuous;
  std::array<bool, 3> instrument_invalid{false, false, false};
  double invalid_loading = 0.2;  // direct effect of an invalid instrument on y
  std::size_t control_count = 12;
  double control_loading = 0.2;   // delta_j: controls in the treatment equation
  double control_effect = 0.3;    // |beta2_j|, alternating sign
  double noise_sd = 1.0;          // sd of eps; u has unit variance
  double threshold = 0.0;         // binary treatment: d = 1[index > threshold]
  double eligible_share = 1.0;    // scholars outside this share are never treated
  std::uint64_t seed = 1;

  std::size_t n() const { return n_scholars * n_years; }

  void validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("synthgen", "generate", what); };
    if (!(std::fabs(rho) < 1.0)) fail("rho must lie in (-1, 1)");
    if (!(noise_sd > 0.0)) fail("noise_sd must be positive");
    if (n_scholars == 0 || n_years == 0) fail("panel must have at least one scholar and one year");
    if (!(eligible_share >= 0.0 && eligible_share <= 1.0)) fail("eligible_share must lie in [0, 1]");
  }
};

/// gamma with equal entries giving a population first-stage F of `target_f`
/// (noncentrality n * gamma'gamma / L + 1 with unit-variance z and u).
inline std::array<double, 3> gamma_for_population_f(double target_f, std::size_t n) {
  const double per = std::sqrt(std::max(0.0, target_f - 1.0) / static_cast<double>(n));
  return {per, per, per};
}

struct GroundTruth {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double rho = 0.0;
  std::array<double, 3> gamma{};
  std::array<bool, 3> invalid{};
  std::vector<double> delta;
  std::vector<double> beta2;
  std::uint64_t seed = 0;
  std::string treatment_kind;

  nlohmann::json to_json() const {
    nlohmann::json flags = nlohmann::json::object();
    for (std::size_t j = 0; j < 3; ++j) flags[std::string(kInstrumentNames[j]) + "_invalid"] = invalid[j];
    flags["treatment_kind"] = treatment_kind;
    return {{"beta0", beta0}, {"beta1", beta1}, {"rho", rho},     {"gamma", gamma}, {"flags", flags},
            {"delta", delta}, {"beta2", beta2}, {"seed", seed}};
  }
};

struct SyntheticPanel {
  DesignMatrix design;
  std::vector<long long> scholar;
  std::vector<long long> year;
  GroundTruth truth;
};

/// Draws one panel. Rows are ordered scholar-major, year-minor.
inline SyntheticPanel generate(const DgpConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(cfg.n());
  const auto kx = static_cast<Eigen::Index>(cfg.control_count);

  SyntheticPanel out;
  auto& t = out.truth;
  t.beta0 = cfg.true_beta0;
  t.beta1 = cfg.true_beta1;
  t.rho = cfg.rho;
  t.gamma = cfg.gamma;
  t.invalid = cfg.instrument_invalid;
  t.seed = cfg.seed;
  t.treatment_kind = cfg.treatment_kind == TreatmentKind::Continuous ? "continuous" : "binary_threshold";
  for (Eigen::Index j = 0; j < kx; ++j) {
    t.delta.push_back(cfg.control_loading);
    t.beta2.push_back(j % 2 == 0 ? cfg.control_effect : -cfg.control_effect);
  }

  auto& dm = out.design;
  dm.y.resize(n);
  dm.d.resize(n);
  dm.z.resize(n, 3);
  dm.x.resize(n, kx);
  dm.outcome_label = "y";
  dm.treatment_label = "funded";
  dm.instrument_labels.assign(kInstrumentNames.begin(), kInstrumentNames.end());
  for (Eigen::Index j = 0; j < kx; ++j) dm.control_labels.push_back("x" + std::to_string(j + 1));
  out.scholar.resize(static_cast<std::size_t>(n));
  out.year.resize(static_cast<std::size_t>(n));

  const double shrink = std::sqrt(1.0 - cfg.rho * cfg.rho);
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < cfg.n_scholars; ++s) {
    Rng eligibility(mix_seed(cfg.seed, s, 0xE11Bu, 1));
    const bool eligible = eligibility.uniform() < cfg.eligible_share;
    for (std::size_t y = 0; y < cfg.n_years; ++y, ++row) {
      Rng rng(mix_seed(cfg.seed, s, y));
      double index = 0.0;
      double outcome = cfg.true_beta0;
      for (Eigen::Index j = 0; j < 3; ++j) {
        const double z = rng.normal();
        dm.z(row, j) = z;
        index += cfg.gamma[j] * z;
        if (cfg.instrument_invalid[j]) outcome += cfg.invalid_loading * z;
      }
      for (Eigen::Index j = 0; j < kx; ++j) {
        const double x = rng.normal();
        dm.x(row, j) = x;
        index += t.delta[j] * x;
        outcome += t.beta2[j] * x;
      }
      const double u = rng.normal();
      const double eps = cfg.noise_sd * (cfg.rho * u + shrink * rng.normal());
      index += u;
      double d = index;
      if (cfg.treatment_kind == TreatmentKind::BinaryThreshold) d = (eligible && index > cfg.threshold) ? 1.0 : 0.0;
      dm.d(row) = d;
      dm.y(row) = outcome + cfg.true_beta1 * d + eps;
      out.scholar[row] = static_cast<long long>(s);
      out.year[row] = cfg.first_year + static_cast<long long>(y);
    }
  }
  return out;
}

// --- Monte Carlo --------------------------------------------------------------

enum class McEstimator { Ols, Tsls };

inline std::string to_string(McEstimator e) { return e == McEstimator::Ols ? "ols" : "tsls"; }

struct EstimatorSummary {
  std::size_t replications = 0;
  double mean_estimate = 0.0;
  double mean_bias = 0.0;
  double rmse = 0.0;
  double empirical_se = 0.0;   // sd of the estimates across replications
  double mean_reported_se = 0.0;
  double mc_se = 0.0;          // empirical_se / sqrt(replications)
  double coverage95 = 0.0;     // share of 95% CIs containing the true beta1
  double median_abs_bias = 0.0;
  std::vector<double> estimates;
};

struct DiagnosticRates {
  double dwh_reject = 0.0;       // share p < 0.05
  double hansen_j_reject = 0.0;
  double kp_lm_reject = 0.0;
  double cd_below_bias5 = 0.0;   // share of CD F below 13.91
  double cd_above_size10 = 0.0;  // share of CD F above 22.30
  double mean_cd_f = 0.0;
  double mean_robust_f = 0.0;
  std::vector<double> cd_f;
};

struct McSummary {
  std::size_t replications = 0;
  double true_beta1 = 0.0;
  std::map<std::string, EstimatorSummary> estimators;
  std::optional<DiagnosticRates> diagnostics;
};

struct McOptions {
  std::vector<McEstimator> estimators{McEstimator::Ols, McEstimator::Tsls};
  bool diagnostics = false;
  CovType cov = CovType::HC1;
  unsigned threads = 0;  // 0: hardware concurrency
};

namespace detail {

struct McDraw {
  std::vector<double> estimate;
  std::vector<double> se;
  DiagnosticsReport diag;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  return m;
}

}  // namespace detail

/// Replication r uses seed mix_seed(config.seed, r); results are identical
/// for any thread count.
inline McSummary monte_carlo(const DgpConfig& config, std::size_t replications, const McOptions& opts = {}) {
  if (replications == 0) throw ConfigError("synthgen", "monte_carlo", "replications must be >= 1");
  config.validate();
  std::vector<detail::McDraw> draws(replications);

  auto run = [&](std::size_t r) {
    DgpConfig c = config;
    c.seed = mix_seed(config.seed, r, 0x3C);
    const SyntheticPanel p = generate(c);
    auto& out = draws[r];
    for (McEstimator e : opts.estimators) {
      const EstimateResult res = e == McEstimator::Ols
                                     ? ols(p.design.y, hcat(p.design.treatment(), p.design.controls()), opts.cov)
                                     : tsls(p.design, opts.cov);
      out.estimate.push_back(res.coefficients(0));
      out.se.push_back(res.standard_errors(0));
    }
    if (opts.diagnostics) out.diag = diagnose(p.design, opts.cov);
  };

  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, replications));
  if (threads <= 1) {
    for (std::size_t r = 0; r < replications; ++r) run(r);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t r = t; r < replications; r += threads) run(r);
      });
    }
    for (auto& th : pool) th.join();
  }

  McSummary s;
  s.replications = replications;
  s.true_beta1 = config.true_beta1;
  const double R = static_cast<double>(replications);
  for (std::size_t e = 0; e < opts.estimators.size(); ++e) {
    EstimatorSummary es;
    es.replications = replications;
    std::vector<double> abs_bias;
    double sum = 0.0, sq = 0.0, se_sum = 0.0, cover = 0.0;
    for (const auto& d : draws) {
      const double b = d.estimate[e];
      es.estimates.push_back(b);
      sum += b;
      sq += (b - config.true_beta1) * (b - config.true_beta1);
      se_sum += d.se[e];
      abs_bias.push_back(std::fabs(b - config.true_beta1));
      if (std::fabs(b - config.true_beta1) <= dist::kZ975 * d.se[e]) cover += 1.0;
    }
    es.mean_estimate = sum / R;
    es.mean_bias = es.mean_estimate - config.true_beta1;
    es.rmse = std::sqrt(sq / R);
    double var = 0.0;
    for (double b : es.estimates) var += (b - es.mean_estimate) * (b - es.mean_estimate);
    es.empirical_se = replications > 1 ? std::sqrt(var / (R - 1.0)) : 0.0;
    es.mc_se = es.empirical_se / std::sqrt(R);
    es.mean_reported_se = se_sum / R;
    es.coverage95 = cover / R;
    es.median_abs_bias = detail::median(abs_bias);
    s.estimators[to_string(opts.estimators[e])] = std::move(es);
  }
  if (opts.diagnostics) {
    DiagnosticRates dr;
    for (const auto& d : draws) {
      dr.dwh_reject += d.diag.dwh_chi2.p_value < 0.05;
      if (d.diag.hansen_j) dr.hansen_j_reject += d.diag.hansen_j->p_value < 0.05;
      dr.kp_lm_reject += d.diag.kp_rk_lm.p_value < 0.05;
      dr.cd_below_bias5 += d.diag.cragg_donald_f < 13.91;
      dr.cd_above_size10 += d.diag.cragg_donald_f > 22.30;
      dr.mean_cd_f += d.diag.cragg_donald_f;
      dr.mean_robust_f += d.diag.first_stage_robust_f.statistic;
      dr.cd_f.push_back(d.diag.cragg_donald_f);
    }
    for (double* v : {&dr.dwh_reject, &dr.hansen_j_reject, &dr.kp_lm_reject, &dr.cd_below_bias5,
                      &dr.cd_above_size10, &dr.mean_cd_f, &dr.mean_robust_f})
      *v /= R;
    s.diagnostics = std::move(dr);
  }
  return s;
}

}  // namespace ivpanel
