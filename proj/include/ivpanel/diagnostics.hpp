#pragma once

// Instrument validity and strength diagnostics for a single endogenous
// regressor: endogeneity (control-function DWH), over-identification
// (Hansen J), under-identification (Kleibergen-Paap rk LM), weak
// identification (Cragg-Donald F against Stock-Yogo critical values) and the
// first-stage robust F.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ivpanel/distributions.hpp"
#include "ivpanel/error.hpp"
#include "ivpanel/estimator.hpp"
#include "ivpanel/linalg.hpp"

namespace ivpanel {

/// Statistics above this are reported as this value and flagged as capped.
inline constexpr double kStatisticCap = 1e12;

struct TestStatistic {
  double statistic = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;  // 0 for chi-square tests
  double p_value = 1.0;
  bool capped = false;
};

struct StockYogoVerdict {
  std::string criterion;
  std::optional<double> critical_value;  // absent: no tabulated value
  std::optional<bool> pass;
};

struct StockYogoVerdicts {
  StockYogoVerdict relative_bias_5pct;
  StockYogoVerdict size_10pct;
  StockYogoVerdict size_15pct;
};

struct DiagnosticsReport {
  std::size_t n = 0;
  std::size_t instruments = 0;  // L
  std::size_t endogenous = 1;   // K
  TestStatistic dwh_chi2;
  TestStatistic dwh_f;
  std::optional<TestStatistic> hansen_j;  // absent when just-identified
  TestStatistic kp_rk_lm;
  double cragg_donald_f = 0.0;
  TestStatistic first_stage_robust_f;
  double min_eigenvalue = 0.0;
  StockYogoVerdicts stock_yogo;
  bool near_singular = false;  // a pseudo-inverse dropped directions
  std::vector<std::string> notes;
};

// --- Stock-Yogo critical values, one endogenous regressor -------------------

namespace detail {

struct StockYogoRow {
  int instruments;
  double relative_bias_5pct;  // NaN where untabulated (needs L >= K + 2)
  double size_10pct;
  double size_15pct;
};

inline constexpr double kNoValue = std::numeric_limits<double>::quiet_NaN();

// Stock & Yogo (2005) Tables 5.1 (2SLS relative bias) and 5.2 (2SLS size), K = 1.
inline constexpr std::array<StockYogoRow, 5> kStockYogoK1{{
    {1, kNoValue, 16.38, 8.96},
    {2, kNoValue, 19.93, 11.59},
    {3, 13.91, 22.30, 12.83},
    {4, 16.85, 24.58, 13.96},
    {5, 18.37, 26.87, 15.09},
}};

inline StockYogoVerdict make_verdict(std::string name, double cv, double f) {
  StockYogoVerdict v{std::move(name), std::nullopt, std::nullopt};
  if (!std::isnan(cv)) {
    v.critical_value = cv;
    v.pass = f > cv;
  }
  return v;
}

}  // namespace detail

/// Compares a Cragg-Donald F with the tabulated critical values. Missing
/// (L, K) entries yield verdicts without a critical value; nothing is
/// extrapolated.
inline StockYogoVerdicts stock_yogo_verdict(double cd_f, int instruments, int endogenous = 1) {
  const detail::StockYogoRow* row = nullptr;
  if (endogenous == 1) {
    for (const auto& r : detail::kStockYogoK1) {
      if (r.instruments == instruments) row = &r;
    }
  }
  const double nan = detail::kNoValue;
  return {detail::make_verdict("5% maximal IV relative bias", row ? row->relative_bias_5pct : nan, cd_f),
          detail::make_verdict("10% maximal IV size", row ? row->size_10pct : nan, cd_f),
          detail::make_verdict("15% maximal IV size", row ? row->size_15pct : nan, cd_f)};
}

// --- Individual tests --------------------------------------------------------

namespace detail {

/// Controls plus intercept, factorized once and reused by several tests.
struct Partialled {
  MatrixXd x1;  // [X | 1]
  MatrixXd z;   // M_X1 Z
  VectorXd d;   // M_X1 d
};

inline Partialled partial_controls(const DesignMatrix& dm, const std::string& op) {
  const Regressors x1 = with_intercept(dm.controls());
  const LeastSquares ls(x1.values, x1.labels, "diagnostics", op);
  return {x1.values, partial_out(ls, x1.values, dm.z), partial_out(ls, x1.values, MatrixXd(dm.d)).col(0)};
}

inline TestStatistic capped(TestStatistic t) {
  if (!std::isfinite(t.statistic) || t.statistic > kStatisticCap) {
    t.statistic = kStatisticCap;
    t.capped = true;
    t.p_value = 0.0;
  }
  return t;
}

inline double clamp_p(double p) { return std::clamp(p, 0.0, 1.0); }

}  // namespace detail

/// Control-function endogeneity test: the first-stage residual is added to
/// the structural OLS and its coefficient tested with the chosen covariance.
/// Returns {chi2(1) form, F(1, df) form}.
inline std::pair<TestStatistic, TestStatistic> dwh_endogeneity_test(const DesignMatrix& dm,
                                                                    CovType cov = CovType::HC1) {
  const EstimateResult fs = first_stage(dm, cov);
  Regressors aug = hcat(dm.treatment(), dm.controls());
  aug = hcat(aug, Regressors{fs.residuals, {"_v_hat"}});
  const EstimateResult cf = ols(dm.y, aug, cov, "dwh_endogeneity_test");
  const double t = cf.t_stat(*cf.index_of("_v_hat"));
  const double w = t * t;
  TestStatistic chi2{w, 1.0, 0.0, detail::clamp_p(dist::chi2_sf(w, 1.0))};
  TestStatistic f{w, 1.0, static_cast<double>(cf.df), detail::clamp_p(dist::f_sf(w, 1.0, cf.df))};
  return {detail::capped(chi2), detail::capped(f)};
}

/// Hansen J over-identification statistic from two-step efficient GMM, with
/// the moment covariance estimated from 2SLS residuals. chi2(L - K).
inline TestStatistic hansen_j(const DesignMatrix& dm, bool* near_singular = nullptr) {
  dm.validate("hansen_j");
  const auto L = dm.z.cols();
  if (L <= 1) throw EstimationError("diagnostics", "hansen_j", "J undefined, df = 0 (model is just-identified)");

  const EstimateResult iv = tsls(dm, CovType::HC0);
  const Regressors w_raw = with_intercept(hcat(dm.instruments(), dm.controls()));
  // Orthonormal basis of the instrument space; J is invariant to the choice.
  Eigen::HouseholderQR<MatrixXd> qr(w_raw.values);
  const MatrixXd w = qr.householderQ() * MatrixXd::Identity(w_raw.rows(), w_raw.cols());
  const Regressors r = with_intercept(hcat(dm.treatment(), dm.controls()));
  const double n = static_cast<double>(dm.n());

  const MatrixXd we = w.array().colwise() * iv.residuals.array();
  const MatrixXd s = we.transpose() * we / n;
  bool truncated = false;
  const MatrixXd s_inv = pinv_symmetric(s, truncated);
  if (near_singular) *near_singular = *near_singular || truncated;

  const MatrixXd wr = w.transpose() * r.values;
  const VectorXd wy = w.transpose() * dm.y;
  const MatrixXd a = wr.transpose() * s_inv * wr;
  const VectorXd beta = a.ldlt().solve(wr.transpose() * s_inv * wy);
  const VectorXd g = (wy - wr * beta) / n;
  const double j = n * g.dot(s_inv * g);
  const double df = static_cast<double>(L - 1);
  return detail::capped({j, df, 0.0, detail::clamp_p(dist::chi2_sf(j, df))});
}

/// Kleibergen-Paap rk LM under-identification statistic for one endogenous
/// regressor: the heteroskedasticity-robust score test of zero excluded
/// instrument coefficients in the first stage, evaluated at the restricted
/// (instrument-free) fit. chi2(L - K + 1).
inline TestStatistic kp_rk_lm(const DesignMatrix& dm, bool* near_singular = nullptr) {
  dm.validate("kp_rk_lm");
  const auto p = detail::partial_controls(dm, "kp_rk_lm");
  // Restricted residuals: treatment with only the controls partialled out.
  const VectorXd score = p.z.transpose() * p.d;
  const MatrixXd zr = p.z.array().colwise() * p.d.array();
  const MatrixXd v = zr.transpose() * zr;
  bool truncated = false;
  const MatrixXd v_inv = pinv_symmetric(v, truncated);
  if (near_singular) *near_singular = *near_singular || truncated;
  const double lm = score.dot(v_inv * score);
  const double df = static_cast<double>(dm.z.cols());
  return detail::capped({lm, df, 0.0, detail::clamp_p(dist::chi2_sf(lm, df))});
}

/// Cragg-Donald Wald F for one endogenous regressor: the homoskedastic
/// first-stage F on the excluded instruments after partialling out the
/// controls. Equal to the minimum-eigenvalue statistic when K = 1.
inline double cragg_donald_f(const DesignMatrix& dm) {
  dm.validate("cragg_donald_f");
  const auto p = detail::partial_controls(dm, "cragg_donald_f");
  std::vector<std::string> labels = dm.instrument_labels;
  const LeastSquares ls(p.z, labels, "diagnostics", "cragg_donald_f");
  const VectorXd pi = ls.solve(p.d);
  const VectorXd fitted = p.z * pi;
  const double rss = (p.d - fitted).squaredNorm();
  const double L = static_cast<double>(dm.z.cols());
  const double df = static_cast<double>(dm.n()) - L - static_cast<double>(p.x1.cols());
  const double f = (fitted.squaredNorm() / L) / (rss / df);
  if (!std::isfinite(f) || f > kStatisticCap) return kStatisticCap;
  return f;
}

/// Wald test that all excluded-instrument coefficients in the first stage are
/// zero, divided by L, referred to F(L, n - columns).
inline TestStatistic first_stage_robust_f(const DesignMatrix& dm, CovType cov = CovType::HC1,
                                          bool* near_singular = nullptr) {
  const EstimateResult fs = first_stage(dm, cov);
  const auto L = dm.z.cols();
  const VectorXd pi = fs.coefficients.head(L);
  const MatrixXd v = fs.covariance.topLeftCorner(L, L);
  TestStatistic out;
  out.df1 = static_cast<double>(L);
  out.df2 = static_cast<double>(fs.df);
  // A (numerically) exact first stage has zero residual variance.
  const double scale = std::max(1e-300, dm.d.squaredNorm());
  if (fs.residuals.squaredNorm() <= 1e-24 * scale) {
    out.statistic = std::numeric_limits<double>::infinity();
    return detail::capped(out);
  }
  bool truncated = false;
  const MatrixXd v_inv = pinv_symmetric(v, truncated);
  if (near_singular) *near_singular = *near_singular || truncated;
  out.statistic = pi.dot(v_inv * pi) / out.df1;
  out.p_value = detail::clamp_p(dist::f_sf(out.statistic, out.df1, out.df2));
  return detail::capped(out);
}

/// Runs the full battery. Hansen J is omitted (with a note) when the model is
/// just-identified.
inline DiagnosticsReport diagnose(const DesignMatrix& dm, CovType cov = CovType::HC1) {
  dm.validate("diagnose");
  DiagnosticsReport r;
  r.n = static_cast<std::size_t>(dm.n());
  r.instruments = static_cast<std::size_t>(dm.z.cols());
  std::tie(r.dwh_chi2, r.dwh_f) = dwh_endogeneity_test(dm, cov);
  if (dm.z.cols() > 1) {
    r.hansen_j = hansen_j(dm, &r.near_singular);
  } else {
    r.notes.emplace_back("Hansen J undefined: just-identified (df = 0)");
  }
  r.kp_rk_lm = kp_rk_lm(dm, &r.near_singular);
  r.cragg_donald_f = cragg_donald_f(dm);
  r.min_eigenvalue = r.cragg_donald_f;
  r.first_stage_robust_f = first_stage_robust_f(dm, cov, &r.near_singular);
  if (r.first_stage_robust_f.capped) r.notes.emplace_back("first-stage robust F capped (deterministic first stage)");
  r.stock_yogo = stock_yogo_verdict(r.cragg_donald_f, static_cast<int>(r.instruments), 1);
  if (r.near_singular) r.notes.emplace_back("pseudo-inverse used for a near-singular covariance");
  return r;
}

}  // namespace ivpanel
