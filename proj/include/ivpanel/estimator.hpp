#pragma once

// Linear estimators: OLS, the first-stage regression, two-stage least squares
// and two-way fixed effects, each with classical or heteroskedasticity-robust
// (HC0/HC1) covariance.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ivpanel/distributions.hpp"
#include "ivpanel/error.hpp"
#include "ivpanel/linalg.hpp"

namespace ivpanel {

enum class CovType { HC0, HC1, Classical };

inline std::string to_string(CovType c) {
  switch (c) {
    case CovType::HC0: return "HC0";
    case CovType::HC1: return "HC1";
    case CovType::Classical: return "classical";
  }
  return "?";
}

inline CovType parse_cov_type(const std::string& s) {
  if (s == "HC0" || s == "hc0") return CovType::HC0;
  if (s == "HC1" || s == "hc1") return CovType::HC1;
  if (s == "classical") return CovType::Classical;
  throw ConfigError("estimator", "parse_cov_type", "unknown covariance type '" + s + "'");
}

inline constexpr const char* kInterceptLabel = "_cons";

/// A labelled block of regressor columns.
struct Regressors {
  MatrixXd values;
  std::vector<std::string> labels;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

inline Regressors hcat(const Regressors& a, const Regressors& b) {
  Regressors out{hcat(a.values, b.values), a.labels};
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

inline bool is_constant_column(const VectorXd& c) {
  return c.size() > 0 && c(0) != 0.0 && (c.array() == c(0)).all();
}

/// Appends an intercept column unless one is already present.
inline Regressors with_intercept(Regressors r) {
  for (Eigen::Index j = 0; j < r.cols(); ++j) {
    if (is_constant_column(r.values.col(j))) return r;
  }
  r.values.conservativeResize(r.values.rows(), r.values.cols() + 1);
  r.values.col(r.values.cols() - 1).setOnes();
  r.labels.emplace_back(kInterceptLabel);
  return r;
}

/// Outcome, one endogenous treatment, excluded instruments and exogenous
/// controls. The intercept is appended by the estimators.
struct DesignMatrix {
  VectorXd y;
  VectorXd d;
  MatrixXd z;
  MatrixXd x;
  std::string outcome_label = "y";
  std::string treatment_label = "funded";
  std::vector<std::string> instrument_labels;
  std::vector<std::string> control_labels;

  Eigen::Index n() const { return y.size(); }

  Regressors instruments() const { return {z, instrument_labels}; }
  Regressors controls() const { return {x, control_labels}; }
  Regressors treatment() const { return {d, {treatment_label}}; }

  /// Checks shapes, finiteness and label uniqueness; throws DataError.
  void validate(const std::string& op = "validate") const {
    const auto n = y.size();
    auto fail = [&](const std::string& what) { throw DataError("estimator", op, what); };
    if (d.size() != n || z.rows() != n || x.rows() != n)
      fail("row counts differ between y, d, Z and X");
    if (static_cast<std::size_t>(z.cols()) != instrument_labels.size() ||
        static_cast<std::size_t>(x.cols()) != control_labels.size())
      fail("label count does not match column count");
    if (!y.allFinite() || !d.allFinite() || !z.allFinite() || !x.allFinite())
      fail("design contains non-finite entries");
    if (n <= 1 + x.cols() + 1) fail("need more rows than columns of [d|X|1]");
    std::set<std::string> seen{outcome_label};
    for (const auto* group : {&instrument_labels, &control_labels}) {
      for (const auto& l : *group) {
        if (!seen.insert(l).second) fail("duplicate column label '" + l + "'");
      }
    }
    if (!seen.insert(treatment_label).second) fail("duplicate column label '" + treatment_label + "'");
  }

  /// Row subset, preserving labels.
  DesignMatrix rows(const std::vector<Eigen::Index>& idx) const {
    DesignMatrix out;
    out.outcome_label = outcome_label;
    out.treatment_label = treatment_label;
    out.instrument_labels = instrument_labels;
    out.control_labels = control_labels;
    out.y = y(idx);
    out.d = d(idx);
    out.z = z(idx, Eigen::all);
    out.x = x(idx, Eigen::all);
    return out;
  }
};

struct EstimateResult {
  std::string estimator;  // "ols", "first_stage", "tsls", "twfe"
  std::string outcome_label;
  std::vector<std::string> labels;
  VectorXd coefficients;
  MatrixXd covariance;
  VectorXd standard_errors;
  VectorXd residuals;
  VectorXd fitted;
  double r_squared = 0.0;
  std::size_t n = 0;
  std::size_t df = 0;  // residual degrees of freedom
  CovType cov_type = CovType::HC1;

  std::optional<std::size_t> index_of(const std::string& label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels.begin());
  }

  double coef(const std::string& label) const { return coefficients(at(label)); }
  double se(const std::string& label) const { return standard_errors(at(label)); }

  double t_stat(std::size_t i) const { return coefficients(i) / standard_errors(i); }

  /// Two-sided p-value from Student t with the residual degrees of freedom.
  double p_value(std::size_t i) const {
    return dist::t_two_sided_p(t_stat(i), static_cast<double>(df));
  }

  double p_value(const std::string& label) const { return p_value(at(label)); }

  /// Normal-approximation 95% confidence interval.
  std::pair<double, double> ci95(const std::string& label) const {
    const auto i = at(label);
    return {coefficients(i) - dist::kZ975 * standard_errors(i),
            coefficients(i) + dist::kZ975 * standard_errors(i)};
  }

 private:
  std::size_t at(const std::string& label) const {
    auto i = index_of(label);
    if (!i) throw StateError("estimator", "lookup", "no coefficient labelled '" + label + "'");
    return *i;
  }
};

/// Sandwich covariance: bread * (sum e_i^2 s_i s_i') * bread, optionally
/// scaled by n / df (HC1), or the classical s^2 * bread.
inline MatrixXd sandwich_covariance(const MatrixXd& scores_x, const VectorXd& residuals,
                                    const MatrixXd& bread, CovType type, std::size_t df) {
  const double n = static_cast<double>(residuals.size());
  if (type == CovType::Classical) {
    const double s2 = residuals.squaredNorm() / static_cast<double>(df);
    return s2 * bread;
  }
  const MatrixXd weighted = scores_x.array().colwise() * residuals.array();
  const MatrixXd meat = weighted.transpose() * weighted;
  MatrixXd cov = bread * meat * bread;
  if (type == CovType::HC1) cov *= n / static_cast<double>(df);
  return 0.5 * (cov + cov.transpose());
}

namespace detail {

inline double r_squared(const VectorXd& y, const VectorXd& resid) {
  const double tss = (y.array() - y.mean()).square().sum();
  return tss > 0.0 ? 1.0 - resid.squaredNorm() / tss : 0.0;
}

inline void finish(EstimateResult& r) {
  r.standard_errors = r.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
}

inline void require_finite(const VectorXd& y, const MatrixXd& x, const std::string& op) {
  if (!y.allFinite() || !x.allFinite())
    throw DataError("estimator", op, "inputs contain non-finite values");
}

}  // namespace detail

/// Ordinary least squares. An intercept is appended unless a constant
/// column is already present.
inline EstimateResult ols(const VectorXd& y, const Regressors& regressors, CovType cov = CovType::HC1,
                          const std::string& op = "ols", std::size_t absorbed_df = 0) {
  if (regressors.rows() != y.size())
    throw DataError("estimator", op, "outcome and regressors have different row counts");
  detail::require_finite(y, regressors.values, op);
  const Regressors r = with_intercept(regressors);
  const LeastSquares ls(r.values, r.labels, "estimator", op);
  const auto n = static_cast<std::size_t>(y.size());
  const auto k = static_cast<std::size_t>(r.cols());
  if (n <= k + absorbed_df)
    throw RankError("estimator", op, "no residual degrees of freedom");

  EstimateResult out;
  out.estimator = op;
  out.labels = r.labels;
  out.coefficients = ls.solve(y);
  out.fitted = r.values * out.coefficients;
  out.residuals = y - out.fitted;
  out.n = n;
  out.df = n - k - absorbed_df;
  out.cov_type = cov;
  out.r_squared = detail::r_squared(y, out.residuals);
  out.covariance = sandwich_covariance(r.values, out.residuals, ls.xtx_inverse(), cov, out.df);
  detail::finish(out);
  return out;
}

/// Linear-probability first stage: treatment on [instruments | controls | 1].
inline EstimateResult first_stage(const DesignMatrix& dm, CovType cov = CovType::HC1) {
  dm.validate("first_stage");
  EstimateResult r = ols(dm.d, hcat(dm.instruments(), dm.controls()), cov, "first_stage");
  r.outcome_label = dm.treatment_label;
  return r;
}

/// Two-stage least squares with one endogenous regressor.
///
/// The treatment is projected on span[Z | X | 1]; the outcome is regressed on
/// [d_hat | X | 1]. Residuals and covariance use the original treatment.
inline EstimateResult tsls(const DesignMatrix& dm, CovType cov = CovType::HC1) {
  dm.validate("tsls");
  if (dm.z.cols() == 0) throw RankError("estimator", "tsls", "no excluded instruments (L = 0)");

  const Regressors w = with_intercept(hcat(dm.instruments(), dm.controls()));
  const LeastSquares first(w.values, w.labels, "estimator", "tsls");
  const VectorXd d_hat = w.values * first.solve(dm.d);

  const Regressors structural = with_intercept(hcat(dm.treatment(), dm.controls()));
  MatrixXd projected = structural.values;
  projected.col(0) = d_hat;
  const LeastSquares second(projected, structural.labels, "estimator", "tsls");

  const auto n = static_cast<std::size_t>(dm.n());
  const auto k = static_cast<std::size_t>(structural.cols());

  EstimateResult out;
  out.estimator = "tsls";
  out.outcome_label = dm.outcome_label;
  out.labels = structural.labels;
  out.coefficients = second.solve(dm.y);
  out.fitted = structural.values * out.coefficients;
  out.residuals = dm.y - out.fitted;
  out.n = n;
  out.df = n - k;
  out.cov_type = cov;
  out.r_squared = detail::r_squared(dm.y, out.residuals);
  out.covariance = sandwich_covariance(projected, out.residuals, second.xtx_inverse(), cov, out.df);
  detail::finish(out);
  return out;
}

/// Two-way within transformation: subtracts unit and period means (by
/// alternating projections, exact after one sweep for balanced panels) and
/// adds back the grand mean.
inline MatrixXd two_way_demean(const MatrixXd& m, const std::vector<long long>& units,
                               const std::vector<long long>& times, int max_sweeps = 10000,
                               double tol = 1e-13) {
  const auto n = m.rows();
  std::map<long long, Eigen::Index> uidx, tidx;
  for (auto u : units) uidx.emplace(u, 0);
  for (auto t : times) tidx.emplace(t, 0);
  Eigen::Index c = 0;
  for (auto& [k, v] : uidx) v = c++;
  c = 0;
  for (auto& [k, v] : tidx) v = c++;
  std::vector<Eigen::Index> ui(n), ti(n);
  VectorXd ucount = VectorXd::Zero(static_cast<Eigen::Index>(uidx.size()));
  VectorXd tcount = VectorXd::Zero(static_cast<Eigen::Index>(tidx.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    ui[i] = uidx[units[i]];
    ti[i] = tidx[times[i]];
    ucount(ui[i]) += 1.0;
    tcount(ti[i]) += 1.0;
  }

  MatrixXd out = m;
  const Eigen::RowVectorXd grand = m.colwise().mean();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    auto col = out.col(j);
    const double scale = std::max(1.0, m.col(j).cwiseAbs().maxCoeff());
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      VectorXd usum = VectorXd::Zero(ucount.size());
      for (Eigen::Index i = 0; i < n; ++i) usum(ui[i]) += col(i);
      for (Eigen::Index i = 0; i < n; ++i) col(i) -= usum(ui[i]) / ucount(ui[i]);
      VectorXd tsum = VectorXd::Zero(tcount.size());
      for (Eigen::Index i = 0; i < n; ++i) tsum(ti[i]) += col(i);
      double change = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double delta = tsum(ti[i]) / tcount(ti[i]);
        col(i) -= delta;
        change = std::max(change, std::fabs(delta));
      }
      // Unit means are zero after the time sweep only once converged.
      if (change <= tol * scale) {
        VectorXd check = VectorXd::Zero(ucount.size());
        for (Eigen::Index i = 0; i < n; ++i) check(ui[i]) += col(i);
        if ((check.array() / ucount.array()).abs().maxCoeff() <= tol * scale) break;
      }
    }
    col.array() += grand(j);
  }
  return out;
}

/// Two-way fixed effects: unit and period effects absorbed by the within
/// transformation; only slopes (and the re-centred intercept) are reported.
/// Degrees of freedom are reduced by (units - 1) + (periods - 1).
inline EstimateResult twfe(const VectorXd& y, const Regressors& regressors,
                           const std::vector<long long>& unit_ids, const std::vector<long long>& time_ids,
                           CovType cov = CovType::HC1) {
  const auto n = static_cast<std::size_t>(y.size());
  if (unit_ids.size() != n || time_ids.size() != n || static_cast<std::size_t>(regressors.rows()) != n)
    throw DataError("estimator", "twfe", "unit/time ids must align with the rows of y");
  const std::set<long long> units(unit_ids.begin(), unit_ids.end());
  const std::set<long long> times(time_ids.begin(), time_ids.end());
  if (units.size() < 2 || times.size() < 2)
    throw DataError("estimator", "twfe", "need at least 2 units and 2 periods");
  for (Eigen::Index j = 0; j < regressors.cols(); ++j) {
    if (is_constant_column(regressors.values.col(j)))
      throw RankError("estimator", "twfe",
                      "regressors are collinear; dependent column(s): " + regressors.labels[j]);
  }

  MatrixXd stacked(y.size(), regressors.cols() + 1);
  stacked.col(0) = y;
  stacked.rightCols(regressors.cols()) = regressors.values;
  const MatrixXd within = two_way_demean(stacked, unit_ids, time_ids);

  // Absorbed columns demean to (numerically) a constant: flag them explicitly so
  // the intercept-aware rank check cannot mistake them for the intercept.
  Regressors transformed{within.rightCols(regressors.cols()), regressors.labels};
  for (Eigen::Index j = 0; j < transformed.cols(); ++j) {
    const VectorXd c = transformed.values.col(j);
    const double spread = c.maxCoeff() - c.minCoeff();
    const double scale = std::max(1.0, regressors.values.col(j).cwiseAbs().maxCoeff());
    if (spread <= 1e-9 * scale)
      throw RankError("estimator", "twfe",
                      "regressor absorbed by the fixed effects; dependent column(s): " + regressors.labels[j]);
  }
  const std::size_t absorbed = (units.size() - 1) + (times.size() - 1);
  EstimateResult r = ols(within.col(0), transformed, cov, "twfe", absorbed);
  return r;
}

}  // namespace ivpanel
