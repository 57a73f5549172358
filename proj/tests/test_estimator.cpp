#include <catch_amalgamated.hpp>

#include "ivpanel/estimator.hpp"
#include "test_support.hpp"

using namespace ivpanel;
using Catch::Approx;

namespace {

// Explicit normal-equation oracle: (R'R)^{-1} R'y with an explicit inverse.
struct NormalEquations {
  VectorXd beta;
  MatrixXd bread;
  VectorXd resid;
};

NormalEquations normal_equations(const MatrixXd& r, const VectorXd& y) {
  const MatrixXd bread = (r.transpose() * r).inverse();
  const VectorXd beta = bread * r.transpose() * y;
  return {beta, bread, y - r * beta};
}

MatrixXd with_ones(const MatrixXd& m) {
  MatrixXd out(m.rows(), m.cols() + 1);
  out.leftCols(m.cols()) = m;
  out.col(m.cols()).setOnes();
  return out;
}

MatrixXd hc0_oracle(const MatrixXd& s, const VectorXd& e, const MatrixXd& bread) {
  MatrixXd meat = MatrixXd::Zero(s.cols(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) meat += e(i) * e(i) * s.row(i).transpose() * s.row(i);
  return bread * meat * bread;
}

}  // namespace

TEST_CASE("ols recovers an exact linear relation", "[estimator]") {
  VectorXd x(5);
  x << 1, 2, 3, 4, 5;
  const VectorXd y = 2.0 * x;
  const auto r = ols(y, Regressors{x, {"x"}});
  REQUIRE(r.labels == std::vector<std::string>{"x", "_cons"});
  CHECK(r.coefficients(0) == Approx(2.0).margin(1e-12));
  CHECK(r.coefficients(1) == Approx(0.0).margin(1e-12));
  CHECK(r.residuals.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.r_squared == Approx(1.0));
}

TEST_CASE("ols matches the normal-equation oracle on a random 50x4 system", "[estimator]") {
  Rng rng(11);
  const MatrixXd x = testing::random_matrix(rng, 50, 3);
  VectorXd y = x * Eigen::Vector3d(1.0, -2.0, 0.5) + testing::random_matrix(rng, 50, 1).col(0);
  y.array() += 3.0;
  const auto r = ols(y, Regressors{x, testing::names("x", 3)}, CovType::HC0);
  const MatrixXd design = with_ones(x);
  const auto oracle = normal_equations(design, y);
  for (Eigen::Index j = 0; j < 4; ++j) CHECK(r.coefficients(j) == Approx(oracle.beta(j)).margin(1e-8));
  const MatrixXd hc0 = hc0_oracle(design, oracle.resid, oracle.bread);
  CHECK((r.covariance - hc0).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(r.df == 46);
}

TEST_CASE("ols residuals are orthogonal to every regressor", "[estimator]") {
  const auto dm = testing::random_design(5, 400);
  const auto r = ols(dm.y, hcat(dm.treatment(), dm.controls()));
  const MatrixXd design = with_ones(hcat(dm.d, dm.x));
  const VectorXd cross = design.transpose() * r.residuals;
  CHECK(cross.cwiseAbs().maxCoeff() < 1e-8 * static_cast<double>(dm.n()));
}

TEST_CASE("HC1 equals HC0 scaled by n/(n-k); classical uses s^2 (X'X)^-1", "[estimator]") {
  const auto dm = testing::random_design(6, 120);
  const Regressors regs = hcat(dm.treatment(), dm.controls());
  const auto hc0 = ols(dm.y, regs, CovType::HC0);
  const auto hc1 = ols(dm.y, regs, CovType::HC1);
  const auto cls = ols(dm.y, regs, CovType::Classical);
  const double n = 120.0, k = 4.0;
  CHECK((hc1.covariance - hc0.covariance * n / (n - k)).cwiseAbs().maxCoeff() < 1e-14);
  const auto oracle = normal_equations(with_ones(hcat(dm.d, dm.x)), dm.y);
  const MatrixXd classical = oracle.resid.squaredNorm() / (n - k) * oracle.bread;
  CHECK((cls.covariance - classical).cwiseAbs().maxCoeff() < 1e-12);
  for (Eigen::Index j = 0; j < 4; ++j)
    CHECK(hc1.standard_errors(j) == Approx(std::sqrt(hc1.covariance(j, j))));
}

TEST_CASE("rank deficiency names the collinear column", "[estimator]") {
  Rng rng(3);
  MatrixXd x = testing::random_matrix(rng, 30, 3);
  x.col(2) = 2.0 * x.col(0) - x.col(1);
  const VectorXd y = testing::random_matrix(rng, 30, 1).col(0);
  try {
    ols(y, Regressors{x, {"a", "b", "combo"}});
    FAIL("expected RankError");
  } catch (const RankError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("collinear") != std::string::npos);
    const bool named = msg.find("a") != std::string::npos || msg.find("b") != std::string::npos ||
                       msg.find("combo") != std::string::npos;
    CHECK(named);
  }
}

TEST_CASE("a caller-supplied intercept is not duplicated; two intercepts are collinear", "[estimator]") {
  Rng rng(4);
  MatrixXd x(40, 2);
  x.col(0) = testing::random_matrix(rng, 40, 1).col(0);
  x.col(1).setOnes();
  const VectorXd y = 1.0 + 0.5 * x.col(0).array();
  const auto r = ols(y, Regressors{x, {"x", "const"}});
  CHECK(r.labels.size() == 2);
  CHECK(r.coef("const") == Approx(1.0));
  MatrixXd x2(40, 3);
  x2 << x, VectorXd::Constant(40, 2.0);
  CHECK_THROWS_AS(ols(y, Regressors{x2, {"x", "const", "const2"}}), RankError);
}

TEST_CASE("first stage rejects instruments duplicated in the controls", "[estimator]") {
  auto dm = testing::random_design(8, 100);
  dm.x.col(1) = dm.z.col(0);
  CHECK_THROWS_AS(first_stage(dm), RankError);
  CHECK_THROWS_AS(tsls(dm), RankError);
}

TEST_CASE("tsls matches the manual two-stage oracle to 1e-8", "[estimator]") {
  const auto dm = testing::random_design(2024, 200);
  for (CovType cov : {CovType::HC0, CovType::HC1, CovType::Classical}) {
    const auto iv = tsls(dm, cov);
    // Stage one: OLS of d on [Z | X | 1].
    const auto fs = normal_equations(with_ones(hcat(dm.z, dm.x)), dm.d);
    const VectorXd d_hat = dm.d - fs.resid;
    // Stage two: OLS of y on [d_hat | X | 1]; residuals use the original d.
    const MatrixXd r_hat = with_ones(hcat(d_hat, dm.x));
    const auto ss = normal_equations(r_hat, dm.y);
    const VectorXd resid = dm.y - with_ones(hcat(dm.d, dm.x)) * ss.beta;
    const double n = 200.0, k = static_cast<double>(r_hat.cols());
    MatrixXd v = hc0_oracle(r_hat, resid, ss.bread);
    if (cov == CovType::HC1) v *= n / (n - k);
    if (cov == CovType::Classical) v = resid.squaredNorm() / (n - k) * ss.bread;
    for (Eigen::Index j = 0; j < ss.beta.size(); ++j) {
      CHECK(iv.coefficients(j) == Approx(ss.beta(j)).margin(1e-8));
      CHECK(iv.standard_errors(j) == Approx(std::sqrt(v(j, j))).margin(1e-8));
    }
    CHECK((iv.residuals - resid).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("tsls with the treatment as its own instrument equals ols", "[estimator]") {
  auto dm = testing::random_design(9, 150, 1);
  dm.z = dm.d;
  const auto iv = tsls(dm);
  const auto o = ols(dm.y, hcat(dm.treatment(), dm.controls()));
  CHECK((iv.coefficients - o.coefficients).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((iv.standard_errors - o.standard_errors).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("just-identified tsls equals the IV ratio", "[estimator]") {
  auto dm = testing::random_design(10, 300, 1, 0);
  const auto iv = tsls(dm);
  const double zm = dm.z.col(0).mean(), dmn = dm.d.mean(), ym = dm.y.mean();
  const double cov_zy = ((dm.z.col(0).array() - zm) * (dm.y.array() - ym)).sum();
  const double cov_zd = ((dm.z.col(0).array() - zm) * (dm.d.array() - dmn)).sum();
  CHECK(iv.coefficients(0) == Approx(cov_zy / cov_zd).margin(1e-10));
}

TEST_CASE("tsls is invariant to invertible reparameterization of Z", "[estimator]") {
  auto dm = testing::random_design(12, 250);
  const auto base = tsls(dm);
  Eigen::Matrix3d a;
  a << 2, 1, 0, -1, 3, 1, 0.5, 0, 1;
  dm.z = dm.z * a;
  const auto moved = tsls(dm);
  CHECK((base.coefficients - moved.coefficients).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((base.standard_errors - moved.standard_errors).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("scaling y scales coefficients and standard errors", "[estimator]") {
  auto dm = testing::random_design(13, 180);
  const auto o1 = ols(dm.y, hcat(dm.treatment(), dm.controls()));
  const auto i1 = tsls(dm);
  dm.y *= -3.5;
  const auto o2 = ols(dm.y, hcat(dm.treatment(), dm.controls()));
  const auto i2 = tsls(dm);
  CHECK((o2.coefficients + 3.5 * o1.coefficients).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((o2.standard_errors - 3.5 * o1.standard_errors).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((i2.coefficients + 3.5 * i1.coefficients).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((i2.standard_errors - 3.5 * i1.standard_errors).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("tsls without instruments is an error", "[estimator]") {
  auto dm = testing::random_design(14, 50, 1);
  dm.z.resize(50, 0);
  dm.instrument_labels.clear();
  CHECK_THROWS_AS(tsls(dm), RankError);
}

TEST_CASE("design validation rejects non-finite entries and duplicate labels", "[estimator]") {
  auto dm = testing::random_design(15, 50);
  dm.control_labels[1] = dm.instrument_labels[0];
  CHECK_THROWS_AS(dm.validate(), DataError);
  dm = testing::random_design(15, 50);
  dm.y(3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(tsls(dm), DataError);
}

// --- two-way fixed effects --------------------------------------------------

namespace {

struct Panel {
  VectorXd y;
  MatrixXd x;
  std::vector<long long> unit, time;
};

Panel random_panel(std::uint64_t seed, int units, int periods, int k, double drop = 0.0) {
  Rng rng(seed);
  Panel p;
  std::vector<double> ys;
  std::vector<std::vector<double>> xs;
  std::vector<double> ue(units), te(periods);
  for (auto& v : ue) v = 3.0 * rng.normal();
  for (auto& v : te) v = 2.0 * rng.normal();
  for (int u = 0; u < units; ++u) {
    for (int t = 0; t < periods; ++t) {
      if (drop > 0 && rng.uniform() < drop) continue;
      std::vector<double> row(k);
      double yv = ue[u] + te[t] + rng.normal();
      for (int j = 0; j < k; ++j) {
        row[j] = rng.normal() + 0.5 * ue[u];
        yv += (j + 1.0) * row[j];
      }
      ys.push_back(yv);
      xs.push_back(row);
      p.unit.push_back(u);
      p.time.push_back(2000 + t);
    }
  }
  p.y = Eigen::Map<VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  p.x.resize(static_cast<Eigen::Index>(xs.size()), k);
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (int j = 0; j < k; ++j) p.x(static_cast<Eigen::Index>(i), j) = xs[i][j];
  return p;
}

// Least-squares dummy-variable oracle: regressors plus unit and period dummies.
MatrixXd lsdv_design(const Panel& p) {
  std::set<long long> us(p.unit.begin(), p.unit.end()), ts(p.time.begin(), p.time.end());
  std::vector<long long> uv(us.begin(), us.end()), tv(ts.begin(), ts.end());
  const auto n = p.y.size();
  const auto k = p.x.cols();
  MatrixXd m = MatrixXd::Zero(n, k + 1 + (uv.size() - 1) + (tv.size() - 1));
  m.leftCols(k) = p.x;
  m.col(k).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t a = 1; a < uv.size(); ++a)
      if (p.unit[i] == uv[a]) m(i, k + a) = 1.0;
    for (std::size_t b = 1; b < tv.size(); ++b)
      if (p.time[i] == tv[b]) m(i, k + uv.size() - 1 + b) = 1.0;
  }
  return m;
}

}  // namespace

TEST_CASE("twfe on a balanced 2x2 panel matches the dummy-variable oracle", "[estimator]") {
  Panel p;
  p.unit = {0, 0, 1, 1};
  p.time = {2000, 2001, 2000, 2001};
  p.x.resize(4, 1);
  p.x << 0.3, 1.9, -0.4, 0.2;
  p.y.resize(4);
  p.y << 1.0, 4.0, 2.5, 2.9;
  const auto oracle = normal_equations(lsdv_design(p), p.y);
  // Four parameters on four rows: slope identified, no residual df.
  MatrixXd within = two_way_demean(p.x, p.unit, p.time);
  VectorXd wy = two_way_demean(MatrixXd(p.y), p.unit, p.time).col(0);
  const double xm = within.col(0).mean(), ym = wy.mean();
  const double slope = ((within.col(0).array() - xm) * (wy.array() - ym)).sum() /
                       (within.col(0).array() - xm).square().sum();
  CHECK(slope == Approx(oracle.beta(0)).margin(1e-12));
  CHECK_THROWS_AS(twfe(p.y, Regressors{p.x, {"x"}}, p.unit, p.time), RankError);
}

TEST_CASE("twfe matches LSDV coefficients and standard errors", "[estimator]") {
  for (double drop : {0.0, 0.2}) {
    const Panel p = random_panel(77, 6, 5, 2, drop);
    const auto design = lsdv_design(p);
    const auto oracle = normal_equations(design, p.y);
    const double n = static_cast<double>(p.y.size());
    const double k = static_cast<double>(design.cols());
    for (CovType cov : {CovType::Classical, CovType::HC1}) {
      const auto r = twfe(p.y, Regressors{p.x, {"x0", "x1"}}, p.unit, p.time, cov);
      MatrixXd v = cov == CovType::Classical ? MatrixXd(oracle.resid.squaredNorm() / (n - k) * oracle.bread)
                                            : MatrixXd(hc0_oracle(design, oracle.resid, oracle.bread) * n / (n - k));
      CHECK(r.df == static_cast<std::size_t>(n - k));
      for (Eigen::Index j = 0; j < 2; ++j) {
        CHECK(r.coefficients(j) == Approx(oracle.beta(j)).margin(1e-9));
        CHECK(r.standard_errors(j) == Approx(std::sqrt(v(j, j))).margin(1e-9));
      }
    }
  }
}

TEST_CASE("twfe slopes are invariant to unit-specific shifts of y", "[estimator]") {
  Panel p = random_panel(78, 5, 6, 1);
  const auto base = twfe(p.y, Regressors{p.x, {"x"}}, p.unit, p.time);
  for (Eigen::Index i = 0; i < p.y.size(); ++i) p.y(i) += 10.0 * static_cast<double>(p.unit[i]) - 4.0;
  const auto shifted = twfe(p.y, Regressors{p.x, {"x"}}, p.unit, p.time);
  CHECK(shifted.coefficients(0) == Approx(base.coefficients(0)).margin(1e-10));
  CHECK(shifted.standard_errors(0) == Approx(base.standard_errors(0)).margin(1e-10));
}

TEST_CASE("twfe rejects regressors constant within units and degenerate panels", "[estimator]") {
  Panel p = random_panel(79, 4, 4, 2);
  for (Eigen::Index i = 0; i < p.y.size(); ++i) p.x(i, 1) = static_cast<double>(p.unit[i]) * 1.5;
  CHECK_THROWS_AS(twfe(p.y, Regressors{p.x, {"x0", "unit_level"}}, p.unit, p.time), RankError);
  std::vector<long long> one_unit(p.unit.size(), 0);
  CHECK_THROWS_AS(twfe(p.y, Regressors{p.x, {"x0", "x1"}}, one_unit, p.time), DataError);
}
