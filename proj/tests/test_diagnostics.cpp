#include <catch_amalgamated.hpp>

#include "ivpanel/diagnostics.hpp"
#include "ivpanel/synthgen.hpp"
#include "test_support.hpp"

using namespace ivpanel;
using Catch::Approx;

namespace {

MatrixXd with_ones(const MatrixXd& m) {
  MatrixXd out(m.rows(), m.cols() + 1);
  out.leftCols(m.cols()) = m;
  out.col(m.cols()).setOnes();
  return out;
}

VectorXd resid(const MatrixXd& x, const VectorXd& y) {
  return y - x * (x.transpose() * x).inverse() * (x.transpose() * y);
}

}  // namespace

TEST_CASE("Stock-Yogo verdicts follow the embedded table", "[diagnostics]") {
  auto v = stock_yogo_verdict(507.350, 3);
  REQUIRE(v.relative_bias_5pct.critical_value);
  CHECK(*v.relative_bias_5pct.critical_value == Approx(13.91));
  CHECK(*v.size_10pct.critical_value == Approx(22.30));
  CHECK(*v.size_15pct.critical_value == Approx(12.83));
  CHECK(*v.relative_bias_5pct.pass);
  CHECK(*v.size_10pct.pass);
  CHECK(*v.size_15pct.pass);

  v = stock_yogo_verdict(13.0, 3);
  CHECK_FALSE(*v.relative_bias_5pct.pass);
  CHECK_FALSE(*v.size_10pct.pass);
  CHECK(*v.size_15pct.pass);

  v = stock_yogo_verdict(0.0, 3);
  CHECK_FALSE(*v.relative_bias_5pct.pass);
  CHECK_FALSE(*v.size_10pct.pass);
  CHECK_FALSE(*v.size_15pct.pass);
}

TEST_CASE("missing Stock-Yogo entries yield no critical value", "[diagnostics]") {
  auto v = stock_yogo_verdict(50.0, 1);
  CHECK_FALSE(v.relative_bias_5pct.critical_value);
  CHECK_FALSE(v.relative_bias_5pct.pass);
  CHECK(*v.size_10pct.critical_value == Approx(16.38));
  v = stock_yogo_verdict(50.0, 9);
  CHECK_FALSE(v.size_10pct.critical_value);
  CHECK_FALSE(v.size_15pct.pass);
  v = stock_yogo_verdict(50.0, 3, 2);
  CHECK_FALSE(v.size_10pct.critical_value);
}

TEST_CASE("classical first-stage F equals the Cragg-Donald F", "[diagnostics]") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto dm = testing::random_design(seed, 300);
    const double cd = cragg_donald_f(dm);
    const auto f = first_stage_robust_f(dm, CovType::Classical);
    CHECK(f.statistic == Approx(cd).epsilon(1e-10));
  }
}

TEST_CASE("single-instrument Cragg-Donald F is the squared classical t", "[diagnostics]") {
  const auto dm = testing::random_design(21, 250, 1);
  const auto fs = first_stage(dm, CovType::Classical);
  const double t = fs.t_stat(0);
  CHECK(cragg_donald_f(dm) == Approx(t * t).epsilon(1e-10));
}

TEST_CASE("KP rk LM equals n minus SSR of the auxiliary score regression", "[diagnostics]") {
  const auto dm = testing::random_design(22, 400);
  const MatrixXd x1 = with_ones(dm.x);
  MatrixXd zt(dm.n(), dm.z.cols());
  for (Eigen::Index j = 0; j < dm.z.cols(); ++j) zt.col(j) = resid(x1, dm.z.col(j));
  const VectorXd dt = resid(x1, dm.d);
  const MatrixXd scores = zt.array().colwise() * dt.array();
  const VectorXd ones = VectorXd::Ones(dm.n());
  const double ssr = resid(scores, ones).squaredNorm();
  const auto lm = kp_rk_lm(dm);
  CHECK(lm.statistic == Approx(static_cast<double>(dm.n()) - ssr).epsilon(1e-8));
  CHECK(lm.df1 == 3.0);
}

TEST_CASE("Hansen J matches a direct two-step GMM computation", "[diagnostics]") {
  const auto dm = testing::random_design(23, 500);
  const MatrixXd w = with_ones(hcat(dm.z, dm.x));
  const MatrixXd r = with_ones(hcat(dm.d, dm.x));
  const double n = static_cast<double>(dm.n());
  // Step one: 2SLS.
  const MatrixXd pw = w * (w.transpose() * w).inverse() * w.transpose();
  const VectorXd b1 = (r.transpose() * pw * r).inverse() * r.transpose() * pw * dm.y;
  const VectorXd e1 = dm.y - r * b1;
  MatrixXd s = MatrixXd::Zero(w.cols(), w.cols());
  for (Eigen::Index i = 0; i < dm.n(); ++i) s += e1(i) * e1(i) * w.row(i).transpose() * w.row(i);
  s /= n;
  // Step two: efficient GMM and its objective.
  const MatrixXd si = s.inverse();
  const VectorXd b2 =
      (r.transpose() * w * si * w.transpose() * r).inverse() * r.transpose() * w * si * w.transpose() * dm.y;
  const VectorXd g = w.transpose() * (dm.y - r * b2) / n;
  const double j_oracle = n * g.dot(si * g);
  const auto j = hansen_j(dm);
  CHECK(j.statistic == Approx(j_oracle).epsilon(1e-6));
  CHECK(j.df1 == 2.0);
}

TEST_CASE("Hansen J is invariant to nonsingular transformations of Z", "[diagnostics]") {
  auto dm = testing::random_design(24, 600);
  const double before = hansen_j(dm).statistic;
  Eigen::Matrix3d a;
  a << 1, 2, 0, 0, 1, -1, 3, 0, 1;
  dm.z = dm.z * a * 100.0;
  CHECK(hansen_j(dm).statistic == Approx(before).epsilon(1e-6));
}

TEST_CASE("Hansen J is undefined when just-identified", "[diagnostics]") {
  const auto dm = testing::random_design(25, 100, 1);
  CHECK_THROWS_AS(hansen_j(dm), EstimationError);
  const auto report = diagnose(dm);
  CHECK_FALSE(report.hansen_j);
  CHECK_FALSE(report.notes.empty());
}

TEST_CASE("DWH statistic is the squared robust t of the control-function residual", "[diagnostics]") {
  const auto dm = testing::random_design(26, 300);
  const VectorXd v = resid(with_ones(hcat(dm.z, dm.x)), dm.d);
  const MatrixXd aug = with_ones(hcat(dm.d, dm.x, v));
  const MatrixXd bread = (aug.transpose() * aug).inverse();
  const VectorXd b = bread * aug.transpose() * dm.y;
  const VectorXd e = dm.y - aug * b;
  MatrixXd meat = MatrixXd::Zero(aug.cols(), aug.cols());
  for (Eigen::Index i = 0; i < dm.n(); ++i) meat += e(i) * e(i) * aug.row(i).transpose() * aug.row(i);
  const double n = static_cast<double>(dm.n()), k = static_cast<double>(aug.cols());
  const MatrixXd cov = bread * meat * bread * n / (n - k);
  const Eigen::Index vi = 1 + dm.x.cols();
  const double t = b(vi) / std::sqrt(cov(vi, vi));
  const auto [chi2, f] = dwh_endogeneity_test(dm);
  CHECK(chi2.statistic == Approx(t * t).epsilon(1e-9));
  CHECK(f.statistic == Approx(t * t).epsilon(1e-9));
  CHECK(f.df2 == n - k);
  CHECK(chi2.p_value < 0.05);  // rho = 0.5 in the fixture
}

TEST_CASE("deterministic first stage reports a capped robust F", "[diagnostics]") {
  auto dm = testing::random_design(27, 200, 1);
  dm.d = dm.z.col(0);
  const auto f = first_stage_robust_f(dm);
  CHECK(f.capped);
  CHECK(f.statistic == kStatisticCap);
  CHECK(f.p_value == 0.0);
}

TEST_CASE("diagnostics are deterministic and p-values lie in [0, 1]", "[diagnostics]") {
  const auto dm = testing::random_design(28, 500);
  const auto a = diagnose(dm);
  const auto b = diagnose(dm);
  CHECK(a.dwh_chi2.statistic == b.dwh_chi2.statistic);
  CHECK(a.hansen_j->statistic == b.hansen_j->statistic);
  CHECK(a.kp_rk_lm.statistic == b.kp_rk_lm.statistic);
  for (double p : {a.dwh_chi2.p_value, a.dwh_f.p_value, a.hansen_j->p_value, a.kp_rk_lm.p_value,
                   a.first_stage_robust_f.p_value}) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  CHECK(a.min_eigenvalue == a.cragg_donald_f);
  CHECK(a.kp_rk_lm.df1 == 3.0);
}

TEST_CASE("Monte Carlo: null instruments centre Cragg-Donald F and robust F near 1", "[diagnostics]") {
  DgpConfig cfg;
  cfg.n_scholars = 100;
  cfg.n_years = 20;
  cfg.gamma = {0.0, 0.0, 0.0};
  cfg.control_count = 4;
  cfg.seed = 99;
  McOptions opts;
  opts.estimators = {};
  opts.diagnostics = true;
  const auto s = monte_carlo(cfg, 200, opts);
  // E[F(3, large)] = 1; sd of a mean of 200 draws is about 0.06.
  CHECK(s.diagnostics->mean_cd_f == Approx(1.0).margin(0.2));
  CHECK(s.diagnostics->mean_robust_f == Approx(1.0).margin(0.2));
  CHECK(s.diagnostics->kp_lm_reject < 0.10);
}

TEST_CASE("Monte Carlo: strong instruments make KP rk LM reject essentially always", "[diagnostics]") {
  DgpConfig cfg;
  cfg.n_scholars = 50;
  cfg.n_years = 20;
  cfg.control_count = 4;
  cfg.seed = 7;
  McOptions opts;
  opts.estimators = {};
  opts.diagnostics = true;
  const auto s = monte_carlo(cfg, 50, opts);
  CHECK(s.diagnostics->kp_lm_reject == 1.0);
  CHECK(s.diagnostics->cd_above_size10 == 1.0);
}
