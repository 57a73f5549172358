// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "ivpanel/estimator.hpp"
#include "ivpanel/instruments.hpp"
#include "ivpanel/report.hpp"
#include "ivpanel/robustness.hpp"
#include "ivpanel/synthgen.hpp"
#include "ivpanel/topic_model.hpp"
#include "test_support.hpp"

using namespace ivpanel;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string fmt(double v, int decimals = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(decimals);
  os << v;
  return os.str();
}

Eigen::MatrixXd with_ones(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out(m.rows(), m.cols() + 1);
  out << m, Eigen::VectorXd::Ones(m.rows());
  return out;
}

// 1. tsls against the explicit two-stage procedure on 200 rows.
Outcome oracle_equivalence() {
  const auto dm = testing::random_design(20240, 200);
  const auto t0 = Clock::now();
  const auto iv = tsls(dm, CovType::HC1);
  const double secs = seconds_since(t0);

  Eigen::MatrixXd zx(dm.n(), dm.z.cols() + dm.x.cols());
  zx << dm.z, dm.x;
  const Eigen::MatrixXd a1 = with_ones(zx);
  const Eigen::VectorXd d_hat = a1 * (a1.transpose() * a1).ldlt().solve(a1.transpose() * dm.d);
  Eigen::MatrixXd dx(dm.n(), 1 + dm.x.cols());
  dx << d_hat, dm.x;
  const Eigen::MatrixXd a2 = with_ones(dx);
  const Eigen::MatrixXd bread = (a2.transpose() * a2).inverse();
  const Eigen::VectorXd beta = bread * (a2.transpose() * dm.y);
  dx.col(0) = dm.d;
  const Eigen::VectorXd e = dm.y - with_ones(dx) * beta;
  const Eigen::MatrixXd meat = a2.transpose() * e.cwiseAbs2().asDiagonal() * a2;
  const double n = static_cast<double>(dm.n()), k = static_cast<double>(a2.cols());
  const Eigen::MatrixXd v = n / (n - k) * bread * meat * bread;

  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    worst = std::max(worst, std::fabs(iv.coefficients(j) - beta(j)));
    worst = std::max(worst, std::fabs(iv.standard_errors(j) - std::sqrt(v(j, j))));
  }
  return {worst <= 1e-8 && secs < 1.0,
          "max |diff| = " + sci(worst) + " (<= 1e-8), runtime " + fmt(secs, 4) + " s (< 1 s)"};
}

// 2. Consistency of 2SLS and bias of OLS.
Outcome bias_consistency() {
  DgpConfig c;
  c.n_scholars = 500;
  c.n_years = 20;  // n = 10,000
  c.true_beta1 = 2.0;
  c.rho = 0.5;
  c.seed = 2002;
  const auto t0 = Clock::now();
  const auto s = monte_carlo(c, 200);
  const double secs = seconds_since(t0);
  const auto& iv = s.estimators.at("tsls");
  const auto& ol = s.estimators.at("ols");
  const bool iv_ok = std::fabs(iv.mean_estimate - 2.0) <= 0.05;
  const double ols_z = std::fabs(ol.mean_bias) / ol.mc_se;
  const bool ols_ok = ols_z > 3.0;
  const bool cov_ok = iv.coverage95 >= 0.92 && iv.coverage95 <= 0.98;
  return {iv_ok && ols_ok && cov_ok && secs < 120.0,
          "2SLS mean " + fmt(iv.mean_estimate) + " (2 +/- 0.05), OLS bias " + fmt(ol.mean_bias) + " = " +
              fmt(ols_z, 1) + " MC SEs (> 3), coverage " + fmt(iv.coverage95, 3) + " in [0.92, 0.98], " +
              fmt(secs, 1) + " s (< 120 s)"};
}

// 3. Size and power of DWH, Hansen J and KP rk LM.
Outcome diagnostic_size_power() {
  const auto t0 = Clock::now();
  McOptions diag_only;
  diag_only.estimators = {};
  diag_only.diagnostics = true;
  auto rates = [&](double rho, std::array<double, 3> gamma, bool invalid, std::uint64_t seed) {
    DgpConfig c;
    c.n_scholars = 250;
    c.n_years = 20;  // n = 5,000
    c.rho = rho;
    c.gamma = gamma;
    c.instrument_invalid = {invalid, false, false};
    c.seed = seed;
    return *monte_carlo(c, 500, diag_only).diagnostics;
  };
  const std::array<double, 3> strong{0.5, 0.5, 0.5}, noise{0.0, 0.0, 0.0};
  const auto exo = rates(0.0, strong, false, 301);
  const auto endo = rates(0.5, strong, false, 302);
  const auto bad = rates(0.5, strong, true, 303);
  const auto null_iv = rates(0.5, noise, false, 304);
  const double secs = seconds_since(t0);

  const bool dwh = exo.dwh_reject <= 0.08 && endo.dwh_reject >= 0.90;
  const bool j = endo.hansen_j_reject <= 0.08 && bad.hansen_j_reject >= 0.50;
  // Under pure-noise instruments the rank test should reject at about its
  // nominal size; with strong instruments it should almost never fail to.
  const bool kp = null_iv.kp_lm_reject <= 0.08 && (1.0 - endo.kp_lm_reject) <= 0.08;
  return {dwh && j && kp && secs < 300.0,
          "DWH reject " + fmt(exo.dwh_reject, 3) + " (rho=0, <= 0.08) / " + fmt(endo.dwh_reject, 3) +
              " (rho=0.5, >= 0.90); Hansen J " + fmt(endo.hansen_j_reject, 3) + " (valid, <= 0.08) / " +
              fmt(bad.hansen_j_reject, 3) + " (invalid, >= 0.50); KP LM reject " + fmt(null_iv.kp_lm_reject, 3) +
              " (noise, <= 0.08), fail-to-reject " + fmt(1.0 - endo.kp_lm_reject, 3) + " (strong, <= 0.08); " +
              fmt(secs, 1) + " s (< 300 s)"};
}

// 4. Cragg-Donald F against the Stock-Yogo thresholds.
Outcome weak_instrument_detection() {
  McOptions diag_only;
  diag_only.estimators = {};
  diag_only.diagnostics = true;
  DgpConfig weak;
  weak.n_scholars = 100;
  weak.n_years = 10;  // n = 1,000
  weak.gamma = gamma_for_population_f(5.0, weak.n());
  weak.seed = 401;
  DgpConfig strong = weak;
  strong.gamma = {0.5, 0.5, 0.5};
  strong.seed = 402;
  const auto w = *monte_carlo(weak, 200, diag_only).diagnostics;
  const auto s = *monte_carlo(strong, 200, diag_only).diagnostics;
  return {w.cd_below_bias5 >= 0.90 && s.cd_above_size10 >= 0.99,
          "population F 5: CD F < 13.91 in " + fmt(w.cd_below_bias5, 3) + " (>= 0.90, mean CD F " +
              fmt(w.mean_cd_f, 2) + "); strong: CD F > 22.30 in " + fmt(s.cd_above_size10, 3) + " (>= 0.99)"};
}

// 5. Instrument constructors against brute-force oracles.
Outcome instrument_constructors() {
  const auto f = fixtures::university_topic_fixture();
  std::size_t mismatches = 0, checked = 0, out_of_range = 0;

  const auto table = dominance_table(f.grants, f.scholars, f.start, f.end);
  for (const auto& [cell, series] : fixtures::dominance_oracle(f))
    for (int y = f.start; y <= f.end; ++y) {
      const double v = table.value(cell, y);
      mismatches += v != series[static_cast<std::size_t>(y - f.start)];
      ++checked;
    }
  for (const auto& [cell, series] : table.cells)
    for (double v : series) out_of_range += !(v >= 0.0 && v <= 1.0);

  PanelDataset ds;
  ds.config.start_year = f.start;
  ds.config.end_year = f.end;
  ds.scholars = f.scholars;
  ds.grants = f.grants;
  for (const auto& s : f.scholars)
    for (int y = f.start; y <= f.end; ++y) {
      PanelObservation o;
      o.scholar_id = s.scholar_id;
      o.affiliation_id = s.affiliation_id;
      o.year = y;
      ds.observations.push_back(o);
    }
  for (double v : imitation_isomorphism(f.grants, ds)) out_of_range += !(v >= 0.0 && v <= 1.0);

  const std::vector<RoleRecord> roles{{"mich_1", 2001, Tier::Leadership, Body::NSF},
                                      {"mich_1", 2004, Tier::Membership, Body::AAAS},
                                      {"mit_2", 1997, Tier::Leadership, Body::APS},
                                      {"osu_2", 2008, Tier::Membership, Body::NSF}};
  const std::vector<TrainingEvent> events{{"mich", 1999, "nsf day"}, {"mich", 2003, "workshop"},
                                          {"mich", 2004, "workshop"}, {"mit", 2006, "nsf day"},
                                          {"osu", 2009, "workshop"},  {"ucla", 2001, "workshop"}};
  for (int w : {3, 5, 7}) {
    const auto e = political_hegemony(roles, ds.observations, w);
    const auto fam = project_familiarity(events, ds.observations, w);
    for (std::size_t i = 0; i < ds.observations.size(); ++i) {
      const auto& o = ds.observations[i];
      double want_e = 0.0, want_f = 0.0;
      for (const auto& r : roles)
        if (r.scholar_id == o.scholar_id && o.year >= r.role_year && o.year <= r.role_year + w - 1)
          want_e = 1.0;
      for (const auto& ev : events)
        if (ev.affiliation_id == o.affiliation_id && ev.event_year >= o.year - w && ev.event_year <= o.year - 1)
          want_f += 1.0;
      mismatches += (e[i] != want_e) + (fam[i] != want_f);
      checked += 2;
    }
  }
  return {mismatches == 0 && out_of_range == 0,
          std::to_string(checked) + " values checked, " + std::to_string(mismatches) + " mismatches, " +
              std::to_string(out_of_range) + " dominance values outside [0, 1]"};
}

// 6. LDA topic recovery.
Outcome lda_recovery() {
  int good = 0;
  double slowest = 0.0, worst_tv = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto corpus = fixtures::synthetic_lda_corpus(600 + seed);
    LdaConfig cfg;
    cfg.K = 3;
    cfg.seed = seed;
    const auto t0 = Clock::now();
    const auto m = fit_lda(corpus.corpus, cfg);
    slowest = std::max(slowest, seconds_since(t0));
    const double tv = fixtures::best_match_max_tv(m.topic_word, corpus.topic_word);
    worst_tv = std::max(worst_tv, tv);
    good += tv <= 0.15;
  }
  return {good >= 9 && slowest < 30.0, std::to_string(good) + "/10 seeds with per-topic TV <= 0.15 (>= 9), worst TV " +
                                           fmt(worst_tv, 3) + ", slowest fit " + fmt(slowest, 2) + " s (< 30 s)"};
}

// 7. Placebo splits on data with no funding effect.
Outcome placebo_nullity() {
  int treated_cover = 0, control_cover = 0, runs = 0, failed = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    DgpConfig c;
    c.n_scholars = 200;
    c.n_years = 10;
    c.true_beta1 = 0.0;
    c.treatment_kind = TreatmentKind::BinaryThreshold;
    c.eligible_share = 0.5;
    c.seed = seed;
    const auto p = generate(c);
    std::vector<std::string> ids;
    for (auto s : p.scholar) ids.push_back(std::to_string(s));
    std::vector<double> funded(p.design.d.data(), p.design.d.data() + p.design.d.size());
    const auto split = pseudo_split(ids, funded, seed);
    ++runs;
    for (const auto& r : placebo_on_design(p.design, ids, split, CovType::HC1, false)) {
      if (!r.estimate) {
        ++failed;
        continue;
      }
      const double b = r.estimate->coefficients(0), se = r.estimate->standard_errors(0);
      const bool covers = std::fabs(b) <= dist::kZ975 * se;
      (r.subgroup == "treated_side" ? treated_cover : control_cover) += covers;
    }
  }
  const double t = static_cast<double>(treated_cover) / runs, k = static_cast<double>(control_cover) / runs;
  return {t >= 0.90 && k >= 0.90 && failed == 0,
          "95% CI contains 0: treated side " + fmt(t, 3) + ", control side " + fmt(k, 3) + " of " +
              std::to_string(runs) + " seeds (>= 0.90), " + std::to_string(failed) + " failed fits"};
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 8. Two full runs through the command line give identical bytes.
Outcome determinism() {
  testing::TempDir tmp("acceptance_det");
  const std::string cli = std::string("\"") + IVPANEL_CLI_PATH + "\"";
  const auto data = tmp.path() / "data";
  int rc = run_command(cli + " synth --seed 808 --out \"" + data.string() + "\" 2>/dev/null");
  for (const char* out : {"a", "b"})
    rc |= run_command(cli + " run -q -c \"" + (data / "pipeline.toml").string() + "\" --out \"" +
                      (tmp.path() / out).string() + "\"");
  if (rc != 0) return {false, "command failed with exit status " + std::to_string(rc)};
  std::size_t files = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(tmp.path() / "a")) {
    ++files;
    const auto other = tmp.path() / "b" / e.path().filename();
    differ += !fs::exists(other) || testing::slurp(e.path().string()) != testing::slurp(other.string());
  }
  const auto count_b = std::distance(fs::directory_iterator(tmp.path() / "b"), fs::directory_iterator{});
  return {files > 0 && differ == 0 && static_cast<std::size_t>(count_b) == files,
          std::to_string(files) + " artifacts compared, " + std::to_string(differ) + " differ"};
}

// 9. Exact cell formatting.
Outcome formatting() {
  const auto cell = report::format_cell(2.816, 0.331, 0.0004);
  return {cell == "2.816*** (0.331)", "rendered \"" + cell + "\""};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"bias and consistency", bias_consistency},
      {"diagnostic size and power", diagnostic_size_power},
      {"weak-instrument detection", weak_instrument_detection},
      {"instrument constructors", instrument_constructors},
      {"LDA recovery", lda_recovery},
      {"placebo nullity", placebo_nullity},
      {"determinism", determinism},
      {"formatting fidelity", formatting},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first
              << "): " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
