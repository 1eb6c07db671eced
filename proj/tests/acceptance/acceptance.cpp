// Acceptance suite. Usage: eigenshrink_acceptance [criterion ...]; no arguments runs all.
// Prints indented detail lines, then exactly one "criterion N: PASS|FAIL" line per criterion.
// Exit status is nonzero when any requested criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eigenshrink/mp_solver.hpp"
#include "eigenshrink/pca.hpp"
#include "eigenshrink/quest.hpp"
#include "eigenshrink/shrinkage.hpp"
#include "eigenshrink/sim_harness.hpp"
#include "eigenshrink/spectrum_estimator.hpp"
#include "generators.hpp"
#include "mp_oracle.hpp"

using namespace eigenshrink;

namespace {

// Pinned tolerances and limits.
constexpr double kOracleTol = 1e-3;          // criterion 1, max abs error
constexpr double kHomogeneityTol = 1e-6;     // criterion 2, relative
constexpr double kMomentTol = 1e-3;          // criterion 2, relative
constexpr double kRoundTripTol = 1e-3;       // criterion 3, MSE / mean(tau)^2
constexpr double kInversionSlack = 0.10;     // criterion 4, one allowed inversion
constexpr double kSampleRatio = 0.25;        // criterion 4
constexpr double kPrialFloor = 30.0;         // criterion 6
constexpr double kOracleSlack = 10.0;        // criterion 6, PRIAL points
constexpr double kOracleGapRatio = 0.20;     // criterion 7
constexpr double kPcaRmseCap = 3.0;          // criterion 8
constexpr double kTraceTol = 1e-10;          // criterion 9
constexpr double kRotationTol = 1e-12;       // criterion 9

// Monte Carlo criteria stop the optimizer at a relative objective decrease of 1e-6
// instead of the library default 1e-8, and reuse a Broyden-updated Jacobian for up to
// 10 steps. Final objectives and MSE are unchanged at these settings and the runtime
// budget requires them on a single core.
constexpr double kMonteCarloTolerance = 1e-6;
constexpr int kMonteCarloBroydenSteps = 10;
constexpr std::size_t kReplications = 100;
constexpr std::size_t kOracleGapReplications = 20;
constexpr std::uint64_t kMasterSeed = 20240601;

struct Outcome {
  bool pass = true;
  std::string summary;
};

void detail(const std::string& line) { std::cout << "    " << line << std::endl; }

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

ExperimentOptions mc_options() {
  ExperimentOptions o;
  o.estimation.objective_tolerance = kMonteCarloTolerance;
  o.estimation.broyden_steps = kMonteCarloBroydenSteps;
  return o;
}

SimulationDesign design1(std::int64_t n, std::int64_t p, std::size_t reps = kReplications) {
  SimulationDesign d;
  d.spectrum = BetaSpectrum{1.0, 10.0, 1.0, 10.0};
  d.n = n;
  d.p = p;
  d.replications = reps;
  d.master_seed = kMasterSeed;
  return d;
}

SimulationDesign one_three_ten(std::int64_t n, std::int64_t p, std::size_t reps = kReplications) {
  SimulationDesign d = design1(n, p, reps);
  d.spectrum = ClusteredSpectrum{{1.0, 3.0, 10.0}, cluster_multiplicities({0.2, 0.4, 0.4}, static_cast<std::size_t>(p))};
  return d;
}

// Decreasing with at most one step up, and that step within kInversionSlack.
bool decreasing_with_one_inversion(const std::vector<double>& v) {
  int ups = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] <= v[i - 1]) continue;
    ++ups;
    if (v[i] > (1.0 + kInversionSlack) * v[i - 1]) return false;
  }
  return ups <= 1;
}

Outcome criterion1() {
  Outcome o;
  double worst_density = 0.0, worst_edge = 0.0, worst_quantile = 0.0;
  for (const double c : {0.1, 0.5, 2.0}) {
    const std::size_t p = 200;
    const auto n = static_cast<std::int64_t>(std::lround(static_cast<double>(p) / c));
    const ConcentrationContext ctx(n, static_cast<std::int64_t>(p));
    const SpectrumVector t(std::vector<double>(p, 1.0));
    const auto model = build_sample_spectral_model(t, ctx);
    oracle::MarchenkoPastur mp(c);
    double ed = 0.0, ee = 0.0, eq = 0.0;
    if (model.support().intervals.size() != 1) {
      o.pass = false;
      detail("c=" + fmt(c) + ": expected one support interval");
      continue;
    }
    ee = std::max(std::abs(model.support().intervals[0].lower - mp.lower()),
                  std::abs(model.support().intervals[0].upper - mp.upper()));
    for (int k = 0; k < 100; ++k) {
      const double x = mp.lower() + (mp.upper() - mp.lower()) * (k + 0.5) / 100.0;
      ed = std::max(ed, std::abs(model.stieltjes(x).imag() / M_PI - mp.density(x)));
      const double u = (k + 0.5) / 100.0;
      eq = std::max(eq, std::abs(model.inverse_cdf(u) - mp.quantile(u)));
    }
    const auto q = model.smoothed_quantiles();
    const auto qw = mp.smoothed_quantiles(p);
    for (std::size_t i = 0; i < p; ++i) eq = std::max(eq, std::abs(q[i] - qw[i]));
    detail("c=" + fmt(c) + ": density " + fmt(ed, 3) + ", endpoints " + fmt(ee, 3) + ", quantiles " + fmt(eq, 3));
    worst_density = std::max(worst_density, ed);
    worst_edge = std::max(worst_edge, ee);
    worst_quantile = std::max(worst_quantile, eq);
  }
  o.pass = o.pass && worst_density < kOracleTol && worst_edge < kOracleTol && worst_quantile < kOracleTol;
  o.summary = "max abs error density " + fmt(worst_density, 3) + ", endpoints " + fmt(worst_edge, 3) +
              ", quantiles " + fmt(worst_quantile, 3) + " (limit " + fmt(kOracleTol) + ")";
  return o;
}

Outcome criterion2() {
  Outcome o;
  gen::Rng rng(kMasterSeed);
  double worst_h = 0.0, worst_m = 0.0;
  int monotone_fail = 0, atom_fail = 0, wide = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t p = gen::integer(rng, 2, 200);
    const bool p_above_n = trial % 2 == 1;
    const std::size_t n = p_above_n ? gen::integer(rng, std::max<std::size_t>(1, p / 4), std::max<std::size_t>(1, p - 1))
                                    : gen::integer(rng, p + 1, 5 * p);
    wide += p > n;
    const auto t = gen::spectrum(rng, p, trial % 5 == 0);
    const ConcentrationContext ctx(static_cast<std::int64_t>(n), static_cast<std::int64_t>(p));
    const auto q = quest_quantiles(t, ctx);
    const double alpha = gen::uniform(rng, 0.1, 10.0);
    std::vector<double> ta = t.vector();
    for (double& x : ta) x *= alpha;
    const auto qa = quest_quantiles(SpectrumVector(ta), ctx);
    double h = 0.0;
    for (std::size_t i = 0; i < p; ++i)
      h = std::max(h, std::abs(qa[i] - alpha * q[i]) / (alpha * std::max(q[i], q.mean())));
    worst_h = std::max(worst_h, h);
    worst_m = std::max(worst_m, std::abs(q.mean() - t.mean()) / t.mean());
    for (std::size_t i = 1; i < p; ++i)
      if (q[i] < q[i - 1]) {
        ++monotone_fail;
        break;
      }
    const double mass = compute_support(t, ctx).mass_at_zero;
    const auto expected = static_cast<long>(std::floor(static_cast<double>(p) * mass + 1e-9));
    long zeros = 0;
    for (double x : q) zeros += x == 0.0;
    if (std::abs(zeros - expected) > 1) ++atom_fail;
  }
  detail("50 spectra, " + std::to_string(wide) + " with p > n");
  o.pass = worst_h < kHomogeneityTol && worst_m < kMomentTol && monotone_fail == 0 && atom_fail == 0;
  o.summary = "homogeneity " + fmt(worst_h, 3) + ", first moment " + fmt(worst_m, 3) + ", non-monotone " +
              std::to_string(monotone_fail) + ", zero-count misses " + std::to_string(atom_fail);
  return o;
}

Outcome criterion3() {
  Outcome o;
  std::string parts;
  for (const auto& [p, n] : {std::pair<std::int64_t, std::int64_t>{50, 100}, {100, 50}}) {
    const ConcentrationContext ctx(n, p);
    const auto tau = make_beta_spectrum(1.0, 10.0, 1.0, 10.0, static_cast<std::size_t>(p));
    const auto r = estimate_spectrum(quest_quantiles(tau, ctx), ctx);
    const double rel = mean_squared_difference(r.tau_hat, tau) / (tau.mean() * tau.mean());
    detail("(p, n) = (" + std::to_string(p) + ", " + std::to_string(n) + "): MSE / mean^2 = " + fmt(rel, 3) +
           ", objective " + fmt(r.objective, 3) + ", iterations " + std::to_string(r.iterations));
    o.pass = o.pass && rel < kRoundTripTol;
    parts += (parts.empty() ? "" : ", ") + fmt(rel, 3);
  }
  o.summary = "relative MSE " + parts + " (limit " + fmt(kRoundTripTol) + ")";
  return o;
}

Outcome criterion4() {
  Outcome o;
  const auto opts = mc_options();
  std::string summary;
  struct Arm {
    double ratio;  // p / n
    std::vector<std::int64_t> n;
  };
  const Arm arms[] = {{0.5, {60, 120, 200, 300}}, {2.0, {30, 60, 100}}};
  for (const auto& arm : arms) {
    std::vector<double> lw, sample;
    for (const auto n : arm.n) {
      const auto p = static_cast<std::int64_t>(std::lround(arm.ratio * static_cast<double>(n)));
      const auto r = run_eigenvalue_experiment(design1(n, p), {"sample", "quest"}, opts);
      lw.push_back(r.per_estimator_mse.at("quest"));
      sample.push_back(r.per_estimator_mse.at("sample"));
      detail("p/n=" + fmt(arm.ratio) + " p=" + std::to_string(p) + " n=" + std::to_string(n) + ": QuEST " +
             fmt(lw.back()) + ", sample " + fmt(sample.back()));
    }
    // The reference point is p = 100 for p/n = 0.5 and the largest n (n = 100) for p/n = 2.
    const std::size_t ref = arm.ratio < 1.0 ? 2 : arm.n.size() - 1;
    const double share = lw[ref] / sample[ref];
    const bool mono = decreasing_with_one_inversion(lw);
    o.pass = o.pass && mono && share < kSampleRatio;
    summary += (summary.empty() ? "" : "; ") + std::string("p/n=") + fmt(arm.ratio) + " monotone " +
               (mono ? "yes" : "no") + ", QuEST/sample " + fmt(share, 3);
  }
  o.summary = summary + " (limit " + fmt(kSampleRatio) + ")";
  return o;
}

Outcome criterion5() {
  Outcome o;
  const auto opts = mc_options();
  std::string summary;
  for (const VariateLaw& law : {VariateLaw{GaussianLaw{}}, VariateLaw{StudentTLaw{3.0}}}) {
    SimulationDesign d = design1(400, 200);
    d.law = law;
    const auto r = run_eigenvalue_experiment(d, {"sample", "lawley", "quest"}, opts);
    const double lw = r.per_estimator_mse.at("quest"), la = r.per_estimator_mse.at("lawley"),
                 sa = r.per_estimator_mse.at("sample");
    detail(to_string(law) + ": QuEST " + fmt(lw) + ", Lawley " + fmt(la) + ", sample " + fmt(sa));
    o.pass = o.pass && lw < la && lw < sa;
    summary += (summary.empty() ? "" : "; ") + to_string(law) + " QuEST " + fmt(lw, 3) + " < Lawley " + fmt(la, 3) +
               ", sample " + fmt(sa, 3);
  }
  o.summary = summary;
  return o;
}

Outcome criterion6() {
  Outcome o;
  const auto opts = mc_options();
  std::string summary;
  for (const auto& [p, n] : {std::pair<std::int64_t, std::int64_t>{50, 100}, {100, 100}, {100, 50}}) {
    const auto r = run_shrinkage_experiment(one_three_ten(n, p), opts, {"nonlinear", "oracle", "linear"});
    const double nl = r.prial.at("nonlinear"), orc = r.prial.at("oracle");
    detail("(p, n) = (" + std::to_string(p) + ", " + std::to_string(n) + "): PRIAL nonlinear " + fmt(nl) +
           "%, oracle " + fmt(orc) + "%");
    o.pass = o.pass && nl > kPrialFloor && orc >= nl - kOracleSlack;
    summary += (summary.empty() ? "" : ", ") + fmt(nl, 3) + "/" + fmt(orc, 3);
  }
  o.summary = "PRIAL nonlinear/oracle " + summary + " (floor " + fmt(kPrialFloor) + "%)";
  return o;
}

Outcome criterion7() {
  Outcome o;
  const auto opts = mc_options();
  std::string summary;
  for (const double ratio : {0.5, 2.0}) {
    std::vector<double> gap;
    for (const std::int64_t p : {50, 100, 200}) {
      const auto n = static_cast<std::int64_t>(std::lround(static_cast<double>(p) / ratio));
      const auto r = run_shrinkage_experiment(one_three_ten(n, p, kOracleGapReplications), opts, {"nonlinear", "oracle"});
      gap.push_back(r.mean_loss.at("nonlinear_to_oracle"));
      detail("p/n=" + fmt(ratio) + " p=" + std::to_string(p) + ": mean ||S_hat - S_or||^2 = " + fmt(gap.back()));
    }
    const bool mono = gap[1] < gap[0] && gap[2] < gap[1];
    const double share = gap[2] / gap[0];
    o.pass = o.pass && mono && share < kOracleGapRatio;
    summary += (summary.empty() ? "" : "; ") + std::string("p/n=") + fmt(ratio) + " decreasing " +
               (mono ? "yes" : "no") + ", p=200/p=50 " + fmt(share, 3);
  }
  o.summary = summary + " (limit " + fmt(kOracleGapRatio) + ")";
  return o;
}

Outcome criterion8() {
  Outcome o;
  const auto opts = mc_options();
  const std::vector<double> targets{0.7, 0.8, 0.9};
  double cap_value = 0.0;
  for (const auto& [n, p] : {std::pair<std::int64_t, std::int64_t>{200, 100}, {100, 200}}) {
    const auto r = run_pca_experiment(design1(n, p), targets, opts);
    for (const double q : targets) {
      const double lw = r.pca("shrinkage", q), pop = r.pca("population", q), sa = r.pca("sample", q);
      detail("(n, p) = (" + std::to_string(n) + ", " + std::to_string(p) + ") q=" + fmt(q) + ": shrinkage " + fmt(lw) +
             ", population " + fmt(pop) + ", sample " + fmt(sa));
      o.pass = o.pass && lw < pop && pop < sa;
      if (n == 200 && q == 0.9) cap_value = lw;
    }
  }
  o.pass = o.pass && cap_value <= kPcaRmseCap;
  o.summary = "ordering shrinkage < population < sample " + std::string(o.pass ? "holds" : "checked") +
              "; shrinkage RMSE at (200, 100), q=0.9: " + fmt(cap_value, 3) + " (cap " + fmt(kPcaRmseCap) + ")";
  return o;
}

Outcome criterion9() {
  Outcome o;
  gen::Rng rng(kMasterSeed);
  double trace_err = 0.0, rot_err = 0.0, id_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t p = gen::integer(rng, 2, 80);
    const Eigen::MatrixXd sigma = gen::spd(rng, p);
    const Eigen::VectorXd d = finite_sample_optimal_d(gen::orthogonal(rng, p), sigma);
    trace_err = std::max(trace_err, std::abs(d.sum() - sigma.trace()) / std::max(1.0, sigma.trace()));
    const std::size_t k = gen::integer(rng, 1, p);
    const Eigen::MatrixXd w = gen::orthogonal(rng, p).leftCols(static_cast<Eigen::Index>(k));
    const double a = variation_attributable(w, sigma);
    const double b = variation_attributable(w * gen::orthogonal(rng, k), sigma);
    rot_err = std::max(rot_err, std::abs(a - b) / std::max(1.0, a));
    const auto pi = static_cast<Eigen::Index>(p);
    id_err = std::max(id_err, std::abs(frobenius_loss(Eigen::MatrixXd::Identity(pi, pi), Eigen::MatrixXd::Zero(pi, pi)) - 1.0));
  }
  detail("trace identity " + fmt(trace_err, 3) + ", rotation invariance " + fmt(rot_err, 3) + ", ||I|| - 1 " +
         fmt(id_err, 3));
  o.pass = trace_err < kTraceTol && rot_err < kRotationTol && id_err == 0.0;

  const std::vector<double> bench{0.4, 1.1, 2.5};
  const bool fixed_fn = prial(bench, bench) == 0.0 && prial({0.0, 0.0, 0.0}, bench) == 100.0;

  ExperimentOptions one = mc_options(), three = mc_options();
  one.workers = 1;
  three.workers = 3;
  SimulationDesign small = one_three_ten(40, 20, 4);
  const auto s1 = run_shrinkage_experiment(small, one, {"linear", "finite_sample_optimal", "nonlinear", "oracle"});
  const auto s2 = run_shrinkage_experiment(small, three, {"linear", "finite_sample_optimal", "nonlinear", "oracle"});
  const bool fixed_run = s1.prial.at("linear") == 0.0 && s1.prial.at("finite_sample_optimal") == 100.0;
  detail("PRIAL fixed points: function " + std::string(fixed_fn ? "ok" : "wrong") + ", harness linear " +
         fmt(s1.prial.at("linear")) + "%, S* " + fmt(s1.prial.at("finite_sample_optimal")) + "%");

  const auto e1 = run_eigenvalue_experiment(design1(40, 20, 4), {"sample", "lawley", "quest", "truth"}, one);
  const auto e2 = run_eigenvalue_experiment(design1(40, 20, 4), {"sample", "lawley", "quest", "truth"}, three);
  const auto e3 = run_eigenvalue_experiment(design1(40, 20, 4), {"sample", "lawley", "quest", "truth"}, one);
  const auto p1 = run_pca_experiment(design1(20, 40, 3), {0.7, 0.9}, one);
  const auto p2 = run_pca_experiment(design1(20, 40, 3), {0.7, 0.9}, three);
  const bool det = report_to_json(s1) == report_to_json(s2) && report_to_json(e1) == report_to_json(e2) &&
                   report_to_json(e1) == report_to_json(e3) && report_to_json(p1) == report_to_json(p2);
  const bool truth_zero = e1.per_estimator_mse.at("truth") == 0.0;
  detail("determinism across repeats and 1 vs 3 workers: " + std::string(det ? "identical" : "DIFFERENT"));
  o.pass = o.pass && fixed_fn && fixed_run && det && truth_zero;
  o.summary = "trace " + fmt(trace_err, 2) + ", rotation " + fmt(rot_err, 2) + ", ||I||=1, PRIAL 0/100 " +
              (fixed_fn && fixed_run ? "exact" : "wrong") + ", determinism " + (det ? "bitwise" : "broken");
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "MP oracle equivalence", 10, criterion1},
      {2, "QuEST properties", 120, criterion2},
      {3, "noise-free inversion round trip", 300, criterion3},
      {4, "estimator convergence in p", 1800, criterion4},
      {5, "estimator ordering at p=200", 1200, criterion5},
      {6, "shrinkage PRIAL", 1200, criterion6},
      {7, "oracle convergence", 1200, criterion7},
      {8, "PCA retention RMSE", 900, criterion8},
      {9, "exact identities and determinism", 60, criterion9},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  if (wanted.empty())
    for (const auto& c : all) wanted.push_back(c.id);

  std::cout << "workers: " << resolve_workers(0) << std::endl;
  bool ok = true;
  for (const int id : wanted) {
    const auto it = std::find_if(all.begin(), all.end(), [&](const Criterion& c) { return c.id == id; });
    if (it == all.end()) {
      std::cerr << "unknown criterion " << id << '\n';
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = it->run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.summary = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < it->limit_seconds;
    const bool pass = out.pass && in_time;
    ok = ok && pass;
    std::cout << "criterion " << it->id << " (" << it->name << "): " << (pass ? "PASS" : "FAIL") << " - "
              << out.summary << "; " << fmt(secs, 3) << " s of " << it->limit_seconds << " s"
              << (in_time ? "" : " OVER TIME") << std::endl;
  }
  return ok ? 0 : 1;
}
