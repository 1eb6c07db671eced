#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "eigenshrink/errors.hpp"
#include "eigenshrink/quest.hpp"
#include "eigenshrink/sim_harness.hpp"
#include "generators.hpp"
#include "mp_oracle.hpp"

using namespace eigenshrink;

namespace {

TEST(MakeBetaSpectrum, Examples) {
  EXPECT_EQ(make_beta_spectrum(1.0, 10.0, 1.0, 1.0, 2).vector(), (std::vector<double>{3.5, 8.5}));
  EXPECT_NEAR(make_beta_spectrum(1.0, 10.0, 1.0, 10.0, 1)[0], 1.0 + 10.0 * (1.0 - std::pow(0.5, 0.1)), 1e-13);
  EXPECT_NEAR(make_beta_spectrum(1.0, 10.0, 1.0, 10.0, 1)[0], 1.66967, 1e-5);
  EXPECT_THROW(make_beta_spectrum(1.0, 10.0, 0.0, 1.0, 3), ValidationError);
  EXPECT_THROW(make_beta_spectrum(1.0, -1.0, 1.0, 1.0, 3), ValidationError);
}

TEST(MakeBetaSpectrum, PropertySorted) {
  gen::Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = make_beta_spectrum(gen::uniform(rng, 0, 3), gen::uniform(rng, 0.1, 20), gen::uniform(rng, 0.2, 5),
                                      gen::uniform(rng, 0.2, 20), gen::integer(rng, 1, 300));
    for (std::size_t i = 1; i < s.size(); ++i) ASSERT_LE(s[i - 1], s[i]);
  }
}

TEST(ClusterMultiplicities, LargestRemainder) {
  EXPECT_EQ(cluster_multiplicities({0.2, 0.4, 0.4}, 50), (std::vector<std::size_t>{10, 20, 20}));
  const auto m = cluster_multiplicities({0.2, 0.4, 0.4}, 7);
  EXPECT_EQ(m[0] + m[1] + m[2], 7u);
  EXPECT_EQ(cluster_multiplicities({0.5, 0.25, 0.125, 0.125}, 40), (std::vector<std::size_t>{20, 10, 5, 5}));
}

TEST(SimulationDesign, Validation) {
  SimulationDesign d;
  EXPECT_NO_THROW(d.validate());
  d.n = 1;
  EXPECT_THROW(d.validate(), ValidationError);
  d = SimulationDesign{};
  d.replications = 0;
  EXPECT_THROW(d.validate(), ValidationError);
  d = SimulationDesign{};
  d.law = StudentTLaw{2.0};
  EXPECT_THROW(d.validate(), ValidationError);
  d = SimulationDesign{};
  d.spectrum = ClusteredSpectrum{{1.0, 2.0}, {10, 10}};
  EXPECT_THROW(d.validate(), ValidationError);
}

TEST(ReplicationSeed, DistinctAcrossReplicationsAndMasters) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t m = 0; m < 5; ++m)
    for (std::uint64_t r = 0; r < 1000; ++r) seen.insert(replication_seed(m, r));
  EXPECT_EQ(seen.size(), 5000u);
  EXPECT_EQ(replication_seed(9, 4), replication_seed(9, 4));
}

TEST(SimulateSample, SameSeedIsBitwiseIdentical) {
  const auto tau = make_beta_spectrum(1.0, 10.0, 1.0, 10.0, 20);
  const ConcentrationContext ctx(30, 20);
  for (const VariateLaw& law : {VariateLaw{GaussianLaw{}}, VariateLaw{StudentTLaw{3.0}}}) {
    const auto a = simulate_sample(tau, ctx, law, 42);
    const auto b = simulate_sample(tau, ctx, law, 42);
    EXPECT_EQ(a.eigenvalues.vector(), b.eigenvalues.vector());
    EXPECT_TRUE(a.eigenvectors == b.eigenvectors);
    const auto c = simulate_sample(tau, ctx, law, 43);
    EXPECT_NE(a.eigenvalues.vector(), c.eigenvalues.vector());
  }
}

TEST(SimulateSample, WideCaseHasExactlyPMinusNZeros) {
  const auto tau = make_beta_spectrum(1.0, 10.0, 1.0, 10.0, 60);
  const auto eig = simulate_sample(tau, ConcentrationContext(25, 60), GaussianLaw{}, 1);
  EXPECT_EQ(eig.eigenvalues.zero_count(), 35u);
  for (std::size_t i = 0; i < 35; ++i) EXPECT_EQ(eig.eigenvalues[i], 0.0);
  EXPECT_GT(eig.eigenvalues[35], 1e-12 * eig.eigenvalues.mean());
  const Eigen::MatrixXd u = eig.eigenvectors;
  EXPECT_LT((u.transpose() * u - Eigen::MatrixXd::Identity(60, 60)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(DrawVariates, StudentTHasUnitVariance) {
  // The sample variance of t(3) draws has infinite variance itself, so check the
  // law: sqrt(3) X must be standard t(3). A 5% scale error moves the CDF by ~0.01.
  const Eigen::MatrixXd x = draw_variates(1000, 1000, StudentTLaw{3.0}, 2024);
  std::vector<double> v(x.data(), x.data() + x.size());
  for (double& e : v) e *= std::sqrt(3.0);
  const boost::math::students_t t3(3.0);
  EXPECT_LT(oracle::kolmogorov_distance(v, [&](double q) { return boost::math::cdf(t3, q); }), 0.003);
  const Eigen::MatrixXd g = draw_variates(1000, 1000, GaussianLaw{}, 2024);
  EXPECT_NEAR((g.array() - g.mean()).square().mean(), 1.0, 0.01);
}

TEST(SimulateSample, IdentityPopulationFollowsMarchenkoPastur) {
  const auto eig = simulate_sample(SpectrumVector(std::vector<double>(100, 1.0)), ConcentrationContext(200, 100),
                                   GaussianLaw{}, 8);
  oracle::MarchenkoPastur mp(0.5);
  EXPECT_LT(oracle::kolmogorov_distance(eig.eigenvalues.vector(), [&](double x) { return mp.cdf(x); }), 0.05);
}

TEST(SimulateSample, KolmogorovDistanceToTheModelShrinksWithP) {
  auto average_distance = [](std::size_t p) {
    const ConcentrationContext ctx(static_cast<std::int64_t>(2 * p), static_cast<std::int64_t>(p));
    const auto tau = make_beta_spectrum(1.0, 10.0, 1.0, 10.0, p);
    const auto model = build_sample_spectral_model(tau, ctx);
    double acc = 0.0;
    for (std::uint64_t r = 0; r < 5; ++r) {
      const auto eig = simulate_sample(tau, ctx, GaussianLaw{}, replication_seed(p, r));
      acc += oracle::kolmogorov_distance(eig.eigenvalues.vector(), [&](double x) { return model.cdf(x); });
    }
    return acc / 5.0;
  };
  const double small = average_distance(25);
  const double large = average_distance(200);
  EXPECT_LT(large, small);
  EXPECT_LT(large, 0.05);
}

SimulationDesign small_design(std::size_t reps = 4) {
  SimulationDesign d;
  d.p = 20;
  d.n = 40;
  d.replications = reps;
  d.master_seed = 99;
  return d;
}

ExperimentOptions fast(std::size_t workers) {
  ExperimentOptions o;
  o.workers = workers;
  o.estimation.objective_tolerance = 1e-6;
  return o;
}

TEST(RunEigenvalueExperiment, TruthInjectionIsExactlyZero) {
  const auto r = run_eigenvalue_experiment(small_design(), {"truth", "sample"}, fast(1));
  EXPECT_EQ(r.per_estimator_mse.at("truth"), 0.0);
  EXPECT_GT(r.per_estimator_mse.at("sample"), 0.0);
  EXPECT_EQ(r.replication_count, 4u);
  EXPECT_EQ(r.aggregated_count, 4u);
}

TEST(RunEigenvalueExperiment, IdenticalAcrossWorkerCounts) {
  const auto d = small_design(5);
  const std::vector<std::string> est{"sample", "lawley", "quest"};
  const auto a = run_eigenvalue_experiment(d, est, fast(1));
  const auto b = run_eigenvalue_experiment(d, est, fast(3));
  const auto c = run_eigenvalue_experiment(d, est, fast(1));
  for (const auto& e : est) {
    EXPECT_EQ(a.per_estimator_mse.at(e), b.per_estimator_mse.at(e)) << e;
    EXPECT_EQ(a.per_estimator_mse.at(e), c.per_estimator_mse.at(e)) << e;
  }
  EXPECT_EQ(report_to_json(a), report_to_json(b));
}

TEST(RunEigenvalueExperiment, ClusteredDesignOffersTraditionalEstimator) {
  // Small p leaves the comparison to chance; at p = 40 the bias of block means dominates.
  SimulationDesign d = small_design(8);
  d.p = 40;
  d.n = 80;
  d.spectrum = ClusteredSpectrum{{1.0, 7.0, 15.0, 25.0}, {20, 10, 5, 5}};
  const auto r = run_eigenvalue_experiment(d, {"traditional", "quest_clustered", "truth"}, fast(1));
  EXPECT_EQ(r.per_estimator_mse.at("truth"), 0.0);
  EXPECT_LT(r.per_estimator_mse.at("quest_clustered"), r.per_estimator_mse.at("traditional"));
}

TEST(RunEigenvalueExperiment, RejectsUnknownEstimator) {
  EXPECT_THROW(run_eigenvalue_experiment(small_design(), {"bogus"}, fast(1)), ValidationError);
}

TEST(RunShrinkageExperiment, PrialFixedPoints) {
  SimulationDesign d = small_design(3);
  d.spectrum = ClusteredSpectrum{{1.0, 3.0, 10.0}, {4, 8, 8}};
  const auto r = run_shrinkage_experiment(d, fast(2), {"linear", "finite_sample_optimal", "nonlinear", "oracle"});
  EXPECT_EQ(r.prial.at("linear"), 0.0);
  EXPECT_EQ(r.prial.at("finite_sample_optimal"), 100.0);
  EXPECT_LT(r.prial.at("nonlinear"), 100.0);
  EXPECT_GT(r.mean_loss.at("nonlinear_to_oracle"), 0.0);
  const auto again = run_shrinkage_experiment(d, fast(1), {"linear", "finite_sample_optimal", "nonlinear", "oracle"});
  EXPECT_EQ(report_to_json(r), report_to_json(again));
}

TEST(RunPcaExperiment, FiniteSampleOptimalBasisIsExact) {
  const auto r = run_pca_experiment(small_design(3), {0.7, 0.9}, fast(2),
                                    {"finite_sample_optimal", "sample", "population", "shrinkage"});
  EXPECT_EQ(r.pca("finite_sample_optimal", 0.7), 0.0);
  EXPECT_EQ(r.pca("finite_sample_optimal", 0.9), 0.0);
  EXPECT_GE(r.pca("sample", 0.9), 0.0);
  EXPECT_THROW(run_pca_experiment(small_design(1), {1.5}, fast(1)), ValidationError);
}

TEST(DesignJson, RoundTrip) {
  DesignFile f;
  f.design = small_design(7);
  f.design.law = StudentTLaw{5.0};
  f.design.spectrum = ClusteredSpectrum{{1.0, 3.0, 10.0}, {4, 8, 8}};
  f.experiment = "shrinkage";
  f.estimators = {"nonlinear", "linear"};
  f.has_master_seed = true;
  const DesignFile g = parse_design_json(design_to_json(f));
  EXPECT_EQ(design_to_json(g), design_to_json(f));
  EXPECT_EQ(g.design.master_seed, 99u);
  EXPECT_EQ(std::get<StudentTLaw>(g.design.law).df, 5.0);
}

TEST(DesignJson, FractionsAndDefaults) {
  const auto f = parse_design_json(R"({"schema_version": 1, "n": 100, "p": 50,
    "spectrum": {"kind": "clustered", "locations": [1, 3, 10], "fractions": [0.2, 0.4, 0.4]}})");
  const auto& c = std::get<ClusteredSpectrum>(f.design.spectrum);
  EXPECT_EQ(c.multiplicities, (std::vector<std::size_t>{10, 20, 20}));
  EXPECT_FALSE(f.has_master_seed);
  EXPECT_EQ(f.experiment, "eigenvalue");
}

TEST(DesignJson, MalformedInputNamesLineAndColumn) {
  try {
    parse_design_json("{\n  \"n\": 100,\n  \"p\": ,\n}");
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_design_json(R"({"n": 100})"), ValidationError);
  EXPECT_THROW(parse_design_json(R"({"n": 100, "p": 50, "spectrum": {"kind": "weird"}})"), ValidationError);
}

TEST(ReportOutput, JsonAndLongCsv) {
  const auto r = run_eigenvalue_experiment(small_design(2), {"sample", "truth"}, fast(1));
  const auto j = nlohmann::json::parse(report_to_json(r));
  EXPECT_EQ(j.at("experiment"), "eigenvalue");
  EXPECT_EQ(j.at("per_estimator_mse").at("truth"), 0.0);
  std::ostringstream csv;
  write_report_csv(r, csv);
  const std::string s = csv.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "experiment,metric,estimator,q,value");
  EXPECT_NE(s.find("eigenvalue,mse,truth,,0"), std::string::npos) << s;
}

}  // namespace
