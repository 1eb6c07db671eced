#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "eigenshrink/shrinkage.hpp"
#include "eigenshrink/spectral_core.hpp"
#include "eigenshrink/spectrum_estimator.hpp"

namespace eigenshrink {

/// tau_i = a_shift + scale * F^{-1}((i - 0.5)/p) for F the Beta(alpha, beta) law.
struct BetaSpectrum {
  double a_shift = 1.0;
  double scale = 10.0;
  double alpha = 1.0;
  double beta = 10.0;
};

struct ExplicitSpectrum {
  SpectrumVector tau;
};

/// Distinct values with multiplicities summing to p.
struct ClusteredSpectrum {
  std::vector<double> locations;
  std::vector<std::size_t> multiplicities;
};

using SpectrumSpec = std::variant<BetaSpectrum, ExplicitSpectrum, ClusteredSpectrum>;

struct GaussianLaw {};
/// Student t with `df` > 2 degrees of freedom, rescaled to unit variance.
struct StudentTLaw {
  double df = 3.0;
};

using VariateLaw = std::variant<GaussianLaw, StudentTLaw>;

std::string to_string(const VariateLaw& law);

struct SimulationDesign {
  SpectrumSpec spectrum = BetaSpectrum{};
  std::int64_t n = 200;
  std::int64_t p = 100;
  VariateLaw law = GaussianLaw{};
  std::size_t replications = 100;
  std::uint64_t master_seed = 0;

  /// Throws ValidationError on n, p < 2, zero replications, bad Beta or t parameters,
  /// or multiplicities that do not sum to p.
  void validate() const;
  ConcentrationContext context() const { return ConcentrationContext(n, p); }
};

SpectrumVector make_beta_spectrum(double a_shift, double scale, double alpha, double beta, std::size_t p);

/// Integer multiplicities for cluster fractions summing to one (largest remainder rounding).
std::vector<std::size_t> cluster_multiplicities(const std::vector<double>& fractions, std::size_t p);

/// Population spectrum of a design.
SpectrumVector design_spectrum(const SimulationDesign& design);

/// Seed of replication r, a splitmix64 hash of (master, r).
std::uint64_t replication_seed(std::uint64_t master, std::uint64_t r);

/// Fills an n x p matrix with i.i.d. unit-variance variates from `law`.
Eigen::MatrixXd draw_variates(std::int64_t n, std::int64_t p, const VariateLaw& law, std::uint64_t seed);

struct SimulatedSample {
  Eigen::MatrixXd data;        // Y = X diag(sqrt(tau)), n x p
  Eigen::MatrixXd sample_cov;  // Y'Y / n
  Eigensystem eig;
};

SimulatedSample simulate_data(const SpectrumVector& tau, const ConcentrationContext& ctx, const VariateLaw& law,
                              std::uint64_t seed);
Eigensystem simulate_sample(const SpectrumVector& tau, const ConcentrationContext& ctx, const VariateLaw& law,
                            std::uint64_t seed);

struct ExperimentOptions {
  /// Worker threads; 0 reads WORKERS from the environment and falls back to 1.
  std::size_t workers = 0;
  /// Drop replications whose estimator throws instead of failing the run.
  bool skip_failed_replications = false;
  bool record_elapsed = false;
  EstimationOptions estimation{};
};

std::size_t resolve_workers(std::size_t requested);

struct ReplicationError {
  std::size_t replication = 0;
  std::string estimator;
  std::string message;
};

struct PcaCell {
  std::string estimator;
  double q = 0.0;
  double rmse = 0.0;
  double mean_k = 0.0;
  double mean_true_k = 0.0;
};

struct SimulationReport {
  std::string experiment;
  SimulationDesign design;
  std::map<std::string, double> per_estimator_mse;
  std::map<std::string, double> prial;
  /// Mean Frobenius losses and distances keyed by name.
  std::map<std::string, double> mean_loss;
  std::vector<PcaCell> pca_rmse;
  std::size_t replication_count = 0;   // replications attempted
  std::size_t aggregated_count = 0;    // replications entering every mean
  std::vector<ReplicationError> errors;
  std::optional<double> elapsed_seconds;

  double pca(const std::string& estimator, double q) const;
};

/// Eigenvalue estimators: sample, lawley, quest, truth, and for clustered designs
/// quest_clustered and traditional (block means).
SimulationReport run_eigenvalue_experiment(const SimulationDesign& design, const std::vector<std::string>& estimators,
                                           const ExperimentOptions& opts = {});

/// Shrinkage estimators: nonlinear, oracle, linear, sample, finite_sample_optimal. PRIAL is
/// measured against linear with losses to S* = U diag(u_i' Sigma u_i) U'. mean_loss also
/// carries "nonlinear_to_oracle", the mean of ||S_hat - S_oracle||^2.
SimulationReport run_shrinkage_experiment(const SimulationDesign& design, const ExperimentOptions& opts = {},
                                          const std::vector<std::string>& estimators = {"nonlinear", "oracle",
                                                                                        "linear"});

/// PCA retention RMSE per basis in {sample, population, shrinkage, finite_sample_optimal} and per q.
SimulationReport run_pca_experiment(const SimulationDesign& design, const std::vector<double>& targets,
                                    const ExperimentOptions& opts = {},
                                    const std::vector<std::string>& bases = {"sample", "population", "shrinkage"});

/// A design plus the experiment to run on it, as read from a design file.
struct DesignFile {
  SimulationDesign design;
  std::string experiment = "eigenvalue";  // eigenvalue | shrinkage | pca
  std::vector<std::string> estimators;    // empty: the experiment's defaults
  std::vector<double> targets{0.7, 0.8, 0.9};
  bool skip_failed_replications = false;
  bool has_master_seed = false;  // false when the file leaves the seed to the caller
};

inline constexpr int kDesignSchemaVersion = 1;

/// Throws ValidationError with line and column on malformed input.
DesignFile parse_design_json(const std::string& text);
DesignFile read_design_file(const std::string& path);
std::string design_to_json(const DesignFile& file);
std::string report_to_json(const SimulationReport& report);
/// Long format: experiment,metric,estimator,q,value.
void write_report_csv(const SimulationReport& report, std::ostream& out);

}  // namespace eigenshrink
