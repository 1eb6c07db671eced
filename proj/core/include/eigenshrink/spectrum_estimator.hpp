#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "eigenshrink/quest.hpp"
#include "eigenshrink/spectral_core.hpp"

namespace eigenshrink {

struct EstimationOptions {
  int max_iterations = 500;
  double objective_tolerance = 1e-8;  // relative decrease that ends a run
  int num_starts = 3;                 // sample, Lawley-isotonic, constant; values above 3 use all three
  double lower_bound = 0.0;
  QuestOptions quest{};
  JacobianMode jacobian = JacobianMode::forward;
  /// Optimizer steps that reuse a Broyden-updated Jacobian before a finite-difference one
  /// is recomputed. 0 recomputes it at every step. Around 10 cuts the cost of noisy fits
  /// at large p severalfold at the same final objective, but noise-free fits then stall in
  /// flat directions short of the exact solution.
  int broyden_steps = 0;
};

enum class EstimationStatus { converged, max_iterations };

std::string to_string(EstimationStatus s);

struct StartRecord {
  std::string name;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  bool failed = false;
};

struct EstimationResult {
  SpectrumVector tau_hat;
  double objective = 0.0;
  int iterations = 0;
  EstimationStatus status = EstimationStatus::converged;
  std::size_t best_start = 0;
  std::vector<StartRecord> starts;
};

/// (1/p) || Q(t) - lambda ||^2.
double quest_objective(const SpectrumVector& t, const SpectrumVector& lambda, const ConcentrationContext& ctx,
                       const QuestOptions& opts = {});

/// Population spectrum whose QuEST image is closest to the sample spectrum.
EstimationResult estimate_spectrum(const SpectrumVector& lambda, const ConcentrationContext& ctx,
                                   const EstimationOptions& opts = {});

/// Population spectrum restricted to known cluster multiplicities (summing to p).
struct ClusteredEstimationResult {
  std::vector<double> gamma;  // strictly increasing cluster locations
  SpectrumVector tau_hat;     // gamma expanded by multiplicity
  double objective = 0.0;
  int iterations = 0;
  EstimationStatus status = EstimationStatus::converged;
};
ClusteredEstimationResult estimate_clustered_spectrum(const SpectrumVector& lambda, const ConcentrationContext& ctx,
                                                      const std::vector<std::size_t>& multiplicities,
                                                      const EstimationOptions& opts = {});

/// Lawley's first-order bias correction, then isotonic regression, then clipping at zero.
SpectrumVector lawley_corrected(const SpectrumVector& lambda, const ConcentrationContext& ctx);

/// Nondecreasing least-squares fit (pool adjacent violators).
std::vector<double> isotonic_regression(const std::vector<double>& y);

/// Means of consecutive blocks of `lambda` with the given sizes.
std::vector<double> block_means(const SpectrumVector& lambda, const std::vector<std::size_t>& multiplicities);

/// Expand cluster locations by multiplicity.
SpectrumVector expand_clusters(const std::vector<double>& gamma, const std::vector<std::size_t>& multiplicities);

}  // namespace eigenshrink
