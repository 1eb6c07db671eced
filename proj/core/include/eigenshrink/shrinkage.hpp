#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eigenshrink/quest.hpp"
#include "eigenshrink/spectral_core.hpp"

namespace eigenshrink {

/// Sample eigenvalues (ascending) with matching orthonormal eigenvectors as columns.
struct Eigensystem {
  SpectrumVector eigenvalues;
  Eigen::MatrixXd eigenvectors;
  ConcentrationContext context;
};

/// Eigendecomposition of a symmetric sample covariance matrix. Eigenvalues below
/// 1e-12 * mean are set to exactly zero.
Eigensystem eigensystem_from_covariance(const Eigen::MatrixXd& sample_cov, std::int64_t n);

/// S = Y'Y / n for an n x p data matrix (no demeaning).
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& data);

enum class ShrinkageKind { oracle, bona_fide, finite_sample_optimal, linear };

std::string to_string(ShrinkageKind k);

struct ShrinkageResult {
  Eigen::VectorXd d;       // shrunk eigenvalues, aligned with the sample eigenvectors
  Eigen::MatrixXd matrix;  // U diag(d) U'
  ShrinkageKind kind = ShrinkageKind::bona_fide;
  std::vector<std::string> warnings;
};

/// d_i = u_i' Sigma u_i.
Eigen::VectorXd finite_sample_optimal_d(const Eigen::MatrixXd& eigenvectors, const Eigen::MatrixXd& sigma);

/// d_i = lambda_i / |1 - c - c lambda_i m_i|^2 for lambda_i > 0, and 1 / ((c - 1) mbar0)
/// for lambda_i = 0 when c > 1.
Eigen::VectorXd oracle_d(const SpectrumVector& lambda, const ConcentrationContext& ctx,
                         const std::vector<std::complex<double>>& mbreve, double mbar0);

/// Nonlinear shrinkage driven by the sample law implied by `tau` (estimated or true).
ShrinkageResult nonlinear_shrinkage(const Eigensystem& eig, const SpectrumVector& tau,
                                    const QuestOptions& opts = {});
ShrinkageResult nonlinear_shrinkage(const Eigensystem& eig, const SampleSpectralModel& model);

/// Oracle shrinkage: nonlinear shrinkage driven by the true population spectrum.
ShrinkageResult oracle_shrinkage(const Eigensystem& eig, const SpectrumVector& tau_true,
                                 const QuestOptions& opts = {});

/// Linear shrinkage toward a scaled identity with the intensity clamped to [0, 1].
struct LinearShrinkageResult {
  Eigen::MatrixXd matrix;
  double target_scale = 0.0;  // mu = tr(S)/p
  double intensity = 0.0;     // weight on the target, b^2 / d^2
  double d2 = 0.0;
  double b2 = 0.0;
  double b2_raw = 0.0;
};
LinearShrinkageResult linear_shrinkage(const Eigen::MatrixXd& data);
/// Same, from S, n and the raw dispersion bbar^2 = (1/n^2) sum_k ||y_k y_k' - S||^2.
LinearShrinkageResult linear_shrinkage(const Eigen::MatrixXd& sample_cov, std::int64_t n, double b2_raw);

/// ||A||^2 = tr(A A') / p.
double frobenius_norm_sq(const Eigen::MatrixXd& a);
/// ||A - B|| = sqrt(tr((A - B)(A - B)') / p), so that ||I|| = 1 for every p.
double frobenius_loss(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
/// ||A - B||^2, the per-replication loss fed to prial().
double squared_frobenius_loss(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// 100 * (1 - mean(candidate) / mean(benchmark)).
double prial(const std::vector<double>& candidate_losses, const std::vector<double>& benchmark_losses);

}  // namespace eigenshrink
