#include "eigenshrink/shrinkage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "eigenshrink/errors.hpp"
#include "eigenshrink/mp_solver.hpp"

namespace eigenshrink {
namespace {

Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& u, const Eigen::VectorXd& d) {
  Eigen::MatrixXd m = u * d.asDiagonal() * u.transpose();
  return 0.5 * (m + m.transpose());
}

void check_eigensystem(const Eigensystem& eig) {
  const auto p = static_cast<Eigen::Index>(eig.eigenvalues.size());
  if (eig.eigenvectors.rows() != p || eig.eigenvectors.cols() != p)
    throw ValidationError("eigenvector matrix is not p x p");
  if (eig.context.p() != p) throw ValidationError("eigensystem dimension does not match p");
}

// Move x onto the nearest support edge when it sits just outside (relative distance 1e-6).
double snap_to_support(const SupportIntervals& s, double x) {
  for (const auto& iv : s.intervals) {
    if (x >= iv.lower && x <= iv.upper) return x;
  }
  double best = x;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const auto& iv : s.intervals) {
    for (double e : {iv.lower, iv.upper}) {
      const double gap = std::abs(x - e);
      if (gap < best_gap) {
        best_gap = gap;
        best = e;
      }
    }
  }
  return (best_gap <= 1e-6 * std::abs(best) && best > 0.0) ? best : x;
}

}  // namespace

std::string to_string(ShrinkageKind k) {
  switch (k) {
    case ShrinkageKind::oracle: return "oracle";
    case ShrinkageKind::bona_fide: return "bona_fide";
    case ShrinkageKind::finite_sample_optimal: return "finite_sample_optimal";
    case ShrinkageKind::linear: return "linear";
  }
  return "unknown";
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& data) {
  if (data.rows() == 0 || data.cols() == 0) throw ValidationError("data matrix is empty");
  Eigen::MatrixXd s = data.transpose() * data / static_cast<double>(data.rows());
  return 0.5 * (s + s.transpose());
}

Eigensystem eigensystem_from_covariance(const Eigen::MatrixXd& sample_cov, std::int64_t n) {
  if (sample_cov.rows() == 0 || sample_cov.rows() != sample_cov.cols())
    throw ValidationError("sample covariance must be square and nonempty");
  if (!sample_cov.allFinite()) throw ValidationError("sample covariance has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sample_cov);
  if (es.info() != Eigen::Success) throw SolverError("eigendecomposition failed", 0.0);
  std::vector<double> lam(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  const double mean = std::accumulate(lam.begin(), lam.end(), 0.0) / static_cast<double>(lam.size());
  const double thr = kZeroRelativeThreshold * std::max(mean, 0.0);
  for (double& v : lam) {
    if (v < thr) v = 0.0;
  }
  for (std::size_t i = 1; i < lam.size(); ++i) lam[i] = std::max(lam[i], lam[i - 1]);
  return {SpectrumVector(std::move(lam)), es.eigenvectors(), ConcentrationContext(n, sample_cov.rows())};
}

Eigen::VectorXd finite_sample_optimal_d(const Eigen::MatrixXd& eigenvectors, const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != eigenvectors.rows() || sigma.cols() != eigenvectors.rows())
    throw ValidationError("Sigma and eigenvectors differ in dimension");
  return (eigenvectors.array() * (sigma * eigenvectors).array()).colwise().sum().transpose();
}

Eigen::VectorXd oracle_d(const SpectrumVector& lambda, const ConcentrationContext& ctx,
                         const std::vector<std::complex<double>>& mbreve, double mbar0) {
  if (lambda.size() != mbreve.size()) throw ValidationError("lambda and mbreve differ in length");
  const double c = ctx.c();
  const double thr = lambda.zero_threshold();
  Eigen::VectorXd d(static_cast<Eigen::Index>(lambda.size()));
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    const double l = lambda[i];
    if (l > thr && l > 0.0) {
      d[static_cast<Eigen::Index>(i)] = l / std::norm(1.0 - c - c * l * mbreve[i]);
    } else {
      if (!(c > 1.0)) throw DomainError("zero sample eigenvalue requires p > n");
      if (!(mbar0 > 0.0)) throw DomainError("mbar(0) must be positive");
      d[static_cast<Eigen::Index>(i)] = 1.0 / ((c - 1.0) * mbar0);
    }
  }
  return d;
}

ShrinkageResult nonlinear_shrinkage(const Eigensystem& eig, const SampleSpectralModel& model) {
  check_eigensystem(eig);
  const SpectrumVector& lambda = eig.eigenvalues;
  const SpectrumVector& tau = model.population();
  if (tau.size() != lambda.size()) throw ValidationError("population spectrum length does not match p");
  if (model.context().n() != eig.context.n()) throw ValidationError("model and eigensystem differ in n");
  if (lambda.max() <= 0.0) throw ValidationError("sample eigenvalues are identically zero");

  ShrinkageResult out;
  const ConcentrationContext& ctx = eig.context;
  const double c = ctx.c();
  const std::size_t zeros = lambda.zero_count();

  std::vector<std::complex<double>> mb(lambda.size(), {0.0, 0.0});
  for (std::size_t i = zeros; i < lambda.size(); ++i) {
    const double x = snap_to_support(model.support(), lambda[i]);
    mb[i] = model.stieltjes(x);
  }
  double mbar0 = 0.0;
  double zero_value = 0.0;
  if (zeros > 0) {
    if (ctx.p() > ctx.n()) {
      mbar0 = solve_mbar_at_zero(tau, ctx);
    } else if (ctx.p() == ctx.n()) {
      // Limit of the p > n formula as c -> 1: 1 / ((1/n) sum 1/tau_i).
      if (tau.zero_count() > 0) throw DomainError("zero sample eigenvalue with p = n needs positive tau");
      double s = 0.0;
      for (double t : tau) s += 1.0 / t;
      zero_value = static_cast<double>(ctx.n()) / s;
      out.warnings.push_back("p = n with zero sample eigenvalues; used the c -> 1 limit of the zero branch");
    } else {
      throw DomainError("zero sample eigenvalue with p < n");
    }
  }
  if (zeros > 0 && ctx.p() == ctx.n()) {
    out.d.resize(static_cast<Eigen::Index>(lambda.size()));
    for (std::size_t i = 0; i < lambda.size(); ++i) {
      out.d[static_cast<Eigen::Index>(i)] =
          i < zeros ? zero_value : lambda[i] / std::norm(1.0 - c - c * lambda[i] * mb[i]);
    }
  } else {
    out.d = oracle_d(lambda, ctx, mb, mbar0);
  }
  for (Eigen::Index i = 0; i < out.d.size(); ++i) {
    if (!(out.d[i] > 0.0) || !std::isfinite(out.d[i]))
      throw SolverError("shrunk eigenvalue is not positive and finite", out.d[i]);
  }
  out.matrix = reconstruct(eig.eigenvectors, out.d);
  out.kind = ShrinkageKind::bona_fide;
  return out;
}

ShrinkageResult nonlinear_shrinkage(const Eigensystem& eig, const SpectrumVector& tau, const QuestOptions& opts) {
  check_eigensystem(eig);
  if (tau.size() != eig.eigenvalues.size()) throw ValidationError("population spectrum length does not match p");
  return nonlinear_shrinkage(eig, build_sample_spectral_model(tau, eig.context, opts));
}

ShrinkageResult oracle_shrinkage(const Eigensystem& eig, const SpectrumVector& tau_true, const QuestOptions& opts) {
  ShrinkageResult r = nonlinear_shrinkage(eig, tau_true, opts);
  r.kind = ShrinkageKind::oracle;
  return r;
}

LinearShrinkageResult linear_shrinkage(const Eigen::MatrixXd& sample_cov, std::int64_t n, double b2_raw) {
  const Eigen::Index p = sample_cov.rows();
  if (p == 0 || sample_cov.cols() != p) throw ValidationError("sample covariance must be square and nonempty");
  if (n <= 0) throw ValidationError("n must be positive");
  if (!(b2_raw >= 0.0)) throw ValidationError("raw dispersion must be nonnegative");
  LinearShrinkageResult out;
  const double dp = static_cast<double>(p);
  out.target_scale = sample_cov.trace() / dp;
  Eigen::MatrixXd centred = sample_cov;
  centred.diagonal().array() -= out.target_scale;
  out.d2 = centred.squaredNorm() / dp;
  out.b2_raw = b2_raw;
  out.b2 = std::min(b2_raw, out.d2);
  out.intensity = out.d2 > 0.0 ? out.b2 / out.d2 : 0.0;
  out.matrix = (1.0 - out.intensity) * sample_cov;
  out.matrix.diagonal().array() += out.intensity * out.target_scale;
  return out;
}

LinearShrinkageResult linear_shrinkage(const Eigen::MatrixXd& data) {
  const Eigen::Index n = data.rows();
  const Eigen::Index p = data.cols();
  if (n == 0 || p == 0) throw ValidationError("data matrix is empty");
  const Eigen::MatrixXd s = sample_covariance(data);
  const double tr_s2 = s.squaredNorm();
  // ||y y' - S||^2 = ((y'y)^2 - 2 y'Sy + tr(S^2)) / p
  const Eigen::MatrixXd ys = data * s;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double a = data.row(k).squaredNorm();
    const double b = ys.row(k).dot(data.row(k));
    acc += (a * a - 2.0 * b + tr_s2) / static_cast<double>(p);
  }
  const double b2_raw = acc / (static_cast<double>(n) * static_cast<double>(n));
  return linear_shrinkage(s, n, b2_raw);
}

double frobenius_norm_sq(const Eigen::MatrixXd& a) {
  if (a.rows() == 0) throw ValidationError("empty matrix");
  return a.squaredNorm() / static_cast<double>(a.rows());
}

double squared_frobenius_loss(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ValidationError("matrices differ in shape");
  if (a.rows() != a.cols()) throw ValidationError("matrices must be square");
  return frobenius_norm_sq(a - b);
}

double frobenius_loss(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return std::sqrt(squared_frobenius_loss(a, b));
}

double prial(const std::vector<double>& candidate_losses, const std::vector<double>& benchmark_losses) {
  if (candidate_losses.empty() || benchmark_losses.empty()) throw ValidationError("no losses given");
  const double mc = std::accumulate(candidate_losses.begin(), candidate_losses.end(), 0.0) /
                    static_cast<double>(candidate_losses.size());
  const double mb = std::accumulate(benchmark_losses.begin(), benchmark_losses.end(), 0.0) /
                    static_cast<double>(benchmark_losses.size());
  if (!(mb > 0.0)) throw DomainError("benchmark loss is zero");
  return 100.0 * (1.0 - mc / mb);
}

}  // namespace eigenshrink
