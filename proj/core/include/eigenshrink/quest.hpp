#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "eigenshrink/mp_solver.hpp"
#include "eigenshrink/spectral_core.hpp"

namespace eigenshrink {

namespace detail {
struct ModelState;
}

struct QuestOptions {
  /// Cosine-spaced nodes per support interval, edges included.
  std::size_t grid_points = 1000;
};

/// Discretised continuous part of the sample law on one support interval.
struct IntervalGrid {
  std::vector<double> x;
  std::vector<double> density;
  std::vector<double> cdf;  // F(x), including the atom at zero
};

/// Sample spectral law F^t_{n,p} implied by a population spectrum t.
class SampleSpectralModel {
 public:
  const ConcentrationContext& context() const noexcept { return ctx_; }
  const SpectrumVector& population() const noexcept { return t_; }
  const SupportIntervals& support() const noexcept { return support_; }
  const std::vector<IntervalGrid>& grids() const noexcept { return grids_; }
  std::size_t grid_points() const noexcept { return grid_points_; }
  /// Continuous mass found by quadrature before renormalisation to 1 - mass_at_zero.
  double quadrature_mass() const noexcept { return quadrature_mass_; }

  double cdf(double x) const;
  /// sup{x : F(x) <= u}; u = 1 maps to the upper support edge.
  double inverse_cdf(double u) const;
  /// q_i = p * integral of F^{-1} over ((i-1)/p, i/p).
  SpectrumVector smoothed_quantiles() const;
  /// F^{-1}((i - 0.5)/p).
  SpectrumVector plain_quantiles() const;
  /// Stieltjes transform of the sample law at x + i0 (x != 0), warm-started from the grid.
  std::complex<double> stieltjes(double x) const;
  /// Stieltjes transform of the companion law at x + i0.
  std::complex<double> companion_stieltjes(double x) const;

  const detail::ModelState& state() const { return *state_; }

 private:
  friend SampleSpectralModel build_sample_spectral_model(const SpectrumVector&, const ConcentrationContext&,
                                                         const QuestOptions&);
  SampleSpectralModel(SpectrumVector t, ConcentrationContext ctx) : t_(std::move(t)), ctx_(ctx) {}

  std::complex<double> omega_at(double x) const;

  SpectrumVector t_;
  ConcentrationContext ctx_;
  SupportIntervals support_;
  std::vector<IntervalGrid> grids_;
  std::size_t grid_points_ = 0;
  double quadrature_mass_ = 0.0;
  std::shared_ptr<const detail::ModelState> state_;
};

SampleSpectralModel build_sample_spectral_model(const SpectrumVector& t, const ConcentrationContext& ctx,
                                                const QuestOptions& opts = {});

double inverse_cdf(const SampleSpectralModel& model, double u);

/// The QuEST function Q_{n,p}(t).
SpectrumVector quest_quantiles(const SpectrumVector& t, const ConcentrationContext& ctx,
                               const QuestOptions& opts = {});

enum class JacobianMode {
  forward,       // forward differences, perturbed laws warm-started from the base solution
  forward_full,  // forward differences, every perturbed law solved from scratch
  central,       // central differences, every perturbed law solved from scratch
};

struct JacobianOptions {
  JacobianMode mode = JacobianMode::forward;
  double relative_step = 1e-6;  // h_j = relative_step * max(t_j, mean(t))
  QuestOptions quest{};
};

/// Groups of tied coordinates of a sorted spectrum. Entries below the zero
/// threshold form one group.
struct CoordinateGroups {
  std::vector<std::size_t> start;  // first index of each group
  std::vector<std::size_t> size;
};
CoordinateGroups coordinate_groups(const SpectrumVector& t);

/// d Q / d(value of group g), moving all tied coordinates of the group together. p x G.
Eigen::MatrixXd quest_group_jacobian(const SampleSpectralModel& model, const CoordinateGroups& groups,
                                     const JacobianOptions& opts = {});

/// p x p Jacobian of Q at t. Tied coordinates share the group derivative divided by the group size.
Eigen::MatrixXd quest_jacobian(const SpectrumVector& t, const ConcentrationContext& ctx,
                               const JacobianOptions& opts = {});
Eigen::MatrixXd quest_jacobian(const SampleSpectralModel& model, const JacobianOptions& opts = {});

}  // namespace eigenshrink
