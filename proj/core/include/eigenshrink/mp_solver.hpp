#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "eigenshrink/spectral_core.hpp"

namespace eigenshrink {

struct SupportInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Support of the continuous part of the sample law plus its atom at zero.
struct SupportIntervals {
  std::vector<SupportInterval> intervals;  // disjoint, ascending
  double mass_at_zero = 0.0;               // max(1 - n/p, #{t_i = 0}/p)
  std::size_t zero_count = 0;              // p * mass_at_zero, an integer
};

/// Unique m with Im(mbar) > 0 solving
///   m = (1/p) sum_i 1 / (t_i (1 - c - c z m) - z),  mbar = -(1 - c)/z + c m.
/// Requires Im z > 0. Throws SolverError when the residual stays above 1e-10 relative.
std::complex<double> solve_mp_fixed_point(const SpectrumVector& t, const ConcentrationContext& ctx,
                                          std::complex<double> z);

/// Limit of the solution above as z -> x + i0, for real x != 0.
std::complex<double> stieltjes_on_real_line(const SpectrumVector& t, const ConcentrationContext& ctx,
                                            double x);

/// Support of the sample law induced by `t` at concentration ctx.
SupportIntervals compute_support(const SpectrumVector& t, const ConcentrationContext& ctx);

/// Positive root of m = [(1/n) sum_i tau_i / (1 + tau_i m)]^{-1}; requires p > n and more
/// than n positive entries in `tau_hat`. Throws DomainError otherwise.
double solve_mbar_at_zero(const SpectrumVector& tau_hat, const ConcentrationContext& ctx);

/// |m - RHS(m)| of the fixed-point equation, for diagnostics and tests.
double mp_equation_residual(const SpectrumVector& t, const ConcentrationContext& ctx,
                            std::complex<double> z, std::complex<double> m);

}  // namespace eigenshrink
