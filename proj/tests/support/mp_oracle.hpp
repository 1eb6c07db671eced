#pragma once

#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

// Closed-form Marchenko-Pastur law for a population spectrum concentrated at one
// value s, at ratio c = p/n. Written independently of the library so that tests
// compare against a separate derivation.
namespace oracle {

class MarchenkoPastur {
 public:
  MarchenkoPastur(double c, double s = 1.0);

  double c() const { return c_; }
  double lower() const { return a_; }
  double upper() const { return b_; }
  double mass_at_zero() const { return c_ > 1.0 ? 1.0 - 1.0 / c_ : 0.0; }

  double density(double x) const;
  double cdf(double x) const;
  /// sup{x : F(x) <= u}.
  double quantile(double u) const;
  /// p * integral of the quantile function over ((i-1)/p, i/p), i = 1..p.
  std::vector<double> smoothed_quantiles(std::size_t p) const;

  /// Root with positive imaginary part of c z m^2 + (z - 1 + c) m + 1 = 0 (unit scale),
  /// rescaled for s. Requires Im z > 0.
  std::complex<double> stieltjes(std::complex<double> z) const;
  /// Boundary value at real x != 0, as the limit from the upper half plane.
  std::complex<double> stieltjes_real(double x) const;

 private:
  double c_;
  double s_;
  double a_;
  double b_;
};

/// Critical values of z(mbar) = -1/mbar + c * sum_j w_j t_j / (1 + t_j mbar) on the real line,
/// located by a dense sign scan of z'(mbar) between poles and refined by bisection. Sorted.
/// For spectra with well separated clusters these are the support endpoints.
std::vector<double> boundary_critical_values(const std::vector<double>& t, const std::vector<double>& w, double c);

/// Kolmogorov distance between the e.d.f. of `sample` and a continuous CDF with an atom.
template <class Cdf>
double kolmogorov_distance(std::vector<double> sample, const Cdf& cdf);

}  // namespace oracle

#include "mp_oracle_inl.hpp"
