#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "eigenshrink/detail/mp_map.hpp"

namespace eigenshrink::detail {

struct GridState {
  std::vector<double> x;
  std::vector<std::complex<double>> omega;
  std::vector<std::complex<double>> dz;
};

struct ModelState {
  Atoms atoms;
  SupportStructure structure;
  std::vector<GridState> grids;
  double c = 0.0;
};

/// x_k = lo + (hi - lo) (1 - cos(pi k / (N - 1))) / 2.
void cosine_nodes(double lo, double hi, std::size_t n, std::vector<double>& x);

/// sin(pi k / (N - 1)), k = 0..N-1.
const std::vector<double>& cosine_weights(std::size_t n);

/// Solve the inverse map on every node of one interval.
void solve_interval_grid(const Atoms& a, const SupportStructure& s, const IntervalEdges& iv,
                         std::size_t n, GridState& g);

inline double density_from_omega(std::complex<double> w, double c) {
  const double n2 = std::norm(w);
  return n2 > 0.0 ? w.imag() / (n2 * c * 3.14159265358979323846) : 0.0;
}

/// Raw continuous mass of one interval (trapezoid rule in the cosine angle) and,
/// optionally, unnormalised cumulative mass at each node.
double integrate_interval(const std::vector<double>& density, double lo, double hi, bool singular_lower,
                          std::vector<double>* cumulative);

/// Turn per-interval cumulative masses into F values that end exactly at 1.
void finalize_cdf(std::vector<std::vector<double>>& cumulative, double raw_total, std::size_t zero_count,
                  std::size_t p);

/// Smoothed quantiles from a piecewise-linear inverse CDF through the nodes.
void smoothed_quantiles_from_nodes(const std::vector<std::vector<double>>& x,
                                   const std::vector<std::vector<double>>& cdf, std::size_t zero_count,
                                   std::size_t p, std::vector<double>& out);

}  // namespace eigenshrink::detail
