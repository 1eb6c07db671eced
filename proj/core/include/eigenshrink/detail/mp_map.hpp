#pragma once

// Inverse-map machinery shared by the solver, the QuEST model and its Jacobian.
//
// Write mbar for the Stieltjes transform of the companion law (the law of the
// n eigenvalues of YY'/n) and omega = -1/mbar. The discretised MP equation
// becomes an explicit inverse map
//
//   x(omega) = omega * (1 + (1/n) * sum_i t_i / (omega - t_i)),
//
// with omega in the upper half plane for x in the upper half plane, and
// dx/domega = 1 - (1/n) * sum_i t_i^2 / (omega - t_i)^2. On the real axis the
// support of the sample law is where no real omega solves x(omega) = x with
// dx/domega > 0.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace eigenshrink::detail {

/// Positive part of a spectrum grouped into distinct atoms.
struct Atoms {
  std::vector<double> value;   // distinct positive values, ascending
  std::vector<double> weight;  // multiplicities
  std::vector<double> cbrt_mass;  // cbrt(weight * value^2), for the gap rejection bound
  std::size_t p = 0;
  std::size_t zero_count = 0;  // entries treated as zero
  double n = 0.0;
  double inv_n = 0.0;
  double scale = 0.0;  // largest value

  std::size_t positive_count() const { return p - zero_count; }
  bool empty() const { return value.empty(); }
};

/// `t` must be sorted ascending; zeros are entries below 1e-12 * mean(t).
Atoms make_atoms(std::span<const double> t, std::int64_t n);

struct MapValue {
  std::complex<double> z;
  std::complex<double> dz;
};

MapValue eval_map(const Atoms& a, std::complex<double> w);
/// Second derivative of the inverse map.
std::complex<double> eval_map_d2(const Atoms& a, std::complex<double> w);

struct RealMap {
  double z;    // x(y)
  double dz;   // g(y) = dx/dy
  double d2z;  // g'(y)
};
RealMap eval_real(const Atoms& a, double y);

struct Edge {
  double omega = 0.0;      // real solution at the edge
  double x = 0.0;          // support endpoint
  double curvature = 0.0;  // d2x/domega2 at the edge
};

struct IntervalEdges {
  Edge lower;
  Edge upper;
  bool singular_lower = false;  // lower edge at x = 0 with an inverse-square-root density
  std::ptrdiff_t gap_atom = -1; // atom index k whose (t_k, t_k+1) bracket produced the lower edge
};

/// Maximiser of g between atoms k and k+1, recorded whether or not it opens a gap.
struct GapPeak {
  std::size_t atom = 0;
  double omega = 0.0;
};

struct SupportStructure {
  std::vector<IntervalEdges> intervals;
  std::vector<GapPeak> peaks;
  std::size_t zero_count = 0;
  std::size_t p = 0;
  double mass_at_zero() const { return static_cast<double>(zero_count) / static_cast<double>(p); }
};

/// Zero count for the sample law: max(p - n, #zeros in t).
std::size_t sample_zero_count(const Atoms& a);

/// Support intervals of the sample law. `hint` (a nearby structure) only seeds root searches.
SupportStructure locate_support(const Atoms& a, const SupportStructure* hint = nullptr);

/// Newton iteration for x(omega) = target, keeping Im(omega) > 0.
/// On success `w` holds the solution and `mv` the map evaluated next to it.
bool newton_solve(const Atoms& a, std::complex<double> target, std::complex<double>& w,
                  MapValue& mv, int max_iter = 100);

/// omega solving x(omega) = z for Im z > 0 (fixed-point iteration then Newton polish).
/// Throws SolverError when the residual stays above tolerance.
std::complex<double> solve_complex(const Atoms& a, std::complex<double> z);

/// Limit of omega(x + i*eta) as eta -> 0+ at real x != 0. `hint` is an optional warm start.
/// Inside the support falls back to eta = 1e-10 * max(t) when Newton stalls.
std::complex<double> solve_real(const Atoms& a, const SupportStructure& s, double x,
                                const std::complex<double>* hint = nullptr);

/// Edge-expansion starting point at distance `dx` from an edge.
std::complex<double> edge_start(const Edge& e, double dx);

/// Convert omega at x into the Stieltjes transform of the sample law, m = (1/c) * (mbar + (1 - c)/x).
std::complex<double> stieltjes_from_omega(std::complex<double> omega, std::complex<double> x,
                                          double c);

}  // namespace eigenshrink::detail
