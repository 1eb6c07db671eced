#include "eigenshrink/mp_solver.hpp"

#include <cmath>
#include <limits>

#include "eigenshrink/detail/mp_map.hpp"
#include "eigenshrink/errors.hpp"

namespace eigenshrink {
namespace {

void check_dims(const SpectrumVector& t, const ConcentrationContext& ctx) {
  if (t.empty()) throw ValidationError("spectrum is empty");
  if (static_cast<std::int64_t>(t.size()) != ctx.p())
    throw ValidationError("spectrum length does not match p");
}

}  // namespace

double mp_equation_residual(const SpectrumVector& t, const ConcentrationContext& ctx, std::complex<double> z,
                            std::complex<double> m) {
  const double c = ctx.c();
  std::complex<double> rhs(0.0, 0.0);
  for (double ti : t) rhs += 1.0 / (ti * (1.0 - c - c * z * m) - z);
  rhs /= static_cast<double>(t.size());
  return std::abs(m - rhs);
}

std::complex<double> solve_mp_fixed_point(const SpectrumVector& t, const ConcentrationContext& ctx,
                                          std::complex<double> z) {
  check_dims(t, ctx);
  if (!(z.imag() > 0.0)) throw DomainError("z must lie in the upper half plane");
  const detail::Atoms atoms = detail::make_atoms(t.values(), ctx.n());
  const std::complex<double> w = detail::solve_complex(atoms, z);
  const std::complex<double> m = detail::stieltjes_from_omega(w, z, ctx.c());
  const double res = mp_equation_residual(t, ctx, z, m);
  if (!(res <= 1e-10 * std::max(1.0, std::abs(m))))
    throw SolverError("MP equation residual above tolerance", res);
  return m;
}

std::complex<double> stieltjes_on_real_line(const SpectrumVector& t, const ConcentrationContext& ctx, double x) {
  check_dims(t, ctx);
  if (!std::isfinite(x) || x == 0.0) throw DomainError("x must be finite and nonzero");
  const detail::Atoms atoms = detail::make_atoms(t.values(), ctx.n());
  const detail::SupportStructure s = detail::locate_support(atoms);
  const std::complex<double> w = detail::solve_real(atoms, s, x);
  return detail::stieltjes_from_omega(w, x, ctx.c());
}

SupportIntervals compute_support(const SpectrumVector& t, const ConcentrationContext& ctx) {
  check_dims(t, ctx);
  const detail::Atoms atoms = detail::make_atoms(t.values(), ctx.n());
  const detail::SupportStructure s = detail::locate_support(atoms);
  SupportIntervals out;
  out.zero_count = s.zero_count;
  out.mass_at_zero = s.mass_at_zero();
  for (const auto& iv : s.intervals) out.intervals.push_back({iv.lower.x, iv.upper.x});
  return out;
}

double solve_mbar_at_zero(const SpectrumVector& tau_hat, const ConcentrationContext& ctx) {
  check_dims(tau_hat, ctx);
  if (ctx.p() <= ctx.n()) throw DomainError("mbar(0) is finite only when p > n");
  const detail::Atoms atoms = detail::make_atoms(tau_hat.values(), ctx.n());
  if (static_cast<double>(atoms.positive_count()) <= atoms.n)
    throw DomainError("mbar(0) requires more than n positive population eigenvalues");
  // phi(m) = (1/n) sum tau m / (1 + tau m) rises from 0 to #positive/n > 1, concave.
  auto phi = [&](double m) {
    double v = 0.0, d = 0.0;
    for (std::size_t j = 0; j < atoms.value.size(); ++j) {
      const double tau = atoms.value[j];
      const double den = 1.0 + tau * m;
      v += atoms.weight[j] * tau * m / den;
      d += atoms.weight[j] * tau / (den * den);
    }
    return std::pair<double, double>(v * atoms.inv_n - 1.0, d * atoms.inv_n);
  };
  double lo = 0.0;
  double hi = 1.0 / atoms.value.front();
  for (int it = 0; it < 2000 && phi(hi).first <= 0.0; ++it) {
    lo = hi;
    hi *= 2.0;
  }
  // Newton from the left converges monotonically for a concave increasing function.
  double m = lo > 0.0 ? lo : 0.5 * hi;
  for (int it = 0; it < 200; ++it) {
    const auto [f, df] = phi(m);
    if (f > 0.0) hi = m;
    else lo = m;
    double mn = m - f / df;
    if (!(mn > lo && mn < hi)) mn = 0.5 * (lo + hi);
    if (std::abs(mn - m) <= 4.0 * std::numeric_limits<double>::epsilon() * m) return mn;
    m = mn;
  }
  const double res = std::abs(phi(m).first);
  if (res > 1e-12) throw SolverError("mbar(0) equation did not converge", res);
  return m;
}

}  // namespace eigenshrink
