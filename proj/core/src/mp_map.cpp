#include "eigenshrink/detail/mp_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "eigenshrink/errors.hpp"

namespace eigenshrink::detail {
namespace {

constexpr double kNewtonAcceptStep = 1e-7;  // relative step after which one more update is exact to rounding

// Safeguarded Newton on a bracket known to contain a single sign change.
// `sign_lo` is the sign of f just right of `lo`. Endpoints are never evaluated.
template <class F>
double bracketed_root(F&& f, double lo, double hi, int sign_lo, double x0, double xtol) {
  double x = (x0 > lo && x0 < hi) ? x0 : 0.5 * (lo + hi);
  double width_before = hi - lo;
  for (int it = 0; it < 400; ++it) {
    const auto [fx, dfx] = f(x);
    if (fx == 0.0) return x;
    if ((fx > 0.0) == (sign_lo > 0)) lo = x;
    else hi = x;
    if (hi - lo <= xtol) return x;
    double xn = x - fx / dfx;
    // Fall back to bisection when Newton leaves the bracket or stops shrinking it.
    if (!std::isfinite(xn) || xn <= lo || xn >= hi || (it % 4 == 3 && hi - lo > 0.5 * width_before)) {
      xn = 0.5 * (lo + hi);
    }
    if (it % 4 == 3) width_before = hi - lo;
    if (std::abs(xn - x) <= 0.5 * xtol) return xn;
    x = xn;
  }
  return x;
}

}  // namespace

Atoms make_atoms(std::span<const double> t, std::int64_t n) {
  Atoms a;
  a.p = t.size();
  a.n = static_cast<double>(n);
  a.inv_n = 1.0 / a.n;
  const double mean = t.empty() ? 0.0 : std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
  const double thr = 1e-12 * mean;
  for (double v : t) {
    if (mean == 0.0 || v < thr) {
      ++a.zero_count;
      continue;
    }
    if (!a.value.empty() && a.value.back() == v) {
      a.weight.back() += 1.0;
    } else {
      a.value.push_back(v);
      a.weight.push_back(1.0);
    }
  }
  a.cbrt_mass.resize(a.value.size());
  for (std::size_t j = 0; j < a.value.size(); ++j) a.cbrt_mass[j] = std::cbrt(a.weight[j] * a.value[j] * a.value[j]);
  a.scale = a.value.empty() ? 0.0 : a.value.back();
  return a;
}

MapValue eval_map(const Atoms& a, std::complex<double> w) {
  const double wr = w.real();
  const double wi = w.imag();
  const double wi2 = wi * wi;
  double s1r = 0.0, s1i = 0.0, s2r = 0.0, s2i = 0.0;
  const std::size_t k = a.value.size();
  const double* tv = a.value.data();
  const double* mv = a.weight.data();
  for (std::size_t j = 0; j < k; ++j) {
    const double t = tv[j];
    const double dr = wr - t;
    const double inv = 1.0 / (dr * dr + wi2);
    const double qr = t * dr * inv;  // t / (w - t)
    const double qi = -t * wi * inv;
    const double m = mv[j];
    s1r += m * qr;
    s1i += m * qi;
    s2r += m * (qr * qr - qi * qi);
    s2i += m * (2.0 * qr * qi);
  }
  const std::complex<double> s1(s1r * a.inv_n, s1i * a.inv_n);
  const std::complex<double> s2(s2r * a.inv_n, s2i * a.inv_n);
  return {w * (1.0 + s1), 1.0 - s2};
}

std::complex<double> eval_map_d2(const Atoms& a, std::complex<double> w) {
  std::complex<double> s(0.0, 0.0);
  for (std::size_t j = 0; j < a.value.size(); ++j) {
    const std::complex<double> inv = 1.0 / (w - a.value[j]);
    const std::complex<double> q = a.value[j] * inv;
    s += a.weight[j] * q * q * inv;
  }
  return 2.0 * a.inv_n * s;
}

RealMap eval_real(const Atoms& a, double y) {
  double s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (std::size_t j = 0; j < a.value.size(); ++j) {
    const double inv = 1.0 / (y - a.value[j]);
    const double q = a.value[j] * inv;
    const double m = a.weight[j];
    s1 += m * q;
    s2 += m * q * q;
    s3 += m * q * q * inv;
  }
  return {y * (1.0 + s1 * a.inv_n), 1.0 - s2 * a.inv_n, 2.0 * s3 * a.inv_n};
}

namespace {

// d2g/dy2, used only when locating the maximum of g between two atoms.
double eval_real_d3(const Atoms& a, double y) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.value.size(); ++j) {
    const double inv = 1.0 / (y - a.value[j]);
    const double q = a.value[j] * inv;
    s += a.weight[j] * q * q * inv * inv;
  }
  return -6.0 * s * a.inv_n;
}

Edge make_edge(const Atoms& a, double y) {
  const RealMap r = eval_real(a, y);
  return {y, r.z, r.d2z};
}

}  // namespace

std::size_t sample_zero_count(const Atoms& a) {
  const auto n = static_cast<std::size_t>(a.n);
  const std::size_t from_rank = a.p > n ? a.p - n : 0;
  return std::max(from_rank, a.zero_count);
}

SupportStructure locate_support(const Atoms& a, const SupportStructure* hint) {
  SupportStructure s;
  s.p = a.p;
  s.zero_count = sample_zero_count(a);
  if (a.empty()) return s;

  const std::size_t k = a.value.size();
  const double t_lo = a.value.front();
  const double t_hi = a.value.back();
  const double ratio = static_cast<double>(a.positive_count()) * a.inv_n;
  const double xtol = 4.0 * std::numeric_limits<double>::epsilon() * t_hi;

  auto g_fn = [&](double y) {
    const RealMap r = eval_real(a, y);
    return std::pair<double, double>(r.dz, r.d2z);
  };
  auto gprime_fn = [&](double y) {
    const RealMap r = eval_real(a, y);
    return std::pair<double, double>(r.d2z, eval_real_d3(a, y));
  };

  const IntervalEdges* hint_first = (hint && !hint->intervals.empty()) ? &hint->intervals.front() : nullptr;
  const IntervalEdges* hint_last = (hint && !hint->intervals.empty()) ? &hint->intervals.back() : nullptr;

  // Lower edge of the whole support.
  IntervalEdges current;
  const auto pos = a.positive_count();
  const auto n_int = static_cast<std::size_t>(a.n);
  if (pos == n_int) {
    current.singular_lower = true;
    current.lower = make_edge(a, 0.0);
    current.lower.x = 0.0;
  } else {
    double lo, hi;
    if (pos < n_int) {
      lo = 0.0;
      hi = t_lo;
    } else {
      lo = 2.0 * t_hi * (1.0 - std::sqrt(ratio));
      hi = 0.0;
    }
    const double guess = hint_first ? hint_first->lower.omega : 0.5 * (lo + hi);
    const double y = bracketed_root(g_fn, lo, hi, +1, guess, xtol);
    current.lower = make_edge(a, y);
  }

  // Gaps between consecutive atoms.
  const bool cached = a.cbrt_mass.size() == k;
  std::vector<IntervalEdges> out;
  std::size_t hint_peak = 0;
  for (std::size_t j = 0; j + 1 < k; ++j) {
    const double lo = a.value[j];
    const double hi = a.value[j + 1];
    const double ca = cached ? a.cbrt_mass[j] : std::cbrt(a.weight[j] * lo * lo);
    const double cb = cached ? a.cbrt_mass[j + 1] : std::cbrt(a.weight[j + 1] * hi * hi);
    const double width = hi - lo;
    // g <= 1 - (A/(y-lo)^2 + B/(hi-y)^2)/n, whose maximum is 1 - (A^(1/3) + B^(1/3))^3 / (n width^2).
    const double bound = (ca + cb) * (ca + cb) * (ca + cb) / (width * width);
    if (bound >= a.n) continue;

    double guess = lo + width * ca / (ca + cb);
    const IntervalEdges* h = nullptr;
    const IntervalEdges* h_prev = nullptr;
    if (hint) {
      while (hint_peak < hint->peaks.size() && hint->peaks[hint_peak].atom < j) ++hint_peak;
      if (hint_peak < hint->peaks.size() && hint->peaks[hint_peak].atom == j) guess = hint->peaks[hint_peak].omega;
      for (std::size_t i = 0; i < hint->intervals.size(); ++i) {
        if (hint->intervals[i].gap_atom == static_cast<std::ptrdiff_t>(j + 1)) {
          h = &hint->intervals[i];
          if (i > 0) h_prev = &hint->intervals[i - 1];
        }
      }
    }
    const double gap_tol = 4.0 * std::numeric_limits<double>::epsilon() * hi;
    const double ystar = bracketed_root(gprime_fn, lo, hi, +1, guess, gap_tol);
    s.peaks.push_back({j, ystar});
    const RealMap at_star = eval_real(a, ystar);
    if (!(at_star.dz > 0.0)) continue;

    const double ya = bracketed_root(g_fn, lo, ystar, -1, h_prev ? h_prev->upper.omega : 0.5 * (lo + ystar), gap_tol);
    const double yb = bracketed_root(g_fn, ystar, hi, +1, h ? h->lower.omega : 0.5 * (ystar + hi), gap_tol);
    const Edge ea = make_edge(a, ya);
    const Edge eb = make_edge(a, yb);
    if (!(eb.x > ea.x)) continue;
    current.upper = ea;
    out.push_back(current);
    current = IntervalEdges{};
    current.lower = eb;
    current.gap_atom = static_cast<std::ptrdiff_t>(j + 1);
  }

  // Upper edge.
  {
    const double lo = t_hi;
    const double hi = t_hi * (1.0 + 2.0 * std::sqrt(ratio));
    const double guess = hint_last ? hint_last->upper.omega : 0.5 * (lo + hi);
    const double y = bracketed_root(g_fn, lo, hi, -1, guess, xtol);
    current.upper = make_edge(a, y);
    out.push_back(current);
  }

  std::sort(out.begin(), out.end(),
            [](const IntervalEdges& l, const IntervalEdges& r) { return l.lower.x < r.lower.x; });
  s.intervals = std::move(out);
  return s;
}

bool newton_solve(const Atoms& a, std::complex<double> target, std::complex<double>& w, MapValue& mv,
                  int max_iter) {
  const double scale = std::max(std::abs(target), a.scale);
  const double tol = 8.0 * std::numeric_limits<double>::epsilon() * scale;
  for (int it = 0; it < max_iter; ++it) {
    mv = eval_map(a, w);
    const std::complex<double> r = mv.z - target;
    if (!std::isfinite(r.real()) || !std::isfinite(r.imag())) return false;
    if (std::abs(r) <= tol) return true;
    std::complex<double> step = -r / mv.dz;
    double lam = 1.0;
    std::complex<double> wn = w + step;
    for (int h = 0; h < 60 && !(wn.imag() > 0.0); ++h) {
      lam *= 0.5;
      wn = w + lam * step;
    }
    if (!(wn.imag() > 0.0)) return false;
    const bool small = lam == 1.0 && std::abs(step) <= kNewtonAcceptStep * std::max(std::abs(w), 1e-3 * a.scale);
    w = wn;
    if (small) return true;
  }
  return false;
}

std::complex<double> solve_complex(const Atoms& a, std::complex<double> z) {
  if (a.empty()) return z;
  const double scale = std::max(std::abs(z), a.scale);
  std::complex<double> w = z;
  double beta = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  int used = 0;
  MapValue mv;
  for (int round = 0; round < 50; ++round) {
    const int budget = round == 0 ? 200 : 200;
    for (int it = 0; it < budget && used < 10000; ++it, ++used) {
      mv = eval_map(a, w);
      const std::complex<double> r = z - mv.z;
      const double nr = std::abs(r);
      if (nr <= 1e-6 * scale) break;
      if (nr > prev) beta = 0.5;
      prev = nr;
      std::complex<double> wn = w + beta * r;
      double lam = 1.0;
      for (int h = 0; h < 60 && !(wn.imag() > 0.0); ++h) {
        lam *= 0.5;
        wn = w + lam * beta * r;
      }
      w = wn;
    }
    std::complex<double> wt = w;
    if (newton_solve(a, z, wt, mv)) {
      const double res = std::abs(eval_map(a, wt).z - z);
      if (res <= 1e-10 * scale) return wt;
    }
    if (used >= 10000) break;
  }
  const double res = std::abs(eval_map(a, w).z - z);
  throw SolverError("MP fixed-point iteration did not converge", res / scale);
}

std::complex<double> edge_start(const Edge& e, double dx) {
  const double curv = std::abs(e.curvature);
  const double im = curv > 0.0 ? std::sqrt(2.0 * std::abs(dx) / curv) : std::sqrt(std::abs(dx));
  return {e.omega, im};
}

namespace {

std::complex<double> solve_with_offset(const Atoms& a, double x, double eta) {
  // Homotopy in the imaginary part, starting where the fixed-point map contracts quickly.
  double level = 1e-2 * std::max(a.scale, std::abs(x));
  std::complex<double> w = solve_complex(a, {x, level});
  while (level > eta) {
    level = std::max(level * 1e-2, eta);
    MapValue mv;
    std::complex<double> wt = w;
    if (newton_solve(a, {x, level}, wt, mv)) w = wt;
    else w = solve_complex(a, {x, level});
  }
  return w;
}

bool march_from_edge(const Atoms& a, const Edge& e, double x, std::complex<double>& w) {
  constexpr int kSteps = 24;
  const double dx = x - e.x;
  MapValue mv;
  std::complex<double> cur;
  double x_prev = e.x;
  for (int j = 1; j <= kSteps; ++j) {
    const double s = static_cast<double>(j) / kSteps;
    const double xj = e.x + dx * s * s;
    if (j == 1) {
      cur = edge_start(e, xj - e.x);
    } else {
      cur += (xj - x_prev) / mv.dz;
      if (!(cur.imag() > 0.0)) cur.imag(std::abs(cur.imag()) + 1e-12 * a.scale);
    }
    if (!newton_solve(a, xj, cur, mv)) return false;
    if (!(cur.imag() > 0.0)) return false;
    x_prev = xj;
  }
  w = cur;
  return true;
}

}  // namespace

std::complex<double> solve_real(const Atoms& a, const SupportStructure& s, double x,
                                const std::complex<double>* hint) {
  if (a.empty()) return {x, 0.0};
  const double xtol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(a.scale, std::abs(x));

  for (std::size_t i = 0; i < s.intervals.size(); ++i) {
    const IntervalEdges& iv = s.intervals[i];
    if (x == iv.lower.x) return {iv.lower.omega, 0.0};
    if (x == iv.upper.x) return {iv.upper.omega, 0.0};
    if (x > iv.lower.x && x < iv.upper.x) {
      // Newton can slide onto a real root of a decreasing branch of x(omega); those
      // have Im omega at rounding level, while the true root sits at least ~1e-8
      // relative above the axis even next to an edge.
      auto interior = [&](const std::complex<double>& w) {
        return w.imag() > 1e-10 * std::max(std::abs(w), a.scale);
      };
      std::complex<double> w;
      MapValue mv;
      if (hint && hint->imag() > 0.0) {
        w = *hint;
        if (newton_solve(a, x, w, mv) && interior(w)) return w;
      }
      const Edge& near = (x - iv.lower.x <= iv.upper.x - x) ? iv.lower : iv.upper;
      if (march_from_edge(a, near, x, w) && interior(w)) return w;
      const Edge& far = (&near == &iv.lower) ? iv.upper : iv.lower;
      if (march_from_edge(a, far, x, w) && interior(w)) return w;
      const std::complex<double> off = solve_with_offset(a, x, 1e-8 * a.scale);
      w = off;
      if (newton_solve(a, x, w, mv) && interior(w)) return w;
      return off;
    }
  }

  // Outside the support: the real branch with dx/domega > 0.
  auto f = [&](double y) {
    const RealMap r = eval_real(a, y);
    return std::pair<double, double>(r.z - x, r.dz);
  };
  double lo, hi;
  if (s.intervals.empty()) {
    return {x, 0.0};
  } else if (x > s.intervals.back().upper.x) {
    lo = s.intervals.back().upper.omega;
    hi = std::max(x, lo + std::abs(lo));
  } else if (x < s.intervals.front().lower.x) {
    const double yl = s.intervals.front().lower.omega;
    if (yl > 0.0 && x > 0.0) {
      lo = 0.0;
      hi = yl;
    } else {
      hi = std::min(yl, 0.0);
      lo = hi - (std::abs(x) + a.scale);
      for (int it = 0; it < 200 && eval_real(a, lo).z >= x; ++it) lo = 2.0 * lo - hi;
    }
  } else {
    std::size_t j = 0;
    while (j + 1 < s.intervals.size() && !(x > s.intervals[j].upper.x && x < s.intervals[j + 1].lower.x)) ++j;
    lo = s.intervals[j].upper.omega;
    hi = s.intervals[j + 1].lower.omega;
  }
  const double y = bracketed_root(f, lo, hi, -1, 0.5 * (lo + hi), xtol);
  return {y, 0.0};
}

std::complex<double> stieltjes_from_omega(std::complex<double> omega, std::complex<double> x, double c) {
  const std::complex<double> mbar = -1.0 / omega;
  return (mbar + (1.0 - c) / x) / c;
}

}  // namespace eigenshrink::detail
