#include "eigenshrink/quest.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "eigenshrink/detail/quest_state.hpp"
#include "eigenshrink/errors.hpp"

namespace eigenshrink {
namespace detail {

void cosine_nodes(double lo, double hi, std::size_t n, std::vector<double>& x) {
  thread_local std::unordered_map<std::size_t, std::vector<double>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    std::vector<double> u(n);
    const double step = std::numbers::pi / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k) u[k] = 0.5 * (1.0 - std::cos(step * static_cast<double>(k)));
    it = cache.emplace(n, std::move(u)).first;
  }
  const std::vector<double>& u = it->second;
  x.resize(n);
  const double width = hi - lo;
  for (std::size_t k = 0; k < n; ++k) x[k] = lo + width * u[k];
  x.front() = lo;
  x.back() = hi;
}

const std::vector<double>& cosine_weights(std::size_t n) {
  thread_local std::unordered_map<std::size_t, std::vector<double>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> s(n);
  const double step = std::numbers::pi / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) s[k] = std::sin(step * static_cast<double>(k));
  s.front() = 0.0;
  s.back() = 0.0;
  return cache.emplace(n, std::move(s)).first->second;
}

void solve_interval_grid(const Atoms& a, const SupportStructure& s, const IntervalEdges& iv, std::size_t n,
                         GridState& g) {
  cosine_nodes(iv.lower.x, iv.upper.x, n, g.x);
  g.omega.assign(n, {0.0, 0.0});
  g.dz.assign(n, {0.0, 0.0});
  g.omega.front() = {iv.lower.omega, 0.0};
  g.omega.back() = {iv.upper.omega, 0.0};

  auto solve_node = [&](std::size_t k, std::complex<double> guess) {
    MapValue mv;
    std::complex<double> w = guess;
    if (!(w.imag() > 0.0)) w.imag(1e-8 * std::max(a.scale, 1e-300));
    if (!newton_solve(a, g.x[k], w, mv) || !(w.imag() > 0.0)) {
      const std::complex<double> hint = g.omega[k];
      w = solve_real(a, s, g.x[k], hint.imag() > 0.0 ? &hint : nullptr);
      mv = eval_map(a, w);
    }
    g.omega[k] = w;
    g.dz[k] = mv.dz;
  };

  const std::size_t mid = n / 2;
  for (std::size_t k = 1; k <= mid && k + 1 < n; ++k) {
    const std::complex<double> guess =
        k == 1 ? edge_start(iv.lower, g.x[1] - iv.lower.x)
               : g.omega[k - 1] + (g.x[k] - g.x[k - 1]) / g.dz[k - 1];
    solve_node(k, guess);
  }
  for (std::size_t k = n - 2; k > mid; --k) {
    const std::complex<double> guess =
        k == n - 2 ? edge_start(iv.upper, iv.upper.x - g.x[k])
                   : g.omega[k + 1] + (g.x[k] - g.x[k + 1]) / g.dz[k + 1];
    solve_node(k, guess);
  }
}

double integrate_interval(const std::vector<double>& density, double lo, double hi, bool singular_lower,
                          std::vector<double>* cumulative) {
  const std::size_t n = density.size();
  const std::vector<double>& s = cosine_weights(n);
  const double half = 0.5 * (hi - lo);
  const double h2 = 0.5 * std::numbers::pi / static_cast<double>(n - 1);
  if (cumulative) cumulative->resize(n);
  double prev = density[0] * half * s[0];
  if (singular_lower) prev = density[1] * half * s[1];
  double acc = 0.0;
  if (cumulative) (*cumulative)[0] = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double cur = density[k] * half * s[k];
    acc += h2 * (prev + cur);
    if (cumulative) (*cumulative)[k] = acc;
    prev = cur;
  }
  return acc;
}

void finalize_cdf(std::vector<std::vector<double>>& cumulative, double raw_total, std::size_t zero_count,
                  std::size_t p) {
  const double mass0 = static_cast<double>(zero_count) / static_cast<double>(p);
  const double scale = raw_total > 0.0 ? (1.0 - mass0) / raw_total : 0.0;
  double offset = mass0;
  for (auto& cum : cumulative) {
    for (double& v : cum) v = offset + scale * v;
    offset = cum.back();
  }
  if (!cumulative.empty()) cumulative.back().back() = 1.0;
}

void smoothed_quantiles_from_nodes(const std::vector<std::vector<double>>& x,
                                   const std::vector<std::vector<double>>& cdf, std::size_t zero_count,
                                   std::size_t p, std::vector<double>& out) {
  out.assign(p, 0.0);
  const double dp = static_cast<double>(p);
  std::size_t b = zero_count;  // current bin, covering [b/p, (b+1)/p]
  double bin_hi = static_cast<double>(b + 1) / dp;
  for (std::size_t iv = 0; iv < x.size() && b < p; ++iv) {
    const auto& xs = x[iv];
    const auto& fs = cdf[iv];
    for (std::size_t k = 0; k + 1 < xs.size() && b < p; ++k) {
      double fa = fs[k];
      const double fb = fs[k + 1];
      if (!(fb > fa)) continue;
      const double xa = xs[k];
      const double slope = (xs[k + 1] - xa) / (fb - fa);
      while (b < p) {
        const double u2 = std::min(fb, bin_hi);
        const double x1 = xa + slope * (fa - fs[k]);
        const double x2 = xa + slope * (u2 - fs[k]);
        out[b] += 0.5 * (u2 - fa) * (x1 + x2);
        if (fb > bin_hi && b + 1 < p) {
          fa = bin_hi;
          ++b;
          bin_hi = static_cast<double>(b + 1) / dp;
        } else {
          break;
        }
      }
    }
  }
  for (std::size_t i = zero_count; i < p; ++i) out[i] *= dp;
  for (std::size_t i = 1; i < p; ++i) out[i] = std::max(out[i], out[i - 1]);
}

}  // namespace detail

SampleSpectralModel build_sample_spectral_model(const SpectrumVector& t, const ConcentrationContext& ctx,
                                                const QuestOptions& opts) {
  if (t.empty()) throw ValidationError("spectrum is empty");
  if (static_cast<std::int64_t>(t.size()) != ctx.p()) throw ValidationError("spectrum length does not match p");
  if (opts.grid_points < 3) throw ValidationError("grid_points must be at least 3");

  SampleSpectralModel model(t, ctx);
  auto st = std::make_shared<detail::ModelState>();
  st->atoms = detail::make_atoms(t.values(), ctx.n());
  st->c = ctx.c();
  st->structure = detail::locate_support(st->atoms);

  model.grid_points_ = opts.grid_points;
  model.support_.zero_count = st->structure.zero_count;
  model.support_.mass_at_zero = st->structure.mass_at_zero();
  std::vector<std::vector<double>> cumulative;
  double raw = 0.0;
  for (const auto& iv : st->structure.intervals) {
    model.support_.intervals.push_back({iv.lower.x, iv.upper.x});
    detail::GridState g;
    detail::solve_interval_grid(st->atoms, st->structure, iv, opts.grid_points, g);
    IntervalGrid out;
    out.x = g.x;
    out.density.resize(g.x.size());
    for (std::size_t k = 0; k < g.x.size(); ++k) out.density[k] = detail::density_from_omega(g.omega[k], st->c);
    if (iv.singular_lower) out.density[0] = out.density[1];
    std::vector<double> cum;
    raw += detail::integrate_interval(out.density, iv.lower.x, iv.upper.x, iv.singular_lower, &cum);
    cumulative.push_back(std::move(cum));
    model.grids_.push_back(std::move(out));
    st->grids.push_back(std::move(g));
  }
  detail::finalize_cdf(cumulative, raw, st->structure.zero_count, t.size());
  for (std::size_t i = 0; i < cumulative.size(); ++i) model.grids_[i].cdf = std::move(cumulative[i]);
  model.quadrature_mass_ = raw;
  model.state_ = std::move(st);
  return model;
}

double SampleSpectralModel::cdf(double x) const {
  if (x < 0.0) return 0.0;
  const double mass0 = support_.mass_at_zero;
  double below = mass0;
  for (const auto& g : grids_) {
    if (x < g.x.front()) return below;
    if (x < g.x.back()) {
      const auto it = std::upper_bound(g.x.begin(), g.x.end(), x);
      const std::size_t j = static_cast<std::size_t>(it - g.x.begin());
      const double w = (x - g.x[j - 1]) / (g.x[j] - g.x[j - 1]);
      return g.cdf[j - 1] + w * (g.cdf[j] - g.cdf[j - 1]);
    }
    below = g.cdf.back();
  }
  return 1.0;
}

double SampleSpectralModel::inverse_cdf(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) throw ValidationError("u must lie in [0, 1]");
  if (grids_.empty()) return 0.0;
  if (u < support_.mass_at_zero) return 0.0;
  if (u >= 1.0) return grids_.back().x.back();
  for (const auto& g : grids_) {
    if (u >= g.cdf.back()) continue;
    const auto it = std::upper_bound(g.cdf.begin(), g.cdf.end(), u);
    const std::size_t j = static_cast<std::size_t>(it - g.cdf.begin());
    if (j == 0) return g.x.front();
    const double w = (u - g.cdf[j - 1]) / (g.cdf[j] - g.cdf[j - 1]);
    return g.x[j - 1] + w * (g.x[j] - g.x[j - 1]);
  }
  return grids_.back().x.back();
}

double inverse_cdf(const SampleSpectralModel& model, double u) { return model.inverse_cdf(u); }

SpectrumVector SampleSpectralModel::smoothed_quantiles() const {
  const std::size_t p = t_.size();
  std::vector<std::vector<double>> xs, fs;
  for (const auto& g : grids_) {
    xs.push_back(g.x);
    fs.push_back(g.cdf);
  }
  std::vector<double> out;
  detail::smoothed_quantiles_from_nodes(xs, fs, support_.zero_count, p, out);
  return SpectrumVector(std::move(out));
}

SpectrumVector SampleSpectralModel::plain_quantiles() const {
  const std::size_t p = t_.size();
  std::vector<double> out(p);
  for (std::size_t i = 0; i < p; ++i) out[i] = inverse_cdf((static_cast<double>(i) + 0.5) / static_cast<double>(p));
  for (std::size_t i = 1; i < p; ++i) out[i] = std::max(out[i], out[i - 1]);
  return SpectrumVector(std::move(out));
}

std::complex<double> SampleSpectralModel::omega_at(double x) const {
  const auto& st = *state_;
  for (std::size_t i = 0; i < st.grids.size(); ++i) {
    const auto& g = st.grids[i];
    if (x > g.x.front() && x < g.x.back()) {
      auto it = std::lower_bound(g.x.begin(), g.x.end(), x);
      std::size_t j = static_cast<std::size_t>(it - g.x.begin());
      if (j > 0 && (j == g.x.size() || x - g.x[j - 1] < g.x[j] - x)) --j;
      j = std::clamp<std::size_t>(j, 1, g.x.size() - 2);
      const std::complex<double> hint = g.omega[j];
      return detail::solve_real(st.atoms, st.structure, x, &hint);
    }
  }
  return detail::solve_real(st.atoms, st.structure, x);
}

std::complex<double> SampleSpectralModel::stieltjes(double x) const {
  if (!std::isfinite(x) || x == 0.0) throw DomainError("x must be finite and nonzero");
  return detail::stieltjes_from_omega(omega_at(x), x, ctx_.c());
}

std::complex<double> SampleSpectralModel::companion_stieltjes(double x) const {
  if (!std::isfinite(x) || x == 0.0) throw DomainError("x must be finite and nonzero");
  return -1.0 / omega_at(x);
}

SpectrumVector quest_quantiles(const SpectrumVector& t, const ConcentrationContext& ctx, const QuestOptions& opts) {
  return build_sample_spectral_model(t, ctx, opts).smoothed_quantiles();
}

}  // namespace eigenshrink
