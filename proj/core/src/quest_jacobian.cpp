#include <algorithm>
#include <cmath>

#include "eigenshrink/detail/quest_state.hpp"
#include "eigenshrink/errors.hpp"
#include "eigenshrink/quest.hpp"

namespace eigenshrink {
namespace {

Eigen::VectorXd to_eigen(const SpectrumVector& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.vector().data(), static_cast<Eigen::Index>(v.size()));
}

SpectrumVector shifted(const SpectrumVector& t, std::size_t start, std::size_t size, double h) {
  std::vector<double> v = t.vector();
  for (std::size_t i = start; i < start + size; ++i) v[i] = std::max(0.0, v[i] + h);
  return SpectrumVector::from_unsorted(std::move(v));
}

double group_step(const SpectrumVector& t, std::size_t start, double rel, double mean) {
  return rel * std::max(t[start], mean);
}

// Quantiles of the law at perturbed atoms, warm-started from the base grid. Returns false
// when the support changes shape and the caller should solve from scratch.
bool perturbed_quantiles(const detail::ModelState& base, const std::vector<std::vector<std::complex<double>>>& d2,
                         std::size_t atom, double new_value, std::size_t n_grid, std::vector<double>& out) {
  using namespace detail;
  const Atoms& a0 = base.atoms;
  Atoms pa = a0;
  pa.value[atom] = new_value;
  pa.cbrt_mass[atom] = std::cbrt(pa.weight[atom] * new_value * new_value);
  // Keep atoms sorted when the step passes a close neighbour.
  for (std::size_t j = atom; j + 1 < pa.value.size() && pa.value[j] > pa.value[j + 1]; ++j) {
    std::swap(pa.value[j], pa.value[j + 1]);
    std::swap(pa.weight[j], pa.weight[j + 1]);
    std::swap(pa.cbrt_mass[j], pa.cbrt_mass[j + 1]);
  }
  for (std::size_t j = atom; j > 0 && pa.value[j] < pa.value[j - 1]; --j) {
    std::swap(pa.value[j], pa.value[j - 1]);
    std::swap(pa.weight[j], pa.weight[j - 1]);
    std::swap(pa.cbrt_mass[j], pa.cbrt_mass[j - 1]);
  }
  pa.scale = pa.value.back();
  const SupportStructure ps = locate_support(pa, &base.structure);
  if (ps.intervals.size() != base.structure.intervals.size()) return false;

  const double v_old = a0.value[atom];
  const double w_n = a0.weight[atom] * a0.inv_n;
  std::vector<std::vector<double>> xs(ps.intervals.size());
  std::vector<std::vector<double>> cum(ps.intervals.size());
  std::vector<double> density(n_grid);
  double raw = 0.0;
  for (std::size_t i = 0; i < ps.intervals.size(); ++i) {
    const IntervalEdges& iv = ps.intervals[i];
    const IntervalEdges& iv0 = base.structure.intervals[i];
    if (iv.singular_lower != iv0.singular_lower) return false;
    const GridState& g = base.grids[i];
    cosine_nodes(iv.lower.x, iv.upper.x, n_grid, xs[i]);
    density.front() = 0.0;
    density.back() = 0.0;
    const double e_lo = iv0.lower.omega;
    const double e_hi = iv0.upper.omega;
    for (std::size_t k = 1; k + 1 < n_grid; ++k) {
      const std::complex<double> w = g.omega[k];
      const std::complex<double> q_old = v_old / (w - v_old);
      const std::complex<double> q_new = new_value / (w - new_value);
      const std::complex<double> dz = g.dz[k] - w_n * (q_new * q_new - q_old * q_old);
      const std::complex<double> r = g.x[k] + w_n * w * (q_new - q_old) - xs[i][k];
      const std::complex<double> delta = -r / dz;
      const double dist2 = std::min(std::norm(w - e_lo), std::norm(w - e_hi));
      std::complex<double> wp;
      if (std::norm(delta) <= 1e-6 * dist2) {
        wp = w + delta - 0.5 * d2[i][k] * delta * delta / dz;
      } else {
        wp = w + delta;
        if (!(wp.imag() > 0.0)) wp = w;
        MapValue mv;
        if (!newton_solve(pa, xs[i][k], wp, mv) || !(wp.imag() > 0.0)) {
          const std::complex<double> hint = w;
          wp = solve_real(pa, ps, xs[i][k], &hint);
        }
      }
      density[k] = density_from_omega(wp, base.c);
    }
    if (iv.singular_lower) density[0] = density[1];
    raw += integrate_interval(density, iv.lower.x, iv.upper.x, iv.singular_lower, &cum[i]);
  }
  finalize_cdf(cum, raw, ps.zero_count, a0.p);
  smoothed_quantiles_from_nodes(xs, cum, ps.zero_count, a0.p, out);
  return true;
}

}  // namespace

CoordinateGroups coordinate_groups(const SpectrumVector& t) {
  CoordinateGroups g;
  const std::size_t zeros = t.zero_count();
  std::size_t i = 0;
  if (zeros > 0) {
    g.start.push_back(0);
    g.size.push_back(zeros);
    i = zeros;
  }
  while (i < t.size()) {
    std::size_t j = i + 1;
    while (j < t.size() && t[j] == t[i]) ++j;
    g.start.push_back(i);
    g.size.push_back(j - i);
    i = j;
  }
  return g;
}

Eigen::MatrixXd quest_group_jacobian(const SampleSpectralModel& model, const CoordinateGroups& groups,
                                     const JacobianOptions& opts) {
  const SpectrumVector& t = model.population();
  const ConcentrationContext& ctx = model.context();
  const std::size_t p = t.size();
  const double mean = t.mean();
  QuestOptions qopts = opts.quest;
  qopts.grid_points = model.grid_points();

  const Eigen::VectorXd q0 = to_eigen(model.smoothed_quantiles());
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(groups.start.size()));

  const auto& st = model.state();
  std::vector<std::vector<std::complex<double>>> d2;
  if (opts.mode == JacobianMode::forward) {
    d2.resize(st.grids.size());
    for (std::size_t i = 0; i < st.grids.size(); ++i) {
      const auto& g = st.grids[i];
      d2[i].resize(g.omega.size());
      for (std::size_t k = 1; k + 1 < g.omega.size(); ++k) d2[i][k] = detail::eval_map_d2(st.atoms, g.omega[k]);
    }
  }

  std::vector<double> buf;
  const double thr = t.zero_threshold();
  for (std::size_t gi = 0; gi < groups.start.size(); ++gi) {
    const std::size_t s = groups.start[gi];
    const std::size_t sz = groups.size[gi];
    const double h = group_step(t, s, opts.relative_step, mean);
    auto col = jac.col(static_cast<Eigen::Index>(gi));

    if (opts.mode == JacobianMode::central && t[s] - h >= 0.0) {
      const Eigen::VectorXd qp = to_eigen(quest_quantiles(shifted(t, s, sz, h), ctx, qopts));
      const Eigen::VectorXd qm = to_eigen(quest_quantiles(shifted(t, s, sz, -h), ctx, qopts));
      col = (qp - qm) / (2.0 * h);
      continue;
    }
    if (opts.mode == JacobianMode::forward && t[s] >= thr && thr > 0.0) {
      const auto& vals = st.atoms.value;
      const auto it = std::lower_bound(vals.begin(), vals.end(), t[s]);
      if (it != vals.end() && *it == t[s]) {
        const auto atom = static_cast<std::size_t>(it - vals.begin());
        if (perturbed_quantiles(st, d2, atom, t[s] + h, model.grid_points(), buf)) {
          col = (Eigen::Map<const Eigen::VectorXd>(buf.data(), static_cast<Eigen::Index>(p)) - q0) / h;
          continue;
        }
      }
    }
    const Eigen::VectorXd qp = to_eigen(quest_quantiles(shifted(t, s, sz, h), ctx, qopts));
    col = (qp - q0) / h;
  }
  return jac;
}

Eigen::MatrixXd quest_jacobian(const SampleSpectralModel& model, const JacobianOptions& opts) {
  const SpectrumVector& t = model.population();
  const CoordinateGroups groups = coordinate_groups(t);
  const Eigen::MatrixXd gj = quest_group_jacobian(model, groups, opts);
  Eigen::MatrixXd jac(gj.rows(), static_cast<Eigen::Index>(t.size()));
  for (std::size_t gi = 0; gi < groups.start.size(); ++gi) {
    for (std::size_t i = groups.start[gi]; i < groups.start[gi] + groups.size[gi]; ++i)
      jac.col(static_cast<Eigen::Index>(i)) = gj.col(static_cast<Eigen::Index>(gi)) / static_cast<double>(groups.size[gi]);
  }
  return jac;
}

Eigen::MatrixXd quest_jacobian(const SpectrumVector& t, const ConcentrationContext& ctx, const JacobianOptions& opts) {
  return quest_jacobian(build_sample_spectral_model(t, ctx, opts.quest), opts);
}

}  // namespace eigenshrink
