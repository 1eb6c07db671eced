#include "eigenshrink/detail/levenberg_marquardt.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Cholesky>

#include "eigenshrink/errors.hpp"

namespace eigenshrink::detail {

LmResult levenberg_marquardt(LmProblem& problem, Eigen::VectorXd x0, const LmOptions& opts) {
  LmResult out;
  if (opts.lower_bound) x0 = x0.cwiseMax(*opts.lower_bound);
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd r = problem.residual(x);
  problem.accept();
  ++out.evaluations;
  const double m = static_cast<double>(r.size());
  double f = r.squaredNorm() / m;
  out.initial_objective = f;
  // Residuals below 1e-10 of the scale are beneath the accuracy of any model we fit.
  const double scale = x.cwiseAbs().maxCoeff();
  const double floor = opts.objective_floor ? *opts.objective_floor : 1e-20 * std::max(scale * scale, 1e-300);

  double mu = 1e-3;
  double nu = 2.0;
  Eigen::MatrixXd jac = problem.jacobian();
  ++out.jacobians;
  bool fresh = true;
  int stale_steps = 0;
  auto refresh = [&] {
    jac = problem.jacobian();
    ++out.jacobians;
    fresh = true;
    stale_steps = 0;
  };
  for (int it = 1; it <= opts.max_iterations; ++it) {
    if (f <= floor) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd a = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    const double dmax = std::max(a.diagonal().maxCoeff(), 1e-300);

    std::vector<Eigen::Index> free;
    free.reserve(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const bool pinned = opts.lower_bound && x[i] <= *opts.lower_bound && g[i] > 0.0;
      if (!pinned) free.push_back(i);
    }
    if (free.empty()) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd af = a(free, free);
    const Eigen::VectorXd gf = g(free);
    Eigen::VectorXd dscale = af.diagonal().cwiseMax(1e-12 * dmax);

    bool accepted = false;
    Eigen::VectorXd xn, rn;
    double fn = f;
    double rho = 0.0;
    for (int attempt = 0; attempt < 16; ++attempt) {
      Eigen::MatrixXd lhs = af;
      lhs.diagonal() += mu * dscale;
      const Eigen::VectorXd step = lhs.ldlt().solve(-gf);
      xn = x;
      for (std::size_t j = 0; j < free.size(); ++j) xn[free[j]] += step[static_cast<Eigen::Index>(j)];
      if (opts.lower_bound) xn = xn.cwiseMax(*opts.lower_bound);
      if (!step.allFinite()) {
        mu *= nu;
        nu *= 2.0;
        continue;
      }
      try {
        rn = problem.residual(xn);
        ++out.evaluations;
      } catch (const SolverError&) {
        mu *= nu;
        nu *= 2.0;
        continue;
      }
      fn = rn.squaredNorm() / m;
      if (fn < f) {
        // Gain ratio against the linear model, in units of m * f.
        const double predicted = -step.dot(gf) * 2.0 - step.dot(af * step);
        rho = predicted > 0.0 ? (f - fn) * m / predicted : 0.0;
        accepted = true;
        break;
      }
      mu *= nu;
      nu *= 2.0;
      if (mu > 1e16) break;
    }
    out.iterations = it;
    if (!accepted) {
      if (!fresh) {
        refresh();
        mu = 1e-3;
        nu = 2.0;
        continue;
      }
      out.converged = true;  // no descent direction left at this resolution
      break;
    }
    problem.accept();
    const double decrease = (f - fn) / f;
    const Eigen::VectorXd dx = xn - x;
    const Eigen::VectorXd dr = rn - r;
    x = std::move(xn);
    r = std::move(rn);
    f = fn;
    mu = std::max(mu * std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3)), 1e-12);
    nu = 2.0;
    if (decrease < opts.tolerance) {
      if (fresh) {
        out.converged = true;
        break;
      }
      refresh();
      continue;
    }
    const double dx2 = dx.squaredNorm();
    if (stale_steps < opts.broyden_steps && dx2 > 0.0) {
      jac += (dr - jac * dx) * (dx.transpose() / dx2);
      fresh = false;
      ++stale_steps;
    } else {
      refresh();
    }
  }
  out.x = std::move(x);
  out.objective = f;
  return out;
}

}  // namespace eigenshrink::detail
