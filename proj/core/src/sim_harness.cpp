#include "eigenshrink/sim_harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/beta.hpp>

#include "eigenshrink/errors.hpp"
#include "eigenshrink/pca.hpp"

namespace eigenshrink {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Runs body(r) for r in [0, count) on `workers` threads. Each call writes only to
// its own slot, so results do not depend on scheduling.
template <class Body>
void parallel_for(std::size_t count, std::size_t workers, Body&& body) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t r = 0; r < count; ++r) body(r);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t r = next.fetch_add(1); r < count; r = next.fetch_add(1)) body(r);
    });
  }
  for (auto& t : pool) t.join();
}

struct Slot {
  std::vector<double> values;  // one per metric, fixed order per experiment
  std::vector<ReplicationError> errors;
};

// Runs the replications, then keeps those without errors (or fails the run).
template <class Body>
std::vector<Slot> run_replications(const SimulationDesign& design, const ExperimentOptions& opts, Body&& body,
                                   SimulationReport& report) {
  std::vector<Slot> slots(design.replications);
  parallel_for(design.replications, resolve_workers(opts.workers), [&](std::size_t r) {
    try {
      body(r, replication_seed(design.master_seed, r), slots[r]);
    } catch (const std::exception& e) {
      slots[r].errors.push_back({r, "simulation", e.what()});
    }
  });
  report.replication_count = design.replications;
  std::vector<Slot> kept;
  for (auto& s : slots) {
    if (s.errors.empty()) {
      kept.push_back(std::move(s));
      continue;
    }
    report.errors.insert(report.errors.end(), s.errors.begin(), s.errors.end());
  }
  if (!report.errors.empty() && !opts.skip_failed_replications) {
    const auto& e = report.errors.front();
    throw SolverError("replication " + std::to_string(e.replication) + " (" + e.estimator + "): " + e.message, 0.0);
  }
  if (kept.empty()) throw SolverError("every replication failed", 0.0);
  report.aggregated_count = kept.size();
  return kept;
}

double column_mean(const std::vector<Slot>& kept, std::size_t k) {
  double s = 0.0;
  for (const auto& slot : kept) s += slot.values[k];
  return s / static_cast<double>(kept.size());
}

// Records a failure of one estimator; the slot is then dropped as a whole.
template <class Fn>
double guarded(Slot& slot, std::size_t r, const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    slot.errors.push_back({r, name, e.what()});
    return 0.0;
  }
}

SpectrumVector sample_eigenvalues(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw SolverError("eigendecomposition failed", 0.0);
  std::vector<double> lam(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  const double mean = std::accumulate(lam.begin(), lam.end(), 0.0) / static_cast<double>(lam.size());
  const double thr = kZeroRelativeThreshold * std::max(mean, 0.0);
  for (double& v : lam) {
    if (v < thr) v = 0.0;
  }
  for (std::size_t i = 1; i < lam.size(); ++i) lam[i] = std::max(lam[i], lam[i - 1]);
  return SpectrumVector(std::move(lam));
}

Eigen::MatrixXd scaled_data(const SpectrumVector& tau, const ConcentrationContext& ctx, const VariateLaw& law,
                            std::uint64_t seed) {
  if (static_cast<std::int64_t>(tau.size()) != ctx.p()) throw ValidationError("spectrum length does not match p");
  Eigen::MatrixXd y = draw_variates(ctx.n(), ctx.p(), law, seed);
  for (Eigen::Index j = 0; j < y.cols(); ++j) y.col(j) *= std::sqrt(tau[static_cast<std::size_t>(j)]);
  return y;
}

Eigen::MatrixXd diagonal_sigma(const SpectrumVector& tau) {
  return Eigen::Map<const Eigen::VectorXd>(tau.vector().data(), static_cast<Eigen::Index>(tau.size())).asDiagonal();
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void finish(SimulationReport& report, const ExperimentOptions& opts,
            std::chrono::steady_clock::time_point start) {
  if (opts.record_elapsed) {
    report.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
}

const std::vector<std::size_t>* design_multiplicities(const SimulationDesign& design) {
  if (const auto* c = std::get_if<ClusteredSpectrum>(&design.spectrum)) return &c->multiplicities;
  return nullptr;
}

}  // namespace

std::string to_string(const VariateLaw& law) {
  if (const auto* t = std::get_if<StudentTLaw>(&law)) {
    std::ostringstream os;
    os << "student_t(" << t->df << ")";
    return os.str();
  }
  return "gaussian";
}

void SimulationDesign::validate() const {
  if (n < 2 || p < 2) throw ValidationError("design needs n, p >= 2");
  if (replications < 1) throw ValidationError("design needs at least one replication");
  if (const auto* t = std::get_if<StudentTLaw>(&law)) {
    if (!(t->df > 2.0) || !std::isfinite(t->df)) throw ValidationError("student t needs df > 2 for unit variance");
  }
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, BetaSpectrum>) {
          if (!(s.scale > 0.0) || !(s.alpha > 0.0) || !(s.beta > 0.0) || !(s.a_shift >= 0.0))
            throw ValidationError("beta spectrum needs scale, alpha, beta > 0 and a_shift >= 0");
        } else if constexpr (std::is_same_v<S, ExplicitSpectrum>) {
          if (static_cast<std::int64_t>(s.tau.size()) != p) throw ValidationError("explicit spectrum length differs from p");
        } else {
          if (s.locations.empty() || s.locations.size() != s.multiplicities.size())
            throw ValidationError("clustered spectrum needs matching locations and multiplicities");
          for (std::size_t j = 0; j < s.locations.size(); ++j) {
            if (!(s.locations[j] >= 0.0) || !std::isfinite(s.locations[j]))
              throw ValidationError("cluster locations must be finite and nonnegative");
            if (j > 0 && !(s.locations[j] > s.locations[j - 1]))
              throw ValidationError("cluster locations must be strictly increasing");
            if (s.multiplicities[j] == 0) throw ValidationError("cluster multiplicities must be positive");
          }
          const auto total = std::accumulate(s.multiplicities.begin(), s.multiplicities.end(), std::size_t{0});
          if (static_cast<std::int64_t>(total) != p) throw ValidationError("cluster multiplicities do not sum to p");
        }
      },
      spectrum);
}

SpectrumVector make_beta_spectrum(double a_shift, double scale, double alpha, double beta, std::size_t p) {
  if (!(scale > 0.0) || !(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(a_shift) || !std::isfinite(scale))
    throw ValidationError("beta spectrum needs finite a_shift, scale > 0, alpha > 0, beta > 0");
  if (p == 0) throw ValidationError("beta spectrum needs p >= 1");
  const boost::math::beta_distribution<double> dist(alpha, beta);
  std::vector<double> tau(p);
  for (std::size_t i = 0; i < p; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(p);
    tau[i] = a_shift + scale * boost::math::quantile(dist, u);
  }
  for (std::size_t i = 1; i < p; ++i) tau[i] = std::max(tau[i], tau[i - 1]);
  return SpectrumVector(std::move(tau));
}

std::vector<std::size_t> cluster_multiplicities(const std::vector<double>& fractions, std::size_t p) {
  if (fractions.empty()) throw ValidationError("no cluster fractions");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ValidationError("cluster fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("cluster fractions must sum to one");
  std::vector<std::size_t> k(fractions.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t j = 0; j < fractions.size(); ++j) {
    const double exact = fractions[j] * static_cast<double>(p);
    k[j] = static_cast<std::size_t>(std::floor(exact));
    used += k[j];
    rem.emplace_back(exact - static_cast<double>(k[j]), j);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < p; ++i, ++used) ++k[rem[i % rem.size()].second];
  for (std::size_t v : k) {
    if (v == 0) throw ValidationError("a cluster fraction rounds to zero multiplicity at this p");
  }
  return k;
}

SpectrumVector design_spectrum(const SimulationDesign& design) {
  design.validate();
  const auto p = static_cast<std::size_t>(design.p);
  return std::visit(
      [&](const auto& s) -> SpectrumVector {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, BetaSpectrum>) {
          return make_beta_spectrum(s.a_shift, s.scale, s.alpha, s.beta, p);
        } else if constexpr (std::is_same_v<S, ExplicitSpectrum>) {
          return s.tau;
        } else {
          return expand_clusters(s.locations, s.multiplicities);
        }
      },
      design.spectrum);
}

std::uint64_t replication_seed(std::uint64_t master, std::uint64_t r) {
  return splitmix64(splitmix64(master) ^ splitmix64(r + 0x632be59bd9b4e019ULL));
}

Eigen::MatrixXd draw_variates(std::int64_t n, std::int64_t p, const VariateLaw& law, std::uint64_t seed) {
  if (n < 1 || p < 1) throw ValidationError("variate matrix needs n, p >= 1");
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd x(n, p);
  // Filled row by row so that row k is observation k regardless of storage order.
  if (const auto* t = std::get_if<StudentTLaw>(&law)) {
    if (!(t->df > 2.0)) throw ValidationError("student t needs df > 2 for unit variance");
    std::student_t_distribution<double> dist(t->df);
    const double s = std::sqrt((t->df - 2.0) / t->df);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < p; ++j) x(i, j) = s * dist(rng);
  } else {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < p; ++j) x(i, j) = dist(rng);
  }
  return x;
}

SimulatedSample simulate_data(const SpectrumVector& tau, const ConcentrationContext& ctx, const VariateLaw& law,
                              std::uint64_t seed) {
  Eigen::MatrixXd y = scaled_data(tau, ctx, law, seed);
  Eigen::MatrixXd s = sample_covariance(y);
  Eigensystem eig = eigensystem_from_covariance(s, ctx.n());
  return {std::move(y), std::move(s), std::move(eig)};
}

Eigensystem simulate_sample(const SpectrumVector& tau, const ConcentrationContext& ctx, const VariateLaw& law,
                            std::uint64_t seed) {
  return simulate_data(tau, ctx, law, seed).eig;
}

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

double SimulationReport::pca(const std::string& estimator, double q) const {
  for (const auto& c : pca_rmse) {
    if (c.estimator == estimator && std::abs(c.q - q) < 1e-12) return c.rmse;
  }
  throw ValidationError("no PCA cell for " + estimator);
}

SimulationReport run_eigenvalue_experiment(const SimulationDesign& design, const std::vector<std::string>& estimators,
                                           const ExperimentOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  design.validate();
  if (estimators.empty()) throw ValidationError("no estimators requested");
  const auto* mult = design_multiplicities(design);
  for (const auto& e : estimators) {
    const bool known = e == "sample" || e == "lawley" || e == "quest" || e == "truth";
    const bool clustered = e == "quest_clustered" || e == "traditional";
    if (!known && !clustered) throw ValidationError("unknown eigenvalue estimator: " + e);
    if (clustered && mult == nullptr) throw ValidationError(e + " needs a clustered design");
  }
  const SpectrumVector tau = design_spectrum(design);
  const ConcentrationContext ctx = design.context();

  SimulationReport report;
  report.experiment = "eigenvalue";
  report.design = design;
  auto kept = run_replications(
      design, opts,
      [&](std::size_t r, std::uint64_t seed, Slot& slot) {
        const SpectrumVector lambda = sample_eigenvalues(sample_covariance(scaled_data(tau, ctx, design.law, seed)));
        for (const auto& e : estimators) {
          slot.values.push_back(guarded(slot, r, e, [&] {
            if (e == "truth") return mean_squared_difference(tau, tau);
            if (e == "sample") return mean_squared_difference(lambda, tau);
            if (e == "lawley") return mean_squared_difference(lawley_corrected(lambda, ctx), tau);
            if (e == "quest") return mean_squared_difference(estimate_spectrum(lambda, ctx, opts.estimation).tau_hat, tau);
            if (e == "traditional")
              return mean_squared_difference(expand_clusters(block_means(lambda, *mult), *mult), tau);
            return mean_squared_difference(estimate_clustered_spectrum(lambda, ctx, *mult, opts.estimation).tau_hat, tau);
          }));
        }
      },
      report);
  for (std::size_t k = 0; k < estimators.size(); ++k) report.per_estimator_mse[estimators[k]] = column_mean(kept, k);
  finish(report, opts, start);
  return report;
}

SimulationReport run_shrinkage_experiment(const SimulationDesign& design, const ExperimentOptions& opts,
                                          const std::vector<std::string>& estimators) {
  const auto start = std::chrono::steady_clock::now();
  design.validate();
  for (const auto& e : estimators) {
    if (e != "nonlinear" && e != "oracle" && e != "linear" && e != "sample" && e != "finite_sample_optimal")
      throw ValidationError("unknown shrinkage estimator: " + e);
  }
  const auto has = [&](const char* name) { return std::find(estimators.begin(), estimators.end(), name) != estimators.end(); };
  const bool with_gap = has("nonlinear") && has("oracle");
  const SpectrumVector tau = design_spectrum(design);
  const ConcentrationContext ctx = design.context();
  const Eigen::MatrixXd sigma = diagonal_sigma(tau);

  // Column layout: linear benchmark, then each estimator, then the oracle gap.
  SimulationReport report;
  report.experiment = "shrinkage";
  report.design = design;
  auto kept = run_replications(
      design, opts,
      [&](std::size_t r, std::uint64_t seed, Slot& slot) {
        const SimulatedSample sim = simulate_data(tau, ctx, design.law, seed);
        const Eigen::VectorXd dstar = finite_sample_optimal_d(sim.eig.eigenvectors, sigma);
        const Eigen::MatrixXd sstar = sim.eig.eigenvectors * dstar.asDiagonal() * sim.eig.eigenvectors.transpose();
        const Eigen::MatrixXd lin = linear_shrinkage(sim.data).matrix;
        slot.values.push_back(squared_frobenius_loss(lin, sstar));
        Eigen::MatrixXd nonlinear, oracle;
        for (const auto& e : estimators) {
          slot.values.push_back(guarded(slot, r, e, [&] {
            if (e == "linear") return squared_frobenius_loss(lin, sstar);
            if (e == "sample") return squared_frobenius_loss(sim.sample_cov, sstar);
            if (e == "finite_sample_optimal") return squared_frobenius_loss(sstar, sstar);
            if (e == "oracle") {
              oracle = oracle_shrinkage(sim.eig, tau, opts.estimation.quest).matrix;
              return squared_frobenius_loss(oracle, sstar);
            }
            const auto fit = estimate_spectrum(sim.eig.eigenvalues, ctx, opts.estimation);
            nonlinear = nonlinear_shrinkage(sim.eig, fit.tau_hat, opts.estimation.quest).matrix;
            return squared_frobenius_loss(nonlinear, sstar);
          }));
        }
        if (with_gap && slot.errors.empty()) slot.values.push_back(squared_frobenius_loss(nonlinear, oracle));
      },
      report);
  const double benchmark = column_mean(kept, 0);
  for (std::size_t k = 0; k < estimators.size(); ++k) {
    const double m = column_mean(kept, k + 1);
    report.mean_loss[estimators[k]] = m;
    report.prial[estimators[k]] = estimators[k] == "linear" ? 0.0 : 100.0 * (1.0 - m / benchmark);
  }
  if (with_gap) report.mean_loss["nonlinear_to_oracle"] = column_mean(kept, estimators.size() + 1);
  finish(report, opts, start);
  return report;
}

SimulationReport run_pca_experiment(const SimulationDesign& design, const std::vector<double>& targets,
                                    const ExperimentOptions& opts, const std::vector<std::string>& bases) {
  const auto start = std::chrono::steady_clock::now();
  design.validate();
  if (targets.empty()) throw ValidationError("no PCA targets");
  for (double q : targets) {
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("PCA targets must lie in (0, 1)");
  }
  for (const auto& b : bases) {
    if (b != "sample" && b != "population" && b != "shrinkage" && b != "finite_sample_optimal")
      throw ValidationError("unknown PCA basis: " + b);
  }
  const SpectrumVector tau = design_spectrum(design);
  const ConcentrationContext ctx = design.context();
  const Eigen::MatrixXd sigma = diagonal_sigma(tau);
  const std::size_t nq = targets.size();

  // Per replication: true k(q) for each q, then (k_tilde per q) for each basis.
  SimulationReport report;
  report.experiment = "pca";
  report.design = design;
  auto kept = run_replications(
      design, opts,
      [&](std::size_t r, std::uint64_t seed, Slot& slot) {
        const SimulatedSample sim = simulate_data(tau, ctx, design.law, seed);
        const std::vector<double> dstar = to_std(finite_sample_optimal_d(sim.eig.eigenvectors, sigma));
        const auto truth = explained_fraction_curve(dstar);
        for (double q : targets) slot.values.push_back(static_cast<double>(components_to_retain(truth, q)));
        for (const auto& b : bases) {
          std::vector<double> curve;
          guarded(slot, r, b, [&] {
            if (b == "sample") curve = explained_fraction_curve(sim.eig.eigenvalues.vector(), true);
            else if (b == "population") curve = explained_fraction_curve(tau.vector());
            else if (b == "finite_sample_optimal") curve = truth;
            else {
              const auto fit = estimate_spectrum(sim.eig.eigenvalues, ctx, opts.estimation);
              curve = explained_fraction_curve(to_std(nonlinear_shrinkage(sim.eig, fit.tau_hat, opts.estimation.quest).d));
            }
            return 0.0;
          });
          for (double q : targets)
            slot.values.push_back(curve.empty() ? 0.0 : static_cast<double>(components_to_retain(curve, q)));
        }
      },
      report);
  for (std::size_t bi = 0; bi < bases.size(); ++bi) {
    for (std::size_t qi = 0; qi < nq; ++qi) {
      double sq = 0.0, sk = 0.0, st = 0.0;
      for (const auto& slot : kept) {
        const double k_true = slot.values[qi];
        const double k_est = slot.values[nq * (bi + 1) + qi];
        sq += (k_est - k_true) * (k_est - k_true);
        sk += k_est;
        st += k_true;
      }
      const double m = static_cast<double>(kept.size());
      report.pca_rmse.push_back({bases[bi], targets[qi], std::sqrt(sq / m), sk / m, st / m});
    }
  }
  finish(report, opts, start);
  return report;
}

}  // namespace eigenshrink
