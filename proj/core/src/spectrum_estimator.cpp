#include "eigenshrink/spectrum_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "eigenshrink/detail/levenberg_marquardt.hpp"
#include "eigenshrink/errors.hpp"

namespace eigenshrink {
namespace {

// Fits with an RMS residual below 1e-8 of the largest eigenvalue are already beneath the
// accuracy of the quadrature.
constexpr double kFloorRelative = 1e-16;

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void check_inputs(const SpectrumVector& lambda, const ConcentrationContext& ctx) {
  if (lambda.empty()) throw ValidationError("sample spectrum is empty");
  if (static_cast<std::int64_t>(lambda.size()) != ctx.p())
    throw ValidationError("sample spectrum length does not match p");
}

void check_options(const EstimationOptions& opts) {
  if (opts.num_starts < 1) throw ValidationError("num_starts must be positive");
  if (opts.max_iterations < 1) throw ValidationError("max_iterations must be positive");
  if (!(opts.objective_tolerance > 0.0)) throw ValidationError("objective_tolerance must be positive");
  if (opts.broyden_steps < 0) throw ValidationError("broyden_steps must be nonnegative");
  if (!(opts.lower_bound >= 0.0)) throw ValidationError("lower_bound must be nonnegative");
}

class FreeSpectrumProblem final : public detail::LmProblem {
 public:
  FreeSpectrumProblem(const SpectrumVector& lambda, const ConcentrationContext& ctx, const EstimationOptions& opts)
      : lambda_(to_eigen(lambda.vector())), ctx_(ctx), opts_(opts) {}

  Eigen::VectorXd residual(Eigen::VectorXd& x) override {
    std::sort(x.data(), x.data() + x.size());
    trial_.emplace(build_sample_spectral_model(SpectrumVector(to_std(x)), ctx_, opts_.quest));
    return to_eigen(trial_->smoothed_quantiles().vector()) - lambda_;
  }
  void accept() override { current_ = trial_; }
  Eigen::MatrixXd jacobian() override {
    JacobianOptions jo;
    jo.mode = opts_.jacobian;
    jo.quest = opts_.quest;
    return quest_jacobian(*current_, jo);
  }

 private:
  Eigen::VectorXd lambda_;
  ConcentrationContext ctx_;
  EstimationOptions opts_;
  std::optional<SampleSpectralModel> trial_, current_;
};

// gamma_1 = exp(s_1), gamma_{j+1} = gamma_j + exp(s_{j+1}).
std::vector<double> gamma_from_s(const Eigen::VectorXd& s) {
  std::vector<double> g(static_cast<std::size_t>(s.size()));
  double acc = 0.0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    acc += std::exp(s[j]);
    g[static_cast<std::size_t>(j)] = acc;
  }
  return g;
}

Eigen::VectorXd s_from_gamma(const std::vector<double>& g) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(g.size()));
  double prev = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    s[static_cast<Eigen::Index>(j)] = std::log(g[j] - prev);
    prev = g[j];
  }
  return s;
}

class ClusteredProblem final : public detail::LmProblem {
 public:
  ClusteredProblem(const SpectrumVector& lambda, const ConcentrationContext& ctx,
                   const std::vector<std::size_t>& mult, const EstimationOptions& opts)
      : lambda_(to_eigen(lambda.vector())), ctx_(ctx), mult_(mult), opts_(opts) {}

  Eigen::VectorXd residual(Eigen::VectorXd& s) override {
    trial_s_ = s;
    trial_.emplace(build_sample_spectral_model(expand_clusters(gamma_from_s(s), mult_), ctx_, opts_.quest));
    return to_eigen(trial_->smoothed_quantiles().vector()) - lambda_;
  }
  void accept() override {
    current_ = trial_;
    current_s_ = trial_s_;
  }
  Eigen::MatrixXd jacobian() override {
    JacobianOptions jo;
    jo.mode = opts_.jacobian;
    jo.quest = opts_.quest;
    const CoordinateGroups groups = coordinate_groups(current_->population());
    const Eigen::MatrixXd jg = quest_group_jacobian(*current_, groups, jo);
    // Map groups back to clusters through their first coordinate.
    const auto k = static_cast<Eigen::Index>(mult_.size());
    Eigen::MatrixXd jgamma = Eigen::MatrixXd::Zero(jg.rows(), k);
    std::vector<std::size_t> first(mult_.size());
    std::size_t pos = 0;
    for (std::size_t j = 0; j < mult_.size(); ++j) {
      first[j] = pos;
      pos += mult_[j];
    }
    for (std::size_t gi = 0; gi < groups.start.size(); ++gi) {
      const std::size_t start = groups.start[gi];
      // Groups either coincide with clusters or (below the zero threshold) merge leading ones.
      for (std::size_t j = 0; j < mult_.size(); ++j) {
        if (first[j] >= start && first[j] < start + groups.size[gi]) {
          const double share = static_cast<double>(mult_[j]) / static_cast<double>(groups.size[gi]);
          jgamma.col(static_cast<Eigen::Index>(j)) += share * jg.col(static_cast<Eigen::Index>(gi));
        }
      }
    }
    Eigen::MatrixXd js = Eigen::MatrixXd::Zero(jg.rows(), k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const double e = std::exp(current_s_[j]);
      for (Eigen::Index l = j; l < k; ++l) js.col(j) += e * jgamma.col(l);
    }
    return js;
  }

 private:
  Eigen::VectorXd lambda_;
  ConcentrationContext ctx_;
  std::vector<std::size_t> mult_;
  EstimationOptions opts_;
  std::optional<SampleSpectralModel> trial_, current_;
  Eigen::VectorXd trial_s_, current_s_;
};

// Positive entries linearly interpolated to length p, rescaled to the mean of the full vector.
std::vector<double> stretch_positive_part(const std::vector<double>& v) {
  const std::size_t p = v.size();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(p);
  const double thr = kZeroRelativeThreshold * mean;
  std::vector<double> pos;
  for (double x : v)
    if (x >= thr && x > 0.0) pos.push_back(x);
  std::sort(pos.begin(), pos.end());
  std::vector<double> out(p);
  if (pos.size() == 1 || p == 1) {
    std::fill(out.begin(), out.end(), mean);
    return out;
  }
  const double m1 = static_cast<double>(pos.size() - 1);
  for (std::size_t i = 0; i < p; ++i) {
    const double s = static_cast<double>(i) * m1 / static_cast<double>(p - 1);
    const auto j = std::min(static_cast<std::size_t>(s), pos.size() - 2);
    const double w = s - static_cast<double>(j);
    out[i] = (1.0 - w) * pos[j] + w * pos[j + 1];
  }
  const double omean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(p);
  for (double& x : out) x *= mean / omean;
  return out;
}

// Spread blocks of exactly tied values by +-0.05% so coordinates can separate.
// Tied coordinates have identical derivatives and would otherwise move in lockstep.
void spread_ties(std::vector<double>& v) {
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i + 1;
    while (j < v.size() && v[j] == v[i]) ++j;
    const std::size_t g = j - i;
    if (g > 1 && v[i] > 0.0) {
      for (std::size_t k = 0; k < g; ++k) {
        const double off = (static_cast<double>(k) - 0.5 * static_cast<double>(g - 1)) / static_cast<double>(g - 1);
        v[i + k] = v[i] * (1.0 + 1e-3 * off);
      }
    }
    i = j;
  }
}

}  // namespace

std::string to_string(EstimationStatus s) {
  return s == EstimationStatus::converged ? "converged" : "max_iterations";
}

std::vector<double> isotonic_regression(const std::vector<double>& y) {
  std::vector<double> level;
  std::vector<std::size_t> count;
  for (double v : y) {
    level.push_back(v);
    count.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const std::size_t c1 = count[count.size() - 2], c2 = count.back();
      const double merged = (level[level.size() - 2] * static_cast<double>(c1) + level.back() * static_cast<double>(c2)) /
                            static_cast<double>(c1 + c2);
      level.pop_back();
      count.pop_back();
      level.back() = merged;
      count.back() = c1 + c2;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (std::size_t b = 0; b < level.size(); ++b) out.insert(out.end(), count[b], level[b]);
  return out;
}

SpectrumVector lawley_corrected(const SpectrumVector& lambda, const ConcentrationContext& ctx) {
  check_inputs(lambda, ctx);
  if (lambda.max() <= 0.0) return lambda;
  const std::size_t p = lambda.size();
  const double n = static_cast<double>(ctx.n());
  const double tie = 1e-10 * lambda.mean();
  std::vector<double> corrected(p);
  for (std::size_t i = 0; i < p; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (j == i) continue;
      const double d = lambda[i] - lambda[j];
      if (std::abs(d) < tie) continue;  // tied eigenvalues are pooled
      s += lambda[j] / d;
    }
    corrected[i] = lambda[i] - lambda[i] / n * s;
  }
  std::vector<double> iso = isotonic_regression(corrected);
  for (double& v : iso) v = std::max(v, 0.0);
  return SpectrumVector(std::move(iso));
}

double quest_objective(const SpectrumVector& t, const SpectrumVector& lambda, const ConcentrationContext& ctx,
                       const QuestOptions& opts) {
  if (t.size() != lambda.size()) throw ValidationError("spectra differ in length");
  return mean_squared_difference(quest_quantiles(t, ctx, opts), lambda);
}

EstimationResult estimate_spectrum(const SpectrumVector& lambda, const ConcentrationContext& ctx,
                                   const EstimationOptions& opts) {
  check_inputs(lambda, ctx);
  check_options(opts);
  if (lambda.max() <= 0.0) {
    EstimationResult zero;
    zero.tau_hat = lambda;
    return zero;
  }
  const std::size_t p = lambda.size();
  const double mean = lambda.mean();
  const bool has_zero = lambda.zero_count() > 0;

  std::vector<std::pair<std::string, std::vector<double>>> starts;
  {
    std::vector<double> a = lambda.vector();
    if (has_zero) a = stretch_positive_part(a);
    spread_ties(a);
    starts.emplace_back("sample", std::move(a));
  }
  if (opts.num_starts >= 2) {
    std::vector<double> b = lawley_corrected(lambda, ctx).vector();
    if (SpectrumVector(b).zero_count() > 0) b = stretch_positive_part(b);
    spread_ties(b);
    starts.emplace_back("lawley", std::move(b));
  }
  if (opts.num_starts >= 3) starts.emplace_back("constant", std::vector<double>(p, mean));

  detail::LmOptions lo;
  lo.max_iterations = opts.max_iterations;
  lo.tolerance = opts.objective_tolerance;
  lo.broyden_steps = opts.broyden_steps;
  lo.lower_bound = opts.lower_bound;
  lo.objective_floor = kFloorRelative * lambda.max() * lambda.max();

  EstimationResult best;
  bool have = false;
  std::vector<StartRecord> records;
  for (std::size_t si = 0; si < starts.size(); ++si) {
    StartRecord rec;
    rec.name = starts[si].first;
    bool duplicate = false;
    for (std::size_t sj = 0; sj < si; ++sj) duplicate = duplicate || starts[sj].second == starts[si].second;
    if (duplicate) {
      rec.failed = true;
      records.push_back(rec);
      continue;
    }
    try {
      FreeSpectrumProblem problem(lambda, ctx, opts);
      const detail::LmResult r = detail::levenberg_marquardt(problem, to_eigen(starts[si].second), lo);
      rec.initial_objective = r.initial_objective;
      rec.final_objective = r.objective;
      rec.iterations = r.iterations;
      if (!have || r.objective < best.objective) {
        std::vector<double> x = to_std(r.x);
        std::sort(x.begin(), x.end());
        best.tau_hat = SpectrumVector(std::move(x));
        best.objective = r.objective;
        best.iterations = r.iterations;
        best.status = r.converged ? EstimationStatus::converged : EstimationStatus::max_iterations;
        best.best_start = si;
        have = true;
      }
    } catch (const SolverError&) {
      rec.failed = true;
    }
    records.push_back(rec);
  }
  if (!have) throw SolverError("spectrum estimation failed from every start", 0.0);
  best.starts = std::move(records);
  return best;
}

std::vector<double> block_means(const SpectrumVector& lambda, const std::vector<std::size_t>& multiplicities) {
  std::vector<double> out;
  std::size_t pos = 0;
  for (std::size_t m : multiplicities) {
    if (m == 0) throw ValidationError("cluster multiplicities must be positive");
    if (pos + m > lambda.size()) throw ValidationError("multiplicities exceed p");
    out.push_back(std::accumulate(lambda.begin() + static_cast<std::ptrdiff_t>(pos),
                                  lambda.begin() + static_cast<std::ptrdiff_t>(pos + m), 0.0) /
                  static_cast<double>(m));
    pos += m;
  }
  if (pos != lambda.size()) throw ValidationError("multiplicities do not sum to p");
  return out;
}

SpectrumVector expand_clusters(const std::vector<double>& gamma, const std::vector<std::size_t>& multiplicities) {
  if (gamma.size() != multiplicities.size()) throw ValidationError("gamma and multiplicities differ in length");
  std::vector<double> v;
  for (std::size_t j = 0; j < gamma.size(); ++j) v.insert(v.end(), multiplicities[j], gamma[j]);
  return SpectrumVector(std::move(v));
}

ClusteredEstimationResult estimate_clustered_spectrum(const SpectrumVector& lambda, const ConcentrationContext& ctx,
                                                      const std::vector<std::size_t>& multiplicities,
                                                      const EstimationOptions& opts) {
  check_inputs(lambda, ctx);
  if (multiplicities.empty()) throw ValidationError("no clusters given");
  if (opts.max_iterations < 1) throw ValidationError("max_iterations must be positive");
  if (!(opts.objective_tolerance > 0.0)) throw ValidationError("objective_tolerance must be positive");
  if (lambda.max() <= 0.0) throw DomainError("cluster locations must increase strictly; sample spectrum is zero");
  const double mean = lambda.mean();
  auto make_increasing = [&](std::vector<double> g) {
    g[0] = std::max(g[0], 1e-3 * mean);
    for (std::size_t j = 1; j < g.size(); ++j) g[j] = std::max(g[j], g[j - 1] * (1.0 + 1e-3));
    return g;
  };
  std::vector<std::vector<double>> starts;
  starts.push_back(make_increasing(block_means(lambda, multiplicities)));
  if (opts.num_starts >= 2) starts.push_back(make_increasing(block_means(lawley_corrected(lambda, ctx), multiplicities)));
  if (opts.num_starts >= 3 && multiplicities.size() > 1) {
    const auto& a = starts.front();
    std::vector<double> c(a.size());
    for (std::size_t j = 0; j < a.size(); ++j)
      c[j] = a.front() + (a.back() - a.front()) * static_cast<double>(j) / static_cast<double>(a.size() - 1);
    starts.push_back(make_increasing(c));
  }

  detail::LmOptions lo;
  lo.max_iterations = opts.max_iterations;
  lo.tolerance = opts.objective_tolerance;
  lo.broyden_steps = opts.broyden_steps;
  lo.objective_floor = kFloorRelative * lambda.max() * lambda.max();

  ClusteredEstimationResult best;
  bool have = false;
  for (const auto& s0 : starts) {
    try {
      ClusteredProblem problem(lambda, ctx, multiplicities, opts);
      const detail::LmResult r = detail::levenberg_marquardt(problem, s_from_gamma(s0), lo);
      if (!have || r.objective < best.objective) {
        best.gamma = gamma_from_s(r.x);
        best.tau_hat = expand_clusters(best.gamma, multiplicities);
        best.objective = r.objective;
        best.iterations = r.iterations;
        best.status = r.converged ? EstimationStatus::converged : EstimationStatus::max_iterations;
        have = true;
      }
    } catch (const SolverError&) {
    }
  }
  if (!have) throw SolverError("clustered spectrum estimation failed from every start", 0.0);
  return best;
}

}  // namespace eigenshrink
