#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "csv_io.hpp"
#include "eigenshrink/errors.hpp"
#include "eigenshrink/pca.hpp"
#include "eigenshrink/quest.hpp"
#include "eigenshrink/shrinkage.hpp"
#include "eigenshrink/sim_harness.hpp"
#include "eigenshrink/spectrum_estimator.hpp"

namespace eigenshrink::cli {
namespace {

using nlohmann::json;

struct EstimationFlags {
  int starts = 3;
  double tolerance = 1e-8;
  int max_iterations = 500;
  int broyden_steps = 0;

  void add(CLI::App* app) {
    app->add_option("--starts", starts, "Optimizer starts (1-3)")->check(CLI::Range(1, 3));
    app->add_option("--tolerance", tolerance, "Relative objective decrease that stops the optimizer")
        ->check(CLI::PositiveNumber);
    app->add_option("--max-iterations", max_iterations, "Optimizer iteration cap")->check(CLI::PositiveNumber);
    app->add_option("--broyden-steps", broyden_steps,
                    "Steps between finite-difference Jacobians, secant updates in between (0: every step)")
        ->check(CLI::NonNegativeNumber);
  }
  EstimationOptions options() const {
    EstimationOptions o;
    o.num_starts = starts;
    o.objective_tolerance = tolerance;
    o.max_iterations = max_iterations;
    o.broyden_steps = broyden_steps;
    return o;
  }
};

// Writes to `path`, or to `fallback` when the path is empty.
template <class Fn>
void emit(const std::string& path, std::ostream& fallback, Fn&& fn) {
  if (path.empty()) {
    fn(fallback);
    return;
  }
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write " + path);
  fn(f);
  if (!f) throw ValidationError("write failed for " + path);
}

Eigen::MatrixXd column(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json estimation_json(const EstimationResult& r, const ConcentrationContext& ctx) {
  json starts = json::array();
  for (const auto& s : r.starts)
    starts.push_back({{"name", s.name},
                      {"initial_objective", s.initial_objective},
                      {"final_objective", s.final_objective},
                      {"iterations", s.iterations},
                      {"failed", s.failed}});
  return {{"n", ctx.n()},
          {"p", ctx.p()},
          {"objective", r.objective},
          {"iterations", r.iterations},
          {"status", to_string(r.status)},
          {"best_start", r.best_start},
          {"starts", starts}};
}

struct Shrunk {
  Eigensystem eig;
  Eigen::VectorXd d;
  Eigen::MatrixXd matrix;
  std::vector<std::string> warnings;
};

// Eigensystem given as a single-column eigenvalue file and a p x p matrix whose
// columns are the matching eigenvectors, in the same order.
Eigensystem read_eigensystem(const std::string& values_path, const std::string& vectors_path, std::int64_t n,
                             bool header) {
  const std::vector<double> lam = read_vector_csv(values_path, header);
  const Eigen::MatrixXd u = read_matrix_csv(vectors_path, header);
  const auto p = static_cast<Eigen::Index>(lam.size());
  if (u.rows() != p || u.cols() != p)
    throw ValidationError("eigenvectors must be " + std::to_string(p) + " x " + std::to_string(p));
  for (double v : lam) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("eigenvalues must be finite and nonnegative");
  }
  const double drift = (u.transpose() * u - Eigen::MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff();
  if (drift > 1e-8) throw ValidationError("eigenvector columns are not orthonormal (max error " + format_number(drift) + ")");
  std::vector<Eigen::Index> order(lam.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return lam[static_cast<std::size_t>(a)] < lam[static_cast<std::size_t>(b)]; });
  std::vector<double> sorted(lam.size());
  Eigen::MatrixXd vectors(p, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    sorted[static_cast<std::size_t>(k)] = lam[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
    vectors.col(k) = u.col(order[static_cast<std::size_t>(k)]);
  }
  return {SpectrumVector(std::move(sorted)), std::move(vectors), ConcentrationContext(n, p)};
}

Shrunk shrink_eigensystem(Eigensystem eig, const EstimationOptions& opts) {
  const auto fit = estimate_spectrum(eig.eigenvalues, eig.context, opts);
  auto res = nonlinear_shrinkage(eig, fit.tau_hat, opts.quest);
  return {std::move(eig), std::move(res.d), std::move(res.matrix), std::move(res.warnings)};
}

Shrunk shrink_data(const Eigen::MatrixXd& y, const std::string& method, const EstimationOptions& opts) {
  const auto n = static_cast<std::int64_t>(y.rows());
  Shrunk s{eigensystem_from_covariance(sample_covariance(y), n), {}, {}, {}};
  if (method == "linear") {
    const auto lin = linear_shrinkage(y);
    s.matrix = lin.matrix;
    s.d = (s.eig.eigenvectors.transpose() * lin.matrix * s.eig.eigenvectors).diagonal();
    return s;
  }
  return shrink_eigensystem(std::move(s.eig), opts);
}

std::vector<double> parse_targets(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double q = std::stod(item, &used);
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
      out.push_back(q);
    } catch (const std::logic_error&) {
      throw ValidationError("bad target '" + item + "'");
    }
  }
  if (out.empty()) throw ValidationError("no targets given");
  for (double q : out) {
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("targets must lie in (0, 1)");
  }
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Population spectrum estimation and nonlinear covariance shrinkage", "eigenshrink"};
  app.require_subcommand(1);

  // quest eval
  auto* quest = app.add_subcommand("quest", "Sample spectral law of a population spectrum");
  quest->require_subcommand(1);
  auto* quest_eval = quest->add_subcommand("eval", "Write the model grid and the QuEST quantiles");
  std::string spectrum_path, quantiles_out, grid_out;
  std::int64_t n = 0;
  std::size_t grid_points = 1000;
  bool header = false;
  quest_eval->add_option("--spectrum", spectrum_path, "Single-column population spectrum")->required();
  quest_eval->add_option("--n", n, "Sample size")->required();
  quest_eval->add_option("--grid-points", grid_points, "Nodes per support interval")->check(CLI::Range(3, 1000000));
  quest_eval->add_option("-o,--output", quantiles_out, "Quantiles CSV (default stdout)");
  quest_eval->add_option("--grid", grid_out, "Long-format grid CSV: interval,x,density,cdf");
  quest_eval->add_flag("--header", header, "Skip one header line of the input");

  // estimate
  auto* estimate = app.add_subcommand("estimate", "Estimate the population spectrum from sample eigenvalues");
  std::string eigen_path, tau_out, meta_out;
  EstimationFlags est_flags;
  estimate->add_option("--eigenvalues", eigen_path, "Single-column sample eigenvalues")->required();
  estimate->add_option("--n", n, "Sample size")->required();
  estimate->add_option("-o,--output", tau_out, "Estimated spectrum CSV (default stdout)");
  estimate->add_option("--meta", meta_out, "Objective metadata JSON (default stdout, or stderr without -o)");
  estimate->add_flag("--header", header, "Skip one header line of the input");
  est_flags.add(estimate);

  // shrink
  auto* shrink = app.add_subcommand("shrink", "Shrink the sample covariance matrix of a data file or eigensystem");
  std::string data_path, d_out, matrix_out, method = "nonlinear", values_path, vectors_path;
  std::int64_t shrink_n = 0;
  auto* data_opt = shrink->add_option("--data", data_path, "n x p data, rows are observations");
  auto* values_opt = shrink->add_option("--eigenvalues", values_path, "Single-column sample eigenvalues");
  auto* vectors_opt = shrink->add_option("--eigenvectors", vectors_path, "p x p matrix, column i belongs to eigenvalue i");
  auto* shrink_n_opt = shrink->add_option("--n", shrink_n, "Sample size (with --eigenvalues)")->check(CLI::PositiveNumber);
  data_opt->excludes(values_opt)->excludes(vectors_opt)->excludes(shrink_n_opt);
  values_opt->needs(vectors_opt)->needs(shrink_n_opt);
  vectors_opt->needs(values_opt);
  shrink->add_option("--method", method, "nonlinear or linear")->check(CLI::IsMember({"nonlinear", "linear"}));
  shrink->add_option("-o,--output", d_out, "Two-column CSV lambda,d (default stdout)");
  shrink->add_option("--matrix", matrix_out, "Shrunk covariance matrix CSV");
  shrink->add_flag("--header", header, "Skip one header line of the input");
  est_flags.add(shrink);

  // pca
  auto* pca = app.add_subcommand("pca", "Explained-variation curve and retention counts");
  std::string targets_text = "0.7,0.8,0.9", curve_out, retain_out;
  pca->add_option("--data", data_path, "n x p data, rows are observations")->required();
  pca->add_option("--targets", targets_text, "Comma-separated fractions in (0, 1)");
  pca->add_option("-o,--output", curve_out, "Curve CSV k,f_sample,f_shrinkage");
  pca->add_option("--retain", retain_out, "Retention CSV q,k_sample,k_shrinkage (default stdout)");
  pca->add_flag("--header", header, "Skip one header line of the input");
  est_flags.add(pca);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo design");
  std::string design_path, report_out, csv_out;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 0;
  bool elapsed = false;
  simulate->add_option("--design", design_path, "Design JSON")->required();
  simulate->add_option("-o,--output", report_out, "Report JSON (default stdout)");
  simulate->add_option("--csv", csv_out, "Long-format report CSV");
  simulate->add_option("--seed", seed, "Master seed (overrides the design file)");
  simulate->add_option("--workers", workers, "Worker threads (default: WORKERS or 1)");
  simulate->add_flag("--elapsed", elapsed, "Include wall time in the report");
  est_flags.add(simulate);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidation;
  }

  try {
    if (quest_eval->parsed()) {
      const SpectrumVector t = SpectrumVector::from_unsorted(read_vector_csv(spectrum_path, header));
      const ConcentrationContext ctx(n, static_cast<std::int64_t>(t.size()));
      const auto model = build_sample_spectral_model(t, ctx, QuestOptions{grid_points});
      emit(quantiles_out, out, [&](std::ostream& o) { write_matrix_csv(column(model.smoothed_quantiles().vector()), o); });
      if (!grid_out.empty()) {
        emit(grid_out, out, [&](std::ostream& o) {
          o << "interval,x,density,cdf\n";
          for (std::size_t i = 0; i < model.grids().size(); ++i) {
            const auto& g = model.grids()[i];
            for (std::size_t k = 0; k < g.x.size(); ++k)
              o << i << ',' << format_number(g.x[k]) << ',' << format_number(g.density[k]) << ','
                << format_number(g.cdf[k]) << '\n';
          }
        });
      }
      return kOk;
    }
    if (estimate->parsed()) {
      const SpectrumVector lambda = SpectrumVector::from_unsorted(read_vector_csv(eigen_path, header));
      const ConcentrationContext ctx(n, static_cast<std::int64_t>(lambda.size()));
      const auto res = estimate_spectrum(lambda, ctx, est_flags.options());
      emit(tau_out, out, [&](std::ostream& o) { write_matrix_csv(column(res.tau_hat.vector()), o); });
      const std::string meta = estimation_json(res, ctx).dump(2) + "\n";
      if (!meta_out.empty()) emit(meta_out, out, [&](std::ostream& o) { o << meta; });
      else (tau_out.empty() ? err : out) << meta;
      return kOk;
    }
    if (shrink->parsed()) {
      if (data_path.empty() && values_path.empty()) throw ValidationError("shrink needs --data or --eigenvalues");
      if (!values_path.empty() && method == "linear")
        throw ValidationError("linear shrinkage needs the data matrix, not an eigensystem");
      const Shrunk s = data_path.empty()
                           ? shrink_eigensystem(read_eigensystem(values_path, vectors_path, shrink_n, header),
                                                est_flags.options())
                           : shrink_data(read_matrix_csv(data_path, header), method, est_flags.options());
      for (const auto& w : s.warnings) err << "warning: " << w << '\n';
      Eigen::MatrixXd table(s.d.size(), 2);
      for (Eigen::Index i = 0; i < s.d.size(); ++i) {
        table(i, 0) = s.eig.eigenvalues[static_cast<std::size_t>(i)];
        table(i, 1) = s.d[i];
      }
      emit(d_out, out, [&](std::ostream& o) { write_matrix_csv(table, o, {"lambda", "d"}); });
      if (!matrix_out.empty()) write_matrix_csv(s.matrix, matrix_out);
      return kOk;
    }
    if (pca->parsed()) {
      const std::vector<double> targets = parse_targets(targets_text);
      const Eigen::MatrixXd y = read_matrix_csv(data_path, header);
      const auto eig = eigensystem_from_covariance(sample_covariance(y), y.rows());
      const std::vector<double> sample_curve = explained_fraction_curve(eig.eigenvalues.vector(), true);
      const Shrunk s = shrink_data(y, "nonlinear", est_flags.options());
      for (const auto& w : s.warnings) err << "warning: " << w << '\n';
      const std::vector<double> shrunk_curve =
          explained_fraction_curve(std::vector<double>(s.d.data(), s.d.data() + s.d.size()));
      if (!curve_out.empty()) {
        Eigen::MatrixXd table(static_cast<Eigen::Index>(sample_curve.size()), 3);
        for (std::size_t k = 0; k < sample_curve.size(); ++k) {
          const auto r = static_cast<Eigen::Index>(k);
          table(r, 0) = static_cast<double>(k + 1);
          table(r, 1) = sample_curve[k];
          table(r, 2) = shrunk_curve[k];
        }
        write_matrix_csv(table, curve_out, {"k", "f_sample", "f_shrinkage"});
      }
      emit(retain_out, out, [&](std::ostream& o) {
        o << "q,k_sample,k_shrinkage\n";
        for (double q : targets)
          o << format_number(q) << ',' << components_to_retain(sample_curve, q) << ','
            << components_to_retain(shrunk_curve, q) << '\n';
      });
      return kOk;
    }
    if (simulate->parsed()) {
      DesignFile file = read_design_file(design_path);
      if (seed) {
        file.design.master_seed = *seed;
      } else if (!file.has_master_seed) {
        file.design.master_seed = std::random_device{}() ^ (static_cast<std::uint64_t>(std::random_device{}()) << 32);
        err << "seed: " << file.design.master_seed << '\n';
      }
      ExperimentOptions opts;
      opts.workers = workers;
      opts.skip_failed_replications = file.skip_failed_replications;
      opts.record_elapsed = elapsed;
      opts.estimation = est_flags.options();
      SimulationReport report;
      if (file.experiment == "eigenvalue") {
        const std::vector<std::string> est =
            file.estimators.empty() ? std::vector<std::string>{"sample", "lawley", "quest"} : file.estimators;
        report = run_eigenvalue_experiment(file.design, est, opts);
      } else if (file.experiment == "shrinkage") {
        report = file.estimators.empty() ? run_shrinkage_experiment(file.design, opts)
                                         : run_shrinkage_experiment(file.design, opts, file.estimators);
      } else {
        report = file.estimators.empty() ? run_pca_experiment(file.design, file.targets, opts)
                                         : run_pca_experiment(file.design, file.targets, opts, file.estimators);
      }
      for (const auto& e : report.errors)
        err << "skipped replication " << e.replication << " (" << e.estimator << "): " << e.message << '\n';
      emit(report_out, out, [&](std::ostream& o) { o << report_to_json(report) << '\n'; });
      if (!csv_out.empty()) emit(csv_out, out, [&](std::ostream& o) { write_report_csv(report, o); });
      return kOk;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << '\n';
    return kSolver;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return kSolver;
  }
  err << app.help();
  return kValidation;
}

}  // namespace eigenshrink::cli
