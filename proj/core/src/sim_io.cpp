#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "eigenshrink/errors.hpp"
#include "eigenshrink/sim_harness.hpp"

namespace eigenshrink {
namespace {

using nlohmann::json;

// "at line L, column C" for a byte offset into `text`.
std::string location(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

const json& member(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(where + ": missing \"" + key + "\"");
  return *it;
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return member(j, key, where).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(where + ": bad \"" + key + "\": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

SpectrumSpec parse_spectrum(const json& j, std::int64_t p) {
  const std::string where = "spectrum";
  if (!j.is_object()) throw ValidationError("spectrum must be an object");
  const auto kind = get<std::string>(j, "kind", where);
  if (kind == "beta") {
    BetaSpectrum b;
    b.a_shift = get_or(j, "a_shift", b.a_shift, where);
    b.scale = get_or(j, "scale", b.scale, where);
    b.alpha = get_or(j, "alpha", b.alpha, where);
    b.beta = get_or(j, "beta", b.beta, where);
    return b;
  }
  if (kind == "explicit") return ExplicitSpectrum{SpectrumVector::from_unsorted(get<std::vector<double>>(j, "values", where))};
  if (kind == "clustered") {
    ClusteredSpectrum c;
    c.locations = get<std::vector<double>>(j, "locations", where);
    if (j.contains("multiplicities")) {
      c.multiplicities = get<std::vector<std::size_t>>(j, "multiplicities", where);
    } else {
      c.multiplicities = cluster_multiplicities(get<std::vector<double>>(j, "fractions", where),
                                                static_cast<std::size_t>(std::max<std::int64_t>(p, 0)));
    }
    return c;
  }
  throw ValidationError("spectrum: unknown kind \"" + kind + "\"");
}

VariateLaw parse_law(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "gaussian") return GaussianLaw{};
    if (s == "student_t") return StudentTLaw{};
    throw ValidationError("law: unknown kind \"" + s + "\"");
  }
  const auto kind = get<std::string>(j, "kind", "law");
  if (kind == "gaussian") return GaussianLaw{};
  if (kind == "student_t") return StudentTLaw{get_or(j, "df", 3.0, "law")};
  throw ValidationError("law: unknown kind \"" + kind + "\"");
}

json spectrum_json(const SpectrumSpec& spec) {
  return std::visit(
      [](const auto& s) -> json {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, BetaSpectrum>) {
          return {{"kind", "beta"}, {"a_shift", s.a_shift}, {"scale", s.scale}, {"alpha", s.alpha}, {"beta", s.beta}};
        } else if constexpr (std::is_same_v<S, ExplicitSpectrum>) {
          return {{"kind", "explicit"}, {"values", s.tau.vector()}};
        } else {
          return {{"kind", "clustered"}, {"locations", s.locations}, {"multiplicities", s.multiplicities}};
        }
      },
      spec);
}

json law_json(const VariateLaw& law) {
  if (const auto* t = std::get_if<StudentTLaw>(&law)) return {{"kind", "student_t"}, {"df", t->df}};
  return {{"kind", "gaussian"}};
}

json design_json(const SimulationDesign& d) {
  return {{"n", d.n},
          {"p", d.p},
          {"spectrum", spectrum_json(d.spectrum)},
          {"law", law_json(d.law)},
          {"replications", d.replications},
          {"master_seed", d.master_seed}};
}

std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

}  // namespace

DesignFile parse_design_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed design JSON at " + location(text, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what());
  }
  if (!j.is_object()) throw ValidationError("design JSON must be an object");
  const auto version = get<int>(j, "schema_version", "design");
  if (version != kDesignSchemaVersion)
    throw ValidationError("unsupported schema_version " + std::to_string(version));

  DesignFile f;
  auto& d = f.design;
  d.n = get<std::int64_t>(j, "n", "design");
  d.p = get<std::int64_t>(j, "p", "design");
  d.spectrum = parse_spectrum(member(j, "spectrum", "design"), d.p);
  if (j.contains("law")) d.law = parse_law(j["law"]);
  d.replications = get_or<std::size_t>(j, "replications", d.replications, "design");
  f.has_master_seed = j.contains("master_seed");
  d.master_seed = get_or<std::uint64_t>(j, "master_seed", d.master_seed, "design");
  f.experiment = get_or<std::string>(j, "experiment", f.experiment, "design");
  if (f.experiment != "eigenvalue" && f.experiment != "shrinkage" && f.experiment != "pca")
    throw ValidationError("design: unknown experiment \"" + f.experiment + "\"");
  f.estimators = get_or(j, "estimators", f.estimators, "design");
  f.targets = get_or(j, "targets", f.targets, "design");
  f.skip_failed_replications = get_or(j, "skip_failed_replications", false, "design");
  d.validate();
  return f;
}

DesignFile read_design_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open design file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_design_json(ss.str());
}

std::string design_to_json(const DesignFile& file) {
  json j = design_json(file.design);
  if (!file.has_master_seed) j.erase("master_seed");
  j["schema_version"] = kDesignSchemaVersion;
  j["experiment"] = file.experiment;
  if (!file.estimators.empty()) j["estimators"] = file.estimators;
  if (file.experiment == "pca") j["targets"] = file.targets;
  if (file.skip_failed_replications) j["skip_failed_replications"] = true;
  return j.dump(2);
}

std::string report_to_json(const SimulationReport& r) {
  json j;
  j["experiment"] = r.experiment;
  j["design"] = design_json(r.design);
  j["law"] = to_string(r.design.law);
  j["replication_count"] = r.replication_count;
  j["aggregated_count"] = r.aggregated_count;
  if (!r.per_estimator_mse.empty()) j["per_estimator_mse"] = r.per_estimator_mse;
  if (!r.prial.empty()) j["prial"] = r.prial;
  if (!r.mean_loss.empty()) j["mean_loss"] = r.mean_loss;
  if (!r.pca_rmse.empty()) {
    json cells = json::array();
    for (const auto& c : r.pca_rmse)
      cells.push_back({{"estimator", c.estimator}, {"q", c.q}, {"rmse", c.rmse}, {"mean_k", c.mean_k},
                       {"mean_true_k", c.mean_true_k}});
    j["pca_rmse"] = cells;
  }
  json errors = json::array();
  for (const auto& e : r.errors)
    errors.push_back({{"replication", e.replication}, {"estimator", e.estimator}, {"message", e.message}});
  j["errors"] = errors;
  if (r.elapsed_seconds) j["elapsed_seconds"] = *r.elapsed_seconds;
  return j.dump(2);
}

void write_report_csv(const SimulationReport& r, std::ostream& out) {
  out << "experiment,metric,estimator,q,value\n";
  const auto row = [&](const char* metric, const std::string& est, const std::string& q, double v) {
    out << r.experiment << ',' << metric << ',' << est << ',' << q << ',' << csv_number(v) << '\n';
  };
  for (const auto& [k, v] : r.per_estimator_mse) row("mse", k, "", v);
  for (const auto& [k, v] : r.prial) row("prial", k, "", v);
  for (const auto& [k, v] : r.mean_loss) row("mean_loss", k, "", v);
  for (const auto& c : r.pca_rmse) {
    row("rmse", c.estimator, csv_number(c.q), c.rmse);
    row("mean_k", c.estimator, csv_number(c.q), c.mean_k);
    row("mean_true_k", c.estimator, csv_number(c.q), c.mean_true_k);
  }
}

}  // namespace eigenshrink
