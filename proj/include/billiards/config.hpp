#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "billiards/experiments.hpp"

namespace billiards {

/// Invalid run configuration; `field()` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Fully validated parameters of one CLI invocation.
struct RunConfig {
  nlohmann::json surface_spec;
  std::optional<Surface> surface;
  std::string command;     // orbit | variation | conjugate | maximizer-scan | experiment
  std::string experiment;  // sphere | ellipsoid-flat | angle-threshold | symmetric-lift
  Vec start;
  Vec direction;
  double angle = std::numbers::pi / 4;
  int n = 1;
  SearchInterval search;
  ConjugateOptions::Prefer prefer = ConjugateOptions::Prefer::GrazingSide;
  int directions = 16;
  int radial_grid = 32;
  double alpha = std::numbers::pi / 3;
  int n_max = 10;
  double a1 = 0.3;
  double a2 = 1.0;
  double a3 = 1.2;
  int samples = 200;
  int angle_grid = 64;
  int point_samples = 32;
  double A = 1.5;
  double B = 1.0;
  double C = 0.2;
  double lambda = 0.5;
  int n_bounces = 30;
  std::uint64_t seed = kDefaultSeed;
  std::string output_dir = ".";
};

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "surface", "command", "experiment", "start",      "direction",     "angle", "n",       "search",
      "prefer",  "directions", "radial_grid", "alpha",  "n_max",         "a1",    "a2",      "a3",
      "samples", "angle_grid", "point_samples", "A",    "B",             "C",     "lambda",  "n_bounces",
      "seed",    "output_dir"};
  return keys;
}

inline double number_field(const nlohmann::json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(key, key + ": expected a number");
  const double v = j[key].get<double>();
  if (!std::isfinite(v)) throw ConfigError(key, key + ": must be finite");
  return v;
}

inline int int_field(const nlohmann::json& j, const std::string& key, int fallback, int minimum) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) throw ConfigError(key, key + ": expected an integer");
  const auto v = j[key].get<long long>();
  if (v < minimum || v > 1'000'000) {
    throw ConfigError(key, key + ": must be an integer >= " + std::to_string(minimum));
  }
  return static_cast<int>(v);
}

inline Vec vector_field(const nlohmann::json& j, const std::string& key) {
  if (!j[key].is_array()) throw ConfigError(key, key + ": expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j[key].size()));
  for (std::size_t i = 0; i < j[key].size(); ++i) {
    if (!j[key][i].is_number()) throw ConfigError(key, key + ": expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[key][i].get<double>();
  }
  return v;
}

inline std::vector<double> split_numbers(const std::string& text, const std::string& field) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(field, field + ": cannot parse number '" + item + "'");
    }
  }
  return out;
}

}  // namespace detail

/// Parses "sphere:R[:d]" or "ellipsoid:a1,a2,...".
inline nlohmann::json surface_spec_from_string(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "sphere") {
    nlohmann::json j = {{"kind", "sphere"}, {"radius", 1.0}};
    if (!rest.empty()) {
      const auto second = rest.find(':');
      j["radius"] = detail::split_numbers(rest.substr(0, second), "surface").at(0);
      if (second != std::string::npos) j["dimension"] = std::stoi(rest.substr(second + 1));
    }
    return j;
  }
  if (kind == "ellipsoid") return {{"kind", "ellipsoid"}, {"semi_axes", detail::split_numbers(rest, "surface")}};
  return {{"kind", kind}};
}

/// Vector given as "x,y,z".
inline nlohmann::json vector_spec_from_string(const std::string& text, const std::string& field) {
  return detail::split_numbers(text, field);
}

/// Validates a configuration object; throws ConfigError naming the bad field.
inline RunConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("", "configuration must be a JSON object");
  for (const auto& item : j.items()) {
    if (!detail::known_keys().count(item.key())) throw ConfigError(item.key(), "unknown field: " + item.key());
  }
  RunConfig cfg;
  if (j.contains("surface")) {
    cfg.surface_spec = j["surface"];
    try {
      cfg.surface = surface_from_json(j["surface"]);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("surface", e.what());
    }
  }
  if (!j.contains("command") || !j["command"].is_string()) throw ConfigError("command", "command: missing");
  cfg.command = j["command"].get<std::string>();
  static const std::set<std::string> commands = {"orbit", "variation", "conjugate", "maximizer-scan", "experiment"};
  if (!commands.count(cfg.command)) throw ConfigError("command", "unknown command: " + cfg.command);

  cfg.angle = detail::number_field(j, "angle", cfg.angle);
  if (!(cfg.angle > 0.0 && cfg.angle <= std::numbers::pi / 2)) throw ConfigError("angle", "angle: must lie in (0, pi/2]");
  cfg.alpha = detail::number_field(j, "alpha", cfg.alpha);
  if (!(cfg.alpha > 0.0 && cfg.alpha <= std::numbers::pi / 2)) throw ConfigError("alpha", "alpha: must lie in (0, pi/2]");
  cfg.n = detail::int_field(j, "n", cfg.n, 1);
  cfg.n_max = detail::int_field(j, "n_max", cfg.n_max, 1);
  cfg.directions = detail::int_field(j, "directions", cfg.directions, 2);
  cfg.radial_grid = detail::int_field(j, "radial_grid", cfg.radial_grid, 2);
  cfg.samples = detail::int_field(j, "samples", cfg.samples, 1);
  cfg.angle_grid = detail::int_field(j, "angle_grid", cfg.angle_grid, 8);
  cfg.point_samples = detail::int_field(j, "point_samples", cfg.point_samples, 8);
  cfg.n_bounces = detail::int_field(j, "n_bounces", cfg.n_bounces, 3);
  cfg.a1 = detail::number_field(j, "a1", cfg.a1);
  cfg.a2 = detail::number_field(j, "a2", cfg.a2);
  cfg.a3 = detail::number_field(j, "a3", cfg.a3);
  cfg.A = detail::number_field(j, "A", cfg.A);
  cfg.B = detail::number_field(j, "B", cfg.B);
  cfg.C = detail::number_field(j, "C", cfg.C);
  cfg.lambda = detail::number_field(j, "lambda", cfg.lambda);
  for (const char* key : {"a1", "a2", "a3", "A", "B", "C", "lambda"}) {
    if (j.contains(key) && !(j[key].get<double>() > 0.0)) throw ConfigError(key, std::string(key) + ": must be positive");
  }

  if (j.contains("search")) {
    const Vec s = detail::vector_field(j, "search");
    if (s.size() != 2 || !(s[0] >= 0.0 && s[0] < s[1] && s[1] < 1.0)) {
      throw ConfigError("search", "search: expected [lo, hi] with 0 <= lo < hi < 1");
    }
    cfg.search = {s[0], s[1]};
  }
  if (j.contains("prefer")) {
    const std::string p = j["prefer"].is_string() ? j["prefer"].get<std::string>() : "";
    if (p == "grazing") {
      cfg.prefer = ConjugateOptions::Prefer::GrazingSide;
    } else if (p == "normal") {
      cfg.prefer = ConjugateOptions::Prefer::NormalSide;
    } else {
      throw ConfigError("prefer", "prefer: expected \"grazing\" or \"normal\"");
    }
  }

  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("seed", "seed: expected a non-negative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  } else if (const char* env = std::getenv("BILLIARDS_SEED")) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError("seed", "BILLIARDS_SEED: expected a non-negative integer");
    }
  }
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) throw ConfigError("output_dir", "output_dir: expected a path");
    cfg.output_dir = j["output_dir"].get<std::string>();
  }

  if (cfg.command == "experiment") {
    if (!j.contains("experiment") || !j["experiment"].is_string()) throw ConfigError("experiment", "experiment: missing");
    cfg.experiment = j["experiment"].get<std::string>();
    static const std::set<std::string> names = {"sphere", "ellipsoid-flat", "angle-threshold", "symmetric-lift"};
    if (!names.count(cfg.experiment)) throw ConfigError("experiment", "unknown experiment: " + cfg.experiment);
  }

  const bool needs_surface = cfg.command != "experiment" || cfg.experiment == "angle-threshold";
  if (needs_surface) {
    if (!cfg.surface) throw ConfigError("surface", "surface: missing");
    const Surface& surface = *cfg.surface;
    const int d = surface.dimension();
    if (j.contains("start")) {
      cfg.start = detail::vector_field(j, "start");
      if (cfg.start.size() != d) throw ConfigError("start", "start: expected " + std::to_string(d) + " coordinates");
      if (!(std::abs(surface.value(cfg.start)) < tolerance::kOnSurface)) {
        throw ConfigError("start", "start: point is not on the surface");
      }
    } else {
      cfg.start = surface.radial_point(Vec::Unit(d, d - 1));
    }
    cfg.direction = j.contains("direction") ? detail::vector_field(j, "direction") : Vec(Vec::Unit(d, 0));
    if (cfg.direction.size() != d) {
      throw ConfigError("direction", "direction: expected " + std::to_string(d) + " coordinates");
    }
    const Vec tangential = project_onto_tangent(inward_normal(surface, cfg.start), cfg.direction);
    if (!(tangential.norm() > 1e-9)) throw ConfigError("direction", "direction: no component tangent to the surface at start");
    cfg.direction = tangential / tangential.norm();
  }
  return cfg;
}

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline RunConfig parse_config(const char* text) { return parse_config(std::string(text)); }

struct RunResult {
  int exit_code = 0;
  std::vector<std::string> files;
  std::string message;
};

namespace detail {

inline std::string write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  return path.string();
}

inline std::string write_orbit_file(const std::filesystem::path& path, const OrbitSegment& seg) {
  std::ostringstream os;
  write_orbit_csv(os, seg);
  return write_text(path, os.str());
}

inline Json jacobi_to_json(const JacobiField& field) {
  Json vectors = Json::array();
  for (const auto& v : field.vectors) vectors.push_back(to_json(v));
  return {{"vectors", vectors}, {"residuals", field.residuals}, {"max_residual", field.max_residual()},
          {"exact", field.exact}};
}

inline Json config_parameters(const RunConfig& cfg) {
  Json p;
  p["surface"] = cfg.surface ? surface_to_json(*cfg.surface) : Json(nullptr);
  p["command"] = cfg.command;
  if (cfg.start.size()) p["start"] = to_json(cfg.start);
  if (cfg.direction.size()) p["direction"] = to_json(cfg.direction);
  p["angle"] = cfg.angle;
  p["n"] = cfg.n;
  p["seed"] = cfg.seed;
  return p;
}

inline RunResult finish(const ExperimentReport& report, const std::filesystem::path& dir, RunResult result) {
  result.files.insert(result.files.begin(), write_report(report, dir).string());
  for (const auto& a : report.artifacts) {
    if (std::find(result.files.begin(), result.files.end(), a) == result.files.end()) result.files.push_back(a);
  }
  if (!report.passed()) {
    result.exit_code = 1;
    std::ostringstream os;
    os << report.name << ": failed checks:";
    for (const auto* c : report.failures()) os << "\n  - " << c->description << " (observed " << c->observed << ")";
    result.message = os.str();
  } else {
    result.message = report.name + ": all " + std::to_string(report.checks.size()) + " checks passed";
  }
  return result;
}

inline RunResult run_variation(const RunConfig& cfg, const std::filesystem::path& dir) {
  const Surface& surface = *cfg.surface;
  RunResult result;
  const OrbitSegment seg = orbit(surface, make_phase_point(surface, cfg.start, cfg.direction, cfg.angle), cfg.n + 1);
  const auto orbit_path = write_orbit_file(dir / "variation_orbit.csv", seg);
  const SecondVariationForm form = assemble_form(surface, seg);
  const auto rep = definiteness(form);

  ExperimentReport report;
  report.name = "variation";
  report.parameters = config_parameters(cfg);
  report.artifacts.push_back(orbit_path);
  const double asym = (form.matrix - form.matrix.transpose()).cwiseAbs().maxCoeff();
  report.add("form symmetric", 0.0, asym, 1e-10, asym <= 1e-10);
  double adj = 0.0;
  for (const auto& op : form.operators) adj = std::max(adj, (op.l12.transpose() - op.l21).cwiseAbs().maxCoeff());
  report.add("l12^T = l21 on every chord", 0.0, adj, 1e-10, adj <= 1e-10);

  Json kernels = Json::array();
  double worst = 0.0;
  for (const auto& k : rep.kernel_basis) {
    const JacobiField field = make_jacobi_field(form.operators, pad_kernel_vector(k, form.block_size));
    worst = std::max(worst, field.max_residual());
    kernels.push_back({{"vector", to_json(k)}, {"jacobi", jacobi_to_json(field)}});
  }
  report.add("kernel vectors satisfy the Jacobi recurrence", 0.0, worst, 1e-6, worst < 1e-6);
  report.results["eigenvalues"] = to_json(Vec(rep.eigenvalues));
  report.results["classification"] = to_string(rep.classification);
  report.results["tolerance"] = rep.tolerance;
  report.results["kernel"] = std::move(kernels);
  report.results["orbit_csv"] = orbit_path;
  return finish(report, dir, result);
}

inline RunResult run_conjugate(const RunConfig& cfg, const std::filesystem::path& dir) {
  const Surface& surface = *cfg.surface;
  ConjugateOptions options;
  options.prefer = cfg.prefer;
  const auto found = detect_conjugate(surface, cfg.start, cfg.direction, cfg.n, cfg.search, options);

  ExperimentReport report;
  report.name = "conjugate";
  report.parameters = config_parameters(cfg);
  report.parameters["search"] = {cfg.search.lo, cfg.search.hi};
  report.parameters["prefer"] = cfg.prefer == ConjugateOptions::Prefer::GrazingSide ? "grazing" : "normal";
  report.add("change of inertia found in the search interval", true, found.has_value(), 0.0, found.has_value());
  RunResult result;
  if (found) {
    const auto orbit_path = write_orbit_file(dir / "conjugate_orbit.csv", found->form.segment);
    report.artifacts.push_back(orbit_path);
    report.add("|lambda_min| below kernel window", 0.0, std::abs(found->kernel_eigenvalue), 1e-6,
               std::abs(found->kernel_eigenvalue) < 1e-6);
    report.add("kernel Jacobi field residuals", 0.0, found->field.max_residual(), 1e-6,
               found->field.max_residual() < 1e-6);
    report.results["v_hat"] = found->phase.v_hat;
    report.results["speed"] = found->phase.speed();
    report.results["angle"] = found->phase.angle();
    report.results["lambda_min"] = found->kernel_eigenvalue;
    report.results["bracket"] = {found->bracket_lo, found->bracket_hi};
    report.results["bisection_steps"] = found->bisection_steps;
    report.results["crossings_found"] = found->crossings_found;
    report.results["jacobi"] = jacobi_to_json(found->field);
    report.results["orbit_csv"] = orbit_path;
  }
  return finish(report, dir, result);
}

inline RunResult run_maximizer_scan(const RunConfig& cfg, const std::filesystem::path& dir) {
  const Surface& surface = *cfg.surface;
  const auto sample = maximizer_set_sample(surface, cfg.start, cfg.n, cfg.directions, cfg.radial_grid);
  std::ostringstream csv;
  csv.precision(17);
  csv << "direction_index,speed,v_hat,resolved,classification_n,classification_n_plus_1\n";
  for (const auto& s : sample.samples) {
    csv << s.direction_index << ',' << s.speed << ',' << s.v_hat << ',' << (s.resolved ? 1 : 0) << ','
        << (s.resolved ? to_string(s.at_n) : "unresolved") << ',' << (s.resolved ? to_string(s.at_next) : "unresolved")
        << '\n';
  }
  const auto csv_path = write_text(dir / "maximizer_scan.csv", csv.str());

  ExperimentReport report;
  report.name = "maximizer_scan";
  report.parameters = config_parameters(cfg);
  report.parameters["directions"] = cfg.directions;
  report.parameters["radial_grid"] = cfg.radial_grid;
  report.artifacts.push_back(csv_path);
  report.add("M_{x,n+1} contained in M_{x,n}", 0, sample.nesting_violations, 0.0, sample.nesting_violations == 0);
  report.add("negative-definite at n+1 implies maximizing at n", 0, sample.definite_nesting_violations, 0.0,
             sample.definite_nesting_violations == 0);
  report.add("no maximizing sample below the grazing floor", 0, sample.grazing_violations, 0.0,
             sample.grazing_violations == 0);
  Json boundary = Json::array();
  for (const auto& b : sample.boundary_points) boundary.push_back({{"direction_index", b.direction_index}, {"speed", b.speed}});
  report.results["grazing_floor"] = sample.grazing_floor;
  report.results["unresolved"] = sample.unresolved;
  report.results["boundary_points"] = std::move(boundary);
  return finish(report, dir, RunResult{});
}

}  // namespace detail

/// Executes a validated configuration. Exit codes: 0 success, 1 failed checks,
/// 2 numerical failure (NearTangentRay, TwistFailure, ...).
inline RunResult run(const RunConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  ExperimentContext ctx{cfg.seed, dir};
  try {
    if (cfg.command == "orbit") {
      const Surface& surface = *cfg.surface;
      const OrbitSegment seg = orbit(surface, make_phase_point(surface, cfg.start, cfg.direction, cfg.angle), cfg.n);
      RunResult r;
      r.files.push_back(detail::write_orbit_file(dir / "orbit.csv", seg));
      r.message = "orbit: " + std::to_string(seg.points.size()) + " vertices";
      return r;
    }
    if (cfg.command == "variation") return detail::run_variation(cfg, dir);
    if (cfg.command == "conjugate") return detail::run_conjugate(cfg, dir);
    if (cfg.command == "maximizer-scan") return detail::run_maximizer_scan(cfg, dir);

    ExperimentReport report;
    if (cfg.experiment == "sphere") {
      report = sphere_report(cfg.alpha, cfg.n_max, ctx);
    } else if (cfg.experiment == "ellipsoid-flat") {
      report = ellipsoid_flat_point_check(cfg.a1, cfg.a2, cfg.a3, cfg.samples, ctx);
    } else if (cfg.experiment == "angle-threshold") {
      report = angle_threshold_estimate(*cfg.surface, cfg.angle_grid, cfg.point_samples, ctx);
    } else {
      report = symmetric_lift_check(cfg.A, cfg.B, cfg.C, cfg.lambda, cfg.n_bounces, ctx);
    }
    return detail::finish(report, dir, RunResult{});
  } catch (const Error& e) {
    std::string msg = std::string(e.kind());
    if (e.index()) msg += " at index " + std::to_string(*e.index());
    msg += ": ";
    msg += e.what();
    return {2, {}, msg};
  } catch (const std::invalid_argument& e) {
    return {2, {}, std::string("invalid parameters: ") + e.what()};
  }
}

}  // namespace billiards
