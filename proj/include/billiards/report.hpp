#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "billiards/surface.hpp"

namespace billiards {

using Json = nlohmann::ordered_json;

struct Check {
  std::string description;
  Json expected;
  Json observed;
  double tolerance = 0.0;
  bool pass = false;
};

/// Pass/fail record of one scripted run. Serialized as
/// {name, parameters, pass, checks[], artifacts[], results}.
struct ExperimentReport {
  std::string name;
  Json parameters = Json::object();
  std::vector<Check> checks;
  std::vector<std::string> artifacts;
  Json results = Json::object();

  bool passed() const {
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return true;
  }

  const Check& add(std::string description, Json expected, Json observed, double tolerance, bool pass) {
    checks.push_back({std::move(description), std::move(expected), std::move(observed), tolerance, pass});
    return checks.back();
  }

  /// |observed - expected| <= tolerance.
  const Check& add_near(std::string description, double expected, double observed, double tolerance) {
    return add(std::move(description), expected, observed, tolerance, std::abs(observed - expected) <= tolerance);
  }

  std::vector<const Check*> failures() const {
    std::vector<const Check*> out;
    for (const auto& c : checks) {
      if (!c.pass) out.push_back(&c);
    }
    return out;
  }

  Json to_json() const {
    Json j;
    j["name"] = name;
    j["parameters"] = parameters;
    j["pass"] = passed();
    j["checks"] = Json::array();
    for (const auto& c : checks) {
      j["checks"].push_back({{"description", c.description},
                             {"expected", c.expected},
                             {"observed", c.observed},
                             {"tolerance", c.tolerance},
                             {"pass", c.pass}});
    }
    j["artifacts"] = artifacts;
    j["results"] = results;
    return j;
  }
};

inline Json to_json(const Vec& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline Json to_json(const Mat& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(std::move(row));
  }
  return j;
}

/// JSON description of a sphere or ellipsoid.
inline Json surface_to_json(const Surface& surface) {
  if (const auto* s = std::get_if<Sphere>(&surface.kind())) {
    return {{"kind", "sphere"}, {"radius", s->radius}, {"dimension", s->dimension}};
  }
  if (const auto* e = std::get_if<Ellipsoid>(&surface.kind())) {
    return {{"kind", "ellipsoid"}, {"semi_axes", to_json(e->semi_axes)}};
  }
  return {{"kind", "implicit"}, {"label", std::get<GenericImplicit>(surface.kind()).label}};
}

/// Surface from {"kind":"sphere","radius":r[,"dimension":d]} or
/// {"kind":"ellipsoid","semi_axes":[...]}. Errors name the offending field.
inline Surface surface_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("surface: expected an object");
  if (!j.contains("kind") || !j["kind"].is_string()) throw std::invalid_argument("surface.kind: missing");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "sphere") {
    if (!j.contains("radius") || !j["radius"].is_number()) throw std::invalid_argument("surface.radius: missing");
    const double r = j["radius"].get<double>();
    if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("surface.radius: must be positive");
    int d = 3;
    if (j.contains("dimension")) {
      if (!j["dimension"].is_number_integer() || j["dimension"].get<int>() < 2) {
        throw std::invalid_argument("surface.dimension: must be an integer >= 2");
      }
      d = j["dimension"].get<int>();
    }
    return Surface::sphere(r, d);
  }
  if (kind == "ellipsoid") {
    if (!j.contains("semi_axes") || !j["semi_axes"].is_array() || j["semi_axes"].size() < 2) {
      throw std::invalid_argument("surface.semi_axes: expected an array of at least 2 lengths");
    }
    Vec a(static_cast<Eigen::Index>(j["semi_axes"].size()));
    for (std::size_t i = 0; i < j["semi_axes"].size(); ++i) {
      const auto& e = j["semi_axes"][i];
      if (!e.is_number() || !(e.get<double>() > 0.0) || !std::isfinite(e.get<double>())) {
        throw std::invalid_argument("surface.semi_axes: entries must be positive numbers");
      }
      a[static_cast<Eigen::Index>(i)] = e.get<double>();
    }
    return Surface::ellipsoid(a);
  }
  throw std::invalid_argument("unknown surface kind: " + kind);
}

/// Writes `<dir>/<name>.report.json` and returns its path.
inline std::filesystem::path write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / (report.name + ".report.json");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << report.to_json().dump(2) << '\n';
  return path;
}

}  // namespace billiards
