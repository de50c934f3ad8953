// Command-line driver. Every flag mirrors a configuration field; a flag given on
// the command line overrides the same field from --config.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "billiards/config.hpp"

namespace {

enum class FieldType { Number, Integer, Vector, String, Surface };

struct Flag {
  std::string key;
  FieldType type;
  std::string value;
  CLI::Option* option = nullptr;
};

class FlagSet {
 public:
  void add(CLI::App* app, const std::string& name, const std::string& key, FieldType type, const std::string& help) {
    auto& flag = flags_.emplace_back(std::make_unique<Flag>(Flag{key, type, {}, nullptr}));
    flag->option = app->add_option(name, flag->value, help);
  }

  void overlay(nlohmann::json& j) const {
    for (const auto& f : flags_) {
      if (f->option->count() == 0) continue;
      try {
        switch (f->type) {
          case FieldType::Number: j[f->key] = std::stod(f->value); break;
          case FieldType::Integer: j[f->key] = std::stoll(f->value); break;
          case FieldType::Vector: j[f->key] = billiards::vector_spec_from_string(f->value, f->key); break;
          case FieldType::String: j[f->key] = f->value; break;
          case FieldType::Surface: j[f->key] = billiards::surface_spec_from_string(f->value); break;
        }
      } catch (const billiards::ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw billiards::ConfigError(f->key, f->key + ": cannot parse '" + f->value + "'");
      }
    }
  }

 private:
  std::vector<std::unique_ptr<Flag>> flags_;
};

void add_phase_flags(FlagSet& flags, CLI::App* sub, bool with_angle) {
  flags.add(sub, "--start", "start", FieldType::Vector, "start point on the surface, e.g. 0,0,1");
  flags.add(sub, "--direction", "direction", FieldType::Vector, "tangent direction at the start point");
  if (with_angle) flags.add(sub, "--angle", "angle", FieldType::Number, "reflection angle in (0, pi/2]");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Billiards in strictly convex hypersurfaces: orbits, second variation and conjugate points"};
  app.require_subcommand(1);
  app.fallthrough();

  FlagSet flags;
  std::string config_path;
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  flags.add(&app, "--surface", "surface", FieldType::Surface, "sphere:R[:d] or ellipsoid:a1,a2,...");
  flags.add(&app, "-o,--output-dir", "output_dir", FieldType::String, "directory for reports and CSV files");
  flags.add(&app, "--seed", "seed", FieldType::Integer, "random seed (default 42 or $BILLIARDS_SEED)");

  auto* orbit_cmd = app.add_subcommand("orbit", "iterate the billiard map and write orbit.csv");
  add_phase_flags(flags, orbit_cmd, true);
  flags.add(orbit_cmd, "--n", "n", FieldType::Integer, "number of bounces");

  auto* variation_cmd = app.add_subcommand("variation", "second variation of the segment x_0 .. x_{n+1}");
  add_phase_flags(flags, variation_cmd, true);
  flags.add(variation_cmd, "--n", "n", FieldType::Integer, "number of interior vertices");

  auto* conjugate_cmd = app.add_subcommand("conjugate", "locate a conjugate point at the (n+1)-th collision");
  add_phase_flags(flags, conjugate_cmd, false);
  flags.add(conjugate_cmd, "--n", "n", FieldType::Integer, "number of interior vertices");
  flags.add(conjugate_cmd, "--search", "search", FieldType::Vector, "interval lo,hi in |v|");
  flags.add(conjugate_cmd, "--prefer", "prefer", FieldType::String, "grazing (default) or normal");

  auto* scan_cmd = app.add_subcommand("maximizer-scan", "polar scan of the maximizing set at a point");
  flags.add(scan_cmd, "--start", "start", FieldType::Vector, "base point on the surface");
  flags.add(scan_cmd, "--n", "n", FieldType::Integer, "number of interior vertices");
  flags.add(scan_cmd, "--directions", "directions", FieldType::Integer, "number of directions");
  flags.add(scan_cmd, "--radial-grid", "radial_grid", FieldType::Integer, "number of |v| values");

  auto* experiment_cmd = app.add_subcommand("experiment", "scripted pass/fail experiments");
  experiment_cmd->require_subcommand(1);
  auto* sphere_cmd = experiment_cmd->add_subcommand("sphere", "closed-form sphere matrices");
  flags.add(sphere_cmd, "--alpha", "alpha", FieldType::Number, "reflection angle");
  flags.add(sphere_cmd, "--n-max", "n_max", FieldType::Integer, "largest segment length");
  auto* flat_cmd = experiment_cmd->add_subcommand("ellipsoid-flat", "no maximizing segment through a flat point");
  flags.add(flat_cmd, "--a1", "a1", FieldType::Number, "shortest semi-axis");
  flags.add(flat_cmd, "--a2", "a2", FieldType::Number, "middle semi-axis");
  flags.add(flat_cmd, "--a3", "a3", FieldType::Number, "longest semi-axis");
  flags.add(flat_cmd, "--samples", "samples", FieldType::Integer, "random one-bounce segments");
  auto* threshold_cmd = experiment_cmd->add_subcommand("angle-threshold", "empirical small-angle threshold");
  flags.add(threshold_cmd, "--angle-grid", "angle_grid", FieldType::Integer, "angles in (0, pi/2)");
  flags.add(threshold_cmd, "--point-samples", "point_samples", FieldType::Integer, "random base points");
  auto* lift_cmd = experiment_cmd->add_subcommand("symmetric-lift", "caustic orbit lifted into an ellipsoid");
  flags.add(lift_cmd, "--semi-a", "A", FieldType::Number, "ellipse semi-axis A");
  flags.add(lift_cmd, "--semi-b", "B", FieldType::Number, "ellipse semi-axis B");
  flags.add(lift_cmd, "--semi-c", "C", FieldType::Number, "transverse semi-axis C");
  flags.add(lift_cmd, "--lambda", "lambda", FieldType::Number, "confocal caustic parameter in (0, B^2)");
  flags.add(lift_cmd, "--n-bounces", "n_bounces", FieldType::Integer, "number of bounces");

  CLI11_PARSE(app, argc, argv);

  try {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      std::stringstream buf;
      buf << in.rdbuf();
      try {
        j = nlohmann::json::parse(buf.str());
      } catch (const nlohmann::json::parse_error& e) {
        throw billiards::ConfigError("", std::string("malformed JSON: ") + e.what());
      }
    }
    flags.overlay(j);
    for (auto* sub : app.get_subcommands()) {
      j["command"] = sub->get_name();
      for (auto* nested : sub->get_subcommands()) j["experiment"] = nested->get_name();
    }
    const billiards::RunConfig cfg = billiards::parse_config(j);
    const billiards::RunResult result = billiards::run(cfg);
    (result.exit_code == 0 ? std::cout : std::cerr) << result.message << '\n';
    for (const auto& f : result.files) std::cout << f << '\n';
    return result.exit_code;
  } catch (const billiards::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
