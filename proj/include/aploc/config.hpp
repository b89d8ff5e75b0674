#pragma once

#include "aploc/sim.hpp"

#include <string>

namespace aploc {

struct GeometryConfig {
  int n_rings = 4;
  int sensors_per_ring = 8;
  double shell_radius_m = 0.12;
  double head_radius_m = 0.09;
  double grid_spacing_m = 0.0115;
};

struct SweepDoc {
  std::vector<double> rhos{0.1, 0.5, 0.9};
  std::vector<std::optional<HeadPerturbation>> perturbations;  // default: standard set
  int n_trials = 100;

  SweepDoc();
};

/// Parsed, schema-validated run configuration. The JSON schema is strict:
/// unknown keys are rejected with their field path, `seed` is required, and
/// everything else has the defaults shown in the README.
struct RunConfig {
  std::uint64_t seed = 0;
  GeometryConfig geometry;
  TrialConfig trial;  // carries seed, methods, perturbation, solver settings
  SweepDoc sweep;
  std::string out_dir = "out";

  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_file(const std::string& path);
};

struct BuiltGeometry {
  SensorArray array;
  SourceGrid grid;  // lead fields against the unperturbed array
};

BuiltGeometry build_geometry(const RunConfig& cfg);

}  // namespace aploc
