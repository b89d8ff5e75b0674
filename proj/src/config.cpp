#include "aploc/config.hpp"

#include "aploc/io.hpp"

#include <json.hpp>

#include <algorithm>

namespace aploc {

namespace {

using json = nlohmann::ordered_json;

void reject_unknown_keys(const json& obj, const std::string& path,
                         std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return it.key() == k;
        }) == allowed.end())
      throw ConfigError(path.empty() ? it.key() : path + "." + it.key(),
                        "unknown field");
  }
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
  return v.get<int>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

HeadPerturbation::Axis parse_axis(const json& v, const std::string& path) {
  const std::string a = as_string(v, path);
  if (a == "x") return HeadPerturbation::Axis::x;
  if (a == "y") return HeadPerturbation::Axis::y;
  if (a == "z") return HeadPerturbation::Axis::z;
  throw ConfigError(path, "axis must be one of x, y, z");
}

HeadPerturbation parse_perturbation(const json& obj, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  reject_unknown_keys(obj, path, {"kind", "axis", "magnitude_mm",
                                  "magnitude_deg"});
  const json* kind = find(obj, "kind");
  if (!kind) throw ConfigError(path + ".kind", "missing required field");
  const std::string k = as_string(*kind, path + ".kind");
  const json* axis = find(obj, "axis");
  if (!axis) throw ConfigError(path + ".axis", "missing required field");
  const auto ax = parse_axis(*axis, path + ".axis");

  if (k == "translation") {
    const json* mag = find(obj, "magnitude_mm");
    if (!mag)
      throw ConfigError(path + ".magnitude_mm", "missing required field");
    if (find(obj, "magnitude_deg"))
      throw ConfigError(path + ".magnitude_deg",
                        "translations take magnitude_mm");
    return HeadPerturbation::translation_mm(
        ax, as_number(*mag, path + ".magnitude_mm"));
  }
  if (k == "rotation") {
    const json* mag = find(obj, "magnitude_deg");
    if (!mag)
      throw ConfigError(path + ".magnitude_deg", "missing required field");
    if (find(obj, "magnitude_mm"))
      throw ConfigError(path + ".magnitude_mm", "rotations take magnitude_deg");
    return HeadPerturbation::rotation_deg(
        ax, as_number(*mag, path + ".magnitude_deg"));
  }
  throw ConfigError(path + ".kind", "must be 'translation' or 'rotation'");
}

OrientationMode parse_mode(const json& v, const std::string& path) {
  const std::string s = as_string(v, path);
  if (s == "fixed") return OrientationMode::fixed;
  if (s == "free") return OrientationMode::free;
  throw ConfigError(path, "orientation_mode must be 'fixed' or 'free'");
}

}  // namespace

SweepDoc::SweepDoc() {
  for (const auto& p : benchmark_perturbations()) perturbations.push_back(p);
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError("<document>", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("<document>", "expected an object");
  reject_unknown_keys(doc, "",
                      {"seed", "geometry", "sources", "methods",
                       "perturbation", "solver", "sweep", "output"});

  RunConfig cfg;

  const json* seed = find(doc, "seed");
  if (!seed) throw ConfigError("seed", "missing required field");
  if (!seed->is_number_unsigned() && !seed->is_number_integer())
    throw ConfigError("seed", "expected an unsigned integer");
  cfg.seed = seed->get<std::uint64_t>();
  cfg.trial.seed = cfg.seed;

  if (const json* g = find(doc, "geometry")) {
    if (!g->is_object()) throw ConfigError("geometry", "expected an object");
    reject_unknown_keys(*g, "geometry",
                        {"n_rings", "sensors_per_ring", "shell_radius_m",
                         "head_radius_m", "grid_spacing_m"});
    if (const json* v = find(*g, "n_rings"))
      cfg.geometry.n_rings = as_int(*v, "geometry.n_rings");
    if (const json* v = find(*g, "sensors_per_ring"))
      cfg.geometry.sensors_per_ring = as_int(*v, "geometry.sensors_per_ring");
    if (const json* v = find(*g, "shell_radius_m"))
      cfg.geometry.shell_radius_m = as_number(*v, "geometry.shell_radius_m");
    if (const json* v = find(*g, "head_radius_m"))
      cfg.geometry.head_radius_m = as_number(*v, "geometry.head_radius_m");
    if (const json* v = find(*g, "grid_spacing_m"))
      cfg.geometry.grid_spacing_m = as_number(*v, "geometry.grid_spacing_m");
  }

  if (const json* s = find(doc, "sources")) {
    if (!s->is_object()) throw ConfigError("sources", "expected an object");
    reject_unknown_keys(*s, "sources",
                        {"q", "rho", "snr_db", "n_samples", "freq_range_hz",
                         "n_sinusoids", "sample_rate_hz", "min_separation_m",
                         "orientation_mode"});
    if (const json* v = find(*s, "q"))
      cfg.trial.n_sources = as_int(*v, "sources.q");
    if (const json* v = find(*s, "rho"))
      cfg.trial.rho = as_number(*v, "sources.rho");
    if (const json* v = find(*s, "snr_db"))
      cfg.trial.snr_db = as_number(*v, "sources.snr_db");
    if (const json* v = find(*s, "n_samples"))
      cfg.trial.n_samples = as_int(*v, "sources.n_samples");
    if (const json* v = find(*s, "freq_range_hz")) {
      if (!v->is_array() || v->size() != 2)
        throw ConfigError("sources.freq_range_hz", "expected [lo, hi]");
      cfg.trial.freq_lo_hz = as_number((*v)[0], "sources.freq_range_hz[0]");
      cfg.trial.freq_hi_hz = as_number((*v)[1], "sources.freq_range_hz[1]");
    }
    if (const json* v = find(*s, "n_sinusoids"))
      cfg.trial.n_sinusoids = as_int(*v, "sources.n_sinusoids");
    if (const json* v = find(*s, "sample_rate_hz"))
      cfg.trial.sample_rate_hz = as_number(*v, "sources.sample_rate_hz");
    if (const json* v = find(*s, "min_separation_m"))
      cfg.trial.min_separation = as_number(*v, "sources.min_separation_m");
    if (const json* v = find(*s, "orientation_mode"))
      cfg.trial.orientation_mode = parse_mode(*v, "sources.orientation_mode");
  }

  if (const json* m = find(doc, "methods")) {
    if (!m->is_array()) throw ConfigError("methods", "expected an array");
    for (std::size_t i = 0; i < m->size(); ++i) {
      const std::string name =
          as_string((*m)[i], "methods[" + std::to_string(i) + "]");
      try {
        cfg.trial.methods.push_back(method_from_string(name));
      } catch (const ParameterError& e) {
        throw ConfigError("methods[" + std::to_string(i) + "]", e.what());
      }
    }
  } else {
    cfg.trial.methods = {Method::ap, Method::rap_music, Method::trap_music,
                         Method::rap_beamformer};
  }

  if (const json* p = find(doc, "perturbation"))
    cfg.trial.perturbation = parse_perturbation(*p, "perturbation");

  if (const json* s = find(doc, "solver")) {
    if (!s->is_object()) throw ConfigError("solver", "expected an object");
    reject_unknown_keys(
        *s, "solver", {"max_iterations", "convergence_tol_m", "beamformer_reg"});
    if (const json* v = find(*s, "max_iterations"))
      cfg.trial.ap_max_iterations = as_int(*v, "solver.max_iterations");
    if (const json* v = find(*s, "convergence_tol_m"))
      cfg.trial.ap_convergence_tol = as_number(*v, "solver.convergence_tol_m");
    if (const json* v = find(*s, "beamformer_reg"))
      cfg.trial.beamformer_reg = as_number(*v, "solver.beamformer_reg");
  }

  if (const json* s = find(doc, "sweep")) {
    if (!s->is_object()) throw ConfigError("sweep", "expected an object");
    reject_unknown_keys(*s, "sweep", {"rhos", "perturbations", "n_trials"});
    if (const json* v = find(*s, "rhos")) {
      if (!v->is_array() || v->empty())
        throw ConfigError("sweep.rhos", "expected a non-empty array");
      cfg.sweep.rhos.clear();
      for (std::size_t i = 0; i < v->size(); ++i)
        cfg.sweep.rhos.push_back(
            as_number((*v)[i], "sweep.rhos[" + std::to_string(i) + "]"));
    }
    if (const json* v = find(*s, "perturbations")) {
      cfg.sweep.perturbations.clear();
      if (v->is_string()) {
        if (v->get<std::string>() != "standard")
          throw ConfigError("sweep.perturbations",
                            "the only named set is 'standard'");
        for (const auto& p : benchmark_perturbations())
          cfg.sweep.perturbations.push_back(p);
      } else if (v->is_array()) {
        for (std::size_t i = 0; i < v->size(); ++i) {
          const std::string path =
              "sweep.perturbations[" + std::to_string(i) + "]";
          const json& entry = (*v)[i];
          if (entry.is_string() && entry.get<std::string>() == "none")
            cfg.sweep.perturbations.push_back(std::nullopt);
          else
            cfg.sweep.perturbations.push_back(
                parse_perturbation(entry, path));
        }
        if (cfg.sweep.perturbations.empty())
          throw ConfigError("sweep.perturbations", "expected a non-empty array");
      } else {
        throw ConfigError("sweep.perturbations",
                          "expected 'standard' or an array");
      }
    }
    if (const json* v = find(*s, "n_trials")) {
      cfg.sweep.n_trials = as_int(*v, "sweep.n_trials");
      if (cfg.sweep.n_trials < 1)
        throw ConfigError("sweep.n_trials", "must be >= 1");
    }
  }

  if (const json* o = find(doc, "output")) {
    if (!o->is_object()) throw ConfigError("output", "expected an object");
    reject_unknown_keys(*o, "output", {"dir"});
    if (const json* v = find(*o, "dir"))
      cfg.out_dir = as_string(*v, "output.dir");
  }

  // Fail fast on invalid values, with config-level diagnostics.
  try {
    cfg.trial.validate();
  } catch (const ParameterError& e) {
    throw ConfigError("sources", e.what());
  }
  if (cfg.geometry.n_rings < 1)
    throw ConfigError("geometry.n_rings", "must be >= 1");
  if (cfg.geometry.sensors_per_ring < 2)
    throw ConfigError("geometry.sensors_per_ring", "must be >= 2");
  if (!(cfg.geometry.head_radius_m > 0.0))
    throw ConfigError("geometry.head_radius_m", "must be positive");
  if (!(cfg.geometry.shell_radius_m > cfg.geometry.head_radius_m))
    throw ConfigError("geometry.shell_radius_m",
                      "must exceed the head radius");
  if (!(cfg.geometry.grid_spacing_m > 0.0) ||
      !(cfg.geometry.grid_spacing_m < cfg.geometry.head_radius_m))
    throw ConfigError("geometry.grid_spacing_m",
                      "must satisfy 0 < spacing < head_radius");
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  return from_json_text(read_text_file(path));
}

BuiltGeometry build_geometry(const RunConfig& cfg) {
  BuiltGeometry built;
  built.array = build_sensor_array(cfg.geometry.n_rings,
                                   cfg.geometry.sensors_per_ring,
                                   cfg.geometry.shell_radius_m);
  built.grid = build_source_grid(built.array, cfg.geometry.grid_spacing_m,
                                 cfg.geometry.head_radius_m,
                                 cfg.trial.orientation_mode);
  return built;
}

}  // namespace aploc
