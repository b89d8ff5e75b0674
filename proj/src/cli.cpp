#include "aploc/cli.hpp"

#include "aploc/config.hpp"
#include "aploc/io.hpp"
#include "aploc/scanners.hpp"

#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <map>

namespace aploc {

namespace {

using json = nlohmann::ordered_json;

template <typename Fn>
int run_guarded(Fn&& fn) {
  try {
    fn();
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DegeneracyError& e) {
    std::cerr << "solver degeneracy: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitDegenerate;
  }
}

RunConfig load_config(const CliOptions& opts) {
  if (opts.config_path.empty())
    throw ConfigError("--config", "missing required option");
  RunConfig cfg = RunConfig::from_file(opts.config_path);
  if (opts.seed_override) {
    cfg.seed = *opts.seed_override;
    cfg.trial.seed = cfg.seed;
  }
  return cfg;
}

std::string out_path(const CliOptions& opts, const RunConfig& cfg,
                     const std::string& name) {
  const std::string dir = opts.out_dir != "out" || cfg.out_dir.empty()
                              ? opts.out_dir
                              : cfg.out_dir;
  return (std::filesystem::path(dir) / name).string();
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json vector_json(const Vector& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json trial_report_json(const TrialReport& report, int trial_index) {
  json rec;
  rec["trial"] = trial_index;
  rec["seed"] = report.seed;
  rec["rho"] = report.rho;
  rec["perturbation"] = report.perturbation_id;
  rec["truth_indices"] = report.truth_indices;
  json locs = json::array();
  for (const auto& p : report.truth_locations) locs.push_back(vec3_json(p));
  rec["truth_locations_m"] = locs;
  rec["achieved_correlations"] = report.achieved_correlations;
  json methods = json::array();
  for (const auto& outcome : report.methods) {
    json m;
    m["name"] = to_string(outcome.method);
    m["ok"] = outcome.ok;
    if (outcome.ok) {
      m["grid_indices"] = outcome.grid_indices;
      m["errors_mm"] = outcome.per_source_error_mm;
      m["mean_error_mm"] = outcome.mean_error_mm;
      m["converged"] = outcome.converged;
      m["iterations"] = outcome.iterations;
    } else {
      m["error"] = outcome.error;
    }
    methods.push_back(std::move(m));
  }
  rec["methods"] = std::move(methods);
  return rec;
}

}  // namespace

int cmd_simulate(const CliOptions& opts) {
  return run_guarded([&] {
    const RunConfig cfg = load_config(opts);
    const BuiltGeometry geo = build_geometry(cfg);
    const TrialData data = synthesize_trial(cfg.trial, geo.grid);

    write_text_file(out_path(opts, cfg, "recording.csv"),
                    recording_csv(data.rec, cfg.seed));
    write_text_file(out_path(opts, cfg, "sensors.csv"),
                    sensor_array_csv(geo.array, cfg.seed));
    write_text_file(out_path(opts, cfg, "grid.csv"),
                    grid_csv(geo.grid, cfg.seed));

    json truth;
    truth["tool"] = "aploc";
    truth["version"] = kVersion;
    truth["seed"] = cfg.seed;
    truth["orientation_mode"] = to_string(cfg.trial.orientation_mode);
    truth["indices"] = data.indices;
    json locs = json::array();
    json orients = json::array();
    for (std::size_t q = 0; q < data.indices.size(); ++q) {
      locs.push_back(vec3_json(geo.grid.points[data.indices[q]]));
      orients.push_back(vec3_json(data.orientations[q]));
    }
    truth["locations_m"] = locs;
    truth["orientations"] = orients;
    json courses = json::array();
    for (int q = 0; q < data.timecourses.rows(); ++q)
      courses.push_back(vector_json(data.timecourses.row(q)));
    truth["timecourses"] = courses;
    truth["achieved_correlations"] = data.achieved_correlations;
    write_text_file(out_path(opts, cfg, "ground_truth.json"),
                    truth.dump(2) + "\n");
  });
}

int cmd_localize(const CliOptions& opts) {
  return run_guarded([&] {
    const RunConfig cfg = load_config(opts);
    if (opts.data_path.empty())
      throw ConfigError("--data", "missing required option");
    const Matrix Y = parse_recording_csv(read_text_file(opts.data_path));

    const BuiltGeometry geo = build_geometry(cfg);
    if (Y.rows() != geo.array.size())
      throw ConfigError("data",
                        "recording has " + std::to_string(Y.rows()) +
                            " sensors but the geometry has " +
                            std::to_string(geo.array.size()));
    const Recording rec{Matrix(Y)};

    // Localization uses the (optionally misregistered) forward model.
    SourceGrid loc_grid = geo.grid;
    if (cfg.trial.perturbation && cfg.trial.perturbation->magnitude != 0.0)
      loc_grid = recompute_leadfields(
          geo.grid, perturb_forward(geo.array, *cfg.trial.perturbation));

    std::string csv = header_comment(cfg.seed);
    csv += "method,source,grid_index,x_mm,y_mm,z_mm,ox,oy,oz\n";
    json meta;
    meta["tool"] = "aploc";
    meta["version"] = kVersion;
    meta["seed"] = cfg.seed;
    meta["methods"] = json::object();

    auto emit = [&](Method method, const std::vector<DipoleEstimate>& ests) {
      for (std::size_t q = 0; q < ests.size(); ++q) {
        const auto& est = ests[q];
        csv += std::string(to_string(method)) + ',' + std::to_string(q + 1) +
               ',' + std::to_string(est.grid_index) + ',' +
               format_double(est.location.x() * 1e3) + ',' +
               format_double(est.location.y() * 1e3) + ',' +
               format_double(est.location.z() * 1e3) + ',' +
               format_double(est.orientation.x()) + ',' +
               format_double(est.orientation.y()) + ',' +
               format_double(est.orientation.z()) + '\n';
      }
    };

    for (Method method : cfg.trial.methods) {
      json m;
      switch (method) {
        case Method::ap: {
          ApConfig ap_cfg;
          ap_cfg.n_sources = cfg.trial.n_sources;
          ap_cfg.max_iterations = cfg.trial.ap_max_iterations;
          ap_cfg.convergence_tol = cfg.trial.ap_convergence_tol;
          ap_cfg.orientation_mode = cfg.trial.orientation_mode;
          const ApResult res = ap_localize(loc_grid, rec, ap_cfg);
          emit(method, res.estimates);
          m["converged"] = res.converged;
          m["iterations"] = res.iterations;
          m["objective"] = res.objective;
          json trace = json::array();
          for (const auto& entry : res.trace.entries)
            trace.push_back({{"iteration", entry.iteration},
                             {"source", entry.source},
                             {"grid_index", entry.grid_index},
                             {"objective", entry.objective}});
          m["objective_trace"] = std::move(trace);
          break;
        }
        case Method::rap_music:
        case Method::trap_music: {
          const ScanResult res =
              method == Method::rap_music
                  ? rap_music(loc_grid, rec, cfg.trial.n_sources,
                              cfg.trial.orientation_mode)
                  : trap_music(loc_grid, rec, cfg.trial.n_sources,
                               cfg.trial.orientation_mode);
          emit(method, res.estimates);
          m["localizer_values"] = res.localizer_values;
          break;
        }
        case Method::rap_beamformer: {
          const double reg = cfg.trial.beamformer_reg >= 0.0
                                 ? cfg.trial.beamformer_reg
                                 : default_beamformer_reg(covariance(rec));
          const ScanResult res =
              rap_beamformer(loc_grid, rec, cfg.trial.n_sources,
                             cfg.trial.orientation_mode, reg);
          emit(method, res.estimates);
          m["localizer_values"] = res.localizer_values;
          m["regularization"] = reg;
          break;
        }
      }
      meta["methods"][to_string(method)] = std::move(m);
    }

    write_text_file(out_path(opts, cfg, "estimates.csv"), csv);
    write_text_file(out_path(opts, cfg, "run_metadata.json"),
                    meta.dump(2) + "\n");
  });
}

int cmd_benchmark(const CliOptions& opts) {
  return run_guarded([&] {
    const RunConfig cfg = load_config(opts);
    const BuiltGeometry geo = build_geometry(cfg);

    SweepPlan plan;
    plan.base = cfg.trial;
    plan.rhos = cfg.sweep.rhos;
    plan.perturbations = cfg.sweep.perturbations;
    plan.n_trials = cfg.sweep.n_trials;
    plan.workers = opts.workers;
    const SweepReport report = run_sweep(plan, geo.array, geo.grid);

    std::string csv = header_comment(cfg.seed);
    csv += "rho,perturbation_id,method,mean_error_mm,stderr_mm,n_trials\n";
    for (const auto& cell : report.cells)
      csv += format_double(cell.rho) + ',' + cell.perturbation_id + ',' +
             to_string(cell.method) + ',' + format_double(cell.mean_error_mm) +
             ',' + format_double(cell.stderr_mm) + ',' +
             std::to_string(cell.n_trials) + '\n';
    write_text_file(out_path(opts, cfg, "sweep.csv"), csv);

    std::string jsonl = header_comment(cfg.seed);
    for (std::size_t i = 0; i < report.trials.size(); ++i)
      jsonl +=
          trial_report_json(report.trials[i], static_cast<int>(i)).dump() +
          "\n";
    write_text_file(out_path(opts, cfg, "trials.jsonl"), jsonl);

    // Per-cell ranking plus an overall tally of rank-1 finishes.
    std::string summary = header_comment(cfg.seed);
    std::map<Method, int> rank1;
    std::map<Method, double> total_error;
    std::map<Method, int> total_cells;
    for (double rho : plan.rhos)
      for (const auto& pert : plan.perturbations) {
        const std::string pid = pert ? pert->id() : "none";
        std::vector<const SweepCell*> cells;
        for (const auto& cell : report.cells)
          if (cell.rho == rho && cell.perturbation_id == pid)
            cells.push_back(&cell);
        std::sort(cells.begin(), cells.end(),
                  [](const SweepCell* a, const SweepCell* b) {
                    return a->mean_error_mm < b->mean_error_mm;
                  });
        summary += "rho=" + format_double(rho) + " perturbation=" + pid + ":";
        for (std::size_t r = 0; r < cells.size(); ++r) {
          summary += std::string(" ") + (r == 0 ? "" : "| ") +
                     to_string(cells[r]->method) + "=" +
                     format_double(cells[r]->mean_error_mm) + "mm";
          total_error[cells[r]->method] += cells[r]->mean_error_mm;
          total_cells[cells[r]->method] += 1;
        }
        if (!cells.empty()) rank1[cells.front()->method] += 1;
        summary += "\n";
      }
    summary += "rank-1 cells:";
    for (Method method : plan.base.methods)
      summary += std::string(" ") + to_string(method) + "=" +
                 std::to_string(rank1[method]);
    summary += "\nmethod-averaged error (mm):";
    for (Method method : plan.base.methods)
      if (total_cells[method] > 0)
        summary += std::string(" ") + to_string(method) + "=" +
                   format_double(total_error[method] / total_cells[method]);
    summary += "\n";
    write_text_file(out_path(opts, cfg, "summary.txt"), summary);
    std::cerr << summary;  // progress/diagnostics channel; files carry the data
  });
}

}  // namespace aploc
