#include "aploc/sim.hpp"

#include "aploc/assignment.hpp"
#include "aploc/scanners.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace aploc {

const char* to_string(Method m) {
  switch (m) {
    case Method::ap: return "ap";
    case Method::rap_music: return "rap_music";
    case Method::trap_music: return "trap_music";
    default: return "rap_beamformer";
  }
}

Method method_from_string(const std::string& name) {
  if (name == "ap") return Method::ap;
  if (name == "rap_music") return Method::rap_music;
  if (name == "trap_music") return Method::trap_music;
  if (name == "rap_beamformer") return Method::rap_beamformer;
  throw ParameterError("unknown method '" + name + "'");
}

void TrialConfig::validate() const {
  if (n_sources < 1) throw ParameterError("n_sources must be >= 1");
  if (n_samples < 1) throw ParameterError("n_samples must be >= 1");
  if (!(std::abs(rho) <= 1.0)) throw ParameterError("|rho| must be <= 1");
  if (!std::isfinite(snr_db)) throw ParameterError("snr_db must be finite");
  if (n_sinusoids < 1) throw ParameterError("n_sinusoids must be >= 1");
  if (!(sample_rate_hz > 0.0))
    throw ParameterError("sample_rate_hz must be positive");
  if (!(freq_lo_hz > 0.0) || !(freq_lo_hz <= freq_hi_hz) ||
      !(freq_hi_hz < 0.5 * sample_rate_hz))
    throw ParameterError("frequency range must lie within (0, Nyquist)");
  if (!(min_separation >= 0.0))
    throw ParameterError("min_separation must be >= 0");
  if (ap_max_iterations < 1)
    throw ParameterError("ap_max_iterations must be >= 1");
  if (!(ap_convergence_tol >= 0.0))
    throw ParameterError("ap_convergence_tol must be >= 0");
}

namespace {

Vector unit_power_mixture(const TrialConfig& cfg, Rng& rng) {
  Vector s = Vector::Zero(cfg.n_samples);
  for (int i = 0; i < cfg.n_sinusoids; ++i) {
    const double f = rng.uniform(cfg.freq_lo_hz, cfg.freq_hi_hz);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (int j = 0; j < cfg.n_samples; ++j)
      s(j) += std::sin(2.0 * M_PI * f * j / cfg.sample_rate_hz + phase);
  }
  const double rms = std::sqrt(s.squaredNorm() / cfg.n_samples);
  if (!(rms > 1e-15))
    throw NumericError("degenerate sinusoid mixture (zero power)");
  return s / rms;
}

}  // namespace

Matrix generate_timecourses(const TrialConfig& cfg, Rng& rng) {
  cfg.validate();
  Matrix S(cfg.n_sources, cfg.n_samples);
  S.row(0) = unit_power_mixture(cfg, rng);
  const double mix = std::sqrt(std::max(0.0, 1.0 - cfg.rho * cfg.rho));
  for (int q = 1; q < cfg.n_sources; ++q) {
    const Vector indep = unit_power_mixture(cfg, rng);
    Vector row = cfg.rho * S.row(0).transpose() + mix * indep;
    const double rms = std::sqrt(row.squaredNorm() / cfg.n_samples);
    if (!(rms > 1e-15))
      throw NumericError("degenerate correlated mixture (zero power)");
    S.row(q) = row / rms;
  }
  return S;
}

Matrix generate_timecourses(const TrialConfig& cfg) {
  Rng rng(cfg.seed);
  return generate_timecourses(cfg, rng);
}

Recording synthesize_recording(const SourceGrid& gen_grid,
                               const std::vector<int>& true_indices,
                               const std::vector<Vec3>& true_orientations,
                               const Matrix& S, double snr_db, Rng& rng) {
  if (true_indices.size() != static_cast<std::size_t>(S.rows()) ||
      true_orientations.size() != true_indices.size())
    throw ParameterError("source count mismatch between indices and S");
  const int m = static_cast<int>(gen_grid.stacked_leadfields.rows());

  Matrix A(m, S.rows());
  for (int q = 0; q < S.rows(); ++q)
    A.col(q) = gen_grid.leadfields[true_indices[q]] * true_orientations[q];
  const Matrix signal = A * S;

  Matrix noise(m, S.cols());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < S.cols(); ++j) noise(i, j) = rng.gaussian();

  const double signal_norm = signal.norm();
  if (!(signal_norm > 0.0))
    throw DegeneracyError("zero clean signal; SNR is undefined");
  const double scale =
      signal_norm / noise.norm() * std::pow(10.0, -snr_db / 20.0);
  return Recording(signal + scale * noise);
}

ErrorScore localization_error(const std::vector<Vec3>& estimates,
                              const std::vector<Vec3>& truth) {
  if (estimates.size() != truth.size())
    throw ParameterError("estimate/truth count mismatch");
  const int n = static_cast<int>(estimates.size());
  Matrix cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cost(i, j) = (estimates[i] - truth[j]).norm() * 1e3;
  const std::vector<int> match = min_cost_assignment(cost);

  ErrorScore score;
  score.per_source_mm.resize(n);
  for (int i = 0; i < n; ++i) {
    score.per_source_mm[i] = cost(i, match[i]);
    score.mean_mm += cost(i, match[i]);
  }
  score.mean_mm /= n;
  return score;
}

std::vector<double> pairwise_correlations(const Matrix& S) {
  std::vector<double> corr;
  for (int i = 0; i < S.rows(); ++i)
    for (int j = i + 1; j < S.rows(); ++j)
      corr.push_back(S.row(i).dot(S.row(j)) /
                     std::sqrt(S.row(i).squaredNorm() *
                               S.row(j).squaredNorm()));
  return corr;
}

namespace {

std::vector<int> draw_source_indices(const TrialConfig& cfg,
                                     const SourceGrid& grid, Rng& rng) {
  const int g_count = grid.size();
  if (g_count < cfg.n_sources)
    throw DegeneracyError("grid smaller than the requested source count");
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<int> idx;
    while (static_cast<int>(idx.size()) < cfg.n_sources) {
      const int candidate = static_cast<int>(rng.below(g_count));
      bool duplicate = false;
      for (int prev : idx) duplicate |= (prev == candidate);
      if (!duplicate) idx.push_back(candidate);
    }
    bool separated = true;
    for (std::size_t a = 0; a < idx.size() && separated; ++a)
      for (std::size_t b = a + 1; b < idx.size(); ++b)
        if ((grid.points[idx[a]] - grid.points[idx[b]]).norm() <
            cfg.min_separation) {
          separated = false;
          break;
        }
    if (separated) return idx;
  }
  throw DegeneracyError(
      "could not draw sources satisfying the separation floor");
}

}  // namespace

TrialData synthesize_trial(const TrialConfig& cfg, const SourceGrid& gen_grid) {
  cfg.validate();
  Rng rng(cfg.seed);

  TrialData data;
  data.indices = draw_source_indices(cfg, gen_grid, rng);
  data.timecourses = generate_timecourses(cfg, rng);

  data.orientations.reserve(data.indices.size());
  for (int idx : data.indices) {
    if (cfg.orientation_mode == OrientationMode::fixed) {
      data.orientations.push_back(gen_grid.orientations[idx]);
    } else {
      // Random tangential moment; radial moments are invisible.
      const auto [t1, t2] = tangent_basis(gen_grid.points[idx]);
      const double psi = rng.uniform(0.0, 2.0 * M_PI);
      data.orientations.push_back(std::cos(psi) * t1 + std::sin(psi) * t2);
    }
  }
  data.rec = synthesize_recording(gen_grid, data.indices, data.orientations,
                                  data.timecourses, cfg.snr_db, rng);
  data.achieved_correlations = pairwise_correlations(data.timecourses);
  return data;
}

TrialReport run_trial(const TrialConfig& cfg, const TrialEnv& env) {
  if (env.gen_grid == nullptr || env.loc_grid == nullptr)
    throw ParameterError("trial environment is missing a grid");
  const TrialData data = synthesize_trial(cfg, *env.gen_grid);

  TrialReport report;
  report.seed = cfg.seed;
  report.rho = cfg.rho;
  report.perturbation_id =
      cfg.perturbation ? cfg.perturbation->id() : "none";
  report.truth_indices = data.indices;
  for (int idx : data.indices)
    report.truth_locations.push_back(env.gen_grid->points[idx]);
  report.truth_orientations = data.orientations;
  report.achieved_correlations = data.achieved_correlations;

  for (Method method : cfg.methods) {
    MethodOutcome outcome;
    outcome.method = method;
    try {
      std::vector<DipoleEstimate> estimates;
      switch (method) {
        case Method::ap: {
          ApConfig ap_cfg;
          ap_cfg.n_sources = cfg.n_sources;
          ap_cfg.max_iterations = cfg.ap_max_iterations;
          ap_cfg.convergence_tol = cfg.ap_convergence_tol;
          ap_cfg.orientation_mode = cfg.orientation_mode;
          ApResult res = ap_localize(*env.loc_grid, data.rec, ap_cfg);
          estimates = std::move(res.estimates);
          outcome.converged = res.converged;
          outcome.iterations = res.iterations;
          break;
        }
        case Method::rap_music: {
          ScanResult res = rap_music(*env.loc_grid, data.rec, cfg.n_sources,
                                     cfg.orientation_mode);
          estimates = std::move(res.estimates);
          outcome.converged = true;
          outcome.iterations = cfg.n_sources;
          break;
        }
        case Method::trap_music: {
          ScanResult res = trap_music(*env.loc_grid, data.rec, cfg.n_sources,
                                      cfg.orientation_mode);
          estimates = std::move(res.estimates);
          outcome.converged = true;
          outcome.iterations = cfg.n_sources;
          break;
        }
        case Method::rap_beamformer: {
          const double reg =
              cfg.beamformer_reg >= 0.0
                  ? cfg.beamformer_reg
                  : default_beamformer_reg(covariance(data.rec));
          ScanResult res = rap_beamformer(*env.loc_grid, data.rec,
                                          cfg.n_sources,
                                          cfg.orientation_mode, reg);
          estimates = std::move(res.estimates);
          outcome.converged = true;
          outcome.iterations = cfg.n_sources;
          break;
        }
      }
      std::vector<Vec3> est_locations;
      for (const auto& est : estimates) {
        outcome.grid_indices.push_back(est.grid_index);
        est_locations.push_back(est.location);
      }
      const ErrorScore score =
          localization_error(est_locations, report.truth_locations);
      outcome.per_source_error_mm = score.per_source_mm;
      outcome.mean_error_mm = score.mean_mm;
      outcome.ok = true;
    } catch (const std::exception& e) {
      outcome.ok = false;
      outcome.error = e.what();
    }
    report.methods.push_back(std::move(outcome));
  }
  return report;
}

std::uint64_t trial_seed(std::uint64_t master, int perturbation_index,
                         int trial_index) {
  // Independent of rho so correlation levels see matched draws.
  const std::uint64_t stream =
      (static_cast<std::uint64_t>(perturbation_index) << 32) |
      static_cast<std::uint32_t>(trial_index);
  return Rng::derive(master, stream).next_u64();
}

SweepReport run_sweep(const SweepPlan& plan, const SensorArray& gen_array,
                      const SourceGrid& gen_grid) {
  if (plan.n_trials < 1) throw ParameterError("n_trials must be >= 1");
  if (plan.rhos.empty()) throw ParameterError("sweep needs at least one rho");
  if (plan.perturbations.empty())
    throw ParameterError("sweep needs at least one perturbation entry");
  plan.base.validate();

  // Localization grids, one per perturbation, shared read-only by workers.
  std::vector<SourceGrid> loc_grids;
  loc_grids.reserve(plan.perturbations.size());
  for (const auto& pert : plan.perturbations) {
    if (pert && pert->magnitude != 0.0)
      loc_grids.push_back(
          recompute_leadfields(gen_grid, perturb_forward(gen_array, *pert)));
    else
      loc_grids.push_back(gen_grid);
  }

  struct Job {
    int pert_index;
    int rho_index;
    int trial_index;
  };
  std::vector<Job> jobs;
  for (int pi = 0; pi < static_cast<int>(plan.perturbations.size()); ++pi)
    for (int ri = 0; ri < static_cast<int>(plan.rhos.size()); ++ri)
      for (int t = 0; t < plan.n_trials; ++t) jobs.push_back({pi, ri, t});

  std::vector<TrialReport> reports(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const Job& job = jobs[j];
      TrialConfig cfg = plan.base;
      cfg.rho = plan.rhos[job.rho_index];
      cfg.perturbation = plan.perturbations[job.pert_index];
      cfg.seed = trial_seed(plan.base.seed, job.pert_index, job.trial_index);
      TrialEnv env;
      env.gen_grid = &gen_grid;
      env.loc_grid = &loc_grids[job.pert_index];
      reports[j] = run_trial(cfg, env);
    }
  };

  unsigned n_workers = plan.workers > 0
                           ? static_cast<unsigned>(plan.workers)
                           : std::max(1u, std::thread::hardware_concurrency());
  n_workers = std::min<unsigned>(n_workers, jobs.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SweepReport report;
  report.trials = std::move(reports);

  // Aggregate in deterministic (rho, perturbation, method) order.
  for (double rho : plan.rhos)
    for (int pi = 0; pi < static_cast<int>(plan.perturbations.size()); ++pi)
      for (Method method : plan.base.methods) {
        SweepCell cell;
        cell.rho = rho;
        cell.perturbation_id = plan.perturbations[pi]
                                   ? plan.perturbations[pi]->id()
                                   : "none";
        cell.method = method;
        double sum = 0.0, sum_sq = 0.0;
        int n = 0;
        for (std::size_t j = 0; j < jobs.size(); ++j) {
          if (jobs[j].pert_index != pi ||
              plan.rhos[jobs[j].rho_index] != rho)
            continue;
          for (const auto& outcome : report.trials[j].methods)
            if (outcome.method == method && outcome.ok) {
              sum += outcome.mean_error_mm;
              sum_sq += outcome.mean_error_mm * outcome.mean_error_mm;
              ++n;
            }
        }
        cell.n_trials = n;
        if (n > 0) cell.mean_error_mm = sum / n;
        if (n > 1)
          cell.stderr_mm = std::sqrt(
              std::max(0.0, (sum_sq - sum * sum / n) / (n - 1)) / n);
        report.cells.push_back(cell);
      }
  return report;
}

std::vector<HeadPerturbation> benchmark_perturbations() {
  using HP = HeadPerturbation;
  using Axis = HeadPerturbation::Axis;
  return {
      HP::translation_mm(Axis::x, 1.0), HP::translation_mm(Axis::x, 2.0),
      HP::rotation_deg(Axis::x, 1.0),   HP::rotation_deg(Axis::x, 2.0),
      HP::translation_mm(Axis::z, 1.0), HP::translation_mm(Axis::z, 2.0),
      HP::rotation_deg(Axis::y, 1.0),   HP::rotation_deg(Axis::y, 2.0),
      HP::translation_mm(Axis::y, 1.0), HP::translation_mm(Axis::y, 2.0),
  };
}

}  // namespace aploc
