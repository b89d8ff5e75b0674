#pragma once

#include "aploc/ap.hpp"
#include "aploc/geometry.hpp"
#include "aploc/rng.hpp"

#include <optional>
#include <string>
#include <vector>

namespace aploc {

enum class Method { ap, rap_music, trap_music, rap_beamformer };

const char* to_string(Method m);
Method method_from_string(const std::string& name);

/// Everything needed to synthesize and localize one trial.
struct TrialConfig {
  std::uint64_t seed = 0;
  int n_sources = 2;
  double rho = 0.0;        // target correlation to source 1, in [-1, 1]
  double snr_db = 0.0;     // Frobenius SNR of clean signal vs noise
  int n_samples = 50;
  double freq_lo_hz = 10.0;
  double freq_hi_hz = 30.0;
  int n_sinusoids = 3;
  // Longest 50-sample window with 30 Hz strictly below Nyquist; short
  // windows leave every sinusoid mixture highly correlated.
  double sample_rate_hz = 62.5;
  double min_separation = 0.03;  // meters, between true sources
  OrientationMode orientation_mode = OrientationMode::fixed;
  std::optional<HeadPerturbation> perturbation;
  std::vector<Method> methods;
  int ap_max_iterations = 20;
  double ap_convergence_tol = 0.0;
  double beamformer_reg = -1.0;  // < 0: 1e-3 trace(C)/M

  void validate() const;
};

/// Unit-power sinusoid-mixture time courses (Q x N). Source 1 is a mixture
/// of n_sinusoids random-frequency, random-phase sinusoids; each further
/// source is rho * source1 + sqrt(1-rho^2) * (independent mixture),
/// renormalized to unit sample power. The realized sample correlation is
/// whatever the finite window gives; it is reported, never assumed.
Matrix generate_timecourses(const TrialConfig& cfg, Rng& rng);
Matrix generate_timecourses(const TrialConfig& cfg);  // seeds from cfg.seed

/// Y = A S + noise, with A the topographies of the true sources in the
/// generator grid and white Gaussian noise scaled so that
/// 10 log10(||AS||_F^2 / ||noise||_F^2) equals snr_db exactly.
Recording synthesize_recording(const SourceGrid& gen_grid,
                               const std::vector<int>& true_indices,
                               const std::vector<Vec3>& true_orientations,
                               const Matrix& S, double snr_db, Rng& rng);

struct ErrorScore {
  std::vector<double> per_source_mm;  // ordered by estimate
  double mean_mm = 0.0;
};

/// Minimum-cost perfect matching between estimated and true locations under
/// Euclidean distance; distances reported in millimeters.
ErrorScore localization_error(const std::vector<Vec3>& estimates,
                              const std::vector<Vec3>& truth);

/// Uncentered sample correlation of every source pair (i < j, row-major).
std::vector<double> pairwise_correlations(const Matrix& S);

struct MethodOutcome {
  Method method = Method::ap;
  bool ok = false;
  std::string error;  // failure record when !ok
  std::vector<int> grid_indices;
  std::vector<double> per_source_error_mm;
  double mean_error_mm = 0.0;
  bool converged = false;
  int iterations = 0;  // AP cycles, or recursions for the scanners
};

struct TrialReport {
  std::uint64_t seed = 0;
  double rho = 0.0;
  std::string perturbation_id = "none";
  std::vector<int> truth_indices;
  std::vector<Vec3> truth_locations;
  std::vector<Vec3> truth_orientations;
  std::vector<double> achieved_correlations;  // pairwise, i < j
  std::vector<MethodOutcome> methods;
};

/// Generator and localization forward models for a trial. loc_grid carries
/// the (optionally perturbed) lead fields used by the localizers; it equals
/// gen_grid when there is no misregistration.
struct TrialEnv {
  const SourceGrid* gen_grid = nullptr;
  const SourceGrid* loc_grid = nullptr;
};

/// Drawn ground truth plus the synthesized recording of one trial.
struct TrialData {
  std::vector<int> indices;
  std::vector<Vec3> orientations;
  Matrix timecourses;  // Q x N
  Recording rec;
  std::vector<double> achieved_correlations;
};

/// The data-generation half of run_trial, reusable by the simulate command:
/// draws true sources (uniform over grid points, pairwise separation >=
/// min_separation), time courses, and noise, all from cfg.seed.
TrialData synthesize_trial(const TrialConfig& cfg, const SourceGrid& gen_grid);

/// One Monte-Carlo trial: synthesize with the generator forward model,
/// localize with every requested method against the localization forward
/// model, and score errors. Method failures are recorded per method without
/// aborting the others.
TrialReport run_trial(const TrialConfig& cfg, const TrialEnv& env);

struct SweepCell {
  double rho = 0.0;
  std::string perturbation_id = "none";
  Method method = Method::ap;
  double mean_error_mm = 0.0;
  double stderr_mm = 0.0;
  int n_trials = 0;  // trials contributing (method succeeded)
};

struct SweepReport {
  std::vector<SweepCell> cells;      // ordered rho-major, then perturbation
  std::vector<TrialReport> trials;   // ordered by job index
};

struct SweepPlan {
  TrialConfig base;                 // base.seed is the master seed
  std::vector<double> rhos;
  std::vector<std::optional<HeadPerturbation>> perturbations;
  int n_trials = 1;
  int workers = 0;                  // 0 = hardware concurrency
};

/// Full factorial sweep over rho x perturbation. Trial seeds derive from
/// (master seed, perturbation index, trial index) and are independent of
/// rho, so cells at different correlation levels see matched noise and
/// source draws. Trials run in parallel; aggregation folds in job order, so
/// the report is bit-identical for any worker count.
SweepReport run_sweep(const SweepPlan& plan, const SensorArray& gen_array,
                      const SourceGrid& gen_grid);

/// Seed of trial t under perturbation index pi.
std::uint64_t trial_seed(std::uint64_t master, int perturbation_index,
                         int trial_index);

/// The ten translation/rotation misregistrations of the benchmark protocol:
/// 1-2 mm translations and 1-2 degree rotations about the head origin.
std::vector<HeadPerturbation> benchmark_perturbations();

}  // namespace aploc
