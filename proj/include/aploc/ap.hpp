#pragma once

#include "aploc/geometry.hpp"
#include "aploc/projection.hpp"

#include <vector>

namespace aploc {

struct ApConfig {
  int n_sources = 1;           // Q, assumed known, Q < M
  int max_iterations = 20;     // refinement cycles
  double convergence_tol = 0.0;  // meters; 0 = stop when no index changes
  OrientationMode orientation_mode = OrientationMode::fixed;

  // Restarted initialization. The cyclic refinement is a coordinate ascent
  // and can stall in swap traps when every source is misplaced yet no single
  // move improves the objective (synchronous sources make these common).
  // ap_localize therefore seeds source 1 from the n_restarts strongest
  // single-source candidates, evaluates each sequential initialization, and
  // fully refines the n_refine most promising ones, returning the run with
  // the highest objective. n_restarts = 1 reproduces the plain algorithm.
  int n_restarts = 96;
  int n_refine = 4;

  void validate(int sensor_count, int grid_size) const;
};

struct DipoleEstimate {
  int grid_index = -1;
  Vec3 location = Vec3::Zero();     // meters
  Vec3 orientation = Vec3::Zero();  // unit moment direction
  Vector timecourse;                // N samples
};

struct ApTraceEntry {
  int iteration;   // 0 = initialization
  int source;      // 1-based source slot
  int grid_index;  // location of that source after the step
  double objective;  // tr(P_A C) for the full current topography set
};

/// Per-step objective record. Each accepted step maximizes the criterion, so
/// the exact sequence cannot decrease; push() verifies that and reports the
/// running maximum when re-evaluation fluctuates below the previous value by
/// sub-epsilon amounts. Decreases beyond numerical noise indicate a broken
/// update and throw.
struct ApTrace {
  std::vector<ApTraceEntry> entries;

  void push(int iteration, int source, int grid_index, double objective);
  bool non_decreasing() const;
  double final_objective() const;
};

struct ScanPick {
  int index = -1;
  double value = kDeflatedOut;
  Vec3 orientation = Vec3::Zero();  // fixed mode: the grid orientation
};

/// Exhaustive search of the deflated localizer over the grid. Fixed mode
/// evaluates (l'QCQl)/(l'Ql) at each point's fixed topography; free mode
/// maximizes over the moment direction per point. Deterministic tie-break:
/// lowest grid index among values within 1e-12 relative of the maximum.
/// Throws DegeneracyError if every point is deflated-out.
ScanPick scan_argmax(const SourceGrid& grid, const Matrix& Q_proj,
                     const Covariance& C, OrientationMode mode);

struct OrientationFit {
  Vec3 orientation = Vec3::Zero();
  double value = kDeflatedOut;  // kDeflatedOut when L is fully deflated
};

/// Best moment direction at one location: maximizes the deflated localizer
/// of l = L q over unit q, which is the top generalized eigenpair of
/// (L'QCQL, L'QL). The orientation is unit-norm and sign-fixed.
OrientationFit solve_orientation(const LeadField& L, const Matrix& Q_proj,
                                 const Covariance& C);

struct ApInit {
  std::vector<int> indices;        // Q picks, in order of captured power
  std::vector<Vec3> orientations;  // per pick
  ApTrace trace;
};

/// Sequential initialization: place source 1 at the single-source maximum,
/// then each next source at the maximum of the localizer deflated by the
/// already-placed topographies.
ApInit ap_initialize(const SourceGrid& grid, const Covariance& C,
                     const ApConfig& cfg);

struct ApResult {
  std::vector<DipoleEstimate> estimates;
  ApTrace trace;
  bool converged = false;
  int iterations = 0;      // refinement cycles actually run
  double objective = 0.0;  // final tr(P_A C)
};

/// Full alternating-projection localization: sequential initialization
/// followed by cyclic single-source refinement (source q re-scanned with all
/// others' current topographies deflated) until no source moves more than
/// convergence_tol between cycles or max_iterations is reached, restarted
/// per ApConfig. Works for any sample count N >= 1 and any inter-source
/// correlation. The returned trace belongs to the winning run.
ApResult ap_localize(const SourceGrid& grid, const Recording& rec,
                     const ApConfig& cfg);

/// Least-squares time courses S = (A'A)^-1 A' Y, solved by QR.
Matrix recover_sources(const TopographySet& A, const Recording& rec);

}  // namespace aploc
