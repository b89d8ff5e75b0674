#include "aploc/ap.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace aploc {

namespace {

// Largest eigenvalue of a 3x3 symmetric gram matrix.
double gram_max_eig(const Eigen::Matrix3d& G) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(G, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(2);
}

// Shared 3x3 core of solve_orientation and the free-mode scan.
// A3 = (QL)' C (QL), B3 = (QL)' (QL); gram_ref = lambda_max(L'L).
OrientationFit orientation_from_blocks(const Eigen::Matrix3d& A3,
                                       const Eigen::Matrix3d& B3,
                                       double gram_ref) {
  OrientationFit fit;
  if (gram_max_eig(B3) < kDeflationFloor * gram_ref) return fit;  // deflated
  const auto rm = max_generalized_rayleigh(A3, B3);
  if (!rm) return fit;
  fit.orientation = rm->x;
  fit.value = rm->value;
  return fit;
}

int argmax_with_tiebreak(const Vector& values) {
  int best = -1;
  double vmax = kDeflatedOut;
  for (int g = 0; g < values.size(); ++g)
    if (values(g) > vmax) {
      vmax = values(g);
      best = g;
    }
  if (best < 0)
    throw DegeneracyError("every grid point is deflated-out in the scan");
  // Lowest index among values within 1e-12 relative of the maximum.
  const double threshold = vmax - 1e-12 * std::abs(vmax);
  for (int g = 0; g < values.size(); ++g)
    if (values(g) >= threshold) return g;
  return best;
}

// Deflated localizer value at every grid point (and the maximizing moment
// direction per point in free mode).
struct ScanMap {
  Vector values;
  std::vector<Vec3> orientations;  // free mode only
};

ScanMap scan_values(const SourceGrid& grid, const Matrix& Q_proj,
                    const Covariance& C, OrientationMode mode) {
  if (grid.size() == 0) throw ParameterError("scan over an empty grid");
  ScanMap map;
  map.values.resize(grid.size());

  if (mode == OrientationMode::fixed) {
    if (grid.mode != OrientationMode::fixed)
      throw ParameterError("fixed-orientation scan needs a fixed-mode grid");
    const Matrix& T = grid.fixed_topographies;
    const Matrix X = Q_proj * T;
    const Matrix CX = C.C * X;
    const Vector num = X.cwiseProduct(CX).colwise().sum();
    const Vector denom = X.colwise().squaredNorm();
    const Vector ref = T.colwise().squaredNorm();
    for (int g = 0; g < grid.size(); ++g)
      map.values(g) = denom(g) < kDeflationFloor * ref(g) ? kDeflatedOut
                                                          : num(g) / denom(g);
    return map;
  }

  map.orientations.resize(grid.size());
  const Matrix X = Q_proj * grid.stacked_leadfields;
  const Matrix CX = C.C * X;
  for (int g = 0; g < grid.size(); ++g) {
    const auto Xg = X.middleCols(3 * g, 3);
    Eigen::Matrix3d A3 = Xg.transpose() * CX.middleCols(3 * g, 3);
    A3 = 0.5 * (A3 + A3.transpose()).eval();
    const Eigen::Matrix3d B3 = Xg.transpose() * Xg;
    const auto fit = orientation_from_blocks(A3, B3, grid.lf_gram_max(g));
    map.values(g) = fit.value;
    map.orientations[g] = fit.orientation;
  }
  return map;
}

ScanPick pick_from_map(const SourceGrid& grid, const ScanMap& map,
                       OrientationMode mode) {
  ScanPick pick;
  pick.index = argmax_with_tiebreak(map.values);
  pick.value = map.values(pick.index);
  pick.orientation = mode == OrientationMode::fixed
                         ? grid.orientations[pick.index]
                         : map.orientations[pick.index];
  return pick;
}

}  // namespace

void ApConfig::validate(int sensor_count, int grid_size) const {
  if (n_sources < 1) throw ParameterError("n_sources must be >= 1");
  if (n_sources >= sensor_count)
    throw ParameterError("n_sources must be below the sensor count");
  if (grid_size < n_sources)
    throw ParameterError("grid smaller than the requested source count");
  if (max_iterations < 1) throw ParameterError("max_iterations must be >= 1");
  if (!(convergence_tol >= 0.0))
    throw ParameterError("convergence_tol must be >= 0");
  if (n_restarts < 1) throw ParameterError("n_restarts must be >= 1");
  if (n_refine < 1) throw ParameterError("n_refine must be >= 1");
}

void ApTrace::push(int iteration, int source, int grid_index,
                   double objective) {
  double recorded = objective;
  if (!entries.empty()) {
    const double prev = entries.back().objective;
    if (objective < prev - 1e-10 * std::max(std::abs(prev), 1.0))
      throw NumericError("objective decreased during an accepted step");
    if (recorded < prev) recorded = prev;  // sub-epsilon re-evaluation noise
  }
  entries.push_back({iteration, source, grid_index, recorded});
}

bool ApTrace::non_decreasing() const {
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].objective < entries[i - 1].objective) return false;
  return true;
}

double ApTrace::final_objective() const {
  return entries.empty() ? 0.0 : entries.back().objective;
}

ScanPick scan_argmax(const SourceGrid& grid, const Matrix& Q_proj,
                     const Covariance& C, OrientationMode mode) {
  return pick_from_map(grid, scan_values(grid, Q_proj, C, mode), mode);
}

OrientationFit solve_orientation(const LeadField& L, const Matrix& Q_proj,
                                 const Covariance& C) {
  const Matrix X = Q_proj * L;
  Eigen::Matrix3d A3 = X.transpose() * C.C * X;
  A3 = 0.5 * (A3 + A3.transpose()).eval();
  const Eigen::Matrix3d B3 = X.transpose() * X;
  const Eigen::Matrix3d G = L.transpose() * L;
  return orientation_from_blocks(A3, B3, gram_max_eig(G));
}

namespace {

Vector topography_at(const SourceGrid& grid, int index, const Vec3& orient,
                     OrientationMode mode) {
  if (mode == OrientationMode::fixed)
    return grid.fixed_topographies.col(index);
  return grid.leadfields[index] * orient;
}

TopographySet assemble_set(const SourceGrid& grid,
                           const std::vector<int>& indices,
                           const std::vector<Vec3>& orients,
                           OrientationMode mode) {
  Matrix A(grid.stacked_leadfields.rows(), indices.size());
  for (std::size_t q = 0; q < indices.size(); ++q)
    A.col(static_cast<int>(q)) =
        topography_at(grid, indices[q], orients[q], mode);
  return TopographySet(std::move(A), indices);
}

// One candidate run: its initialization state, trace, and refinement result.
struct ApRun {
  std::vector<int> indices;
  std::vector<Vec3> orients;
  ApTrace trace;
  double raw_obj = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Sequential initialization with source 1 forced to `start`.
ApRun init_from_start(const SourceGrid& grid, const Covariance& C,
                      const ApConfig& cfg, int start,
                      const Vec3& start_orient) {
  ApRun run;
  TopographySet placed(Matrix(C.size(), 0));
  placed.append(topography_at(grid, start, start_orient,
                              cfg.orientation_mode),
                start);
  run.indices.push_back(start);
  run.orients.push_back(start_orient);
  run.raw_obj = objective(placed, C);
  run.trace.push(0, 1, start, run.raw_obj);
  for (int q = 2; q <= cfg.n_sources; ++q) {
    const Matrix Qp = deflate(placed);
    const ScanPick pick = scan_argmax(grid, Qp, C, cfg.orientation_mode);
    placed.append(topography_at(grid, pick.index, pick.orientation,
                                cfg.orientation_mode),
                  pick.index);
    run.indices.push_back(pick.index);
    run.orients.push_back(pick.orientation);
    run.raw_obj = objective(placed, C);
    run.trace.push(0, q, pick.index, run.raw_obj);
  }
  return run;
}

// Cyclic single-source refinement of an initialized run (in place).
void refine_run(const SourceGrid& grid, const Covariance& C,
                const ApConfig& cfg, ApRun& run) {
  const int n_src = cfg.n_sources;
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    const std::vector<int> before = run.indices;
    for (int q = 0; q < n_src; ++q) {
      // Topographies of every source except q, at their current values
      // (sources before q already refreshed this cycle).
      Matrix others(C.size(), n_src - 1);
      std::vector<int> other_idx;
      for (int i = 0, col = 0; i < n_src; ++i) {
        if (i == q) continue;
        others.col(col++) = topography_at(grid, run.indices[i],
                                          run.orients[i],
                                          cfg.orientation_mode);
        other_idx.push_back(run.indices[i]);
      }
      const Matrix Qp = deflate(TopographySet(std::move(others), other_idx));
      const ScanPick pick = scan_argmax(grid, Qp, C, cfg.orientation_mode);

      std::vector<int> cand_idx = run.indices;
      std::vector<Vec3> cand_ori = run.orients;
      cand_idx[q] = pick.index;
      cand_ori[q] = pick.orientation;
      const double cand_obj = objective(
          assemble_set(grid, cand_idx, cand_ori, cfg.orientation_mode), C);
      // The scan maximizes over candidates that include the current
      // location, so the true objective cannot decrease; reject only
      // re-evaluation noise on ties.
      if (cand_obj >= run.raw_obj) {
        run.indices = std::move(cand_idx);
        run.orients = std::move(cand_ori);
        run.raw_obj = cand_obj;
      }
      run.trace.push(iter, q + 1, run.indices[q], run.raw_obj);
    }
    run.iterations = iter;

    bool settled = true;
    for (int q = 0; q < n_src; ++q) {
      const double moved =
          (grid.points[run.indices[q]] - grid.points[before[q]]).norm();
      if (moved > cfg.convergence_tol) settled = false;
    }
    if (settled) {
      run.converged = true;
      return;
    }
  }
}

}  // namespace

ApInit ap_initialize(const SourceGrid& grid, const Covariance& C,
                     const ApConfig& cfg) {
  cfg.validate(C.size(), grid.size());
  const Matrix I = Matrix::Identity(C.size(), C.size());
  const ScanMap map = scan_values(grid, I, C, cfg.orientation_mode);
  const ScanPick first = pick_from_map(grid, map, cfg.orientation_mode);
  ApRun run = init_from_start(grid, C, cfg, first.index, first.orientation);
  ApInit init;
  init.indices = std::move(run.indices);
  init.orientations = std::move(run.orients);
  init.trace = std::move(run.trace);
  return init;
}

ApResult ap_localize(const SourceGrid& grid, const Recording& rec,
                     const ApConfig& cfg) {
  const Covariance C = covariance(rec);
  cfg.validate(C.size(), grid.size());

  // Candidate starts for source 1: the strongest single-source localizer
  // values, in descending order. Candidate 0 is the plain algorithm's pick.
  const Matrix I = Matrix::Identity(C.size(), C.size());
  const ScanMap map = scan_values(grid, I, C, cfg.orientation_mode);
  const int first = argmax_with_tiebreak(map.values);

  std::vector<int> candidates{first};
  if (cfg.n_sources > 1 && cfg.n_restarts > 1) {
    std::vector<int> order(grid.size());
    for (int g = 0; g < grid.size(); ++g) order[g] = g;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (map.values(a) != map.values(b)) return map.values(a) > map.values(b);
      return a < b;
    });
    for (int g : order) {
      if (static_cast<int>(candidates.size()) >= cfg.n_restarts) break;
      if (g == first || is_deflated_out(map.values(g))) continue;
      candidates.push_back(g);
    }
  }

  auto start_orientation = [&](int g) {
    return cfg.orientation_mode == OrientationMode::fixed
               ? grid.orientations[g]
               : map.orientations[g];
  };

  std::vector<ApRun> inits;
  inits.reserve(candidates.size());
  for (int g : candidates)
    inits.push_back(init_from_start(grid, C, cfg, g, start_orientation(g)));

  // Refine the plain run plus the most promising other initializations.
  std::vector<int> rank(inits.size());
  for (std::size_t i = 0; i < inits.size(); ++i) rank[i] = static_cast<int>(i);
  std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) {
    return inits[a].raw_obj > inits[b].raw_obj;
  });
  std::vector<int> refine{0};
  for (int i : rank)
    if (i != 0 && static_cast<int>(refine.size()) < cfg.n_refine)
      refine.push_back(i);

  for (int ci : refine) refine_run(grid, C, cfg, inits[ci]);
  int winner = refine.front();  // plain run wins ties
  for (int ci : refine)
    if (inits[ci].raw_obj > inits[winner].raw_obj) winner = ci;
  ApRun& best = inits[winner];

  ApResult result;
  result.trace = std::move(best.trace);
  result.converged = best.converged;
  result.iterations = best.iterations;

  const TopographySet A_final =
      assemble_set(grid, best.indices, best.orients, cfg.orientation_mode);
  result.objective = objective(A_final, C);
  const Matrix S = recover_sources(A_final, rec);

  result.estimates.resize(cfg.n_sources);
  for (int q = 0; q < cfg.n_sources; ++q) {
    auto& est = result.estimates[q];
    est.grid_index = best.indices[q];
    est.location = grid.points[best.indices[q]];
    est.orientation = cfg.orientation_mode == OrientationMode::fixed
                          ? grid.orientations[best.indices[q]]
                          : best.orients[q];
    est.timecourse = S.row(q);
  }
  return result;
}

Matrix recover_sources(const TopographySet& A, const Recording& rec) {
  if (A.count() < 1) throw ParameterError("empty topography set");
  if (numerical_rank(A.A) < A.count())
    throw DegeneracyError("topography set is rank deficient; time courses "
                          "are not identifiable");
  return A.A.colPivHouseholderQr().solve(rec.Y);
}

}  // namespace aploc
