#include "aploc/scanners.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

namespace aploc {

namespace {

struct PointPick {
  int index = -1;
  double value = kDeflatedOut;
  Vec3 orientation = Vec3::Zero();
};

int argmax_lowest_tie(const Vector& values) {
  int best = -1;
  double vmax = kDeflatedOut;
  for (int g = 0; g < values.size(); ++g)
    if (values(g) > vmax) {
      vmax = values(g);
      best = g;
    }
  if (best < 0)
    throw DegeneracyError("every grid point is deflated-out in the scan");
  const double threshold = vmax - 1e-12 * std::abs(vmax);
  for (int g = 0; g < values.size(); ++g)
    if (values(g) >= threshold) return g;
  return best;
}

// Orientation q with (QL) q proportional to the direction `span_dir`
// expressed in the reduced SVD basis of QL: q = V_r S_r^-1 v, normalized.
Vec3 orientation_from_svd(const Eigen::JacobiSVD<Matrix>& svd, int rank,
                          const Vector& v) {
  Vec3 q = Vec3::Zero();
  for (int i = 0; i < rank; ++i)
    q += svd.matrixV().col(i) * (v(i) / svd.singularValues()(i));
  q.normalize();
  fix_sign(q);
  return q;
}

void validate_scan_inputs(const SourceGrid& grid, const Recording& rec,
                          int n_sources, OrientationMode mode) {
  if (grid.size() == 0) throw ParameterError("scan over an empty grid");
  if (n_sources < 1) throw ParameterError("n_sources must be >= 1");
  if (n_sources >= rec.sensor_count())
    throw ParameterError("n_sources must be below the sensor count");
  if (mode == OrientationMode::fixed && grid.mode != OrientationMode::fixed)
    throw ParameterError("fixed-orientation scan needs a fixed-mode grid");
}

void finalize_estimates(ScanResult& result, const SourceGrid& grid,
                        const Recording& rec, const TopographySet& found,
                        const std::vector<PointPick>& picks,
                        OrientationMode mode) {
  const Matrix S = recover_sources(found, rec);
  result.estimates.resize(picks.size());
  for (std::size_t k = 0; k < picks.size(); ++k) {
    auto& est = result.estimates[k];
    est.grid_index = picks[k].index;
    est.location = grid.points[picks[k].index];
    est.orientation = mode == OrientationMode::fixed
                          ? grid.orientations[picks[k].index]
                          : picks[k].orientation;
    est.timecourse = S.row(static_cast<int>(k));
  }
}

// Correlation scan of one MUSIC recursion: max subspace correlation between
// the deflated topography at each point and the subspace basis W.
PointPick subcorr_scan(const SourceGrid& grid, const Matrix& Q_proj,
                       const Matrix& W, OrientationMode mode,
                       const std::vector<char>& taken) {
  const int g_count = grid.size();
  Vector values(g_count);
  std::vector<Vec3> orients;

  if (mode == OrientationMode::fixed) {
    const Matrix& T = grid.fixed_topographies;
    const Matrix X = Q_proj * T;
    const Matrix WX = W.transpose() * X;
    const Vector denom = X.colwise().squaredNorm();
    const Vector ref = T.colwise().squaredNorm();
    const Vector num = WX.colwise().squaredNorm();
    for (int g = 0; g < g_count; ++g)
      values(g) = (taken[g] || denom(g) < kDeflationFloor * ref(g))
                      ? kDeflatedOut
                      : std::sqrt(std::min(1.0, num(g) / denom(g)));
  } else {
    orients.resize(g_count, Vec3::Zero());
    const Matrix X = Q_proj * grid.stacked_leadfields;
    for (int g = 0; g < g_count; ++g) {
      values(g) = kDeflatedOut;
      if (taken[g]) continue;
      const Matrix Xg = X.middleCols(3 * g, 3);
      Eigen::JacobiSVD<Matrix> svd(Xg,
                                   Eigen::ComputeThinU | Eigen::ComputeThinV);
      const double smax = svd.singularValues()(0);
      if (smax * smax < kDeflationFloor * grid.lf_gram_max(g)) continue;
      int rank = 0;
      while (rank < 3 && svd.singularValues()(rank) > kRankTol * smax) ++rank;
      // Max canonical correlation = top singular value of W' U_r.
      Eigen::JacobiSVD<Matrix> corr(
          Matrix(W.transpose() * svd.matrixU().leftCols(rank)),
          Eigen::ComputeThinU | Eigen::ComputeThinV);
      if (corr.singularValues().size() == 0) continue;
      values(g) = std::min(1.0, corr.singularValues()(0));
      orients[g] = orientation_from_svd(svd, rank, corr.matrixV().col(0));
    }
  }

  PointPick pick;
  pick.index = argmax_lowest_tie(values);
  pick.value = values(pick.index);
  if (mode == OrientationMode::fixed)
    pick.orientation = grid.orientations[pick.index];
  else
    pick.orientation = orients[pick.index];
  return pick;
}

ScanResult music_recursion(const SourceGrid& grid, const Recording& rec,
                           int n_sources, OrientationMode mode,
                           bool truncate) {
  validate_scan_inputs(grid, rec, n_sources, mode);
  const Covariance C = covariance(rec);

  ScanResult result;
  TopographySet found(Matrix(rec.sensor_count(), 0));
  std::vector<PointPick> picks;
  std::vector<char> taken(grid.size(), 0);

  for (int k = 1; k <= n_sources; ++k) {
    const Matrix Qp = deflate(found);
    // Signal subspace re-estimated from the deflated data. Keeping the full
    // rank R reproduces the plain recursion; the truncated variant drops one
    // dimension per found source, since the deflated data can only carry
    // R - (k-1) source directions and the remainder is noise.
    Matrix Ck = Qp * C.C * Qp;
    Ck = (0.5 * (Ck + Ck.transpose())).eval();
    const int keep = truncate ? n_sources - (k - 1) : n_sources;
    const Matrix W = signal_subspace(Covariance{std::move(Ck)}, keep).U_s;
    PointPick pick = subcorr_scan(grid, Qp, W, mode, taken);
    taken[pick.index] = 1;
    found.append(mode == OrientationMode::fixed
                     ? Vector(grid.fixed_topographies.col(pick.index))
                     : Vector(grid.leadfields[pick.index] * pick.orientation),
                 pick.index);
    result.localizer_values.push_back(pick.value);
    picks.push_back(pick);
  }
  finalize_estimates(result, grid, rec, found, picks, mode);
  return result;
}

}  // namespace

SubspaceModel signal_subspace(const Covariance& C, int rank) {
  if (rank < 1 || rank >= C.size())
    throw ParameterError("signal subspace rank must satisfy 1 <= R < M");
  Eigen::SelfAdjointEigenSolver<Matrix> es(C.C);
  SubspaceModel sub;
  sub.rank = rank;
  sub.U_s.resize(C.size(), rank);
  // Eigen sorts ascending; emit descending.
  for (int i = 0; i < rank; ++i)
    sub.U_s.col(i) = es.eigenvectors().col(C.size() - 1 - i);
  return sub;
}

ScanResult rap_music(const SourceGrid& grid, const Recording& rec,
                     int n_sources, OrientationMode mode) {
  return music_recursion(grid, rec, n_sources, mode, false);
}

ScanResult trap_music(const SourceGrid& grid, const Recording& rec,
                      int n_sources, OrientationMode mode) {
  return music_recursion(grid, rec, n_sources, mode, true);
}

double default_beamformer_reg(const Covariance& C) {
  return 1e-3 * C.C.trace() / C.size();
}

ScanResult rap_beamformer(const SourceGrid& grid, const Recording& rec,
                          int n_sources, OrientationMode mode, double reg) {
  validate_scan_inputs(grid, rec, n_sources, mode);
  const int m = rec.sensor_count();

  ScanResult result;
  TopographySet found(Matrix(m, 0));
  std::vector<PointPick> picks;
  std::vector<char> taken(grid.size(), 0);

  for (int k = 1; k <= n_sources; ++k) {
    const Matrix Qp = deflate(found);
    const Matrix Yk = Qp * rec.Y;
    Matrix K = Yk * Yk.transpose();
    K = (0.5 * (K + K.transpose())).eval();
    K.diagonal().array() += reg;

    Eigen::SelfAdjointEigenSolver<Matrix> es(K);
    const Vector& ev = es.eigenvalues();
    if (ev(0) <= 0.0 || ev(0) < 1e-14 * ev(m - 1))
      throw NumericError("regularized covariance is numerically singular");
    const Matrix Kinv = es.eigenvectors() *
                        ev.cwiseInverse().asDiagonal() *
                        es.eigenvectors().transpose();

    Vector values(grid.size());
    std::vector<Vec3> orients;
    if (mode == OrientationMode::fixed) {
      const Matrix& T = grid.fixed_topographies;
      const Matrix X = Qp * T;
      const Matrix KX = Kinv * X;
      const Vector num = X.colwise().squaredNorm();
      const Vector den = X.cwiseProduct(KX).colwise().sum();
      const Vector ref = T.colwise().squaredNorm();
      for (int g = 0; g < grid.size(); ++g)
        values(g) = (taken[g] || num(g) < kDeflationFloor * ref(g))
                        ? kDeflatedOut
                        : num(g) / den(g);
    } else {
      orients.resize(grid.size(), Vec3::Zero());
      const Matrix X = Qp * grid.stacked_leadfields;
      const Matrix KX = Kinv * X;
      for (int g = 0; g < grid.size(); ++g) {
        values(g) = kDeflatedOut;
        if (taken[g]) continue;
        const auto Xg = X.middleCols(3 * g, 3);
        const Eigen::Matrix3d B3 = Xg.transpose() * Xg;
        Eigen::Matrix3d H3 = Xg.transpose() * KX.middleCols(3 * g, 3);
        H3 = 0.5 * (H3 + H3.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eb(B3,
                                                          Eigen::EigenvaluesOnly);
        if (eb.eigenvalues()(2) < kDeflationFloor * grid.lf_gram_max(g))
          continue;
        const auto rm = max_generalized_rayleigh(B3, H3);
        if (!rm) continue;
        values(g) = rm->value;
        orients[g] = rm->x;
      }
    }

    PointPick pick;
    pick.index = argmax_lowest_tie(values);
    pick.value = values(pick.index);
    pick.orientation = mode == OrientationMode::fixed
                           ? grid.orientations[pick.index]
                           : orients[pick.index];
    taken[pick.index] = 1;
    found.append(mode == OrientationMode::fixed
                     ? Vector(grid.fixed_topographies.col(pick.index))
                     : Vector(grid.leadfields[pick.index] * pick.orientation),
                 pick.index);
    result.localizer_values.push_back(pick.value);
    picks.push_back(pick);
  }
  finalize_estimates(result, grid, rec, found, picks, mode);
  return result;
}

}  // namespace aploc
