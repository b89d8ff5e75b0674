#pragma once

#include "aploc/ap.hpp"

namespace aploc {

/// Orthonormal basis of the dominant eigenspace of the data covariance.
struct SubspaceModel {
  Matrix U_s;  // M x R, columns ordered by descending eigenvalue
  int rank = 0;
};

struct ScanResult {
  std::vector<DipoleEstimate> estimates;
  std::vector<double> localizer_values;  // peak value per recursion
};

/// Top-R eigenvectors of C. Requires 1 <= R < M.
SubspaceModel signal_subspace(const Covariance& C, int rank);

/// Recursively applied and projected MUSIC: recursion k picks the grid point
/// maximizing the subspace correlation between the deflated topography and
/// the deflated signal subspace (deflation by the k-1 topographies found so
/// far). Fixed mode correlates the point's fixed topography; free mode takes
/// the maximal canonical correlation over the 3-column lead field. The
/// subspace rank is Q (true model order assumed known).
ScanResult rap_music(const SourceGrid& grid, const Recording& rec,
                     int n_sources, OrientationMode mode);

/// RAP-MUSIC variant that re-truncates the projected signal subspace to rank
/// R - (k-1) at recursion k before correlating, suppressing the spurious
/// directions that projection pushes into the subspace.
ScanResult trap_music(const SourceGrid& grid, const Recording& rec,
                      int n_sources, OrientationMode mode);

/// Diagonal-loading value used when no explicit regularization is given:
/// 1e-3 * trace(C) / M.
double default_beamformer_reg(const Covariance& C);

/// Recursive unit-gain beamformer: recursion k maximizes
/// (l'l) / (l' (C_k + reg I)^-1 l) with the found topographies deflated from
/// both l and the data before re-forming C_k.
ScanResult rap_beamformer(const SourceGrid& grid, const Recording& rec,
                          int n_sources, OrientationMode mode, double reg);

}  // namespace aploc
