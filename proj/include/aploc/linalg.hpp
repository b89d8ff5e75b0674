#pragma once

#include "aploc/types.hpp"

#include <optional>
#include <vector>

namespace aploc {

/// Relative singular-value cutoff that defines "linearly independent".
inline constexpr double kRankTol = 1e-8;

/// Orthonormal basis of the column span of A, keeping singular directions
/// with sigma_i > tol * sigma_max. Returns an M x r matrix (r = numerical
/// rank). A with zero columns yields an M x 0 matrix.
Matrix orthonormal_basis(const Matrix& A, double tol = kRankTol);

/// Numerical rank under the same cutoff.
int numerical_rank(const Matrix& A, double tol = kRankTol);

/// Column indices that a rank-revealing factorization flags as dependent
/// (empty when A has full column rank). Used to build diagnostics.
std::vector<int> dependent_columns(const Matrix& A, double tol = kRankTol);

/// Flip the sign of v so its largest-magnitude component is positive.
/// Fixes the +/- ambiguity of eigenvectors to a canonical representative.
template <typename Derived>
void fix_sign(Eigen::MatrixBase<Derived>& v) {
  int imax = 0;
  v.derived().cwiseAbs().maxCoeff(&imax);
  if (v.derived()(imax) < 0.0) v.derived() = -v.derived();
}

struct RayleighMax {
  Vector x;       // maximizer, unit norm, sign-fixed; restricted to range(B)
  double value;   // max of (x'Ax)/(x'Bx)
};

/// Maximize the generalized Rayleigh quotient (x'Ax)/(x'Bx) for symmetric A
/// and symmetric PSD B. Directions of B with eigenvalue <= floor_rel times
/// its largest eigenvalue are treated as null and excluded. Returns nullopt
/// when B is (numerically) zero.
std::optional<RayleighMax> max_generalized_rayleigh(const Matrix& A,
                                                    const Matrix& B,
                                                    double floor_rel = 1e-12);

}  // namespace aploc
