#pragma once

#include "aploc/linalg.hpp"
#include "aploc/types.hpp"

#include <limits>
#include <vector>

namespace aploc {

/// Sensor data: M x N matrix of samples (columns are time points).
struct Recording {
  Matrix Y;

  Recording() = default;
  explicit Recording(Matrix data);

  int sensor_count() const { return static_cast<int>(Y.rows()); }
  int sample_count() const { return static_cast<int>(Y.cols()); }
};

/// Symmetric PSD data covariance C = Y Y' (not normalized by N; every
/// localizer in the toolkit is invariant to positive rescaling of C).
struct Covariance {
  Matrix C;

  Covariance() = default;
  explicit Covariance(Matrix c);

  int size() const { return static_cast<int>(C.rows()); }
};

/// A set of K < M topography columns with the grid indices backing them
/// (index -1 for columns not tied to a grid point).
struct TopographySet {
  Matrix A;                      // M x K
  std::vector<int> grid_indices; // size K

  TopographySet() = default;
  explicit TopographySet(Matrix a, std::vector<int> indices = {});

  int sensor_count() const { return static_cast<int>(A.rows()); }
  int count() const { return static_cast<int>(A.cols()); }

  void append(const Vector& column, int grid_index);
};

/// Value returned by deflated localizers for grid points whose topography is
/// (numerically) annihilated by the deflation projector. Ordered below every
/// finite localizer value, so argmax scans skip such points naturally.
inline constexpr double kDeflatedOut = -std::numeric_limits<double>::infinity();

inline bool is_deflated_out(double v) { return v == kDeflatedOut; }

/// l'Ql below this fraction of l'l marks a point deflated-out.
inline constexpr double kDeflationFloor = 1e-12;

Covariance covariance(const Recording& rec);

/// Orthogonal projector onto the column span of A, built from an orthonormal
/// factorization (equals A (A'A)^-1 A' in exact arithmetic, but stays stable
/// for nearly collinear topographies). Requires rank(A) = K under kRankTol;
/// otherwise throws DegeneracyError naming the dependent columns.
Matrix projector(const TopographySet& A);

/// Q = I - projector(A): projector onto the orthogonal complement, i.e. the
/// operator that deflates the topographies in A. Empty A yields the identity.
Matrix deflate(const TopographySet& A_minus_q);

/// Single-source localizer (l'Cl)/(l'l). Throws DomainError on zero l.
double localizer_single(const Vector& l, const Covariance& C);

/// Deflated localizer (l'QCQl)/(l'Ql) for a symmetric idempotent Q.
/// Returns kDeflatedOut when l'Ql < kDeflationFloor * l'l.
double localizer_deflated(const Vector& l, const Matrix& Q_proj,
                          const Covariance& C);

/// Least-squares objective tr(P_A C): the signal power captured by the span
/// of A. Rank requirements as in projector().
double objective(const TopographySet& A, const Covariance& C);

}  // namespace aploc
