#include "aploc/projection.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>

namespace aploc {

Recording::Recording(Matrix data) : Y(std::move(data)) {
  if (Y.rows() < 1 || Y.cols() < 1)
    throw ParameterError("recording must have at least one sensor and sample");
  if (!Y.allFinite())
    throw ParameterError("recording contains non-finite entries");
}

Covariance::Covariance(Matrix c) : C(std::move(c)) {
  if (C.rows() != C.cols()) throw ParameterError("covariance must be square");
  const double scale = C.norm();
  if ((C - C.transpose()).norm() > 1e-10 * std::max(scale, 1e-300))
    throw ParameterError("covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(C, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) < -1e-10 * std::max(C.trace(), 1e-300))
    throw ParameterError("covariance is not positive semidefinite");
}

TopographySet::TopographySet(Matrix a, std::vector<int> indices)
    : A(std::move(a)), grid_indices(std::move(indices)) {
  if (grid_indices.empty()) grid_indices.assign(A.cols(), -1);
  if (static_cast<int>(grid_indices.size()) != A.cols())
    throw ParameterError("topography set index count mismatch");
  if (A.cols() >= A.rows() && A.cols() > 0)
    throw ParameterError("topography set needs K < M columns");
}

void TopographySet::append(const Vector& column, int grid_index) {
  A.conservativeResize(column.size(), A.cols() + 1);
  A.col(A.cols() - 1) = column;
  grid_indices.push_back(grid_index);
  if (A.cols() >= A.rows())
    throw ParameterError("topography set needs K < M columns");
}

Covariance covariance(const Recording& rec) {
  Matrix C = rec.Y * rec.Y.transpose();
  C = 0.5 * (C + C.transpose()).eval();
  return Covariance(std::move(C));
}

namespace {

Matrix rank_checked_basis(const TopographySet& A) {
  const Matrix U = orthonormal_basis(A.A);
  if (U.cols() < A.A.cols()) {
    std::ostringstream msg;
    msg << "topography set is rank deficient (rank " << U.cols() << " of "
        << A.A.cols() << "); dependent columns:";
    for (int c : dependent_columns(A.A)) {
      msg << ' ' << c;
      if (c < static_cast<int>(A.grid_indices.size()) && A.grid_indices[c] >= 0)
        msg << " (grid " << A.grid_indices[c] << ")";
    }
    throw DegeneracyError(msg.str());
  }
  return U;
}

}  // namespace

Matrix projector(const TopographySet& A) {
  const Matrix U = rank_checked_basis(A);
  return U * U.transpose();
}

Matrix deflate(const TopographySet& A_minus_q) {
  const int m = A_minus_q.sensor_count();
  if (A_minus_q.count() == 0) {
    if (m == 0) throw ParameterError("cannot size deflation for empty set");
    return Matrix::Identity(m, m);
  }
  return Matrix::Identity(m, m) - projector(A_minus_q);
}

double localizer_single(const Vector& l, const Covariance& C) {
  const double denom = l.squaredNorm();
  if (denom == 0.0) throw DomainError("zero topography in localizer");
  return l.dot(C.C * l) / denom;
}

double localizer_deflated(const Vector& l, const Matrix& Q_proj,
                          const Covariance& C) {
  const Vector x = Q_proj * l;
  const double denom = x.squaredNorm();
  if (denom < kDeflationFloor * l.squaredNorm()) return kDeflatedOut;
  return x.dot(C.C * x) / denom;
}

double objective(const TopographySet& A, const Covariance& C) {
  const Matrix U = rank_checked_basis(A);
  return (U.transpose() * C.C * U).trace();
}

}  // namespace aploc
