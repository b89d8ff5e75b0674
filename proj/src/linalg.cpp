#include "aploc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace aploc {

Matrix orthonormal_basis(const Matrix& A, double tol) {
  if (A.cols() == 0) return Matrix(A.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? tol * sv(0) : 0.0;
  int r = 0;
  while (r < sv.size() && sv(r) > cutoff && sv(r) > 0.0) ++r;
  return svd.matrixU().leftCols(r);
}

int numerical_rank(const Matrix& A, double tol) {
  return static_cast<int>(orthonormal_basis(A, tol).cols());
}

std::vector<int> dependent_columns(const Matrix& A, double tol) {
  const int r = numerical_rank(A, tol);
  if (r == A.cols()) return {};
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  const auto& perm = qr.colsPermutation().indices();
  // Columns pivoted past the numerical rank are the dependent ones.
  std::vector<int> cols;
  for (int i = r; i < A.cols(); ++i) cols.push_back(perm(i));
  return cols;
}

std::optional<RayleighMax> max_generalized_rayleigh(const Matrix& A,
                                                    const Matrix& B,
                                                    double floor_rel) {
  Eigen::SelfAdjointEigenSolver<Matrix> eb(B);
  const Vector d = eb.eigenvalues();
  const double dmax = d.size() > 0 ? d(d.size() - 1) : 0.0;
  if (!(dmax > 0.0)) return std::nullopt;

  // Whitening restricted to the non-null subspace of B: W = V_r D_r^{-1/2}.
  const double cutoff = floor_rel * dmax;
  std::vector<int> keep;
  for (int i = 0; i < d.size(); ++i)
    if (d(i) > cutoff) keep.push_back(i);
  Matrix W(B.rows(), static_cast<int>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k)
    W.col(static_cast<int>(k)) =
        eb.eigenvectors().col(keep[k]) / std::sqrt(d(keep[k]));

  const Matrix S = W.transpose() * A * W;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
  const int top = static_cast<int>(es.eigenvalues().size()) - 1;

  RayleighMax out;
  out.value = es.eigenvalues()(top);
  out.x = W * es.eigenvectors().col(top);
  out.x.normalize();
  fix_sign(out.x);
  return out;
}

}  // namespace aploc
