#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aploc/projection.hpp"
#include "aploc/rng.hpp"
#include "test_support.hpp"

#include <Eigen/Eigenvalues>

using namespace aploc;

TEST_CASE("covariance of orthonormal and rank-1 recordings") {
  const int m = 5;
  const Recording eye{Matrix(Matrix::Identity(m, m))};
  CHECK((covariance(eye).C - Matrix::Identity(m, m)).norm() == 0.0);

  Rng rng(1);
  const Vector y = testsup::random_vector(m, rng);
  const Recording single{Matrix(y)};
  const Covariance C = covariance(single);
  CHECK((C.C - y * y.transpose()).norm() < 1e-14 * y.squaredNorm());
  Eigen::SelfAdjointEigenSolver<Matrix> es(C.C, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues()(m - 2) < 1e-12 * es.eigenvalues()(m - 1));
}

TEST_CASE("covariance equals the triple-loop oracle") {
  Rng rng(2);
  const Matrix Y = testsup::random_matrix(4, 7, rng);
  const Covariance C = covariance(Recording{Matrix(Y)});
  Matrix oracle = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 7; ++k) oracle(i, j) += Y(i, k) * Y(j, k);
  CHECK((C.C - oracle).norm() < 1e-12);
}

TEST_CASE("recording invariants") {
  CHECK_THROWS_AS(Recording{Matrix(0, 3)}, ParameterError);
  Matrix bad = Matrix::Ones(2, 2);
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(Recording{std::move(bad)}, ParameterError);
}

TEST_CASE("projector on a coordinate axis") {
  Matrix A = Matrix::Zero(4, 1);
  A(0, 0) = 1.0;
  const Matrix P = projector(TopographySet{std::move(A)});
  Matrix expect = Matrix::Zero(4, 4);
  expect(0, 0) = 1.0;
  CHECK((P - expect).norm() < 1e-14);
}

TEST_CASE("projector reproduces its own columns") {
  Rng rng(3);
  const Matrix A = testsup::random_matrix(7, 3, rng);
  const Matrix P = projector(TopographySet{Matrix(A)});
  CHECK((P * A - A).norm() < 1e-10 * A.norm());
}

TEST_CASE("projector matches the normal-equations oracle") {
  Rng rng(4);
  const Matrix A = testsup::random_matrix(6, 2, rng);
  const Matrix P = projector(TopographySet{Matrix(A)});
  const Matrix oracle =
      A * (A.transpose() * A).inverse() * A.transpose();
  CHECK((P - oracle).norm() < 1e-9);
}

TEST_CASE("projector rejects rank-deficient sets and names columns") {
  Rng rng(5);
  Matrix A(6, 3);
  A.col(0) = testsup::random_vector(6, rng);
  A.col(1) = testsup::random_vector(6, rng);
  A.col(2) = 2.0 * A.col(0) - A.col(1);
  try {
    projector(TopographySet{std::move(A), {10, 20, 30}});
    FAIL("expected DegeneracyError");
  } catch (const DegeneracyError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("rank deficient") != std::string::npos);
    CHECK(msg.find("grid") != std::string::npos);
  }
}

TEST_CASE("projector laws over random instances") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 4 + static_cast<int>(rng.below(9));   // 4..12
    const int k = 1 + static_cast<int>(rng.below(std::min(4, m - 1)));
    const Matrix A = testsup::random_matrix(m, k, rng);
    const Matrix P = projector(TopographySet{Matrix(A)});
    CHECK((P - P.transpose()).norm() < 1e-12);
    CHECK((P * P - P).norm() <= 1e-10);
    Eigen::SelfAdjointEigenSolver<Matrix> es(P, Eigen::EigenvaluesOnly);
    int rank = 0;
    for (int i = 0; i < m; ++i) {
      const double ev = es.eigenvalues()(i);
      CHECK((std::abs(ev) < 1e-8 || std::abs(ev - 1.0) < 1e-8));
      if (ev > 0.5) ++rank;
    }
    CHECK(rank == k);
  }
}

TEST_CASE("projection-matrix decomposition identity") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 5 + static_cast<int>(rng.below(6));
    const Matrix B = testsup::random_matrix(m, 2, rng);
    const Matrix D = testsup::random_matrix(m, 1, rng);
    Matrix BD(m, 3);
    BD << B, D;
    const Matrix joint = projector(TopographySet{std::move(BD)});
    const Matrix PB = projector(TopographySet{Matrix(B)});
    const Matrix QB = Matrix::Identity(m, m) - PB;
    const Matrix second = projector(TopographySet{Matrix(QB * D)});
    CHECK((joint - PB - second).norm() <= 1e-9);
  }
}

TEST_CASE("deflate annihilates its columns and is idempotent") {
  Rng rng(8);
  const int m = 6;
  CHECK((deflate(TopographySet{Matrix(m, 0)}) - Matrix::Identity(m, m)).norm() ==
        0.0);

  const Matrix A = testsup::random_matrix(m, 2, rng);
  const Matrix Q = deflate(TopographySet{Matrix(A)});
  for (int c = 0; c < 2; ++c) CHECK((Q * A.col(c)).norm() < 1e-10 * A.col(c).norm());
  // Idempotence against a plain matrix-multiply oracle.
  CHECK((Q * Q - Q).norm() < 1e-10);
}

TEST_CASE("localizer_single") {
  Rng rng(9);
  const int m = 6;
  const Vector l = testsup::random_vector(m, rng);
  const Covariance eye{Matrix(Matrix::Identity(m, m))};
  CHECK(localizer_single(l, eye) == doctest::Approx(1.0).epsilon(1e-12));

  const Covariance C = covariance(Recording{testsup::random_matrix(m, 4, rng)});
  const double v = localizer_single(l, C);
  CHECK(localizer_single(3.7 * l, C) == doctest::Approx(v).epsilon(1e-12));
  CHECK(v >= 0.0);

  const Vector y = 2.5 * l;
  const Covariance aligned{Matrix(y * y.transpose())};
  CHECK(localizer_single(l, aligned) ==
        doctest::Approx(y.squaredNorm()).epsilon(1e-12));

  CHECK_THROWS_AS(localizer_single(Vector::Zero(m), C), DomainError);
}

TEST_CASE("localizer_deflated") {
  Rng rng(10);
  const int m = 8;
  const Covariance C = covariance(Recording{testsup::random_matrix(m, 5, rng)});
  const Vector l = testsup::random_vector(m, rng);

  const Matrix I = Matrix::Identity(m, m);
  CHECK(localizer_deflated(l, I, C) ==
        doctest::Approx(localizer_single(l, C)).epsilon(1e-12));

  // A topography inside the deflated span is reported deflated-out.
  Matrix A(m, 2);
  A.col(0) = l;
  A.col(1) = testsup::random_vector(m, rng);
  const Matrix Q = deflate(TopographySet{std::move(A)});
  CHECK(is_deflated_out(localizer_deflated(l, Q, C)));

  // Equivalence with tr(P_{Ql} C) via an explicit projector-trace oracle.
  const Vector l2 = testsup::random_vector(m, rng);
  const double value = localizer_deflated(l2, Q, C);
  const Vector x = Q * l2;
  const Matrix P_x = x * x.transpose() / x.squaredNorm();
  CHECK(value == doctest::Approx((P_x * C.C).trace()).epsilon(1e-9));

  // Scale invariance.
  CHECK(localizer_deflated(-0.3 * l2, Q, C) ==
        doctest::Approx(value).epsilon(1e-12));
}

TEST_CASE("objective captures spanned signal power") {
  Rng rng(11);
  const int m = 7, n = 4;
  const Matrix Y = testsup::random_matrix(m, n, rng);
  const Recording rec{Matrix(Y)};
  const Covariance C = covariance(rec);

  // Orthonormal basis of col(Y) captures everything.
  const Matrix U = orthonormal_basis(Y);
  CHECK(objective(TopographySet{Matrix(U)}, C) ==
        doctest::Approx(C.C.trace()).epsilon(1e-12));

  // A set orthogonal to col(Y) captures nothing.
  const Matrix Q = Matrix::Identity(m, m) - U * U.transpose();
  Matrix perp = Q * testsup::random_matrix(m, 2, rng);
  CHECK(objective(TopographySet{std::move(perp)}, C) <
        1e-12 * C.C.trace());

  // Frobenius-norm oracle: tr(P_A C) = ||P_A Y||_F^2.
  const Matrix A = testsup::random_matrix(m, 3, rng);
  const TopographySet set{Matrix(A)};
  const Matrix P = projector(set);
  CHECK(objective(set, C) ==
        doctest::Approx((P * Y).squaredNorm()).epsilon(1e-9));
}

TEST_CASE("Pythagoras and trace idempotence identities") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 5 + static_cast<int>(rng.below(6));
    const Matrix Y = testsup::random_matrix(m, 6, rng);
    const Matrix A = testsup::random_matrix(m, 2, rng);
    const Matrix P = projector(TopographySet{Matrix(A)});
    const Matrix I = Matrix::Identity(m, m);
    CHECK(((I - P) * Y).squaredNorm() + (P * Y).squaredNorm() ==
          doctest::Approx(Y.squaredNorm()).epsilon(1e-12));
    const Matrix C = Y * Y.transpose();
    CHECK((P * C * P).trace() == doctest::Approx((P * C).trace()).epsilon(1e-12));
  }
}

TEST_CASE("covariance type invariants") {
  Matrix asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(Covariance{std::move(asym)}, ParameterError);
  Matrix indef(2, 2);
  indef << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(Covariance{std::move(indef)}, ParameterError);
}
