#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aploc/ap.hpp"
#include "aploc/rng.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>

using namespace aploc;

namespace {

const double kHead = 0.09;

const SensorArray& desk_array() {
  static SensorArray array = build_sensor_array(4, 8, 0.12);
  return array;
}

// Small real grid for solver tests.
const SourceGrid& coarse_grid() {
  static SourceGrid grid =
      build_source_grid(desk_array(), 0.03, kHead, OrientationMode::fixed);
  return grid;
}

// Fixed-mode grid with hand-picked topographies, for tests that need exact
// control of the column geometry. Points are dummies on a line.
SourceGrid synthetic_fixed_grid(const Matrix& topographies) {
  SourceGrid grid;
  grid.mode = OrientationMode::fixed;
  grid.head_radius = 1.0;
  const int g_count = static_cast<int>(topographies.cols());
  const int m = static_cast<int>(topographies.rows());
  for (int g = 0; g < g_count; ++g) {
    grid.points.emplace_back(0.01 * (g + 1), 0.0, 0.0);
    grid.orientations.emplace_back(Vec3::UnitX());
    LeadField L = LeadField::Zero(m, 3);
    L.col(0) = topographies.col(g);
    grid.leadfields.push_back(L);
  }
  grid.fixed_topographies = topographies;
  grid.stacked_leadfields.resize(m, 3 * g_count);
  grid.leadfield_gram_max.resize(g_count);
  for (int g = 0; g < g_count; ++g) {
    grid.stacked_leadfields.middleCols(3 * g, 3) = grid.leadfields[g];
    grid.leadfield_gram_max(g) = topographies.col(g).squaredNorm();
  }
  return grid;
}

// Independent evaluation of the deflated localizer at one point.
double localizer_oracle(const Vector& l, const Matrix& Q, const Matrix& C) {
  const Vector x = Q * l;
  if (x.squaredNorm() < 1e-12 * l.squaredNorm()) return kDeflatedOut;
  return x.dot(C * x) / x.squaredNorm();
}

// Brute-force maximum of tr(P_{[l_a, l_b]} C) over all index pairs.
struct PairMax {
  int a = -1, b = -1;
  double value = -1.0;
};
PairMax best_pair_oracle(const SourceGrid& grid, const Covariance& C) {
  PairMax best;
  for (int a = 0; a < grid.size(); ++a)
    for (int b = a + 1; b < grid.size(); ++b) {
      Matrix A(grid.fixed_topographies.rows(), 2);
      A.col(0) = grid.fixed_topographies.col(a);
      A.col(1) = grid.fixed_topographies.col(b);
      if (numerical_rank(A) < 2) continue;
      const double v = objective(TopographySet{std::move(A)}, C);
      if (v > best.value) best = {a, b, v};
    }
  return best;
}

}  // namespace

TEST_CASE("scan_argmax singleton and noiseless single source") {
  const SourceGrid single = source_grid_from_points(
      desk_array(), {Vec3(0.03, 0.01, 0.04)}, kHead, OrientationMode::fixed);
  Rng rng(1);
  const Covariance C =
      covariance(Recording{testsup::random_matrix(desk_array().size(), 6, rng)});
  const Matrix I = Matrix::Identity(desk_array().size(), desk_array().size());
  CHECK(scan_argmax(single, I, C, OrientationMode::fixed).index == 0);

  const SourceGrid& grid = coarse_grid();
  const int truth = grid.size() / 3;
  const Vector l = grid.fixed_topographies.col(truth);
  Matrix Y = l * testsup::random_vector(8, rng).transpose();
  const ScanPick pick =
      scan_argmax(grid, I, covariance(Recording{std::move(Y)}),
                  OrientationMode::fixed);
  CHECK(pick.index == truth);
}

TEST_CASE("scan_argmax matches the full-enumeration oracle under deflation") {
  Rng rng(2);
  Matrix topo = testsup::random_matrix(12, 60, rng);
  const SourceGrid grid = synthetic_fixed_grid(topo);
  const Covariance C = covariance(Recording{testsup::random_matrix(12, 9, rng)});

  // Deflate two of the grid's own topographies.
  Matrix A(12, 2);
  A.col(0) = topo.col(5);
  A.col(1) = topo.col(41);
  const Matrix Q = deflate(TopographySet{std::move(A)});

  int best = -1;
  double vmax = kDeflatedOut;
  for (int g = 0; g < grid.size(); ++g) {
    const double v = localizer_oracle(topo.col(g), Q, C.C);
    if (v > vmax) {
      vmax = v;
      best = g;
    }
  }
  const ScanPick pick = scan_argmax(grid, Q, C, OrientationMode::fixed);
  CHECK(pick.index == best);
  CHECK(pick.value == doctest::Approx(vmax).epsilon(1e-12));

  // The two deflated points themselves are skipped.
  CHECK(is_deflated_out(localizer_oracle(topo.col(5), Q, C.C)));
  CHECK(is_deflated_out(localizer_oracle(topo.col(41), Q, C.C)));
}

TEST_CASE("scan_argmax throws when everything is deflated-out") {
  Rng rng(3);
  Matrix topo(6, 2);
  topo.col(0) = testsup::random_vector(6, rng);
  topo.col(1) = 2.0 * topo.col(0);  // same direction
  const SourceGrid grid = synthetic_fixed_grid(topo);
  const Matrix Q = deflate(TopographySet{Matrix(topo.col(0))});
  const Covariance C{Matrix(Matrix::Identity(6, 6))};
  CHECK_THROWS_AS(scan_argmax(grid, Q, C, OrientationMode::fixed),
                  DegeneracyError);
}

TEST_CASE("solve_orientation recovers a rank-1 generator") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix L = testsup::random_matrix(10, 3, rng);
    const Vec3 q_true = testsup::random_unit_vec3(rng);
    const Vector l = L * q_true;
    const Covariance C{Matrix(l * l.transpose())};
    const Matrix I = Matrix::Identity(10, 10);
    const OrientationFit fit = solve_orientation(LeadField(L), I, C);
    const double cosang = std::abs(fit.orientation.dot(q_true));
    CHECK(std::acos(std::min(1.0, cosang)) < 1e-6);
    CHECK(fit.value == doctest::Approx(l.squaredNorm()).epsilon(1e-9));
  }
}

TEST_CASE("solve_orientation dominates random directions") {
  Rng rng(5);
  const LeadField L =
      lead_field(desk_array(), Vec3(0.04, -0.02, 0.03), kHead);
  const Covariance C =
      covariance(Recording{testsup::random_matrix(desk_array().size(), 7, rng)});
  Matrix A(desk_array().size(), 1);
  A.col(0) = testsup::random_vector(desk_array().size(), rng);
  const Matrix Q = deflate(TopographySet{std::move(A)});

  const OrientationFit fit = solve_orientation(L, Q, C);
  for (int i = 0; i < 500; ++i) {
    const Vec3 q = testsup::random_unit_vec3(rng);
    const double v = localizer_deflated(L * q, Q, C);
    CHECK(fit.value >= v - 1e-9 * std::abs(fit.value));
  }
  // The solver's own orientation attains its reported value.
  CHECK(localizer_deflated(L * fit.orientation, Q, C) ==
        doctest::Approx(fit.value).epsilon(1e-9));
}

TEST_CASE("solve_orientation is invariant to a moment-basis rotation") {
  Rng rng(6);
  const LeadField L = lead_field(desk_array(), Vec3(0.0, 0.05, 0.02), kHead);
  const Covariance C =
      covariance(Recording{testsup::random_matrix(desk_array().size(), 5, rng)});
  const Matrix I = Matrix::Identity(desk_array().size(), desk_array().size());
  const double base = solve_orientation(L, I, C).value;

  const Eigen::Matrix3d R =
      Eigen::AngleAxisd(0.83, testsup::random_unit_vec3(rng)).toRotationMatrix();
  const double rotated = solve_orientation(LeadField(L * R), I, C).value;
  CHECK(rotated == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("solve_orientation reports fully deflated lead fields") {
  Rng rng(7);
  const Matrix L = testsup::random_matrix(8, 3, rng);
  const Matrix U = orthonormal_basis(L);
  const Matrix Q = Matrix::Identity(8, 8) - U * U.transpose();
  const Covariance C{Matrix(Matrix::Identity(8, 8))};
  const OrientationFit fit = solve_orientation(LeadField(L), Q, C);
  CHECK(is_deflated_out(fit.value));
}

TEST_CASE("ap_initialize base case reduces to a plain scan") {
  Rng rng(8);
  const SourceGrid& grid = coarse_grid();
  const Covariance C =
      covariance(Recording{testsup::random_matrix(desk_array().size(), 6, rng)});
  ApConfig cfg;
  cfg.n_sources = 1;
  const ApInit init = ap_initialize(grid, C, cfg);
  const Matrix I = Matrix::Identity(desk_array().size(), desk_array().size());
  CHECK(init.indices[0] ==
        scan_argmax(grid, I, C, OrientationMode::fixed).index);
  CHECK(init.trace.non_decreasing());
}

TEST_CASE("ap_initialize recovers orthogonal sources by captured power") {
  Rng rng(9);
  const int m = 10, g_count = 24;
  Matrix topo = testsup::random_matrix(m, g_count, rng);
  // Plant two exactly orthogonal topographies.
  Matrix planted = orthonormal_basis(testsup::random_matrix(m, 2, rng));
  topo.col(4) = 3.0 * planted.col(0);
  topo.col(17) = 2.0 * planted.col(1);
  const SourceGrid grid = synthetic_fixed_grid(topo);

  // Sample-orthogonal unit time courses, source at col 4 stronger.
  const int n = 16;
  Matrix S(2, n);
  for (int j = 0; j < n; ++j) {
    S(0, j) = std::sqrt(2.0 / n) * std::cos(2.0 * M_PI * j / n);
    S(1, j) = std::sqrt(2.0 / n) * std::sin(2.0 * M_PI * j / n);
  }
  Matrix A(m, 2);
  A.col(0) = topo.col(4);
  A.col(1) = topo.col(17);
  const Matrix Y = A * (4.0 * S);
  const Covariance C = covariance(Recording{Matrix(Y)});

  ApConfig cfg;
  cfg.n_sources = 2;
  const ApInit init = ap_initialize(grid, C, cfg);
  CHECK(init.indices[0] == 4);   // stronger source first
  CHECK(init.indices[1] == 17);

  // The chosen pair attains the exhaustive two-source maximum.
  const PairMax best = best_pair_oracle(grid, C);
  CHECK(((best.a == 4 && best.b == 17)));
  Matrix chosen(m, 2);
  chosen.col(0) = topo.col(init.indices[0]);
  chosen.col(1) = topo.col(init.indices[1]);
  CHECK(objective(TopographySet{std::move(chosen)}, C) ==
        doctest::Approx(best.value).epsilon(1e-9));
}

TEST_CASE("ap_initialize second pick matches the enumeration oracle") {
  Rng rng(10);
  const Matrix topo = testsup::random_matrix(3, 4, rng);
  const SourceGrid grid = synthetic_fixed_grid(topo);
  const Covariance C = covariance(Recording{testsup::random_matrix(3, 5, rng)});

  ApConfig cfg;
  cfg.n_sources = 2;
  const ApInit init = ap_initialize(grid, C, cfg);

  const Matrix Q0 =
      deflate(TopographySet{Matrix(topo.col(init.indices[0]))});
  int best = -1;
  double vmax = kDeflatedOut;
  for (int g = 0; g < grid.size(); ++g) {
    const double v = localizer_oracle(topo.col(g), Q0, C.C);
    if (v > vmax) {
      vmax = v;
      best = g;
    }
  }
  CHECK(init.indices[1] == best);
}

TEST_CASE("ap_localize single noiseless source converges immediately") {
  Rng rng(11);
  const SourceGrid& grid = coarse_grid();
  const int truth = 2 * grid.size() / 3;
  const Vector s = testsup::random_vector(12, rng);
  const Matrix Y = grid.fixed_topographies.col(truth) * s.transpose();
  const Recording rec{Matrix(Y)};

  ApConfig cfg;
  cfg.n_sources = 1;
  const ApResult res = ap_localize(grid, rec, cfg);
  CHECK(res.converged);
  CHECK(res.iterations == 1);
  CHECK(res.estimates[0].grid_index == truth);
  CHECK(res.objective == doctest::Approx(Y.squaredNorm()).epsilon(1e-9));
  CHECK(res.trace.non_decreasing());
}

TEST_CASE("ap_localize recovers synchronous sources") {
  Rng rng(12);
  const SourceGrid& grid = coarse_grid();
  int n_recovered = 0, n_match_oracle = 0;
  const int n_trials = 20;
  for (int trial = 0; trial < n_trials; ++trial) {
    int a, b;
    do {
      a = static_cast<int>(rng.below(grid.size()));
      b = static_cast<int>(rng.below(grid.size()));
    } while ((grid.points[a] - grid.points[b]).norm() < 0.03);

    // Identical time courses: rank-1 data from two sources.
    const Vector s = testsup::random_vector(10, rng);
    const Matrix Y = (grid.fixed_topographies.col(a) +
                      grid.fixed_topographies.col(b)) *
                     s.transpose();
    const Recording rec{Matrix(Y)};

    ApConfig cfg;
    cfg.n_sources = 2;
    const ApResult res = ap_localize(grid, rec, cfg);
    CHECK(res.trace.non_decreasing());

    std::vector<int> got{res.estimates[0].grid_index,
                         res.estimates[1].grid_index};
    std::sort(got.begin(), got.end());
    std::vector<int> want{std::min(a, b), std::max(a, b)};
    if (got == want) ++n_recovered;

    const PairMax best = best_pair_oracle(grid, covariance(rec));
    CHECK(res.objective <= best.value * (1.0 + 1e-9));
    if (res.objective >= best.value * (1.0 - 1e-9)) ++n_match_oracle;
  }
  // Synchronous sources are the case recursive scanners lose; the
  // alternating refinement must keep solving it.
  CHECK(n_recovered == n_trials);
  CHECK(n_match_oracle == n_trials);
}

TEST_CASE("ap_localize objective never falls below initialization") {
  Rng rng(13);
  const SourceGrid& grid = coarse_grid();
  for (int trial = 0; trial < 10; ++trial) {
    const Recording rec{testsup::random_matrix(desk_array().size(), 12, rng)};
    ApConfig cfg;
    cfg.n_sources = 3;
    const ApResult res = ap_localize(grid, rec, cfg);
    CHECK(res.trace.non_decreasing());
    CHECK(res.objective >= res.trace.entries[cfg.n_sources - 1].objective *
                               (1.0 - 1e-12));
  }
}

TEST_CASE("ap_localize converged solutions are fixed points") {
  Rng rng(14);
  const SourceGrid& grid = coarse_grid();
  const Recording rec{testsup::random_matrix(desk_array().size(), 8, rng)};
  ApConfig cfg;
  cfg.n_sources = 2;
  const ApResult res = ap_localize(grid, rec, cfg);
  REQUIRE(res.converged);

  ApConfig longer = cfg;
  longer.max_iterations = res.iterations + 5;
  const ApResult res2 = ap_localize(grid, rec, longer);
  CHECK(res2.converged);
  CHECK(res2.iterations == res.iterations);
  for (int q = 0; q < cfg.n_sources; ++q)
    CHECK(res2.estimates[q].grid_index == res.estimates[q].grid_index);
}

TEST_CASE("deflation hides the other sources during a cycle") {
  Rng rng(15);
  const SourceGrid& grid = coarse_grid();
  const Recording rec{testsup::random_matrix(desk_array().size(), 8, rng)};
  ApConfig cfg;
  cfg.n_sources = 2;
  const ApResult res = ap_localize(grid, rec, cfg);

  // Re-create the deflation used when source 1 is updated: source 2 held.
  const int other = res.estimates[1].grid_index;
  const Matrix Q = deflate(
      TopographySet{Matrix(grid.fixed_topographies.col(other)), {other}});
  CHECK(is_deflated_out(
      localizer_deflated(grid.fixed_topographies.col(other), Q,
                         covariance(rec))));
}

TEST_CASE("ap_localize works from a single snapshot") {
  Rng rng(16);
  const SourceGrid& grid = coarse_grid();
  const int truth = 5;
  const Matrix Y = grid.fixed_topographies.col(truth) * 2.3;
  const Recording rec{Matrix(Y)};
  ApConfig cfg;
  cfg.n_sources = 1;
  const ApResult res = ap_localize(grid, rec, cfg);
  CHECK(res.estimates[0].grid_index == truth);

  cfg.n_sources = 2;  // rank-1 data, two sources requested: must not fail
  const ApResult res2 = ap_localize(grid, rec, cfg);
  CHECK(res2.trace.non_decreasing());
  CHECK(res2.estimates.size() == 2);
}

TEST_CASE("ap trace rejects genuine objective decreases") {
  ApTrace trace;
  trace.push(0, 1, 3, 10.0);
  trace.push(0, 2, 5, 10.0 - 1e-13);  // re-evaluation noise: clamped
  CHECK(trace.entries.back().objective == 10.0);
  CHECK_THROWS_AS(trace.push(1, 1, 3, 9.0), NumericError);
}

TEST_CASE("recover_sources") {
  Rng rng(17);
  const int m = 9, n = 6, q = 3;

  // Orthonormal columns: S = A' Y.
  const Matrix U = orthonormal_basis(testsup::random_matrix(m, q, rng));
  const Matrix Y1 = testsup::random_matrix(m, n, rng);
  const Matrix S1 =
      recover_sources(TopographySet{Matrix(U)}, Recording{Matrix(Y1)});
  CHECK((S1 - U.transpose() * Y1).norm() < 1e-10 * S1.norm());

  // Exact noiseless model.
  const Matrix A = testsup::random_matrix(m, q, rng);
  const Matrix S_true = testsup::random_matrix(q, n, rng);
  const Matrix S2 = recover_sources(TopographySet{Matrix(A)},
                                    Recording{Matrix(A * S_true)});
  CHECK((S2 - S_true).norm() < 1e-9 * S_true.norm());

  // Least-squares residual is orthogonal to the column span.
  const Matrix Y3 = testsup::random_matrix(m, n, rng);
  const Matrix S3 =
      recover_sources(TopographySet{Matrix(A)}, Recording{Matrix(Y3)});
  const Matrix residual = Y3 - A * S3;
  CHECK((A.transpose() * residual).norm() < 1e-9 * Y3.norm());

  // Rank-deficient sets are rejected.
  Matrix bad(m, 2);
  bad.col(0) = A.col(0);
  bad.col(1) = A.col(0);
  CHECK_THROWS_AS(
      recover_sources(TopographySet{std::move(bad)}, Recording{Matrix(Y3)}),
      DegeneracyError);
}

TEST_CASE("free-orientation localization recovers location and moment") {
  static const SourceGrid free_grid =
      build_source_grid(desk_array(), 0.03, kHead, OrientationMode::free);
  Rng rng(18);

  // Single source, known tangential moment.
  const int g = 2 * free_grid.size() / 5;
  const auto [t1, t2] = tangent_basis(free_grid.points[g]);
  const Vec3 q_true = (0.6 * t1 + 0.8 * t2).normalized();
  const Vector s = testsup::random_vector(12, rng);
  const Recording rec{Matrix((free_grid.leadfields[g] * q_true) * s.transpose())};

  ApConfig cfg;
  cfg.n_sources = 1;
  cfg.orientation_mode = OrientationMode::free;
  const ApResult res = ap_localize(free_grid, rec, cfg);
  CHECK(res.estimates[0].grid_index == g);
  CHECK(std::abs(res.estimates[0].orientation.dot(q_true)) >
        std::cos(1e-4));
  CHECK(res.trace.non_decreasing());
  // Recovered time course matches the generator up to the moment sign.
  const double sign = res.estimates[0].orientation.dot(q_true) > 0 ? 1.0 : -1.0;
  CHECK((sign * res.estimates[0].timecourse - s).norm() < 1e-6 * s.norm());
}

TEST_CASE("free-orientation localization separates two noiseless sources") {
  static const SourceGrid free_grid =
      build_source_grid(desk_array(), 0.03, kHead, OrientationMode::free);
  Rng rng(19);
  int recovered = 0;
  const int n_trials = 10;
  for (int trial = 0; trial < n_trials; ++trial) {
    int a, b;
    do {
      a = static_cast<int>(rng.below(free_grid.size()));
      b = static_cast<int>(rng.below(free_grid.size()));
    } while ((free_grid.points[a] - free_grid.points[b]).norm() < 0.04);
    const auto [a1, a2] = tangent_basis(free_grid.points[a]);
    const auto [b1, b2] = tangent_basis(free_grid.points[b]);
    const double pa = rng.uniform(0.0, 2 * M_PI), pb = rng.uniform(0.0, 2 * M_PI);
    const Vec3 qa = std::cos(pa) * a1 + std::sin(pa) * a2;
    const Vec3 qb = std::cos(pb) * b1 + std::sin(pb) * b2;

    const int n = 16;
    Matrix S(2, n);
    for (int j = 0; j < n; ++j) {
      S(0, j) = std::cos(2.0 * M_PI * j / n);
      S(1, j) = std::sin(2.0 * M_PI * j / n);
    }
    Matrix A(desk_array().size(), 2);
    A.col(0) = free_grid.leadfields[a] * qa;
    A.col(1) = free_grid.leadfields[b] * qb;
    const Recording rec{Matrix(A * S)};

    ApConfig cfg;
    cfg.n_sources = 2;
    cfg.orientation_mode = OrientationMode::free;
    const ApResult res = ap_localize(free_grid, rec, cfg);
    CHECK(res.trace.non_decreasing());
    std::vector<int> got{res.estimates[0].grid_index,
                         res.estimates[1].grid_index};
    std::sort(got.begin(), got.end());
    if (got[0] == std::min(a, b) && got[1] == std::max(a, b)) ++recovered;
  }
  CHECK(recovered == n_trials);
}

TEST_CASE("ap_initialize reports exhausted grids") {
  Rng rng(21);
  // Every topography lies in a 2-dimensional span: a third source cannot
  // be placed once two picks deflate that plane.
  const Matrix basis = testsup::random_matrix(6, 2, rng);
  Matrix topo(6, 4);
  topo.col(0) = basis.col(0);
  topo.col(1) = basis.col(1);
  topo.col(2) = basis.col(0) + basis.col(1);
  topo.col(3) = basis.col(0) - 2.0 * basis.col(1);
  const SourceGrid grid = synthetic_fixed_grid(topo);
  const Covariance C = covariance(Recording{testsup::random_matrix(6, 5, rng)});

  ApConfig cfg;
  cfg.n_sources = 3;
  CHECK_THROWS_AS(ap_initialize(grid, C, cfg), DegeneracyError);
}
