#include "aploc/geometry.hpp"

#include "aploc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>

namespace aploc {

namespace {

constexpr double kMu0Over4Pi = 1e-7;  // T m / (A m)
constexpr double kCenterExclusion = 1e-9;  // meters
constexpr double kGridClipFactor = 0.9;

Vec3 axis_vector(HeadPerturbation::Axis axis) {
  switch (axis) {
    case HeadPerturbation::Axis::x: return Vec3::UnitX();
    case HeadPerturbation::Axis::y: return Vec3::UnitY();
    default: return Vec3::UnitZ();
  }
}

char axis_letter(HeadPerturbation::Axis axis) {
  switch (axis) {
    case HeadPerturbation::Axis::x: return 'x';
    case HeadPerturbation::Axis::y: return 'y';
    default: return 'z';
  }
}

Eigen::Matrix3d rotation_about(HeadPerturbation::Axis axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix3d R;
  switch (axis) {
    case HeadPerturbation::Axis::x:
      R << 1, 0, 0, 0, c, -s, 0, s, c;
      break;
    case HeadPerturbation::Axis::y:
      R << c, 0, s, 0, 1, 0, -s, 0, c;
      break;
    default:
      R << c, -s, 0, s, c, 0, 0, 0, 1;
      break;
  }
  return R;
}

double leadfield_gram_max_eig(const LeadField& L) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(
      Eigen::Matrix3d(L.transpose() * L), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(2);
}

/// Field of a current dipole (moment q, position p) in a homogeneous
/// conducting sphere centred at the origin, evaluated at sensor position r
/// outside the sphere (Sarvas closed form).
Vec3 sphere_dipole_field(const Vec3& r, const Vec3& p, const Vec3& q) {
  const Vec3 a_vec = r - p;
  const double a = a_vec.norm();
  const double rn = r.norm();
  const double ar = a_vec.dot(r);
  const double F = a * (rn * a + rn * rn - p.dot(r));
  const Vec3 gradF = (a * a / rn + ar / a + 2.0 * a + 2.0 * rn) * r -
                     (a + 2.0 * rn + ar / a) * p;
  const Vec3 qxp = q.cross(p);
  return kMu0Over4Pi / (F * F) * (F * qxp - qxp.dot(r) * gradF);
}

}  // namespace

void SensorArray::validate() const {
  const int m = size();
  if (m < 2) throw ParameterError("sensor array needs M >= 2 sensors");
  if (orientations.size() != positions.size())
    throw ParameterError("sensor array positions/orientations size mismatch");
  for (int i = 0; i < m; ++i) {
    if (!positions[i].allFinite() || !orientations[i].allFinite())
      throw ParameterError("sensor array contains non-finite entries");
    if (std::abs(orientations[i].norm() - 1.0) > 1e-12)
      throw ParameterError("sensor orientation " + std::to_string(i) +
                           " is not unit norm");
  }
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if ((positions[i] - positions[j]).norm() == 0.0)
        throw ParameterError("sensor positions " + std::to_string(i) + " and " +
                             std::to_string(j) + " coincide");
}

HeadPerturbation HeadPerturbation::translation_mm(Axis axis, double mm) {
  if (!std::isfinite(mm)) throw ParameterError("perturbation magnitude not finite");
  return {Kind::translation, axis, mm * 1e-3};
}

HeadPerturbation HeadPerturbation::rotation_deg(Axis axis, double deg) {
  if (!std::isfinite(deg)) throw ParameterError("perturbation magnitude not finite");
  return {Kind::rotation, axis, deg * M_PI / 180.0};
}

double HeadPerturbation::magnitude_mm() const { return magnitude * 1e3; }

double HeadPerturbation::magnitude_deg() const {
  return magnitude * 180.0 / M_PI;
}

std::string HeadPerturbation::id() const {
  if (magnitude == 0.0) return "none";
  char buf[48];
  if (kind == Kind::translation)
    std::snprintf(buf, sizeof buf, "t%c%gmm", axis_letter(axis), magnitude_mm());
  else
    std::snprintf(buf, sizeof buf, "r%c%gdeg", axis_letter(axis), magnitude_deg());
  return buf;
}

SensorArray build_sensor_array(int n_rings, int sensors_per_ring,
                               double shell_radius) {
  if (n_rings < 1) throw ParameterError("n_rings must be >= 1");
  if (sensors_per_ring < 2) throw ParameterError("sensors_per_ring must be >= 2");
  if (!(shell_radius > 0.0)) throw ParameterError("shell_radius must be positive");

  SensorArray array;
  array.positions.reserve(static_cast<std::size_t>(n_rings) * sensors_per_ring);
  array.orientations.reserve(array.positions.capacity());
  for (int k = 0; k < n_rings; ++k) {
    const double theta = 0.5 * M_PI * (k + 1) / n_rings;
    for (int j = 0; j < sensors_per_ring; ++j) {
      const double phi = 2.0 * M_PI * (j + 0.5 * k) / sensors_per_ring;
      const Vec3 radial(std::sin(theta) * std::cos(phi),
                        std::sin(theta) * std::sin(phi), std::cos(theta));
      array.positions.push_back(shell_radius * radial);
      array.orientations.push_back(radial);
    }
  }
  array.validate();
  return array;
}

LeadField lead_field(const SensorArray& array, const Vec3& p,
                     double head_radius) {
  if (!(head_radius > 0.0)) throw ParameterError("head_radius must be positive");
  const double pn = p.norm();
  if (pn >= head_radius)
    throw DomainError("dipole location lies outside the head sphere");
  if (pn < kCenterExclusion)
    throw DomainError("dipole location coincides with the sphere centre");

  const int m = array.size();
  LeadField L(m, 3);
  for (int i = 0; i < m; ++i) {
    const Vec3& r = array.positions[i];
    if (r.norm() <= head_radius)
      throw DomainError("sensor " + std::to_string(i) +
                        " lies inside the head sphere");
    for (int j = 0; j < 3; ++j)
      L(i, j) = array.orientations[i].dot(
          sphere_dipole_field(r, p, Vec3::Unit(j)));
  }
  if (!L.allFinite()) throw NumericError("lead field is not finite");
  return L;
}

Vector topography(const LeadField& L, const Vec3& q) {
  if (std::abs(q.norm() - 1.0) > 1e-9)
    throw ParameterError("moment orientation must be unit norm");
  return L * q;
}

std::pair<Vec3, Vec3> tangent_basis(const Vec3& p) {
  const Vec3 rhat = p.normalized();
  Vec3 t1 = Vec3::UnitZ().cross(rhat);
  if (t1.norm() < 1e-12) t1 = Vec3::UnitX();  // p on the z-axis
  t1.normalize();
  return {t1, rhat.cross(t1)};
}

Vec3 strongest_tangential_orientation(const LeadField& L, const Vec3& p) {
  const auto [t1, t2] = tangent_basis(p);

  Eigen::Matrix<double, 3, 2> B;
  B.col(0) = t1;
  B.col(1) = t2;
  const Eigen::Matrix2d K = B.transpose() * (L.transpose() * L) * B;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(K);
  Vec3 q = (B * es.eigenvectors().col(1)).normalized();
  fix_sign(q);
  return q;
}

namespace {

// Lead fields plus scan caches for a grid whose points (and, in fixed mode,
// orientations) are already set.
void fill_leadfields(SourceGrid& grid, const SensorArray& array,
                     bool pick_orientations) {
  const int g_count = grid.size();
  const int m = array.size();
  grid.leadfields.clear();
  grid.leadfields.reserve(g_count);
  grid.stacked_leadfields.resize(m, 3 * g_count);
  grid.leadfield_gram_max.resize(g_count);
  for (int g = 0; g < g_count; ++g) {
    grid.leadfields.push_back(
        lead_field(array, grid.points[g], grid.head_radius));
    grid.stacked_leadfields.middleCols(3 * g, 3) = grid.leadfields.back();
    grid.leadfield_gram_max(g) = leadfield_gram_max_eig(grid.leadfields.back());
  }
  if (grid.mode == OrientationMode::fixed) {
    if (pick_orientations) {
      grid.orientations.clear();
      grid.orientations.reserve(g_count);
      for (int g = 0; g < g_count; ++g)
        grid.orientations.push_back(strongest_tangential_orientation(
            grid.leadfields[g], grid.points[g]));
    }
    grid.fixed_topographies.resize(m, g_count);
    for (int g = 0; g < g_count; ++g)
      grid.fixed_topographies.col(g) =
          grid.leadfields[g] * grid.orientations[g];
  }
}

}  // namespace

SourceGrid source_grid_from_points(const SensorArray& array,
                                   std::vector<Vec3> points,
                                   double head_radius, OrientationMode mode) {
  if (points.empty()) throw ParameterError("grid needs at least one point");
  array.validate();
  SourceGrid grid;
  grid.points = std::move(points);
  grid.head_radius = head_radius;
  grid.mode = mode;
  fill_leadfields(grid, array, true);
  return grid;
}

SourceGrid build_source_grid(const SensorArray& array, double spacing,
                             double head_radius, OrientationMode mode) {
  if (!(spacing > 0.0) || !(spacing < head_radius))
    throw ParameterError("grid spacing must satisfy 0 < spacing < head_radius");

  const double clip = kGridClipFactor * head_radius;
  const int n = static_cast<int>(std::floor(clip / spacing));

  std::vector<Vec3> points;
  for (int ix = -n; ix <= n; ++ix)
    for (int iy = -n; iy <= n; ++iy)
      for (int iz = -n; iz <= n; ++iz) {
        if (ix == 0 && iy == 0 && iz == 0) continue;  // forward model singular
        const Vec3 pnt(ix * spacing, iy * spacing, iz * spacing);
        if (pnt.norm() < clip) points.push_back(pnt);
      }
  if (points.empty())
    throw ParameterError("grid spacing produces an empty grid");
  return source_grid_from_points(array, std::move(points), head_radius, mode);
}

SourceGrid recompute_leadfields(const SourceGrid& grid,
                                const SensorArray& array) {
  array.validate();
  SourceGrid out;
  out.points = grid.points;
  out.orientations = grid.orientations;
  out.head_radius = grid.head_radius;
  out.mode = grid.mode;
  fill_leadfields(out, array, false);
  return out;
}

SensorArray perturb_forward(const SensorArray& array,
                            const HeadPerturbation& pert) {
  if (!std::isfinite(pert.magnitude))
    throw ParameterError("perturbation magnitude not finite");
  SensorArray out = array;
  if (pert.magnitude == 0.0) return out;
  if (pert.kind == HeadPerturbation::Kind::translation) {
    const Vec3 t = pert.magnitude * axis_vector(pert.axis);
    for (auto& pos : out.positions) pos += t;
  } else {
    const Eigen::Matrix3d R = rotation_about(pert.axis, pert.magnitude);
    for (auto& pos : out.positions) pos = R * pos;
    for (auto& ori : out.orientations) ori = R * ori;
  }
  return out;
}

}  // namespace aploc
