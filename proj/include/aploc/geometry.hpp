#pragma once

#include "aploc/types.hpp"

#include <vector>

namespace aploc {

/// Measurement geometry: M point magnetometers, each with a position and a
/// unit pickup orientation, expressed in the head frame (head sphere centred
/// at the origin).
struct SensorArray {
  std::vector<Vec3> positions;     // meters
  std::vector<Vec3> orientations;  // unit vectors

  int size() const { return static_cast<int>(positions.size()); }

  /// Enforce the type invariants: M >= 2, distinct positions, unit
  /// orientations (1e-12). Throws ParameterError.
  void validate() const;
};

/// Rigid-body misregistration between the true head-sensor geometry and the
/// geometry assumed during localization. Stored in SI units (meters /
/// radians); construct via the mm / degree factories.
struct HeadPerturbation {
  enum class Kind { translation, rotation };
  enum class Axis { x, y, z };

  Kind kind = Kind::translation;
  Axis axis = Axis::x;
  double magnitude = 0.0;  // meters (translation) or radians (rotation)

  static HeadPerturbation translation_mm(Axis axis, double mm);
  static HeadPerturbation rotation_deg(Axis axis, double deg);

  double magnitude_mm() const;   // translation only
  double magnitude_deg() const;  // rotation only

  /// Compact identifier, e.g. "tx1mm", "ry2deg". Zero magnitude -> "none".
  std::string id() const;
};

/// Candidate source space: grid points inside the head sphere with
/// precomputed M x 3 lead-field blocks, plus (in fixed mode) one unit
/// orientation per point.
///
/// The lead fields are tied to one SensorArray. To localize against a
/// perturbed geometry, rebuild them with recompute_leadfields(); the points
/// and the fixed orientations are part of the source-space hypothesis and
/// stay unchanged.
struct SourceGrid {
  std::vector<Vec3> points;            // meters, strictly inside the sphere
  std::vector<LeadField> leadfields;   // per point, M x 3
  std::vector<Vec3> orientations;      // fixed mode: unit vectors; else empty
  double head_radius = 0.0;
  OrientationMode mode = OrientationMode::fixed;

  // Scan caches derived from the fields above.
  Matrix fixed_topographies;   // M x G (fixed mode): column g = L_g q_g
  Matrix stacked_leadfields;   // M x 3G: columns 3g..3g+2 = L_g
  Vector leadfield_gram_max;   // per point, lambda_max(L'L)

  int size() const { return static_cast<int>(points.size()); }

  const LeadField& leadfield(int g) const { return leadfields[g]; }

  double lf_gram_max(int g) const { return leadfield_gram_max(g); }
};

/// Radial magnetometers on a hemispherical shell of the given radius,
/// centred on the head sphere. Ring k (k = 0..n_rings-1) sits at polar angle
/// theta_k = (pi/2) (k+1) / n_rings; within a ring the azimuths are
/// phi_j = 2 pi (j + k/2) / sensors_per_ring (alternate rings staggered by a
/// half step). M = n_rings * sensors_per_ring.
SensorArray build_sensor_array(int n_rings, int sensors_per_ring,
                               double shell_radius);

/// M x 3 forward matrix of a current dipole at p (head frame, meters) for a
/// spherical homogeneous conductor, closed form for point magnetometers.
/// Columns map the x/y/z moment components (A m) to sensor readings (T).
/// p must be strictly inside the sphere and away from its centre; all
/// sensors must sit strictly outside the sphere.
LeadField lead_field(const SensorArray& array, const Vec3& p,
                     double head_radius);

/// l(p) = L q for a unit moment q (checked to 1e-9).
Vector topography(const LeadField& L, const Vec3& q);

/// Deterministic orthonormal tangent frame at p: t1 = z x p_hat (or x_hat
/// when p lies on the z-axis), t2 = p_hat x t1.
std::pair<Vec3, Vec3> tangent_basis(const Vec3& p);

/// Tangential unit orientation at p maximizing the lead-field response
/// ||L q||; sign-fixed. Radial moments are invisible to the spherical
/// model, so candidate orientations are restricted to the tangent plane.
Vec3 strongest_tangential_orientation(const LeadField& L, const Vec3& p);

/// Cubic lattice at integer multiples of `spacing`, clipped to
/// ||p|| < 0.9 * head_radius. The centre point is omitted (the forward
/// model is singular there). Points are ordered lexicographically by lattice
/// index, so the result is deterministic given the parameters.
SourceGrid build_source_grid(const SensorArray& array, double spacing,
                             double head_radius, OrientationMode mode);

/// Grid over explicit candidate points (each strictly inside the sphere).
SourceGrid source_grid_from_points(const SensorArray& array,
                                   std::vector<Vec3> points,
                                   double head_radius, OrientationMode mode);

/// Same points and orientations, lead fields rebuilt against `array`.
SourceGrid recompute_leadfields(const SourceGrid& grid,
                                const SensorArray& array);

/// Apply the rigid-body transform (about the head origin) to sensor
/// positions and orientations. Data generated with the original array and
/// localized with the perturbed one reproduce a head-misregistration error.
SensorArray perturb_forward(const SensorArray& array,
                            const HeadPerturbation& pert);

}  // namespace aploc
