#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "qdot/finestructure.hpp"

namespace qdot {

/// Objective acceptance in a homogeneous medium.
struct CollectionGeometry {
  double numerical_aperture = 0.65;
  double medium_index = 1.0;

  void validate() const {
    if (!(medium_index > 0.0)) throw std::domain_error("medium index must be positive");
    if (!(numerical_aperture > 0.0 && numerical_aperture < medium_index))
      throw std::domain_error("numerical aperture must lie in (0, n)");
  }

  double half_angle() const {
    validate();
    return std::asin(numerical_aperture / medium_index);
  }
};

/// Fraction of a point dipole's radiated power inside a cone of half-angle
/// `half_angle` about +z (and also about -z when `both_hemispheres`).
/// Uses the angular pattern |d|^2 - |n.d|^2 integrated in closed form; only
/// |d_x|^2 + |d_y|^2 and |d_z|^2 survive the azimuthal integral.
inline double cone_fraction(const ComplexVector3& dipole, double half_angle, bool both_hemispheres = false) {
  const double in_plane = std::norm(dipole[0]) + std::norm(dipole[1]);
  const double axial = std::norm(dipole[2]);
  const double total = in_plane + axial;
  if (!(total > 0.0)) throw std::domain_error("dipole must be non-zero");
  if (!(half_angle >= 0.0 && half_angle <= std::numbers::pi / 2.0))
    throw std::domain_error("cone half-angle must lie in [0, pi/2]");
  const double u = std::cos(half_angle);
  const double cap = 1.0 - u;                 // int sin
  const double cos2 = (1.0 - u * u * u) / 3.0; // int cos^2 sin
  const double sin2 = cap - cos2;              // int sin^3
  const double pi = std::numbers::pi;
  const double power = 2.0 * pi * cap * total - (pi * sin2 * in_plane + 2.0 * pi * cos2 * axial);
  const double fraction = power / (8.0 * pi / 3.0 * total);
  return both_hemispheres ? 2.0 * fraction : fraction;
}

inline double collection_fraction(const ComplexVector3& dipole, const CollectionGeometry& g) {
  return cone_fraction(dipole, g.half_angle());
}

} // namespace qdot
