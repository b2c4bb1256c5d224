#pragma once

#include "celc/geometry.hpp"

namespace celc {

/// Errors between a ground-truth velocity and an estimated direction, both
/// taken as unit vectors and sign-aligned.
struct VelocityError {
  double epsilon = 0.0;  ///< chord length |v_gt - v_est|, in [0, sqrt(2)]
  double phi = 0.0;      ///< angle in rad, in [0, pi/2]
};

/// Throws InvalidArgument when v_gt or v_est is zero.
VelocityError velocity_error(const Vec3& v_gt, const Vec3& v_est);

/// Angle between two directions up to sign, rad.
double angle_up_to_sign(const Vec3& a, const Vec3& b);

}  // namespace celc
