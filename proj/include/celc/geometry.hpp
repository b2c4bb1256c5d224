#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>

namespace celc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Orthonormal 3x3 matrix with det = +1.
using Rotation3 = Mat3;
/// Body-frame angular velocity, rad/s.
using AngularVelocity = Vec3;
/// Body-frame linear velocity, m/s.
using LinearVelocity = Vec3;

/// Below this rotation angle the closed forms switch to their Taylor series.
inline constexpr double kSmallAngle = 1e-8;

Mat3 skew(const Vec3& w);

/// Rodrigues: exp of the rotation vector w * dt.
Rotation3 so3_exp(const AngularVelocity& w, double dt);

/// Left Jacobian of SO(3) evaluated at the rotation vector w * dt.
Mat3 so3_left_jacobian(const AngularVelocity& w, double dt);

/// Translation accumulated over dt under a constant body twist (w, v):
/// J(w dt) v dt.
Vec3 translation_from_velocity(const AngularVelocity& w, const LinearVelocity& v, double dt);

/// Unit-norm 3-vector of a calibrated ray.
class Bearing {
 public:
  Bearing() = default;
  /// Normalizes `ray`; throws InvalidArgument on a zero vector.
  explicit Bearing(const Vec3& ray);

  const Vec3& vec() const { return f_; }
  double operator[](int i) const { return f_[i]; }

 private:
  Vec3 f_{0.0, 0.0, 1.0};
};

/// Homogeneous image line in calibrated coordinates, stored with unit norm.
class Line2D {
 public:
  Line2D() = default;
  /// Normalizes `l`; throws InvalidArgument if it is (numerically) zero.
  explicit Line2D(const Vec3& l);

  const Vec3& vec() const { return l_; }
  double operator[](int i) const { return l_[i]; }

 private:
  Vec3 l_{0.0, 0.0, 1.0};
};

/// Pinhole intrinsics plus radial-tangential distortion (k1, k2, p1, p2, k3).
struct CameraModel {
  double fx = 200.0;
  double fy = 200.0;
  double cx = 173.0;
  double cy = 130.0;
  std::array<double, 5> dist{0.0, 0.0, 0.0, 0.0, 0.0};
  int width = 346;
  int height = 260;

  Mat3 K() const;
  double mean_focal() const { return 0.5 * (fx + fy); }
  bool has_distortion() const;

  /// Throws InvalidArgument unless fx, fy > 0 and the sensor size is positive.
  void validate() const;

  /// Applies the distortion model to a normalized image point.
  Vec2 distort(const Vec2& xn) const;
  /// Inverts distort() by fixed-point iteration (20 iterations, 1e-8 tolerance).
  /// Throws DegenerateError if the iteration does not converge.
  Vec2 undistort(const Vec2& xd) const;

  /// Camera-frame point (z > 0) to distorted pixel coordinates.
  Vec2 project(const Vec3& X) const;
  /// Normalized (undistorted) point to pixel coordinates without distortion.
  Vec2 normalized_to_pixel(const Vec2& xn) const;
  bool in_bounds(const Vec2& px) const;
};

/// Bearing of the undistorted ray through pixel `px`.
Bearing lift_pixel(const Vec2& px, const CameraModel& cam);

/// Pixel-space line to calibrated line: K^T l, normalized.
Line2D lift_line(const Vec3& line_px, const CameraModel& cam);

/// Normalized undistorted image coordinates of a pixel.
Vec2 pixel_to_normalized(const Vec2& px, const CameraModel& cam);

}  // namespace celc
