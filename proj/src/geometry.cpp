#include "celc/geometry.hpp"

#include <cmath>

#include "celc/errors.hpp"

namespace celc {

Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

Rotation3 so3_exp(const AngularVelocity& w, double dt) {
  const Vec3 phi = w * dt;
  const double theta = phi.norm();
  const Mat3 W = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + W + 0.5 * W * W;
  }
  const Vec3 a = phi / theta;
  const double h = std::sin(0.5 * theta);
  return std::cos(theta) * Mat3::Identity() + 2.0 * h * h * a * a.transpose() + std::sin(theta) * skew(a);
}

Mat3 so3_left_jacobian(const AngularVelocity& w, double dt) {
  const Vec3 phi = w * dt;
  const double theta = phi.norm();
  if (theta < kSmallAngle) {
    const Mat3 W = skew(phi);
    return Mat3::Identity() + 0.5 * W + (1.0 / 6.0) * W * W;
  }
  const Vec3 a = phi / theta;
  const double s = std::sin(theta) / theta;
  const double h = std::sin(0.5 * theta);
  return s * Mat3::Identity() + (1.0 - s) * a * a.transpose() + (2.0 * h * h / theta) * skew(a);
}

Vec3 translation_from_velocity(const AngularVelocity& w, const LinearVelocity& v, double dt) {
  return so3_left_jacobian(w, dt) * v * dt;
}

Bearing::Bearing(const Vec3& ray) {
  const double n = ray.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("bearing: zero or non-finite ray");
  f_ = ray / n;
}

Line2D::Line2D(const Vec3& l) {
  const double n = l.norm();
  if (!(n > 1e-300) || !std::isfinite(n)) throw InvalidArgument("line: zero or non-finite vector");
  l_ = l / n;
}

Mat3 CameraModel::K() const {
  Mat3 k;
  k << fx, 0.0, cx,
       0.0, fy, cy,
       0.0, 0.0, 1.0;
  return k;
}

bool CameraModel::has_distortion() const {
  for (double d : dist)
    if (d != 0.0) return true;
  return false;
}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("camera: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidArgument("camera: sensor size must be positive");
}

Vec2 CameraModel::distort(const Vec2& xn) const {
  const auto [k1, k2, p1, p2, k3] = dist;
  const double x = xn.x(), y = xn.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
  return {x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x),
          y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y};
}

Vec2 CameraModel::undistort(const Vec2& xd) const {
  if (!has_distortion()) return xd;
  constexpr int kMaxIters = 20;
  constexpr double kTol = 1e-8;
  const auto [k1, k2, p1, p2, k3] = dist;
  Vec2 x = xd;
  for (int it = 0; it < kMaxIters; ++it) {
    const double r2 = x.squaredNorm();
    const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
    const Vec2 tangential{2.0 * p1 * x.x() * x.y() + p2 * (r2 + 2.0 * x.x() * x.x()),
                          p1 * (r2 + 2.0 * x.y() * x.y()) + 2.0 * p2 * x.x() * x.y()};
    const Vec2 next = (xd - tangential) / radial;
    const double step = (next - x).norm();
    x = next;
    if (!x.allFinite()) break;
    if (step < kTol) {
      if ((distort(x) - xd).norm() < kTol) return x;
      break;
    }
  }
  throw DegenerateError("undistortion did not converge; check the distortion coefficients");
}

Vec2 CameraModel::project(const Vec3& X) const {
  const Vec2 xd = distort(Vec2{X.x() / X.z(), X.y() / X.z()});
  return {fx * xd.x() + cx, fy * xd.y() + cy};
}

Vec2 CameraModel::normalized_to_pixel(const Vec2& xn) const {
  return {fx * xn.x() + cx, fy * xn.y() + cy};
}

bool CameraModel::in_bounds(const Vec2& px) const {
  return px.x() >= 0.0 && px.y() >= 0.0 && px.x() < width && px.y() < height;
}

Vec2 pixel_to_normalized(const Vec2& px, const CameraModel& cam) {
  const Vec2 xd{(px.x() - cam.cx) / cam.fx, (px.y() - cam.cy) / cam.fy};
  return cam.undistort(xd);
}

Bearing lift_pixel(const Vec2& px, const CameraModel& cam) {
  const Vec2 xn = pixel_to_normalized(px, cam);
  return Bearing(Vec3{xn.x(), xn.y(), 1.0});
}

Line2D lift_line(const Vec3& line_px, const CameraModel& cam) {
  if (!(line_px.norm() > 0.0)) throw InvalidArgument("lift_line: zero line vector");
  return Line2D(cam.K().transpose() * line_px);
}

}  // namespace celc
