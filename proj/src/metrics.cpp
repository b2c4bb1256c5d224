#include "celc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "celc/errors.hpp"

namespace celc {

VelocityError velocity_error(const Vec3& v_gt, const Vec3& v_est) {
  const double ng = v_gt.norm();
  const double ne = v_est.norm();
  if (!(ng > 0.0)) throw InvalidArgument("metrics: zero ground-truth velocity");
  if (!(ne > 0.0)) throw InvalidArgument("metrics: zero estimated direction");
  const Vec3 g = v_gt / ng;
  Vec3 e = v_est / ne;
  if (g.dot(e) < 0.0) e = -e;
  VelocityError err;
  // atan2 keeps full precision near zero where acos would not.
  err.phi = std::atan2(g.cross(e).norm(), std::clamp(g.dot(e), -1.0, 1.0));
  err.epsilon = (g - e).norm();
  return err;
}

double angle_up_to_sign(const Vec3& a, const Vec3& b) {
  return velocity_error(a, b).phi;
}

}  // namespace celc
