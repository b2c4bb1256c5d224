#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "celc/geometry.hpp"
#include "celc/solver.hpp"
#include "celc/sweep.hpp"
#include "celc/synth.hpp"

namespace celc::testing {

/// The base simulation scenario with every noise source off.
inline Scenario noise_free_scenario() {
  Scenario sc;
  sc.noise = {0.0, 0.0, 0.0};
  return sc;
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v(g(rng), g(rng), g(rng));
  return v.normalized();
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Angle between the normals of two homogeneous 2D lines, up to sign.
inline double line_angle(const Vec3& a, const Vec3& b) {
  const double c = std::abs(a.normalized().dot(b.normalized()));
  return std::atan2(a.normalized().cross(b.normalized()).norm(), c);
}

inline double max_abs_diff(const Mat3& a, const Mat3& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace celc::testing
