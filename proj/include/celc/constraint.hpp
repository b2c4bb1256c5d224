#pragma once

#include <array>

#include "celc/geometry.hpp"

namespace celc {

/// Boundary lines of one event cluster and the times they were observed.
struct ClusterGeometry {
  Line2D l1;         ///< line at t_s
  Line2D l3;         ///< line at t_e
  double t_s = 0.0;  ///< seconds
  double t_e = 0.0;  ///< seconds
};

/// Per-event 3x3 matrix B_k with f^T B_k v = 0 for the true velocity.
using CelcMatrix = Mat3;
/// The three slices T_1..T_3 of a trifocal tensor.
using TrifocalSlices = std::array<Mat3, 3>;

/// Event times may fall outside [t_s, t_e] by this much before being rejected.
inline constexpr double kTimeTolerance = 1e-9;

/// One row of the stacked homogeneous system A v = 0.
struct ConstraintRow {
  Vec3 row = Vec3::Zero();
  /// Frobenius norm of the matrix the row was taken from; the reference
  /// magnitude for deciding that a row has "vanished".
  double source_norm = 0.0;
  /// d row / d (x, y) of the observation in the normalized image plane.
  /// Zero when the row carries no per-observation noise model.
  Eigen::Matrix<double, 3, 2> noise_jacobian = Eigen::Matrix<double, 3, 2>::Zero();
  int cluster = -1;
  int index = -1;
};

/// Clamps t_k into [t_s, t_e] if it is within kTimeTolerance outside,
/// otherwise throws InvalidArgument. Also rejects t_e < t_s.
double admissible_time(const ClusterGeometry& geom, double t_k);

/// Continuous-time trifocal tensor for the event view at t_k, with the views
/// at t_s and t_e as the two outer views.
TrifocalSlices continuous_trifocal(const ClusterGeometry& geom, const AngularVelocity& w,
                                   const LinearVelocity& v, double t_k);

/// Classical calibrated trifocal tensor T_i = r_i^{12} t_32^T - t_12 r_i^{32 T}
/// from the transforms taking reference-view points into views 1 and 3.
TrifocalSlices classical_trifocal(const Rotation3& R12, const Vec3& t12, const Rotation3& R32,
                                  const Vec3& t32);

/// Builds B_k; independent of the linear velocity.
CelcMatrix build_celc_matrix(const ClusterGeometry& geom, const AngularVelocity& w, double t_k);

/// f^T B v.
double celc_residual(const Bearing& f, const CelcMatrix& B, const LinearVelocity& v);

/// f^T B v / (|B^T f| |v|), zero when the denominator vanishes.
double celc_residual_normalized(const Bearing& f, const CelcMatrix& B, const LinearVelocity& v);

/// Predicted image line at t_k: normalize(B v). Throws DegenerateError when
/// |B v| < 1e-14.
Line2D transfer_line(const ClusterGeometry& geom, const AngularVelocity& w,
                     const LinearVelocity& v, double t_k);

/// Line-line-line rows: rows of skew(l2) * B evaluated at t_mid.
std::array<ConstraintRow, 3> build_ce3lc_rows(const ClusterGeometry& geom, const Line2D& l2,
                                              const AngularVelocity& w, double t_mid);

}  // namespace celc
