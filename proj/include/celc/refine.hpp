#pragma once

#include <span>
#include <vector>

#include "celc/geometry.hpp"
#include "celc/solver.hpp"

namespace celc {

struct RefineParams {
  /// Huber threshold in normalized image units; about one pixel is 1 / f.
  double huber_k = 1.0 / 200.0;
  int max_iters = 100;
  double gradient_tol = 1e-10;
  double step_tol = 1e-12;

  static RefineParams for_camera(const CameraModel& cam) {
    RefineParams p;
    p.huber_k = 1.0 / cam.mean_focal();
    return p;
  }
};

struct RefineResult {
  Vec3 v_refined = Vec3::UnitZ();
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Residuals skipped at the final state because the transferred line vanished.
  std::size_t dropped_residuals = 0;
};

/// Perpendicular distance between the normalized image point f / f_z and the
/// line l, in normalized image units. Throws InvalidArgument for a line at
/// infinity or a bearing with f_z <= 0.
double geometric_distance(const Vec3& l, const Bearing& f);
inline double geometric_distance(const Line2D& l, const Bearing& f) {
  return geometric_distance(l.vec(), f);
}

/// Orthonormal basis (as columns) of the tangent plane of the unit sphere at v.
Eigen::Matrix<double, 3, 2> tangent_basis(const Vec3& v);

/// normalize(v + basis * delta).
Vec3 sphere_retract(const Vec3& v, const Eigen::Matrix<double, 3, 2>& basis, const Eigen::Vector2d& delta);

/// Point-to-transferred-line residuals of all events, with the B_k
/// precomputed once for the fixed angular velocity.
class TransferProblem {
 public:
  TransferProblem(std::span<const ClusterObservations> clusters, const AngularVelocity& w);

  std::size_t size() const { return B_.size(); }

  /// Signed distances at v. Entries whose transferred line vanished are set
  /// to NaN.
  Eigen::VectorXd residuals(const Vec3& v) const;

  /// Residuals and their Jacobian with respect to the tangent coordinates
  /// `basis` at v (rows of vanished residuals are NaN).
  void evaluate(const Vec3& v, const Eigen::Matrix<double, 3, 2>& basis, Eigen::VectorXd& r,
                Eigen::MatrixX2d& J) const;

  /// Sum of Huber losses over the finite residuals; counts the others.
  double cost(const Vec3& v, double huber_k, std::size_t* dropped = nullptr) const;

 private:
  std::vector<Mat3> B_;
  std::vector<Vec3> x_;  // f / f_z
};

/// Robust trust-region (Levenberg-Marquardt) refinement of the velocity
/// direction on the unit sphere. Throws DegenerateError when every residual
/// is dropped.
RefineResult refine_velocity(std::span<const ClusterObservations> clusters, const AngularVelocity& w,
                             const Vec3& v_init, const RefineParams& params = {});

}  // namespace celc
