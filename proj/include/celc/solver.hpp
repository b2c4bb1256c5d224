#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "celc/constraint.hpp"
#include "celc/geometry.hpp"

namespace celc {

/// An event reduced to what the constraint needs: its time and bearing.
struct TimedBearing {
  double t = 0.0;
  Bearing f;
};

/// One cluster ready for the solvers.
struct ClusterObservations {
  ClusterGeometry geom;
  std::vector<TimedBearing> events;
  /// Line fitted around the cluster midpoint (CE3LC only) and its time.
  std::optional<Line2D> center_line;
  double center_time = 0.0;
};

/// Rows B_k^T f_k of the homogeneous system A v = 0.
struct StackedSystem {
  std::vector<ConstraintRow> rows;

  std::size_t size() const { return rows.size(); }
  Eigen::MatrixX3d matrix() const;
};

enum class DegeneracyKind { none, pure_rotation, parallel_lines_translation };

std::string_view to_string(DegeneracyKind kind);

struct SolverParams {
  std::size_t sample_size = 1000;
  double huber_k = 1.345;
  int max_iters = 50;
  double weight_tol = 1e-8;
  std::uint64_t seed = 0;
  /// sigma2 / sigma1 below this marks the nullspace as at least 2-dimensional.
  double degeneracy_threshold = 1e-6;
  /// sigma3 / sigma2 above this marks the solution as ill-conditioned.
  double ill_conditioned_gap = 0.3;
  /// |A|_F relative to the norms of the source matrices below this means
  /// every row vanished (no translation information at all).
  double vanish_threshold = 1e-6;
  /// Largest over smallest generalized eigenvalue of the unweighted (A^T A, N)
  /// below this means the rows are explained by image noise alone, as under
  /// pure rotation.
  double noise_only_spread = 1.6;
  /// |w| below this is treated as zero rotation when diagnosing.
  double zero_rotation_tol = 1e-9;
  /// Angle (rad) within which cluster line directions count as parallel.
  double parallel_angle_tol = 1e-3;
  /// After IRLS, take v from the generalized problem M v = lambda N v with
  /// M = A^T W A and N = sum_i w_i G_i G_i^T (G_i the row noise Jacobians).
  /// Removes the first-order bias that image noise puts into A^T A.
  /// Ignored when the rows carry no noise Jacobians.
  bool noise_normalization = true;
};

struct MotionEstimate {
  Vec3 v_dir = Vec3::UnitZ();
  /// sigma1 >= sigma2 >= sigma3 of the final weighted system.
  Vec3 singular_values = Vec3::Zero();
  bool degenerate = false;
  DegeneracyKind degeneracy_kind = DegeneracyKind::none;
  bool ill_conditioned = false;
  double inlier_fraction = 1.0;
  /// |A|_F / sqrt(sum of squared source norms) over the rows used.
  double row_energy_ratio = 0.0;
  /// Spread of the generalized eigenvalues of (M, N); infinite without a noise model.
  double noise_spread = std::numeric_limits<double>::infinity();
  std::size_t rows_used = 0;
  int iterations = 0;
  /// The returned direction came from the noise-normalized step.
  bool noise_normalized = false;
  /// Per IRLS step: Huber objective at the step's scale before and after the update.
  std::vector<std::pair<double, double>> objective_trace;
};

/// One row per event across all clusters, in order.
StackedSystem stack_rows(std::span<const ClusterObservations> clusters, const AngularVelocity& w);

/// Smallest right singular vector of A (unweighted, all rows).
Vec3 solve_nullspace_svd(const StackedSystem& sys);

/// Huber-IRLS nullspace of a (possibly subsampled) system.
MotionEstimate solve_nullspace_robust(const StackedSystem& sys, const SolverParams& params = {});

/// Classifies a finished solve.
DegeneracyKind diagnose_degeneracy(const MotionEstimate& est,
                                   std::span<const ClusterObservations> clusters,
                                   const AngularVelocity& w, const SolverParams& params = {});

/// stack_rows + solve_nullspace_robust + diagnose_degeneracy.
MotionEstimate solve_celc(std::span<const ClusterObservations> clusters, const AngularVelocity& w,
                          const SolverParams& params = {});

/// Line-line-line baseline: three rows per cluster from its center line.
MotionEstimate solve_ce3lc(std::span<const ClusterObservations> clusters, const AngularVelocity& w,
                           const SolverParams& params = {});

}  // namespace celc
