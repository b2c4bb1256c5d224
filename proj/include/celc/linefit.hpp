#pragma once

#include <span>
#include <vector>

#include "celc/clustering.hpp"
#include "celc/constraint.hpp"
#include "celc/geometry.hpp"

namespace celc {

struct LineFitParams {
  double window_len = 0.005;  ///< s
  double huber_k = 1.345;     ///< px
  int max_irls_iters = 50;
  double convergence_tol = 1e-10;
  std::size_t min_points = 10;

  void validate() const;
};

/// Result of a robust 2D fit in pixel space.
struct PixelLineFit {
  /// (a, b, c) with a^2 + b^2 = 1, so a x + b y + c is a signed distance in px.
  Vec3 line = Vec3::Zero();
  /// RMS distance of the points with unit Huber weight.
  double inlier_rms = 0.0;
  int iterations = 0;
  /// Huber objective after the initial TLS fit and after every IRLS step.
  std::vector<double> objective;
};

struct FittedLine {
  Line2D line;       ///< calibrated
  Vec3 pixel_line;   ///< (a, b) unit
  double anchor_time = 0.0;
  double inlier_rms = 0.0;
  std::size_t n_points = 0;
};

struct BoundaryLines {
  FittedLine first;
  FittedLine last;

  /// ClusterGeometry anchored at the sub-window centers.
  ClusterGeometry geometry() const {
    return {first.line, last.line, first.anchor_time, last.anchor_time};
  }
};

/// Huber weight of a residual: 1 inside [-k, k], k / |r| outside.
double huber_weight(double r, double k);
/// Huber loss: r^2 / 2 inside [-k, k], k |r| - k^2 / 2 outside.
double huber_loss(double r, double k);

/// IRLS total-least-squares line fit under the Huber loss. Throws
/// InvalidArgument with too few points and DegenerateError when the points
/// coincide.
PixelLineFit fit_line_huber(std::span<const Vec2> points, const LineFitParams& params);

/// Fits l1 and l3 on the first and last window_len of the cluster, sliding
/// each window toward the center by window_len / 2 while it holds fewer than
/// min_points events. Throws DegenerateError if either side cannot be fitted.
BoundaryLines extract_boundary_lines(const EventCluster& cluster, const LineFitParams& params,
                                     const CameraModel& cam);

/// Fits a line on a window centered at the cluster midpoint, widening it by
/// window_len / 2 on both sides while it is short of points.
FittedLine extract_center_line(const EventCluster& cluster, const LineFitParams& params,
                               const CameraModel& cam);

}  // namespace celc
