#include "celc/linefit.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "celc/errors.hpp"

namespace celc {

void LineFitParams::validate() const {
  if (!(window_len > 0.0) || !(huber_k > 0.0) || max_irls_iters <= 0 || !(convergence_tol > 0.0) ||
      min_points < 2)
    throw InvalidArgument("line fit: parameters must be positive");
}

double huber_weight(double r, double k) {
  const double a = std::abs(r);
  return a <= k ? 1.0 : k / a;
}

double huber_loss(double r, double k) {
  const double a = std::abs(r);
  return a <= k ? 0.5 * r * r : k * a - 0.5 * k * k;
}

namespace {

Vec3 weighted_tls(std::span<const Vec2> pts, const std::vector<double>& w) {
  double wsum = 0.0;
  Vec2 mean = Vec2::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    wsum += w[i];
    mean += w[i] * pts[i];
  }
  mean /= wsum;
  Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2 d = pts[i] - mean;
    S += w[i] * d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(S);
  const Vec2 n = es.eigenvectors().col(0).normalized();
  return {n.x(), n.y(), -n.dot(mean)};
}

double objective(std::span<const Vec2> pts, const Vec3& l, double k) {
  double s = 0.0;
  for (const Vec2& p : pts) s += huber_loss(l.x() * p.x() + l.y() * p.y() + l.z(), k);
  return s;
}

}  // namespace

PixelLineFit fit_line_huber(std::span<const Vec2> points, const LineFitParams& params) {
  params.validate();
  if (points.size() < params.min_points || points.size() < 2)
    throw InvalidArgument("fit_line_huber: too few points");
  Vec2 lo = points[0], hi = points[0];
  for (const Vec2& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  if ((hi - lo).norm() <= 1e-12 * (1.0 + hi.norm()))
    throw DegenerateError("fit_line_huber: all points coincide");

  const double k = params.huber_k;
  std::vector<double> w(points.size(), 1.0);
  PixelLineFit fit;
  fit.line = weighted_tls(points, w);
  fit.objective.push_back(objective(points, fit.line, k));
  for (int it = 0; it < params.max_irls_iters; ++it) {
    for (std::size_t i = 0; i < points.size(); ++i)
      w[i] = huber_weight(fit.line.x() * points[i].x() + fit.line.y() * points[i].y() + fit.line.z(), k);
    Vec3 next = weighted_tls(points, w);
    if (next.head<2>().dot(fit.line.head<2>()) < 0.0) next = -next;
    const double change = (next - fit.line).norm();
    const double obj = objective(points, next, k);
    ++fit.iterations;
    // Numerically flat steps can nudge the objective up by round-off; keep the better line.
    if (obj > fit.objective.back()) break;
    fit.line = next;
    fit.objective.push_back(obj);
    if (change < params.convergence_tol) break;
  }

  double ss = 0.0;
  std::size_t n_in = 0;
  for (const Vec2& p : points) {
    const double d = fit.line.x() * p.x() + fit.line.y() * p.y() + fit.line.z();
    if (std::abs(d) <= k) {
      ss += d * d;
      ++n_in;
    }
  }
  fit.inlier_rms = n_in ? std::sqrt(ss / static_cast<double>(n_in)) : 0.0;
  return fit;
}

namespace {

/// Events of `cl` with lo <= t <= hi.
std::vector<Vec2> points_in(const EventCluster& cl, double lo, double hi) {
  auto first = std::lower_bound(cl.events.begin(), cl.events.end(), lo,
                                [](const Event& e, double t) { return e.t < t; });
  std::vector<Vec2> pts;
  for (auto it = first; it != cl.events.end() && it->t <= hi; ++it) pts.emplace_back(it->x, it->y);
  return pts;
}

FittedLine make_fitted(std::span<const Vec2> pts, double lo, double hi, const LineFitParams& params,
                       const CameraModel& cam) {
  const PixelLineFit fit = fit_line_huber(pts, params);
  FittedLine out;
  out.pixel_line = fit.line;
  out.line = lift_line(fit.line, cam);
  out.anchor_time = 0.5 * (lo + hi);
  out.inlier_rms = fit.inlier_rms;
  out.n_points = pts.size();
  return out;
}

/// Slides a window of length w from one end toward the center.
FittedLine fit_sliding(const EventCluster& cl, const LineFitParams& params, const CameraModel& cam,
                       bool from_start) {
  const auto [t_s, t_e] = cluster_geometry_bounds(cl);
  const double w = params.window_len;
  const double center = 0.5 * (t_s + t_e);
  for (int step = 0;; ++step) {
    const double shift = 0.5 * w * step;
    double lo = from_start ? t_s + shift : t_e - shift - w;
    double hi = lo + w;
    const double mid = lo + 0.5 * w;
    if (step > 0 && (from_start ? mid > center : mid < center)) break;
    lo = std::max(lo, t_s);
    hi = std::min(hi, t_e);
    const auto pts = points_in(cl, lo, hi);
    if (pts.size() >= params.min_points) return make_fitted(pts, lo, hi, params, cam);
  }
  throw DegenerateError("boundary line: not enough events in any sub-window");
}

}  // namespace

BoundaryLines extract_boundary_lines(const EventCluster& cluster, const LineFitParams& params,
                                     const CameraModel& cam) {
  params.validate();
  if (cluster.events.size() < params.min_points)
    throw DegenerateError("boundary line: cluster has fewer events than min_points");
  BoundaryLines out{fit_sliding(cluster, params, cam, true), fit_sliding(cluster, params, cam, false)};
  if (!(out.last.anchor_time > out.first.anchor_time))
    throw DegenerateError("boundary line: sub-windows collapsed onto the same time");
  return out;
}

FittedLine extract_center_line(const EventCluster& cluster, const LineFitParams& params,
                               const CameraModel& cam) {
  params.validate();
  if (cluster.events.size() < params.min_points)
    throw DegenerateError("center line: cluster has fewer events than min_points");
  const auto [t_s, t_e] = cluster_geometry_bounds(cluster);
  const double center = 0.5 * (t_s + t_e);
  for (int step = 0;; ++step) {
    const double half = 0.5 * params.window_len * (1 + step);
    const double lo = std::max(center - half, t_s);
    const double hi = std::min(center + half, t_e);
    const auto pts = points_in(cluster, lo, hi);
    if (pts.size() >= params.min_points) return make_fitted(pts, lo, hi, params, cam);
    if (lo <= t_s && hi >= t_e) break;
  }
  throw DegenerateError("center line: not enough events around the cluster midpoint");
}

}  // namespace celc
