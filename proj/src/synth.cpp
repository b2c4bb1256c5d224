#include "celc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "celc/errors.hpp"

namespace celc::synth {

namespace {

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double gaussian(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

constexpr double kMinDepth = 0.1;

/// Both endpoints in camera coordinates, clipped to z >= kMinDepth.
std::pair<Vec3, Vec3> camera_segment(const LineSegment3& seg, const Pose& pose) {
  Vec3 A = pose.to_camera(seg.a);
  Vec3 B = pose.to_camera(seg.b);
  if (A.z() < kMinDepth && B.z() < kMinDepth) throw DegenerateError("segment entirely behind the camera");
  auto clip = [&](Vec3& P, const Vec3& Q) {
    const double s = (kMinDepth - P.z()) / (Q.z() - P.z());
    P = P + s * (Q - P);
  };
  if (A.z() < kMinDepth) clip(A, B);
  if (B.z() < kMinDepth) clip(B, A);
  return {A, B};
}

}  // namespace

SceneSpec random_scene(int n_lines, const Volume& volume, Rng& rng) {
  if (n_lines < 1) throw InvalidArgument("random_scene: need at least one line");
  SceneSpec scene;
  scene.volume = volume;
  auto draw = [&] {
    return Vec3(uniform(rng, volume.lo.x(), volume.hi.x()), uniform(rng, volume.lo.y(), volume.hi.y()),
                uniform(rng, volume.lo.z(), volume.hi.z()));
  };
  while (static_cast<int>(scene.lines.size()) < n_lines) {
    LineSegment3 s{draw(), draw()};
    if ((s.b - s.a).norm() >= 0.1) scene.lines.push_back(s);
  }
  return scene;
}

Pose camera_pose_at(const MotionSpec& motion, double t) {
  if (!(t >= 0.0 && t <= motion.duration)) throw InvalidArgument("camera_pose_at: time outside the interval");
  return {so3_exp(motion.w, t), translation_from_velocity(motion.w, motion.v, t)};
}

EventStream generate_events(const SceneSpec& scene, const MotionSpec& motion, const CameraModel& cam,
                            std::size_t n_events, const NoiseSpec& noise, Rng& rng) {
  EventStream out;
  const std::size_t n_lines = scene.lines.size();
  if (n_events == 0 || n_lines == 0) return out;
  out.events.reserve(n_events);

  auto try_sample = [&](const LineSegment3& seg, LabeledEvent& ev) {
    const double s = uniform(rng, 0.0, 1.0);
    const double t = uniform(rng, 0.0, motion.duration);
    const Vec3 X = camera_pose_at(motion, t).to_camera(seg.a + s * (seg.b - seg.a));
    if (!(X.z() > 1e-6)) return false;
    const Vec2 px = cam.project(X);
    if (!cam.in_bounds(px)) return false;
    ev.clean_px = px;
    ev.event.t = t;
    return true;
  };

  constexpr int kProbeAttempts = 2000;
  constexpr long kMaxAttempts = 1'000'000;
  for (std::size_t li = 0; li < n_lines; ++li) {
    const std::size_t count = n_events / n_lines + (li < n_events % n_lines ? 1 : 0);
    const LineSegment3& seg = scene.lines[li];
    for (std::size_t k = 0; k < count; ++k) {
      LabeledEvent ev;
      ev.label = static_cast<int>(li);
      const long limit = k == 0 ? kProbeAttempts : kMaxAttempts;
      bool ok = false;
      for (long a = 0; a < limit && !ok; ++a) ok = try_sample(seg, ev);
      if (!ok) {
        if (k != 0) throw DegenerateError("generate_events: visible line stopped producing events");
        out.invisible_lines.push_back(static_cast<int>(li));
        break;
      }
      const double nx = gaussian(rng), ny = gaussian(rng);
      ev.event.x = ev.clean_px.x() + noise.event_sigma * nx;
      ev.event.y = ev.clean_px.y() + noise.event_sigma * ny;
      ev.event.polarity = 1;
      out.events.push_back(ev);
    }
  }
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const LabeledEvent& a, const LabeledEvent& b) { return a.event.t < b.event.t; });
  return out;
}

Line2D projected_line_at(const LineSegment3& seg, const MotionSpec& motion, double t) {
  const auto [A, B] = camera_segment(seg, camera_pose_at(motion, t));
  return Line2D(A.cross(B));
}

Line2D noisy_projected_line(const LineSegment3& seg, const MotionSpec& motion, const CameraModel& cam,
                            double t, double endpoint_sigma, Rng& rng) {
  const auto [A, B] = camera_segment(seg, camera_pose_at(motion, t));
  Vec2 pa = cam.normalized_to_pixel(Vec2(A.x() / A.z(), A.y() / A.z()));
  Vec2 pb = cam.normalized_to_pixel(Vec2(B.x() / B.z(), B.y() / B.z()));
  const double n0 = gaussian(rng), n1 = gaussian(rng), n2 = gaussian(rng), n3 = gaussian(rng);
  pa += endpoint_sigma * Vec2(n0, n1);
  pb += endpoint_sigma * Vec2(n2, n3);
  if ((pa - pb).norm() < 1.0) throw DegenerateError("projected segment shorter than one pixel");
  const Vec3 l_px = Vec3(pa.x(), pa.y(), 1.0).cross(Vec3(pb.x(), pb.y(), 1.0));
  return lift_line(l_px, cam);
}

ClusterGeometry ground_truth_boundary_lines(const LineSegment3& seg, const MotionSpec& motion,
                                            const CameraModel& cam, double t_s, double t_e,
                                            double endpoint_sigma, Rng& rng) {
  if (t_e < t_s) throw InvalidArgument("ground_truth_boundary_lines: t_e precedes t_s");
  ClusterGeometry g;
  g.l1 = noisy_projected_line(seg, motion, cam, t_s, endpoint_sigma, rng);
  g.l3 = noisy_projected_line(seg, motion, cam, t_e, endpoint_sigma, rng);
  g.t_s = t_s;
  g.t_e = t_e;
  return g;
}

std::vector<LabeledEvent> generate_plane_patches(int n_patches, std::size_t events_per_patch,
                                                 const CameraModel& cam, double duration,
                                                 double event_sigma, Rng& rng) {
  if (n_patches < 1 || !(duration > 0.0)) throw InvalidArgument("generate_plane_patches: bad arguments");
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_patches))));
  const int rows = (n_patches + cols - 1) / cols;
  const double tw = static_cast<double>(cam.width) / cols;
  const double th = static_cast<double>(cam.height) / rows;
  const double m = std::min(tw, th);

  std::vector<LabeledEvent> out;
  out.reserve(static_cast<std::size_t>(n_patches) * events_per_patch);
  for (int p = 0; p < n_patches; ++p) {
    const Vec2 center((p % cols + 0.5) * tw, (p / cols + 0.5) * th);
    const double ang = uniform(rng, 0.0, std::numbers::pi);
    const double vang = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const Vec2 dir(std::cos(ang), std::sin(ang));
    const Vec2 vel = (0.25 * m / duration) * Vec2(std::cos(vang), std::sin(vang));
    const double len = 0.5 * m;
    for (std::size_t k = 0; k < events_per_patch; ++k) {
      const double s = uniform(rng, -0.5, 0.5);
      const double t = uniform(rng, 0.0, duration);
      LabeledEvent ev;
      ev.label = p;
      ev.clean_px = center + vel * (t - 0.5 * duration) + s * len * dir;
      const double nx = gaussian(rng), ny = gaussian(rng);
      ev.event = {ev.clean_px.x() + event_sigma * nx, ev.clean_px.y() + event_sigma * ny, t, 1};
      out.push_back(ev);
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const LabeledEvent& a, const LabeledEvent& b) { return a.event.t < b.event.t; });
  return out;
}

}  // namespace celc::synth
