#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "celc/clustering.hpp"
#include "celc/constraint.hpp"
#include "celc/geometry.hpp"

namespace celc::synth {

using Rng = std::mt19937_64;

struct LineSegment3 {
  Vec3 a;  ///< m, world frame
  Vec3 b;
};

struct Volume {
  Vec3 lo{-2.0, -2.0, 3.0};
  Vec3 hi{2.0, 2.0, 6.0};
};

struct SceneSpec {
  std::vector<LineSegment3> lines;
  Volume volume;
};

/// Constant body-frame twist over [0, duration].
struct MotionSpec {
  AngularVelocity w{0.0, 0.0, 2.0};
  LinearVelocity v{1.0, 2.0, 0.0};
  double duration = 0.5;
};

struct NoiseSpec {
  double event_sigma = 0.0;          ///< px, per axis
  double line_endpoint_sigma = 0.0;  ///< px, per endpoint coordinate
  double omega_sigma = 0.0;          ///< rad/s, per axis
};

struct Pose {
  Rotation3 R_wc = Mat3::Identity();
  Vec3 t_wc = Vec3::Zero();

  /// World point into this camera's frame.
  Vec3 to_camera(const Vec3& p_w) const { return R_wc.transpose() * (p_w - t_wc); }
};

struct LabeledEvent {
  Event event;
  int label = -1;
  /// Pixel position before the event noise was added.
  Vec2 clean_px = Vec2::Zero();
};

struct EventStream {
  std::vector<LabeledEvent> events;  ///< sorted by time
  /// Lines that produced no event because they were never in view.
  std::vector<int> invisible_lines;
};

/// Segments with endpoints uniform in `volume`; those shorter than 0.1 m are redrawn.
SceneSpec random_scene(int n_lines, const Volume& volume, Rng& rng);

/// World-from-camera pose at time t; identity at t = 0.
Pose camera_pose_at(const MotionSpec& motion, double t);

/// Samples a random point on a random-time view of each line, round-robin over
/// the lines, resampling points that fall behind the camera or off the sensor.
EventStream generate_events(const SceneSpec& scene, const MotionSpec& motion, const CameraModel& cam,
                            std::size_t n_events, const NoiseSpec& noise, Rng& rng);

/// Exact calibrated projection of the infinite 3D line through the segment at time t.
Line2D projected_line_at(const LineSegment3& seg, const MotionSpec& motion, double t);

/// Boundary lines at t_s and t_e from the projected endpoints, each endpoint
/// perturbed by N(0, endpoint_sigma^2) px per axis.
ClusterGeometry ground_truth_boundary_lines(const LineSegment3& seg, const MotionSpec& motion,
                                            const CameraModel& cam, double t_s, double t_e,
                                            double endpoint_sigma, Rng& rng);

/// Line through the noisy projected endpoints at a single time.
Line2D noisy_projected_line(const LineSegment3& seg, const MotionSpec& motion, const CameraModel& cam,
                            double t, double endpoint_sigma, Rng& rng);

/// Planar space-time patches: each patch is an image segment translating at
/// a constant image velocity, sampled uniformly in time over [0, duration].
/// Patches occupy disjoint image tiles, so their event surfaces never touch.
std::vector<LabeledEvent> generate_plane_patches(int n_patches, std::size_t events_per_patch,
                                                 const CameraModel& cam, double duration,
                                                 double event_sigma, Rng& rng);

}  // namespace celc::synth
