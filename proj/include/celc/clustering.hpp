#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "celc/geometry.hpp"

namespace celc {

/// A single DVS measurement.
struct Event {
  double x = 0.0;  ///< px
  double y = 0.0;  ///< px
  double t = 0.0;  ///< s
  int polarity = 1;  ///< +1 or -1
};

/// Events attributed to one 3D line, sorted by timestamp.
struct EventCluster {
  int id = -1;
  /// 0 when the cluster was grown on mixed polarities.
  int polarity = 0;
  std::vector<Event> events;
  /// Indices of the members in the window passed to cluster_events().
  std::vector<std::size_t> members;
  /// Total-least-squares plane in the scaled space-time volume: n . p + d = 0.
  Vec3 plane_normal = Vec3::UnitZ();
  double plane_offset = 0.0;
  /// RMS point-plane distance of the members, px.
  double plane_rms = 0.0;
};

struct ClusteringParams {
  /// Time normalization c in s per px-equivalent; <= 0 selects span / reference_width.
  double time_scale = 0.0;
  double reference_width = 346.0;
  std::size_t window_size = 1'000'000;
  double neighbor_radius = 5.0;
  double plane_dist_thresh = 2.0;
  double normal_angle_thresh = 0.2;
  std::size_t min_cluster_size = 200;
  bool split_by_polarity = false;
  /// The cluster plane is refit after this many additions.
  std::size_t refit_every = 50;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

/// A contiguous slice of an event stream.
struct EventWindow {
  std::span<const Event> events;
  std::size_t begin = 0;
  /// Fewer than the requested number of events were left in the stream.
  bool partial = false;

  double span() const { return events.empty() ? 0.0 : events.back().t - events.front().t; }
};

/// Next `n` events of `stream` starting at `offset`; sets `partial` when
/// fewer remain.
EventWindow make_window(std::span<const Event> stream, std::size_t offset, std::size_t n);

/// Region-growing plane segmentation of a window in [x, y, t / c] space.
/// Events that end up in no cluster are dropped as noise.
std::vector<EventCluster> cluster_events(std::span<const Event> window,
                                         const ClusteringParams& params);

/// (t_s, t_e) of a non-empty cluster.
std::pair<double, double> cluster_geometry_bounds(const EventCluster& cluster);

}  // namespace celc
