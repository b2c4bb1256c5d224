#include "celc/clustering.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <unordered_map>

#include "celc/errors.hpp"

namespace celc {

void ClusteringParams::validate() const {
  if (!(neighbor_radius > 0.0) || !(plane_dist_thresh > 0.0) || !(normal_angle_thresh > 0.0))
    throw InvalidArgument("clustering: radius and thresholds must be positive");
  if (min_cluster_size == 0 || refit_every == 0 || !(reference_width > 0.0))
    throw InvalidArgument("clustering: sizes must be positive");
  if (window_size < min_cluster_size)
    throw InvalidArgument("clustering: window size below the minimum cluster size");
}

EventWindow make_window(std::span<const Event> stream, std::size_t offset, std::size_t n) {
  EventWindow w;
  w.begin = std::min(offset, stream.size());
  const std::size_t avail = stream.size() - w.begin;
  w.partial = avail < n;
  w.events = stream.subspan(w.begin, std::min(avail, n));
  return w;
}

std::pair<double, double> cluster_geometry_bounds(const EventCluster& cluster) {
  if (cluster.events.empty()) throw InvalidArgument("cluster_geometry_bounds: empty cluster");
  return {cluster.events.front().t, cluster.events.back().t};
}

namespace {

/// Uniform hash grid over the scaled space-time points.
class NeighborGrid {
 public:
  NeighborGrid(const std::vector<Vec3>& pts, double cell) : pts_(pts), cell_(cell) {
    cells_.reserve(pts.size() / 4 + 1);
    for (std::uint32_t i = 0; i < pts.size(); ++i) cells_[key(coord(pts[i]))].push_back(i);
  }

  template <typename Fn>
  void for_each_within(const Vec3& p, double radius, Fn&& fn) const {
    const double r2 = radius * radius;
    const Eigen::Vector3i c = coord(p);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find(key(c + Eigen::Vector3i(dx, dy, dz)));
          if (it == cells_.end()) continue;
          for (std::uint32_t j : it->second)
            if ((pts_[j] - p).squaredNorm() <= r2) fn(j);
        }
  }

 private:
  Eigen::Vector3i coord(const Vec3& p) const {
    return {static_cast<int>(std::floor(p.x() / cell_)), static_cast<int>(std::floor(p.y() / cell_)),
            static_cast<int>(std::floor(p.z() / cell_))};
  }
  static std::uint64_t key(const Eigen::Vector3i& c) {
    constexpr std::uint64_t kMask = (1u << 21) - 1;
    const auto u = [](int v) { return static_cast<std::uint64_t>(v + (1 << 20)) & kMask; };
    return (u(c.x()) << 42) | (u(c.y()) << 21) | u(c.z());
  }

  const std::vector<Vec3>& pts_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

/// Running first and second moments of a point set.
struct PlaneAccumulator {
  Vec3 sum = Vec3::Zero();
  Mat3 outer = Mat3::Zero();
  std::size_t n = 0;

  void add(const Vec3& p) {
    sum += p;
    outer += p * p.transpose();
    ++n;
  }

  /// Smallest-eigenvalue direction of the scatter; returns false if undefined.
  bool fit(Vec3& normal, double& offset) const {
    if (n < 3) return false;
    const Vec3 mean = sum / static_cast<double>(n);
    const Mat3 cov = outer / static_cast<double>(n) - mean * mean.transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    normal = es.eigenvectors().col(0);
    offset = -normal.dot(mean);
    return true;
  }
};

std::vector<EventCluster> grow_regions(std::span<const Event> window,
                                       const std::vector<std::size_t>& subset,
                                       const ClusteringParams& params, double t0, double c) {
  // Canonical order: by time, then position, then input index.
  std::vector<std::size_t> order = subset;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Event& ea = window[a];
    const Event& eb = window[b];
    if (ea.t != eb.t) return ea.t < eb.t;
    if (ea.x != eb.x) return ea.x < eb.x;
    if (ea.y != eb.y) return ea.y < eb.y;
    return a < b;
  });
  const std::size_t n = order.size();
  std::vector<Vec3> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Event& e = window[order[i]];
    pts[i] = Vec3(e.x, e.y, (e.t - t0) / c);
  }
  const double radius = params.neighbor_radius;
  NeighborGrid grid(pts, radius);

  // Local normals from the neighborhood scatter.
  std::vector<Vec3> normals(n, Vec3::Zero());
  std::vector<char> has_normal(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    PlaneAccumulator acc;
    grid.for_each_within(pts[i], radius, [&](std::uint32_t j) { acc.add(pts[j]); });
    double d = 0.0;
    if (acc.n >= 5 && acc.fit(normals[i], d)) has_normal[i] = 1;
  }

  const double cos_thresh = std::cos(params.normal_angle_thresh);
  std::vector<int> label(n, -1);
  std::vector<char> tried(n, 0);
  std::vector<EventCluster> clusters;

  for (std::size_t seed = 0; seed < n; ++seed) {
    if (label[seed] != -1 || tried[seed] || !has_normal[seed]) continue;
    const int id = static_cast<int>(clusters.size());
    Vec3 normal = normals[seed];
    double offset = -normal.dot(pts[seed]);
    PlaneAccumulator acc;
    std::vector<std::uint32_t> members;
    std::deque<std::uint32_t> queue;

    auto admit = [&](std::uint32_t j) {
      label[j] = id;
      members.push_back(j);
      acc.add(pts[j]);
      queue.push_back(j);
      if (acc.n % params.refit_every == 0) acc.fit(normal, offset);
    };
    admit(static_cast<std::uint32_t>(seed));
    while (!queue.empty()) {
      const std::uint32_t q = queue.front();
      queue.pop_front();
      grid.for_each_within(pts[q], radius, [&](std::uint32_t j) {
        if (label[j] != -1 || !has_normal[j]) return;
        if (std::abs(normal.dot(pts[j]) + offset) > params.plane_dist_thresh) return;
        if (std::abs(normal.dot(normals[j])) < cos_thresh) return;
        admit(j);
      });
    }

    auto release = [&](std::uint32_t j) {
      label[j] = -1;
      tried[j] = 1;
    };
    if (members.size() < params.min_cluster_size) {
      for (auto j : members) release(j);
      continue;
    }

    // Trim against the final plane so the RMS bound holds for what is kept.
    acc.fit(normal, offset);
    std::vector<std::uint32_t> kept;
    kept.reserve(members.size());
    PlaneAccumulator final_acc;
    for (auto j : members) {
      if (std::abs(normal.dot(pts[j]) + offset) <= params.plane_dist_thresh) {
        kept.push_back(j);
        final_acc.add(pts[j]);
      } else {
        label[j] = -1;
      }
    }
    if (kept.size() < params.min_cluster_size || !final_acc.fit(normal, offset)) {
      for (auto j : kept) release(j);
      continue;
    }

    std::sort(kept.begin(), kept.end());
    EventCluster cl;
    cl.id = id;
    cl.plane_normal = normal;
    cl.plane_offset = offset;
    double ss = 0.0;
    cl.events.reserve(kept.size());
    cl.members.reserve(kept.size());
    for (auto j : kept) {
      cl.events.push_back(window[order[j]]);
      cl.members.push_back(order[j]);
      const double dist = normal.dot(pts[j]) + offset;
      ss += dist * dist;
    }
    cl.plane_rms = std::sqrt(ss / static_cast<double>(kept.size()));
    clusters.push_back(std::move(cl));
  }
  return clusters;
}

}  // namespace

std::vector<EventCluster> cluster_events(std::span<const Event> window,
                                         const ClusteringParams& params) {
  params.validate();
  if (window.empty()) return {};

  double t0 = window.front().t, t1 = window.front().t;
  for (const Event& e : window) {
    t0 = std::min(t0, e.t);
    t1 = std::max(t1, e.t);
  }
  double c = params.time_scale;
  if (!(c > 0.0)) c = (t1 > t0) ? (t1 - t0) / params.reference_width : 1.0;

  std::vector<EventCluster> out;
  auto run = [&](const std::vector<std::size_t>& subset, int polarity) {
    auto part = grow_regions(window, subset, params, t0, c);
    for (auto& cl : part) {
      cl.id = static_cast<int>(out.size());
      cl.polarity = polarity;
      out.push_back(std::move(cl));
    }
  };

  if (params.split_by_polarity) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < window.size(); ++i)
      (window[i].polarity >= 0 ? pos : neg).push_back(i);
    run(pos, +1);
    run(neg, -1);
  } else {
    std::vector<std::size_t> all(window.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    run(all, 0);
  }
  return out;
}

}  // namespace celc
