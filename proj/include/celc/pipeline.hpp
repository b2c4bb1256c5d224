#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "celc/clustering.hpp"
#include "celc/io.hpp"
#include "celc/linefit.hpp"
#include "celc/refine.hpp"
#include "celc/solver.hpp"

namespace celc {

struct PipelineParams {
  ClusteringParams clustering;  ///< window_size is the events per window
  LineFitParams linefit;
  SolverParams solver;
  RefineParams refine;
  bool refine_enabled = false;
  std::size_t min_clusters = 2;
  /// Process the trailing partial window instead of skipping it.
  bool process_partial = true;
};

struct WindowReport {
  std::size_t index = 0;
  double t_begin = 0.0, t_end = 0.0, t_mid = 0.0;
  std::size_t n_events = 0;
  std::size_t n_clusters = 0;  ///< clusters that yielded boundary lines
  bool ok = false;
  /// Reason code when skipped: partial_window, gyro_out_of_range, gyro_gap,
  /// too_few_clusters, solver_error.
  std::string reason;
  Vec3 omega = Vec3::Zero();
  MotionEstimate estimate;
  std::optional<RefineResult> refined;
};

/// Undistorted pixel coordinates of every event; events whose undistortion
/// fails are dropped.
std::vector<Event> undistort_events(std::span<const Event> events, const CameraModel& cam);

/// Clusters, boundary lines and bearings of one window of undistorted events.
std::vector<ClusterObservations> observe_window(std::span<const Event> undistorted,
                                                const CameraModel& cam, const PipelineParams& params);

/// Windowed estimation over an event stream.
std::vector<WindowReport> estimate_stream(std::span<const Event> events, const GyroTrack& gyro,
                                          const CameraModel& cam, const PipelineParams& params);

/// estimate_stream on files.
std::vector<WindowReport> estimate_from_files(const std::filesystem::path& events,
                                              const std::filesystem::path& gyro,
                                              const std::filesystem::path& calibration,
                                              const PipelineParams& params);

void write_window_reports_csv(std::ostream& out, const std::vector<WindowReport>& reports);

}  // namespace celc
