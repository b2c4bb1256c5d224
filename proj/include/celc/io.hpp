#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "celc/clustering.hpp"
#include "celc/geometry.hpp"

namespace celc {

/// Shortest text that parses back to the same double ("nan" for NaN).
std::string format_double(double x);
/// Parses a full token as a double; throws InvalidArgument otherwise.
double parse_double(std::string_view token);

// Event files: one "t x y p" per line, p in {0, 1}, '#' starts a comment line.
std::vector<Event> parse_events(std::istream& in, const std::string& name = "<events>");
std::vector<Event> read_event_file(const std::filesystem::path& path);
void write_events(std::ostream& out, std::span<const Event> events);

struct GyroSample {
  double t = 0.0;
  Vec3 w = Vec3::Zero();
};

/// Piecewise-linear angular velocity over strictly increasing timestamps.
class GyroTrack {
 public:
  GyroTrack() = default;
  explicit GyroTrack(std::vector<GyroSample> samples);

  const std::vector<GyroSample>& samples() const { return samples_; }
  bool covers(double t) const;
  /// Interpolated rate; nullopt outside the sampled range.
  std::optional<Vec3> at(double t) const;
  /// Spacing of the two samples bracketing t (0 on an exact sample), or +inf
  /// outside the range.
  double gap_at(double t) const;

 private:
  std::vector<GyroSample> samples_;
};

// Gyro files: "t wx wy wz" per line (rad/s), '#' comments.
GyroTrack parse_gyro(std::istream& in, const std::string& name = "<gyro>");
GyroTrack read_gyro_file(const std::filesystem::path& path);
void write_gyro(std::ostream& out, const GyroTrack& gyro);

// Calibration: YAML mapping with fx, fy, cx, cy, width, height and an optional
// dist list [k1, k2, p1, p2, k3] (shorter lists are zero-padded).
CameraModel parse_calibration(const std::string& text, const std::string& name = "<calibration>");
CameraModel read_calibration(const std::filesystem::path& path);
void write_calibration(std::ostream& out, const CameraModel& cam);

/// Splits a CSV line on commas (no quoting; the reports never need it).
std::vector<std::string> split_csv(const std::string& line);

}  // namespace celc
