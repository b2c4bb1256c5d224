#include "celc/io.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "celc/errors.hpp"

namespace celc {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(std::string_view token) {
  if (token == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (token == "inf") return std::numeric_limits<double>::infinity();
  if (token == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = token.data();
  if (!token.empty() && token.front() == '+') ++first;
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || token.empty())
    throw InvalidArgument("not a number: '" + std::string(token) + "'");
  return v;
}

namespace {

/// Whitespace tokens of a line; empty for blank and '#' lines.
std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
  if (i < line.size() && line[i] == '#') return out;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename Fn>
void for_each_line(std::istream& in, const std::string& name, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = tokens(line);
    if (tok.empty()) continue;
    try {
      fn(tok);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(name, lineno, e.what());
    }
  }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  return in;
}

std::string format_coordinate(double x) {
  if (x == std::floor(x) && std::abs(x) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", x);
    return buf;
  }
  return format_double(x);
}

}  // namespace

std::vector<Event> parse_events(std::istream& in, const std::string& name) {
  std::vector<Event> events;
  for_each_line(in, name, [&](const std::vector<std::string_view>& tok) {
    if (tok.size() != 4) throw InvalidArgument("expected 't x y p', got " + std::to_string(tok.size()) + " fields");
    Event e;
    e.t = parse_double(tok[0]);
    e.x = parse_double(tok[1]);
    e.y = parse_double(tok[2]);
    if (tok[3] == "1")
      e.polarity = 1;
    else if (tok[3] == "0")
      e.polarity = -1;
    else
      throw InvalidArgument("polarity must be 0 or 1");
    if (!std::isfinite(e.t) || !std::isfinite(e.x) || !std::isfinite(e.y))
      throw InvalidArgument("non-finite event field");
    if (!events.empty() && e.t < events.back().t) throw InvalidArgument("timestamps must be non-decreasing");
    events.push_back(e);
  });
  return events;
}

std::vector<Event> read_event_file(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_events(in, path.string());
}

void write_events(std::ostream& out, std::span<const Event> events) {
  out << "# t x y p\n";
  for (const Event& e : events)
    out << format_double(e.t) << ' ' << format_coordinate(e.x) << ' ' << format_coordinate(e.y) << ' '
        << (e.polarity > 0 ? 1 : 0) << '\n';
}

GyroTrack::GyroTrack(std::vector<GyroSample> samples) : samples_(std::move(samples)) {
  for (std::size_t i = 1; i < samples_.size(); ++i)
    if (!(samples_[i].t > samples_[i - 1].t))
      throw InvalidArgument("gyro timestamps must be strictly increasing");
}

bool GyroTrack::covers(double t) const {
  return !samples_.empty() && t >= samples_.front().t && t <= samples_.back().t;
}

std::optional<Vec3> GyroTrack::at(double t) const {
  if (!covers(t)) return std::nullopt;
  auto hi = std::lower_bound(samples_.begin(), samples_.end(), t,
                             [](const GyroSample& s, double v) { return s.t < v; });
  if (hi->t == t) return hi->w;
  auto lo = hi - 1;
  const double a = (t - lo->t) / (hi->t - lo->t);
  return Vec3((1.0 - a) * lo->w + a * hi->w);
}

double GyroTrack::gap_at(double t) const {
  if (!covers(t)) return std::numeric_limits<double>::infinity();
  auto hi = std::lower_bound(samples_.begin(), samples_.end(), t,
                             [](const GyroSample& s, double v) { return s.t < v; });
  if (hi->t == t) return 0.0;
  return hi->t - (hi - 1)->t;
}

GyroTrack parse_gyro(std::istream& in, const std::string& name) {
  std::vector<GyroSample> samples;
  for_each_line(in, name, [&](const std::vector<std::string_view>& tok) {
    if (tok.size() != 4) throw InvalidArgument("expected 't wx wy wz'");
    GyroSample s;
    s.t = parse_double(tok[0]);
    s.w = Vec3(parse_double(tok[1]), parse_double(tok[2]), parse_double(tok[3]));
    if (!std::isfinite(s.t) || !s.w.allFinite()) throw InvalidArgument("non-finite gyro field");
    if (!samples.empty() && !(s.t > samples.back().t))
      throw InvalidArgument("gyro timestamps must be strictly increasing");
    samples.push_back(s);
  });
  return GyroTrack(std::move(samples));
}

GyroTrack read_gyro_file(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_gyro(in, path.string());
}

void write_gyro(std::ostream& out, const GyroTrack& gyro) {
  out << "# t wx wy wz\n";
  for (const auto& s : gyro.samples())
    out << format_double(s.t) << ' ' << format_double(s.w.x()) << ' ' << format_double(s.w.y()) << ' '
        << format_double(s.w.z()) << '\n';
}

CameraModel parse_calibration(const std::string& text, const std::string& name) {
  CameraModel cam;
  try {
    const YAML::Node root = YAML::Load(text);
    if (!root.IsMap()) throw InvalidArgument("calibration must be a mapping");
    for (const char* key : {"fx", "fy", "cx", "cy"})
      if (!root[key]) throw InvalidArgument(std::string("calibration is missing '") + key + "'");
    cam.fx = root["fx"].as<double>();
    cam.fy = root["fy"].as<double>();
    cam.cx = root["cx"].as<double>();
    cam.cy = root["cy"].as<double>();
    if (root["width"]) cam.width = root["width"].as<int>();
    if (root["height"]) cam.height = root["height"].as<int>();
    cam.dist.fill(0.0);
    if (const YAML::Node d = root["dist"]) {
      if (!d.IsSequence() || d.size() > 5) throw InvalidArgument("dist must be a list of at most 5 numbers");
      for (std::size_t i = 0; i < d.size(); ++i) cam.dist[i] = d[i].as<double>();
    }
  } catch (const YAML::Exception& e) {
    throw InvalidArgument(name + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(name + ": " + e.what());
  }
  cam.validate();
  return cam;
}

CameraModel read_calibration(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_calibration(ss.str(), path.string());
}

void write_calibration(std::ostream& out, const CameraModel& cam) {
  out << "fx: " << format_double(cam.fx) << "\nfy: " << format_double(cam.fy)
      << "\ncx: " << format_double(cam.cx) << "\ncy: " << format_double(cam.cy)
      << "\nwidth: " << cam.width << "\nheight: " << cam.height << "\ndist: [";
  for (std::size_t i = 0; i < cam.dist.size(); ++i) out << (i ? ", " : "") << format_double(cam.dist[i]);
  out << "]\n";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace celc
