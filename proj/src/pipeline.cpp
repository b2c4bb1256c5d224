#include "celc/pipeline.hpp"

#include <limits>
#include <ostream>

#include "celc/errors.hpp"

namespace celc {

std::vector<Event> undistort_events(std::span<const Event> events, const CameraModel& cam) {
  std::vector<Event> out;
  out.reserve(events.size());
  for (const Event& e : events) {
    try {
      const Vec2 xn = pixel_to_normalized(Vec2(e.x, e.y), cam);
      const Vec2 px = cam.normalized_to_pixel(xn);
      out.push_back({px.x(), px.y(), e.t, e.polarity});
    } catch (const DegenerateError&) {
    }
  }
  return out;
}

std::vector<ClusterObservations> observe_window(std::span<const Event> undistorted,
                                                const CameraModel& cam, const PipelineParams& params) {
  std::vector<ClusterObservations> out;
  for (const EventCluster& cl : cluster_events(undistorted, params.clustering)) {
    BoundaryLines lines;
    try {
      lines = extract_boundary_lines(cl, params.linefit, cam);
    } catch (const DegenerateError&) {
      continue;
    }
    ClusterObservations obs;
    obs.geom = lines.geometry();
    for (const Event& e : cl.events) {
      if (e.t < obs.geom.t_s || e.t > obs.geom.t_e) continue;
      const Vec2 xn((e.x - cam.cx) / cam.fx, (e.y - cam.cy) / cam.fy);
      obs.events.push_back({e.t, Bearing(Vec3(xn.x(), xn.y(), 1.0))});
    }
    try {
      const FittedLine center = extract_center_line(cl, params.linefit, cam);
      obs.center_line = center.line;
      obs.center_time = center.anchor_time;
    } catch (const DegenerateError&) {
    }
    if (!obs.events.empty()) out.push_back(std::move(obs));
  }
  return out;
}

std::vector<WindowReport> estimate_stream(std::span<const Event> events, const GyroTrack& gyro,
                                          const CameraModel& cam, const PipelineParams& params) {
  cam.validate();
  params.clustering.validate();
  std::vector<WindowReport> reports;
  const std::size_t n = params.clustering.window_size;
  for (std::size_t offset = 0, index = 0; offset < events.size(); offset += n, ++index) {
    const EventWindow win = make_window(events, offset, n);
    WindowReport rep;
    rep.index = index;
    rep.n_events = win.events.size();
    rep.t_begin = win.events.front().t;
    rep.t_end = win.events.back().t;
    rep.t_mid = 0.5 * (rep.t_begin + rep.t_end);
    auto skip = [&](std::string reason) {
      rep.reason = std::move(reason);
      reports.push_back(rep);
    };
    if (win.partial && !params.process_partial) {
      skip("partial_window");
      continue;
    }
    const auto w = gyro.at(rep.t_mid);
    if (!w) {
      skip("gyro_out_of_range");
      continue;
    }
    if (gyro.gap_at(rep.t_mid) > win.span()) {
      skip("gyro_gap");
      continue;
    }
    rep.omega = *w;

    const auto undistorted = undistort_events(win.events, cam);
    const auto clusters = observe_window(undistorted, cam, params);
    rep.n_clusters = clusters.size();
    if (clusters.size() < params.min_clusters) {
      skip("too_few_clusters");
      continue;
    }
    try {
      rep.estimate = solve_celc(clusters, rep.omega, params.solver);
      if (params.refine_enabled && !rep.estimate.degenerate)
        rep.refined = refine_velocity(clusters, rep.omega, rep.estimate.v_dir, params.refine);
    } catch (const Error&) {
      skip("solver_error");
      continue;
    }
    rep.ok = true;
    reports.push_back(rep);
  }
  return reports;
}

std::vector<WindowReport> estimate_from_files(const std::filesystem::path& events,
                                              const std::filesystem::path& gyro,
                                              const std::filesystem::path& calibration,
                                              const PipelineParams& params) {
  const CameraModel cam = read_calibration(calibration);
  const auto ev = read_event_file(events);
  const GyroTrack gy = read_gyro_file(gyro);
  return estimate_stream(ev, gy, cam, params);
}

void write_window_reports_csv(std::ostream& out, const std::vector<WindowReport>& reports) {
  out << "window,t_begin,t_end,t_mid,n_events,n_clusters,status,reason,wx,wy,wz,vx,vy,vz,"
         "sigma1,sigma2,sigma3,degenerate,degeneracy_kind,ill_conditioned,inlier_fraction,"
         "vx_opt,vy_opt,vz_opt,opt_initial_cost,opt_final_cost,opt_iterations\n";
  const std::string nan = "nan";
  for (const auto& r : reports) {
    out << r.index << ',' << format_double(r.t_begin) << ',' << format_double(r.t_end) << ','
        << format_double(r.t_mid) << ',' << r.n_events << ',' << r.n_clusters << ','
        << (r.ok ? "ok" : "skipped") << ',' << r.reason << ',' << format_double(r.omega.x()) << ','
        << format_double(r.omega.y()) << ',' << format_double(r.omega.z());
    if (r.ok) {
      const auto& e = r.estimate;
      out << ',' << format_double(e.v_dir.x()) << ',' << format_double(e.v_dir.y()) << ','
          << format_double(e.v_dir.z()) << ',' << format_double(e.singular_values[0]) << ','
          << format_double(e.singular_values[1]) << ',' << format_double(e.singular_values[2]) << ','
          << (e.degenerate ? 1 : 0) << ',' << to_string(e.degeneracy_kind) << ','
          << (e.ill_conditioned ? 1 : 0) << ',' << format_double(e.inlier_fraction);
    } else {
      for (int i = 0; i < 6; ++i) out << ',' << nan;
      out << ",0,none,0," << nan;
    }
    if (r.refined) {
      const auto& f = *r.refined;
      out << ',' << format_double(f.v_refined.x()) << ',' << format_double(f.v_refined.y()) << ','
          << format_double(f.v_refined.z()) << ',' << format_double(f.initial_cost) << ','
          << format_double(f.final_cost) << ',' << f.iterations;
    } else {
      out << ",nan,nan,nan,nan,nan,0";
    }
    out << '\n';
  }
}

}  // namespace celc
