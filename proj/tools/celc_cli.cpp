// Command-line front end: synthetic sweeps, replay estimation, method
// comparison and synthetic export.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "celc/errors.hpp"
#include "celc/io.hpp"
#include "celc/pipeline.hpp"
#include "celc/sweep.hpp"
#include "celc/synth.hpp"

namespace fs = std::filesystem;
using namespace celc;

namespace {

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw InvalidArgument("cannot write " + p.string());
  return out;
}

Vec3 to_vec3(const std::vector<double>& v, const char* what) {
  if (v.size() != 3) throw InvalidArgument(std::string(what) + " needs three components");
  return {v[0], v[1], v[2]};
}

struct ScenarioArgs {
  std::vector<double> w{0.0, 0.0, 2.0};
  std::vector<double> v{1.0, 2.0, 0.0};
  double duration = 0.5;
  int lines = 5;
  std::size_t events = 5000;
  double event_noise = 2.0;
  double line_noise = 2.0;
  double omega_noise = 0.0;

  void add(CLI::App* app) {
    app->add_option("--omega", w, "Angular velocity wx wy wz, rad/s")->expected(3);
    app->add_option("--velocity", v, "Linear velocity vx vy vz, m/s")->expected(3);
    app->add_option("--duration", duration, "Time interval, s");
    app->add_option("--lines", lines, "Number of 3D lines");
    app->add_option("--events", events, "Events per scene");
    app->add_option("--event-noise", event_noise, "Event pixel noise sigma, px");
    app->add_option("--line-noise", line_noise, "Line endpoint noise sigma, px");
    app->add_option("--omega-noise", omega_noise, "Angular velocity noise sigma, rad/s");
  }

  Scenario scenario() const {
    Scenario s;
    s.motion.w = to_vec3(w, "--omega");
    s.motion.v = to_vec3(v, "--velocity");
    s.motion.duration = duration;
    s.n_lines = lines;
    s.n_events = events;
    s.noise = {event_noise, line_noise, omega_noise};
    return s;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear velocity estimation for event cameras from event-line constraints"};
  app.require_subcommand(1);

  // synth-sweep
  auto* sweep = app.add_subcommand("synth-sweep", "Run a synthetic single-variable sweep");
  SweepConfig cfg;
  ScenarioArgs sweep_sc;
  std::string variable = "event_noise";
  fs::path sweep_out = "trials.csv", sweep_summary;
  bool no_refine = false, no_ce3lc = false, timing = false, keep_noise = false;
  sweep->add_option("--variable", variable,
                    "event_noise | line_noise | omega_noise | speed | interval | n_lines")
      ->required();
  sweep->add_option("--grid", cfg.grid, "Grid values (default: the standard grid of the variable)");
  sweep->add_option("--trials", cfg.trials, "Trials per grid point");
  sweep->add_option("--seed", cfg.seed, "Sweep seed");
  sweep->add_option("--threads", cfg.threads, "Worker threads (0: all cores)");
  sweep->add_option("--sample-size", cfg.solver.sample_size, "Rows sampled by the robust solver");
  sweep->add_flag("--no-refine", no_refine, "Skip the nonlinear refinement");
  sweep->add_flag("--no-ce3lc", no_ce3lc, "Skip the line-line-line baseline");
  sweep->add_flag("--keep-noise", keep_noise, "Keep the base noise of the other sources in noise sweeps");
  sweep->add_flag("--timing", timing, "Add a wall-time column (breaks byte-identical output)");
  sweep->add_option("--out", sweep_out, "Per-trial CSV");
  sweep->add_option("--summary", sweep_summary, "Per-point summary CSV");
  sweep_sc.add(sweep);

  // estimate
  auto* est = app.add_subcommand("estimate", "Estimate velocity directions from recorded files");
  fs::path ev_path, gyro_path, calib_path, est_out;
  PipelineParams pp;
  pp.clustering.window_size = 1'000'000;
  est->add_option("--events", ev_path, "Event file 't x y p'")->required()->check(CLI::ExistingFile);
  est->add_option("--gyro", gyro_path, "Gyro file 't wx wy wz'")->required()->check(CLI::ExistingFile);
  est->add_option("--calib", calib_path, "Calibration YAML")->required()->check(CLI::ExistingFile);
  est->add_option("--window", pp.clustering.window_size, "Events per window");
  est->add_option("--time-scale", pp.clustering.time_scale, "Time normalization c, s/px (0: span/width)");
  est->add_option("--radius", pp.clustering.neighbor_radius, "Neighbor radius, px");
  est->add_option("--plane-dist", pp.clustering.plane_dist_thresh, "Plane distance threshold, px");
  est->add_option("--normal-angle", pp.clustering.normal_angle_thresh, "Normal angle threshold, rad");
  est->add_option("--min-cluster", pp.clustering.min_cluster_size, "Minimum cluster size");
  est->add_flag("--split-polarity", pp.clustering.split_by_polarity, "Cluster each polarity separately");
  est->add_option("--line-window", pp.linefit.window_len, "Boundary sub-window length, s");
  est->add_option("--min-clusters", pp.min_clusters, "Clusters needed to solve a window");
  est->add_option("--sample-size", pp.solver.sample_size, "Rows sampled by the robust solver");
  est->add_option("--seed", pp.solver.seed, "Subsampling seed");
  est->add_flag("--refine", pp.refine_enabled, "Run the nonlinear refinement");
  est->add_option("--out", est_out, "Report CSV (default: stdout)");

  // compare
  auto* cmp = app.add_subcommand("compare", "Summarize per-method errors of trial reports");
  std::vector<fs::path> cmp_in;
  fs::path cmp_out;
  cmp->add_option("--in", cmp_in, "Trial CSV(s)")->required()->check(CLI::ExistingFile);
  cmp->add_option("--out", cmp_out, "Table CSV (default: stdout)");

  // export-synth
  auto* exp = app.add_subcommand("export-synth", "Write a synthetic recording (events, gyro, calibration)");
  ScenarioArgs exp_sc;
  exp_sc.w = {0.0, 0.0, 0.3};
  exp_sc.events = 20000;
  exp_sc.event_noise = 0.0;
  fs::path exp_dir = "synth_export";
  std::uint64_t exp_seed = 1;
  double gyro_rate = 1000.0;
  exp->add_option("--out-dir", exp_dir, "Output directory");
  exp->add_option("--seed", exp_seed, "Scene seed");
  exp->add_option("--gyro-rate", gyro_rate, "Gyro samples per second");
  exp_sc.add(exp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*sweep) {
      cfg.variable = parse_sweep_variable(variable);
      cfg.base = sweep_sc.scenario();
      cfg.refine = !no_refine;
      cfg.ce3lc = !no_ce3lc;
      cfg.isolate_noise = !keep_noise;
      cfg.refine_params = RefineParams::for_camera(cfg.base.cam);
      const auto res = run_sweep(cfg);
      auto out = open_out(sweep_out);
      write_trials_csv(out, res.trials, timing);
      if (!sweep_summary.empty()) {
        auto s = open_out(sweep_summary);
        write_summary_csv(s, res.summary);
      } else {
        write_summary_csv(std::cout, res.summary);
      }
    } else if (*est) {
      pp.refine = RefineParams::for_camera(read_calibration(calib_path));
      const auto reports = estimate_from_files(ev_path, gyro_path, calib_path, pp);
      if (est_out.empty()) {
        write_window_reports_csv(std::cout, reports);
      } else {
        auto out = open_out(est_out);
        write_window_reports_csv(out, reports);
      }
    } else if (*cmp) {
      std::vector<TrialRecord> all;
      for (const auto& p : cmp_in) {
        std::ifstream in(p);
        auto t = read_trials_csv(in, p.string());
        all.insert(all.end(), t.begin(), t.end());
      }
      const auto table = compare_methods(all);
      if (cmp_out.empty()) {
        write_comparison_csv(std::cout, table);
      } else {
        auto out = open_out(cmp_out);
        write_comparison_csv(out, table);
      }
    } else if (*exp) {
      const auto rec = make_synthetic_recording(exp_sc.scenario(), exp_seed, gyro_rate);
      write_synthetic_recording(exp_dir, rec);
      const auto& events = rec.events;
      std::cerr << "wrote " << events.size() << " events to " << exp_dir << '\n';
      for (int li : rec.invisible_lines) std::cerr << "warning: line " << li << " never visible\n";
    }
  } catch (const celc::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 3;
  } catch (const celc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
