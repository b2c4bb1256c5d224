#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "celc/io.hpp"
#include "celc/refine.hpp"
#include "celc/solver.hpp"
#include "celc/synth.hpp"

namespace celc {

enum class SweepVariable { event_noise, line_noise, omega_noise, speed, interval, n_lines };
enum class Method { celc, celc_opt, ce3lc };

std::string_view to_string(SweepVariable v);
std::string_view to_string(Method m);
SweepVariable parse_sweep_variable(std::string_view s);
Method parse_method(std::string_view s);

/// One synthetic experiment configuration.
struct Scenario {
  synth::MotionSpec motion;  // w = [0, 0, 2] rad/s, v = [1, 2, 0] m/s, 0.5 s
  int n_lines = 5;
  std::size_t n_events = 5000;
  synth::NoiseSpec noise{2.0, 2.0, 0.0};
  synth::Volume volume;
  CameraModel cam;
};

struct SweepConfig {
  SweepVariable variable = SweepVariable::event_noise;
  std::vector<double> grid;  ///< empty selects default_grid(variable)
  int trials = 500;
  Scenario base;
  std::uint64_t seed = 1;
  bool refine = true;
  bool ce3lc = true;
  /// In the noise sweeps, zero the noise sources that are not being swept.
  bool isolate_noise = true;
  SolverParams solver;
  RefineParams refine_params;
  unsigned threads = 0;  ///< 0: hardware concurrency
};

/// Default grids: noise 0..5 px step 0.5, omega noise 0..1 rad/s step 0.1,
/// speed 0..10 m/s step 1, interval 0.2..2.2 s step 0.2, lines 2..10.
std::vector<double> default_grid(SweepVariable v);

/// `base` with the swept variable set to `value`.
Scenario apply_sweep_value(const Scenario& base, SweepVariable v, double value, bool isolate_noise);

struct TrialRecord {
  SweepVariable variable = SweepVariable::event_noise;
  double value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  Method method = Method::celc;
  double epsilon = 0.0;
  double phi = 0.0;
  bool degenerate = false;
  std::string note;  ///< degeneracy kind or failure reason; empty when fine
  double wall_time = 0.0;  ///< s; only written with timing enabled
};

struct TrialOptions {
  bool refine = true;
  bool ce3lc = true;
  SolverParams solver;
  RefineParams refine_params;
};

/// Solver inputs of one synthetic trial: boundary lines with endpoint noise,
/// center lines at T / 2, noisy event bearings grouped by their true line,
/// and the noisy gyro reading.
struct SyntheticObservations {
  synth::SceneSpec scene;
  std::vector<ClusterObservations> clusters;  ///< lines without events are left out
  AngularVelocity w_measured = Vec3::Zero();
};

SyntheticObservations synthesize_observations(const Scenario& scenario, std::uint64_t seed);

/// A synthetic recording as a sensor would deliver it: integer pixel
/// events, a constant-rate gyro track and the calibration.
struct SyntheticRecording {
  std::vector<Event> events;
  GyroTrack gyro;
  CameraModel cam;
  synth::MotionSpec motion;
  std::vector<int> invisible_lines;
};

SyntheticRecording make_synthetic_recording(const Scenario& scenario, std::uint64_t seed,
                                            double gyro_rate = 1000.0);

/// Writes events.txt, gyro.txt, calib.yaml and ground_truth.txt into `dir`.
void write_synthetic_recording(const std::filesystem::path& dir, const SyntheticRecording& rec);

/// Runs every enabled method on one freshly generated scene.
std::vector<TrialRecord> run_trial(const Scenario& scenario, std::uint64_t seed, const TrialOptions& opts);

struct PointSummary {
  SweepVariable variable = SweepVariable::event_noise;
  double value = 0.0;
  Method method = Method::celc;
  std::size_t n_valid = 0;
  std::size_t n_degenerate = 0;
  double mean_epsilon = 0.0, std_epsilon = 0.0;
  double mean_phi = 0.0, std_phi = 0.0;
  double median_phi = 0.0;
};

struct SweepResult {
  std::vector<TrialRecord> trials;  ///< ordered by (grid point, trial, method)
  std::vector<PointSummary> summary;
};

/// Seed of trial `trial` in a sweep; shared by every grid point so that
/// neighboring grid values see the same scenes.
std::uint64_t trial_seed(std::uint64_t sweep_seed, SweepVariable v, int trial);

SweepResult run_sweep(const SweepConfig& cfg);

/// Per-(value, method) statistics; degenerate trials are counted, not averaged.
std::vector<PointSummary> summarize(const std::vector<TrialRecord>& trials);

void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& trials, bool timing = false);
std::vector<TrialRecord> read_trials_csv(std::istream& in, const std::string& name = "<trials>");
void write_summary_csv(std::ostream& out, const std::vector<PointSummary>& summary);

struct MethodSummary {
  Method method = Method::celc;
  std::size_t n = 0;
  double median_epsilon = 0.0, mean_epsilon = 0.0;
  double median_phi = 0.0, mean_phi = 0.0;
};

/// Per-method medians and means over non-degenerate trials. Throws
/// InvalidArgument on empty input or when the methods cover different
/// numbers of trials.
std::vector<MethodSummary> compare_methods(const std::vector<TrialRecord>& trials);

/// Table layout with one column per method and rows eps/phi x median/mean.
void write_comparison_csv(std::ostream& out, const std::vector<MethodSummary>& summary);

/// Counts local inversions of a trend: true when at most `max_inversions`
/// adjacent pairs go the wrong way, each by at most `rel_slack` relative.
/// NaN entries (no valid trials) are skipped.
bool is_monotone_trend(const std::vector<double>& means, bool increasing, int max_inversions = 1,
                       double rel_slack = 0.10);

}  // namespace celc
