#include "celc/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <thread>

#include "celc/errors.hpp"
#include "celc/io.hpp"
#include "celc/metrics.hpp"

namespace celc {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double median(std::vector<double> x) {
  if (x.empty()) return kNaN;
  std::sort(x.begin(), x.end());
  const std::size_t m = x.size() / 2;
  return x.size() % 2 ? x[m] : 0.5 * (x[m - 1] + x[m]);
}

std::pair<double, double> mean_std(const std::vector<double>& x) {
  if (x.empty()) return {kNaN, kNaN};
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  const double sd = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
  return {m, sd};
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

std::string_view to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::event_noise: return "event_noise";
    case SweepVariable::line_noise: return "line_noise";
    case SweepVariable::omega_noise: return "omega_noise";
    case SweepVariable::speed: return "speed";
    case SweepVariable::interval: return "interval";
    case SweepVariable::n_lines: return "n_lines";
  }
  return "event_noise";
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::celc: return "CELC";
    case Method::celc_opt: return "CELC+opt";
    case Method::ce3lc: return "CE3LC";
  }
  return "CELC";
}

SweepVariable parse_sweep_variable(std::string_view s) {
  for (auto v : {SweepVariable::event_noise, SweepVariable::line_noise, SweepVariable::omega_noise,
                 SweepVariable::speed, SweepVariable::interval, SweepVariable::n_lines})
    if (to_string(v) == s) return v;
  throw InvalidArgument("unknown sweep variable '" + std::string(s) + "'");
}

Method parse_method(std::string_view s) {
  for (auto m : {Method::celc, Method::celc_opt, Method::ce3lc})
    if (to_string(m) == s) return m;
  throw InvalidArgument("unknown method '" + std::string(s) + "'");
}

std::vector<double> default_grid(SweepVariable v) {
  std::vector<double> g;
  auto range = [&](double lo, double step, int n) {
    for (int i = 0; i < n; ++i) g.push_back(lo + step * i);
  };
  switch (v) {
    case SweepVariable::event_noise:
    case SweepVariable::line_noise: range(0.0, 0.5, 11); break;
    case SweepVariable::omega_noise: range(0.0, 0.1, 11); break;
    case SweepVariable::speed: range(0.0, 1.0, 11); break;
    case SweepVariable::interval: range(0.2, 0.2, 11); break;
    case SweepVariable::n_lines: range(2.0, 1.0, 9); break;
  }
  return g;
}

Scenario apply_sweep_value(const Scenario& base, SweepVariable v, double value, bool isolate_noise) {
  Scenario s = base;
  const bool noise_sweep = v == SweepVariable::event_noise || v == SweepVariable::line_noise ||
                           v == SweepVariable::omega_noise;
  if (noise_sweep && isolate_noise) s.noise = {};
  switch (v) {
    case SweepVariable::event_noise: s.noise.event_sigma = value; break;
    case SweepVariable::line_noise: s.noise.line_endpoint_sigma = value; break;
    case SweepVariable::omega_noise: s.noise.omega_sigma = value; break;
    case SweepVariable::speed: {
      const Vec3 dir = base.motion.v.norm() > 0.0 ? Vec3(base.motion.v.normalized()) : Vec3(0.447, 0.894, 0.0);
      s.motion.v = value * dir;
      break;
    }
    case SweepVariable::interval: s.motion.duration = value; break;
    case SweepVariable::n_lines: s.n_lines = static_cast<int>(std::lround(value)); break;
  }
  return s;
}

std::uint64_t trial_seed(std::uint64_t sweep_seed, SweepVariable v, int trial) {
  return splitmix64(splitmix64(sweep_seed) ^ splitmix64(static_cast<std::uint64_t>(v) * 1000003ull +
                                                        static_cast<std::uint64_t>(trial)));
}

SyntheticObservations synthesize_observations(const Scenario& sc, std::uint64_t seed) {
  SyntheticObservations out;
  synth::Rng rng(seed);
  out.scene = synth::random_scene(sc.n_lines, sc.volume, rng);
  const auto stream = synth::generate_events(out.scene, sc.motion, sc.cam, sc.n_events, sc.noise, rng);
  const double T = sc.motion.duration;
  std::vector<ClusterObservations> per_line(out.scene.lines.size());
  std::vector<char> usable(out.scene.lines.size(), 1);
  for (std::size_t j = 0; j < out.scene.lines.size(); ++j) {
    // Always draw both lines so the random sequence does not depend on failures.
    try {
      per_line[j].geom = synth::ground_truth_boundary_lines(out.scene.lines[j], sc.motion, sc.cam, 0.0, T,
                                                            sc.noise.line_endpoint_sigma, rng);
    } catch (const DegenerateError&) {
      usable[j] = 0;
    }
    try {
      per_line[j].center_line = synth::noisy_projected_line(out.scene.lines[j], sc.motion, sc.cam, 0.5 * T,
                                                            sc.noise.line_endpoint_sigma, rng);
      per_line[j].center_time = 0.5 * T;
    } catch (const DegenerateError&) {
      usable[j] = 0;
    }
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double g0 = gauss(rng), g1 = gauss(rng), g2 = gauss(rng);
  out.w_measured = sc.motion.w + sc.noise.omega_sigma * Vec3(g0, g1, g2);

  for (const auto& le : stream.events)
    per_line[static_cast<std::size_t>(le.label)].events.push_back(
        {le.event.t, lift_pixel(Vec2(le.event.x, le.event.y), sc.cam)});
  for (std::size_t j = 0; j < per_line.size(); ++j)
    if (usable[j] && !per_line[j].events.empty()) out.clusters.push_back(std::move(per_line[j]));
  return out;
}

SyntheticRecording make_synthetic_recording(const Scenario& sc, std::uint64_t seed, double gyro_rate) {
  if (!(gyro_rate > 0.0)) throw InvalidArgument("make_synthetic_recording: gyro rate must be positive");
  SyntheticRecording rec;
  rec.cam = sc.cam;
  rec.motion = sc.motion;
  synth::Rng rng(seed);
  const auto scene = synth::random_scene(sc.n_lines, sc.volume, rng);
  const auto stream = synth::generate_events(scene, sc.motion, sc.cam, sc.n_events, sc.noise, rng);
  rec.invisible_lines = stream.invisible_lines;
  rec.events.reserve(stream.events.size());
  for (const auto& le : stream.events) {
    Event e = le.event;
    e.x = std::round(e.x);
    e.y = std::round(e.y);
    rec.events.push_back(e);
  }
  std::vector<GyroSample> gyro;
  const int n_gyro = static_cast<int>(std::ceil(sc.motion.duration * gyro_rate)) + 1;
  for (int i = 0; i < n_gyro; ++i) gyro.push_back({i / gyro_rate, sc.motion.w});
  rec.gyro = GyroTrack(std::move(gyro));
  return rec;
}

void write_synthetic_recording(const std::filesystem::path& dir, const SyntheticRecording& rec) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw InvalidArgument("cannot write " + (dir / name).string());
    return out;
  };
  auto ev = open("events.txt");
  write_events(ev, rec.events);
  auto gy = open("gyro.txt");
  write_gyro(gy, rec.gyro);
  auto cal = open("calib.yaml");
  write_calibration(cal, rec.cam);
  auto gt = open("ground_truth.txt");
  const auto& m = rec.motion;
  gt << "# wx wy wz vx vy vz duration\n";
  for (int i = 0; i < 3; ++i) gt << format_double(m.w[i]) << ' ';
  for (int i = 0; i < 3; ++i) gt << format_double(m.v[i]) << ' ';
  gt << format_double(m.duration) << '\n';
}

std::vector<TrialRecord> run_trial(const Scenario& sc, std::uint64_t seed, const TrialOptions& opts) {
  using Clock = std::chrono::steady_clock;
  std::vector<Method> methods{Method::celc};
  if (opts.refine) methods.push_back(Method::celc_opt);
  if (opts.ce3lc) methods.push_back(Method::ce3lc);

  std::vector<TrialRecord> recs(methods.size());
  for (std::size_t i = 0; i < methods.size(); ++i) {
    recs[i].seed = seed;
    recs[i].method = methods[i];
    recs[i].epsilon = recs[i].phi = kNaN;
  }
  auto fail_all = [&](const std::string& why) {
    for (auto& r : recs) {
      r.degenerate = true;
      r.note = sanitize(why);
    }
    return recs;
  };

  const auto t0 = Clock::now();
  std::vector<ClusterObservations> clusters;
  AngularVelocity w_meas;
  try {
    auto obs = synthesize_observations(sc, seed);
    clusters = std::move(obs.clusters);
    w_meas = obs.w_measured;
    if (clusters.empty()) return fail_all("failed: no visible lines");
  } catch (const Error& e) {
    return fail_all(std::string("failed: ") + e.what());
  }
  const double setup_time = std::chrono::duration<double>(Clock::now() - t0).count();

  SolverParams sp = opts.solver;
  sp.seed = splitmix64(seed ^ 0x5EEDull);
  const bool gt_defined = sc.motion.v.norm() > 0.0;

  auto score = [&](TrialRecord& r, const Vec3& v_est) {
    if (!gt_defined) {
      r.degenerate = true;
      r.note = r.note.empty() ? "zero_velocity" : r.note + ";zero_velocity";
      return;
    }
    const auto err = velocity_error(sc.motion.v, v_est);
    r.epsilon = err.epsilon;
    r.phi = err.phi;
  };

  MotionEstimate celc_est;
  bool celc_ok = false;
  for (auto& r : recs) {
    const auto ts = Clock::now();
    try {
      switch (r.method) {
        case Method::celc: {
          celc_est = solve_celc(clusters, w_meas, sp);
          celc_ok = true;
          if (celc_est.degenerate) {
            r.degenerate = true;
            r.note = std::string(to_string(celc_est.degeneracy_kind));
          }
          score(r, celc_est.v_dir);
          break;
        }
        case Method::celc_opt: {
          if (!celc_ok || celc_est.degenerate) {
            r.degenerate = true;
            r.note = "linear solve degenerate";
            break;
          }
          const auto ref = refine_velocity(clusters, w_meas, celc_est.v_dir, opts.refine_params);
          score(r, ref.v_refined);
          break;
        }
        case Method::ce3lc: {
          const auto est = solve_ce3lc(clusters, w_meas, sp);
          if (est.degenerate) {
            r.degenerate = true;
            r.note = std::string(to_string(est.degeneracy_kind));
          }
          score(r, est.v_dir);
          break;
        }
      }
    } catch (const Error& e) {
      r.degenerate = true;
      r.note = sanitize(std::string("failed: ") + e.what());
    }
    r.wall_time = std::chrono::duration<double>(Clock::now() - ts).count() + setup_time;
  }
  return recs;
}

SweepResult run_sweep(const SweepConfig& cfg) {
  if (cfg.trials <= 0) throw InvalidArgument("sweep: trials must be positive");
  const std::vector<double> grid = cfg.grid.empty() ? default_grid(cfg.variable) : cfg.grid;
  TrialOptions opts{cfg.refine, cfg.ce3lc, cfg.solver, cfg.refine_params};

  const std::size_t n_tasks = grid.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<TrialRecord>> results(n_tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t task = next++; task < n_tasks; task = next++) {
      const std::size_t gi = task / static_cast<std::size_t>(cfg.trials);
      const int trial = static_cast<int>(task % static_cast<std::size_t>(cfg.trials));
      const Scenario sc = apply_sweep_value(cfg.base, cfg.variable, grid[gi], cfg.isolate_noise);
      const std::uint64_t seed = trial_seed(cfg.seed, cfg.variable, trial);
      auto recs = run_trial(sc, seed, opts);
      for (auto& r : recs) {
        r.variable = cfg.variable;
        r.value = grid[gi];
        r.trial = trial;
      }
      results[task] = std::move(recs);
    }
  };
  unsigned n_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, n_tasks));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }

  SweepResult out;
  for (auto& r : results) out.trials.insert(out.trials.end(), r.begin(), r.end());
  out.summary = summarize(out.trials);
  return out;
}

std::vector<PointSummary> summarize(const std::vector<TrialRecord>& trials) {
  std::vector<PointSummary> out;
  std::map<std::pair<double, int>, std::size_t> index;
  std::vector<std::vector<double>> eps, phi;
  for (const auto& t : trials) {
    const auto key = std::make_pair(t.value, static_cast<int>(t.method));
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      PointSummary p;
      p.variable = t.variable;
      p.value = t.value;
      p.method = t.method;
      out.push_back(p);
      eps.emplace_back();
      phi.emplace_back();
    }
    PointSummary& p = out[it->second];
    if (t.degenerate || !std::isfinite(t.phi)) {
      ++p.n_degenerate;
      continue;
    }
    ++p.n_valid;
    eps[it->second].push_back(t.epsilon);
    phi[it->second].push_back(t.phi);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::tie(out[i].mean_epsilon, out[i].std_epsilon) = mean_std(eps[i]);
    std::tie(out[i].mean_phi, out[i].std_phi) = mean_std(phi[i]);
    out[i].median_phi = median(phi[i]);
  }
  return out;
}

void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& trials, bool timing) {
  out << "variable,value,trial,seed,method,epsilon,phi,degenerate,note";
  if (timing) out << ",wall_time_s";
  out << '\n';
  for (const auto& t : trials) {
    out << to_string(t.variable) << ',' << format_double(t.value) << ',' << t.trial << ',' << t.seed << ','
        << to_string(t.method) << ',' << format_double(t.epsilon) << ',' << format_double(t.phi) << ','
        << (t.degenerate ? 1 : 0) << ',' << sanitize(t.note);
    if (timing) out << ',' << format_double(t.wall_time);
    out << '\n';
  }
}

std::vector<TrialRecord> read_trials_csv(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(name, 1, "empty report");
  const auto header = split_csv(line);
  if (header.size() < 9 || header[0] != "variable" || header[8] != "note")
    throw ParseError(name, 1, "not a trial report header");
  const bool timing = header.size() >= 10;
  std::vector<TrialRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw ParseError(name, lineno, "wrong number of columns");
    try {
      TrialRecord t;
      t.variable = parse_sweep_variable(f[0]);
      t.value = parse_double(f[1]);
      t.trial = std::stoi(f[2]);
      t.seed = std::stoull(f[3]);
      t.method = parse_method(f[4]);
      t.epsilon = parse_double(f[5]);
      t.phi = parse_double(f[6]);
      t.degenerate = f[7] == "1";
      t.note = f[8];
      if (timing) t.wall_time = parse_double(f[9]);
      out.push_back(std::move(t));
    } catch (const std::exception& e) {
      throw ParseError(name, lineno, e.what());
    }
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<PointSummary>& summary) {
  out << "variable,value,method,n_valid,n_degenerate,mean_epsilon,std_epsilon,mean_phi,std_phi,median_phi\n";
  for (const auto& p : summary)
    out << to_string(p.variable) << ',' << format_double(p.value) << ',' << to_string(p.method) << ','
        << p.n_valid << ',' << p.n_degenerate << ',' << format_double(p.mean_epsilon) << ','
        << format_double(p.std_epsilon) << ',' << format_double(p.mean_phi) << ','
        << format_double(p.std_phi) << ',' << format_double(p.median_phi) << '\n';
}

std::vector<MethodSummary> compare_methods(const std::vector<TrialRecord>& trials) {
  if (trials.empty()) throw InvalidArgument("compare: no trials");
  std::map<int, std::size_t> totals;
  std::map<int, std::vector<double>> eps, phi;
  for (const auto& t : trials) {
    const int m = static_cast<int>(t.method);
    ++totals[m];
    if (t.degenerate || !std::isfinite(t.phi)) continue;
    eps[m].push_back(t.epsilon);
    phi[m].push_back(t.phi);
  }
  for (const auto& [m, n] : totals)
    if (n != totals.begin()->second)
      throw InvalidArgument("compare: methods cover different numbers of trials");
  std::vector<MethodSummary> out;
  for (const auto& [m, n] : totals) {
    MethodSummary s;
    s.method = static_cast<Method>(m);
    s.n = eps[m].size();
    s.median_epsilon = median(eps[m]);
    s.mean_epsilon = mean_std(eps[m]).first;
    s.median_phi = median(phi[m]);
    s.mean_phi = mean_std(phi[m]).first;
    out.push_back(s);
  }
  return out;
}

void write_comparison_csv(std::ostream& out, const std::vector<MethodSummary>& summary) {
  out << "metric";
  for (const auto& s : summary) out << ',' << to_string(s.method);
  out << '\n';
  auto row = [&](const char* name, auto get) {
    out << name;
    for (const auto& s : summary) out << ',' << format_double(get(s));
    out << '\n';
  };
  row("epsilon_median", [](const MethodSummary& s) { return s.median_epsilon; });
  row("epsilon_mean", [](const MethodSummary& s) { return s.mean_epsilon; });
  row("phi_median", [](const MethodSummary& s) { return s.median_phi; });
  row("phi_mean", [](const MethodSummary& s) { return s.mean_phi; });
  out << "n";
  for (const auto& s : summary) out << ',' << s.n;
  out << '\n';
}

bool is_monotone_trend(const std::vector<double>& means, bool increasing, int max_inversions,
                       double rel_slack) {
  std::vector<double> m;
  for (double x : means)
    if (std::isfinite(x)) m.push_back(x);
  int inversions = 0;
  for (std::size_t i = 1; i < m.size(); ++i) {
    const double step = m[i] - m[i - 1];
    const bool wrong = increasing ? step < 0.0 : step > 0.0;
    if (!wrong) continue;
    ++inversions;
    const double ref = std::max(std::abs(m[i - 1]), std::abs(m[i]));
    if (!(ref > 0.0) || std::abs(step) / ref > rel_slack) return false;
  }
  return inversions <= max_inversions;
}

}  // namespace celc
