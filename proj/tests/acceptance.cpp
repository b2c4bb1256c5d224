// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <CLI11.hpp>

#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "celc/clustering.hpp"
#include "celc/constraint.hpp"
#include "celc/errors.hpp"
#include "celc/metrics.hpp"
#include "celc/pipeline.hpp"
#include "celc/refine.hpp"
#include "celc/solver.hpp"
#include "celc/sweep.hpp"
#include "celc/synth.hpp"

using namespace celc;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and sizes.
constexpr double kExactPhi = 1e-6;
constexpr double kExactSigmaRatio = 1e-8;
constexpr double kExactRuntime = 1.0;  // s
constexpr int kResidualScenes = 20;
constexpr std::size_t kResidualEventsPerScene = 500;
constexpr double kResidualTol = 1e-9;
constexpr int kTensorDraws = 1000;
constexpr double kTensorTol = 1e-12;
constexpr int kRotationTrials = 100;
constexpr int kRotationRequired = 99;
constexpr double kLineDirectionTol = 1e-8;
constexpr int kTrendTrials = 300;
constexpr int kTrendInversions = 1;
constexpr double kTrendSlack = 0.10;
constexpr double kSweepBudget = 600.0;  // s
constexpr int kOrderingTrials = 200;
constexpr double kOrderingNoise = 2.0;  // px
constexpr int kGradientStates = 100;
constexpr double kGradientTol = 1e-5;
constexpr int kRefineRuns = 100;
constexpr int kOutlierTrials = 100;
constexpr double kOutlierFraction = 0.10;
constexpr double kOutlierRatio = 0.5;
constexpr int kClusterTrials = 100;
constexpr int kClusterPlanes = 5;
constexpr std::size_t kEventsPerPlane = 5000;
constexpr double kPurity = 0.99;
constexpr int kCleanWindowsRequired = 95;
constexpr double kNoisyClusterSigma = 2.0;  // px
constexpr double kNoisyCorrect = 0.90;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  if (n == 0) return std::nan("");
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

Scenario noise_free() {
  Scenario sc;
  sc.noise = {0.0, 0.0, 0.0};
  return sc;
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return Vec3(g(rng), g(rng), g(rng)).normalized();
}

Vec3 random_vec(std::mt19937_64& rng, double s) {
  std::uniform_real_distribution<double> u(-s, s);
  return {u(rng), u(rng), u(rng)};
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Outcome exact_recovery() {
  const Scenario sc = noise_free();
  const auto t0 = Clock::now();
  const auto obs = synthesize_observations(sc, 1);
  const auto est = solve_celc(obs.clusters, sc.motion.w);
  const double elapsed = seconds_since(t0);
  const double phi = velocity_error(sc.motion.v, est.v_dir).phi;
  const double ratio = est.singular_values[2] / est.singular_values[0];
  return {phi < kExactPhi && ratio < kExactSigmaRatio && elapsed < kExactRuntime,
          "phi=" + fmt("%.3g", phi) + " rad, s3/s1=" + fmt("%.3g", ratio) + ", " + fmt("%.3f", elapsed) + " s"};
}

Outcome residual_oracle() {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  std::size_t n = 0;
  for (int s = 0; s < kResidualScenes; ++s) {
    Scenario sc = noise_free();
    sc.motion.w = random_vec(rng, 2.0);
    sc.motion.v = random_unit(rng) * uniform(rng, 0.5, 3.0);
    sc.n_events = kResidualEventsPerScene * static_cast<std::size_t>(sc.n_lines);
    const auto obs = synthesize_observations(sc, rng());
    for (const auto& c : obs.clusters) {
      for (const auto& e : c.events) {
        const Mat3 B = build_celc_matrix(c.geom, sc.motion.w, e.t);
        worst = std::max(worst, std::abs(celc_residual(e.f, B, sc.motion.v)) / (B.norm() * sc.motion.v.norm()));
        ++n;
      }
    }
  }
  return {worst < kResidualTol && n >= 10000,
          std::to_string(n) + " events, max |f^T B v|/(|B||v|)=" + fmt("%.3g", worst)};
}

Eigen::Matrix4d twist_pose(const Vec3& w, const Vec3& v, double t) {
  Eigen::Matrix4d xi = Eigen::Matrix4d::Zero();
  xi.topLeftCorner<3, 3>() = skew(w) * t;
  xi.topRightCorner<3, 1>() = v * t;
  return xi.exp();
}

Outcome tensor_equivalence() {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int n = 0; n < kTensorDraws; ++n) {
    ClusterGeometry g;
    g.l1 = Line2D(random_unit(rng));
    g.l3 = Line2D(random_unit(rng));
    g.t_s = uniform(rng, -1.0, 1.0);
    g.t_e = g.t_s + uniform(rng, 0.05, 2.0);
    const Vec3 w = random_vec(rng, 3.0);
    const Vec3 v = random_vec(rng, 5.0);
    const double tk = uniform(rng, g.t_s, g.t_e);
    const Eigen::Matrix4d Tsk = twist_pose(w, v, g.t_s).inverse() * twist_pose(w, v, tk);
    const Eigen::Matrix4d Tek = twist_pose(w, v, g.t_e).inverse() * twist_pose(w, v, tk);
    const auto ref = classical_trifocal(Tsk.topLeftCorner<3, 3>(), Tsk.topRightCorner<3, 1>(),
                                       Tek.topLeftCorner<3, 3>(), Tek.topRightCorner<3, 1>());
    const auto T = continuous_trifocal(g, w, v, tk);
    for (int i = 0; i < 3; ++i) worst = std::max(worst, (T[i] - ref[i]).cwiseAbs().maxCoeff());
  }
  return {worst < kTensorTol, std::to_string(kTensorDraws) + " draws, max entry diff=" + fmt("%.3g", worst)};
}

Outcome degeneracy_detection() {
  Scenario sc;
  sc.motion.v = Vec3::Zero();
  sc.noise = {2.0, 0.0, 0.0};
  int flagged = 0;
  for (int t = 0; t < kRotationTrials; ++t) {
    const auto obs = synthesize_observations(sc, 4000 + static_cast<std::uint64_t>(t));
    try {
      const auto est = solve_celc(obs.clusters, obs.w_measured);
      flagged += est.degeneracy_kind == DegeneracyKind::pure_rotation;
    } catch (const Error&) {
    }
  }

  Scenario line = noise_free();
  line.motion.w = Vec3::Zero();
  line.n_lines = 1;
  line.n_events = 2000;
  double worst = 0.0;
  int cases = 0;
  for (std::uint64_t seed = 4200; cases < 10; ++seed) {
    const auto obs = synthesize_observations(line, seed);
    if (obs.clusters.empty()) continue;
    const Eigen::MatrixX3d A = stack_rows(obs.clusters, line.motion.w).matrix();
    const Vec3 d = obs.clusters[0].geom.l1.vec().cross(obs.clusters[0].geom.l3.vec());
    worst = std::max(worst, (A * d).norm() / (A.norm() * d.norm()));
    ++cases;
  }
  return {flagged >= kRotationRequired && worst < kLineDirectionTol,
          "v=0 flagged " + std::to_string(flagged) + "/" + std::to_string(kRotationTrials) +
              ", single line |A(l1 x l3)|/|A|=" + fmt("%.3g", worst)};
}

Outcome noise_trends() {
  const auto t0 = Clock::now();
  struct Sweep {
    SweepVariable var;
    bool increasing;
  };
  const std::vector<Sweep> sweeps{{SweepVariable::event_noise, true},
                                  {SweepVariable::line_noise, true},
                                  {SweepVariable::speed, false},
                                  {SweepVariable::interval, false},
                                  {SweepVariable::n_lines, false}};
  bool all = true;
  std::string detail;
  for (const auto& s : sweeps) {
    SweepConfig cfg;
    cfg.variable = s.var;
    cfg.trials = kTrendTrials;
    cfg.refine = false;
    cfg.ce3lc = false;
    cfg.seed = 5;
    const auto res = run_sweep(cfg);
    std::vector<double> means;
    for (const auto& p : res.summary)
      means.push_back(p.n_valid ? p.mean_phi : std::nan(""));
    const bool ok = is_monotone_trend(means, s.increasing, kTrendInversions, kTrendSlack);
    all = all && ok;
    detail += std::string(to_string(s.var)) + (ok ? " ok" : " BROKEN") + " [";
    for (std::size_t i = 0; i < means.size(); ++i) detail += (i ? " " : "") + fmt("%.3f", means[i]);
    detail += "]; ";
  }
  const double elapsed = seconds_since(t0);
  detail += fmt("%.1f s", elapsed);
  return {all && elapsed < kSweepBudget, detail};
}

Outcome method_ordering() {
  SweepConfig cfg;
  cfg.variable = SweepVariable::event_noise;
  cfg.grid = {kOrderingNoise};
  cfg.isolate_noise = false;  // 2 px on both events and line endpoints
  cfg.trials = kOrderingTrials;
  cfg.seed = 6;
  cfg.refine_params = RefineParams::for_camera(cfg.base.cam);
  const auto res = run_sweep(cfg);
  std::map<Method, double> med;
  for (const auto& p : res.summary) med[p.method] = p.median_phi;
  const double opt = med[Method::celc_opt], lin = med[Method::celc], c3 = med[Method::ce3lc];
  return {opt <= lin && lin <= c3, "median phi CELC+opt=" + fmt("%.4f", opt) + " CELC=" + fmt("%.4f", lin) +
                                       " CE3LC=" + fmt("%.4f", c3)};
}

Eigen::MatrixX2d central_difference(const TransferProblem& prob, const Vec3& v,
                                    const Eigen::Matrix<double, 3, 2>& E, double h) {
  Eigen::MatrixX2d fd(static_cast<Eigen::Index>(prob.size()), 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::Vector2d d = Eigen::Vector2d::Zero();
    d[k] = h;
    fd.col(k) = (prob.residuals(sphere_retract(v, E, d)) - prob.residuals(sphere_retract(v, E, -d))) / (2 * h);
  }
  return fd;
}

Outcome refiner_checks() {
  Scenario sc;
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int n = 0; n < kGradientStates; ++n) {
    const auto obs = synthesize_observations(sc, 7000 + static_cast<std::uint64_t>(n));
    const TransferProblem prob(obs.clusters, obs.w_measured);
    const Vec3 v = random_unit(rng);
    const auto E = tangent_basis(v);
    Eigen::VectorXd r;
    Eigen::MatrixX2d J;
    prob.evaluate(v, E, r, J);
    const double h = 1e-6;
    const Eigen::MatrixX2d fd = (4.0 * central_difference(prob, v, E, h / 2) - central_difference(prob, v, E, h)) / 3.0;
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < J.rows(); ++i) {
      if (!J.row(i).allFinite() || !fd.row(i).allFinite()) continue;
      num += (fd.row(i) - J.row(i)).squaredNorm();
      den += J.row(i).squaredNorm();
    }
    worst = std::max(worst, std::sqrt(num / den));
  }

  int decreased = 0;
  for (int n = 0; n < kRefineRuns; ++n) {
    const auto obs = synthesize_observations(sc, 7500 + static_cast<std::uint64_t>(n));
    const auto est = solve_celc(obs.clusters, obs.w_measured);
    const auto res = refine_velocity(obs.clusters, obs.w_measured, est.v_dir, RefineParams::for_camera(sc.cam));
    decreased += res.final_cost <= res.initial_cost;
  }
  return {worst < kGradientTol && decreased == kRefineRuns,
          "max relative Jacobian error=" + fmt("%.3g", worst) + ", final<=initial in " + std::to_string(decreased) +
              "/" + std::to_string(kRefineRuns)};
}

Outcome robust_estimator() {
  Scenario sc;
  sc.noise = {2.0, 0.0, 0.0};
  std::vector<double> robust, plain;
  for (int t = 0; t < kOutlierTrials; ++t) {
    const std::uint64_t seed = 8000 + static_cast<std::uint64_t>(t);
    const auto obs = synthesize_observations(sc, seed);
    auto sys = stack_rows(obs.clusters, obs.w_measured);
    std::mt19937_64 rng(seed);
    double mean_norm = 0.0;
    for (const auto& r : sys.rows) mean_norm += r.row.norm();
    mean_norm /= static_cast<double>(sys.size());
    std::vector<std::size_t> idx(sys.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_out = static_cast<std::size_t>(kOutlierFraction * static_cast<double>(sys.size()));
    for (std::size_t i = 0; i < n_out; ++i) {
      auto& row = sys.rows[idx[i]];
      row.row = mean_norm * uniform(rng, 1.0, 3.0) * random_unit(rng);
      row.noise_jacobian.setZero();
    }
    SolverParams p;
    p.seed = seed;
    robust.push_back(velocity_error(sc.motion.v, solve_nullspace_robust(sys, p).v_dir).phi);
    plain.push_back(velocity_error(sc.motion.v, solve_nullspace_svd(sys)).phi);
  }
  const double mr = median(robust), mp = median(plain);
  return {mr <= kOutlierRatio * mp, "median phi IRLS=" + fmt("%.4f", mr) + " SVD=" + fmt("%.4f", mp)};
}

/// Correctly clustered fraction and the smallest cluster purity of one window.
std::pair<double, double> score_clusters(const std::vector<EventCluster>& clusters,
                                         const std::vector<synth::LabeledEvent>& le) {
  std::size_t good = 0;
  double min_purity = 1.0;
  for (const auto& c : clusters) {
    std::map<int, std::size_t> count;
    for (auto m : c.members) ++count[le[m].label];
    std::size_t best = 0;
    for (const auto& [label, n] : count) best = std::max(best, n);
    good += best;
    min_purity = std::min(min_purity, static_cast<double>(best) / static_cast<double>(c.members.size()));
  }
  return {static_cast<double>(good) / static_cast<double>(le.size()), min_purity};
}

Outcome clustering_oracle() {
  const CameraModel cam;
  int exact = 0;
  std::vector<double> noisy_correct;
  ClusteringParams noisy;
  noisy.plane_dist_thresh = 3.0 * kNoisyClusterSigma;
  noisy.neighbor_radius = 8.0;
  noisy.normal_angle_thresh = 0.5;
  for (int t = 0; t < kClusterTrials; ++t) {
    synth::Rng rng(9000 + static_cast<std::uint64_t>(t));
    const auto clean = synth::generate_plane_patches(kClusterPlanes, kEventsPerPlane, cam, 0.5, 0.0, rng);
    std::vector<Event> ev;
    for (const auto& e : clean) ev.push_back(e.event);
    const auto cl = cluster_events(ev, ClusteringParams{});
    exact += cl.size() == static_cast<std::size_t>(kClusterPlanes) && score_clusters(cl, clean).second >= kPurity;

    const auto dirty =
        synth::generate_plane_patches(kClusterPlanes, kEventsPerPlane, cam, 0.5, kNoisyClusterSigma, rng);
    ev.clear();
    for (const auto& e : dirty) ev.push_back(e.event);
    noisy_correct.push_back(score_clusters(cluster_events(ev, noisy), dirty).first);
  }
  const double med = median(noisy_correct);
  return {exact >= kCleanWindowsRequired && med >= kNoisyCorrect,
          "noise-free exact in " + std::to_string(exact) + "/" + std::to_string(kClusterTrials) +
              ", 2 px median correctly clustered=" + fmt("%.4f", med)};
}

Outcome determinism_and_io(const fs::path& tmp) {
  SweepConfig cfg;
  cfg.variable = SweepVariable::line_noise;
  cfg.grid = {0.0, 1.0, 2.0};
  cfg.trials = 20;
  cfg.seed = 10;
  std::ostringstream a, b;
  write_trials_csv(a, run_sweep(cfg).trials);
  cfg.threads = 1;
  write_trials_csv(b, run_sweep(cfg).trials);
  const bool csv_same = a.str() == b.str();

  Scenario sc = noise_free();
  sc.motion.w = Vec3(0, 0, 0.3);
  sc.n_events = 20000;
  const auto rec = make_synthetic_recording(sc, 10);
  fs::remove_all(tmp);
  write_synthetic_recording(tmp, rec);
  PipelineParams p;
  p.clustering.window_size = 10000;
  p.refine_enabled = true;
  const auto mem = estimate_stream(rec.events, rec.gyro, rec.cam, p);
  const auto file = estimate_from_files(tmp / "events.txt", tmp / "gyro.txt", tmp / "calib.yaml", p);
  std::ostringstream ra, rb;
  write_window_reports_csv(ra, mem);
  write_window_reports_csv(rb, file);
  bool replay_same = mem.size() == file.size() && ra.str() == rb.str();
  std::size_t ok_windows = 0;
  for (std::size_t i = 0; replay_same && i < mem.size(); ++i) {
    replay_same = mem[i].estimate.v_dir == file[i].estimate.v_dir &&
                  mem[i].estimate.singular_values == file[i].estimate.singular_values;
    ok_windows += mem[i].ok;
  }
  return {csv_same && replay_same && ok_windows > 0,
          std::string("sweep CSV ") + (csv_same ? "identical" : "DIFFERS") + ", replay " +
              (replay_same ? "bit-identical" : "DIFFERS") + " over " + std::to_string(mem.size()) + " windows (" +
              std::to_string(ok_windows) + " solved)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CELC acceptance suite"};
  fs::path tmp = fs::temp_directory_path() / "celc_acceptance";
  std::vector<int> only;
  app.add_option("--tmp", tmp, "Scratch directory for the replay check");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"noise-free exact recovery", exact_recovery},
      {"CELC residual oracle", residual_oracle},
      {"continuous vs classical trifocal tensor", tensor_equivalence},
      {"degeneracy detection", degeneracy_detection},
      {"noise-trend reproduction", noise_trends},
      {"method ordering", method_ordering},
      {"refiner gradient check and monotone cost", refiner_checks},
      {"robust estimator vs plain SVD", robust_estimator},
      {"clustering oracle", clustering_oracle},
      {"determinism and I/O replay", [&] { return determinism_and_io(tmp); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failed += !out.pass;
    std::printf("[%s] %2d %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                out.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
