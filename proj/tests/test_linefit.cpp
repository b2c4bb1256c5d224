#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "celc/errors.hpp"
#include "celc/linefit.hpp"
#include "celc/synth.hpp"
#include "support.hpp"

using namespace celc;

namespace {

/// Plain total least squares through the centroid, as an independent oracle.
Vec3 tls_line(const std::vector<Vec2>& pts) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix2d C = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) C += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(C);
  const Vec2 n = es.eigenvectors().col(0);
  return {n.x(), n.y(), -n.dot(mean)};
}

double rms_distance(const Vec3& line, const std::vector<Vec2>& pts) {
  double s = 0.0;
  for (const auto& p : pts) {
    const double d = line.x() * p.x() + line.y() * p.y() + line.z();
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pts.size()));
}

/// Same line up to sign, for lines normalized so that (a, b) is unit.
bool same_line(const Vec3& a, const Vec3& b, double tol) {
  return (a - b).norm() < tol || (a + b).norm() < tol;
}

EventCluster cluster_of(const std::vector<synth::LabeledEvent>& events, int label) {
  EventCluster c;
  for (const auto& e : events)
    if (e.label == label) c.events.push_back(e.event);
  return c;
}

}  // namespace

TEST_SUITE("linefit") {

TEST_CASE("Huber weight and loss") {
  CHECK(huber_weight(0.5, 1.345) == 1.0);
  CHECK(huber_weight(-2.69, 1.345) == doctest::Approx(0.5));
  CHECK(huber_loss(1.0, 1.345) == doctest::Approx(0.5));
  CHECK(huber_loss(-3.0, 1.0) == doctest::Approx(2.5));
}

TEST_CASE("exact points on y = 2x + 1") {
  std::vector<Vec2> pts;
  for (int i = 0; i < 20; ++i) pts.emplace_back(i, 2.0 * i + 1.0);
  const auto fit = fit_line_huber(pts, LineFitParams{});
  CHECK(same_line(fit.line, Vec3(2, -1, 1) / std::sqrt(5.0), 1e-12));
  CHECK(fit.inlier_rms < 1e-12);
}

TEST_CASE("vertical line x = 7") {
  std::vector<Vec2> pts;
  for (int i = 0; i < 100; ++i) pts.emplace_back(7.0, 0.5 * i);
  const auto fit = fit_line_huber(pts, LineFitParams{});
  CHECK(same_line(fit.line, Vec3(1, 0, -7), 1e-12));
}

TEST_CASE("gross outliers") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0.0, 0.3);
  const Vec2 dir = Vec2(1.0, 0.3).normalized();
  const Vec2 nrm(-dir.y(), dir.x());
  std::vector<Vec2> pts, inliers;
  for (int i = 0; i < 95; ++i) {
    const Vec2 p = Vec2(20, 40) + (i * 1.0) * dir + g(rng) * nrm;
    pts.push_back(p);
    inliers.push_back(p);
  }
  for (int i = 0; i < 5; ++i) pts.push_back(Vec2(20, 40) + (90.0 + i) * dir + 50.0 * nrm);

  const auto robust = fit_line_huber(pts, LineFitParams{});
  const Vec3 plain = tls_line(pts);
  CHECK(rms_distance(robust.line, inliers) < 0.5);
  CHECK(rms_distance(plain, inliers) > 0.5);
}

TEST_CASE("IRLS objective never increases") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec2> pts;
    for (int i = 0; i < 200; ++i) {
      const double s = celc::testing::uniform(rng, 0, 100);
      Vec2 p(s, 0.5 * s + 3.0);
      p += Vec2(g(rng), g(rng));
      if (i % 10 == 0) p.y() += celc::testing::uniform(rng, -60, 60);
      pts.push_back(p);
    }
    const auto fit = fit_line_huber(pts, LineFitParams{});
    REQUIRE(fit.objective.size() >= 2);
    for (std::size_t i = 1; i < fit.objective.size(); ++i)
      CHECK(fit.objective[i] <= fit.objective[i - 1] * (1.0 + 1e-12));
  }
}

TEST_CASE("fit is equivariant to translation and rotation") {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec2> pts;
  for (int i = 0; i < 150; ++i) pts.emplace_back(i * 0.7, 12.0 - 0.4 * i + g(rng));
  const auto base = fit_line_huber(pts, LineFitParams{});

  const Vec2 d(13.0, -4.5);
  const double a = 0.7;
  Eigen::Matrix2d R;
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  std::vector<Vec2> moved;
  for (const auto& p : pts) moved.push_back(R * p + d);
  const auto fit = fit_line_huber(moved, LineFitParams{});

  // Line (n, c) maps to (R n, c - (R n) . d).
  const Vec2 n = R * base.line.head<2>();
  const Vec3 expected(n.x(), n.y(), base.line.z() - n.dot(d));
  CHECK(same_line(fit.line, expected, 1e-10));
}

TEST_CASE("a huge Huber threshold reproduces total least squares") {
  std::mt19937_64 rng(44);
  std::normal_distribution<double> g(0.0, 3.0);
  std::vector<Vec2> pts;
  for (int i = 0; i < 80; ++i) pts.emplace_back(i, -0.2 * i + g(rng));
  LineFitParams p;
  p.huber_k = 1e12;
  CHECK(same_line(fit_line_huber(pts, p).line, tls_line(pts), 1e-8));
}

TEST_CASE("fit errors") {
  std::vector<Vec2> few(5, Vec2(1, 2));
  CHECK_THROWS_AS(fit_line_huber(few, LineFitParams{}), InvalidArgument);
  std::vector<Vec2> same(20, Vec2(1, 2));
  CHECK_THROWS_AS(fit_line_huber(same, LineFitParams{}), DegenerateError);
  LineFitParams bad;
  bad.window_len = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("boundary lines of a noise-free cluster seen by a static camera") {
  synth::MotionSpec still;
  still.w = Vec3::Zero();
  still.v = Vec3::Zero();
  const CameraModel cam;
  synth::Rng rng(45);
  const auto scene = synth::random_scene(3, synth::Volume{}, rng);
  const auto stream = synth::generate_events(scene, still, cam, 3000, synth::NoiseSpec{}, rng);
  for (int j = 0; j < 3; ++j) {
    const auto lines = extract_boundary_lines(cluster_of(stream.events, j), LineFitParams{}, cam);
    const Vec3 truth = synth::projected_line_at(scene.lines[j], still, 0.0).vec();
    CHECK(celc::testing::line_angle(lines.first.line.vec(), truth) < 1e-6);
    CHECK(celc::testing::line_angle(lines.last.line.vec(), truth) < 1e-6);
  }
}

TEST_CASE("boundary lines of a moving noise-free cluster") {
  const synth::MotionSpec motion;
  const CameraModel cam;
  synth::Rng rng(46);
  const auto scene = synth::random_scene(5, synth::Volume{}, rng);
  const auto stream = synth::generate_events(scene, motion, cam, 20000, synth::NoiseSpec{}, rng);
  for (int j = 0; j < 5; ++j) {
    const EventCluster c = cluster_of(stream.events, j);
    if (c.events.size() < 500) continue;
    const auto lines = extract_boundary_lines(c, LineFitParams{}, cam);
    // The fit cannot beat the angle the line itself sweeps within one window.
    const double half = 0.5 * LineFitParams{}.window_len;
    auto truth = [&](double t) {
      return synth::projected_line_at(scene.lines[j], motion, std::clamp(t, 0.0, motion.duration)).vec();
    };
    auto sweep = [&](double t) { return celc::testing::line_angle(truth(t - half), truth(t + half)); };
    CHECK(celc::testing::line_angle(lines.first.line.vec(), truth(lines.first.anchor_time)) <
          sweep(lines.first.anchor_time));
    CHECK(celc::testing::line_angle(lines.last.line.vec(), truth(lines.last.anchor_time)) <
          sweep(lines.last.anchor_time));

    const auto g = lines.geometry();
    CHECK(g.t_s == lines.first.anchor_time);
    CHECK(g.t_e == lines.last.anchor_time);

    const auto center = extract_center_line(c, LineFitParams{}, cam);
    CHECK(celc::testing::line_angle(center.line.vec(), truth(center.anchor_time)) < sweep(center.anchor_time));
  }
}

TEST_CASE("too few events are rejected") {
  EventCluster c;
  for (int i = 0; i < 8; ++i) c.events.push_back({10.0 + i, 20.0 + i, 0.01 * i, 1});
  CHECK_THROWS_AS(extract_boundary_lines(c, LineFitParams{}, CameraModel{}), DegenerateError);
  CHECK_THROWS_AS(extract_center_line(c, LineFitParams{}, CameraModel{}), DegenerateError);
}

TEST_CASE("sliding past a sparse start") {
  EventCluster c;
  for (int i = 0; i < 3; ++i) c.events.push_back({10.0 + i, 20.0, 0.001 * i, 1});
  for (int i = 0; i < 2440; ++i) {
    const double t = 0.0121 + 0.0002 * i;
    c.events.push_back({10.0 + 0.1 * i, 20.0 + 0.05 * i, t, 1});
  }
  const auto lines = extract_boundary_lines(c, LineFitParams{}, CameraModel{});
  CHECK(lines.first.anchor_time == doctest::Approx(0.0125).epsilon(1e-12));
  CHECK(lines.first.n_points == 15);
  CHECK(lines.last.anchor_time == doctest::Approx(c.events.back().t - 0.0025).epsilon(1e-12));
}

TEST_CASE("center line of symmetric data and widening") {
  EventCluster c;
  for (int i = 0; i <= 400; ++i) c.events.push_back({5.0 + 0.2 * i, 50.0 - 0.1 * i, 0.001 * i, 1});
  const auto center = extract_center_line(c, LineFitParams{}, CameraModel{});
  CHECK(center.anchor_time == doctest::Approx(0.2).epsilon(1e-14));

  // Only the ends are populated, so the window must widen to reach them.
  EventCluster sparse;
  for (int i = 0; i < 10; ++i) sparse.events.push_back({5.0 + i, 7.0 + 2.0 * i, 0.001 * i, 1});
  for (int i = 0; i < 10; ++i) sparse.events.push_back({30.0 + i, 57.0 + 2.0 * i, 0.1 + 0.001 * i, 1});
  const auto wide = extract_center_line(sparse, LineFitParams{}, CameraModel{});
  CHECK(wide.n_points >= 10);
  CHECK(wide.inlier_rms < 1e-9);
}

}
