#include "celc/solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "celc/errors.hpp"
#include "celc/linefit.hpp"

namespace celc {

std::string_view to_string(DegeneracyKind kind) {
  switch (kind) {
    case DegeneracyKind::none:
      return "none";
    case DegeneracyKind::pure_rotation:
      return "pure_rotation";
    case DegeneracyKind::parallel_lines_translation:
      return "parallel_lines_translation";
  }
  return "none";
}

Eigen::MatrixX3d StackedSystem::matrix() const {
  Eigen::MatrixX3d A(rows.size(), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) A.row(i) = rows[i].row.transpose();
  return A;
}

StackedSystem stack_rows(std::span<const ClusterObservations> clusters, const AngularVelocity& w) {
  StackedSystem sys;
  std::size_t total = 0;
  for (const auto& c : clusters) total += c.events.size();
  sys.rows.reserve(total);
  for (std::size_t j = 0; j < clusters.size(); ++j) {
    const auto& c = clusters[j];
    for (std::size_t k = 0; k < c.events.size(); ++k) {
      const CelcMatrix B = build_celc_matrix(c.geom, w, c.events[k].t);
      ConstraintRow r;
      const Vec3& f = c.events[k].f.vec();
      r.row = B.transpose() * f;
      r.source_norm = B.norm();
      if (f.z() > 0.0) {
        // f = x / |x| with x = (u, v, 1); df/d(u, v) = (I - f f^T) f_z restricted to u, v.
        const Mat3 df = (Mat3::Identity() - f * f.transpose()) * f.z();
        r.noise_jacobian = B.transpose() * df.leftCols<2>();
      }
      r.cluster = static_cast<int>(j);
      r.index = static_cast<int>(k);
      sys.rows.push_back(r);
    }
  }
  if (sys.rows.empty()) throw InvalidArgument("stack_rows: no admissible events");
  return sys;
}

namespace {

struct WeightedSvd {
  Vec3 v;
  Vec3 sigma;
};

WeightedSvd smallest_direction(const Eigen::MatrixX3d& A, const Eigen::VectorXd& sqrt_w) {
  const Eigen::MatrixX3d Aw = sqrt_w.asDiagonal() * A;
  Eigen::JacobiSVD<Eigen::MatrixX3d> svd(Aw, Eigen::ComputeFullV);
  Vec3 sigma = Vec3::Zero();
  const auto& s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size() && i < 3; ++i) sigma[i] = s[i];
  return {svd.matrixV().col(2), sigma};
}

double median_inplace(std::vector<double>& x) {
  const std::size_t mid = x.size() / 2;
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid), x.end());
  double m = x[mid];
  if (x.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

/// 1.4826 * MAD of the residuals, floored relative to the row magnitudes.
double robust_scale(const Eigen::VectorXd& r, double floor) {
  std::vector<double> x(r.data(), r.data() + r.size());
  const double med = median_inplace(x);
  for (auto& xi : x) xi = std::abs(xi - med);
  return std::max(1.4826 * median_inplace(x), floor);
}

struct GeneralizedSolution {
  Vec3 v;
  double spread;  ///< largest / smallest generalized eigenvalue
};

/// Smallest generalized eigenvector of (A^T W A, N). Empty when N is not
/// positive definite.
std::optional<GeneralizedSolution> normalized_direction(const Eigen::MatrixX3d& A, const Eigen::VectorXd& w,
                                                        const Mat3& N) {
  const Mat3 M = A.transpose() * w.asDiagonal() * A;
  Eigen::SelfAdjointEigenSolver<Mat3> nes(N);
  if (nes.info() != Eigen::Success || !(nes.eigenvalues()[0] > 1e-12 * nes.eigenvalues()[2])) {
    return std::nullopt;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat3> ges(M, N);
  if (ges.info() != Eigen::Success) return std::nullopt;
  const Vec3 v = ges.eigenvectors().col(0);
  if (!v.allFinite() || v.norm() == 0.0) return std::nullopt;
  const Vec3& lambda = ges.eigenvalues();
  const double spread = lambda[0] > 0.0 ? lambda[2] / lambda[0] : std::numeric_limits<double>::infinity();
  return GeneralizedSolution{v.normalized(), spread};
}

double huber_objective(const Eigen::VectorXd& r, double scale, double k) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) s += huber_loss(r[i] / scale, k);
  return s;
}

bool lacks_translation(const MotionEstimate& est, const SolverParams& params) {
  return est.row_energy_ratio < params.vanish_threshold || est.noise_spread < params.noise_only_spread;
}

}  // namespace

Vec3 solve_nullspace_svd(const StackedSystem& sys) {
  if (sys.size() < 3) throw InvalidArgument("solve: need at least 3 rows");
  const Eigen::MatrixX3d A = sys.matrix();
  return smallest_direction(A, Eigen::VectorXd::Ones(A.rows())).v;
}

MotionEstimate solve_nullspace_robust(const StackedSystem& sys, const SolverParams& params) {
  if (sys.size() < 3) throw InvalidArgument("solve: need at least 3 rows");

  std::vector<std::size_t> picked(sys.size());
  std::iota(picked.begin(), picked.end(), std::size_t{0});
  if (sys.size() > params.sample_size && params.sample_size >= 3) {
    std::vector<std::size_t> sample;
    sample.reserve(params.sample_size);
    std::mt19937_64 rng(params.seed);
    std::sample(picked.begin(), picked.end(), std::back_inserter(sample), params.sample_size, rng);
    picked = std::move(sample);
  }
  const auto n = static_cast<Eigen::Index>(picked.size());
  Eigen::MatrixX3d A(n, 3);
  std::vector<Eigen::Matrix<double, 3, 2>> G(static_cast<std::size_t>(n));
  bool has_noise_model = false;
  double source_sq = 0.0;
  double max_row = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = sys.rows[picked[static_cast<std::size_t>(i)]];
    A.row(i) = r.row.transpose();
    G[static_cast<std::size_t>(i)] = r.noise_jacobian;
    has_noise_model = has_noise_model || !r.noise_jacobian.isZero();
    source_sq += r.source_norm * r.source_norm;
    max_row = std::max(max_row, r.row.norm());
  }

  MotionEstimate est;
  est.rows_used = picked.size();
  est.row_energy_ratio = source_sq > 0.0 ? A.norm() / std::sqrt(source_sq) : 0.0;

  Eigen::VectorXd sqrt_w = Eigen::VectorXd::Ones(n);
  WeightedSvd cur = smallest_direction(A, sqrt_w);
  Eigen::VectorXd weights = Eigen::VectorXd::Ones(n);
  const double scale_floor = std::max(1e-14 * max_row, 1e-300);
  const double k = params.huber_k;

  for (int it = 0; it < params.max_iters; ++it) {
    const Eigen::VectorXd r = A * cur.v;
    const double scale = robust_scale(r, scale_floor);
    Eigen::VectorXd next_w(n);
    for (Eigen::Index i = 0; i < n; ++i) next_w[i] = huber_weight(r[i] / scale, k);
    const double change = (next_w - weights).cwiseAbs().maxCoeff();
    weights = next_w;
    if (it > 0 && change < params.weight_tol) break;

    sqrt_w = weights.cwiseSqrt();
    WeightedSvd next = smallest_direction(A, sqrt_w);
    if (next.v.dot(cur.v) < 0.0) next.v = -next.v;
    const double before = huber_objective(r, scale, k);
    const double after = huber_objective(A * next.v, scale, k);
    est.objective_trace.emplace_back(before, after);
    cur = next;
    ++est.iterations;
  }

  est.v_dir = cur.v.normalized();
  if (has_noise_model) {
    Mat3 N = Mat3::Zero(), N_unweighted = Mat3::Zero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& g = G[static_cast<std::size_t>(i)];
      N_unweighted += g * g.transpose();
      N += weights[i] * g * g.transpose();
    }
    // The spread is taken before weighting: IRLS weights shape M but not N.
    if (auto sol = normalized_direction(A, Eigen::VectorXd::Ones(n), N_unweighted)) est.noise_spread = sol->spread;
    if (params.noise_normalization) {
      if (auto sol = normalized_direction(A, weights, N)) {
        est.v_dir = sol->v.dot(est.v_dir) < 0.0 ? Vec3(-sol->v) : sol->v;
        est.noise_normalized = true;
      }
    }
  }
  est.singular_values = smallest_direction(A, weights.cwiseSqrt()).sigma;
  std::size_t inliers = 0;
  for (Eigen::Index i = 0; i < n; ++i) inliers += weights[i] >= 1.0;
  est.inlier_fraction = static_cast<double>(inliers) / static_cast<double>(n);

  const Vec3& s = est.singular_values;
  const bool no_translation = lacks_translation(est, params);
  const bool rank_deficient = !(s[0] > 0.0) || s[1] / s[0] < params.degeneracy_threshold;
  est.degenerate = no_translation || rank_deficient;
  est.ill_conditioned = s[1] > 0.0 && s[2] / s[1] > params.ill_conditioned_gap;
  return est;
}

DegeneracyKind diagnose_degeneracy(const MotionEstimate& est,
                                   std::span<const ClusterObservations> clusters,
                                   const AngularVelocity& w, const SolverParams& params) {
  const Vec3& s = est.singular_values;
  const bool no_translation = lacks_translation(est, params);
  const bool rank_one = !(s[0] > 0.0) || (s[1] / s[0] < params.degeneracy_threshold &&
                                          s[2] / s[0] < params.degeneracy_threshold);
  if (no_translation) return DegeneracyKind::pure_rotation;

  if (w.norm() < params.zero_rotation_tol && !clusters.empty()) {
    std::vector<Vec3> dirs;
    for (const auto& c : clusters) {
      const Vec3 d = c.geom.l1.vec().cross(c.geom.l3.vec());
      if (d.norm() > 1e-12) dirs.push_back(d.normalized());
    }
    bool parallel = !dirs.empty();
    for (const Vec3& d : dirs) {
      const double sin_angle = d.cross(dirs.front()).norm();
      if (std::asin(std::min(1.0, sin_angle)) > params.parallel_angle_tol) parallel = false;
    }
    if (parallel) return DegeneracyKind::parallel_lines_translation;
  }
  if (rank_one) return DegeneracyKind::pure_rotation;
  return DegeneracyKind::none;
}

MotionEstimate solve_celc(std::span<const ClusterObservations> clusters, const AngularVelocity& w,
                          const SolverParams& params) {
  MotionEstimate est = solve_nullspace_robust(stack_rows(clusters, w), params);
  est.degeneracy_kind = diagnose_degeneracy(est, clusters, w, params);
  if (est.degeneracy_kind != DegeneracyKind::none) est.degenerate = true;
  return est;
}

MotionEstimate solve_ce3lc(std::span<const ClusterObservations> clusters, const AngularVelocity& w,
                           const SolverParams& params) {
  if (clusters.empty()) throw InvalidArgument("solve_ce3lc: need at least one cluster");
  StackedSystem sys;
  for (std::size_t j = 0; j < clusters.size(); ++j) {
    const auto& c = clusters[j];
    if (!c.center_line) throw InvalidArgument("solve_ce3lc: cluster without a center line");
    for (ConstraintRow r : build_ce3lc_rows(c.geom, *c.center_line, w, c.center_time)) {
      r.cluster = static_cast<int>(j);
      sys.rows.push_back(r);
    }
  }
  MotionEstimate est = solve_nullspace_robust(sys, params);
  est.degeneracy_kind = diagnose_degeneracy(est, clusters, w, params);
  if (est.degeneracy_kind != DegeneracyKind::none) est.degenerate = true;
  return est;
}

}  // namespace celc
