#include "celc/refine.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "celc/errors.hpp"
#include "celc/linefit.hpp"

namespace celc {

namespace {
constexpr double kLineAtInfinity = 1e-14;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

double geometric_distance(const Vec3& l, const Bearing& f) {
  if (!(f[2] > 0.0)) throw InvalidArgument("geometric_distance: bearing behind the camera");
  const double ab = std::hypot(l.x(), l.y());
  if (!(ab > 0.0)) throw InvalidArgument("geometric_distance: line at infinity");
  const Vec3 x = f.vec() / f[2];
  return std::abs(x.dot(l)) / ab;
}

Eigen::Matrix<double, 3, 2> tangent_basis(const Vec3& v) {
  const Vec3 n = v.normalized();
  Vec3 a = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 b1 = (a - n * n.dot(a)).normalized();
  const Vec3 b2 = n.cross(b1);
  Eigen::Matrix<double, 3, 2> B;
  B.col(0) = b1;
  B.col(1) = b2;
  return B;
}

Vec3 sphere_retract(const Vec3& v, const Eigen::Matrix<double, 3, 2>& basis, const Eigen::Vector2d& delta) {
  return (v + basis * delta).normalized();
}

TransferProblem::TransferProblem(std::span<const ClusterObservations> clusters, const AngularVelocity& w) {
  for (const auto& c : clusters) {
    for (const auto& e : c.events) {
      if (!(e.f[2] > 0.0)) continue;
      B_.push_back(build_celc_matrix(c.geom, w, e.t));
      x_.push_back(e.f.vec() / e.f[2]);
    }
  }
}

Eigen::VectorXd TransferProblem::residuals(const Vec3& v) const {
  Eigen::VectorXd r(static_cast<Eigen::Index>(B_.size()));
  for (std::size_t i = 0; i < B_.size(); ++i) {
    const Vec3 l = B_[i] * v;
    const double ab = std::hypot(l.x(), l.y());
    r[static_cast<Eigen::Index>(i)] = ab > kLineAtInfinity * v.norm() ? x_[i].dot(l) / ab : kNaN;
  }
  return r;
}

void TransferProblem::evaluate(const Vec3& v, const Eigen::Matrix<double, 3, 2>& basis,
                               Eigen::VectorXd& r, Eigen::MatrixX2d& J) const {
  const auto n = static_cast<Eigen::Index>(B_.size());
  r.resize(n);
  J.resize(n, 2);
  // Derivative of normalize(v + basis d) at d = 0 is (I - u u^T) basis / |v|.
  const double vn = v.norm();
  const Vec3 u = v / vn;
  const Eigen::Matrix<double, 3, 2> dv = (basis - u * (u.transpose() * basis)) / vn;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Mat3& B = B_[static_cast<std::size_t>(i)];
    const Vec3& x = x_[static_cast<std::size_t>(i)];
    const Vec3 l = B * v;
    const double ab = std::hypot(l.x(), l.y());
    if (!(ab > kLineAtInfinity * vn)) {
      r[i] = kNaN;
      J.row(i).setConstant(kNaN);
      continue;
    }
    const double num = x.dot(l);
    r[i] = num / ab;
    // d r / d l = x / ab - num / ab^3 * (l_a, l_b, 0)
    Vec3 dl = x / ab;
    dl.x() -= num * l.x() / (ab * ab * ab);
    dl.y() -= num * l.y() / (ab * ab * ab);
    J.row(i) = (B.transpose() * dl).transpose() * dv;
  }
}

double TransferProblem::cost(const Vec3& v, double huber_k, std::size_t* dropped) const {
  const Eigen::VectorXd r = residuals(v);
  double c = 0.0;
  std::size_t d = 0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (std::isfinite(r[i]))
      c += huber_loss(r[i], huber_k);
    else
      ++d;
  }
  if (dropped) *dropped = d;
  return c;
}

RefineResult refine_velocity(std::span<const ClusterObservations> clusters, const AngularVelocity& w,
                             const Vec3& v_init, const RefineParams& params) {
  if (!(v_init.norm() > 0.0)) throw InvalidArgument("refine_velocity: zero initial velocity");
  const TransferProblem problem(clusters, w);
  const double k = params.huber_k;

  RefineResult res;
  Vec3 v = v_init.normalized();
  std::size_t dropped = 0;
  double cost = problem.cost(v, k, &dropped);
  if (dropped == problem.size()) throw DegenerateError("refine_velocity: every residual dropped");
  res.initial_cost = cost;

  double lambda = -1.0;
  double nu = 2.0;
  Eigen::VectorXd r;
  Eigen::MatrixX2d J;
  for (int it = 0; it < params.max_iters; ++it) {
    const auto basis = tangent_basis(v);
    problem.evaluate(v, basis, r, J);
    // Gauss-Newton model of the Huber cost with IRLS weights.
    Eigen::Matrix2d H = Eigen::Matrix2d::Zero();
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      if (!std::isfinite(r[i])) continue;
      const double wi = huber_weight(r[i], k);
      const Eigen::RowVector2d Ji = J.row(i);
      H += wi * Ji.transpose() * Ji;
      g += wi * r[i] * Ji.transpose();
    }
    if (g.lpNorm<Eigen::Infinity>() < params.gradient_tol) {
      res.converged = true;
      break;
    }
    if (lambda < 0.0) lambda = 1e-4 * std::max(H(0, 0), H(1, 1));
    ++res.iterations;

    bool accepted = false;
    bool tiny_step = false;
    while (!accepted) {
      Eigen::Matrix2d Hd = H;
      Hd.diagonal() += lambda * H.diagonal().cwiseMax(1e-12 * (1.0 + H.diagonal().maxCoeff()));
      const Eigen::Vector2d delta = Hd.ldlt().solve(-g);
      if (delta.norm() < params.step_tol) {
        tiny_step = true;
        break;
      }
      const Vec3 v_new = sphere_retract(v, basis, delta);
      const double predicted = -(g.dot(delta) + 0.5 * delta.dot(H * delta));
      const double new_cost = problem.cost(v_new, k);
      const double actual = cost - new_cost;
      if (actual > 0.0 && predicted > 0.0) {
        const double rho = actual / predicted;
        v = v_new;
        cost = new_cost;
        lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        nu = 2.0;
        accepted = true;
      } else {
        lambda *= nu;
        nu *= 2.0;
        if (!std::isfinite(lambda) || lambda > 1e32) {
          tiny_step = true;
          break;
        }
      }
    }
    if (tiny_step) {
      res.converged = true;
      break;
    }
  }
  res.v_refined = v;
  res.final_cost = problem.cost(v, k, &res.dropped_residuals);
  return res;
}

}  // namespace celc
