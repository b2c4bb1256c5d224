#include "celc/constraint.hpp"

#include <cmath>
#include <string>

#include "celc/errors.hpp"

namespace celc {

double admissible_time(const ClusterGeometry& geom, double t_k) {
  if (geom.t_e < geom.t_s) throw InvalidArgument("cluster geometry: t_e precedes t_s");
  if (t_k >= geom.t_s && t_k <= geom.t_e) return t_k;
  if (t_k < geom.t_s && geom.t_s - t_k <= kTimeTolerance) return geom.t_s;
  if (t_k > geom.t_e && t_k - geom.t_e <= kTimeTolerance) return geom.t_e;
  throw InvalidArgument("event time " + std::to_string(t_k) + " outside cluster interval [" +
                        std::to_string(geom.t_s) + ", " + std::to_string(geom.t_e) + "]");
}

TrifocalSlices continuous_trifocal(const ClusterGeometry& geom, const AngularVelocity& w,
                                   const LinearVelocity& v, double t_k) {
  const double tk = admissible_time(geom, t_k);
  const double ds = tk - geom.t_s;
  const double de = tk - geom.t_e;
  const Rotation3 R_sk = so3_exp(w, ds);
  const Rotation3 R_ek = so3_exp(w, de);
  const Vec3 t_ek = so3_left_jacobian(w, de) * v * de;
  const Vec3 t_sk = ds * so3_left_jacobian(w, ds) * v;
  TrifocalSlices T;
  for (int i = 0; i < 3; ++i)
    T[i] = R_sk.col(i) * t_ek.transpose() - t_sk * R_ek.col(i).transpose();
  return T;
}

TrifocalSlices classical_trifocal(const Rotation3& R12, const Vec3& t12, const Rotation3& R32,
                                  const Vec3& t32) {
  TrifocalSlices T;
  for (int i = 0; i < 3; ++i) T[i] = R12.col(i) * t32.transpose() - t12 * R32.col(i).transpose();
  return T;
}

CelcMatrix build_celc_matrix(const ClusterGeometry& geom, const AngularVelocity& w, double t_k) {
  const double tk = admissible_time(geom, t_k);
  const double ds = tk - geom.t_s;
  const double de = tk - geom.t_e;
  const Rotation3 R_sk = so3_exp(w, ds);
  const Rotation3 R_ek = so3_exp(w, de);
  const Mat3 J_sk = so3_left_jacobian(w, ds);
  const Mat3 J_ek = so3_left_jacobian(w, de);
  const Vec3& l1 = geom.l1.vec();
  const Vec3& l3 = geom.l3.vec();

  // Row i: (t_k - t_e)(l1^T r_i^sk) l3^T J_ek - (t_k - t_s)(l3^T r_i^ek) l1^T J_sk.
  const Eigen::RowVector3d a = l3.transpose() * J_ek;
  const Eigen::RowVector3d b = l1.transpose() * J_sk;
  const Vec3 c1 = R_sk.transpose() * l1;  // c1_i = l1^T r_i^sk
  const Vec3 c3 = R_ek.transpose() * l3;
  return de * c1 * a - ds * c3 * b;
}

double celc_residual(const Bearing& f, const CelcMatrix& B, const LinearVelocity& v) {
  return f.vec().dot(B * v);
}

double celc_residual_normalized(const Bearing& f, const CelcMatrix& B, const LinearVelocity& v) {
  const double denom = (B.transpose() * f.vec()).norm() * v.norm();
  if (!(denom > 0.0)) return 0.0;
  return celc_residual(f, B, v) / denom;
}

Line2D transfer_line(const ClusterGeometry& geom, const AngularVelocity& w,
                     const LinearVelocity& v, double t_k) {
  const Vec3 l = build_celc_matrix(geom, w, t_k) * v;
  if (!(l.norm() >= 1e-14)) throw DegenerateError("transfer_line: B v vanishes");
  return Line2D(l);
}

std::array<ConstraintRow, 3> build_ce3lc_rows(const ClusterGeometry& geom, const Line2D& l2,
                                              const AngularVelocity& w, double t_mid) {
  const Mat3 M = skew(l2.vec()) * build_celc_matrix(geom, w, t_mid);
  const double norm = M.norm();
  std::array<ConstraintRow, 3> rows;
  for (int i = 0; i < 3; ++i) {
    rows[i].row = M.row(i).transpose();
    rows[i].source_norm = norm;
    rows[i].index = i;
  }
  return rows;
}

}  // namespace celc
