#include "dragdrop/annotation/ellipse.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "dragdrop/core/error.hpp"

namespace dragdrop {

namespace {

Conic normalized(Conic c) {
  const double disc = 4.0 * c[0] * c[2] - c[1] * c[1];
  if (!(disc > 0.0)) throw FitError("ellipse fit: conic is not an ellipse");
  c /= std::sqrt(disc);
  if (c[0] + c[2] < 0.0) c = -c;
  return c;
}

}  // namespace

Conic fit_conic(std::span<const Eigen::Vector2d> points) {
  const auto n = Eigen::Index(points.size());
  if (n < 5) throw FitError("ellipse fit needs at least 5 points (got " + std::to_string(n) + ")");

  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : points) mean += p;
  mean /= double(n);
  double spread = 0.0;
  for (const auto& p : points) spread += (p - mean).squaredNorm();
  spread = std::sqrt(spread / double(n));
  if (!(spread > 1e-12)) throw FitError("ellipse fit: points are coincident");
  const double s = spread / std::numbers::sqrt2;

  Eigen::MatrixXd d1(n, 3), d2(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d q = (points[std::size_t(i)] - mean) / s;
    d1.row(i) << q.x() * q.x(), q.x() * q.y(), q.y() * q.y();
    d2.row(i) << q.x(), q.y(), 1.0;
  }
  const Eigen::Matrix3d s1 = d1.transpose() * d1;
  const Eigen::Matrix3d s2 = d1.transpose() * d2;
  const Eigen::Matrix3d s3 = d2.transpose() * d2;

  Eigen::FullPivLU<Eigen::Matrix3d> lu(s3);
  lu.setThreshold(1e-10);
  if (lu.rank() < 3) throw FitError("ellipse fit: points are collinear");
  const Eigen::Matrix3d t = -lu.solve(s2.transpose());
  const Eigen::Matrix3d m = s1 + s2 * t;

  // Premultiply by the inverse of the constraint block [[0,0,2],[0,-1,0],[2,0,0]].
  Eigen::Matrix3d reduced;
  reduced.row(0) = m.row(2) / 2.0;
  reduced.row(1) = -m.row(1);
  reduced.row(2) = m.row(0) / 2.0;

  Eigen::EigenSolver<Eigen::Matrix3d> es(reduced);
  if (es.info() != Eigen::Success) throw FitError("ellipse fit: eigen decomposition failed");
  int best = -1;
  double best_cond = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3d v = es.eigenvectors().col(k).real();
    const double cond = 4.0 * v[0] * v[2] - v[1] * v[1];
    if (cond > best_cond) {
      best_cond = cond;
      best = k;
    }
  }
  if (best < 0) throw FitError("ellipse fit: no elliptical solution (degenerate point configuration)");

  const Eigen::Vector3d a1 = es.eigenvectors().col(best).real();
  const Eigen::Vector3d a2 = t * a1;
  const double A = a1[0], B = a1[1], C = a1[2], D = a2[0], E = a2[1], F = a2[2];

  // Undo x' = (x - mx)/s, y' = (y - my)/s.
  const double mx = mean.x(), my = mean.y(), s2inv = 1.0 / (s * s);
  Conic out;
  out[0] = A * s2inv;
  out[1] = B * s2inv;
  out[2] = C * s2inv;
  out[3] = (-2.0 * A * mx - B * my) * s2inv + D / s;
  out[4] = (-B * mx - 2.0 * C * my) * s2inv + E / s;
  out[5] = (A * mx * mx + B * mx * my + C * my * my) * s2inv - (D * mx + E * my) / s + F;
  return normalized(out);
}

EllipseParams conic_to_ellipse(const Conic& c) {
  const double A = c[0], B = c[1], C = c[2], D = c[3], E = c[4], F = c[5];
  Eigen::Matrix2d q;
  q << A, B / 2.0, B / 2.0, C;
  if (!(q.determinant() > 0.0)) throw FitError("conic is not an ellipse");
  const Eigen::Vector2d g(D, E);
  const Eigen::Vector2d center = q.ldlt().solve(-g / 2.0);
  const double f0 = F + g.dot(center) / 2.0;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(q);
  const Eigen::Vector2d lambda = es.eigenvalues();  // ascending
  if (!(f0 * lambda[0] < 0.0)) throw FitError("conic is an imaginary ellipse");

  EllipseParams e;
  e.center = center;
  e.a = std::sqrt(-f0 / lambda[0]);
  e.b = std::sqrt(-f0 / lambda[1]);
  if (e.a - e.b <= 1e-12 * e.a) {
    e.theta = 0.0;
  } else {
    const Eigen::Vector2d major = es.eigenvectors().col(0);
    double th = std::atan2(major.y(), major.x());
    th = std::fmod(th, std::numbers::pi);
    if (th < 0.0) th += std::numbers::pi;
    if (th >= std::numbers::pi) th -= std::numbers::pi;
    e.theta = th;
  }
  return e;
}

EllipseParams fit_ellipse(std::span<const Eigen::Vector2d> points) { return conic_to_ellipse(fit_conic(points)); }

}  // namespace dragdrop
