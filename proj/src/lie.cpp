#include "ck/lie.hpp"

#include <cmath>

#include "ck/error.hpp"

namespace ck {

namespace {

const cplx I1(0.0, 1.0);

double op_norm(const Mat2& m) {
  // largest singular value from the 2x2 Gram matrix
  Mat2 g = m.adjoint() * m;
  double tr = g.trace().real();
  double det = g.determinant().real();
  double disc = std::max(0.0, tr * tr / 4.0 - det);
  return std::sqrt(std::max(0.0, tr / 2.0 + std::sqrt(disc)));
}

void require_same(Group a, Group b) {
  if (a != b) throw Error(Errc::GroupMismatch, "operands belong to different groups");
}

}  // namespace

const char* group_name(Group g) { return g == Group::U1 ? "U1" : "SU2"; }

Group parse_group(const std::string& s) {
  if (s == "U1" || s == "u1") return Group::U1;
  if (s == "SU2" || s == "su2") return Group::SU2;
  throw Error(Errc::InvalidArgument, "unknown group '" + s + "'");
}

Mat2 identity2() { return Mat2::Identity(); }

Mat2 su2_basis(int k) {
  Mat2 e = Mat2::Zero();
  switch (k) {
    case 0: e(0, 1) = I1; e(1, 0) = I1; break;           // i sigma_x
    case 1: e(0, 1) = 1.0; e(1, 0) = -1.0; break;        // i sigma_y
    default: e(0, 0) = I1; e(1, 1) = -I1; break;         // i sigma_z
  }
  return e;
}

int algebra_dim(Group g) { return g == Group::U1 ? 1 : 3; }

Mat2 algebra_from_coords(Group g, const double* x) {
  if (g == Group::U1) {
    Mat2 m = Mat2::Zero();
    m(0, 0) = cplx(0.0, x[0]);
    return m;
  }
  return x[0] * su2_basis(0) + x[1] * su2_basis(1) + x[2] * su2_basis(2);
}

void algebra_coords(Group g, const Mat2& xi, double* x) {
  if (g == Group::U1) {
    x[0] = xi(0, 0).imag();
    return;
  }
  for (int k = 0; k < 3; ++k) x[k] = alg_inner(g, su2_basis(k), xi);
}

double alg_inner(Group g, const Mat2& a, const Mat2& b) {
  if (g == Group::U1) return (std::conj(a(0, 0)) * b(0, 0)).real();
  return 0.5 * (a.adjoint() * b).trace().real();
}

double alg_norm(Group g, const Mat2& xi) {
  if (g == Group::U1) return std::abs(xi(0, 0));
  return xi.norm() / std::sqrt(2.0);
}

Mat2 to_algebra(Group g, const Mat2& m) {
  if (g == Group::U1) {
    Mat2 r = Mat2::Zero();
    r(0, 0) = cplx(0.0, m(0, 0).imag());
    return r;
  }
  Mat2 a = 0.5 * (m - m.adjoint());
  cplx t = 0.5 * a.trace();
  a(0, 0) -= t;
  a(1, 1) -= t;
  return a;
}

Mat2 group_inv(const Mat2& u) { return u.adjoint(); }

Mat2 expm(Group g, const Mat2& xi) {
  if (g == Group::U1) {
    Mat2 r = Mat2::Identity();
    r(0, 0) = std::exp(cplx(0.0, xi(0, 0).imag()));
    return r;
  }
  double th = alg_norm(g, xi);
  double sinc = th < 1e-8 ? 1.0 - th * th / 6.0 : std::sin(th) / th;
  Mat2 r = sinc * xi;
  r(0, 0) += std::cos(th);
  r(1, 1) += std::cos(th);
  return r;
}

namespace {

// Returns the rotation angle and the anti-Hermitian traceless part of u.
double su2_angle(const Mat2& u, Mat2* v) {
  double a0 = 0.5 * u.trace().real();
  Mat2 w = 0.5 * (u - u.adjoint());
  cplx t = 0.5 * w.trace();
  w(0, 0) -= t;
  w(1, 1) -= t;
  double s = w.norm() / std::sqrt(2.0);
  if (v) *v = w;
  return std::atan2(s, a0);
}

}  // namespace

double angle_from_identity(Group g, const Mat2& u) {
  if (g == Group::U1) return std::abs(std::arg(u(0, 0)));
  return su2_angle(u, nullptr);
}

double group_dist(Group g, const Mat2& a, const Mat2& b) {
  return angle_from_identity(g, a.adjoint() * b);
}

Mat2 logm(Group g, const Mat2& u, double radius) {
  if (g == Group::U1) {
    double th = std::arg(u(0, 0));
    if (!(std::abs(th) < radius))
      throw Error(Errc::OutsideInjectivityDomain, "phase " + std::to_string(th) + " outside log domain");
    Mat2 r = Mat2::Zero();
    r(0, 0) = cplx(0.0, th);
    return r;
  }
  Mat2 w;
  double th = su2_angle(u, &w);
  if (!(th < radius))
    throw Error(Errc::OutsideInjectivityDomain, "rotation angle " + std::to_string(th) + " outside log domain");
  double s = w.norm() / std::sqrt(2.0);
  double f = s < 1e-300 ? 1.0 : th / s;
  return f * w;
}

GroupElement identity_element(Group g) { return {g, Mat2::Identity()}; }

GroupElement exp_map(const AlgebraElement& xi) { return {xi.group, expm(xi.group, xi.value)}; }

AlgebraElement log_map(const GroupElement& g, const IdentityNeighborhood& nbhd) {
  require_same(g.group, nbhd.group);
  return {g.group, logm(g.group, g.value, nbhd.radius)};
}

GroupElement patch_interpolate(const GroupElement& F, double psi, const IdentityNeighborhood& nbhd) {
  AlgebraElement x = log_map(F, nbhd);
  return {F.group, expm(F.group, psi * x.value)};
}

GroupElement project_to_group(Group g, const Mat2& m) {
  if (g == Group::U1) {
    cplx z = m(0, 0);
    double r = std::abs(z);
    if (!(std::abs(r - 1.0) <= 0.5))
      throw Error(Errc::TooFarFromGroup, "modulus " + std::to_string(r) + " too far from the circle");
    Mat2 out = Mat2::Identity();
    out(0, 0) = z / r;
    return {g, out};
  }
  // Polar factor by the Newton iteration X <- (X + X^{-H}) / 2.
  if (std::abs(m.determinant()) < 1e-3)
    throw Error(Errc::TooFarFromGroup, "matrix is nearly singular");
  Mat2 x = m;
  for (int it = 0; it < 100; ++it) {
    Mat2 nx = 0.5 * (x + x.inverse().adjoint());
    double d = (nx - x).norm();
    x = nx;
    if (d < 1e-16) break;
  }
  double phi = std::arg(x.determinant());
  x *= std::exp(cplx(0.0, -phi / 2.0));
  if (!(op_norm(m - x) <= 0.5))
    throw Error(Errc::TooFarFromGroup, "distance to SU(2) exceeds 0.5");
  return {g, x};
}

AlgebraElement adjoint(const GroupElement& g, const AlgebraElement& xi) {
  require_same(g.group, xi.group);
  return {g.group, g.value * xi.value * g.value.adjoint()};
}

AlgebraElement bracket(const AlgebraElement& a, const AlgebraElement& b) {
  require_same(a.group, b.group);
  if (a.group == Group::U1) return {a.group, Mat2::Zero()};
  return {a.group, a.value * b.value - b.value * a.value};
}

bool is_group_element(Group g, const Mat2& u, double tol) {
  if (g == Group::U1)
    return std::abs(std::abs(u(0, 0)) - 1.0) <= tol && std::abs(u(1, 1) - 1.0) <= tol &&
           std::abs(u(0, 1)) <= tol && std::abs(u(1, 0)) <= tol;
  return (u.adjoint() * u - Mat2::Identity()).norm() <= tol && std::abs(u.determinant() - 1.0) <= tol;
}

bool is_algebra_element(Group g, const Mat2& xi, double tol) {
  if ((xi + xi.adjoint()).norm() > tol) return false;
  if (g == Group::U1)
    return std::abs(xi(0, 1)) <= tol && std::abs(xi(1, 0)) <= tol && std::abs(xi(1, 1)) <= tol;
  return std::abs(xi.trace()) <= tol;
}

}  // namespace ck
