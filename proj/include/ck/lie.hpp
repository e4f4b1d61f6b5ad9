#pragma once

// U(1) and SU(2) with their Lie algebras.
//
// Both groups are stored as 2x2 complex matrices.  U(1) sits in the upper-left
// entry, diag(z, 1), and its algebra as diag(i a, 0); this keeps every product,
// inverse and conjugation formula uniform across the two groups.
//
// Norm on the algebra: |a| for U(1), Frobenius / sqrt(2) for SU(2).  With this
// normalization exp(t xi) is a unit-speed geodesic and the injectivity radius is
// pi for both groups.

#include <Eigen/Dense>
#include <complex>
#include <numbers>
#include <string>

namespace ck {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;

enum class Group { U1, SU2 };

const char* group_name(Group g);
Group parse_group(const std::string& s);

struct GroupElement {
  Group group = Group::U1;
  Mat2 value = Mat2::Identity();
};

struct AlgebraElement {
  Group group = Group::U1;
  Mat2 value = Mat2::Zero();
};

struct IdentityNeighborhood {
  Group group = Group::U1;
  double radius = std::numbers::pi / 2;
};

inline constexpr double kInjectivityRadius = std::numbers::pi;

// Raw matrix kernels.  Callers are responsible for group membership.
Mat2 identity2();
Mat2 expm(Group g, const Mat2& xi);
// Throws OutsideInjectivityDomain when the geodesic distance to the identity
// is not strictly below radius.
Mat2 logm(Group g, const Mat2& u, double radius = kInjectivityRadius);
double alg_norm(Group g, const Mat2& xi);
double alg_inner(Group g, const Mat2& a, const Mat2& b);
// Geodesic distance of u from the identity.
double angle_from_identity(Group g, const Mat2& u);
// Geodesic distance between a and b.
double group_dist(Group g, const Mat2& a, const Mat2& b);
Mat2 group_inv(const Mat2& u);
// Projections onto the algebra (anti-Hermitian traceless part for SU(2)).
Mat2 to_algebra(Group g, const Mat2& m);

// Algebra coordinates: U(1) uses a with xi = i a; SU(2) uses x with
// xi = sum_k x_k (i sigma_k), an orthonormal basis for the chosen norm.
Mat2 algebra_from_coords(Group g, const double* x);
void algebra_coords(Group g, const Mat2& xi, double* x);
int algebra_dim(Group g);
Mat2 su2_basis(int k);

// Element-level API.
GroupElement identity_element(Group g);
GroupElement exp_map(const AlgebraElement& xi);
AlgebraElement log_map(const GroupElement& g, const IdentityNeighborhood& nbhd);
GroupElement patch_interpolate(const GroupElement& F, double psi, const IdentityNeighborhood& nbhd);
// Nearest group element for an ambient matrix (U(1) reads the upper-left entry).
GroupElement project_to_group(Group g, const Mat2& m);
AlgebraElement adjoint(const GroupElement& g, const AlgebraElement& xi);
AlgebraElement bracket(const AlgebraElement& a, const AlgebraElement& b);

bool is_group_element(Group g, const Mat2& u, double tol = 1e-12);
bool is_algebra_element(Group g, const Mat2& xi, double tol = 1e-12);

}  // namespace ck
