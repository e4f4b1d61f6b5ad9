#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <random>

#include "ck/error.hpp"
#include "ck/lie.hpp"

using namespace ck;

namespace {

Mat2 series_exp(const Mat2& x) {
  Mat2 term = Mat2::Identity(), sum = Mat2::Identity();
  for (int k = 1; k < 40; ++k) {
    term = term * x / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

Mat2 random_su2_alg(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> nd;
  double x[3] = {nd(rng), nd(rng), nd(rng)};
  Mat2 xi = algebra_from_coords(Group::SU2, x);
  return xi * (scale / alg_norm(Group::SU2, xi));
}

Mat2 svd_polar_su2(const Mat2& m) {
  Eigen::JacobiSVD<Mat2> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat2 u = svd.matrixU() * svd.matrixV().adjoint();
  return u / std::sqrt(u.determinant());
}

}  // namespace

TEST(Lie, ExpMatchesPowerSeries) {
  std::mt19937_64 rng(7);
  for (double s : {0.0, 1e-9, 0.3, 1.0, 2.5, 3.1}) {
    Mat2 xi = s == 0.0 ? Mat2::Zero() : random_su2_alg(rng, s);
    EXPECT_LT((expm(Group::SU2, xi) - series_exp(xi)).norm(), 1e-13) << s;
    Mat2 a = Mat2::Zero();
    a(0, 0) = cplx(0.0, s);
    EXPECT_LT((expm(Group::U1, a) - series_exp(a)).norm(), 1e-13) << s;
  }
}

TEST(Lie, LogInvertsExpInsideInjectivityRadius) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    double s = 3.1 * (t + 0.5) / 200.0;
    Mat2 xi = random_su2_alg(rng, s);
    EXPECT_LT((logm(Group::SU2, expm(Group::SU2, xi)) - xi).norm(), 1e-10);
    Mat2 a = Mat2::Zero();
    a(0, 0) = cplx(0.0, (t % 2 ? 1 : -1) * s);
    EXPECT_LT((logm(Group::U1, expm(Group::U1, a)) - a).norm(), 1e-12);
  }
}

TEST(Lie, ExpInvertsLogOnGroup) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    Mat2 u = expm(Group::SU2, random_su2_alg(rng, 0.03 * t));
    EXPECT_LT((expm(Group::SU2, logm(Group::SU2, u)) - u).norm(), 1e-12);
    EXPECT_TRUE(is_group_element(Group::SU2, u));
  }
}

TEST(Lie, LogRejectsCutLocus) {
  Mat2 minus = -Mat2::Identity();
  EXPECT_THROW(logm(Group::SU2, minus), Error);
  Mat2 u = Mat2::Identity();
  u(0, 0) = -1.0;
  try {
    logm(Group::U1, u);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::OutsideInjectivityDomain);
  }
  GroupElement g{Group::U1, expm(Group::U1, Mat2{{cplx(0, 2.0), 0}, {0, 0}})};
  EXPECT_THROW(log_map(g, IdentityNeighborhood{Group::U1, std::numbers::pi / 2}), Error);
}

TEST(Lie, AngleIsGeodesicDistance) {
  std::mt19937_64 rng(3);
  for (double s : {0.1, 1.0, 2.0, 3.0}) {
    Mat2 xi = random_su2_alg(rng, s);
    EXPECT_NEAR(angle_from_identity(Group::SU2, expm(Group::SU2, xi)), s, 1e-12);
  }
  Mat2 a = expm(Group::U1, Mat2{{cplx(0, 0.4), 0}, {0, 0}});
  Mat2 b = expm(Group::U1, Mat2{{cplx(0, -0.3), 0}, {0, 0}});
  EXPECT_NEAR(group_dist(Group::U1, a, b), 0.7, 1e-14);
}

TEST(Lie, BracketStructureConstants) {
  // [i sx, i sy] = -2 i sz and cyclic
  for (int k = 0; k < 3; ++k) {
    AlgebraElement a{Group::SU2, su2_basis(k)}, b{Group::SU2, su2_basis((k + 1) % 3)};
    Mat2 c = bracket(a, b).value;
    EXPECT_LT((c + 2.0 * su2_basis((k + 2) % 3)).norm(), 1e-14);
  }
  AlgebraElement u{Group::U1, Mat2{{cplx(0, 1), 0}, {0, 0}}};
  EXPECT_LT(bracket(u, u).value.norm(), 1e-15);
}

TEST(Lie, AdjointIsAnIsometry) {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 50; ++t) {
    GroupElement g{Group::SU2, expm(Group::SU2, random_su2_alg(rng, 2.0))};
    AlgebraElement xi{Group::SU2, random_su2_alg(rng, 0.7)};
    auto ad = adjoint(g, xi);
    EXPECT_NEAR(alg_norm(Group::SU2, ad.value), 0.7, 1e-12);
    EXPECT_TRUE(is_algebra_element(Group::SU2, ad.value));
  }
}

TEST(Lie, AlgebraCoordinatesAreOrthonormal) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      EXPECT_NEAR(alg_inner(Group::SU2, su2_basis(i), su2_basis(j)), i == j ? 1.0 : 0.0, 1e-15);
  double x[3] = {0.3, -1.2, 0.5}, y[3];
  algebra_coords(Group::SU2, algebra_from_coords(Group::SU2, x), y);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(x[k], y[k], 1e-15);
}

TEST(Lie, ProjectionMatchesSvdPolar) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 100; ++t) {
    Mat2 u = expm(Group::SU2, random_su2_alg(rng, 2.9));
    Mat2 noise;
    noise << cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng));
    Mat2 m = u + 0.05 * noise;
    Mat2 p = project_to_group(Group::SU2, m).value;
    EXPECT_TRUE(is_group_element(Group::SU2, p));
    EXPECT_LT((p - svd_polar_su2(m)).norm(), 1e-10);
  }
  Mat2 far = Mat2::Identity() * 3.0;
  EXPECT_THROW(project_to_group(Group::SU2, far), Error);
}

TEST(Lie, ProjectionFixesGroupElements) {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 20; ++t) {
    Mat2 u = expm(Group::SU2, random_su2_alg(rng, 1.5));
    EXPECT_LT((project_to_group(Group::SU2, u).value - u).norm(), 1e-14);
  }
  Mat2 z = Mat2::Identity();
  z(0, 0) = 1.1 * std::polar(1.0, 0.8);
  EXPECT_NEAR(std::arg(project_to_group(Group::U1, z).value(0, 0)), 0.8, 1e-14);
}

TEST(Lie, PatchInterpolateEndpoints) {
  std::mt19937_64 rng(31);
  GroupElement F{Group::SU2, expm(Group::SU2, random_su2_alg(rng, 1.2))};
  IdentityNeighborhood nb{Group::SU2, std::numbers::pi / 2};
  EXPECT_LT((patch_interpolate(F, 0.0, nb).value - Mat2::Identity()).norm(), 1e-14);
  EXPECT_LT((patch_interpolate(F, 1.0, nb).value - F.value).norm(), 1e-13);
  auto half = patch_interpolate(F, 0.5, nb).value;
  EXPECT_LT((half * half - F.value).norm(), 1e-13);
}

TEST(Lie, QuarterTurn) {
  Mat2 a = Mat2::Zero();
  a(0, 0) = cplx(0.0, std::numbers::pi / 2);
  Mat2 oracle = series_exp(a);
  EXPECT_LT(std::abs(exp_map({Group::U1, a}).value(0, 0) - cplx(0.0, 1.0)), 1e-15);
  EXPECT_LT((exp_map({Group::U1, a}).value - oracle).norm(), 1e-12);
  Mat2 xi = std::numbers::pi * su2_basis(2);
  EXPECT_LT((expm(Group::SU2, xi) - series_exp(xi)).norm(), 1e-12);
}

TEST(Lie, HalfPowerOfPhase) {
  IdentityNeighborhood nb{Group::U1, std::numbers::pi / 2};
  GroupElement F{Group::U1, Mat2::Identity()};
  F.value(0, 0) = std::polar(1.0, 1.2);
  EXPECT_LT(std::abs(patch_interpolate(F, 0.5, nb).value(0, 0) - std::polar(1.0, 0.6)), 1e-15);
}

TEST(Lie, InterpolationStaysInNeighborhood) {
  std::mt19937_64 rng(37);
  IdentityNeighborhood nb{Group::SU2, std::numbers::pi / 2};
  for (int t = 0; t < 50; ++t) {
    GroupElement F{Group::SU2, expm(Group::SU2, random_su2_alg(rng, 1.5))};
    for (int k = 0; k <= 20; ++k) {
      auto g = patch_interpolate(F, k / 20.0, nb);
      EXPECT_LT(angle_from_identity(Group::SU2, g.value), nb.radius);
    }
  }
}

TEST(Lie, ProjectionIsOneLipschitz) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> nd;
  auto rnd = [&] {
    Mat2 e;
    e << cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng));
    return Mat2(e / e.norm());
  };
  for (int t = 0; t < 200; ++t) {
    Mat2 u = expm(Group::SU2, random_su2_alg(rng, 2.0));
    Mat2 a = u + 0.2 * rnd(), b = u + 0.2 * rnd();
    double dp = (project_to_group(Group::SU2, a).value - project_to_group(Group::SU2, b).value).norm();
    EXPECT_LE(dp, (a - b).norm() * (1.0 + 1e-9));
  }
}

TEST(Lie, MismatchedGroupsAreRejected) {
  AlgebraElement a{Group::U1, Mat2::Zero()}, b{Group::SU2, su2_basis(0)};
  try {
    bracket(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::GroupMismatch);
  }
  GroupElement id = identity_element(Group::SU2);
  EXPECT_LT((adjoint(id, b).value - b.value).norm(), 1e-15);
}
