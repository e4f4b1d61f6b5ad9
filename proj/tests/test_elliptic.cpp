#include <gtest/gtest.h>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <numbers>
#include <random>

#include "ck/elliptic.hpp"
#include "ck/error.hpp"

using namespace ck;

namespace {

constexpr double kPi = std::numbers::pi;

Mat2 drift_shape(const double* x, int a, double L) {
  double c[3] = {std::sin(kPi * x[0] / L + a), std::cos(kPi * x[1] / L) * (a + 1) * 0.5, 0.3};
  return algebra_from_coords(Group::SU2, c) / L;
}

std::vector<MatField> shape_field(const NodeGrid& g, double c) {
  double L = g.h[0] * g.cells[0];
  DriftProblem p = DriftProblem::sample(
      g, [&](const double* x, int a) { return Mat2(c * drift_shape(x, a, L)); },
      [](const double*) { return Mat2(Mat2::Zero()); });
  return p.A;
}

// Lap u - A.grad u assembled as a sparse complex matrix acting on one column
// of u; unknown (interior node, row) pairs.
MatField direct_solve(const DriftProblem& pb) {
  const NodeGrid& g = pb.grid;
  int n = g.n;
  std::vector<long> id(g.size(), -1);
  std::vector<std::size_t> interior;
  std::vector<int> idx(n);
  for (std::size_t p = 0; p < g.size(); ++p) {
    g.unflatten(p, idx.data());
    bool in = true;
    for (int a = 0; a < n; ++a) in = in && idx[a] > 0 && idx[a] < g.cells[a];
    if (in) {
      id[p] = static_cast<long>(interior.size());
      interior.push_back(p);
    }
  }
  long N = static_cast<long>(interior.size());
  std::vector<Eigen::Triplet<cplx>> trip;
  for (long k = 0; k < N; ++k) {
    std::size_t p = interior[k];
    for (int r = 0; r < 2; ++r) {
      long row = 2 * k + r;
      for (int a = 0; a < n; ++a) {
        std::size_t st = g.stride(a);
        double h = g.h[a];
        trip.emplace_back(row, 2 * k + r, -2.0 / (h * h));
        for (int sgn : {1, -1}) {
          std::size_t q = sgn > 0 ? p + st : p - st;
          if (id[q] < 0) continue;
          trip.emplace_back(row, 2 * id[q] + r, 1.0 / (h * h));
          for (int s = 0; s < 2; ++s) trip.emplace_back(row, 2 * id[q] + s, -pb.A[a][p](r, s) * (sgn / (2 * h)));
        }
      }
    }
  }
  Eigen::SparseMatrix<cplx> M(2 * N, 2 * N);
  M.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu(M);
  MatField out(g.size(), Mat2::Zero());
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXcd b(2 * N);
    for (long k = 0; k < N; ++k)
      for (int r = 0; r < 2; ++r) b(2 * k + r) = pb.F[interior[k]](r, c);
    Eigen::VectorXcd x = lu.solve(b);
    for (long k = 0; k < N; ++k)
      for (int r = 0; r < 2; ++r) out[interior[k]](r, c) = x(2 * k + r);
  }
  return out;
}

double max_diff(const MatField& a, const MatField& b) {
  double m = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) m = std::max(m, (a[p] - b[p]).norm());
  return m;
}

}  // namespace

TEST(Elliptic, ZeroSourceGivesZero) {
  auto g = NodeGrid::box(2, 16, 1.0);
  DriftProblem p = DriftProblem::sample(
      g, [&](const double* x, int a) { return Mat2(0.5 * drift_shape(x, a, 1.0)); },
      [](const double*) { return Mat2(Mat2::Zero()); });
  auto s = solve_drift_dirichlet(p);
  for (const auto& m : s.alpha) EXPECT_EQ(m.norm(), 0.0);
}

TEST(Elliptic, ManufacturedSolutionIsSecondOrder) {
  Mat2 xi = su2_basis(2);
  auto exact = [&](const double* x) { return Mat2(std::sin(kPi * x[0]) * std::sin(kPi * x[1]) * xi); };
  std::vector<double> err;
  for (int N : {16, 32, 64}) {
    auto g = NodeGrid::box(2, N, 1.0);
    DriftProblem p = DriftProblem::sample(
        g, [](const double*, int) { return Mat2(Mat2::Zero()); },
        [&](const double* x) { return Mat2(-2 * kPi * kPi * exact(x)); });
    auto s = solve_drift_dirichlet(p);
    std::vector<int> idx(2);
    double e = 0.0;
    for (std::size_t q = 0; q < g.size(); ++q) {
      g.unflatten(q, idx.data());
      double x[2] = {idx[0] * g.h[0], idx[1] * g.h[1]};
      e = std::max(e, (s.alpha[q] - exact(x)).norm());
    }
    err.push_back(e);
  }
  EXPECT_GE(std::log2(err[0] / err[1]), 1.8);
  EXPECT_GE(std::log2(err[1] / err[2]), 1.8);
}

TEST(Elliptic, AgreesWithDirectSparseSolve) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (int n : {2, 3}) {
    auto g = NodeGrid::box(n, n == 2 ? 24 : 10, 1.0);
    DriftProblem p = DriftProblem::sample(
        g, [&](const double* x, int a) { return Mat2(0.4 * drift_shape(x, a, 1.0)); },
        [&](const double*) {
          Mat2 m;
          m << cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng));
          return m;
        });
    DriftOptions opt;
    opt.tol = 1e-11;
    auto s = solve_drift_dirichlet(p, opt);
    EXPECT_LE(s.report.residual_l2, 10 * opt.tol * std::max(1.0, s.report.a_ln) * 100);
    EXPECT_LT(max_diff(s.alpha, direct_solve(p)), 1e-8);
  }
}

TEST(Elliptic, FixedPointIsUniqueAndContracts) {
  auto g = NodeGrid::box(2, 32, 1.0);
  DriftProblem p = DriftProblem::sample(
      g, [&](const double* x, int a) { return Mat2(0.8 * drift_shape(x, a, 1.0)); },
      [](const double* x) { return Mat2(std::exp(x[0]) * su2_basis(0)); });
  DriftOptions opt;
  opt.tol = 1e-10;
  auto a = solve_drift_dirichlet(p, opt);
  MatField init(g.size());
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  for (auto& m : init) m = nd(rng) * su2_basis(1) + nd(rng) * su2_basis(2);
  opt.initial = &init;
  auto b = solve_drift_dirichlet(p, opt);
  EXPECT_LT(max_diff(a.alpha, b.alpha), 10 * opt.tol);
  EXPECT_GE(a.report.envelope_r2, 0.95);
  EXPECT_LT(a.report.contraction, 1.0);
}

TEST(Elliptic, ProbeIsZeroWithoutDriftAndLinearInScale) {
  auto g = NodeGrid::box(2, 24, 1.0);
  EXPECT_EQ(contraction_probe(g, shape_field(g, 0.0)), 0.0);
  std::vector<double> ladder = {0.1, 0.2, 0.4, 0.6, 0.8, 1.0};
  auto cal = calibrate_eps_elliptic(g, shape_field(g, 1.0), ladder);
  EXPECT_GT(cal.slope, 0.0);
  for (std::size_t i = 0; i < ladder.size(); ++i) EXPECT_NEAR(cal.factors[i], cal.slope * ladder[i], 1e-9);
}

TEST(Elliptic, ProbeAndCalibrationAreScaleInvariant) {
  double r = 4.0;
  auto g1 = NodeGrid::box(2, 24, 1.0), g2 = NodeGrid::box(2, 24, 1.0 / r);
  // shape_field scales as 1/L, i.e. A_r(x) = r A(r x)
  double f1 = contraction_probe(g1, shape_field(g1, 3.0)), f2 = contraction_probe(g2, shape_field(g2, 3.0));
  EXPECT_NEAR(f1, f2, 0.05 * f1);
  EXPECT_NEAR(ln_norm(g1, shape_field(g1, 1.0), 2), ln_norm(g2, shape_field(g2, 1.0), 2), 1e-10);
  std::vector<double> ladder;
  for (int k = 1; k <= 8; ++k) ladder.push_back(1.25 * k);
  auto c1 = calibrate_eps_elliptic(g1, shape_field(g1, 1.0), ladder);
  auto c2 = calibrate_eps_elliptic(g2, shape_field(g2, 1.0), ladder);
  ASSERT_GT(c1.eps, 0.0);
  EXPECT_NEAR(c1.eps, c2.eps, 0.1 * c1.eps);
  // at the calibrated level the solver contracts
  double c_star = 0.0;
  for (std::size_t i = 0; i < ladder.size(); ++i)
    if (c1.norms[i] == c1.eps) c_star = ladder[i];
  DriftProblem p = DriftProblem::sample(
      g1, [&](const double* x, int a) { return Mat2(c_star * drift_shape(x, a, 1.0)); },
      [](const double* x) { return Mat2(x[0] * su2_basis(1)); });
  auto s = solve_drift_dirichlet(p);
  EXPECT_LE(s.report.contraction, 0.9);
}

TEST(Elliptic, LargeDriftFailsToContract) {
  auto g = NodeGrid::box(2, 16, 1.0);
  DriftProblem p = DriftProblem::sample(
      g, [&](const double* x, int a) { return Mat2(200.0 * drift_shape(x, a, 1.0)); },
      [](const double*) { return Mat2(su2_basis(0)); });
  try {
    solve_drift_dirichlet(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == Errc::ContractionFailure || e.code() == Errc::NonConvergence) << e.what();
  }
}

TEST(Elliptic, StageCount) {
  EXPECT_EQ(bootstrap_stage_count(2, 1.5, 1.5), 1);
  EXPECT_EQ(bootstrap_stage_count(4, 3.0, 3.0), 1);
  // n = 8, q = 6: 2n/(n-2) = 8/3 < 6 and n(q-2)/(2q) = 8/3, so m = 3
  EXPECT_EQ(bootstrap_stage_count(8, 6.0, 6.0), 3);
  // theta < q makes the lower bound strict: n = 6, q = 6 gives exactly 2
  EXPECT_EQ(bootstrap_stage_count(6, 6.0, 6.0), 2);
  EXPECT_THROW(bootstrap_stage_count(6, 6.0, 2.0), Error);
}

TEST(Elliptic, BootstrapMatchesManufacturedInterior) {
  Mat2 xi = su2_basis(1);
  auto exact = [&](const double* x) { return Mat2(std::sin(kPi * x[0]) * std::sin(kPi * x[1]) * xi); };
  std::vector<double> gaps;
  for (int N : {32, 64}) {
    auto g = NodeGrid::box(2, N, 1.0);
    DriftProblem p = DriftProblem::sample(
        g, [](const double*, int) { return Mat2(Mat2::Zero()); },
        [&](const double* x) { return Mat2(-2 * kPi * kPi * exact(x)); });
    IndexBox K{{N / 4, N / 4}, {3 * N / 4, 3 * N / 4}};
    BootstrapOptions opt;
    opt.q = 1.5;
    opt.theta = 1.5;
    auto rep = bootstrap_interior(p, K, opt);
    MatField ex(g.size());
    std::vector<int> idx(2);
    for (std::size_t q = 0; q < g.size(); ++q) {
      g.unflatten(q, idx.data());
      double x[2] = {idx[0] * g.h[0], idx[1] * g.h[1]};
      ex[q] = exact(x);
    }
    double want = wkp_norm(g, ex, K, 2, opt.q);
    gaps.push_back(std::abs(rep.interior_w2q - want) / want);
    for (const auto& st : rep.per_stage) EXPECT_LT(st.localization_error, 1e-8);
  }
  EXPECT_LT(gaps[1], 1e-3);
  EXPECT_GT(gaps[0] / gaps[1], 3.0);
}

TEST(Elliptic, BootstrapWithDriftAndTrivialCutoff) {
  auto g = NodeGrid::box(2, 32, 1.0);
  DriftProblem p = DriftProblem::sample(
      g, [&](const double* x, int a) { return Mat2(0.8 * drift_shape(x, a, 1.0)); },
      [](const double* x) { return Mat2(std::cos(3 * x[1]) * su2_basis(2)); });
  BootstrapOptions opt;
  opt.drift.tol = 1e-11;
  auto base = solve_drift_dirichlet(p, opt.drift);
  opt.trivial_cutoff = true;
  auto triv = bootstrap_interior(p, IndexBox::full(g), opt);
  EXPECT_LT(triv.per_stage.at(0).localization_error, 1e-10);
  opt.trivial_cutoff = false;
  opt.q = 1.5;
  opt.theta = 1.5;
  IndexBox K{{10, 10}, {22, 22}};
  auto rep = bootstrap_interior(p, K, opt);
  EXPECT_EQ(rep.stages, 1);
  EXPECT_EQ(rep.per_stage.size(), 2u);
  for (const auto& st : rep.per_stage) EXPECT_LT(st.localization_error, 1e-8);
  IndexBox tooBig{{2, 2}, {30, 30}};
  try {
    bootstrap_interior(p, tooBig, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MarginExhausted);
  }
  (void)base;
}
