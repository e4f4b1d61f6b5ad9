#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ck/error.hpp"
#include "ck/grid.hpp"

using namespace ck;

namespace {

// Sum of psi_c over all charts, accumulated at global lattice points.
std::vector<double> pou_sum(const Cover& cover) {
  const BaseGrid& g = cover.grid();
  std::vector<double> s(g.num_points(), 0.0);
  std::vector<int> loc(g.n);
  for (const Chart& c : cover.charts()) {
    const Patch& P = *c.patch;
    for (std::size_t p = 0; p < P.size(); ++p) {
      P.unflatten(p, loc.data());
      std::size_t lin = 0;
      for (int a = 0; a < g.n; ++a) lin = lin * g.dims[a] + P.global(a, loc[a]);
      s[lin] += cover.pou().weights[c.id][p];
    }
  }
  return s;
}

double apply_stencil(const Patch& P, int a, int i, const std::vector<double>& f) {
  Stencil s = P.stencil(a, i);
  double d = 0.0;
  int n = P.axis(a).count;
  for (int k = 0; k < s.k; ++k) d += s.c[k] * f[((i + s.off[k]) % n + n) % n];
  return d;
}

}  // namespace

TEST(Grid, SphereAreaIsExact) {
  for (int n : {8, 32, 128}) {
    auto g = BaseGrid::sphere(n, n);
    EXPECT_NEAR(g->total_volume(), 4.0 * std::numbers::pi, 1e-12) << n;
  }
  auto t = BaseGrid::torus({16, 24});
  EXPECT_NEAR(t->total_volume(), 1.0, 1e-14);
}

TEST(Grid, RejectsCoarseGrids) {
  EXPECT_THROW(BaseGrid::torus({4, 16}), Error);
  EXPECT_THROW(BaseGrid::sphere(7, 16), Error);
  EXPECT_THROW(BaseGrid::torus({8, 8, 8}), Error);
}

TEST(Grid, ParamWeightsIntegrateTheParameterDomain) {
  auto g = BaseGrid::sphere(16, 32);
  auto P = global_patch(g);
  double s = 0.0;
  for (std::size_t p = 0; p < P->size(); ++p) s += P->param_weight(p);
  EXPECT_NEAR(s, 2.0 * std::numbers::pi * std::numbers::pi, 1e-12);
}

TEST(Grid, OpenStencilsAreSecondOrderExact) {
  auto g = BaseGrid::torus({32, 32});
  Patch P(g, Box{{3, 0}, {12, 32}});
  EXPECT_FALSE(P.axis(0).periodic);
  EXPECT_TRUE(P.axis(1).periodic);
  std::vector<double> f(12), df(12);
  for (int i = 0; i < 12; ++i) {
    double x = P.coord(0, i);
    f[i] = 1.0 + 2.0 * x - 3.0 * x * x;
    df[i] = 2.0 - 6.0 * x;
  }
  for (int i = 0; i < 12; ++i) EXPECT_NEAR(apply_stencil(P, 0, i, f), df[i], 1e-11) << i;
}

TEST(Grid, PoleClosureSummationByParts) {
  // sum_pw (f Dg + g Df) along theta equals the boundary term at the open end
  // only: pole ends contribute nothing.
  auto g = BaseGrid::sphere(16, 16);
  Patch P(g, Box{{0, 0}, {17, 16}});
  EXPECT_TRUE(P.axis(0).pole_lo && P.axis(0).pole_hi);
  int n = 17;
  std::vector<double> f(n), h(n);
  for (int i = 0; i < n; ++i) {
    f[i] = std::cos(0.3 * i) + 0.1 * i;
    h[i] = std::sin(0.2 * i * i);
  }
  double s = 0.0, ht = P.axis(0).h;
  for (int i = 0; i < n; ++i) {
    double w = (i == 0 || i == n - 1) ? ht / 2 : ht;
    s += w * (f[i] * apply_stencil(P, 0, i, h) + h[i] * apply_stencil(P, 0, i, f));
  }
  EXPECT_NEAR(s, f[n - 1] * h[n - 1] - f[0] * h[0], 1e-12);
}

TEST(Grid, IntersectionAcrossTheSeamSplitsIntoPieces) {
  auto g = BaseGrid::torus({16, 16});
  Box a{{-4, 0}, {14, 16}}, b{{8, 0}, {12, 16}};
  auto pieces = intersect_boxes(*g, a, b);
  ASSERT_EQ(pieces.size(), 2u);
  std::size_t pts = 0;
  for (auto& p : pieces) pts += box_points(p);
  // a covers 12..15,0..9 ; b covers 8..15,0..3 -> {8,9} and {12..15,0..3}
  EXPECT_EQ(pts, (2u + 8u) * 16u);
}

TEST(Grid, TorusCoverPartitionsAndOverlaps) {
  auto g = BaseGrid::torus({32, 32});
  auto cover = torus_cover(g, {3, 1}, 4);
  EXPECT_EQ(cover->size(), 3);
  EXPECT_EQ(cover->pairs().size(), 3u);
  std::size_t core = 0;
  for (auto& c : cover->charts()) core += box_points(c.core);
  EXPECT_EQ(core, g->num_points());
  for (const auto& [k, ov] : cover->pairs())
    for (const auto& piece : ov)
      for (std::size_t q = 0; q < piece.patch->size(); ++q) {
        const Patch& A = *cover->chart(k.first).patch;
        const Patch& B = *cover->chart(k.second).patch;
        std::vector<int> la(2), lb(2), lp(2);
        A.unflatten(piece.idx[0][q], la.data());
        B.unflatten(piece.idx[1][q], lb.data());
        piece.patch->unflatten(q, lp.data());
        for (int a = 0; a < 2; ++a) {
          EXPECT_EQ(A.global(a, la[a]), piece.patch->global(a, lp[a]));
          EXPECT_EQ(B.global(a, lb[a]), piece.patch->global(a, lp[a]));
        }
      }
}

TEST(Grid, PartitionOfUnitySumsToOne) {
  std::vector<CoverPtr> covers = {
      torus_cover(BaseGrid::torus({32, 32}), {3, 1}, 4),
      torus_cover(BaseGrid::torus({48, 48}), {3, 3}, 6),
      sphere_cover(BaseGrid::sphere(64, 64), 2, 8),
      sphere_cover(BaseGrid::sphere(64, 64), 4, 4),
      torus_cover(BaseGrid::torus({24, 8, 8, 8}), {3, 1, 1, 1}, 4),
  };
  for (const auto& c : covers) {
    for (double s : pou_sum(*c)) ASSERT_NEAR(s, 1.0, 1e-13) << c->label();
    for (const auto& w : c->pou().weights)
      for (double x : w) ASSERT_GE(x, 0.0);
  }
}

TEST(Grid, BumpVanishesOnOuterTwoLayers) {
  auto cover = torus_cover(BaseGrid::torus({32, 32}), {3, 1}, 5);
  const Chart& c = cover->chart(1);
  const auto& w = cover->pou().weights[1];
  std::vector<int> loc(2);
  for (std::size_t p = 0; p < c.patch->size(); ++p) {
    c.patch->unflatten(p, loc.data());
    int n = c.patch->axis(0).count;
    if (loc[0] < 2 || loc[0] >= n - 2) EXPECT_EQ(w[p], 0.0);
  }
}

TEST(Grid, DefaultCoversHaveModeratePartitionConstant) {
  auto s = sphere_cover(BaseGrid::sphere(128, 128), 2, 16);
  EXPECT_LE(s->pou().c_part, 10.0);
  auto t = torus_cover(BaseGrid::torus({64, 64}), {3, 1}, 8);
  EXPECT_LE(t->pou().c_part, 10.0);
  // the cosine profile gives a different but still valid partition
  auto cos_pou = build_partition_of_unity(*t, BumpProfile::Cosine);
  std::size_t row = t->chart(0).patch->stride(0);
  EXPECT_GT(std::abs(cos_pou.weights[0][5 * row] - t->pou().weights[0][5 * row]), 1e-6);
}

TEST(Grid, SphereCoverLevels) {
  auto g = BaseGrid::sphere(64, 64);
  EXPECT_EQ(sphere_cover(g, 2, 8)->size(), 2);
  EXPECT_EQ(sphere_cover(g, 4, 4)->size(), 2 + 2 * 8);
  try {
    sphere_cover(g, 32, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MarginExhausted);
  }
}

TEST(Grid, GapInCoverIsDetected) {
  auto g = BaseGrid::torus({16, 16});
  std::vector<Chart> charts(1);
  charts[0].box = Box{{0, 0}, {10, 16}};
  charts[0].core = charts[0].box;
  charts[0].margin = 4;
  charts[0].margin_side = {{true, true}, {false, false}};
  charts[0].patch = std::make_shared<Patch>(g, charts[0].box);
  try {
    Cover c(g, charts, "gap");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CoverGap);
  }
}

TEST(Grid, ShrinkAndRefinement) {
  auto cover = torus_cover(BaseGrid::torus({48, 48}), {3, 3}, 6);
  auto small = shrink_cover(cover, 2);
  ASSERT_TRUE(small->refinement_of().has_value());
  EXPECT_EQ(small->chart(0).margin, 4);
  auto map = refinement_map(*small, *cover, 2);
  for (int j = 0; j < small->size(); ++j) EXPECT_EQ(map[j], j);
  for (double s : pou_sum(*small)) ASSERT_NEAR(s, 1.0, 1e-13);
  EXPECT_THROW(shrink_cover(cover, 5), Error);
  // a cover is not a refinement of a strictly finer one
  auto fine = torus_cover(BaseGrid::torus({48, 48}), {6, 6}, 4);
  EXPECT_THROW(refinement_map(*cover, *fine, 2), Error);
  EXPECT_NO_THROW(refinement_map(*fine, *cover, 2));
}
