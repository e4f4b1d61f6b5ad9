#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ck/error.hpp"
#include "ck/topology.hpp"

using namespace ck;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Mat2> phase_loop(int k, int N, double shift = 0.0) {
  std::vector<Mat2> out;
  for (int j = 0; j < N; ++j) out.push_back(embed_phase(Group::U1, std::polar(1.0, k * 2 * kPi * j / N + shift)));
  return out;
}

PipelineOptions u1_options() {
  PipelineOptions o;
  o.eps_coulomb = kPi;
  return o;
}

// smooth random gauge, different on every chart
GaugeField random_gauge(const CoverPtr& cover, Group g, std::uint64_t seed, double amp) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GaugeField rho;
  rho.cover = cover;
  rho.group = g;
  for (int c = 0; c < cover->size(); ++c) {
    double a[3] = {amp * u(rng), amp * u(rng), amp * u(rng)}, ph = kPi * u(rng);
    rho.locals.push_back(GroupField::sample(
        cover->chart(c).patch, g,
        [&](const double* x) {
          double v[3] = {a[0] * std::sin(x[0] + ph), a[1] * std::cos(x[1] - ph), a[2] * std::sin(x[0] + x[1])};
          return g == Group::U1 ? expm(g, embed_imag(g, v[0] + v[1])) : expm(g, algebra_from_coords(g, v));
        },
        c));
  }
  return rho;
}

}  // namespace

TEST(Topology, WindingNumbers) {
  EXPECT_EQ(winding_number(phase_loop(0, 64, 0.3)), 0);
  for (int k = -3; k <= 3; ++k) EXPECT_EQ(winding_number(phase_loop(k, 64)), k);
  auto a = phase_loop(2, 64, 0.1), b = phase_loop(-3, 64, 1.0), ab = a, ainv = a;
  for (std::size_t j = 0; j < a.size(); ++j) {
    ab[j] = a[j] * b[j];
    ainv[j] = group_inv(a[j]);
  }
  EXPECT_EQ(winding_number(ab), winding_number(a) + winding_number(b));
  EXPECT_EQ(winding_number(ainv), -winding_number(a));
  try {
    winding_number(phase_loop(20, 64));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnresolvableJump);
  }
}

TEST(Topology, ChernOfBuiltins) {
  auto sphere = sphere_cover(BaseGrid::sphere(64, 64), 4, 6);
  auto torus = torus_cover(BaseGrid::torus({64, 64}), {3, 2}, 6);
  EXPECT_EQ(chern_number_u1(curvature(trivial_bundle(torus, Group::U1).connection)).value, 0);
  for (int k = -2; k <= 2; ++k) {
    auto s = chern_number_u1(curvature(charge_k_sphere(sphere, Group::U1, k).connection));
    EXPECT_EQ(s.value, k);
    EXPECT_LE(s.deviation, 1e-6);
    auto t = chern_number_u1(curvature(flux_k_torus(torus, Group::U1, k).connection));
    EXPECT_EQ(t.value, k);
    EXPECT_LE(t.deviation, 1e-6);
  }
}

TEST(Topology, ChernIsRefinementInvariant) {
  for (int N : {32, 64, 128}) {
    auto cover = sphere_cover(BaseGrid::sphere(N, N), 4, N / 8);
    EXPECT_EQ(chern_number_u1(curvature(perturbed_monopole(cover, Group::U1, 0.4).connection)).value, 1);
  }
}

TEST(Topology, BrokenGluingIsNotIntegral) {
  auto cover = sphere_cover(BaseGrid::sphere(32, 32), 2, 6);
  auto b = charge_k_sphere(cover, Group::U1, 1);
  for (auto& a : b.connection.locals) a *= 0.7;
  try {
    chern_number_u1(curvature(b.connection));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonIntegral);
  }
}

TEST(Topology, FourTorusPlanes) {
  auto cover = torus_cover(BaseGrid::torus({24, 8, 8, 8}), {3, 1, 1, 1}, 4);
  auto cls = topology_class_of(flux_k_torus(cover, Group::U1, 2).cocycle);
  ASSERT_EQ(cls.plane_invariants.size(), 6u);
  EXPECT_EQ(cls.plane_invariants[0], 2);
  for (int i = 1; i < 6; ++i) EXPECT_EQ(cls.plane_invariants[i], 0);
  EXPECT_FALSE(cls.flat);
}

TEST(Topology, PipelineOnTrivialAndMonopole) {
  auto torus = torus_cover(BaseGrid::torus({48, 48}), {3, 3}, 6);
  auto t = trivial_bundle(torus, Group::U1);
  auto r0 = coulomb_bundle(*t.cocycle, t.connection, u1_options());
  EXPECT_EQ(r0.cls.invariant, 0);
  EXPECT_TRUE(r0.cls.flat);
  EXPECT_EQ(r0.cls.provenance, Provenance::COULOMB_PIPELINE);

  auto cover = sphere_cover(BaseGrid::sphere(64, 64), 2, 8);
  auto m = charge_k_sphere(cover, Group::U1, 1);
  // loose threshold keeps the two caps, where the winding oracle applies
  PipelineOptions loose = u1_options();
  loose.eps_coulomb = 10.0;
  auto r1 = coulomb_bundle(*m.cocycle, m.connection, loose);
  EXPECT_EQ(r1.level, 0);
  EXPECT_EQ(r1.cls.invariant, 1);
  const GroupField& h = r1.bundle.cocycle->transition(0, 1).at(0);
  std::vector<Mat2> loop;
  for (int j = 0; j < h.patch->axis(1).count; ++j) {
    int loc[2] = {0, j};
    loop.push_back(h.v[h.patch->flatten(loc)]);
  }
  EXPECT_EQ(std::abs(winding_number(loop)), 1);
  // the calibrated threshold refines the caps
  auto r2 = coulomb_bundle(*m.cocycle, m.connection, u1_options());
  EXPECT_GE(r2.level, 1);
  EXPECT_EQ(r2.cls.invariant, 1);
  for (double c : r2.chart_curvature) EXPECT_LE(c, kPi);
  EXPECT_LE(r2.max_residual_interior, 1e-8);
}

TEST(Topology, ClassIndependentOfConnectionAndGauge) {
  auto cover = sphere_cover(BaseGrid::sphere(64, 64), 4, 6);
  auto a = charge_k_sphere(cover, Group::U1, 1);
  auto b = perturbed_monopole(cover, Group::U1, 0.5);
  int ca = coulomb_bundle(*a.cocycle, a.connection, u1_options()).cls.invariant;
  int cb = coulomb_bundle(*b.cocycle, b.connection, u1_options()).cls.invariant;
  EXPECT_EQ(ca, 1);
  EXPECT_EQ(cb, 1);
  for (std::uint64_t s = 0; s < 20; ++s) {
    ConnectionForm g = apply_gauge(b.connection, random_gauge(cover, Group::U1, 100 + s, 1.5));
    auto r = coulomb_bundle(*g.cocycle, g, u1_options());
    EXPECT_EQ(r.cls.invariant, 1) << s;
  }
}

TEST(Topology, FlatCocycleGivesZero) {
  // locally constant transitions: constant phases between strips
  auto cover = torus_cover(BaseGrid::torus({48, 16}), {3, 1}, 6);
  std::map<std::pair<int, int>, std::vector<GroupField>> upper;
  for (const auto& [key, ov] : cover->pairs())
    for (const auto& piece : ov)
      upper[key].push_back(GroupField::sample(piece.patch, Group::U1, [&](const double*) {
        return embed_phase(Group::U1, std::polar(1.0, 0.7 * (key.first + 1) - 0.3 * key.second));
      }));
  // the phases satisfy the cocycle identity only if they come from 0-cochains
  auto P = std::make_shared<Cocycle>(Cocycle::from_upper(cover, Group::U1, std::move(upper)));
  GaugeField c = GaugeField::sample(cover, Group::U1, [](const double*) { return Mat2(Mat2::Identity()); });
  for (int i = 0; i < cover->size(); ++i)
    for (auto& v : c.locals[i].v) v = embed_phase(Group::U1, std::polar(1.0, 0.9 * i));
  Cocycle flat = apply_gauge_cocycle(Cocycle::trivial(cover, Group::U1), c);
  auto Pf = std::make_shared<Cocycle>(flat);
  EXPECT_LT(cocycle_residual(*Pf), 1e-14);
  ConnectionForm A = pou_connection(Pf);
  EXPECT_LT(ym_critical(A), 1e-10);
  auto r = coulomb_bundle(*Pf, A, u1_options());
  EXPECT_TRUE(r.cls.flat);
  EXPECT_EQ(r.cls.invariant, 0);
  (void)P;
}

TEST(Topology, FlatnessAndEnergyGap) {
  auto cover = sphere_cover(BaseGrid::sphere(64, 64), 4, 6);
  double delta = calibrate_delta(cover, Group::U1);
  EXPECT_GT(delta, 0.0);
  auto t = trivial_bundle(cover, Group::U1);
  auto v0 = flatness_detect(*t.cocycle, t.connection, delta, u1_options());
  EXPECT_TRUE(v0.is_topologically_flat);
  EXPECT_EQ(v0.ym_value, 0.0);
  // small random connection on the trivial bundle
  auto small = add_global_form(t.connection, [](const double* x, int c) {
    return embed_imag(Group::U1, 1e-3 * std::sin(x[0]) * std::cos(x[1] + c));
  });
  auto v1 = flatness_detect(*t.cocycle, small, delta, u1_options());
  EXPECT_TRUE(v1.is_topologically_flat);
  EXPECT_LE(v1.transition_gradient, 10 * grid_step(cover->grid()));
  std::vector<BuiltinBundle> charge1 = {charge_k_sphere(cover, Group::U1, 1), perturbed_monopole(cover, Group::U1, 0.5),
                                        concentrating_monopole(cover, Group::U1, 2.0)};
  for (const auto& b : charge1) {
    auto v = flatness_detect(*b.cocycle, b.connection, delta, u1_options());
    EXPECT_GE(v.ym_value, 2 * kPi * (1 - 1e-3));
    EXPECT_FALSE(v.is_topologically_flat);
    EXPECT_GE(v.ym_value, 2 * delta);
  }
  // the calibration population itself is separated by a factor of 2
  for (int k : {-2, -1, 1, 2}) EXPECT_GE(ym_critical(charge_k_sphere(cover, Group::U1, k).connection), 2 * delta);
  EXPECT_LE(v0.ym_value * 2, delta);
}

TEST(Topology, StabilizationWithoutConcentration) {
  auto cover = sphere_cover(BaseGrid::sphere(64, 64), 2, 8);
  std::vector<BuiltinBundle> seq;
  for (int nu = 1; nu <= 6; ++nu) seq.push_back(perturbed_monopole(cover, Group::U1, 0.5 / nu));
  std::vector<double> fr = {0.001, 0.01, 0.1};
  auto rep = stabilization_experiment(seq, fr, u1_options());
  EXPECT_TRUE(rep.stabilized);
  EXPECT_EQ(rep.s0, 0);
  EXPECT_FALSE(rep.bubbling);
  for (const auto& st : rep.steps) {
    ASSERT_TRUE(st.cls.has_value()) << st.status;
    EXPECT_EQ(st.cls->invariant, 1);
  }
  // no curvature mass concentrates on small sets
  EXPECT_LT(rep.profile[0].mass, 0.05 * rep.steps[0].ym);
  for (std::size_t v = 1; v < rep.steps.size(); ++v) EXPECT_GE(rep.steps[v].c0_to_previous, 0.0);
}

TEST(Topology, ConcentrationTriggersBubbling) {
  auto cover = sphere_cover(BaseGrid::sphere(64, 64), 2, 8);
  std::vector<BuiltinBundle> seq;
  for (int nu : {1, 2, 4, 8, 16}) seq.push_back(concentrating_monopole(cover, Group::U1, nu));
  auto rep = stabilization_experiment(seq, {0.001, 0.01}, u1_options());
  EXPECT_TRUE(rep.bubbling);
  ASSERT_TRUE(rep.steps[0].cls.has_value());
  EXPECT_EQ(rep.steps[0].cls->invariant, 1);
  EXPECT_EQ(rep.steps.back().status, "MarginExhausted");
  // most of the unit flux sits on one percent of the sphere
  EXPECT_GT(rep.profile[1].mass, 0.5 * 2 * kPi);
  EXPECT_EQ(rep.profile[1].argmax, 4);
}

TEST(Topology, CoulombCalibration) {
  auto P = std::make_shared<const Patch>(BaseGrid::torus({64, 64}), Box{{0, 0}, {25, 25}});
  auto u1 = calibrate_coulomb(P, Group::U1);
  EXPECT_NEAR(u1.eps_coulomb, kPi, 1e-9);
  auto su2 = calibrate_coulomb(P, Group::SU2);
  EXPECT_GT(su2.eps_coulomb, 0.0);
  EXPECT_GT(su2.c_coulomb, 0.0);
}
