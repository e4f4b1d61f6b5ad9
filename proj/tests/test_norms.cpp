#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <random>

#include "ck/error.hpp"
#include "ck/norms.hpp"

using namespace ck;

namespace {

// Lorentz quasinorm by tanh-sinh quadrature of t^{theta-1} mu(t)^{theta/s}
// between consecutive distinct sample values, mu evaluated by direct counting.
double lorentz_oracle(const std::vector<double>& f, const std::vector<double>& w, double s, double theta) {
  std::vector<double> br(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) br[i] = std::abs(f[i]);
  br.push_back(0.0);
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  auto mu = [&](double t) {
    double m = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
      if (std::abs(f[i]) > t) m += w[i];
    return m;
  };
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    double m = mu(0.5 * (br[k] + br[k + 1]));
    boost::math::quadrature::tanh_sinh<double> ts;
    total += std::pow(m, theta / s) * ts.integrate([&](double t) { return std::pow(t, theta - 1.0); }, br[k], br[k + 1]);
  }
  return std::pow(total, 1.0 / theta);
}

}  // namespace

TEST(Norms, ConstantHasUnitNorm) {
  auto P = global_patch(BaseGrid::torus({16, 16}));
  ScalarField one = ScalarField::sample(P, [](const double*) { return 1.0; });
  for (double p : {1.0, 2.0, 3.5, kInfinity}) EXPECT_NEAR(lp_norm(one, p), 1.0, 1e-13);
  EXPECT_THROW(lp_norm(one, 0.5), Error);
}

TEST(Norms, IndicatorLorentzClosedForm) {
  auto P = global_patch(BaseGrid::torus({16, 16}));
  ScalarField ind = ScalarField::sample(P, [](const double* x) { return x[0] < 0.25 && x[1] < 0.5 ? 1.0 : 0.0; });
  double E = 0.125;
  for (double s : {1.5, 2.0, 4.0})
    for (double th : {1.0, 2.0, 3.0})
      EXPECT_NEAR(lorentz_quasinorm(ind.v, P->weights(), s, th), std::pow(1.0 / th, 1.0 / th) * std::pow(E, 1.0 / s),
                  1e-14);
}

TEST(Norms, LorentzAgreesWithQuadratureOracle) {
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> ed(1.0);
  std::uniform_real_distribution<double> ud(0.5, 1.5);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> f(60), w(60);
    for (int i = 0; i < 60; ++i) {
      f[i] = (i % 7 == 0) ? f[i / 2] : ed(rng);
      w[i] = ud(rng) / 60.0;
    }
    double s = 1.2 + 0.3 * t, th = 1.0 + 0.25 * (t % 5);
    EXPECT_NEAR(lorentz_quasinorm(f, w, s, th), lorentz_oracle(f, w, s, th), 1e-11);
  }
}

TEST(Norms, LorentzDiagonalIsScaledLp) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  auto P = global_patch(BaseGrid::torus({10, 10}));
  for (int t = 0; t < 100; ++t) {
    ScalarField f = ScalarField::zeros(P);
    for (auto& x : f.v) x = nd(rng);
    double p = 1.5 + (t % 4);
    EXPECT_NEAR(lorentz_quasinorm(f.v, P->weights(), p, p), std::pow(1.0 / p, 1.0 / p) * lp_norm(f, p),
                1e-12 * lp_norm(f, p));
  }
}

TEST(Norms, LorentzIsHomogeneous) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  std::vector<double> f(50), w(50, 0.02), g(50);
  for (auto& x : f) x = nd(rng);
  for (double c : {-3.0, 0.1, 7.0}) {
    for (int i = 0; i < 50; ++i) g[i] = c * f[i];
    EXPECT_NEAR(lorentz_quasinorm(g, w, 2.5, 1.5), std::abs(c) * lorentz_quasinorm(f, w, 2.5, 1.5), 1e-13);
  }
  EXPECT_THROW(lorentz_quasinorm(f, w, 1.0, 2.0), Error);
  EXPECT_THROW(lorentz_quasinorm(f, w, 2.0, 0.5), Error);
}

TEST(Norms, EquiintegrabilityProfiles) {
  auto P = global_patch(BaseGrid::torus({32, 32}));
  std::vector<double> fr = {0.0, 0.01, 0.1, 0.25, 0.5, 1.0};
  auto rows = equiintegrability_profile({ScalarField::sample(P, [](const double*) { return 1.0; })}, fr);
  for (std::size_t i = 0; i < fr.size(); ++i) EXPECT_NEAR(rows[i].mass, fr[i], 1e-13);

  // unit-mass bumps supported on squares of side 1/nu
  std::vector<ScalarField> seq;
  for (int nu = 1; nu <= 16; nu *= 2)
    seq.push_back(ScalarField::sample(P, [nu](const double* x) {
      return (x[0] < 1.0 / nu && x[1] < 1.0 / nu) ? double(nu * nu) : 0.0;
    }));
  auto conc = equiintegrability_profile(seq, fr);
  for (std::size_t i = 1; i < fr.size(); ++i) {
    EXPECT_GE(conc[i].mass, conc[i - 1].mass);
    if (fr[i] >= 1.0 / 256) EXPECT_NEAR(conc[i].mass, 1.0, 1e-12);
  }
  // never exceeds the L1 norm, reached at full volume
  for (const auto& f : seq) {
    auto r = equiintegrability_profile({f}, fr);
    for (const auto& row : r) EXPECT_LE(row.mass, lp_norm(f, 1.0) + 1e-13);
    EXPECT_NEAR(r.back().mass, lp_norm(f, 1.0), 1e-13);
  }
  EXPECT_THROW(equiintegrability_profile({}, fr), Error);
}
