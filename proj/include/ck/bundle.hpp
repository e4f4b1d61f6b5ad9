#pragma once

// Cocycles, connections, curvature, Yang-Mills energy and gauge changes over
// a cover.  Transition fields live on the pieces of each pairwise overlap; both
// orders (i,j) and (j,i) are stored.

#include <map>
#include <memory>
#include <vector>

#include "ck/form.hpp"
#include "ck/grid.hpp"

namespace ck {

struct Cocycle {
  CoverPtr cover;
  Group group = Group::U1;
  // (i, j) -> g_ij on each piece of overlap(min(i,j), max(i,j))
  std::map<std::pair<int, int>, std::vector<GroupField>> g;

  const std::vector<GroupField>& transition(int i, int j) const;
  // g_ij sampled at the points of `target`, which must lie in U_i and U_j.
  std::vector<Mat2> transition_on(int i, int j, const Patch& target) const;

  static Cocycle trivial(CoverPtr cover, Group group);
  // Fills g_ji = g_ij^{-1} from the i < j entries of `upper`.
  static Cocycle from_upper(CoverPtr cover, Group group, std::map<std::pair<int, int>, std::vector<GroupField>> upper);
};

using CocyclePtr = std::shared_ptr<const Cocycle>;

struct ConnectionForm {
  CocyclePtr cocycle;
  std::vector<FormField> locals;  // one 1-form per chart
};

struct GaugeField {
  CoverPtr cover;
  Group group = Group::U1;
  std::vector<GroupField> locals;

  static GaugeField identity(CoverPtr cover, Group group);
  static GaugeField sample(CoverPtr cover, Group group, const std::function<Mat2(const double*)>& f);
};

struct CurvatureForm {
  CoverPtr cover;
  std::vector<FormField> locals;
};

// max over triples and points of dist(g_ij g_jk, g_ik)
double cocycle_residual(const Cocycle& P);
// max over pairs and points of dist(g_ji, g_ij^{-1})
double inverse_residual(const Cocycle& P);
// max over overlap points of |A_j - (g_ij^{-1} dg_ij + g_ij^{-1} A_i g_ij)|
double gluing_residual(const ConnectionForm& A);

Cocycle apply_gauge_cocycle(const Cocycle& P, const GaugeField& rho);
// A^rho = rho^{-1} d rho + rho^{-1} A rho per chart; the result refers to the
// gauged cocycle.
ConnectionForm apply_gauge(const ConnectionForm& A, const GaugeField& rho);
GaugeField compose(const GaugeField& rho, const GaugeField& sigma);  // pointwise rho * sigma

CurvatureForm curvature(const ConnectionForm& A);
// sum_i integral psi_i |F_i|^q; `pou` defaults to the cover's partition.
double ym_energy(const CurvatureForm& F, double q, const PartitionOfUnity* pou = nullptr);

// A_a = sum_b psi_b g_ba^{-1} d g_ba
ConnectionForm pou_connection(const CocyclePtr& P);

// U(1) values embedded in the chosen group: z -> diag(z, conj z) for SU(2).
Mat2 embed_phase(Group g, cplx z);
Mat2 embed_imag(Group g, double a);

struct BuiltinBundle {
  CocyclePtr cocycle;
  ConnectionForm connection;
};

BuiltinBundle trivial_bundle(CoverPtr cover, Group group);
// Charge-k monopole on a sphere cover: charts whose core centre lies in the
// northern hemisphere carry A_N = -(ik/2)(1 - cos theta) d phi, the others
// A_S = (ik/2)(1 + cos theta) d phi, glued by e^{ik phi}.
BuiltinBundle charge_k_sphere(CoverPtr cover, Group group, int k);
// Constant flux k through the (x0, x1) plane: A_c = -2 pi i k x0 dx1 with x0
// unwrapped in chart c, glued by exp(2 pi i k s x1), s the unwrapping shift.
BuiltinBundle flux_k_torus(CoverPtr cover, Group group, int k);

// Adds a globally defined 1-form (coordinates of the base) to every chart.
// Only gauge-consistent when it commutes with the transitions (U(1), or
// identity transitions).
ConnectionForm add_global_form(const ConnectionForm& A, const std::function<Mat2(const double*, int)>& w);

}  // namespace ck
