#pragma once

// Topological class of a pair (P, A): refine until the chart curvatures are
// small, fix Coulomb gauges, glue, and read integer invariants off the
// resulting cocycle.

#include <optional>
#include <string>
#include <vector>

#include "ck/bundle.hpp"
#include "ck/coulomb.hpp"
#include "ck/norms.hpp"

namespace ck {

enum class Provenance { COULOMB_PIPELINE, DIRECT };
const char* provenance_name(Provenance p);

struct ChernResult {
  int value = 0;
  double raw = 0.0;        // (i / 2 pi) integral of F before rounding
  double deviation = 0.0;  // |raw - value|
};

// (i/2pi) sum_c integral psi_c F_c over the (mu, nu) coordinate plane.  On T^4
// the integral runs over the whole torus, which is the average over the
// parallel 2-torus slices.  Throws NonIntegral above `max_deviation`.
ChernResult chern_number_u1(const CurvatureForm& F, int mu = 0, int nu = 1, double max_deviation = 1e-6);

// (1/2pi) sum of phase increments along a closed loop of U(1) samples.
// Throws UnresolvableJump when an increment exceeds pi/2.
int winding_number(const std::vector<Mat2>& loop, Group g = Group::U1);

struct TopologyClass {
  Group group = Group::U1;
  // first Chern number (plane (0,1)); 0 for SU(2), where no integer is computed
  int invariant = 0;
  double deviation = 0.0;
  std::vector<int> plane_invariants;  // per coordinate plane, lexicographic (U(1))
  bool flat = true;                   // trivial class (U(1)), small transition gradient (SU(2))
  bool integer_determined = true;     // false for SU(2)
  double transition_gradient = 0.0;   // max |h^{-1} dh| over overlaps
  Provenance provenance = Provenance::DIRECT;
};

// Largest pointwise |h^{-1} dh| over all overlap pieces.
double max_transition_gradient(const Cocycle& h);
// Largest grid step of the base (angular on the sphere).
double grid_step(const BaseGrid& grid);

TopologyClass topology_class_of(const CocyclePtr& h, Provenance provenance = Provenance::DIRECT);

// Transfers (P, A) to a cover whose charts each sit inside a chart of P's
// cover; map[j] is that parent chart.
BuiltinBundle transfer_to_refinement(const Cocycle& P, const ConnectionForm& A, const CoverPtr& child,
                                     const std::vector<int>& map);

// Cover of the same family with `factor` times as many charts per split
// direction (sphere bands, torus axes).  Child margins stay inside the parent
// margins with 2 cells of clearance; throws MarginExhausted otherwise.
CoverPtr refine_cover(const Cover& parent, int factor);

struct PipelineOptions {
  double eps_coulomb = 1.0;
  int max_levels = 6;
  CoulombOptions coulomb;
};

struct PipelineResult {
  CoulombBundle bundle;
  CoverPtr cover;
  int level = 0;  // refinement factor 2^level over the input cover
  std::vector<double> chart_curvature;
  std::vector<CoulombResult> charts;
  double max_residual_interior = 0.0;
  double max_residual_boundary = 0.0;
  double max_estimate_ratio = 0.0;
  TopologyClass cls;
};

// Throws MarginExhausted when no admissible refinement brings every chart
// below eps_coulomb (curvature concentrating below the chart scale).
PipelineResult coulomb_bundle(const Cocycle& P, const ConnectionForm& A, const PipelineOptions& opt = {});

struct FlatnessVerdict {
  bool is_topologically_flat = false;
  double ym_value = 0.0;
  double delta_used = 0.0;
  bool ran_pipeline = false;
  double transition_gradient = 0.0;
};

double ym_critical(const ConnectionForm& A);  // YM_{n/2}

FlatnessVerdict flatness_detect(const Cocycle& P, const ConnectionForm& A, double delta, const PipelineOptions& opt);

// Relative discretization slack allowed below the Chern-Weil bound.
inline constexpr double kChernWeilSlack = 1e-3;

// Half the smallest YM_{n/2} over the nontrivial built-in bundles (charges or
// fluxes +-1, +-2) on `cover`, lowered by kChernWeilSlack.
double calibrate_delta(const CoverPtr& cover, Group group);

// Sum_c psi_c |F_c|^{n/2} as a field on the whole base.
ScalarField curvature_density(const CurvatureForm& F);

struct StabilizationStep {
  double ym = 0.0;
  std::string status = "ok";  // or the error code of the pipeline failure
  std::optional<TopologyClass> cls;
  int level = -1;
  double c0_to_previous = -1.0;  // sup distance of successive Coulomb cocycles, -1 if not comparable
};

struct StabilizationReport {
  std::vector<StabilizationStep> steps;
  std::vector<EquiintegrabilityRow> profile;
  std::vector<double> fractions;
  bool stabilized = false;
  int s0 = -1;  // first index from which the class is constant
  bool bubbling = false;
};

StabilizationReport stabilization_experiment(const std::vector<BuiltinBundle>& seq,
                                             const std::vector<double>& fractions, const PipelineOptions& opt);

// Charge-1 monopole with curvature squeezed into a polar cap of radius ~ 1/nu
// (stereographic dilation tan(theta'/2) = nu tan(theta/2)).
BuiltinBundle concentrating_monopole(const CoverPtr& cover, Group group, double nu);
// Charge-1 monopole plus a smooth global form of amplitude `amp`.
BuiltinBundle perturbed_monopole(const CoverPtr& cover, Group group, double amp);

}  // namespace ck
