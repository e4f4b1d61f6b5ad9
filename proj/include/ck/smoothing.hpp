#pragma once

// Smoothing of group-valued maps, cocycle repair and connection smoothing on
// a fixed bundle.

#include <optional>
#include <vector>

#include "ck/bundle.hpp"

namespace ck {

// Sup-oscillation allowed for log lifts and extension quotients (radians).
inline constexpr double kDeltaG = 0.4;

// Mollifies g in the algebra: at each point p the window values are lifted by
// log(g(p)^{-1} g(q)), averaged with the normalized kernel
// exp(-1 / (1 - r^2 / width^2)) over |x_q - x_p| < width, and re-exponentiated
// around g(p).  Points with constraint[p] set keep g(p) bit-exactly.  Throws
// OscillationTooLarge when a window holds a lift larger than kDeltaG.
GroupField mollify_group_map(const GroupField& g, double width, const std::vector<bool>* constraint = nullptr);

// Patching: F~ = exp(psi log F), equal to F where psi = 1 and to the identity
// where psi = 0.  Throws OutsideInjectivityDomain if F leaves nbhd where psi > 0.
// Extension (base given): f~ = g exp(psi log(g^{-1} f)), equal to f where
// psi = 1 and to g where psi = 0.  Throws SmallnessViolated if
// |log(g^{-1} f)| > kDeltaG where psi > 0.  Values of F are read only where
// psi > 0.
GroupField patch_extend(const GroupField& F, const std::vector<double>& psi, const GroupField* base = nullptr,
                        const IdentityNeighborhood* nbhd = nullptr);

// Smooth cutoff on chart depth: 0 at depth 0, 1 from depth `cells` on.
double depth_cutoff(int depth, int cells);
// Cells from the point to the nearest margin side of the chart (a large value
// when the chart has no margin sides).
int chart_depth(const Chart& chart, const int* local_idx);

struct RepairResult {
  CocyclePtr cocycle;  // exact cocycle on the shrunk cover
  CoverPtr cover;      // shrink_cover(input cover, shrink)
  int stages = 0;      // inner induction steps that used a quotient
  double max_quotient_angle = 0.0;
};

// Nested induction over charts r (outer) and l < r (inner).  h_0r = g~_0r; for
// l > 0, h_lr = h_il^{-1} h_ir where the point lies in an earlier chart i
// (deepest one), blended into g~_lr by the depth cutoff of chart i.  The
// quotients agree on every chart of the shrunk cover, so the output satisfies
// the cocycle identity there exactly.  Throws SmallnessViolated when
// cocycle_residual(g~) > kDeltaG or a quotient strays more than kDeltaG from
// g~.
RepairResult repair_cocycle(const Cocycle& approx, int shrink = 2);

// Mollifies every transition piece (i < j) and refills inverses.
Cocycle mollify_cocycle(const Cocycle& P, double width);

struct OverlapDistance {
  int i = 0, j = 0;
  double sup = 0.0;
  double w1n = 0.0;  // |u|_{L^n} + |du|_{L^n}, u = log(g~^{-1} h)
};

struct SmoothingReport {
  std::vector<OverlapDistance> distances;
  double max_sup = 0.0;
  double max_w1n = 0.0;
  double residual_before = 0.0;
  double residual_after = 0.0;
  bool constraint_preserved = true;
};

// Distances are measured on the overlaps of the repaired cover.
SmoothingReport smoothing_report(const Cocycle& approx, const RepairResult& repaired);

// B_j = sum_l psi_l [g_lj^{-1} d g_lj + g_lj^{-1} A~_l g_lj] with psi from the
// cover's partition of unity.
ConnectionForm smooth_connection_on_bundle(const CocyclePtr& P, const std::vector<FormField>& approx);

}  // namespace ck
