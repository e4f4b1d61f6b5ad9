#pragma once

// Weighted L^p, Lorentz L^{s,theta} quasinorms and equiintegrability profiles.
// All reductions run in a fixed order so results are bit-reproducible.

#include <limits>
#include <vector>

#include "ck/form.hpp"

namespace ck {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// ||f||_p with quadrature weights w; p may be kInfinity.  Throws BadExponent for p < 1.
double lp_norm(const std::vector<double>& f, const std::vector<double>& w, double p);
double lp_norm(const FormField& a, double p);
double lp_norm(const ScalarField& f, double p);

// (integral_0^inf (t mu(|f| > t)^{1/s})^theta dt/t)^{1/theta}, evaluated exactly on
// the step distribution of the samples.
double lorentz_quasinorm(const std::vector<double>& f, const std::vector<double>& w, double s, double theta);
double lorentz_quasinorm(const FormField& a, double s, double theta);

struct EquiintegrabilityRow {
  double fraction = 0.0;  // delta as a fraction of the total volume
  double mass = 0.0;      // sup over the sequence of the largest mass on a set of that volume
  int argmax = -1;        // index of the sequence member attaining it
};

// Largest mass of |f| over sets of volume <= fraction * volume, per fraction,
// maximized over the sequence.  Cells may be taken fractionally, which makes
// the greedy descending sweep exact.  Throws EmptySequence.
std::vector<EquiintegrabilityRow> equiintegrability_profile(const std::vector<ScalarField>& seq,
                                                            const std::vector<double>& fractions);
double max_mass(const std::vector<double>& f, const std::vector<double>& w, double volume);

}  // namespace ck
