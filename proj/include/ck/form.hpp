#pragma once

// Algebra-valued differential forms, group-valued fields and scalar fields on
// patches.  Components of a k-form are indexed by strictly increasing
// multi-indices in lexicographic order: for 2-forms (0,1),(0,2),...,(n-2,n-1).

#include <functional>
#include <vector>

#include "ck/grid.hpp"
#include "ck/lie.hpp"

namespace ck {

int num_components(int n, int degree);
// Index pairs (mu < nu) of 2-form components, lexicographic.
std::vector<std::array<int, 2>> two_form_pairs(int n);
int pair_index(int n, int mu, int nu);

struct ScalarField {
  PatchPtr patch;
  std::vector<double> v;

  static ScalarField zeros(PatchPtr patch);
  static ScalarField sample(PatchPtr patch, const std::function<double(const double*)>& f);
};

struct GroupField {
  PatchPtr patch;
  Group group = Group::U1;
  int chart_id = -1;
  std::vector<Mat2> v;

  static GroupField identity(PatchPtr patch, Group g, int chart_id = -1);
  static GroupField sample(PatchPtr patch, Group g, const std::function<Mat2(const double*)>& f, int chart_id = -1);
};

struct FormField {
  PatchPtr patch;
  int degree = 0;
  Group group = Group::U1;
  int chart_id = -1;
  std::vector<std::vector<Mat2>> comp;

  static FormField zeros(PatchPtr patch, int degree, Group g, int chart_id = -1);
  // f(x, component) gives the coefficient at coordinates x.
  static FormField sample(PatchPtr patch, int degree, Group g, const std::function<Mat2(const double*, int)>& f,
                          int chart_id = -1);

  int dim() const { return patch->dim(); }
  std::size_t size() const { return patch->size(); }

  FormField& operator+=(const FormField& o);
  FormField& operator-=(const FormField& o);
  FormField& operator*=(double s);
};

FormField operator+(FormField a, const FormField& b);
FormField operator-(FormField a, const FormField& b);
FormField operator*(double s, FormField a);

// Coordinates of local point p (unwrapped, see Patch::coord).
void point_coords(const Patch& P, std::size_t p, double* x);

// Finite-difference derivative along axis a at point p (local index loc[a]).
double diff(const Patch& P, const std::vector<double>& f, std::size_t p, int a, int i);
Mat2 diff(const Patch& P, const std::vector<Mat2>& f, std::size_t p, int a, int i);

// Coboundary of a 0-form or 1-form.  Throws DegreeOverflow for k >= min(n, 2).
FormField exterior_derivative(const FormField& w);
// Weighted adjoint of exterior_derivative; d*d is nonnegative.
FormField codifferential(const FormField& w);
// Discrete g^{-1} dg: each stencil difference is replaced by log(g_p^{-1} g_q).
FormField log_derivative(const GroupField& g);
// (a ^ b)_{mu nu} = a_mu b_nu - a_nu b_mu with matrix products.
FormField wedge_bracket(const FormField& a, const FormField& b);

// Gauge-covariant pieces.
FormField adjoint_action(const GroupField& g, const FormField& w);  // g^{-1} w g

// Pointwise norm sqrt(sum_I G^I |w_I|^2).
std::vector<double> pointwise_norm(const FormField& w);
// Weighted L2 inner product sum_p w_p sum_I G^I <a_I, b_I>.
double inner(const FormField& a, const FormField& b);
double inner(const ScalarField& a, const ScalarField& b);

// Copies the samples of w at the points of `target`; throws ChartMismatch if
// target is not contained in w's patch.
FormField restrict_to(const FormField& w, const PatchPtr& target, int chart_id = -1);
GroupField restrict_to(const GroupField& g, const PatchPtr& target, int chart_id = -1);
ScalarField restrict_to(const ScalarField& f, const PatchPtr& target);
FormField restrict(const FormField& w, const Chart& chart);

GroupField multiply(const GroupField& a, const GroupField& b);
GroupField inverse(const GroupField& a);

}  // namespace ck
