#include "ck/form.hpp"

#include <cmath>

#include "ck/error.hpp"

namespace ck {

namespace {

std::size_t neighbor(const Patch& P, std::size_t p, int a, int i, int off) {
  int n = P.axis(a).count;
  int j = i + off;
  if (P.axis(a).periodic) j = ((j % n) + n) % n;
  return static_cast<std::size_t>(static_cast<long>(p) + static_cast<long>(j - i) * static_cast<long>(P.stride(a)));
}

template <class T>
T zero_of();
template <>
double zero_of<double>() {
  return 0.0;
}
template <>
Mat2 zero_of<Mat2>() {
  return Mat2::Zero();
}

template <class T>
T diff_impl(const Patch& P, const std::vector<T>& f, std::size_t p, int a, int i) {
  Stencil s = P.stencil(a, i);
  T d = zero_of<T>();
  for (int k = 0; k < s.k; ++k) d += s.c[k] * f[neighbor(P, p, a, i, s.off[k])];
  return d;
}

// out[q] += sum over points p and stencil taps p->q of c * in[p]
void add_transpose(const Patch& P, int a, const std::vector<Mat2>& in, std::vector<Mat2>& out) {
  std::vector<int> loc(P.dim());
  for (std::size_t p = 0; p < P.size(); ++p) {
    P.unflatten(p, loc.data());
    Stencil s = P.stencil(a, loc[a]);
    for (int k = 0; k < s.k; ++k) out[neighbor(P, p, a, loc[a], s.off[k])] += s.c[k] * in[p];
  }
}

double comp_metric(const Patch& P, std::size_t p, int degree, int c) {
  int n = P.dim();
  if (degree == 0) return 1.0;
  if (degree == 1) return P.inv_metric(p, c);
  auto pr = two_form_pairs(n)[c];
  return P.inv_metric(p, pr[0]) * P.inv_metric(p, pr[1]);
}

void require_same(const FormField& a, const FormField& b) {
  if (a.group != b.group) throw Error(Errc::GroupMismatch, "forms carry different groups");
  if (!a.patch->same_as(*b.patch) || a.chart_id != b.chart_id)
    throw Error(Errc::ChartMismatch, "forms live on different charts");
}

}  // namespace

int num_components(int n, int degree) {
  if (degree < 0 || degree > n) return 0;
  long r = 1;
  for (int i = 0; i < degree; ++i) r = r * (n - i) / (i + 1);
  return static_cast<int>(r);
}

std::vector<std::array<int, 2>> two_form_pairs(int n) {
  std::vector<std::array<int, 2>> out;
  for (int m = 0; m < n; ++m)
    for (int v = m + 1; v < n; ++v) out.push_back({m, v});
  return out;
}

int pair_index(int n, int mu, int nu) {
  int idx = 0;
  for (int m = 0; m < n; ++m)
    for (int v = m + 1; v < n; ++v) {
      if (m == mu && v == nu) return idx;
      ++idx;
    }
  throw Error(Errc::InvalidArgument, "bad 2-form index pair");
}

void point_coords(const Patch& P, std::size_t p, double* x) {
  std::vector<int> loc(P.dim());
  P.unflatten(p, loc.data());
  for (int a = 0; a < P.dim(); ++a) x[a] = P.coord(a, loc[a]);
}

ScalarField ScalarField::zeros(PatchPtr patch) {
  ScalarField f;
  f.v.assign(patch->size(), 0.0);
  f.patch = std::move(patch);
  return f;
}

ScalarField ScalarField::sample(PatchPtr patch, const std::function<double(const double*)>& fn) {
  ScalarField f = zeros(std::move(patch));
  std::vector<double> x(f.patch->dim());
  for (std::size_t p = 0; p < f.v.size(); ++p) {
    point_coords(*f.patch, p, x.data());
    f.v[p] = fn(x.data());
  }
  return f;
}

GroupField GroupField::identity(PatchPtr patch, Group g, int chart_id) {
  GroupField f;
  f.group = g;
  f.chart_id = chart_id;
  f.v.assign(patch->size(), Mat2::Identity());
  f.patch = std::move(patch);
  return f;
}

GroupField GroupField::sample(PatchPtr patch, Group g, const std::function<Mat2(const double*)>& fn, int chart_id) {
  GroupField f = identity(std::move(patch), g, chart_id);
  std::vector<double> x(f.patch->dim());
  for (std::size_t p = 0; p < f.v.size(); ++p) {
    point_coords(*f.patch, p, x.data());
    f.v[p] = fn(x.data());
  }
  return f;
}

FormField FormField::zeros(PatchPtr patch, int degree, Group g, int chart_id) {
  FormField w;
  w.degree = degree;
  w.group = g;
  w.chart_id = chart_id;
  w.comp.assign(num_components(patch->dim(), degree), std::vector<Mat2>(patch->size(), Mat2::Zero()));
  w.patch = std::move(patch);
  return w;
}

FormField FormField::sample(PatchPtr patch, int degree, Group g, const std::function<Mat2(const double*, int)>& fn,
                            int chart_id) {
  FormField w = zeros(std::move(patch), degree, g, chart_id);
  std::vector<double> x(w.dim());
  for (std::size_t p = 0; p < w.size(); ++p) {
    point_coords(*w.patch, p, x.data());
    for (std::size_t c = 0; c < w.comp.size(); ++c) w.comp[c][p] = fn(x.data(), static_cast<int>(c));
  }
  return w;
}

FormField& FormField::operator+=(const FormField& o) {
  require_same(*this, o);
  for (std::size_t c = 0; c < comp.size(); ++c)
    for (std::size_t p = 0; p < comp[c].size(); ++p) comp[c][p] += o.comp[c][p];
  return *this;
}

FormField& FormField::operator-=(const FormField& o) {
  require_same(*this, o);
  for (std::size_t c = 0; c < comp.size(); ++c)
    for (std::size_t p = 0; p < comp[c].size(); ++p) comp[c][p] -= o.comp[c][p];
  return *this;
}

FormField& FormField::operator*=(double s) {
  for (auto& c : comp)
    for (auto& m : c) m *= s;
  return *this;
}

FormField operator+(FormField a, const FormField& b) { return a += b; }
FormField operator-(FormField a, const FormField& b) { return a -= b; }
FormField operator*(double s, FormField a) { return a *= s; }

double diff(const Patch& P, const std::vector<double>& f, std::size_t p, int a, int i) {
  return diff_impl(P, f, p, a, i);
}

Mat2 diff(const Patch& P, const std::vector<Mat2>& f, std::size_t p, int a, int i) {
  return diff_impl(P, f, p, a, i);
}

FormField exterior_derivative(const FormField& w) {
  int n = w.dim();
  if (w.degree >= std::min(n, 2)) throw Error(Errc::DegreeOverflow, "exterior derivative needs degree <= 1");
  const Patch& P = *w.patch;
  FormField out = FormField::zeros(w.patch, w.degree + 1, w.group, w.chart_id);
  std::vector<int> loc(n);
  if (w.degree == 0) {
    for (std::size_t p = 0; p < P.size(); ++p) {
      P.unflatten(p, loc.data());
      for (int a = 0; a < n; ++a) out.comp[a][p] = diff(P, w.comp[0], p, a, loc[a]);
    }
    return out;
  }
  auto pairs = two_form_pairs(n);
  for (std::size_t p = 0; p < P.size(); ++p) {
    P.unflatten(p, loc.data());
    for (std::size_t c = 0; c < pairs.size(); ++c) {
      int mu = pairs[c][0], nu = pairs[c][1];
      out.comp[c][p] = diff(P, w.comp[nu], p, mu, loc[mu]) - diff(P, w.comp[mu], p, nu, loc[nu]);
    }
  }
  return out;
}

FormField codifferential(const FormField& w) {
  int n = w.dim();
  if (w.degree < 1) throw Error(Errc::DegreeUnderflow, "codifferential of a 0-form");
  if (w.degree > 2) throw Error(Errc::DegreeOverflow, "codifferential needs degree <= 2");
  const Patch& P = *w.patch;
  FormField out = FormField::zeros(w.patch, w.degree - 1, w.group, w.chart_id);
  // weighted input: W_p G^I(p) w_I(p)
  std::vector<Mat2> tmp(P.size());
  auto weighted = [&](int c) {
    for (std::size_t p = 0; p < P.size(); ++p) tmp[p] = P.weight(p) * comp_metric(P, p, w.degree, c) * w.comp[c][p];
  };
  if (w.degree == 1) {
    for (int a = 0; a < n; ++a) {
      weighted(a);
      add_transpose(P, a, tmp, out.comp[0]);
    }
  } else {
    auto pairs = two_form_pairs(n);
    std::vector<Mat2> neg(P.size());
    for (std::size_t c = 0; c < pairs.size(); ++c) {
      int mu = pairs[c][0], nu = pairs[c][1];
      weighted(static_cast<int>(c));
      add_transpose(P, mu, tmp, out.comp[nu]);
      for (std::size_t p = 0; p < P.size(); ++p) neg[p] = -tmp[p];
      add_transpose(P, nu, neg, out.comp[mu]);
    }
  }
  for (std::size_t c = 0; c < out.comp.size(); ++c)
    for (std::size_t p = 0; p < P.size(); ++p)
      out.comp[c][p] /= P.weight(p) * comp_metric(P, p, out.degree, static_cast<int>(c));
  return out;
}

FormField log_derivative(const GroupField& g) {
  const Patch& P = *g.patch;
  int n = P.dim();
  FormField out = FormField::zeros(g.patch, 1, g.group, g.chart_id);
  std::vector<int> loc(n);
  for (std::size_t p = 0; p < P.size(); ++p) {
    P.unflatten(p, loc.data());
    Mat2 ginv = group_inv(g.v[p]);
    for (int a = 0; a < n; ++a) {
      Stencil s = P.stencil(a, loc[a]);
      Mat2 d = Mat2::Zero();
      for (int k = 0; k < s.k; ++k) {
        if (s.off[k] == 0) continue;
        d += s.c[k] * logm(g.group, ginv * g.v[neighbor(P, p, a, loc[a], s.off[k])]);
      }
      out.comp[a][p] = d;
    }
  }
  return out;
}

FormField wedge_bracket(const FormField& a, const FormField& b) {
  if (a.degree != 1 || b.degree != 1) throw Error(Errc::InvalidArgument, "wedge_bracket takes 1-forms");
  require_same(a, b);
  int n = a.dim();
  auto pairs = two_form_pairs(n);
  FormField out = FormField::zeros(a.patch, 2, a.group, a.chart_id);
  for (std::size_t c = 0; c < pairs.size(); ++c) {
    int mu = pairs[c][0], nu = pairs[c][1];
    for (std::size_t p = 0; p < a.size(); ++p)
      out.comp[c][p] = a.comp[mu][p] * b.comp[nu][p] - a.comp[nu][p] * b.comp[mu][p];
  }
  return out;
}

FormField adjoint_action(const GroupField& g, const FormField& w) {
  if (g.group != w.group) throw Error(Errc::GroupMismatch, "gauge and form groups differ");
  if (!g.patch->same_as(*w.patch)) throw Error(Errc::ChartMismatch, "gauge and form on different patches");
  FormField out = w;
  for (auto& c : out.comp)
    for (std::size_t p = 0; p < c.size(); ++p) c[p] = group_inv(g.v[p]) * c[p] * g.v[p];
  return out;
}

std::vector<double> pointwise_norm(const FormField& w) {
  std::vector<double> out(w.size(), 0.0);
  for (std::size_t p = 0; p < w.size(); ++p) {
    double s = 0.0;
    for (std::size_t c = 0; c < w.comp.size(); ++c) {
      double a = alg_norm(w.group, w.comp[c][p]);
      s += comp_metric(*w.patch, p, w.degree, static_cast<int>(c)) * a * a;
    }
    out[p] = std::sqrt(s);
  }
  return out;
}

double inner(const FormField& a, const FormField& b) {
  require_same(a, b);
  if (a.degree != b.degree) throw Error(Errc::InvalidArgument, "inner product of forms of different degree");
  double s = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    double t = 0.0;
    for (std::size_t c = 0; c < a.comp.size(); ++c)
      t += comp_metric(*a.patch, p, a.degree, static_cast<int>(c)) * alg_inner(a.group, a.comp[c][p], b.comp[c][p]);
    s += a.patch->weight(p) * t;
  }
  return s;
}

double inner(const ScalarField& a, const ScalarField& b) {
  double s = 0.0;
  for (std::size_t p = 0; p < a.v.size(); ++p) s += a.patch->weight(p) * a.v[p] * b.v[p];
  return s;
}

namespace {

std::vector<std::size_t> checked_map(const Patch& target, const Patch& source) {
  auto m = patch_index_map(target, source);
  std::vector<std::size_t> out(m.size());
  for (std::size_t q = 0; q < m.size(); ++q) {
    if (m[q] < 0) throw Error(Errc::ChartMismatch, "restriction target leaves the source patch");
    out[q] = static_cast<std::size_t>(m[q]);
  }
  return out;
}

}  // namespace

FormField restrict_to(const FormField& w, const PatchPtr& target, int chart_id) {
  auto m = checked_map(*target, *w.patch);
  FormField out = FormField::zeros(target, w.degree, w.group, chart_id);
  for (std::size_t c = 0; c < w.comp.size(); ++c)
    for (std::size_t q = 0; q < m.size(); ++q) out.comp[c][q] = w.comp[c][m[q]];
  return out;
}

GroupField restrict_to(const GroupField& g, const PatchPtr& target, int chart_id) {
  auto m = checked_map(*target, *g.patch);
  GroupField out = GroupField::identity(target, g.group, chart_id);
  for (std::size_t q = 0; q < m.size(); ++q) out.v[q] = g.v[m[q]];
  return out;
}

ScalarField restrict_to(const ScalarField& f, const PatchPtr& target) {
  auto m = checked_map(*target, *f.patch);
  ScalarField out = ScalarField::zeros(target);
  for (std::size_t q = 0; q < m.size(); ++q) out.v[q] = f.v[m[q]];
  return out;
}

FormField restrict(const FormField& w, const Chart& chart) { return restrict_to(w, chart.patch, chart.id); }

GroupField multiply(const GroupField& a, const GroupField& b) {
  if (a.group != b.group) throw Error(Errc::GroupMismatch, "group fields carry different groups");
  if (!a.patch->same_as(*b.patch)) throw Error(Errc::ChartMismatch, "group fields on different patches");
  GroupField out = a;
  for (std::size_t p = 0; p < a.v.size(); ++p) out.v[p] = a.v[p] * b.v[p];
  return out;
}

GroupField inverse(const GroupField& a) {
  GroupField out = a;
  for (auto& m : out.v) m = group_inv(m);
  return out;
}

}  // namespace ck
