#include "ck/bundle.hpp"

#include <cmath>
#include <numbers>

#include "ck/error.hpp"
#include "ck/parallel.hpp"

namespace ck {

namespace {

constexpr double kPi = std::numbers::pi;

const Overlap& pair_overlap(const Cover& c, int i, int j) {
  const Overlap* ov = c.overlap(std::min(i, j), std::max(i, j));
  if (!ov) throw Error(Errc::ChartMismatch, "charts do not overlap");
  return *ov;
}

// local indices of chart i / chart j for the points of a pair piece
const std::vector<std::size_t>& side(const OverlapPiece& piece, int i, int j) {
  return i < j ? piece.idx[0] : piece.idx[1];
}

double one_form_norm(const Patch& P, std::size_t p, Group g, const std::vector<Mat2>& v) {
  double s = 0.0;
  for (int a = 0; a < P.dim(); ++a) {
    double x = alg_norm(g, v[a]);
    s += P.inv_metric(p, a) * x * x;
  }
  return std::sqrt(s);
}

}  // namespace

const std::vector<GroupField>& Cocycle::transition(int i, int j) const {
  auto it = g.find({i, j});
  if (it == g.end()) throw Error(Errc::ChartMismatch, "no transition for chart pair");
  return it->second;
}

std::vector<Mat2> Cocycle::transition_on(int i, int j, const Patch& target) const {
  std::vector<Mat2> out(target.size(), Mat2::Identity());
  if (i == j) return out;
  std::vector<char> found(target.size(), 0);
  for (const GroupField& f : transition(i, j)) {
    auto m = patch_index_map(target, *f.patch);
    for (std::size_t q = 0; q < m.size(); ++q)
      if (m[q] >= 0) {
        out[q] = f.v[m[q]];
        found[q] = 1;
      }
  }
  for (char c : found)
    if (!c) throw Error(Errc::ChartMismatch, "target leaves the overlap");
  return out;
}

Cocycle Cocycle::trivial(CoverPtr cover, Group group) {
  std::map<std::pair<int, int>, std::vector<GroupField>> upper;
  for (const auto& [key, ov] : cover->pairs())
    for (const auto& piece : ov) upper[key].push_back(GroupField::identity(piece.patch, group));
  return from_upper(std::move(cover), group, std::move(upper));
}

Cocycle Cocycle::from_upper(CoverPtr cover, Group group, std::map<std::pair<int, int>, std::vector<GroupField>> upper) {
  Cocycle P;
  P.cover = std::move(cover);
  P.group = group;
  for (const auto& [key, ov] : P.cover->pairs()) {
    auto it = upper.find(key);
    if (it == upper.end() || it->second.size() != ov.size())
      throw Error(Errc::CoverMismatch, "transition data does not match the overlaps");
    for (std::size_t t = 0; t < ov.size(); ++t)
      if (!it->second[t].patch->same_as(*ov[t].patch) || it->second[t].group != group)
        throw Error(Errc::CoverMismatch, "transition field not on its overlap piece");
    std::vector<GroupField> inv;
    for (const auto& f : it->second) inv.push_back(inverse(f));
    P.g[{key.second, key.first}] = std::move(inv);
    P.g[key] = std::move(it->second);
  }
  return P;
}

GaugeField GaugeField::identity(CoverPtr cover, Group group) {
  GaugeField r;
  r.group = group;
  for (const Chart& c : cover->charts()) r.locals.push_back(GroupField::identity(c.patch, group, c.id));
  r.cover = std::move(cover);
  return r;
}

GaugeField GaugeField::sample(CoverPtr cover, Group group, const std::function<Mat2(const double*)>& f) {
  GaugeField r;
  r.group = group;
  for (const Chart& c : cover->charts()) r.locals.push_back(GroupField::sample(c.patch, group, f, c.id));
  r.cover = std::move(cover);
  return r;
}

double inverse_residual(const Cocycle& P) {
  double m = 0.0;
  for (const auto& [key, ov] : P.cover->pairs()) {
    const auto& a = P.transition(key.first, key.second);
    const auto& b = P.transition(key.second, key.first);
    for (std::size_t t = 0; t < ov.size(); ++t)
      for (std::size_t q = 0; q < a[t].v.size(); ++q)
        m = std::max(m, group_dist(P.group, b[t].v[q], group_inv(a[t].v[q])));
  }
  return m;
}

double cocycle_residual(const Cocycle& P) {
  double m = inverse_residual(P);
  for (const auto& [key, ov] : P.cover->triples()) {
    auto [i, j, k] = key;
    for (const auto& piece : ov) {
      auto gij = P.transition_on(i, j, *piece.patch);
      auto gjk = P.transition_on(j, k, *piece.patch);
      auto gik = P.transition_on(i, k, *piece.patch);
      for (std::size_t q = 0; q < gij.size(); ++q) m = std::max(m, group_dist(P.group, gij[q] * gjk[q], gik[q]));
    }
  }
  return m;
}

double gluing_residual(const ConnectionForm& A) {
  const Cocycle& P = *A.cocycle;
  const Cover& cover = *P.cover;
  double m = 0.0;
  std::vector<Mat2> r(cover.grid().n);
  for (const auto& [key, ov] : cover.pairs())
    for (int dir = 0; dir < 2; ++dir) {
      int i = dir ? key.second : key.first, j = dir ? key.first : key.second;
      const auto& gs = P.transition(i, j);
      for (std::size_t t = 0; t < ov.size(); ++t) {
        const OverlapPiece& piece = ov[t];
        FormField L = log_derivative(gs[t]);
        const auto& ii = side(piece, i, j);
        const auto& jj = side(piece, j, i);
        for (std::size_t q = 0; q < piece.patch->size(); ++q) {
          const Mat2& g = gs[t].v[q];
          Mat2 gi = group_inv(g);
          for (int a = 0; a < cover.grid().n; ++a)
            r[a] = A.locals[j].comp[a][jj[q]] - (L.comp[a][q] + gi * A.locals[i].comp[a][ii[q]] * g);
          m = std::max(m, one_form_norm(*piece.patch, q, P.group, r));
        }
      }
    }
  return m;
}

Cocycle apply_gauge_cocycle(const Cocycle& P, const GaugeField& rho) {
  if (rho.cover.get() != P.cover.get() && rho.cover->size() != P.cover->size())
    throw Error(Errc::CoverMismatch, "gauge and cocycle on different covers");
  if (rho.group != P.group) throw Error(Errc::GroupMismatch, "gauge and cocycle groups differ");
  Cocycle out = P;
  for (const auto& [key, ov] : P.cover->pairs())
    for (int dir = 0; dir < 2; ++dir) {
      int i = dir ? key.second : key.first, j = dir ? key.first : key.second;
      auto& gs = out.g.at({i, j});
      for (std::size_t t = 0; t < ov.size(); ++t) {
        const auto& ii = side(ov[t], i, j);
        const auto& jj = side(ov[t], j, i);
        for (std::size_t q = 0; q < gs[t].v.size(); ++q)
          gs[t].v[q] = group_inv(rho.locals[i].v[ii[q]]) * gs[t].v[q] * rho.locals[j].v[jj[q]];
      }
    }
  return out;
}

ConnectionForm apply_gauge(const ConnectionForm& A, const GaugeField& rho) {
  ConnectionForm out;
  out.cocycle = std::make_shared<Cocycle>(apply_gauge_cocycle(*A.cocycle, rho));
  out.locals.resize(A.locals.size());
  parallel_for(A.locals.size(), [&](std::size_t c) {
    out.locals[c] = log_derivative(rho.locals[c]) + adjoint_action(rho.locals[c], A.locals[c]);
  });
  return out;
}

GaugeField compose(const GaugeField& rho, const GaugeField& sigma) {
  GaugeField out = rho;
  for (std::size_t c = 0; c < rho.locals.size(); ++c) out.locals[c] = multiply(rho.locals[c], sigma.locals[c]);
  return out;
}

CurvatureForm curvature(const ConnectionForm& A) {
  CurvatureForm F;
  F.cover = A.cocycle->cover;
  F.locals.resize(A.locals.size());
  parallel_for(A.locals.size(), [&](std::size_t c) {
    F.locals[c] = exterior_derivative(A.locals[c]) + wedge_bracket(A.locals[c], A.locals[c]);
  });
  return F;
}

double ym_energy(const CurvatureForm& F, double q, const PartitionOfUnity* pou) {
  if (!(q >= 1.0)) throw Error(Errc::BadExponent, "Yang-Mills energy needs q >= 1");
  const PartitionOfUnity& psi = pou ? *pou : F.cover->pou();
  double s = 0.0;
  for (std::size_t c = 0; c < F.locals.size(); ++c) {
    auto nrm = pointwise_norm(F.locals[c]);
    const Patch& P = *F.locals[c].patch;
    for (std::size_t p = 0; p < nrm.size(); ++p) s += P.weight(p) * psi.weights[c][p] * std::pow(nrm[p], q);
  }
  return s;
}

ConnectionForm pou_connection(const CocyclePtr& P) {
  const Cover& cover = *P->cover;
  const auto& psi = cover.pou().weights;
  ConnectionForm A;
  A.cocycle = P;
  A.locals.resize(cover.size());
  parallel_for(cover.size(), [&](std::size_t ua) {
    int a = static_cast<int>(ua);
    const Chart& ch = cover.chart(a);
    FormField acc = FormField::zeros(ch.patch, 1, P->group, a);
    for (int b = 0; b < cover.size(); ++b) {
      if (b == a || !cover.overlap(std::min(a, b), std::max(a, b))) continue;
      const Overlap& ov = pair_overlap(cover, a, b);
      const auto& gs = P->transition(b, a);
      for (std::size_t t = 0; t < ov.size(); ++t) {
        FormField L = log_derivative(gs[t]);
        const auto& bb = side(ov[t], b, a);
        const auto& aa = side(ov[t], a, b);
        for (std::size_t q = 0; q < ov[t].patch->size(); ++q) {
          double w = psi[b][bb[q]];
          if (w == 0.0) continue;
          for (int mu = 0; mu < cover.grid().n; ++mu) acc.comp[mu][aa[q]] += w * L.comp[mu][q];
        }
      }
    }
    A.locals[a] = std::move(acc);
  });
  return A;
}

Mat2 embed_phase(Group g, cplx z) {
  Mat2 m = Mat2::Identity();
  m(0, 0) = z;
  if (g == Group::SU2) m(1, 1) = std::conj(z);
  return m;
}

Mat2 embed_imag(Group g, double a) {
  Mat2 m = Mat2::Zero();
  m(0, 0) = cplx(0.0, a);
  if (g == Group::SU2) m(1, 1) = cplx(0.0, -a);
  return m;
}

BuiltinBundle trivial_bundle(CoverPtr cover, Group group) {
  BuiltinBundle b;
  b.cocycle = std::make_shared<Cocycle>(Cocycle::trivial(cover, group));
  b.connection.cocycle = b.cocycle;
  for (const Chart& c : cover->charts()) b.connection.locals.push_back(FormField::zeros(c.patch, 1, group, c.id));
  return b;
}

BuiltinBundle charge_k_sphere(CoverPtr cover, Group group, int k) {
  const BaseGrid& grid = cover->grid();
  if (!grid.is_sphere()) throw Error(Errc::InvalidArgument, "charge_k_sphere needs a sphere cover");
  std::vector<bool> north;
  for (const Chart& c : cover->charts()) {
    double tc = (c.core.lo[0] + 0.5 * (c.core.len[0] - 1)) * grid.spacing[0];
    north.push_back(tc < kPi / 2);
    if (north.back() && c.box.lo[0] + c.box.len[0] == grid.dims[0])
      throw Error(Errc::InvalidArgument, "northern chart contains the south pole");
    if (!north.back() && c.box.lo[0] == 0) throw Error(Errc::InvalidArgument, "southern chart contains the north pole");
  }
  std::map<std::pair<int, int>, std::vector<GroupField>> upper;
  for (const auto& [key, ov] : cover->pairs()) {
    int sign = north[key.first] == north[key.second] ? 0 : (north[key.first] ? 1 : -1);
    for (const auto& piece : ov)
      upper[key].push_back(GroupField::sample(piece.patch, group, [&](const double* x) {
        return embed_phase(group, std::polar(1.0, sign * k * x[1]));
      }));
  }
  BuiltinBundle b;
  b.cocycle = std::make_shared<Cocycle>(Cocycle::from_upper(cover, group, std::move(upper)));
  b.connection.cocycle = b.cocycle;
  for (const Chart& c : cover->charts()) {
    bool n = north[c.id];
    b.connection.locals.push_back(FormField::sample(
        c.patch, 1, group,
        [&](const double* x, int mu) -> Mat2 {
          if (mu == 0) return Mat2::Zero();
          double a = n ? -0.5 * k * (1.0 - std::cos(x[0])) : 0.5 * k * (1.0 + std::cos(x[0]));
          return embed_imag(group, a);
        },
        c.id));
  }
  return b;
}

BuiltinBundle flux_k_torus(CoverPtr cover, Group group, int k) {
  const BaseGrid& grid = cover->grid();
  if (grid.is_sphere()) throw Error(Errc::InvalidArgument, "flux_k_torus needs a torus cover");
  for (const Chart& c : cover->charts())
    if (c.patch->axis(0).periodic) throw Error(Errc::InvalidArgument, "flux bundle needs charts split along axis 0");
  std::map<std::pair<int, int>, std::vector<GroupField>> upper;
  std::vector<int> li(grid.n), lj(grid.n), lp(grid.n);
  for (const auto& [key, ov] : cover->pairs()) {
    const Patch& Pi = *cover->chart(key.first).patch;
    const Patch& Pj = *cover->chart(key.second).patch;
    for (const auto& piece : ov) {
      GroupField f = GroupField::identity(piece.patch, group);
      for (std::size_t q = 0; q < f.v.size(); ++q) {
        Pi.unflatten(piece.idx[0][q], li.data());
        Pj.unflatten(piece.idx[1][q], lj.data());
        piece.patch->unflatten(q, lp.data());
        double s = std::round(Pi.coord(0, li[0]) - Pj.coord(0, lj[0]));
        double x1 = piece.patch->coord(1, lp[1]);
        f.v[q] = embed_phase(group, std::polar(1.0, 2.0 * kPi * k * s * x1));
      }
      upper[key].push_back(std::move(f));
    }
  }
  BuiltinBundle b;
  b.cocycle = std::make_shared<Cocycle>(Cocycle::from_upper(cover, group, std::move(upper)));
  b.connection.cocycle = b.cocycle;
  for (const Chart& c : cover->charts())
    b.connection.locals.push_back(FormField::sample(
        c.patch, 1, group,
        [&](const double* x, int mu) -> Mat2 {
          return mu == 1 ? embed_imag(group, -2.0 * kPi * k * x[0]) : Mat2(Mat2::Zero());
        },
        c.id));
  return b;
}

ConnectionForm add_global_form(const ConnectionForm& A, const std::function<Mat2(const double*, int)>& w) {
  ConnectionForm out = A;
  for (auto& loc : out.locals) loc += FormField::sample(loc.patch, 1, loc.group, w, loc.chart_id);
  return out;
}

}  // namespace ck
