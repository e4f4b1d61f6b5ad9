#include "ck/smoothing.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <functional>
#include <unordered_map>

#include "ck/error.hpp"
#include "ck/norms.hpp"
#include "ck/parallel.hpp"

namespace ck {

namespace {

double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

// Flattened wrapped global lattice index of a patch point.
std::size_t global_key(const Patch& P, std::size_t p) {
  int idx[8];
  P.unflatten(p, idx);
  const BaseGrid& g = P.grid();
  std::size_t key = 0;
  for (int a = 0; a < P.dim(); ++a) key = key * g.dims[a] + static_cast<std::size_t>(P.global(a, idx[a]));
  return key;
}

// Local multi-index in chart c of a patch point; false if outside the chart.
bool chart_local(const Chart& c, const Patch& P, std::size_t p, int* loc) {
  int idx[8];
  P.unflatten(p, idx);
  for (int a = 0; a < P.dim(); ++a) {
    loc[a] = c.patch->local_of_global(a, P.global(a, idx[a]));
    if (loc[a] < 0) return false;
  }
  return true;
}

using PointMap = std::unordered_map<std::size_t, Mat2>;

}  // namespace

GroupField mollify_group_map(const GroupField& g, double width, const std::vector<bool>* constraint) {
  const Patch& P = *g.patch;
  const int n = P.dim();
  if (!(width > 0.0)) throw Error(Errc::InvalidArgument, "mollifier width must be positive");
  if (constraint && constraint->size() != P.size()) throw Error(Errc::ChartMismatch, "constraint mask size");

  // Kernel offsets with |offset| < width in coordinates.
  struct Tap {
    std::vector<int> off;
    double w;
  };
  std::vector<Tap> taps;
  std::vector<int> R(n);
  for (int a = 0; a < n; ++a) R[a] = static_cast<int>(std::ceil(width / P.axis(a).h));
  std::vector<int> off(n);
  std::function<void(int)> build = [&](int a) {
    if (a == n) {
      double r2 = 0.0;
      for (int b = 0; b < n; ++b) r2 += std::pow(off[b] * P.axis(b).h, 2);
      double s = r2 / (width * width);
      if (s < 1.0) taps.push_back({off, std::exp(-1.0 / (1.0 - s))});
      return;
    }
    for (off[a] = -R[a]; off[a] <= R[a]; ++off[a]) build(a + 1);
  };
  build(0);

  GroupField out = g;
  std::vector<int> idx(n), nb(n);
  for (std::size_t p = 0; p < P.size(); ++p) {
    if (constraint && (*constraint)[p]) continue;
    P.unflatten(p, idx.data());
    const Mat2 gi = group_inv(g.v[p]);
    Mat2 acc = Mat2::Zero();
    double wsum = 0.0;
    bool self_only = true;
    for (const Tap& t : taps) {
      bool inside = true;
      for (int a = 0; a < n && inside; ++a) {
        int i = idx[a] + t.off[a];
        const Axis& ax = P.axis(a);
        if (ax.periodic) i = ((i % ax.count) + ax.count) % ax.count;
        else if (i < 0 || i >= ax.count) inside = false;
        nb[a] = i;
      }
      if (!inside) continue;
      std::size_t q = P.flatten(nb.data());
      wsum += t.w;
      if (q == p) continue;
      self_only = false;
      Mat2 rel = gi * g.v[q];
      if (angle_from_identity(g.group, rel) > kDeltaG)
        throw Error(Errc::OscillationTooLarge, "window oscillation above " + std::to_string(kDeltaG));
      acc += t.w * logm(g.group, rel);
    }
    if (self_only) continue;
    out.v[p] = g.v[p] * expm(g.group, acc / wsum);
  }
  return out;
}

GroupField patch_extend(const GroupField& F, const std::vector<double>& psi, const GroupField* base,
                        const IdentityNeighborhood* nbhd) {
  if (psi.size() != F.v.size()) throw Error(Errc::ChartMismatch, "cutoff size");
  if (base && (!base->patch->same_as(*F.patch) || base->group != F.group))
    throw Error(Errc::ChartMismatch, "extension base on a different patch");
  IdentityNeighborhood nb = nbhd ? *nbhd : IdentityNeighborhood{F.group};
  nb.group = F.group;
  GroupField out = base ? *base : GroupField::identity(F.patch, F.group, F.chart_id);
  for (std::size_t p = 0; p < psi.size(); ++p) {
    double s = psi[p];
    if (s <= 0.0) continue;
    if (!base) {
      if (s >= 1.0) {
        if (angle_from_identity(F.group, F.v[p]) > nb.radius)
          throw Error(Errc::OutsideInjectivityDomain, "patched value outside the identity neighbourhood");
        out.v[p] = F.v[p];
      } else {
        out.v[p] = patch_interpolate({F.group, F.v[p]}, s, nb).value;
      }
      continue;
    }
    Mat2 rel = group_inv(base->v[p]) * F.v[p];
    if (angle_from_identity(F.group, rel) > kDeltaG)
      throw Error(Errc::SmallnessViolated, "extension quotient above " + std::to_string(kDeltaG));
    out.v[p] = s >= 1.0 ? F.v[p] : Mat2(base->v[p] * expm(F.group, s * logm(F.group, rel)));
  }
  return out;
}

double depth_cutoff(int depth, int cells) {
  if (cells <= 0) return 1.0;
  return smooth_step(static_cast<double>(depth) / cells);
}

int chart_depth(const Chart& chart, const int* local_idx) {
  int d = INT_MAX / 2;
  for (std::size_t a = 0; a < chart.margin_side.size(); ++a) {
    if (chart.margin_side[a][0]) d = std::min(d, local_idx[a]);
    if (chart.margin_side[a][1]) d = std::min(d, chart.box.len[a] - 1 - local_idx[a]);
  }
  return d;
}

RepairResult repair_cocycle(const Cocycle& approx, int shrink) {
  const Cover& cover = *approx.cover;
  const Group G = approx.group;
  double r0 = cocycle_residual(approx);
  if (r0 > kDeltaG) throw Error(Errc::SmallnessViolated, "input cocycle residual " + std::to_string(r0));

  RepairResult res;
  res.cover = shrink_cover(approx.cover, shrink);

  const int N = cover.size();
  std::map<std::pair<int, int>, PointMap> H;
  std::map<std::pair<int, int>, std::vector<GroupField>> upper;
  std::vector<int> loc(cover.grid().n);

  for (int r = 1; r < N; ++r) {
    for (int l = 0; l < r; ++l) {
      const Overlap* ov = cover.overlap(l, r);
      if (!ov) continue;
      const auto& gt = approx.transition(l, r);
      PointMap& Hlr = H[{l, r}];
      std::vector<GroupField> pieces;
      for (std::size_t t = 0; t < ov->size(); ++t) {
        const Patch& piece = *(*ov)[t].patch;
        GroupField out = gt[t];
        bool used = false;
        for (std::size_t q = 0; q < piece.size(); ++q) {
          std::size_t key = global_key(piece, q);
          // Deepest earlier chart i containing the point.
          int best = -1, depth = -1;
          for (int i = 0; i < l; ++i) {
            auto il = H.find({i, l}), ir = H.find({i, r});
            if (il == H.end() || ir == H.end() || !il->second.count(key) || !ir->second.count(key)) continue;
            if (!chart_local(cover.chart(i), piece, q, loc.data())) continue;
            int d = chart_depth(cover.chart(i), loc.data());
            if (d > depth) depth = d, best = i;
          }
          if (best >= 0) {
            double s = depth_cutoff(depth, shrink);
            if (s > 0.0) {
              Mat2 hh = group_inv(H[{best, l}].at(key)) * H[{best, r}].at(key);
              Mat2 rel = group_inv(gt[t].v[q]) * hh;
              double ang = angle_from_identity(G, rel);
              res.max_quotient_angle = std::max(res.max_quotient_angle, ang);
              if (ang > kDeltaG)
                throw Error(Errc::SmallnessViolated, "quotient on overlap (" + std::to_string(l) + "," +
                                                         std::to_string(r) + ") strays " + std::to_string(ang));
              out.v[q] = s >= 1.0 ? hh : Mat2(gt[t].v[q] * expm(G, s * logm(G, rel)));
              used = true;
            }
          }
          Hlr[key] = out.v[q];
        }
        if (used) ++res.stages;
        pieces.push_back(std::move(out));
      }
      upper[{l, r}] = std::move(pieces);
    }
  }

  Cocycle full = Cocycle::from_upper(approx.cover, G, std::move(upper));
  std::map<std::pair<int, int>, std::vector<GroupField>> shrunk;
  for (const auto& [key, ov] : res.cover->pairs())
    for (const auto& piece : ov) {
      GroupField f = GroupField::identity(piece.patch, G);
      f.v = full.transition_on(key.first, key.second, *piece.patch);
      shrunk[key].push_back(std::move(f));
    }
  res.cocycle = std::make_shared<const Cocycle>(Cocycle::from_upper(res.cover, G, std::move(shrunk)));
  return res;
}

Cocycle mollify_cocycle(const Cocycle& P, double width) {
  std::vector<std::pair<std::pair<int, int>, std::size_t>> jobs;
  std::map<std::pair<int, int>, std::vector<GroupField>> upper;
  for (const auto& [key, ov] : P.cover->pairs()) {
    upper[key] = P.transition(key.first, key.second);
    for (std::size_t t = 0; t < ov.size(); ++t) jobs.push_back({key, t});
  }
  parallel_for(jobs.size(), [&](std::size_t k) {
    auto& f = upper[jobs[k].first][jobs[k].second];
    f = mollify_group_map(f, width);
  });
  return Cocycle::from_upper(P.cover, P.group, std::move(upper));
}

SmoothingReport smoothing_report(const Cocycle& approx, const RepairResult& repaired) {
  SmoothingReport rep;
  const Cocycle& h = *repaired.cocycle;
  const Cover& small = *h.cover;
  const Cover& big = *approx.cover;
  const Group G = h.group;
  rep.residual_before = cocycle_residual(approx);
  rep.residual_after = cocycle_residual(h);
  std::vector<int> loc(small.grid().n);
  for (const auto& [key, ov] : small.pairs()) {
    OverlapDistance d{key.first, key.second, 0.0, 0.0};
    const auto& hs = h.transition(key.first, key.second);
    double un = 0.0, dun = 0.0;
    const double n = small.grid().n;
    for (std::size_t t = 0; t < ov.size(); ++t) {
      const Patch& piece = *ov[t].patch;
      auto gs = approx.transition_on(key.first, key.second, piece);
      FormField u = FormField::zeros(ov[t].patch, 0, G);
      for (std::size_t q = 0; q < piece.size(); ++q) {
        d.sup = std::max(d.sup, group_dist(G, gs[q], hs[t].v[q]));
        u.comp[0][q] = logm(G, group_inv(gs[q]) * hs[t].v[q]);
        // No earlier chart holds the point: the transition is left as it was.
        bool free = true;
        for (int i = 0; i < key.first && free; ++i)
          if (chart_local(big.chart(i), piece, q, loc.data())) free = false;
        if (free && hs[t].v[q] != gs[q]) rep.constraint_preserved = false;
      }
      un += std::pow(lp_norm(u, n), n);
      dun += std::pow(lp_norm(exterior_derivative(u), n), n);
    }
    d.w1n = std::pow(un, 1.0 / n) + std::pow(dun, 1.0 / n);
    rep.max_sup = std::max(rep.max_sup, d.sup);
    rep.max_w1n = std::max(rep.max_w1n, d.w1n);
    rep.distances.push_back(d);
  }
  return rep;
}

ConnectionForm smooth_connection_on_bundle(const CocyclePtr& P, const std::vector<FormField>& approx) {
  const Cover& cover = *P->cover;
  if (static_cast<int>(approx.size()) != cover.size()) throw Error(Errc::CoverMismatch, "one form per chart");
  const auto& psi = cover.pou().weights;
  const int n = cover.grid().n;
  ConnectionForm B;
  B.cocycle = P;
  B.locals.resize(cover.size());
  parallel_for(cover.size(), [&](std::size_t ua) {
    int a = static_cast<int>(ua);
    const Chart& ch = cover.chart(a);
    if (!approx[a].patch->same_as(*ch.patch)) throw Error(Errc::ChartMismatch, "form not on its chart");
    FormField acc = FormField::zeros(ch.patch, 1, P->group, a);
    for (std::size_t p = 0; p < ch.patch->size(); ++p)
      for (int mu = 0; mu < n; ++mu) acc.comp[mu][p] = psi[a][p] * approx[a].comp[mu][p];
    for (int b = 0; b < cover.size(); ++b) {
      if (b == a) continue;
      const Overlap* ov = cover.overlap(std::min(a, b), std::max(a, b));
      if (!ov) continue;
      const auto& gs = P->transition(b, a);
      for (std::size_t t = 0; t < ov->size(); ++t) {
        const OverlapPiece& piece = (*ov)[t];
        FormField L = log_derivative(gs[t]);
        FormField Ad = adjoint_action(gs[t], restrict_to(approx[b], piece.patch));
        const auto& bb = b < a ? piece.idx[0] : piece.idx[1];
        const auto& aa = a < b ? piece.idx[0] : piece.idx[1];
        for (std::size_t q = 0; q < piece.patch->size(); ++q) {
          double w = psi[b][bb[q]];
          if (w == 0.0) continue;
          for (int mu = 0; mu < n; ++mu) acc.comp[mu][aa[q]] += w * (L.comp[mu][q] + Ad.comp[mu][q]);
        }
      }
    }
    B.locals[a] = std::move(acc);
  });
  return B;
}

}  // namespace ck
