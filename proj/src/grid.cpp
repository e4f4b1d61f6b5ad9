#include "ck/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ck/error.hpp"

namespace ck {

namespace {

int pmod(int a, int n) {
  int r = a % n;
  return r < 0 ? r + n : r;
}

double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

double cosine_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * t));
}

struct Interval {
  int lo, len;
};

std::vector<Interval> intersect_axis(const BaseGrid& g, int a, Interval x, Interval y) {
  std::vector<Interval> out;
  if (!g.periodic[a]) {
    int lo = std::max(x.lo, y.lo), hi = std::min(x.lo + x.len, y.lo + y.len);
    if (hi > lo) out.push_back({lo, hi - lo});
    return out;
  }
  int n = g.dims[a];
  bool fx = x.len >= n, fy = y.len >= n;
  if (fx && fy) return {{0, n}};
  if (fx) return {{pmod(y.lo, n), y.len}};
  if (fy) return {{pmod(x.lo, n), x.len}};
  int p = pmod(x.lo, n), q = pmod(y.lo, n);
  for (int k = -1; k <= 1; ++k) {
    int s = q + k * n;
    int lo = std::max(p, s), hi = std::min(p + x.len, s + y.len);
    if (hi > lo) out.push_back({lo, hi - lo});
  }
  return out;
}

bool axis_may_meet(const BaseGrid& g, int a, Interval x, Interval y) {
  if (!g.periodic[a]) return std::max(x.lo, y.lo) < std::min(x.lo + x.len, y.lo + y.len);
  int n = g.dims[a];
  if (x.len >= n || y.len >= n) return true;
  int d = pmod(y.lo - x.lo, n);
  return d < x.len || d + y.len > n;
}

Chart make_chart(const std::shared_ptr<const BaseGrid>& grid, int id, Box box, Box core, int margin,
                 std::vector<std::array<bool, 2>> sides) {
  Chart c;
  c.id = id;
  c.box = std::move(box);
  c.core = std::move(core);
  c.margin = margin;
  c.margin_side = std::move(sides);
  c.patch = std::make_shared<Patch>(grid, c.box);
  return c;
}

}  // namespace

const char* manifold_name(Manifold m) {
  switch (m) {
    case Manifold::TORUS2: return "TORUS2";
    case Manifold::TORUS4: return "TORUS4";
    case Manifold::SPHERE2: return "SPHERE2";
  }
  return "?";
}

Manifold parse_manifold(const std::string& s) {
  if (s == "TORUS2") return Manifold::TORUS2;
  if (s == "TORUS4") return Manifold::TORUS4;
  if (s == "SPHERE2") return Manifold::SPHERE2;
  throw Error(Errc::InvalidArgument, "unknown manifold '" + s + "'");
}

std::shared_ptr<const BaseGrid> BaseGrid::torus(const std::vector<int>& cells) {
  auto g = std::make_shared<BaseGrid>();
  g->n = static_cast<int>(cells.size());
  if (g->n == 2)
    g->manifold = Manifold::TORUS2;
  else if (g->n == 4)
    g->manifold = Manifold::TORUS4;
  else
    throw Error(Errc::InvalidArgument, "tori are supported in dimensions 2 and 4");
  for (int c : cells) {
    if (c < 8) throw Error(Errc::InvalidArgument, "grid needs at least 8 points per axis");
    g->dims.push_back(c);
    g->spacing.push_back(1.0 / c);
    g->periodic.push_back(true);
  }
  return g;
}

std::shared_ptr<const BaseGrid> BaseGrid::sphere(int ntheta, int nphi) {
  if (ntheta < 8 || nphi < 8 || ntheta % 2 || nphi % 2)
    throw Error(Errc::InvalidArgument, "sphere grid needs even resolutions of at least 8");
  auto g = std::make_shared<BaseGrid>();
  g->manifold = Manifold::SPHERE2;
  g->n = 2;
  g->dims = {ntheta + 1, nphi};
  g->spacing = {std::numbers::pi / ntheta, 2.0 * std::numbers::pi / nphi};
  g->periodic = {false, true};
  return g;
}

std::size_t BaseGrid::num_points() const {
  std::size_t s = 1;
  for (int d : dims) s *= static_cast<std::size_t>(d);
  return s;
}

int BaseGrid::wrap(int axis, int i) const { return periodic[axis] ? pmod(i, dims[axis]) : i; }

double BaseGrid::metric_weight(const int* g) const {
  if (!is_sphere()) {
    double w = 1.0;
    for (double h : spacing) w *= h;
    return w;
  }
  double ht = spacing[0], hp = spacing[1];
  int i = g[0];
  if (i == 0 || i == dims[0] - 1) return (1.0 - std::cos(ht / 2.0)) * hp;
  return 2.0 * std::sin(i * ht) * std::sin(ht / 2.0) * hp;
}

double BaseGrid::inv_metric(const int* g, int axis) const {
  if (!is_sphere() || axis == 0) return 1.0;
  double ht = spacing[0];
  int i = g[0];
  double s = (i == 0 || i == dims[0] - 1) ? std::sin(ht / 2.0) : std::sin(i * ht);
  return 1.0 / (s * s);
}

double BaseGrid::total_volume() const {
  double v = 0.0;
  for (double w : metric_weights()) v += w;
  return v;
}

std::vector<double> BaseGrid::metric_weights() const {
  std::vector<double> out(num_points());
  std::vector<int> idx(n, 0);
  for (std::size_t p = 0; p < out.size(); ++p) {
    std::size_t r = p;
    for (int a = n - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(r % dims[a]);
      r /= dims[a];
    }
    out[p] = metric_weight(idx.data());
  }
  return out;
}

Patch::Patch(std::shared_ptr<const BaseGrid> grid, Box box) : grid_(std::move(grid)), box_(std::move(box)) {
  const BaseGrid& g = *grid_;
  int n = g.n;
  if (static_cast<int>(box_.lo.size()) != n || static_cast<int>(box_.len.size()) != n)
    throw Error(Errc::InvalidArgument, "box dimension mismatch");
  axes_.resize(n);
  stride_.assign(n, 1);
  for (int a = 0; a < n; ++a) {
    Axis& ax = axes_[a];
    ax.count = box_.len[a];
    ax.h = g.spacing[a];
    if (ax.count < 1) throw Error(Errc::InvalidArgument, "empty box");
    if (g.periodic[a]) {
      if (ax.count > g.dims[a]) throw Error(Errc::InvalidArgument, "box wraps onto itself");
      ax.periodic = ax.count == g.dims[a];
      if (ax.periodic) box_.lo[a] = pmod(box_.lo[a], g.dims[a]);
    } else {
      if (box_.lo[a] < 0 || box_.lo[a] + ax.count > g.dims[a])
        throw Error(Errc::InvalidArgument, "box leaves a non-periodic axis");
      ax.pole_lo = g.is_sphere() && a == 0 && box_.lo[a] == 0;
      ax.pole_hi = g.is_sphere() && a == 0 && box_.lo[a] + ax.count == g.dims[a];
    }
  }
  for (int a = n - 2; a >= 0; --a) stride_[a] = stride_[a + 1] * axes_[a + 1].count;
  size_ = stride_[0] * axes_[0].count;

  w_.resize(size_);
  pw_.resize(size_);
  ginv_.assign(n, std::vector<double>(size_));
  std::vector<int> loc(n), glob(n);
  for (std::size_t p = 0; p < size_; ++p) {
    unflatten(p, loc.data());
    double pw = 1.0;
    for (int a = 0; a < n; ++a) {
      glob[a] = global(a, loc[a]);
      double h = axes_[a].h;
      if ((axes_[a].pole_lo && loc[a] == 0) || (axes_[a].pole_hi && loc[a] == axes_[a].count - 1)) h *= 0.5;
      pw *= h;
    }
    w_[p] = g.metric_weight(glob.data());
    pw_[p] = pw;
    for (int a = 0; a < n; ++a) ginv_[a][p] = g.inv_metric(glob.data(), a);
  }
}

void Patch::unflatten(std::size_t p, int* idx) const {
  for (int a = 0; a < dim(); ++a) {
    idx[a] = static_cast<int>(p / stride_[a]);
    p %= stride_[a];
  }
}

std::size_t Patch::flatten(const int* idx) const {
  std::size_t p = 0;
  for (int a = 0; a < dim(); ++a) p += stride_[a] * static_cast<std::size_t>(idx[a]);
  return p;
}

int Patch::global(int a, int i) const { return grid_->wrap(a, box_.lo[a] + i); }

int Patch::local_of_global(int a, int g) const {
  if (grid_->periodic[a]) {
    int d = pmod(g - box_.lo[a], grid_->dims[a]);
    return d < axes_[a].count ? d : -1;
  }
  int d = g - box_.lo[a];
  return (d >= 0 && d < axes_[a].count) ? d : -1;
}

double Patch::coord(int a, int i) const { return (box_.lo[a] + i) * axes_[a].h; }

Stencil Patch::stencil(int a, int i) const {
  const Axis& ax = axes_[a];
  double h = ax.h;
  Stencil s;
  int n = ax.count;
  if (ax.periodic || (i > 0 && i < n - 1)) {
    s.k = 2;
    s.off = {1, -1, 0};
    s.c = {0.5 / h, -0.5 / h, 0.0};
    return s;
  }
  if (n == 1) return s;
  if (n == 2 || (i == 0 && ax.pole_lo) || (i == n - 1 && ax.pole_hi)) {
    s.k = 2;
    if (i == 0)
      s.off = {1, 0, 0};
    else
      s.off = {0, -1, 0};
    s.c = {1.0 / h, -1.0 / h, 0.0};
    return s;
  }
  s.k = 3;
  if (i == 0) {
    s.off = {0, 1, 2};
    s.c = {-1.5 / h, 2.0 / h, -0.5 / h};
  } else {
    s.off = {0, -1, -2};
    s.c = {1.5 / h, -2.0 / h, 0.5 / h};
  }
  return s;
}

PatchPtr global_patch(const std::shared_ptr<const BaseGrid>& grid) {
  Box b;
  b.lo.assign(grid->n, 0);
  b.len = grid->dims;
  return std::make_shared<Patch>(grid, b);
}

std::size_t box_points(const Box& b) {
  std::size_t s = 1;
  for (int l : b.len) s *= static_cast<std::size_t>(l);
  return s;
}

std::vector<Box> intersect_boxes(const BaseGrid& grid, const Box& a, const Box& b) {
  int n = grid.n;
  for (int ax = 0; ax < n; ++ax)
    if (!axis_may_meet(grid, ax, {a.lo[ax], a.len[ax]}, {b.lo[ax], b.len[ax]})) return {};
  std::vector<std::vector<Interval>> per(n);
  for (int ax = 0; ax < n; ++ax) {
    per[ax] = intersect_axis(grid, ax, {a.lo[ax], a.len[ax]}, {b.lo[ax], b.len[ax]});
    if (per[ax].empty()) return {};
  }
  std::vector<Box> out;
  std::vector<std::size_t> pick(n, 0);
  while (true) {
    Box bx;
    for (int ax = 0; ax < n; ++ax) {
      bx.lo.push_back(per[ax][pick[ax]].lo);
      bx.len.push_back(per[ax][pick[ax]].len);
    }
    out.push_back(bx);
    int ax = n - 1;
    while (ax >= 0 && ++pick[ax] == per[ax].size()) pick[ax--] = 0;
    if (ax < 0) break;
  }
  return out;
}

std::vector<long> patch_index_map(const Patch& sub, const Patch& super) {
  int n = sub.dim();
  std::vector<long> out(sub.size());
  std::vector<int> loc(n), sl(n);
  for (std::size_t p = 0; p < sub.size(); ++p) {
    sub.unflatten(p, loc.data());
    bool ok = true;
    for (int a = 0; a < n && ok; ++a) {
      sl[a] = super.local_of_global(a, sub.global(a, loc[a]));
      ok = sl[a] >= 0;
    }
    out[p] = ok ? static_cast<long>(super.flatten(sl.data())) : -1;
  }
  return out;
}

namespace {

OverlapPiece make_piece(const std::shared_ptr<const BaseGrid>& grid, const Box& box,
                        const std::vector<const Chart*>& members) {
  OverlapPiece piece;
  piece.box = box;
  piece.patch = std::make_shared<Patch>(grid, box);
  for (const Chart* c : members) {
    auto m = patch_index_map(*piece.patch, *c->patch);
    std::vector<std::size_t> idx(m.size());
    for (std::size_t q = 0; q < m.size(); ++q) {
      if (m[q] < 0) throw Error(Errc::InvalidArgument, "overlap point outside chart");
      idx[q] = static_cast<std::size_t>(m[q]);
    }
    piece.idx.push_back(std::move(idx));
  }
  return piece;
}

}  // namespace

Cover::Cover(std::shared_ptr<const BaseGrid> grid, std::vector<Chart> charts, std::string label)
    : grid_(std::move(grid)), charts_(std::move(charts)), label_(std::move(label)) {
  int m = size();
  for (int i = 0; i < m; ++i) charts_[i].id = i;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      auto boxes = intersect_boxes(*grid_, charts_[i].box, charts_[j].box);
      if (boxes.empty()) continue;
      Overlap ov;
      for (const Box& b : boxes) ov.push_back(make_piece(grid_, b, {&charts_[i], &charts_[j]}));
      pairs_.emplace(std::make_pair(i, j), std::move(ov));
    }
  for (const auto& [key, ov] : pairs_) {
    for (int k = key.second + 1; k < m; ++k) {
      Overlap tri;
      for (const OverlapPiece& piece : ov)
        for (const Box& b : intersect_boxes(*grid_, piece.box, charts_[k].box))
          tri.push_back(make_piece(grid_, b, {&charts_[key.first], &charts_[key.second], &charts_[k]}));
      if (!tri.empty()) triples_.emplace(std::array<int, 3>{key.first, key.second, k}, std::move(tri));
    }
  }
  pou_ = std::make_shared<PartitionOfUnity>(build_partition_of_unity(*this));
}

const Overlap* Cover::overlap(int i, int j) const {
  auto it = pairs_.find({i, j});
  return it == pairs_.end() ? nullptr : &it->second;
}

const PartitionOfUnity& Cover::pou() const { return *pou_; }

int default_margin(const BaseGrid& grid) {
  int m = grid.is_sphere() ? (grid.dims[0] - 1) : *std::min_element(grid.dims.begin(), grid.dims.end());
  return std::max(4, m / 8);
}

CoverPtr single_chart_cover(const std::shared_ptr<const BaseGrid>& grid) {
  Box b;
  b.lo.assign(grid->n, 0);
  b.len = grid->dims;
  std::vector<std::array<bool, 2>> sides(grid->n, {false, false});
  std::vector<Chart> charts{make_chart(grid, 0, b, b, 0, sides)};
  return std::make_shared<Cover>(grid, std::move(charts), "single");
}

CoverPtr torus_cover(const std::shared_ptr<const BaseGrid>& grid, const std::vector<int>& cpa, int margin) {
  int n = grid->n;
  if (static_cast<int>(cpa.size()) != n) throw Error(Errc::InvalidArgument, "charts-per-axis size mismatch");
  std::vector<std::vector<Interval>> cores(n), boxes(n);
  bool any_split = false;
  for (int a = 0; a < n; ++a) {
    int c = cpa[a], N = grid->dims[a];
    if (c < 1) throw Error(Errc::InvalidArgument, "charts per axis must be positive");
    if (c == 1) {
      cores[a].push_back({0, N});
      boxes[a].push_back({0, N});
      continue;
    }
    any_split = true;
    for (int k = 0; k < c; ++k) {
      int lo = static_cast<int>(static_cast<long>(k) * N / c);
      int hi = static_cast<int>(static_cast<long>(k + 1) * N / c);
      if (hi - lo < 2) throw Error(Errc::MarginExhausted, "chart cores thinner than 2 cells");
      cores[a].push_back({lo, hi - lo});
      boxes[a].push_back({lo - margin, hi - lo + 2 * margin});
      if (hi - lo + 2 * margin >= N)
        throw Error(Errc::InvalidArgument, "charts wrap around a torus axis; use more charts or a smaller margin");
    }
  }
  if (any_split && margin < 4) throw Error(Errc::InvalidArgument, "chart margin must be at least 4 cells");
  std::vector<Chart> charts;
  std::vector<std::size_t> pick(n, 0);
  while (true) {
    Box b, core;
    std::vector<std::array<bool, 2>> sides(n);
    for (int a = 0; a < n; ++a) {
      b.lo.push_back(boxes[a][pick[a]].lo);
      b.len.push_back(boxes[a][pick[a]].len);
      core.lo.push_back(cores[a][pick[a]].lo);
      core.len.push_back(cores[a][pick[a]].len);
      bool split = cpa[a] > 1;
      sides[a] = {split, split};
    }
    charts.push_back(make_chart(grid, static_cast<int>(charts.size()), b, core, any_split ? margin : 0, sides));
    int a = n - 1;
    while (a >= 0 && ++pick[a] == boxes[a].size()) pick[a--] = 0;
    if (a < 0) break;
  }
  std::string label = "torus";
  for (int c : cpa) label += "-" + std::to_string(c);
  return std::make_shared<Cover>(grid, std::move(charts), label);
}

CoverPtr sphere_cover(const std::shared_ptr<const BaseGrid>& grid, int K, int margin) {
  if (!grid->is_sphere()) throw Error(Errc::InvalidArgument, "sphere cover on a non-sphere grid");
  if (K < 2 || K % 2) throw Error(Errc::InvalidArgument, "band count must be even and at least 2");
  if (margin < 4) throw Error(Errc::InvalidArgument, "chart margin must be at least 4 cells");
  int nt = grid->dims[0] - 1, np = grid->dims[1];
  auto tcore = [&](int t) {
    int lo = static_cast<int>(static_cast<long>(t) * nt / K);
    int hi = t == K - 1 ? nt + 1 : static_cast<int>(static_cast<long>(t + 1) * nt / K);
    return Interval{lo, hi - lo};
  };
  for (int t = 0; t < K; ++t)
    if (tcore(t).len < 4)
      throw Error(Errc::MarginExhausted, "refinement depth exceeds the grid resolution");
  std::vector<Chart> charts;
  // north cap
  {
    Interval c = tcore(0);
    int hi = std::min(nt + 1, c.lo + c.len + margin);
    Box b{{0, 0}, {hi, np}}, core{{0, 0}, {c.len, np}};
    charts.push_back(make_chart(grid, 0, b, core, margin, {{false, true}, {false, false}}));
  }
  int sectors = 2 * K;
  for (int t = 1; t < K - 1; ++t) {
    Interval c = tcore(t);
    int lo = c.lo - margin, hi = c.lo + c.len + margin;
    if (lo < 1 || hi > nt) throw Error(Errc::MarginExhausted, "band chart reaches a pole");
    for (int s = 0; s < sectors; ++s) {
      int plo = static_cast<int>(static_cast<long>(s) * np / sectors);
      int phi = static_cast<int>(static_cast<long>(s + 1) * np / sectors);
      if (phi - plo < 4) throw Error(Errc::MarginExhausted, "refinement depth exceeds the grid resolution");
      if (phi - plo + 2 * margin >= np) throw Error(Errc::InvalidArgument, "sector chart wraps around");
      Box b{{lo, plo - margin}, {hi - lo, phi - plo + 2 * margin}};
      Box core{{c.lo, plo}, {c.len, phi - plo}};
      charts.push_back(make_chart(grid, 0, b, core, margin, {{true, true}, {true, true}}));
    }
  }
  // south cap
  {
    Interval c = tcore(K - 1);
    int lo = std::max(0, c.lo - margin);
    Box b{{lo, 0}, {nt + 1 - lo, np}}, core{{c.lo, 0}, {c.len, np}};
    charts.push_back(make_chart(grid, 0, b, core, margin, {{true, false}, {false, false}}));
  }
  return std::make_shared<Cover>(grid, std::move(charts), "sphere-" + std::to_string(K));
}

PartitionOfUnity build_partition_of_unity(const Cover& cover, BumpProfile profile) {
  const BaseGrid& g = cover.grid();
  int n = g.n;
  auto step = profile == BumpProfile::Smooth ? smooth_step : cosine_step;
  PartitionOfUnity pou;
  pou.profile = profile;
  std::vector<double> total(g.num_points(), 0.0);
  std::vector<std::vector<std::size_t>> gidx(cover.size());
  std::vector<int> loc(n);
  for (const Chart& c : cover.charts()) {
    const Patch& P = *c.patch;
    std::vector<double> b(P.size(), 1.0);
    std::vector<std::size_t> gi(P.size());
    if (c.margin < 2 && std::any_of(c.margin_side.begin(), c.margin_side.end(),
                                    [](auto s) { return s[0] || s[1]; }))
      throw Error(Errc::MarginExhausted, "chart margin below 2 cells");
    double width = 2.0 * c.margin - 3.0;
    for (std::size_t p = 0; p < P.size(); ++p) {
      P.unflatten(p, loc.data());
      double v = 1.0;
      std::size_t lin = 0;
      for (int a = 0; a < n; ++a) {
        int cnt = P.axis(a).count;
        if (c.margin_side[a][0]) v *= step((loc[a] - 1) / width);
        if (c.margin_side[a][1]) v *= step((cnt - 2 - loc[a]) / width);
        lin = lin * g.dims[a] + P.global(a, loc[a]);
      }
      b[p] = v;
      gi[p] = lin;
      total[lin] += v;
    }
    pou.weights.push_back(std::move(b));
    gidx[c.id] = std::move(gi);
  }
  for (double t : total)
    if (t < 1e-8) throw Error(Errc::CoverGap, "partition of unity denominator vanishes");
  for (int c = 0; c < cover.size(); ++c)
    for (std::size_t p = 0; p < pou.weights[c].size(); ++p) pou.weights[c][p] /= total[gidx[c][p]];

  // C_part: sup |d psi| times the smallest overlap measure to the power 1/n
  std::vector<double> min_meas(cover.size(), -1.0);
  for (const auto& [key, ov] : cover.pairs()) {
    double m = 0.0;
    for (const auto& piece : ov)
      for (double w : piece.patch->weights()) m += w;
    for (int c : {key.first, key.second})
      if (min_meas[c] < 0 || m < min_meas[c]) min_meas[c] = m;
  }
  for (const Chart& c : cover.charts()) {
    if (min_meas[c.id] < 0) continue;
    const Patch& P = *c.patch;
    const auto& psi = pou.weights[c.id];
    double sup = 0.0;
    for (std::size_t p = 0; p < P.size(); ++p) {
      P.unflatten(p, loc.data());
      double s2 = 0.0;
      for (int a = 0; a < n; ++a) {
        Stencil st = P.stencil(a, loc[a]);
        double d = 0.0;
        for (int k = 0; k < st.k; ++k) {
          int q = loc[a] + st.off[k];
          if (P.axis(a).periodic) q = (q + P.axis(a).count) % P.axis(a).count;
          d += st.c[k] * psi[p + (static_cast<long>(q) - loc[a]) * static_cast<long>(P.stride(a))];
        }
        s2 += P.inv_metric(p, a) * d * d;
      }
      sup = std::max(sup, std::sqrt(s2));
    }
    pou.c_part = std::max(pou.c_part, sup * std::pow(min_meas[c.id], 1.0 / n));
  }
  return pou;
}

CoverPtr shrink_cover(const CoverPtr& cover, int cells) {
  if (cells < 0) throw Error(Errc::InvalidArgument, "negative shrink");
  std::vector<Chart> charts;
  for (const Chart& c : cover->charts()) {
    bool has_margin = std::any_of(c.margin_side.begin(), c.margin_side.end(), [](auto s) { return s[0] || s[1]; });
    if (has_margin && c.margin - cells < 2)
      throw Error(Errc::MarginExhausted, "shrinking leaves fewer than 2 margin cells");
    Box b = c.box;
    for (int a = 0; a < cover->grid().n; ++a) {
      if (c.margin_side[a][0]) {
        b.lo[a] += cells;
        b.len[a] -= cells;
      }
      if (c.margin_side[a][1]) b.len[a] -= cells;
    }
    charts.push_back(make_chart(cover->grid_ptr(), c.id, b, c.core, has_margin ? c.margin - cells : c.margin,
                                c.margin_side));
  }
  auto out = std::make_shared<Cover>(cover->grid_ptr(), std::move(charts),
                                     cover->label() + "/shrink" + std::to_string(cells));
  Refinement r;
  r.parent = cover;
  for (int i = 0; i < cover->size(); ++i) r.map.push_back(i);
  out->set_refinement(std::move(r));
  return out;
}

std::vector<int> refinement_map(const Cover& child, const Cover& parent, int clearance) {
  const BaseGrid& g = child.grid();
  std::vector<int> map;
  for (const Chart& v : child.charts()) {
    int found = -1;
    for (const Chart& u : parent.charts()) {
      bool ok = true;
      for (int a = 0; a < g.n && ok; ++a) {
        const Axis& ua = u.patch->axis(a);
        if (ua.periodic) continue;
        if (v.patch->axis(a).periodic) {
          ok = false;
          break;
        }
        int d = g.periodic[a] ? pmod(v.box.lo[a] - u.box.lo[a], g.dims[a]) : v.box.lo[a] - u.box.lo[a];
        int clo = u.margin_side[a][0] ? clearance : 0;
        int chi = u.margin_side[a][1] ? clearance : 0;
        ok = d >= clo && d + v.box.len[a] <= u.box.len[a] - chi;
      }
      if (ok) {
        found = u.id;
        break;
      }
    }
    if (found < 0) throw Error(Errc::MarginExhausted, "no parent chart contains chart " + std::to_string(v.id));
    map.push_back(found);
  }
  return map;
}

}  // namespace ck
