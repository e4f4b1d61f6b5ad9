#include "ck/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

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

// Nodes of box shrunk by `inset` layers.
std::vector<std::size_t> box_nodes(const NodeGrid& g, const IndexBox& box, int inset) {
  std::vector<std::size_t> out;
  std::vector<int> idx(g.n);
  for (int a = 0; a < g.n; ++a)
    if (box.hi[a] - box.lo[a] < 2 * inset) return out;
  for (int a = 0; a < g.n; ++a) idx[a] = box.lo[a] + inset;
  while (true) {
    std::size_t p = 0;
    for (int a = 0; a < g.n; ++a) p += g.stride(a) * idx[a];
    out.push_back(p);
    int a = g.n - 1;
    for (; a >= 0; --a) {
      if (++idx[a] <= box.hi[a] - inset) break;
      idx[a] = box.lo[a] + inset;
    }
    if (a < 0) break;
  }
  return out;
}

double dot(const MatField& a, const MatField& b, const std::vector<std::size_t>& nodes) {
  double s = 0.0;
  for (std::size_t p : nodes) s += (a[p].adjoint() * b[p]).trace().real();
  return s;
}

void zero_outer_layer(const NodeGrid& g, MatField& u, const IndexBox& box) {
  auto all = box_nodes(g, box, 0);
  std::vector<char> inner(g.size(), 0);
  for (std::size_t p : box_nodes(g, box, 1)) inner[p] = 1;
  for (std::size_t p : all)
    if (!inner[p]) u[p].setZero();
}

double sq(double x) { return x * x; }

}  // namespace

NodeGrid NodeGrid::box(int n, int cells, double length) {
  if (n < 1 || cells < 4) throw Error(Errc::InvalidArgument, "box needs at least 4 cells per axis");
  NodeGrid g;
  g.n = n;
  g.cells.assign(n, cells);
  g.h.assign(n, length / cells);
  return g;
}

std::size_t NodeGrid::size() const {
  std::size_t s = 1;
  for (int c : cells) s *= static_cast<std::size_t>(c + 1);
  return s;
}

std::size_t NodeGrid::stride(int a) const {
  std::size_t s = 1;
  for (int b = n - 1; b > a; --b) s *= static_cast<std::size_t>(cells[b] + 1);
  return s;
}

void NodeGrid::unflatten(std::size_t p, int* idx) const {
  for (int a = 0; a < n; ++a) {
    std::size_t s = stride(a);
    idx[a] = static_cast<int>(p / s);
    p %= s;
  }
}

double NodeGrid::cell_volume() const {
  double v = 1.0;
  for (double x : h) v *= x;
  return v;
}

IndexBox IndexBox::full(const NodeGrid& g) {
  IndexBox b;
  b.lo.assign(g.n, 0);
  b.hi = g.cells;
  return b;
}

IndexBox IndexBox::shrunk(int c) const {
  IndexBox b = *this;
  for (std::size_t a = 0; a < lo.size(); ++a) {
    b.lo[a] += c;
    b.hi[a] -= c;
  }
  return b;
}

bool IndexBox::contains(const IndexBox& in, int clearance) const {
  for (std::size_t a = 0; a < lo.size(); ++a)
    if (in.lo[a] < lo[a] + clearance || in.hi[a] > hi[a] - clearance || in.lo[a] > in.hi[a]) return false;
  return true;
}

DriftProblem DriftProblem::sample(const NodeGrid& g, const std::function<Mat2(const double*, int)>& A,
                                  const std::function<Mat2(const double*)>& F) {
  DriftProblem p;
  p.grid = g;
  p.A.assign(g.n, MatField(g.size(), Mat2::Zero()));
  p.F.assign(g.size(), Mat2::Zero());
  std::vector<int> idx(g.n);
  std::vector<double> x(g.n);
  for (std::size_t q = 0; q < g.size(); ++q) {
    g.unflatten(q, idx.data());
    for (int a = 0; a < g.n; ++a) x[a] = idx[a] * g.h[a];
    for (int a = 0; a < g.n; ++a) p.A[a][q] = A(x.data(), a);
    p.F[q] = F(x.data());
  }
  return p;
}

MatField laplacian(const NodeGrid& g, const MatField& u, const IndexBox& box) {
  MatField out(g.size(), Mat2::Zero());
  for (std::size_t p : box_nodes(g, box, 1)) {
    Mat2 s = Mat2::Zero();
    for (int a = 0; a < g.n; ++a) {
      std::size_t st = g.stride(a);
      s += (u[p + st] - 2.0 * u[p] + u[p - st]) / (g.h[a] * g.h[a]);
    }
    out[p] = s;
  }
  return out;
}

MatField gradient(const NodeGrid& g, const MatField& u, int a, const IndexBox& box) {
  MatField out(g.size(), Mat2::Zero());
  std::size_t st = g.stride(a);
  for (std::size_t p : box_nodes(g, box, 1)) out[p] = (u[p + st] - u[p - st]) / (2.0 * g.h[a]);
  return out;
}

MatField drift(const NodeGrid& g, const std::vector<MatField>& A, const MatField& u, const IndexBox& box) {
  MatField out(g.size(), Mat2::Zero());
  auto nodes = box_nodes(g, box, 1);
  for (int a = 0; a < g.n; ++a) {
    std::size_t st = g.stride(a);
    for (std::size_t p : nodes) out[p] += A[a][p] * ((u[p + st] - u[p - st]) / (2.0 * g.h[a]));
  }
  return out;
}

double mat_norm(const Mat2& m) { return m.norm() / std::sqrt(2.0); }

double ln_norm(const NodeGrid& g, const std::vector<MatField>& A, double p) {
  std::vector<double> f(g.size()), w(g.size(), g.cell_volume());
  for (std::size_t q = 0; q < g.size(); ++q) {
    double s = 0.0;
    for (int a = 0; a < g.n; ++a) s += sq(mat_norm(A[a][q]));
    f[q] = std::sqrt(s);
  }
  return lp_norm(f, w, p);
}

double w12_seminorm(const NodeGrid& g, const MatField& u, const IndexBox& box) {
  double s = 0.0, vol = g.cell_volume();
  for (std::size_t p : box_nodes(g, box, 0)) {
    std::vector<int> idx(g.n);
    g.unflatten(p, idx.data());
    for (int a = 0; a < g.n; ++a)
      if (idx[a] < box.hi[a]) s += vol * sq(mat_norm(u[p + g.stride(a)] - u[p]) / g.h[a]);
  }
  return std::sqrt(s);
}

double w12_norm(const NodeGrid& g, const MatField& u, const IndexBox& box) {
  double s = 0.0, vol = g.cell_volume();
  for (std::size_t p : box_nodes(g, box, 0)) s += vol * sq(mat_norm(u[p]));
  return std::sqrt(s + sq(w12_seminorm(g, u, box)));
}

double l2_norm_interior(const NodeGrid& g, const MatField& u, const IndexBox& box) {
  double s = 0.0, vol = g.cell_volume();
  for (std::size_t p : box_nodes(g, box, 1)) s += vol * sq(mat_norm(u[p]));
  return std::sqrt(s);
}

CgReport poisson_dirichlet(const NodeGrid& g, const MatField& rhs, MatField& u, const IndexBox& box, double rel_tol,
                           int max_iter) {
  CgReport rep;
  auto nodes = box_nodes(g, box, 1);
  zero_outer_layer(g, u, box);
  double diag = 0.0;
  for (int a = 0; a < g.n; ++a) diag += 2.0 / (g.h[a] * g.h[a]);
  // solve (-Lap) u = -rhs
  MatField b(g.size(), Mat2::Zero());
  for (std::size_t p : nodes) b[p] = -rhs[p];
  double bn = std::sqrt(dot(b, b, nodes));
  if (bn == 0.0) {
    for (std::size_t p : nodes) u[p].setZero();
    return rep;
  }
  MatField r(g.size(), Mat2::Zero()), z(g.size(), Mat2::Zero()), d(g.size(), Mat2::Zero());
  MatField Au = laplacian(g, u, box);
  for (std::size_t p : nodes) r[p] = b[p] + Au[p];
  for (std::size_t p : nodes) z[p] = r[p] / diag;
  d = z;
  double rz = dot(r, z, nodes);
  for (int it = 0; it < max_iter; ++it) {
    double rn = std::sqrt(dot(r, r, nodes));
    rep.relative_residual = rn / bn;
    rep.iterations = it;
    if (rep.relative_residual <= rel_tol) return rep;
    MatField Ad = laplacian(g, d, box);
    for (std::size_t p : nodes) Ad[p] = -Ad[p];
    double alpha = rz / dot(d, Ad, nodes);
    for (std::size_t p : nodes) {
      u[p] += alpha * d[p];
      r[p] -= alpha * Ad[p];
      z[p] = r[p] / diag;
    }
    double rz_new = dot(r, z, nodes);
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t p : nodes) d[p] = z[p] + beta * d[p];
  }
  throw Error(Errc::NonConvergence, "Poisson conjugate gradients did not converge");
}

namespace {

MatField residual(const DriftProblem& pb, const MatField& v, const IndexBox& box) {
  MatField lap = laplacian(pb.grid, v, box), dr = drift(pb.grid, pb.A, v, box);
  MatField out(pb.grid.size(), Mat2::Zero());
  for (std::size_t p : box_nodes(pb.grid, box, 1)) out[p] = lap[p] - dr[p] - pb.F[p];
  return out;
}

void fit_envelope(const std::vector<double>& r, double& rate, double& r2) {
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < r.size(); ++k)
    if (r[k] > 0.0) {
      xs.push_back(static_cast<double>(k));
      ys.push_back(std::log(r[k]));
    }
  rate = 0.0;
  r2 = 1.0;
  if (xs.size() < 3) return;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += sq(xs[i] - mx);
    syy += sq(ys[i] - my);
  }
  double slope = sxy / sxx;
  rate = std::exp(slope);
  r2 = syy > 0 ? sq(sxy) / (sxx * syy) : 1.0;
}

}  // namespace

DriftSolution solve_drift_dirichlet(const DriftProblem& pb, const DriftOptions& opt, const IndexBox* boxp) {
  if (!(opt.tol > 0.0)) throw Error(Errc::InvalidArgument, "tolerance must be positive");
  const NodeGrid& g = pb.grid;
  IndexBox box = boxp ? *boxp : IndexBox::full(g);
  DriftSolution sol;
  DriftReport& rep = sol.report;
  rep.a_ln = ln_norm(g, pb.A, g.n);
  MatField v = opt.initial ? *opt.initial : MatField(g.size(), Mat2::Zero());
  zero_outer_layer(g, v, box);
  auto nodes = box_nodes(g, box, 1);
  int stalled = 0;
  for (int k = 0; k < opt.max_iter; ++k) {
    MatField rhs = drift(g, pb.A, v, box);
    for (std::size_t p : nodes) rhs[p] += pb.F[p];
    MatField next = v;
    poisson_dirichlet(g, rhs, next, box, opt.cg_tol);
    MatField diff(g.size(), Mat2::Zero());
    for (std::size_t p : box_nodes(g, box, 0)) diff[p] = next[p] - v[p];
    double d = w12_norm(g, diff, box);
    if (!rep.distances.empty() && d >= rep.distances.back())
      ++stalled;
    else
      stalled = 0;
    rep.distances.push_back(d);
    v = std::move(next);
    rep.residuals.push_back(l2_norm_interior(g, residual(pb, v, box), box));
    rep.iterations = k + 1;
    if (stalled >= 5) throw Error(Errc::ContractionFailure, "iterate distance stopped decreasing");
    if (d <= opt.tol) break;
    if (k + 1 == opt.max_iter) throw Error(Errc::NonConvergence, "fixed-point iteration hit max_iter");
  }
  const auto& ds = rep.distances;
  if (ds.size() >= 2) {
    std::size_t start = ds.size() > 6 ? ds.size() - 6 : 0;
    double lr = 0.0;
    int cnt = 0;
    for (std::size_t k = start + 1; k < ds.size(); ++k)
      if (ds[k] > 0 && ds[k - 1] > 0) {
        lr += std::log(ds[k] / ds[k - 1]);
        ++cnt;
      }
    rep.contraction = cnt ? std::exp(lr / cnt) : 0.0;
  }
  MatField res = residual(pb, v, box);
  rep.residual_l2 = l2_norm_interior(g, res, box);
  std::vector<double> f, w;
  for (std::size_t p : nodes) {
    f.push_back(mat_norm(res[p]));
    w.push_back(g.cell_volume());
  }
  rep.residual_lorentz = f.empty() ? 0.0 : lorentz_quasinorm(f, w, opt.lorentz_s, opt.lorentz_theta);
  fit_envelope(rep.residuals, rep.envelope_rate, rep.envelope_r2);
  sol.alpha = std::move(v);
  return sol;
}

constexpr int kProbeSteps = 6;

double contraction_probe(const NodeGrid& g, const std::vector<MatField>& A, int pairs, std::uint64_t seed) {
  IndexBox box = IndexBox::full(g);
  auto nodes = box_nodes(g, box, 1);
  std::vector<double> best(std::max(pairs, 0), 0.0);
  parallel_for(best.size(), [&](std::size_t t) {
    std::seed_seq ss{seed, static_cast<std::uint64_t>(t)};
    std::mt19937_64 rng(ss);
    std::normal_distribution<double> nd;
    auto rmat = [&] {
      Mat2 m;
      m << cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng));
      return m;
    };
    std::vector<int> idx(g.n);
    // v - w: a few low sine modes plus grid-scale noise
    MatField d(g.size(), Mat2::Zero());
    for (int mode = 0; mode < 4; ++mode) {
      Mat2 c = rmat();
      std::vector<int> k(g.n);
      for (int a = 0; a < g.n; ++a) k[a] = 1 + static_cast<int>(rng() % 4);
      for (std::size_t p : nodes) {
        g.unflatten(p, idx.data());
        double s = 1.0;
        for (int a = 0; a < g.n; ++a) s *= std::sin(std::numbers::pi * k[a] * idx[a] / g.cells[a]);
        d[p] += s * c;
      }
    }
    for (std::size_t p : nodes) d[p] += 0.1 * rmat();
    // T is affine, so T(v) - T(w) = L(v - w); the pair (Tv, Tw) is probed next,
    // which pulls the difference towards the dominant direction of L
    for (int step = 0; step < kProbeSteps; ++step) {
      MatField rhs = drift(g, A, d, box), Td(g.size(), Mat2::Zero());
      poisson_dirichlet(g, rhs, Td, box, 1e-10);
      double den = w12_seminorm(g, d, box), num = w12_seminorm(g, Td, box);
      if (!(den > 0) || !(num > 0)) break;
      best[t] = std::max(best[t], num / den);
      for (auto& m : Td) m /= num;
      d = std::move(Td);
    }
  });
  return best.empty() ? 0.0 : *std::max_element(best.begin(), best.end());
}

EpsCalibration calibrate_eps_elliptic(const NodeGrid& g, const std::vector<MatField>& A_shape,
                                      const std::vector<double>& ladder, double threshold, std::uint64_t seed) {
  EpsCalibration cal;
  for (double c : ladder) {
    std::vector<MatField> A = A_shape;
    for (auto& f : A)
      for (auto& m : f) m *= c;
    double fac = contraction_probe(g, A, 20, seed);
    double nrm = ln_norm(g, A, g.n);
    cal.scales.push_back(c);
    cal.norms.push_back(nrm);
    cal.factors.push_back(fac);
    if (fac <= threshold) cal.eps = std::max(cal.eps, nrm);
  }
  std::size_t m = cal.scales.size();
  if (m >= 2) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < m; ++i) {
      mx += cal.scales[i];
      my += cal.factors[i];
    }
    mx /= m;
    my /= m;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < m; ++i) {
      sxy += (cal.scales[i] - mx) * (cal.factors[i] - my);
      sxx += sq(cal.scales[i] - mx);
    }
    cal.slope = sxy / sxx;
  }
  return cal;
}

int bootstrap_stage_count(int n, double q, double theta) {
  if (q < 1.0 || theta < 1.0) throw Error(Errc::BadExponent, "bootstrap exponents must be at least 1");
  if (n <= 2 || q <= 2.0 * n / (n - 2)) return 1;
  double lower = n * (q - 2.0) / (2.0 * q);
  for (int m = 2; m < n / 2.0; ++m) {
    bool ok = theta >= q ? m >= lower : m > lower;
    if (ok) return m;
  }
  throw Error(Errc::BadExponent, "no admissible stage count for this exponent");
}

namespace {

struct Terms {
  std::vector<double> u, du, d2u;
};

Terms pointwise_terms(const NodeGrid& g, const MatField& u, const IndexBox& box) {
  Terms t;
  for (std::size_t p : box_nodes(g, box, 1)) {
    t.u.push_back(mat_norm(u[p]));
    double s1 = 0.0, s2 = 0.0;
    for (int a = 0; a < g.n; ++a) {
      std::size_t sa = g.stride(a);
      s1 += sq(mat_norm((u[p + sa] - u[p - sa]) / (2 * g.h[a])));
      s2 += sq(mat_norm((u[p + sa] - 2.0 * u[p] + u[p - sa]) / (g.h[a] * g.h[a])));
      for (int b = a + 1; b < g.n; ++b) {
        std::size_t sb = g.stride(b);
        Mat2 m = (u[p + sa + sb] - u[p + sa - sb] - u[p - sa + sb] + u[p - sa - sb]) / (4 * g.h[a] * g.h[b]);
        s2 += 2.0 * sq(mat_norm(m));
      }
    }
    t.du.push_back(std::sqrt(s1));
    t.d2u.push_back(std::sqrt(s2));
  }
  return t;
}

}  // namespace

double wkp_norm(const NodeGrid& g, const MatField& u, const IndexBox& box, int k, double p) {
  Terms t = pointwise_terms(g, u, box);
  std::vector<double> w(t.u.size(), g.cell_volume());
  double s = lp_norm(t.u, w, p) + lp_norm(t.du, w, p);
  if (k >= 2) s += lp_norm(t.d2u, w, p);
  return s;
}

double w2_lorentz_norm(const NodeGrid& g, const MatField& u, const IndexBox& box, double s, double theta) {
  Terms t = pointwise_terms(g, u, box);
  std::vector<double> w(t.u.size(), g.cell_volume());
  return lorentz_quasinorm(t.u, w, s, theta) + lorentz_quasinorm(t.du, w, s, theta) +
         lorentz_quasinorm(t.d2u, w, s, theta);
}

BootstrapReport bootstrap_interior(const DriftProblem& pb, const IndexBox& K, const BootstrapOptions& opt) {
  const NodeGrid& g = pb.grid;
  BootstrapReport rep;
  IndexBox full = IndexBox::full(g);
  rep.u = opt.u ? *opt.u : solve_drift_dirichlet(pb, opt.drift).alpha;
  int m = opt.trivial_cutoff ? 0 : bootstrap_stage_count(g.n, opt.q, opt.theta);
  rep.stages = opt.trivial_cutoff ? 1 : m;

  std::vector<IndexBox> boxes{full};
  for (int l = 1; l <= m; ++l) boxes.push_back(boxes.back().shrunk(opt.shrink));
  if (!opt.trivial_cutoff && !boxes.back().contains(K, opt.shrink))
    throw Error(Errc::MarginExhausted, "interior box does not fit inside the nested stage domains");

  MatField cur = rep.u;
  int nstage = opt.trivial_cutoff ? 1 : m + 1;
  for (int l = 1; l <= nstage; ++l) {
    IndexBox D = opt.trivial_cutoff ? full : boxes[l - 1];
    IndexBox T = opt.trivial_cutoff ? full : (l <= m ? boxes[l] : K);
    // cutoff: 0 on the outer layer of D, 1 on T
    MatField phi_m(g.size(), Mat2::Zero());
    std::vector<double> phi(g.size(), 0.0);
    std::vector<int> idx(g.n);
    for (std::size_t p : box_nodes(g, D, 0)) {
      g.unflatten(p, idx.data());
      double v = 1.0;
      if (!opt.trivial_cutoff)
        for (int a = 0; a < g.n; ++a) {
          if (idx[a] < T.lo[a]) v *= smooth_step(double(idx[a] - D.lo[a]) / (T.lo[a] - D.lo[a]));
          if (idx[a] > T.hi[a]) v *= smooth_step(double(D.hi[a] - idx[a]) / (D.hi[a] - T.hi[a]));
        }
      phi[p] = v;
    }
    // exact discrete localized right-hand side, so that phi u solves the
    // localized problem on D
    MatField lapu = laplacian(g, cur, D), dru = drift(g, pb.A, cur, D);
    DriftProblem loc = pb;
    loc.F.assign(g.size(), Mat2::Zero());
    for (std::size_t p : box_nodes(g, D, 1)) {
      Mat2 G = phi[p] * (lapu[p] - dru[p]);
      double lphi = 0.0;
      for (int a = 0; a < g.n; ++a) {
        std::size_t st = g.stride(a);
        double h = g.h[a];
        double dp = phi[p + st] - phi[p], dm = phi[p - st] - phi[p];
        Mat2 up = cur[p + st] - cur[p], um = cur[p - st] - cur[p];
        lphi += (dp + dm) / (h * h);
        G += (dp * up + dm * um) / (h * h);
        double dphi = (phi[p + st] - phi[p - st]) / (2 * h);
        G -= dphi * (pb.A[a][p] * cur[p]);
        G -= pb.A[a][p] * ((dp * up - dm * um) / (2 * h));
      }
      G += lphi * cur[p];
      loc.F[p] = G;
    }
    DriftOptions dopt = opt.drift;
    MatField start(g.size(), Mat2::Zero());
    dopt.initial = &start;
    DriftSolution s = solve_drift_dirichlet(loc, dopt, &D);
    StageReport sr;
    sr.domain = D;
    sr.target = T;
    sr.iterations = s.report.iterations;
    for (std::size_t p : box_nodes(g, D, 0))
      sr.localization_error = std::max(sr.localization_error, mat_norm(s.alpha[p] - phi[p] * cur[p]));
    bool last = l == nstage;
    sr.exponent = last ? opt.q : (g.n > 2 * l ? 2.0 * g.n / (g.n - 2 * l) : kInfinity);
    sr.w1p = wkp_norm(g, s.alpha, T, 1, sr.exponent);
    sr.w2q = wkp_norm(g, s.alpha, T, 2, last ? opt.q : sr.exponent);
    rep.per_stage.push_back(sr);
    // the localized solution agrees with u on T; carry it to the next stage
    for (std::size_t p : box_nodes(g, D, 0)) cur[p] = s.alpha[p];
    if (last) {
      IndexBox KK = opt.trivial_cutoff ? full : K;
      rep.interior_w2q = wkp_norm(g, s.alpha, KK, 2, opt.q);
      rep.interior_w2q_lorentz = w2_lorentz_norm(g, s.alpha, KK, opt.q, opt.theta);
    }
  }
  return rep;
}

}  // namespace ck
