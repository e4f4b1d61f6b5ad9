#include "ck/coulomb.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ck/error.hpp"
#include "ck/norms.hpp"

namespace ck {

namespace {

double norm2(const FormField& a) { return std::sqrt(std::max(inner(a, a), 0.0)); }

// d*d on 0-forms of one patch in the symmetric form K = sum_a D_a^T W G^a D_a,
// so that d*d x = W^{-1} K x.  Solved per algebra coordinate by Jacobi-PCG.
class NeumannOperator {
 public:
  explicit NeumannOperator(const PatchPtr& patch) : patch_(patch) {
    const Patch& P = *patch;
    long N = static_cast<long>(P.size());
    K_.resize(N, N);
    std::vector<int> loc(P.dim());
    for (int a = 0; a < P.dim(); ++a) {
      std::vector<Eigen::Triplet<double>> trip;
      std::vector<double> wg(N);
      for (std::size_t p = 0; p < P.size(); ++p) {
        P.unflatten(p, loc.data());
        Stencil st = P.stencil(a, loc[a]);
        int keep = loc[a];
        for (int k = 0; k < st.k; ++k) {
          int i = loc[a] + st.off[k];
          if (P.axis(a).periodic) i = (i % P.axis(a).count + P.axis(a).count) % P.axis(a).count;
          loc[a] = i;
          trip.emplace_back(static_cast<long>(p), static_cast<long>(P.flatten(loc.data())), st.c[k]);
          loc[a] = keep;
        }
        wg[p] = P.weight(p) * P.inv_metric(p, a);
      }
      Eigen::SparseMatrix<double> D(N, N);
      D.setFromTriplets(trip.begin(), trip.end());
      Eigen::SparseMatrix<double> WD = Eigen::Map<const Eigen::VectorXd>(wg.data(), N).asDiagonal() * D;
      K_ += Eigen::SparseMatrix<double>(D.transpose() * WD);
    }
    K_.makeCompressed();
    diag_ = K_.diagonal();
    // kernel of K: central differences on an even periodic axis also miss the
    // alternating mode, so the kernel is spanned by products of 1 and (-1)^i
    std::vector<int> alt_axes;
    for (int a = 0; a < P.dim(); ++a)
      if (P.axis(a).periodic && P.axis(a).count % 2 == 0) alt_axes.push_back(a);
    for (unsigned mask = 0; mask < (1u << alt_axes.size()); ++mask) {
      Eigen::VectorXd v(N);
      for (long p = 0; p < N; ++p) {
        P.unflatten(p, loc.data());
        int parity = 0;
        for (std::size_t t = 0; t < alt_axes.size(); ++t)
          if (mask >> t & 1u) parity += loc[alt_axes[t]];
        v(p) = parity % 2 ? -1.0 : 1.0;
      }
      kernel_.push_back(v);
    }
    for (long i = 0; i < N; ++i)
      if (!(diag_(i) > 0.0)) diag_(i) = 1.0;
  }

  // x with d*d x = b and zero weighted mean; b must have zero weighted mean.
  FormField solve(const FormField& b, double tol) const {
    const Patch& P = *patch_;
    long N = static_cast<long>(P.size());
    int dims = algebra_dim(b.group);
    FormField x = FormField::zeros(patch_, 0, b.group, b.chart_id);
    std::vector<Eigen::VectorXd> cols(dims, Eigen::VectorXd::Zero(N));
    double c[3];
    for (long p = 0; p < N; ++p) {
      algebra_coords(b.group, b.comp[0][p], c);
      for (int k = 0; k < dims; ++k) cols[k](p) = P.weight(p) * c[k];
    }
    Eigen::VectorXd w(N);
    for (long p = 0; p < N; ++p) w(p) = P.weight(p);
    std::vector<Eigen::VectorXd> sol(dims);
    double total = 0.0;
    for (int k = 0; k < dims; ++k) {
      // the data are compatible up to round-off; drop the kernel components
      for (const auto& v : kernel_) cols[k] -= v * (v.dot(cols[k]) / v.squaredNorm());
      total += cols[k].squaredNorm();
    }
    // one absolute target for all coordinates, so a coordinate at round-off
    // level is not driven below it
    double target = tol * std::sqrt(total);
    for (int k = 0; k < dims; ++k) {
      sol[k] = pcg(cols[k], target);
      // zero weighted mean and no alternating modes, which d cannot see
      for (const auto& v : kernel_) sol[k] -= v * (v.dot(w.cwiseProduct(sol[k])) / v.dot(w.cwiseProduct(v)));
    }
    for (long p = 0; p < N; ++p) {
      for (int k = 0; k < dims; ++k) c[k] = sol[k](p);
      x.comp[0][p] = b.group == Group::U1 ? embed_imag(Group::U1, c[0]) : algebra_from_coords(b.group, c);
    }
    return x;
  }

 private:
  Eigen::VectorXd pcg(const Eigen::VectorXd& b, double target) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
    if (b.norm() <= target) return x;
    Eigen::VectorXd r = b, z = r.cwiseQuotient(diag_), d = z;
    double rz = r.dot(z);
    int max_it = 20 * static_cast<int>(b.size()) + 100;
    for (int it = 0; it < max_it && r.norm() > target; ++it) {
      Eigen::VectorXd Kd = K_ * d;
      double dKd = d.dot(Kd);
      if (!(dKd > 0.0)) break;
      double alpha = rz / dKd;
      x += alpha * d;
      r -= alpha * Kd;
      z = r.cwiseQuotient(diag_);
      double rz_new = r.dot(z);
      d = z + (rz_new / rz) * d;
      rz = rz_new;
    }
    if (r.norm() > 10 * target) throw Error(Errc::NonConvergence, "Neumann solve did not converge");
    return x;
  }

  PatchPtr patch_;
  Eigen::SparseMatrix<double> K_;
  Eigen::VectorXd diag_;
  std::vector<Eigen::VectorXd> kernel_;
};

double boundary_normal(const FormField& B) {
  const Patch& P = *B.patch;
  std::vector<int> loc(P.dim());
  double m = 0.0;
  for (std::size_t p = 0; p < P.size(); ++p) {
    P.unflatten(p, loc.data());
    for (int a = 0; a < P.dim(); ++a) {
      const Axis& ax = P.axis(a);
      if (ax.periodic) continue;
      bool lo = loc[a] == 0 && !ax.pole_lo, hi = loc[a] == ax.count - 1 && !ax.pole_hi;
      if (lo || hi) m = std::max(m, alg_norm(B.group, B.comp[a][p]) * std::sqrt(P.inv_metric(p, a)));
    }
  }
  return m;
}

void finish(CoulombResult& r, const FormField& A) {
  FormField dstar = codifferential(r.A_coulomb);
  r.residual_interior = norm2(dstar) / std::max(norm2(r.A_coulomb), 1e-14);
  r.residual_boundary = boundary_normal(r.A_coulomb);
  r.curvature_norm = lp_norm(chart_curvature(A), std::max(1.0, A.dim() / 2.0));
  r.estimate_ratio = coulomb_estimate_ratio(A, r.A_coulomb);
}

double compatibility(const FormField& dstar) {
  const Patch& P = *dstar.patch;
  FormField one = FormField::zeros(dstar.patch, 0, dstar.group, dstar.chart_id);
  Mat2 e = Mat2::Zero();
  e(0, 0) = cplx(0.0, 1.0);
  double vol = 0.0;
  for (std::size_t p = 0; p < P.size(); ++p) vol += P.weight(p);
  double n = norm2(dstar);
  if (n == 0.0) return 0.0;
  // each algebra direction separately
  double worst = 0.0;
  int dims = algebra_dim(dstar.group);
  for (int k = 0; k < dims; ++k) {
    Mat2 basis = dstar.group == Group::U1 ? e : su2_basis(k);
    for (auto& m : one.comp[0]) m = basis;
    worst = std::max(worst, std::abs(inner(dstar, one)) / (n * std::sqrt(vol)));
  }
  return worst;
}

}  // namespace

FormField chart_curvature(const FormField& A) { return exterior_derivative(A) + wedge_bracket(A, A); }

std::vector<double> gradient_norm(const FormField& A) {
  const Patch& P = *A.patch;
  int n = P.dim();
  std::vector<double> out(P.size());
  std::vector<int> loc(n);
  for (std::size_t p = 0; p < P.size(); ++p) {
    P.unflatten(p, loc.data());
    double s = 0.0;
    for (int mu = 0; mu < n; ++mu)
      for (int a = 0; a < n; ++a) {
        double v = alg_norm(A.group, diff(P, A.comp[mu], p, a, loc[a]));
        s += P.inv_metric(p, a) * P.inv_metric(p, mu) * v * v;
      }
    out[p] = std::sqrt(s);
  }
  return out;
}

double coulomb_estimate_ratio(const FormField& A, const FormField& B) {
  double n = B.dim(), half = std::max(1.0, n / 2.0);
  double num = lp_norm(gradient_norm(B), B.patch->weights(), half) + lp_norm(B, n);
  double den = lp_norm(chart_curvature(A), half);
  if (den > 0.0) return num / den;
  return num > 0.0 ? kInfinity : 0.0;
}

CoulombResult abelian_coulomb(const FormField& A, const CoulombOptions& opt) {
  if (A.group != Group::U1) throw Error(Errc::GroupMismatch, "abelian Coulomb gauge needs U(1)");
  if (A.degree != 1) throw Error(Errc::InvalidArgument, "Coulomb gauge acts on 1-forms");
  FormField dstar = codifferential(A);
  CoulombResult r;
  r.compatibility = compatibility(dstar);
  if (r.compatibility > 1e-8) throw Error(Errc::CompatibilityViolation, "Neumann data fail the Stokes condition");
  FormField x = NeumannOperator(A.patch).solve(-1.0 * dstar, opt.cg_tol);
  r.rho = GroupField::identity(A.patch, Group::U1, A.chart_id);
  for (std::size_t p = 0; p < x.size(); ++p) r.rho.v[p] = expm(Group::U1, to_algebra(Group::U1, x.comp[0][p]));
  r.A_coulomb = A + exterior_derivative(x);
  r.iterations = 1;
  finish(r, A);
  return r;
}

CoulombResult nonabelian_coulomb(const FormField& A, const CoulombOptions& opt) {
  if (A.degree != 1) throw Error(Errc::InvalidArgument, "Coulomb gauge acts on 1-forms");
  Group G = A.group;
  CoulombResult r;
  r.compatibility = compatibility(codifferential(A));
  GroupField rho = GroupField::identity(A.patch, G, A.chart_id);
  FormField B = A;
  FormField dstar = codifferential(B);
  double merit = norm2(dstar);
  double energy0 = std::max(0.5 * inner(A, A), 1e-300);
  NeumannOperator neumann(A.patch);
  for (int k = 0;; ++k) {
    double energy = 0.5 * inner(B, B);
    double res = merit / std::max(std::sqrt(2.0 * energy), 1e-14);
    r.energies.push_back(energy);
    r.residuals.push_back(res);
    r.iterations = k;
    // a flat A^rho that has been gauged to zero satisfies the Coulomb system
    // trivially, while the relative residual is then a ratio of round-off
    if (res <= opt.tol || std::sqrt(energy / energy0) <= opt.tol) break;
    if (k >= opt.max_iter) throw Error(Errc::NonConvergence, "Coulomb descent hit the iteration cap");
    // H1-preconditioned gradient: d*d eta = d*A^rho, so the step solves the
    // linearized Coulomb equation up to the bracket term
    FormField eta = neumann.solve(dstar, std::max(opt.cg_tol, 1e-8));
    bool accepted = false;
    for (double t = opt.step; t >= 1e-6; t *= 0.5) {
      GroupField trial = rho;
      for (std::size_t p = 0; p < trial.v.size(); ++p) trial.v[p] = trial.v[p] * expm(G, -t * eta.comp[0][p]);
      FormField Bt;
      try {
        Bt = log_derivative(trial) + adjoint_action(trial, A);
      } catch (const Error& e) {
        if (e.code() == Errc::OutsideInjectivityDomain) continue;
        throw;
      }
      FormField dt = codifferential(Bt);
      double mt = norm2(dt);
      if (mt < merit) {
        double et = 0.5 * inner(Bt, Bt);
        if (std::abs(energy - et) < 1e-14 && mt > 0.5 * merit) continue;
        rho = std::move(trial);
        B = std::move(Bt);
        dstar = std::move(dt);
        merit = mt;
        accepted = true;
        break;
      }
    }
    if (!accepted) throw Error(Errc::StallWithoutCoulomb, "Coulomb descent stalled above tolerance");
  }
  r.rho = std::move(rho);
  r.A_coulomb = std::move(B);
  finish(r, A);
  return r;
}

CoulombResult coulomb_gauge(const FormField& A, const CoulombOptions& opt) {
  return A.group == Group::U1 ? abelian_coulomb(A, opt) : nonabelian_coulomb(A, opt);
}

double gauge_derivative_identity_check(const FormField& A, const CoulombResult& r) {
  const Patch& P = *A.patch;
  if (!r.rho.patch->same_as(P) || !r.A_coulomb.patch->same_as(P))
    throw Error(Errc::ChartMismatch, "Coulomb result lives on another patch");
  int n = P.dim();
  std::vector<int> loc(n);
  double m = 0.0;
  for (std::size_t p = 0; p < P.size(); ++p) {
    P.unflatten(p, loc.data());
    double s = 0.0;
    for (int a = 0; a < n; ++a) {
      Mat2 d = diff(P, r.rho.v, p, a, loc[a]) - (r.rho.v[p] * r.A_coulomb.comp[a][p] - A.comp[a][p] * r.rho.v[p]);
      s += P.inv_metric(p, a) * d.squaredNorm() / (A.group == Group::SU2 ? 2.0 : 1.0);
    }
    m = std::max(m, std::sqrt(s));
  }
  return m;
}

CoulombBundle glue_coulomb(const Cocycle& P, const ConnectionForm& A, const std::vector<CoulombResult>& results,
                           double eps_coulomb) {
  const Cover& cover = *P.cover;
  if (static_cast<int>(results.size()) != cover.size() || A.locals.size() != results.size())
    throw Error(Errc::CoverMismatch, "one Coulomb result per chart is required");
  GaugeField rho;
  rho.cover = P.cover;
  rho.group = P.group;
  for (int c = 0; c < cover.size(); ++c) {
    const CoulombResult& r = results[c];
    if (!r.rho.patch->same_as(*cover.chart(c).patch)) throw Error(Errc::ChartMismatch, "Coulomb result on wrong chart");
    if (eps_coulomb >= 0.0 && r.curvature_norm > eps_coulomb)
      throw Error(Errc::SmallnessViolated, "chart curvature above eps_coulomb");
    rho.locals.push_back(r.rho);
    rho.locals.back().chart_id = c;
  }
  CoulombBundle out;
  out.cocycle = std::make_shared<Cocycle>(apply_gauge_cocycle(P, rho));
  out.connection.cocycle = out.cocycle;
  for (const auto& r : results) out.connection.locals.push_back(r.A_coulomb);
  out.rho = std::move(rho);
  return out;
}

HolderDiagnostic holder_diagnostic(const Cocycle& h, int levels) {
  HolderDiagnostic d;
  for (int l = 0, s = 1; l < levels; ++l, s *= 2) {
    double m = 0.0;
    for (const auto& [key, pieces] : h.g) {
      if (key.first > key.second) continue;
      for (const auto& g : pieces) {
        const Patch& P = *g.patch;
        std::vector<int> loc(P.dim());
        for (std::size_t p = 0; p < P.size(); ++p) {
          P.unflatten(p, loc.data());
          for (int a = 0; a < P.dim(); ++a) {
            if (loc[a] + s >= P.axis(a).count) continue;
            m = std::max(m, group_dist(h.group, g.v[p], g.v[p + s * P.stride(a)]));
          }
        }
      }
    }
    d.scales.push_back(s);
    d.osc.push_back(m);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (std::size_t l = 0; l < d.osc.size(); ++l) {
    if (l + 1 < d.osc.size() && d.osc[l] > 0.0) d.max_ratio = std::max(d.max_ratio, d.osc[l + 1] / d.osc[l]);
    if (d.osc[l] > 0.0) {
      double x = std::log(d.scales[l]), y = std::log(d.osc[l]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++cnt;
    }
  }
  if (cnt >= 2) d.exponent = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  return d;
}

CoulombCalibration calibrate_coulomb(const PatchPtr& chart, Group g, int levels, std::uint64_t seed) {
  int n = chart->dim();
  double q = std::max(1.0, n / 2.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  struct Mode {
    double amp, phase;
    std::vector<double> k;
    int comp, dir;
  };
  std::vector<Mode> modes;
  for (int i = 0; i < 8; ++i) {
    Mode m{u(rng), 3.0 * u(rng), {}, static_cast<int>(rng() % n), static_cast<int>(rng() % 3)};
    for (int a = 0; a < n; ++a) m.k.push_back(1.0 + static_cast<double>(rng() % 3));
    modes.push_back(m);
  }
  auto shape = [&](double scale) {
    return FormField::sample(chart, 1, g, [&](const double* x, int c) {
      double v[3] = {0, 0, 0};
      for (const auto& m : modes) {
        if (m.comp != c) continue;
        double arg = m.phase;
        for (int a = 0; a < n; ++a) arg += m.k[a] * x[a];
        v[g == Group::U1 ? 0 : m.dir] += scale * m.amp * std::sin(arg);
      }
      return g == Group::U1 ? embed_imag(g, v[0]) : algebra_from_coords(g, v);
    });
  };
  double unit = lp_norm(chart_curvature(shape(1.0)), q);
  CoulombCalibration cal;
  if (!(unit > 0.0)) return cal;
  CoulombOptions opt;
  opt.tol = g == Group::U1 ? 1e-9 : 1e-6;
  for (int k = levels - 1; k >= 0; --k) {
    FormField A = shape(std::numbers::pi * std::ldexp(1.0, -k) / unit);
    double level = lp_norm(chart_curvature(A), q);
    cal.levels.push_back(level);
    bool ok = false;
    double ratio = -1.0;
    try {
      CoulombResult r = coulomb_gauge(A, opt);
      ok = true;
      ratio = r.estimate_ratio;
    } catch (const Error& e) {
      if (e.code() != Errc::StallWithoutCoulomb && e.code() != Errc::NonConvergence &&
          e.code() != Errc::OutsideInjectivityDomain)
        throw;
    }
    cal.converged.push_back(ok);
    cal.ratios.push_back(ok ? ratio : -1.0);
    if (ok) {
      cal.eps_coulomb = std::max(cal.eps_coulomb, level);
      cal.c_coulomb = std::max(cal.c_coulomb, ratio);
    }
  }
  return cal;
}

}  // namespace ck
