#include "ck/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ck/error.hpp"
#include "ck/parallel.hpp"

namespace ck {

namespace {

constexpr double kPi = std::numbers::pi;

double critical_exponent(int n) { return std::max(1.0, n / 2.0); }

}  // namespace

const char* provenance_name(Provenance p) {
  return p == Provenance::COULOMB_PIPELINE ? "COULOMB_PIPELINE" : "DIRECT";
}

ChernResult chern_number_u1(const CurvatureForm& F, int mu, int nu, double max_deviation) {
  if (F.locals.empty()) throw Error(Errc::InvalidArgument, "empty curvature");
  int n = F.locals[0].dim();
  if (!(0 <= mu && mu < nu && nu < n)) throw Error(Errc::InvalidArgument, "bad coordinate plane");
  const auto& psi = F.cover->pou().weights;
  int comp = pair_index(n, mu, nu);
  double s = 0.0;
  for (std::size_t c = 0; c < F.locals.size(); ++c) {
    const FormField& f = F.locals[c];
    if (f.group != Group::U1) throw Error(Errc::GroupMismatch, "Chern number needs U(1) curvature");
    const Patch& P = *f.patch;
    for (std::size_t p = 0; p < P.size(); ++p) s += P.param_weight(p) * psi[c][p] * f.comp[comp][p](0, 0).imag();
  }
  ChernResult r;
  // F = i f, so (i / 2 pi) F = -f / 2 pi
  r.raw = -s / (2 * kPi);
  r.value = static_cast<int>(std::lround(r.raw));
  r.deviation = std::abs(r.raw - r.value);
  if (r.deviation > max_deviation)
    throw Error(Errc::NonIntegral, "Chern integral " + std::to_string(r.raw) + " is not an integer");
  return r;
}

int winding_number(const std::vector<Mat2>& loop, Group g) {
  if (g != Group::U1) throw Error(Errc::GroupMismatch, "winding number needs U(1) samples");
  if (loop.empty()) return 0;
  double s = 0.0;
  for (std::size_t k = 0; k < loop.size(); ++k) {
    double d = std::arg(loop[(k + 1) % loop.size()](0, 0) / loop[k](0, 0));
    if (std::abs(d) > kPi / 2) throw Error(Errc::UnresolvableJump, "phase increment above pi/2");
    s += d;
  }
  return static_cast<int>(std::lround(s / (2 * kPi)));
}

double max_transition_gradient(const Cocycle& h) {
  double m = 0.0;
  for (const auto& [key, pieces] : h.g) {
    if (key.first > key.second) continue;
    for (const auto& g : pieces)
      for (double v : pointwise_norm(log_derivative(g))) m = std::max(m, v);
  }
  return m;
}

double grid_step(const BaseGrid& grid) { return *std::max_element(grid.spacing.begin(), grid.spacing.end()); }

TopologyClass topology_class_of(const CocyclePtr& h, Provenance provenance) {
  TopologyClass cls;
  cls.group = h->group;
  cls.provenance = provenance;
  cls.transition_gradient = max_transition_gradient(*h);
  int n = h->cover->grid().n;
  if (h->group == Group::U1) {
    CurvatureForm F = curvature(pou_connection(h));
    for (auto [mu, nu] : two_form_pairs(n)) {
      ChernResult c = chern_number_u1(F, mu, nu);
      cls.plane_invariants.push_back(c.value);
      cls.deviation = std::max(cls.deviation, c.deviation);
    }
    cls.invariant = cls.plane_invariants.at(0);
    cls.flat = std::all_of(cls.plane_invariants.begin(), cls.plane_invariants.end(), [](int v) { return v == 0; });
  } else {
    cls.integer_determined = false;
    cls.flat = cls.transition_gradient <= 10 * grid_step(h->cover->grid());
  }
  return cls;
}

BuiltinBundle transfer_to_refinement(const Cocycle& P, const ConnectionForm& A, const CoverPtr& child,
                                     const std::vector<int>& map) {
  if (static_cast<int>(map.size()) != child->size()) throw Error(Errc::CoverMismatch, "refinement map size");
  std::map<std::pair<int, int>, std::vector<GroupField>> upper;
  for (const auto& [key, ov] : child->pairs()) {
    int a = map[key.first], b = map[key.second];
    for (const auto& piece : ov) {
      if (a == b) {
        upper[key].push_back(GroupField::identity(piece.patch, P.group));
        continue;
      }
      GroupField g;
      g.patch = piece.patch;
      g.group = P.group;
      g.v = P.transition_on(a, b, *piece.patch);
      upper[key].push_back(std::move(g));
    }
  }
  BuiltinBundle out;
  out.cocycle = std::make_shared<Cocycle>(Cocycle::from_upper(child, P.group, std::move(upper)));
  out.connection.cocycle = out.cocycle;
  for (int j = 0; j < child->size(); ++j)
    out.connection.locals.push_back(restrict_to(A.locals[map[j]], child->chart(j).patch, j));
  return out;
}

CoverPtr refine_cover(const Cover& parent, int factor) {
  const auto& grid = parent.grid_ptr();
  if (factor < 1) throw Error(Errc::InvalidArgument, "refinement factor must be positive");
  int M = 0;
  for (const Chart& c : parent.charts()) M = std::max(M, c.margin);
  // child margins: half a child core, but within the parent margin less 2
  int cap = M > 0 ? M - 2 : 1 << 20;
  const std::string& label = parent.label();
  if (label.rfind("sphere-", 0) == 0) {
    int K = std::stoi(label.substr(7)) * factor;
    int core = (grid->dims[0] - 1) / K;
    int margin = std::min(std::max(core / 2, 4), cap);
    if (margin < 4) throw Error(Errc::MarginExhausted, "parent margins too thin to refine");
    return sphere_cover(grid, K, margin);
  }
  if (label.rfind("torus", 0) == 0) {
    std::vector<int> cpa;
    std::size_t pos = 5;
    while (pos < label.size() && label[pos] == '-') {
      std::size_t next = label.find('-', pos + 1);
      cpa.push_back(std::stoi(label.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1)));
      pos = next == std::string::npos ? label.size() : next;
    }
    if (static_cast<int>(cpa.size()) != grid->n) throw Error(Errc::InvalidArgument, "unparsable cover label " + label);
    int core_min = 1 << 20, room = 1 << 20;
    for (int a = 0; a < grid->n; ++a) {
      cpa[a] *= factor;
      if (cpa[a] == 1) continue;
      int N = grid->dims[a], core_max = (N + cpa[a] - 1) / cpa[a];
      core_min = std::min(core_min, N / cpa[a]);
      room = std::min(room, (N - core_max - 1) / 2);
    }
    int margin = std::min({std::max(core_min / 2, 4), cap, room});
    if (margin < 4) throw Error(Errc::MarginExhausted, "no admissible margin at this refinement depth");
    return torus_cover(grid, cpa, margin);
  }
  throw Error(Errc::InvalidArgument, "cannot refine cover " + label);
}

PipelineResult coulomb_bundle(const Cocycle& P, const ConnectionForm& A, const PipelineOptions& opt) {
  int n = P.cover->grid().n;
  double q = critical_exponent(n);
  PipelineResult res;
  BuiltinBundle b{std::make_shared<Cocycle>(P), A};
  for (int level = 0;; ++level) {
    if (level > opt.max_levels)
      throw Error(Errc::MarginExhausted, "curvature stays above eps_coulomb at the deepest refinement");
    if (level > 0) {
      CoverPtr child = refine_cover(*P.cover, 1 << level);
      b = transfer_to_refinement(P, A, child, refinement_map(*child, *P.cover, 2));
    }
    std::vector<double> curv(b.connection.locals.size());
    parallel_for(curv.size(), [&](std::size_t c) { curv[c] = lp_norm(chart_curvature(b.connection.locals[c]), q); });
    if (*std::max_element(curv.begin(), curv.end()) <= opt.eps_coulomb) {
      res.level = level;
      res.chart_curvature = std::move(curv);
      break;
    }
  }
  res.cover = b.cocycle->cover;
  res.charts.resize(b.connection.locals.size());
  parallel_for(res.charts.size(), [&](std::size_t c) {
    res.charts[c] = coulomb_gauge(b.connection.locals[c], opt.coulomb);
  });
  for (const auto& r : res.charts) {
    res.max_residual_interior = std::max(res.max_residual_interior, r.residual_interior);
    res.max_residual_boundary = std::max(res.max_residual_boundary, r.residual_boundary);
    res.max_estimate_ratio = std::max(res.max_estimate_ratio, r.estimate_ratio);
  }
  res.bundle = glue_coulomb(*b.cocycle, b.connection, res.charts, opt.eps_coulomb);
  res.cls = topology_class_of(res.bundle.cocycle, Provenance::COULOMB_PIPELINE);
  return res;
}

double ym_critical(const ConnectionForm& A) {
  return ym_energy(curvature(A), critical_exponent(A.cocycle->cover->grid().n));
}

FlatnessVerdict flatness_detect(const Cocycle& P, const ConnectionForm& A, double delta, const PipelineOptions& opt) {
  FlatnessVerdict v;
  v.ym_value = ym_critical(A);
  v.delta_used = delta;
  if (v.ym_value >= delta) return v;
  PipelineResult r = coulomb_bundle(P, A, opt);
  v.ran_pipeline = true;
  v.transition_gradient = r.cls.transition_gradient;
  v.is_topologically_flat = r.cls.flat && v.transition_gradient <= 10 * grid_step(P.cover->grid());
  return v;
}

double calibrate_delta(const CoverPtr& cover, Group group) {
  double m = kInfinity;
  for (int k : {-2, -1, 1, 2}) {
    BuiltinBundle b = cover->grid().is_sphere() ? charge_k_sphere(cover, group, k) : flux_k_torus(cover, group, k);
    m = std::min(m, ym_critical(b.connection));
  }
  // other connections reach the built-in minimum only up to discretization error
  return 0.5 * m * (1.0 - kChernWeilSlack);
}

ScalarField curvature_density(const CurvatureForm& F) {
  PatchPtr gp = global_patch(F.cover->grid_ptr());
  ScalarField s = ScalarField::zeros(gp);
  double q = critical_exponent(gp->dim());
  const auto& psi = F.cover->pou().weights;
  for (std::size_t c = 0; c < F.locals.size(); ++c) {
    auto map = patch_index_map(*F.locals[c].patch, *gp);
    auto nrm = pointwise_norm(F.locals[c]);
    for (std::size_t p = 0; p < nrm.size(); ++p) s.v[map[p]] += psi[c][p] * std::pow(nrm[p], q);
  }
  return s;
}

namespace {

double cocycle_distance(const Cocycle& a, const Cocycle& b) {
  double m = 0.0;
  for (const auto& [key, pieces] : a.g) {
    const auto& other = b.g.at(key);
    for (std::size_t t = 0; t < pieces.size(); ++t)
      for (std::size_t q = 0; q < pieces[t].v.size(); ++q)
        m = std::max(m, group_dist(a.group, pieces[t].v[q], other[t].v[q]));
  }
  return m;
}

}  // namespace

StabilizationReport stabilization_experiment(const std::vector<BuiltinBundle>& seq,
                                             const std::vector<double>& fractions, const PipelineOptions& opt) {
  if (seq.empty()) throw Error(Errc::EmptySequence, "stabilization needs a nonempty sequence");
  StabilizationReport rep;
  rep.fractions = fractions;
  std::vector<ScalarField> dens;
  std::vector<CocyclePtr> coulomb(seq.size());
  rep.steps.resize(seq.size());
  for (std::size_t v = 0; v < seq.size(); ++v) {
    const BuiltinBundle& b = seq[v];
    StabilizationStep& st = rep.steps[v];
    CurvatureForm F = curvature(b.connection);
    st.ym = ym_energy(F, critical_exponent(b.cocycle->cover->grid().n));
    dens.push_back(curvature_density(F));
    try {
      PipelineResult r = coulomb_bundle(*b.cocycle, b.connection, opt);
      st.cls = r.cls;
      st.level = r.level;
      coulomb[v] = r.bundle.cocycle;
    } catch (const Error& e) {
      st.status = errc_name(e.code());
    }
    if (v > 0 && coulomb[v] && coulomb[v - 1] && coulomb[v]->cover->label() == coulomb[v - 1]->cover->label() &&
        coulomb[v]->cover->grid_ptr() == coulomb[v - 1]->cover->grid_ptr())
      st.c0_to_previous = cocycle_distance(*coulomb[v], *coulomb[v - 1]);
  }
  rep.profile = equiintegrability_profile(dens, fractions);
  // s0: start of the longest successful tail with a constant class
  int s = static_cast<int>(seq.size()) - 1;
  if (rep.steps[s].cls) {
    while (s > 0 && rep.steps[s - 1].cls && rep.steps[s - 1].cls->invariant == rep.steps[s].cls->invariant &&
           rep.steps[s - 1].cls->flat == rep.steps[s].cls->flat)
      --s;
    rep.s0 = s;
    rep.stabilized = true;
  }
  bool seen_nonzero = false;
  for (const auto& st : rep.steps) {
    if (st.status == errc_name(Errc::MarginExhausted)) rep.bubbling = true;
    if (st.cls && st.cls->integer_determined) {
      if (st.cls->invariant != 0) seen_nonzero = true;
      else if (seen_nonzero) rep.bubbling = true;
    }
  }
  return rep;
}

BuiltinBundle concentrating_monopole(const CoverPtr& cover, Group group, double nu) {
  BuiltinBundle b = charge_k_sphere(cover, group, 1);
  b.connection = add_global_form(b.connection, [&](const double* x, int c) {
    if (c == 0) return Mat2(Mat2::Zero());
    double tp = 2.0 * std::atan(nu * std::tan(0.5 * x[0]));
    return embed_imag(group, 0.5 * (std::cos(tp) - std::cos(x[0])));
  });
  return b;
}

BuiltinBundle perturbed_monopole(const CoverPtr& cover, Group group, double amp) {
  BuiltinBundle b = charge_k_sphere(cover, group, 1);
  b.connection = add_global_form(b.connection, [&](const double* x, int c) {
    double t = x[0], p = x[1];
    double w = c == 0 ? std::cos(t) * std::cos(p)
                      : -std::sin(t) * std::sin(p) + std::sin(t) * std::sin(t) * std::cos(t);
    return embed_imag(group, amp * w);
  });
  return b;
}

}  // namespace ck
