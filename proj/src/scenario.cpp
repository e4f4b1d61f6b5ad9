#include "ck/scenario.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>

#include "ck/coulomb.hpp"
#include "ck/elliptic.hpp"
#include "ck/parallel.hpp"
#include "ck/smoothing.hpp"
#include "ck/snapshot.hpp"
#include "ck/topology.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace ck {

namespace {

constexpr const char* kReportSchema = "ck-report/1";
constexpr const char* kProfileSchema = "ck-profile/1";

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

std::string fmt(double x) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::SpecParse, "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::pair<std::string, Section>> parse_ini(const std::string& text, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(Errc::SpecParse, origin + ": " + e.message() + " at line " + std::to_string(e.line()));
  }
  std::vector<std::pair<std::string, Section>> out;
  for (const auto& [name, sub] : tree) {
    if (sub.empty()) throw Error(Errc::SpecParse, origin + ": key '" + name + "' outside a section");
    Section s;
    for (const auto& [k, v] : sub) s.emplace_back(k, v.data());
    out.emplace_back(name, std::move(s));
  }
  return out;
}

Section* section_of(std::vector<std::pair<std::string, Section>>& secs, const std::string& name) {
  for (auto& [n, s] : secs)
    if (n == name) return &s;
  secs.emplace_back(name, Section{});
  return &secs.back().second;
}

}  // namespace

const char* scenario_kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::VALIDATE_BUNDLE: return "VALIDATE_BUNDLE";
    case ScenarioKind::COULOMB_FIX: return "COULOMB_FIX";
    case ScenarioKind::SMOOTH_COCYCLE: return "SMOOTH_COCYCLE";
    case ScenarioKind::TOPOLOGY_CLASS: return "TOPOLOGY_CLASS";
    case ScenarioKind::FLATNESS: return "FLATNESS";
    case ScenarioKind::STABILIZATION: return "STABILIZATION";
    case ScenarioKind::ELLIPTIC_BENCH: return "ELLIPTIC_BENCH";
    case ScenarioKind::CALIBRATE_CONSTANTS: return "CALIBRATE_CONSTANTS";
  }
  return "?";
}

ScenarioKind parse_scenario_kind(const std::string& s) {
  for (int k = 0; k <= static_cast<int>(ScenarioKind::CALIBRATE_CONSTANTS); ++k)
    if (upper(s) == scenario_kind_name(static_cast<ScenarioKind>(k))) return static_cast<ScenarioKind>(k);
  throw Error(Errc::SpecParse, "unknown scenario kind '" + s + "'");
}

const std::string* ScenarioSpec::find(const std::string& section, const std::string& key) const {
  for (const auto& [n, s] : sections)
    if (n == section)
      for (const auto& [k, v] : s)
        if (k == key) return &v;
  return nullptr;
}

std::string ScenarioSpec::get(const std::string& section, const std::string& key, const std::string& fallback) const {
  const std::string* v = find(section, key);
  return v ? *v : fallback;
}

std::string ScenarioSpec::require(const std::string& section, const std::string& key) const {
  const std::string* v = find(section, key);
  if (!v) throw Error(Errc::SpecParse, "missing [" + section + "] " + key);
  return *v;
}

double ScenarioSpec::number(const std::string& section, const std::string& key, double fallback) const {
  const std::string* v = find(section, key);
  if (!v) return fallback;
  double x = 0.0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
  if (ec != std::errc() || p != v->data() + v->size())
    throw Error(Errc::SpecParse, "[" + section + "] " + key + " is not a number: '" + *v + "'");
  return x;
}

int ScenarioSpec::integer(const std::string& section, const std::string& key, int fallback) const {
  const std::string* v = find(section, key);
  if (!v) return fallback;
  int x = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
  if (ec != std::errc() || p != v->data() + v->size())
    throw Error(Errc::SpecParse, "[" + section + "] " + key + " is not an integer: '" + *v + "'");
  return x;
}

bool ScenarioSpec::flag(const std::string& section, const std::string& key, bool fallback) const {
  const std::string* v = find(section, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw Error(Errc::SpecParse, "[" + section + "] " + key + " is not a boolean: '" + *v + "'");
}

std::vector<int> ScenarioSpec::int_list(const std::string& section, const std::string& key) const {
  std::stringstream ss(require(section, key));
  std::vector<int> out;
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(' '));
    tok.erase(tok.find_last_not_of(' ') + 1);
    int x = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (ec != std::errc() || p != tok.data() + tok.size())
      throw Error(Errc::SpecParse, "[" + section + "] " + key + " is not an integer list");
    out.push_back(x);
  }
  return out;
}

std::vector<double> ScenarioSpec::number_list(const std::string& section, const std::string& key,
                                              const std::vector<double>& fallback) const {
  const std::string* v = find(section, key);
  if (!v) return fallback;
  std::stringstream ss(*v);
  std::vector<double> out;
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(' '));
    tok.erase(tok.find_last_not_of(' ') + 1);
    double x = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (ec != std::errc() || p != tok.data() + tok.size())
      throw Error(Errc::SpecParse, "[" + section + "] " + key + " is not a number list");
    out.push_back(x);
  }
  return out;
}

std::string ScenarioSpec::path(const std::string& relative) const {
  fs::path p(relative);
  return p.is_absolute() ? p.string() : (fs::path(dir) / p).string();
}

ScenarioSpec parse_scenario_text(const std::string& text, const std::string& dir) {
  ScenarioSpec spec;
  spec.dir = dir;
  spec.sections = parse_ini(text, "scenario");
  // A bundle-spec file supplies [base] and [bundle] keys not set here.
  if (const std::string* ref = spec.find("bundle", "spec")) {
    std::string file = spec.path(*ref);
    for (auto& [name, sec] : parse_ini(read_file(file), file)) {
      if (name != "base" && name != "bundle") continue;
      Section* dst = section_of(spec.sections, name);
      for (auto& [k, v] : sec)
        if (!spec.find(name, k)) dst->emplace_back(k, v);
    }
  }
  spec.kind = parse_scenario_kind(spec.require("scenario", "kind"));
  spec.name = spec.get("scenario", "name", scenario_kind_name(spec.kind));
  const std::string s = spec.get("scenario", "seed", "0");
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), spec.seed);
  if (ec != std::errc() || p != s.data() + s.size()) throw Error(Errc::SpecParse, "seed is not an unsigned integer");
  return spec;
}

ScenarioSpec parse_scenario(const std::string& path) {
  return parse_scenario_text(read_file(path), fs::path(path).parent_path().string());
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

ScenarioBundle build_scenario_bundle(const ScenarioSpec& spec) {
  ScenarioBundle out;
  try {
    Manifold m = parse_manifold(upper(spec.require("base", "manifold")));
    std::vector<int> cells = spec.int_list("base", "cells");
    std::shared_ptr<const BaseGrid> grid;
    if (m == Manifold::SPHERE2) {
      if (cells.size() != 2) throw Error(Errc::SpecParse, "sphere cells = ntheta,nphi");
      grid = BaseGrid::sphere(cells[0], cells[1]);
    } else {
      if (static_cast<int>(cells.size()) != (m == Manifold::TORUS2 ? 2 : 4))
        throw Error(Errc::SpecParse, "cells must list one count per axis");
      grid = BaseGrid::torus(cells);
    }
    int margin = spec.integer("base", "margin", default_margin(*grid));
    if (m == Manifold::SPHERE2) {
      out.cover = sphere_cover(grid, spec.integer("base", "bands", 4), margin);
    } else {
      std::vector<int> charts(grid->n, 2);
      if (spec.find("base", "charts")) charts = spec.int_list("base", "charts");
      out.cover = torus_cover(grid, charts, margin);
    }
    Group G = parse_group(spec.get("bundle", "group", "U1"));
    out.source = spec.get("bundle", "source", "trivial");
    out.charge = spec.integer("bundle", "k", 0);
    if (out.source == "trivial") {
      out.bundle = trivial_bundle(out.cover, G);
    } else if (out.source == "charge_k_sphere") {
      if (m != Manifold::SPHERE2) throw Error(Errc::SpecParse, "charge_k_sphere needs a sphere base");
      out.bundle = charge_k_sphere(out.cover, G, out.charge);
    } else if (out.source == "flux_k_torus") {
      if (m == Manifold::SPHERE2) throw Error(Errc::SpecParse, "flux_k_torus needs a torus base");
      out.bundle = flux_k_torus(out.cover, G, out.charge);
    } else if (out.source == "concentrating") {
      if (m != Manifold::SPHERE2) throw Error(Errc::SpecParse, "concentrating needs a sphere base");
      out.bundle = concentrating_monopole(out.cover, G, spec.number("bundle", "nu", 1.0));
      out.charge = 1;
    } else if (out.source == "perturbed") {
      if (m != Manifold::SPHERE2) throw Error(Errc::SpecParse, "perturbed needs a sphere base");
      out.bundle = perturbed_monopole(out.cover, G, spec.number("bundle", "amp", 0.1));
      out.charge = 1;
    } else if (out.source == "files") {
      std::map<std::pair<int, int>, std::vector<GroupField>> upper;
      for (const auto& [key, ov] : out.cover->pairs())
        for (std::size_t t = 0; t < ov.size(); ++t) {
          std::string k = "transition." + std::to_string(key.first) + "." + std::to_string(key.second) + "." +
                          std::to_string(t);
          std::ifstream in(spec.path(spec.require("bundle", k)));
          if (!in) throw Error(Errc::SpecParse, "cannot read [bundle] " + k);
          GroupField f = read_group_snapshot(in, grid);
          if (!f.patch->same_as(*ov[t].patch) || f.group != G)
            throw Error(Errc::SpecParse, "[bundle] " + k + " is not on its overlap piece");
          upper[key].push_back(std::move(f));
        }
      auto P = std::make_shared<const Cocycle>(Cocycle::from_upper(out.cover, G, std::move(upper)));
      out.bundle.cocycle = P;
      out.bundle.connection = pou_connection(P);
      for (int c = 0; c < out.cover->size(); ++c) {
        const std::string* f = spec.find("bundle", "connection." + std::to_string(c));
        if (!f) continue;
        std::ifstream in(spec.path(*f));
        if (!in) throw Error(Errc::SpecParse, "cannot read [bundle] connection." + std::to_string(c));
        FormField w = read_form_snapshot(in, grid);
        if (!w.patch->same_as(*out.cover->chart(c).patch) || w.degree != 1 || w.group != G)
          throw Error(Errc::SpecParse, "connection." + std::to_string(c) + " is not a 1-form on its chart");
        w.chart_id = c;
        out.bundle.connection.locals[c] = std::move(w);
      }
    } else {
      throw Error(Errc::SpecParse, "unknown bundle source '" + out.source + "'");
    }
  } catch (const Error& e) {
    if (e.code() == Errc::SpecParse) throw;
    throw Error(Errc::SpecParse, e.what());
  }
  return out;
}

void validate_scenario(const ScenarioSpec& spec) {
  for (const auto& [name, sec] : spec.sections) {
    if (name != "solver" && name != "criteria") continue;
    for (const auto& [k, v] : sec)
      if (k.find("tol") != std::string::npos || k.rfind("max_", 0) == 0 || k.rfind("min_", 0) == 0)
        if (!(spec.number(name, k, 1.0) > 0.0)) throw Error(Errc::SpecParse, "[" + name + "] " + k + " must be positive");
  }
  if (const std::string* p = spec.find("solver", "profile"))
    if (!fs::exists(spec.path(*p))) throw Error(Errc::SpecParse, "profile file '" + *p + "' does not exist");
  switch (spec.kind) {
    case ScenarioKind::ELLIPTIC_BENCH:
      if (spec.number_list("experiment", "resolutions", {16, 32, 64}).size() < 2)
        throw Error(Errc::SpecParse, "ELLIPTIC_BENCH needs at least two resolutions");
      return;
    case ScenarioKind::CALIBRATE_CONSTANTS:
      grid_preset(spec.get("experiment", "grid", "torus-64"));
      parse_group(spec.get("bundle", "group", "U1"));
      return;
    case ScenarioKind::STABILIZATION: {
      std::string fam = spec.get("experiment", "family", "concentrating");
      if (fam != "concentrating" && fam != "perturbed") throw Error(Errc::SpecParse, "unknown family '" + fam + "'");
      if (upper(spec.require("base", "manifold")) != "SPHERE2")
        throw Error(Errc::SpecParse, "STABILIZATION families live on the sphere");
      if (spec.integer("experiment", "terms", 10) < 2) throw Error(Errc::SpecParse, "terms must be at least 2");
      break;
    }
    default: break;
  }
  build_scenario_bundle(spec);
}

namespace {

class Runner {
 public:
  explicit Runner(const ScenarioSpec& spec) : spec_(spec) {
    rep_.json["schema"] = kReportSchema;
    rep_.json["scenario"] = {{"kind", scenario_kind_name(spec.kind)}, {"name", spec.name}, {"seed", spec.seed}};
    json echo = json::object();
    for (const auto& [name, sec] : spec.sections) {
      json s = json::object();
      for (const auto& [k, v] : sec) s[k] = v;
      echo[name] = s;
    }
    rep_.json["spec"] = echo;
  }

  template <class F>
  void stage(const std::string& name, F&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    current_ = name;
    json metrics = json::object();
    try {
      fn(metrics);
    } catch (const PipelineFailure&) {
      throw;
    } catch (const Error& e) {
      throw PipelineFailure(name, e.code(), e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep_.timings.emplace_back(name, secs);
    stages_.push_back({{"name", name}, {"metrics", metrics}});
  }

  // Numbers carry their tolerance; informational values have tol null.
  void metric(json& m, const std::string& key, double value, std::optional<double> tol = std::nullopt) {
    m[key] = {{"value", value}, {"tol", tol ? json(*tol) : json(nullptr)}};
    rep_.csv_rows.push_back(current_ + "," + key + "," + fmt(value) + "," + (tol ? fmt(*tol) : ""));
  }

  void criterion(const std::string& name, double value, const std::string& op, double bound) {
    bool pass = op == "<=" ? value <= bound : op == ">=" ? value >= bound : op == ">" ? value > bound : value == bound;
    criteria_.push_back({{"name", name}, {"value", value}, {"op", op}, {"tol", bound}, {"pass", pass}});
    rep_.pass = rep_.pass && pass;
  }

  Report finish() {
    rep_.json["stages"] = stages_;
    rep_.json["criteria"] = criteria_;
    rep_.json["pass"] = rep_.pass;
    return std::move(rep_);
  }

  Report& report() { return rep_; }

 private:
  const ScenarioSpec& spec_;
  Report rep_;
  json stages_ = json::array(), criteria_ = json::array();
  std::string current_;
};

PipelineOptions pipeline_options(const ScenarioSpec& spec, Group G) {
  PipelineOptions opt;
  opt.eps_coulomb = G == Group::U1 ? std::numbers::pi : 1.0;
  if (const std::string* p = spec.find("solver", "profile")) opt.eps_coulomb = parse_profile(read_file(spec.path(*p))).eps_coulomb;
  opt.eps_coulomb = spec.number("solver", "eps_coulomb", opt.eps_coulomb);
  opt.max_levels = spec.integer("solver", "max_levels", opt.max_levels);
  opt.coulomb.tol = spec.number("solver", "tol", opt.coulomb.tol);
  opt.coulomb.cg_tol = spec.number("solver", "cg_tol", opt.coulomb.cg_tol);
  opt.coulomb.max_iter = spec.integer("solver", "max_iter", opt.coulomb.max_iter);
  opt.coulomb.step = spec.number("solver", "step", opt.coulomb.step);
  return opt;
}

std::string snapshot_text(const GroupField& g) {
  std::ostringstream os;
  write_snapshot(os, g);
  return os.str();
}

void export_cocycle(Report& rep, const Cocycle& P, const std::string& prefix) {
  for (const auto& [key, ov] : P.cover->pairs())
    for (std::size_t t = 0; t < ov.size(); ++t)
      rep.files[prefix + "." + std::to_string(key.first) + "." + std::to_string(key.second) + "." +
                std::to_string(t) + ".ckf"] = snapshot_text(P.transition(key.first, key.second)[t]);
}

json class_json(const TopologyClass& c) {
  return {{"group", group_name(c.group)},
          {"invariant", c.invariant},
          {"deviation", c.deviation},
          {"plane_invariants", c.plane_invariants},
          {"flat", c.flat},
          {"integer_determined", c.integer_determined},
          {"transition_gradient", c.transition_gradient},
          {"provenance", provenance_name(c.provenance)}};
}

void run_coulomb_stage(Runner& run, const ScenarioSpec& spec, const ScenarioBundle& sb, PipelineResult& pr) {
  Group G = sb.bundle.cocycle->group;
  PipelineOptions opt = pipeline_options(spec, G);
  run.stage("coulomb", [&](json& m) {
    pr = coulomb_bundle(*sb.bundle.cocycle, sb.bundle.connection, opt);
    run.metric(m, "eps_coulomb", opt.eps_coulomb);
    run.metric(m, "level", pr.level);
    run.metric(m, "charts", pr.cover->size());
    run.metric(m, "max_chart_curvature", *std::max_element(pr.chart_curvature.begin(), pr.chart_curvature.end()),
               opt.eps_coulomb);
    run.metric(m, "max_residual_interior", pr.max_residual_interior, opt.coulomb.tol);
    run.metric(m, "max_residual_boundary", pr.max_residual_boundary);
    run.metric(m, "max_estimate_ratio", pr.max_estimate_ratio);
  });
}

// Manufactured drift problem: u = sin(pi x) sin(pi y) e0 with constant drift.
double manufactured_error(int cells, double c, double tol, int& iterations) {
  using std::numbers::pi;
  NodeGrid g = NodeGrid::box(2, cells, 1.0);
  Mat2 B0 = su2_basis(0), B1 = su2_basis(1), B2 = su2_basis(2);
  auto exact = [&](const double* x) { return Mat2(std::sin(pi * x[0]) * std::sin(pi * x[1]) * B0); };
  DriftProblem p = DriftProblem::sample(
      g, [&](const double*, int a) { return Mat2(c * (a == 0 ? B1 : B2)); },
      [&](const double* x) {
        double s0 = std::sin(pi * x[0]), s1 = std::sin(pi * x[1]), c0 = std::cos(pi * x[0]), c1 = std::cos(pi * x[1]);
        return Mat2(-2 * pi * pi * s0 * s1 * B0 - c * pi * (c0 * s1 * B1 * B0 + s0 * c1 * B2 * B0));
      });
  DriftOptions opt;
  opt.tol = tol;
  auto s = solve_drift_dirichlet(p, opt);
  iterations = s.report.iterations;
  double err = 0.0;
  int idx[2];
  for (std::size_t q = 0; q < g.size(); ++q) {
    g.unflatten(q, idx);
    double x[2] = {idx[0] * g.h[0], idx[1] * g.h[1]};
    err = std::max(err, (s.alpha[q] - exact(x)).norm());
  }
  return err;
}

std::vector<MatField> elliptic_shape(const NodeGrid& g, Group G) {
  using std::numbers::pi;
  double L = g.h[0] * g.cells[0];
  DriftProblem p = DriftProblem::sample(
      g,
      [&](const double* x, int a) {
        double v[3] = {std::sin(pi * x[0] / L + a), 0.5 * (a + 1) * std::cos(pi * x[1] / L), 0.3};
        Mat2 m = G == Group::U1 ? embed_imag(G, v[0] + v[1]) : algebra_from_coords(G, v);
        return Mat2(m / L);
      },
      [](const double*) { return Mat2(Mat2::Zero()); });
  return p.A;
}

}  // namespace

std::shared_ptr<const BaseGrid> grid_preset(const std::string& name) {
  auto dash = name.rfind('-');
  int N = 0;
  if (dash != std::string::npos) {
    auto [p, ec] = std::from_chars(name.data() + dash + 1, name.data() + name.size(), N);
    if (ec != std::errc() || p != name.data() + name.size()) N = 0;
  }
  if (N < 8) throw Error(Errc::SpecParse, "unknown grid preset '" + name + "'");
  std::string fam = name.substr(0, dash);
  if (fam == "torus") return BaseGrid::torus({N, N});
  if (fam == "sphere") return BaseGrid::sphere(N, N);
  if (fam == "torus4") return BaseGrid::torus({N, N, N, N});
  throw Error(Errc::SpecParse, "unknown grid preset '" + name + "'");
}

ProfileFile calibrate(Group group, const std::string& preset, std::uint64_t seed) {
  auto grid = grid_preset(preset);
  ProfileFile p;
  p.group = group_name(group);
  p.grid = preset;
  p.seed = seed;
  // The probe runs on a sub-box of the preset lattice (24 cells, 6 in four
  // dimensions) with the preset's spacing.
  int cells = grid->n == 2 ? 24 : 6;
  NodeGrid ng = NodeGrid::box(grid->n, cells, cells * grid->spacing[0]);
  std::vector<double> ladder;
  for (int k = 1; k <= 8; ++k) ladder.push_back(1.25 * k);
  auto ec = calibrate_eps_elliptic(ng, elliptic_shape(ng, group), ladder, 0.9, seed);
  p.eps_elliptic = ec.eps;
  p.elliptic_slope = ec.slope;
  p.elliptic_scales = ec.scales;
  p.elliptic_norms = ec.norms;
  p.elliptic_factors = ec.factors;
  CoverPtr cover = grid->is_sphere() ? sphere_cover(grid, 4, default_margin(*grid))
                                     : torus_cover(grid, std::vector<int>(grid->n, 2), default_margin(*grid));
  auto cc = calibrate_coulomb(cover->chart(0).patch, group, 7, seed);
  p.eps_coulomb = cc.eps_coulomb;
  p.c_coulomb = cc.c_coulomb;
  p.coulomb_levels = cc.levels;
  p.coulomb_ratios = cc.ratios;
  p.coulomb_converged = cc.converged;
  return p;
}

std::string serialize_profile(const ProfileFile& p) {
  json j;
  j["schema"] = kProfileSchema;
  j["group"] = p.group;
  j["grid"] = p.grid;
  j["seed"] = p.seed;
  j["eps_elliptic"] = p.eps_elliptic;
  j["elliptic"] = {{"slope", p.elliptic_slope},
                   {"scales", p.elliptic_scales},
                   {"norms", p.elliptic_norms},
                   {"factors", p.elliptic_factors}};
  j["eps_coulomb"] = p.eps_coulomb;
  j["c_coulomb"] = p.c_coulomb;
  j["coulomb"] = {{"levels", p.coulomb_levels}, {"ratios", p.coulomb_ratios}, {"converged", p.coulomb_converged}};
  return j.dump(2) + "\n";
}

ProfileFile parse_profile(const std::string& text) {
  ProfileFile p;
  try {
    json j = json::parse(text);
    if (j.at("schema") != kProfileSchema) throw Error(Errc::SpecParse, "unsupported profile schema");
    p.group = j.at("group").get<std::string>();
    p.grid = j.at("grid").get<std::string>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.eps_elliptic = j.at("eps_elliptic").get<double>();
    const json& e = j.at("elliptic");
    p.elliptic_slope = e.at("slope").get<double>();
    p.elliptic_scales = e.at("scales").get<std::vector<double>>();
    p.elliptic_norms = e.at("norms").get<std::vector<double>>();
    p.elliptic_factors = e.at("factors").get<std::vector<double>>();
    p.eps_coulomb = j.at("eps_coulomb").get<double>();
    p.c_coulomb = j.at("c_coulomb").get<double>();
    const json& c = j.at("coulomb");
    p.coulomb_levels = c.at("levels").get<std::vector<double>>();
    p.coulomb_ratios = c.at("ratios").get<std::vector<double>>();
    p.coulomb_converged = c.at("converged").get<std::vector<bool>>();
  } catch (const json::exception& e) {
    throw Error(Errc::SpecParse, std::string("profile: ") + e.what());
  }
  return p;
}

Report run_scenario(const ScenarioSpec& spec) {
  validate_scenario(spec);
  Runner run(spec);
  const bool export_fields = spec.flag("output", "export", false);

  switch (spec.kind) {
    case ScenarioKind::VALIDATE_BUNDLE: {
      ScenarioBundle sb;
      run.stage("bundle", [&](json& m) {
        sb = build_scenario_bundle(spec);
        run.metric(m, "charts", sb.cover->size());
        run.metric(m, "pairs", static_cast<double>(sb.cover->pairs().size()));
        run.metric(m, "triples", static_cast<double>(sb.cover->triples().size()));
      });
      double tc = spec.number("criteria", "max_cocycle_residual", 1e-12);
      double tg = spec.number("criteria", "max_gluing_residual", 1e-10);
      double rc = 0.0, rg = 0.0;
      run.stage("residuals", [&](json& m) {
        rc = cocycle_residual(*sb.bundle.cocycle);
        rg = gluing_residual(sb.bundle.connection);
        run.metric(m, "cocycle_residual", rc, tc);
        run.metric(m, "inverse_residual", inverse_residual(*sb.bundle.cocycle), tc);
        run.metric(m, "gluing_residual", rg, tg);
        run.metric(m, "ym_critical", ym_critical(sb.bundle.connection));
      });
      run.criterion("cocycle_residual", rc, "<=", tc);
      run.criterion("gluing_residual", rg, "<=", tg);
      if (export_fields) export_cocycle(run.report(), *sb.bundle.cocycle, "cocycle");
      break;
    }

    case ScenarioKind::COULOMB_FIX: {
      ScenarioBundle sb = build_scenario_bundle(spec);
      PipelineResult pr;
      run_coulomb_stage(run, spec, sb, pr);
      double tol = spec.number("criteria", "max_residual",
                               sb.bundle.cocycle->group == Group::U1 ? 1e-8 : 1e-5);
      run.criterion("max_residual_interior", pr.max_residual_interior, "<=", tol);
      if (export_fields)
        for (int c = 0; c < pr.cover->size(); ++c)
          run.report().files["rho." + std::to_string(c) + ".ckf"] = snapshot_text(pr.bundle.rho.locals[c]);
      break;
    }

    case ScenarioKind::SMOOTH_COCYCLE: {
      ScenarioBundle sb = build_scenario_bundle(spec);
      const Cocycle& exact = *sb.bundle.cocycle;
      const Group G = exact.group;
      double eps = spec.number("experiment", "perturbation", 1e-3);
      double width_cells = spec.number("experiment", "width_cells", 2.5);
      int shrink = spec.integer("experiment", "shrink", 2);
      double max_dist = spec.number("criteria", "max_distance", 1e-2);
      Cocycle approx;
      run.stage("perturb", [&](json& m) {
        auto rng = stream_rng(spec.seed, 1);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::map<std::pair<int, int>, std::vector<GroupField>> upper;
        for (const auto& [key, ov] : exact.cover->pairs()) {
          auto fs = exact.transition(key.first, key.second);
          for (auto& f : fs)
            for (auto& v : f.v) {
              double x[3] = {eps * u(rng), eps * u(rng), eps * u(rng)};
              v = v * expm(G, G == Group::U1 ? embed_imag(G, x[0]) : algebra_from_coords(G, x));
            }
          upper[key] = std::move(fs);
        }
        approx = Cocycle::from_upper(exact.cover, G, std::move(upper));
        run.metric(m, "perturbation", eps);
        run.metric(m, "residual", cocycle_residual(approx));
      });
      Cocycle smooth;
      run.stage("mollify", [&](json& m) {
        double w = width_cells * grid_step(exact.cover->grid());
        smooth = mollify_cocycle(approx, w);
        run.metric(m, "width", w);
        run.metric(m, "residual", cocycle_residual(smooth));
      });
      RepairResult rr;
      SmoothingReport sr;
      run.stage("repair", [&](json& m) {
        rr = repair_cocycle(smooth, shrink);
        sr = smoothing_report(approx, rr);
        run.metric(m, "residual_after", sr.residual_after, 1e-12);
        run.metric(m, "max_sup_distance", sr.max_sup, max_dist);
        run.metric(m, "max_w1n_distance", sr.max_w1n);
        run.metric(m, "max_quotient_angle", rr.max_quotient_angle, kDeltaG);
        run.metric(m, "stages", rr.stages);
        json d = json::array();
        for (const auto& o : sr.distances) d.push_back({{"i", o.i}, {"j", o.j}, {"sup", o.sup}, {"w1n", o.w1n}});
        m["overlaps"] = d;
        m["constraint_preserved"] = sr.constraint_preserved;
      });
      run.criterion("residual_after", sr.residual_after, "<=", 1e-12);
      run.criterion("max_sup_distance", sr.max_sup, "<=", max_dist);
      if (G == Group::U1) {
        int before = 0, after = 0;
        run.stage("winding", [&](json& m) {
          before = chern_number_u1(curvature(pou_connection(sb.bundle.cocycle))).value;
          after = chern_number_u1(curvature(pou_connection(rr.cocycle))).value;
          run.metric(m, "chern_before", before);
          run.metric(m, "chern_after", after);
        });
        run.criterion("chern_preserved", after, "==", before);
      }
      if (export_fields) {
        export_cocycle(run.report(), approx, "before");
        export_cocycle(run.report(), *rr.cocycle, "after");
      }
      break;
    }

    case ScenarioKind::TOPOLOGY_CLASS: {
      ScenarioBundle sb = build_scenario_bundle(spec);
      const Group G = sb.bundle.cocycle->group;
      PipelineResult pr;
      run_coulomb_stage(run, spec, sb, pr);
      run.stage("class", [&](json& m) {
        run.metric(m, "invariant", pr.cls.invariant);
        run.metric(m, "deviation", pr.cls.deviation, 1e-6);
        if (G == Group::U1) {
          auto direct = chern_number_u1(curvature(sb.bundle.connection));
          run.metric(m, "direct_chern", direct.value);
        }
        m["class"] = class_json(pr.cls);
      });
      if (spec.find("criteria", "expect_class") || (G == Group::U1 && sb.source != "trivial" && sb.source != "files"))
        run.criterion("class", pr.cls.invariant, "==", spec.integer("criteria", "expect_class", sb.charge));
      else if (G == Group::U1 && sb.source == "trivial")
        run.criterion("class", pr.cls.invariant, "==", 0);
      if (spec.find("criteria", "expect_flat"))
        run.criterion("flat", pr.cls.flat, "==", spec.flag("criteria", "expect_flat", true));
      break;
    }

    case ScenarioKind::FLATNESS: {
      ScenarioBundle sb = build_scenario_bundle(spec);
      const Group G = sb.bundle.cocycle->group;
      double delta = spec.number("experiment", "delta", -1.0);
      if (delta <= 0.0)
        run.stage("calibrate_delta", [&](json& m) {
          delta = calibrate_delta(sb.cover, G);
          run.metric(m, "delta", delta);
        });
      FlatnessVerdict v;
      run.stage("flatness", [&](json& m) {
        v = flatness_detect(*sb.bundle.cocycle, sb.bundle.connection, delta, pipeline_options(spec, G));
        run.metric(m, "ym_critical", v.ym_value);
        run.metric(m, "delta", v.delta_used);
        run.metric(m, "transition_gradient", v.transition_gradient);
        m["is_topologically_flat"] = v.is_topologically_flat;
        m["ran_pipeline"] = v.ran_pipeline;
      });
      if (spec.find("criteria", "expect_flat"))
        run.criterion("flat", v.is_topologically_flat, "==", spec.flag("criteria", "expect_flat", true));
      break;
    }

    case ScenarioKind::STABILIZATION: {
      ScenarioBundle sb = build_scenario_bundle(spec);
      const Group G = sb.bundle.cocycle->group;
      std::string fam = spec.get("experiment", "family", "concentrating");
      int terms = spec.integer("experiment", "terms", 10);
      std::vector<double> fractions = spec.number_list("experiment", "fractions", {0.001, 0.01, 0.05, 0.1});
      std::vector<double> params;
      std::vector<BuiltinBundle> seq;
      run.stage("sequence", [&](json& m) {
        for (int k = 0; k < terms; ++k) {
          if (fam == "concentrating") {
            params.push_back(std::pow(spec.number("experiment", "nu_ratio", 2.0), k));
            seq.push_back(concentrating_monopole(sb.cover, G, params.back()));
          } else {
            params.push_back(spec.number("experiment", "amp", 0.3) / (k + 1));
            seq.push_back(perturbed_monopole(sb.cover, G, params.back()));
          }
        }
        run.metric(m, "terms", terms);
      });
      StabilizationReport sr;
      run.stage("experiment", [&](json& m) {
        sr = stabilization_experiment(seq, fractions, pipeline_options(spec, G));
        json steps = json::array();
        std::string table = "index,param,ym,status,class,level,c0_to_previous\n";
        for (std::size_t k = 0; k < sr.steps.size(); ++k) {
          const auto& s = sr.steps[k];
          json row = {{"index", k}, {"param", params[k]}, {"ym", s.ym}, {"status", s.status}, {"level", s.level},
                      {"c0_to_previous", s.c0_to_previous}};
          row["class"] = s.cls ? class_json(*s.cls) : json(nullptr);
          steps.push_back(row);
          table += std::to_string(k) + "," + fmt(params[k]) + "," + fmt(s.ym) + "," + s.status + "," +
                   (s.cls ? std::to_string(s.cls->invariant) : "") + "," + std::to_string(s.level) + "," +
                   fmt(s.c0_to_previous) + "\n";
        }
        m["steps"] = steps;
        json prof = json::array();
        std::string ptable = "fraction,mass,argmax\n";
        for (const auto& r : sr.profile) {
          prof.push_back({{"fraction", r.fraction}, {"mass", r.mass}, {"argmax", r.argmax}});
          ptable += fmt(r.fraction) + "," + fmt(r.mass) + "," + std::to_string(r.argmax) + "\n";
        }
        m["profile"] = prof;
        m["stabilized"] = sr.stabilized;
        m["bubbling"] = sr.bubbling;
        run.metric(m, "s0", sr.s0);
        run.report().files["stabilization.csv"] = table;
        run.report().files["profile.csv"] = ptable;
      });
      if (spec.find("criteria", "expect_bubbling"))
        run.criterion("bubbling", sr.bubbling, "==", spec.flag("criteria", "expect_bubbling", true));
      if (spec.find("criteria", "expect_class")) {
        int want = spec.integer("criteria", "expect_class", 1);
        double bad = 0;
        for (const auto& s : sr.steps)
          if (!s.cls || s.cls->invariant != want) ++bad;
        run.criterion("steps_off_class", bad, "==", 0);
      }
      break;
    }

    case ScenarioKind::ELLIPTIC_BENCH: {
      std::vector<double> res = spec.number_list("experiment", "resolutions", {16, 32, 64});
      double c = spec.number("experiment", "drift", 0.5);
      double tol = spec.number("solver", "tol", 1e-11);
      double min_order = spec.number("criteria", "min_order", 1.8);
      double lowest = 1e300;
      run.stage("manufactured", [&](json& m) {
        std::vector<double> errs;
        json rows = json::array();
        for (double r : res) {
          int it = 0;
          errs.push_back(manufactured_error(static_cast<int>(r), c, tol, it));
          rows.push_back({{"cells", static_cast<int>(r)}, {"error", errs.back()}, {"iterations", it}});
        }
        for (std::size_t i = 1; i < errs.size(); ++i) {
          double order = std::log(errs[i - 1] / errs[i]) / std::log(res[i] / res[i - 1]);
          lowest = std::min(lowest, order);
          run.metric(m, "order_" + fmt(res[i - 1]) + "_" + fmt(res[i]), order, min_order);
        }
        m["runs"] = rows;
      });
      run.criterion("observed_order", lowest, ">=", min_order);
      double factor = 0.0, bound = spec.number("criteria", "max_contraction", 0.9);
      run.stage("probe", [&](json& m) {
        NodeGrid g = NodeGrid::box(2, static_cast<int>(res.front()), 1.0);
        std::vector<MatField> A(2, MatField(g.size()));
        for (int a = 0; a < 2; ++a)
          for (auto& v : A[a]) v = c * su2_basis(a + 1);
        factor = contraction_probe(g, A, spec.integer("experiment", "pairs", 20), spec.seed);
        run.metric(m, "contraction", factor, bound);
        run.metric(m, "drift_ln", ln_norm(g, A, 2));
      });
      run.criterion("contraction", factor, "<=", bound);
      break;
    }

    case ScenarioKind::CALIBRATE_CONSTANTS: {
      Group G = parse_group(spec.get("bundle", "group", "U1"));
      std::string preset = spec.get("experiment", "grid", "torus-64");
      ProfileFile p;
      run.stage("calibrate", [&](json& m) {
        p = calibrate(G, preset, spec.seed);
        run.metric(m, "eps_elliptic", p.eps_elliptic);
        run.metric(m, "elliptic_slope", p.elliptic_slope);
        run.metric(m, "eps_coulomb", p.eps_coulomb);
        run.metric(m, "c_coulomb", p.c_coulomb);
      });
      run.criterion("eps_elliptic_positive", p.eps_elliptic, ">", 0.0);
      run.criterion("eps_coulomb_positive", p.eps_coulomb, ">", 0.0);
      run.report().files["profile.json"] = serialize_profile(p);
      break;
    }
  }
  return run.finish();
}

void write_report(const Report& r, const std::string& dir) {
  fs::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw Error(Errc::PipelineError, "cannot write '" + name + "' in " + dir);
    out << text;
  };
  put("report.json", r.json.dump(2) + "\n");
  std::string csv = "stage,metric,value,tol\n";
  for (const auto& row : r.csv_rows) csv += row + "\n";
  put("metrics.csv", csv);
  json t = json::object();
  t["threads"] = thread_count();
  json st = json::array();
  for (const auto& [name, secs] : r.timings) st.push_back({{"stage", name}, {"seconds", secs}});
  t["stages"] = st;
  put("timings.json", t.dump(2) + "\n");
  for (const auto& [name, text] : r.files) put(name, text);
}

}  // namespace ck
