#pragma once

// Batch scenarios: INI spec files in, JSON reports and CSV tables out.
//
// A spec has a [scenario] section (kind, name, seed) plus [base], [bundle],
// [solver], [experiment] and [criteria] as the kind needs them.  [bundle] may
// name a separate bundle-spec file (key `spec`) holding [base] and [bundle].
// See README.md for the keys.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ck/bundle.hpp"
#include "ck/error.hpp"

namespace ck {

enum class ScenarioKind {
  VALIDATE_BUNDLE,
  COULOMB_FIX,
  SMOOTH_COCYCLE,
  TOPOLOGY_CLASS,
  FLATNESS,
  STABILIZATION,
  ELLIPTIC_BENCH,
  CALIBRATE_CONSTANTS,
};

const char* scenario_kind_name(ScenarioKind k);
ScenarioKind parse_scenario_kind(const std::string& s);

using Section = std::vector<std::pair<std::string, std::string>>;

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::VALIDATE_BUNDLE;
  std::string name;
  std::uint64_t seed = 0;
  std::string dir;  // directory of the scenario file; relative paths resolve here
  std::vector<std::pair<std::string, Section>> sections;

  const std::string* find(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& section, const std::string& key) const;
  double number(const std::string& section, const std::string& key, double fallback) const;
  int integer(const std::string& section, const std::string& key, int fallback) const;
  bool flag(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<int> int_list(const std::string& section, const std::string& key) const;
  std::vector<double> number_list(const std::string& section, const std::string& key,
                                  const std::vector<double>& fallback) const;
  std::string path(const std::string& relative) const;
};

// Throws SpecParse on unreadable files, bad syntax or a missing/unknown kind.
ScenarioSpec parse_scenario(const std::string& path);
ScenarioSpec parse_scenario_text(const std::string& text, const std::string& dir = ".");
// Schema check: required keys per kind, positive tolerances, referenced files
// exist, the bundle builds.  Throws SpecParse.
void validate_scenario(const ScenarioSpec& spec);

// Counted-stream generator: stream k of a seed is independent of the others.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream);

// Base grid, cover and bundle named by [base] and [bundle].
struct ScenarioBundle {
  CoverPtr cover;
  BuiltinBundle bundle;
  std::string source;
  int charge = 0;  // k of the built-in source
};
ScenarioBundle build_scenario_bundle(const ScenarioSpec& spec);

// Module errors raised inside a stage, re-raised with the stage name.
class PipelineFailure : public Error {
 public:
  PipelineFailure(std::string stage, Errc inner, const std::string& what)
      : Error(Errc::PipelineError, "stage '" + stage + "': " + what), stage_(std::move(stage)), inner_(inner) {}
  const std::string& stage() const { return stage_; }
  Errc inner() const { return inner_; }

 private:
  std::string stage_;
  Errc inner_;
};

struct Report {
  nlohmann::ordered_json json;  // deterministic for a fixed spec and seed
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage
  std::vector<std::string> csv_rows;                    // stage,metric,value,tol
  std::map<std::string, std::string> files;             // extra outputs by file name
  bool pass = true;
};

Report run_scenario(const ScenarioSpec& spec);
// Writes report.json, metrics.csv, timings.json and the extra files into dir.
void write_report(const Report& r, const std::string& dir);

// Measured smallness constants for a grid preset and group.
struct ProfileFile {
  std::string group;
  std::string grid;
  std::uint64_t seed = 1;
  double eps_elliptic = 0.0;
  double elliptic_slope = 0.0;
  std::vector<double> elliptic_scales, elliptic_norms, elliptic_factors;
  double eps_coulomb = 0.0;
  double c_coulomb = 0.0;
  std::vector<double> coulomb_levels, coulomb_ratios;
  std::vector<bool> coulomb_converged;
};

// Presets: torus-N (N x N torus), sphere-N (N x N sphere), torus4-N.
std::shared_ptr<const BaseGrid> grid_preset(const std::string& name);
ProfileFile calibrate(Group group, const std::string& preset, std::uint64_t seed = 1);
std::string serialize_profile(const ProfileFile& p);
ProfileFile parse_profile(const std::string& text);

}  // namespace ck
