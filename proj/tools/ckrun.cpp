// Batch runner: ckrun run <spec> --out <dir> | calibrate | validate <spec>.
// Exit status: 0 all criteria pass, 1 a criterion fails, 2 bad spec, 3 pipeline error.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "ck/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ckrun: bundle and Yang-Mills scenarios"};
  app.require_subcommand(1);

  std::string spec_path, out_dir = "out";
  auto* run = app.add_subcommand("run", "run a scenario and write its report");
  run->add_option("spec", spec_path, "scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory");

  std::string group = "u1", preset = "torus-64", out_file = "profile.json";
  std::uint64_t seed = 1;
  auto* cal = app.add_subcommand("calibrate", "measure smallness constants");
  cal->add_option("--group", group, "u1 or su2")->check(CLI::IsMember({"u1", "su2", "U1", "SU2"}));
  cal->add_option("--grid", preset, "grid preset: torus-N, sphere-N, torus4-N");
  cal->add_option("--out", out_file, "profile file");
  cal->add_option("--seed", seed, "probe seed");

  std::string check_path;
  auto* val = app.add_subcommand("validate", "schema check only");
  val->add_option("spec", check_path, "scenario file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ck::Report r = ck::run_scenario(ck::parse_scenario(spec_path));
      ck::write_report(r, out_dir);
      for (const auto& c : r.json["criteria"])
        std::cout << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << " "
                  << c["value"].dump() << " " << c["op"].get<std::string>() << " " << c["tol"].dump() << "\n";
      return r.pass ? 0 : 1;
    }
    if (*cal) {
      ck::ProfileFile p = ck::calibrate(ck::parse_group(group), preset, seed);
      std::ofstream(out_file, std::ios::binary) << ck::serialize_profile(p);
      std::cout << "eps_elliptic " << p.eps_elliptic << " eps_coulomb " << p.eps_coulomb << "\n";
      return 0;
    }
    if (*val) {
      ck::validate_scenario(ck::parse_scenario(check_path));
      std::cout << "ok\n";
      return 0;
    }
  } catch (const ck::Error& e) {
    std::cerr << e.what() << "\n";
    return e.code() == ck::Errc::SpecParse ? 2 : 3;
  }
  return 0;
}
