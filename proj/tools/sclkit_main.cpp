// sclkit: composite-likelihood inference toolkit.
//
// Exit codes: 0 ok, 1 property failure (verify), 2 spec validation error,
// 3 math error during evaluation.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "sclkit/commands.hpp"
#include "sclkit/problem_spec.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"super composite likelihood toolkit"};
  app.require_subcommand(1);

  std::string spec_path, obs_path;
  bool as_json = false;
  std::size_t n = 0, instances = 200, workers = 1;
  std::uint64_t seed = 0;
  double equivalence_tol = 1e-12;

  auto* infer = app.add_subcommand("infer", "posterior for one observation");
  infer->add_option("--spec", spec_path, "problem spec JSON file")->required();
  infer->add_option("--obs", obs_path, "observation JSON file")->required();
  infer->add_flag("--json", as_json, "emit JSON instead of TSV");

  auto* optimize = app.add_subcommand("optimize", "KL-utility weight selection report");
  optimize->add_option("--spec", spec_path, "problem spec JSON file")->required();

  auto* compare = app.add_subcommand("compare", "score methods against the exact posterior");
  compare->add_option("--spec", spec_path, "problem spec JSON file")->required();
  compare->add_option("--n", n, "number of samples")->required();
  compare->add_option("--seed", seed, "random seed")->required();
  compare->add_flag("--json", as_json, "emit JSON instead of TSV");

  auto* verify = app.add_subcommand("verify", "run the randomized invariant suites");
  verify->add_option("--seed", seed, "random seed");
  verify->add_option("--instances", instances, "number of random instances");
  verify->add_option("--workers", workers, "worker thread count");
  verify->add_option("--equivalence-tol", equivalence_tol, "posterior equivalence tolerance")
      ->group("");  // hidden; used to exercise the failure path

  auto* sample = app.add_subcommand("sample", "draw a labeled dataset as TSV");
  sample->add_option("--spec", spec_path, "problem spec JSON file")->required();
  sample->add_option("--n", n, "number of samples")->required();
  sample->add_option("--seed", seed, "random seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (infer->parsed()) {
      auto spec = sclkit::load_problem_spec_file(spec_path);
      auto obs = sclkit::parse_observation(sclkit::parse_json_file(obs_path), spec);
      std::cout << sclkit::cmd_infer(spec, obs, as_json);
    } else if (optimize->parsed()) {
      std::cout << sclkit::cmd_optimize(sclkit::load_problem_spec_file(spec_path));
    } else if (compare->parsed()) {
      std::cout << sclkit::cmd_compare(sclkit::load_problem_spec_file(spec_path), n, seed, as_json);
    } else if (verify->parsed()) {
      auto rep = sclkit::cmd_verify(seed, instances, workers, equivalence_tol);
      std::cout << rep.text;
      return rep.ok ? 0 : 1;
    } else if (sample->parsed()) {
      std::cout << sclkit::cmd_sample(sclkit::load_problem_spec_file(spec_path), n, seed);
    }
  } catch (const sclkit::spec_error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const sclkit::error& e) {
    std::cerr << "math error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
