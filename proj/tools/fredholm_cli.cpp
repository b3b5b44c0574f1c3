// Command-line benchmark driver for the fredholm library.
//
// Subcommands:
//   bench           grid-search benchmark over datasets x methods
//   stability       lambda sweep + 1-D linear variance demo
//   learning-curve  test-set AUC vs labeled fraction
//   vmatrix         dump a single V-matrix for a points CSV
//
// The exit status is the number of per-item errors encountered (capped at
// 100), so 0 means every requested item succeeded.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fredholm/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Conditional-probability estimation benchmarks (V-matrix, "
               "Fredholm and MSDF methods)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "results";
  std::optional<std::uint64_t> seed_override;
  int jobs = 1;

  const auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration file");
    cmd->add_option("--out", out_dir, "output directory")
        ->capture_default_str();
    cmd->add_option("--seed", seed_override, "override the config seed");
    cmd->add_option("--jobs", jobs, "worker threads (results are identical for any value)")
        ->check(CLI::Range(1, 1024))
        ->capture_default_str();
  };

  CLI::App* bench = app.add_subcommand(
      "bench", "grid-search benchmark over datasets and methods");
  add_run_options(bench);
  CLI::App* stability = app.add_subcommand(
      "stability", "lambda sweep at a fixed kernel plus the linear variance demo");
  add_run_options(stability);
  CLI::App* curve = app.add_subcommand(
      "learning-curve", "test-set AUC as the labeled fraction grows");
  add_run_options(curve);

  fredholm::VmatrixArgs vm_args;
  std::string vm_input, vm_output;
  CLI::App* vmatrix = app.add_subcommand("vmatrix", "dump a V-matrix for a points CSV");
  vmatrix->add_option("--input", vm_input, "points CSV (non-numeric first line is a header)")
      ->required();
  vmatrix->add_option("--kind", vm_args.kind,
                      "uniform | uniform-additive | cdf | semi-indicator | "
                      "semi-gaussian | identity")
      ->capture_default_str();
  vmatrix->add_option("--labeled", vm_args.labeled,
                      "first N rows are labeled (-1 = all rows)")
      ->capture_default_str();
  vmatrix->add_option("--sigma", vm_args.sigma, "semi-gaussian squared width")
      ->capture_default_str();
  vmatrix->add_option("--out", vm_output, "output CSV file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (vmatrix->parsed()) {
      vm_args.input = vm_input;
      vm_args.output = vm_output;
      fredholm::cmd_vmatrix(vm_args);
      std::printf("wrote %s\n", vm_output.c_str());
      return 0;
    }

    fredholm::RunConfig rc;
    if (!config_path.empty()) rc = fredholm::load_run_config(config_path);
    if (seed_override) rc.seed = *seed_override;

    fredholm::RunManifest man;
    if (bench->parsed()) {
      man = fredholm::cmd_bench(rc, out_dir, jobs);
    } else if (stability->parsed()) {
      man = fredholm::cmd_stability(rc, out_dir, jobs);
    } else {
      man = fredholm::cmd_learning_curve(rc, out_dir, jobs);
    }
    for (const std::string& err : man.errors)
      std::fprintf(stderr, "error: %s\n", err.c_str());
    std::printf("wrote %s (manifest %s, %zu error(s))\n", out_dir.c_str(),
                man.manifest_id().c_str(), man.errors.size());
    return static_cast<int>(std::min<std::size_t>(man.errors.size(), 100));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fatal: %s\n", e.what());
    return 1;
  }
}
