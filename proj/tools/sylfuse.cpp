// sylfuse: degrade, fuse, evaluate, benchmark, selftest, synthesize, export-pgm.

#include "sylfuse/cli.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

template <typename T>
std::optional<T> optional_value(const CLI::Option* opt, const T& value) {
  return opt->count() > 0 ? std::optional<T>(value) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace sylfuse::cli;

  CLI::App app{"Fast multi-band image fusion via a closed-form Sylvester solve"};
  app.require_subcommand(1);
  int threads = 0;
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads (default: SYLFUSE_THREADS, else 1)")
                          ->check(CLI::PositiveNumber);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_path;

  DegradeArgs degrade;
  auto* degrade_cmd = app.add_subcommand("degrade", "Simulate Y_L and Y_R from a reference cube");
  auto* degrade_config =
      degrade_cmd->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  auto* degrade_seed = degrade_cmd->add_option("--seed", seed, "Noise seed (overrides the config)");
  degrade_cmd->add_option("--out", degrade.out, "Output prefix")->required();
  degrade_cmd->add_option("input", degrade.input, "Reference cube (.mbc or .csv)")
      ->required()
      ->check(CLI::ExistingFile);

  FuseArgs fuse;
  std::string noise_path;
  auto* fuse_cmd = app.add_subcommand("fuse", "Estimate the high-resolution cube from Y_L and Y_R");
  auto* fuse_config = fuse_cmd->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  auto* fuse_seed = fuse_cmd->add_option("--seed", seed, "Seed (overrides the config)");
  auto* fuse_noise = fuse_cmd->add_option("--noise", noise_path, "Noise variances written by degrade")
                         ->check(CLI::ExistingFile);
  fuse_cmd->add_option("--out", fuse.out, "Output cube")->required();
  fuse_cmd->add_option("left", fuse.left, "Y_L cube")->required()->check(CLI::ExistingFile);
  fuse_cmd->add_option("right", fuse.right, "Y_R cube")->required()->check(CLI::ExistingFile);

  EvaluateArgs evaluate;
  double decimation = 0.0;
  auto* eval_cmd = app.add_subcommand("evaluate", "Quality metrics of an estimate against a reference");
  auto* eval_config = eval_cmd->add_option("--config", config_path, "JSON run configuration (for d)")
                          ->check(CLI::ExistingFile);
  auto* eval_d = eval_cmd->add_option("--decimation", decimation, "Total decimation factor d for ERGAS")
                     ->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--json", evaluate.json, "Print JSON instead of a table");
  eval_cmd->add_option("reference", evaluate.reference, "Reference cube")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("estimate", evaluate.estimate, "Estimated cube")->required()->check(CLI::ExistingFile);

  BenchmarkArgs bench;
  std::vector<long> sizes;
  auto* bench_cmd = app.add_subcommand("benchmark", "Timing of fuse_ml and one ADMM iteration across sizes");
  auto* bench_sizes = bench_cmd->add_option("--sizes", sizes, "Pixel counts (powers of two)")->delimiter(',');
  bench_cmd->add_option("--reps", bench.reps, "Repetitions per size")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--bands", bench.bands, "Spectral bands")->check(CLI::PositiveNumber);
  auto* bench_out = bench_cmd->add_option("--out", out_path, "Also write results as JSON");

  auto* selftest_cmd = app.add_subcommand("selftest", "Run the dense oracle checks");

  SynthesizeArgs synth;
  auto* synth_cmd = app.add_subcommand("synthesize", "Write a synthetic reference scene");
  synth_cmd->add_option("--rows", synth.scene.rows, "Rows")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--cols", synth.scene.cols, "Columns")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--bands", synth.scene.bands, "Spectral bands")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--rank", synth.scene.rank, "Number of endmember spectra")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  auto* synth_seed = synth_cmd->add_option("--seed", seed, "Scene seed");
  synth_cmd->add_option("--out", synth.out, "Output cube")->required();

  ExportPgmArgs pgm;
  auto* pgm_cmd = app.add_subcommand("export-pgm", "Dump one band as an 8-bit PGM image");
  pgm_cmd->add_option("--band", pgm.band, "Band index")->check(CLI::NonNegativeNumber);
  pgm_cmd->add_option("--out", pgm.out, "Output PGM")->required();
  pgm_cmd->add_option("input", pgm.input, "Cube")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (threads_opt->count() > 0) sylfuse::set_thread_count(threads);

  if (degrade_cmd->parsed()) {
    degrade.config = optional_value(degrade_config, config_path);
    degrade.seed = optional_value(degrade_seed, seed);
    return cmd_degrade(degrade, std::cout, std::cerr);
  }
  if (fuse_cmd->parsed()) {
    fuse.config = optional_value(fuse_config, config_path);
    fuse.seed = optional_value(fuse_seed, seed);
    fuse.noise = optional_value(fuse_noise, noise_path);
    return cmd_fuse(fuse, std::cout, std::cerr);
  }
  if (eval_cmd->parsed()) {
    evaluate.config = optional_value(eval_config, config_path);
    evaluate.decimation = optional_value(eval_d, decimation);
    return cmd_evaluate(evaluate, std::cout, std::cerr);
  }
  if (bench_cmd->parsed()) {
    if (bench_sizes->count() > 0) bench.sizes.assign(sizes.begin(), sizes.end());
    bench.out = optional_value(bench_out, out_path);
    return cmd_benchmark(bench, std::cout, std::cerr);
  }
  if (selftest_cmd->parsed()) return cmd_selftest(std::cout, std::cerr);
  if (synth_cmd->parsed()) {
    synth.seed = optional_value(synth_seed, seed);
    return cmd_synthesize(synth, std::cout, std::cerr);
  }
  if (pgm_cmd->parsed()) return cmd_export_pgm(pgm, std::cout, std::cerr);
  return kExitUsage;
}
