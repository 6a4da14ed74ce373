#include <cstdint>
#include <string>

#include <CLI11.hpp>

#include "watch/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"watch: heterogeneity workup for randomized trial data"};
  app.require_subcommand(1);

  watch::RunOptions opt;
  std::int64_t seed = -1;

  auto add_common = [&](CLI::App* cmd, bool with_seed) {
    cmd->add_option("--config", opt.config_path, "JSON configuration file")
        ->required();
    cmd->add_option("--out", opt.out_dir, "output directory")->required();
    if (with_seed)
      cmd->add_option("--seed", seed, "override the configured seed");
    cmd->add_option("--threads", opt.threads,
                    "worker threads (0 = hardware default)");
  };

  CLI::App* ida = app.add_subcommand(
      "ida", "descriptive data review: summaries, missingness, associations");
  add_common(ida, false);
  CLI::App* analyze = app.add_subcommand(
      "analyze",
      "effect scores, homogeneity test, importance, displays, findings");
  add_common(analyze, true);
  CLI::App* simulate = app.add_subcommand(
      "simulate", "generate a synthetic trial with known ground truth");
  add_common(simulate, true);

  CLI11_PARSE(app, argc, argv);
  if (seed >= 0) opt.seed = static_cast<std::uint64_t>(seed);

  if (ida->parsed()) return watch::run_ida(opt);
  if (analyze->parsed()) return watch::run_analyze(opt);
  return watch::run_simulate(opt);
}
