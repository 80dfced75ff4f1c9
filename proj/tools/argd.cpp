// argd: adaptive low-rank gradient training toolkit.
//
// Subcommands:
//   argd train <config>            train a synthetic-task network, emit trace/checkpoints/metrics
//   argd dynamics <config>         run the structured-gradient decay simulator and analysis
//   argd ssrf-bench <config>       time the randomized range finder against full SVD
//   argd extract-adapter <pre> <ft> [--rel-tol X] [--out DIR]
//                                  factor a checkpoint delta into a low-rank adapter pair
//
// Exit codes: 0 ok, 2 config error, 3 numerical divergence, 4 I/O or format
// error, 5 internal invariant violation. ARGD_SEED overrides config seeds.

#include <string>

#include <CLI11.hpp>

#include "argd/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"adaptive low-rank gradient training toolkit"};
  app.require_subcommand(1);

  std::string train_config;
  CLI::App* train = app.add_subcommand("train", "train a network on a synthetic task");
  train->add_option("config", train_config, "experiment config file")->required();

  std::string dynamics_config;
  CLI::App* dynamics = app.add_subcommand("dynamics", "structured-gradient decay simulation");
  dynamics->add_option("config", dynamics_config, "experiment config file")->required();

  std::string bench_config;
  CLI::App* bench = app.add_subcommand("ssrf-bench", "range finder vs full SVD timing grid");
  bench->add_option("config", bench_config, "experiment config file")->required();

  std::string pre_path, ft_path, adapter_out = "out";
  double rel_tol = 1e-6;
  CLI::App* extract = app.add_subcommand("extract-adapter", "factor a checkpoint delta");
  extract->add_option("pre", pre_path, "pretrained checkpoint (.argd)")->required();
  extract->add_option("ft", ft_path, "fine-tuned checkpoint (.argd)")->required();
  extract->add_option("--rel-tol", rel_tol, "singular value cutoff relative to sigma_1");
  extract->add_option("--out", adapter_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (train->parsed()) return argd::cli::cmd_train(train_config);
  if (dynamics->parsed()) return argd::cli::cmd_dynamics(dynamics_config);
  if (bench->parsed()) return argd::cli::cmd_ssrf_bench(bench_config);
  if (extract->parsed()) {
    return argd::cli::cmd_extract_adapter(pre_path, ft_path, rel_tol, adapter_out);
  }
  return 2;
}
