#include <CLI11.hpp>
#include <iostream>

#include "cfse/cli_runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Entropy of discrete causal fermion systems"};
  app.require_subcommand(1);
  cfse::CliOptions opts;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;
  for (const char* name : {"vacuum", "entropy", "sweep", "entangle"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opts.config_path, "experiment file")->required();
    sub->add_option("--seed", seed, "master seed (overrides run.seed)");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory");
    sub->callback([&opts, name] { opts.command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : cfse::kExitValidation;
  }
  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--threads")) opts.threads = threads;
  if (sub->count("--out")) opts.out_dir = out;
  return cfse::run_command(opts, std::cerr);
}
