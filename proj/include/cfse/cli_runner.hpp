#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cfse/lagrangian.hpp"

namespace cfse {

// Exit codes of the cfse tool.
enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitGate = 3, kExitInfeasible = 4, kExitInternal = 5 };

// INI-style experiment file:
//
//   [run]          seed, threads
//   [model]        f, n, kappa, s_policy = zero | minimal_level
//   [vacuum]       frequencies, period, n_t, sites, site_weights, t0, delta, cutoff = trapezoid | none, file
//   [perturbation] strength
//   [entropy]      beta (units of 1 / gamma_scale), dt (lattice steps; empty = static),
//                  K, scale_samples, h_rounds, t_sweeps, restarts, symmetrize
//   [sweep]        dims (empty = Delta t / static grid per beta)
//   [entangle]     sites (one 0/1 flag per spatial site)
//   [output]       dir
//
// Lists are comma separated. Unknown sections or keys are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  int threads = 0;  // 0 defers to --threads / CFSE_THREADS
  ModelParams model;
  int f = 4;
  std::string s_policy = "zero";

  std::vector<double> frequencies{0, 1, 2, 3};
  double period = 1;
  int n_t = 8;
  int sites = 4;
  std::vector<double> site_weights;  // empty: all one
  double t0 = 0.5;
  double delta = 0.1;
  std::string cutoff = "trapezoid";
  std::string vacuum_file;  // empty: <out>/vacuum.json

  double perturbation = 0;

  std::vector<double> beta{1};
  std::vector<double> dt;
  std::size_t K = 100;
  int scale_samples = 256;
  int h_rounds = 4;
  int t_sweeps = 4;
  int restarts = 4;
  bool symmetrize = true;

  std::vector<int> dims;
  std::vector<bool> entangle_sites;

  std::string out_dir = "cfse_out";
  std::string sha256;  // of the file contents

  // Errors: InvalidArgument for unknown keys or malformed values.
  static ExperimentConfig parse(const std::string& text);
};

struct CliOptions {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
};

// Runs one subcommand; diagnostics go to `log`. Never throws.
int run_command(const CliOptions& opts, std::ostream& log);

}  // namespace cfse
