#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "cfse/configuration.hpp"
#include "cfse/lagrangian.hpp"
#include "cfse/rng.hpp"
#include "cfse/stats.hpp"

namespace cfse {

// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases of
// diag(R) moved into Q.
CMat haar_sample(int f, Rng& rng);
CMat haar_sample(int f, std::uint64_t seed);

// exp(-i tau H) for Hermitian H; diagonal generators take a fast path.
// Errors: NotHermitian.
CMat time_translation(double tau, const CMat& generator);

// Haar unitary on the first `dims` coordinates, identity on the rest.
CMat subgroup_restriction(int dims, int f, Rng& rng);
CMat subgroup_restriction(int dims, int f, std::uint64_t seed);

// pi H pi for the coordinate projection pi onto the first `dims` basis vectors.
CMat compress_generator(const CMat& H, int dims);

// Everything the constraint slice depends on. The static vacuum eta_rho must
// carry its generator.
struct SliceProblem {
  std::shared_ptr<const DiscreteConfiguration> eta_rho;
  double t0 = 0;
  ModelParams params;
  CMat generator;  // compressed when dims < f
  int dims = 0;
  double gamma_scale = 1;  // median |gamma^{t0,t0}(eta rho, U eta rho)| over raw samples
  Mask past;               // past_mask(eta_rho, t0)

  double tol() const { return 1e-9 * gamma_scale; }
  double admiss_tol() const { return 1e-6 * gamma_scale; }
  double step() const { return eta_rho->lattice_step; }
  int f() const { return eta_rho->f; }
};

// dims < 0 means the full group. Errors: InvalidArgument for non-static input.
SliceProblem make_slice_problem(const DiscreteConfiguration& eta_rho, double t0, const ModelParams& params,
                                std::uint64_t seed, int dims = -1, int scale_samples = 256);

double slice_residual(const CMat& U, const SliceProblem& prob);
double slice_residual(const CMat& U, const DiscreteConfiguration& eta_rho, double t0, const ModelParams& p);

// sum_{x at t0} mu(x) sum_b w_b L(U x U^-1, y_b), mu(x) = w_x / step.
double ttr_kernel(const CMat& U, const SliceProblem& prob);

struct SliceSample {
  CMat U;
  double tau = 0;
  double residual = 0;
  double weight = 1;
  double derivative = 0;  // d/dtau of the residual along U U_tau
  bool mirrored = false;
};

enum class ProjectStatus { Accepted, Rejected };

struct ProjectionResult {
  ProjectStatus status = ProjectStatus::Rejected;
  SliceSample sample;
};

// Brackets at {-dt_max, 0, dt_max} and bisects. Rejected without a sign
// change; RootFindStall if max_iter is hit above tolerance.
ProjectionResult project_to_slice(const CMat& U, const SliceProblem& prob, double dt_max, int max_iter = 200);

enum class SliceWeighting { Uniform, InverseDerivative };

struct EnsembleOptions {
  std::size_t K = 100;  // accepted base samples
  double dt_max = 0;    // 0 picks one lattice step
  std::uint64_t seed = 0;
  bool symmetrize = true;
  SliceWeighting weighting = SliceWeighting::Uniform;
  std::size_t max_trials = 0;  // 0 picks 100 K
  std::size_t gate_probes = 8;
};

struct SliceEnsemble {
  SliceProblem problem;
  std::vector<SliceSample> samples;
  double acceptance_rate = 0;
  std::uint64_t seed = 0;
  double dt_max = 0;
  double thickening = 0;  // Delta t of a thickened ensemble
  std::size_t trials = 0;
  std::size_t flagged = 0;  // accepted roots dropped for a vanishing tau-derivative

  std::vector<double> weights() const;
};

// Errors: EnsembleEmpty, RegularityGateFailed, RootFindStall.
SliceEnsemble slice_ensemble(const SliceProblem& prob, const EnsembleOptions& opt);

// Replaces each base sample U by U U_tau, tau uniform in [-dt, dt], plus the
// inverse when symmetrizing.
SliceEnsemble thicken(const SliceEnsemble& base, double dt, std::uint64_t seed, bool symmetrize = true);

Estimate normalized_integral(const std::function<double(const SliceSample&)>& fn, const SliceEnsemble& e);

struct PointSymmetryReport {
  double max_abs_residual = 0;  // over U^-1 for every sample
  bool holds = true;
};

PointSymmetryReport check_point_symmetry(const SliceEnsemble& e);

void write_ensemble_jsonl(const SliceEnsemble& e, std::ostream& out);
// Errors: Io on malformed input or a checksum that does not match prob.eta_rho.
SliceEnsemble read_ensemble_jsonl(std::istream& in, const SliceProblem& prob);

}  // namespace cfse
