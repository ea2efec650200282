#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfse/configuration.hpp"
#include "cfse/group_sampler.hpp"
#include "cfse/stats.hpp"

namespace cfse {

struct AdmissiblePair {
  PastSet T;
  CMat h;
};

// Per-sample partner sums for fixed (rho~, h) against the vacuum of the
// ensemble, split by the vacuum past set {t <= t0}:
//   future(i, a) = sum_{b not in past} w_b L(x~_a, V_i y_b V_i^-1)
//   past(i, a)   = sum_{b in past}     w_b L(x~_a, V_i y_b V_i^-1)
// with V_i = h U_i. Any membership chi then gives
//   gamma_i = sum_a w~_a (chi_a future(i, a) - (1 - chi_a) past(i, a)).
struct SliceKernel {
  std::size_t samples = 0;
  std::size_t atoms = 0;
  std::vector<double> future;
  std::vector<double> past;
  std::vector<double> weights;

  double at_future(std::size_t i, std::size_t a) const { return future[i * atoms + a]; }
  double at_past(std::size_t i, std::size_t a) const { return past[i * atoms + a]; }
  // Full partner sum sum_b w_b L, the slice kernel of atom a.
  double total(std::size_t i, std::size_t a) const { return at_future(i, a) + at_past(i, a); }
};

SliceKernel build_slice_kernel(const DiscreteConfiguration& rho_tilde, const CMat& h, const SliceEnsemble& e);

// gamma_i for every sample; region (optional) restricts the rho~ atoms.
std::vector<double> gamma_samples(const SliceKernel& k, const DiscreteConfiguration& rho_tilde,
                                  const Membership& chi, const Mask* region = nullptr);

Estimate admissibility_residual(const Membership& chi, const CMat& h, const DiscreteConfiguration& rho_tilde,
                                const SliceEnsemble& e, const Mask* region = nullptr);
Estimate admissibility_residual(const PastSet& T, const CMat& h, const DiscreteConfiguration& rho_tilde,
                                const SliceEnsemble& e, const Mask* region = nullptr);

struct ShiftResult {
  PastSet T;
  double shift = 0;
  double residual = 0;
};

// Global shift T - s restoring admissibility. Errors: NoBracket.
ShiftResult project_admissible(const PastSet& T, const SliceKernel& k, const DiscreteConfiguration& rho_tilde,
                               double admiss_tol, double max_shift, const Mask* region = nullptr);
ShiftResult project_admissible(const PastSet& T, const CMat& h, const DiscreteConfiguration& rho_tilde,
                               const SliceEnsemble& e, double max_shift = 0, const Mask* region = nullptr);

struct EntropyValue {
  double value = 0;
  double mc_error = 0;
};

// log of the normalized integral of exp(beta gamma). Errors: OverflowGuard.
EntropyValue entropy_functional(const PastSet& T, const CMat& h, double beta, const DiscreteConfiguration& rho_tilde,
                                const SliceEnsemble& e, const Mask* region = nullptr);

struct OptimizerBudget {
  int h_rounds = 4;       // random geodesic proposals for h
  int t_sweeps = 4;       // coordinate sweeps over T per h
  double h_step = 0.2;    // initial geodesic step
  double t_step = 0;      // 0 picks half a lattice step
  double max_shift = 0;   // 0 picks two lattice steps
  int restarts = 4;       // random starts when h = identity has no admissible shift
  std::uint64_t seed = 0;
};

struct EntropyReport {
  double value = 0;
  double mc_error = 0;
  double beta = 0;
  CMat h_star;
  PastSet T_star;
  double admiss_target = 0;     // residual of the target constraint at h*
  double admiss_optimized = 0;  // residual of the optimized constraint at (h*, T*)
  double admiss_tol = 0;
  double gamma_scale = 0;
  bool converged = false;
  int h_accepted = 0;
  int t_accepted = 0;
  std::size_t samples = 0;
  std::vector<double> dt_schedule;
  std::vector<double> dt_values;
  std::vector<double> dt_errors;
  std::vector<double> dt_running_min;
  std::map<std::string, std::uint64_t> seeds;
};

// Infimum of the entropy functional over admissible (h, T'), T' starting at
// the target. Errors: NoAdmissibleStart. A spent budget is reported through
// converged = false.
EntropyReport optimize_configuration(const PastSet& target, double beta, const DiscreteConfiguration& rho_tilde,
                                     const SliceEnsemble& e, const OptimizerBudget& budget,
                                     const Mask* region = nullptr);

struct TTRCheck {
  double min_over_U = 0;
  double floor = 0;
  bool pass = false;
};

// min over the ensemble of sum_{x at t0} mu(x) sum_b w_b L(U x U^-1, y_b).
// The default floor is 1e-12 times the identity value.
TTRCheck ttr_check(const SliceEnsemble& e, std::optional<double> floor = std::nullopt);

// The same with the slice of rho~ at T and partners conjugated by h U.
// Errors: EmptySlice.
TTRCheck ttr_check_tilde(const DiscreteConfiguration& rho_tilde, const PastSet& T, const CMat& h,
                         const SliceEnsemble& e, std::optional<double> floor = std::nullopt);

// Gate on ttr_check, then optimize. Errors: RegularityGateFailed.
EntropyReport entropy_static(const PastSet& target, double beta, const DiscreteConfiguration& rho_tilde,
                             const SliceEnsemble& e, const OptimizerBudget& budget, const Mask* region = nullptr);

// Fresh slice ensemble per Delta t (seeds derived from opt.seed), thickened to
// [-dt, dt]; the reported value is the minimum over the final half of the schedule.
EntropyReport entropy_dt_limit(const PastSet& target, double beta, const DiscreteConfiguration& rho_tilde,
                               const SliceProblem& prob, const std::vector<double>& dt_schedule,
                               const EnsembleOptions& opt, const OptimizerBudget& budget,
                               const Mask* region = nullptr);

// Boundary atom of each site: the atom of that site whose cell (t - step, t]
// contains T(site). Sites without one are skipped.
struct SliceSite {
  int site = 0;
  std::size_t atom = 0;
  double mu = 0;  // w / step
};
std::vector<SliceSite> slice_sites(const DiscreteConfiguration& rho_tilde, const PastSet& T);

// Multiplier of the global-shift variation. Errors: DegenerateKernel.
double lagrange_c(const PastSet& T, const CMat& h, double beta, const DiscreteConfiguration& rho_tilde,
                  const SliceEnsemble& e);

struct OptimalityResidual {
  double value = 0;     // max over sites of |R(x)|
  double mc_error = 0;  // jackknife error at the maximizing site
  double c = 0;
  std::vector<int> sites;
  std::vector<double> per_site;
  std::vector<double> per_site_error;
};

// R(x) = mean over the ensemble of h_U(x) (e^{beta gamma} - c). Without an
// explicit c, lagrange_c is used and re-estimated inside the jackknife.
OptimalityResidual optimality_residual(const PastSet& T, const CMat& h, double beta,
                                       const DiscreteConfiguration& rho_tilde, const SliceEnsemble& e,
                                       std::optional<double> c = std::nullopt);

struct SecondVariation {
  double leading_beta2_coeff = 0;
  double mc_error = 0;
  double c = 0;
  double total = 0;  // finite-difference second derivative along the constrained curve
};

// E[(sum_x (g(x) - c) h_U(x) mu(x))^2 e^{beta gamma}] with c = sum g hbar mu / sum hbar mu.
// kernel is samples x sites (row-major). Errors: ConstantDirection.
SecondVariation beta2_coefficient(const std::vector<double>& kernel, std::size_t sites,
                                  const std::vector<double>& mu, const std::vector<double>& g,
                                  const std::vector<double>& exp_weights, const std::vector<double>& weights);

// Vacuum probe at (T = t0, h = identity); g is indexed by site.
SecondVariation second_variation_probe(const std::vector<double>& g, double beta, const SliceEnsemble& e,
                                       double fd_step = 0);

struct HypothesisReport {
  std::vector<std::size_t> slice;        // atom indices at t0
  std::vector<bool> regular;             // rank 2n
  std::vector<std::array<std::size_t, 3>> triples;  // pairwise trivially intersecting regular triples
  bool hypothesis_i = false;
  std::string hypothesis_ii = "not machine-checkable";
  std::vector<double> level;             // sum_b w_b L(x, y_b) - s on the slice
};

HypothesisReport hypothesis_diagnostics(const DiscreteConfiguration& config, double t0, const ModelParams& p,
                                        std::optional<double> rank_tol = std::nullopt,
                                        std::size_t max_triples = 1000);

struct PartitionFunction {
  double Z = 1;
  double log_Z = 0;  // identical to entropy_functional on the same inputs
  double mc_error = 0;
};

PartitionFunction partition_function(const PastSet& T, const CMat& h, double beta,
                                     const DiscreteConfiguration& rho_tilde, const SliceEnsemble& e,
                                     const Mask* region = nullptr);

struct ExhaustionReport {
  std::vector<int> dims;
  std::vector<EntropyReport> reports;
  std::vector<double> running_min;
  double liminf = 0;
};

// entropy_static on the subgroups of the first `dims` coordinates.
ExhaustionReport exhaustion_sweep(const PastSet& target, double beta, const DiscreteConfiguration& rho_tilde,
                                  const DiscreteConfiguration& eta_rho, double t0, const ModelParams& p,
                                  const std::vector<int>& dims_schedule, const EnsembleOptions& opt,
                                  const OptimizerBudget& budget, std::uint64_t scale_seed);

// Mean residuals of both constraints on another ensemble.
struct FeasibilityCheck {
  Estimate target;
  Estimate optimized;
};
FeasibilityCheck verify_admissibility(const EntropyReport& r, const PastSet& target,
                                      const DiscreteConfiguration& rho_tilde, const SliceEnsemble& fresh,
                                      const Mask* region = nullptr);

std::string report_json(const EntropyReport& r);

}  // namespace cfse
