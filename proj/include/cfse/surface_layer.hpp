#pragma once

#include <functional>
#include <vector>

#include "cfse/configuration.hpp"
#include "cfse/lagrangian.hpp"

namespace cfse {

struct SurfaceLayerValue {
  double value = 0;
  double term_plus = 0;
  double term_minus = 0;
};

// All variants sum over a (first measure) then b (second measure) in atom
// order, adding w_a * w_b * coefficient * L into term_plus / term_minus. Naive
// loops written in the same order reproduce the results bit for bit.

// Boolean past sets; the second measure is conjugated by U.
SurfaceLayerValue gamma(const Mask& mask_tilde, const Mask& mask, const DiscreteConfiguration& rho_tilde,
                        const DiscreteConfiguration& rho, const CMat& U, const ModelParams& p);

// Fractional memberships chi in [0, 1]; coefficients chi~_a (1 - chi_b) and (1 - chi~_a) chi_b.
SurfaceLayerValue gamma_membership(const Membership& chi_tilde, const Membership& chi,
                                   const DiscreteConfiguration& rho_tilde, const DiscreteConfiguration& rho,
                                   const CMat& U, const ModelParams& p);

// Both measures eta_rho with past sets {t_a <= t} and {t_b <= t_prime}.
SurfaceLayerValue gamma_tt(double t, double t_prime, const DiscreteConfiguration& eta_rho, const CMat& U,
                           const ModelParams& p);

// Softened past windows from a CutoffSpec in Softened mode.
SurfaceLayerValue gamma_soft(double t, double t_prime, const DiscreteConfiguration& config,
                             const CutoffSpec& cut, const CMat& U, const ModelParams& p);

// First-measure sums restricted to the region mask.
SurfaceLayerValue gamma_local(const Mask& mask_tilde, const Mask& mask, const Mask& region,
                              const DiscreteConfiguration& rho_tilde, const DiscreteConfiguration& rho,
                              const CMat& U, const ModelParams& p);

// Indices of atoms at time t (to within a billionth of a lattice step).
std::vector<std::size_t> slice_atoms(const DiscreteConfiguration& c, double t);

// -sum_{a at t0} (w_a / step) sum_b w_b L(U x_a U^-1, x_b). Errors: NoSliceAtoms.
double gamma_dt_kernel(double t0, const DiscreteConfiguration& config, const CMat& U, const ModelParams& p);

using PairKernel = std::function<double(std::size_t a, std::size_t b)>;

struct SiteTail {
  int site = 0;
  double future = 0;  // a in the past set, partner at this site later than t0
  double past = 0;    // a outside the past set, partner at this site at or before t0
};

struct TailReport {
  std::vector<SiteTail> per_site_tails;
  double total = 0;  // sum over sites of |future - past|
  std::vector<double> window_radii;
  std::vector<double> window_future;
  std::vector<double> window_past;
  bool tails_monotone = true;
};

// Windows grow through the distinct |t_b - t0| of the truncated system.
// Without a kernel, L(x~_a, U x_b U^-1) is used.
TailReport improper_convergence_report(const Mask& mask_tilde, const DiscreteConfiguration& rho_tilde,
                                       const DiscreteConfiguration& rho_truncated, const CMat& U, double t0,
                                       const ModelParams& p, const PairKernel& kernel = {},
                                       const Mask& region = {});

}  // namespace cfse
