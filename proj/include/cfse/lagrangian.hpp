#pragma once

#include <cstdint>

#include "cfse/configuration.hpp"
#include "cfse/operator_core.hpp"

namespace cfse {

struct ModelParams {
  double kappa = 1.0;
  int n = 1;
  double s_param = 0.0;

  void validate() const;
};

// L = (1/4n) sum_{i,j} (|l_i| - |l_j|)^2 + kappa (sum_j |l_j|)^2 over the chain spectrum.
double lagrangian_from_moduli(const double* moduli, int count, int n, double kappa);
double kappa_lagrangian(const OperatorPoint& x, const OperatorPoint& y, const ModelParams& p);
// Same value from cached factors; Qy = U * y.factor() for a conjugated partner.
double kappa_lagrangian(const OperatorPoint& x, const CMat& Qy, const RVec& Dy, const ModelParams& p);

double causal_action(const DiscreteConfiguration& c, const ModelParams& p);

// sum_b w_b L(x, x_b) - s
double ell(const OperatorPoint& x, const DiscreteConfiguration& c, const ModelParams& p);

// Smallest atom level min_a sum_b w_b L(x_a, x_b); a natural choice for s.
double minimal_atom_level(const DiscreteConfiguration& c, const ModelParams& p);

struct ELResidual {
  double max_abs_on_M = 0;
  double min_off_M_probe = 0;
};

// Probes the support and `probes` seeded random points. Empty configuration
// gives {0, 0}.
ELResidual el_residual(const DiscreteConfiguration& c, const ModelParams& p, std::uint64_t seed,
                       int probes = 200);

}  // namespace cfse
