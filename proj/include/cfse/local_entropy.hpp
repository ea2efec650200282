#pragma once

#include <vector>

#include "cfse/entropy_engine.hpp"
#include "cfse/surface_layer.hpp"

namespace cfse {

// Spacetime cylinder V~ as a mask over the rho~ atoms.
struct RegionSpec {
  Mask V;

  static RegionSpec from_sites(const DiscreteConfiguration& rho_tilde, const std::vector<bool>& sites);
  RegionSpec complement() const;
};

// One entropy run: a static slice ensemble when dt_schedule is empty,
// otherwise the thickened Delta t pipeline.
struct EntropyPipeline {
  SliceProblem problem;
  EnsembleOptions ensemble;
  OptimizerBudget budget;
  std::vector<double> dt_schedule;
};

EntropyReport run_entropy(const PastSet& target, double beta, const DiscreteConfiguration& rho_tilde,
                          const EntropyPipeline& pipe, const Mask* region = nullptr);

// Errors: DimensionMismatch for a mask of the wrong length, NoAdmissibleStart.
EntropyReport local_entropy(const PastSet& target, const RegionSpec& V, double beta,
                            const DiscreteConfiguration& rho_tilde, const EntropyPipeline& pipe);

struct EntanglementReport {
  EntropyReport global;
  EntropyReport local;
  EntropyReport complement;
  double E = 0;
  double mc_error = 0;  // component errors in quadrature
};

EntanglementReport entanglement_entropy(const PastSet& target, const RegionSpec& V, double beta,
                                        const DiscreteConfiguration& rho_tilde, const EntropyPipeline& pipe);

// Tail bookkeeping of the localized integrals.
TailReport local_tail_report(const Mask& mask_tilde, const RegionSpec& V, const DiscreteConfiguration& rho_tilde,
                             const DiscreteConfiguration& rho_truncated, const CMat& U, double t0,
                             const ModelParams& p);

std::string entanglement_json(const EntanglementReport& r);

}  // namespace cfse
