#include "cfse/local_entropy.hpp"

#include <cmath>
#include <json.hpp>

#include "cfse/errors.hpp"

namespace cfse {

RegionSpec RegionSpec::from_sites(const DiscreteConfiguration& rho_tilde, const std::vector<bool>& sites) {
  return {site_region(rho_tilde, sites)};
}

RegionSpec RegionSpec::complement() const {
  RegionSpec c{V};
  for (auto& m : c.V) m = m ? 0 : 1;
  return c;
}

EntropyReport run_entropy(const PastSet& target, double beta, const DiscreteConfiguration& rho_tilde,
                          const EntropyPipeline& pipe, const Mask* region) {
  if (!pipe.dt_schedule.empty())
    return entropy_dt_limit(target, beta, rho_tilde, pipe.problem, pipe.dt_schedule, pipe.ensemble, pipe.budget,
                            region);
  SliceEnsemble e = slice_ensemble(pipe.problem, pipe.ensemble);
  return entropy_static(target, beta, rho_tilde, e, pipe.budget, region);
}

EntropyReport local_entropy(const PastSet& target, const RegionSpec& V, double beta,
                            const DiscreteConfiguration& rho_tilde, const EntropyPipeline& pipe) {
  if (V.V.size() != rho_tilde.atoms.size())
    throw Error(ErrorKind::DimensionMismatch, "region mask length differs from the rho~ atom count");
  return run_entropy(target, beta, rho_tilde, pipe, &V.V);
}

EntanglementReport entanglement_entropy(const PastSet& target, const RegionSpec& V, double beta,
                                        const DiscreteConfiguration& rho_tilde, const EntropyPipeline& pipe) {
  EntanglementReport r;
  r.global = run_entropy(target, beta, rho_tilde, pipe);
  r.local = local_entropy(target, V, beta, rho_tilde, pipe);
  r.complement = local_entropy(target, V.complement(), beta, rho_tilde, pipe);
  r.E = r.global.value - r.local.value - r.complement.value;
  r.mc_error = std::sqrt(r.global.mc_error * r.global.mc_error + r.local.mc_error * r.local.mc_error +
                         r.complement.mc_error * r.complement.mc_error);
  return r;
}

TailReport local_tail_report(const Mask& mask_tilde, const RegionSpec& V, const DiscreteConfiguration& rho_tilde,
                             const DiscreteConfiguration& rho_truncated, const CMat& U, double t0,
                             const ModelParams& p) {
  if (V.V.size() != rho_tilde.atoms.size())
    throw Error(ErrorKind::DimensionMismatch, "region mask length differs from the rho~ atom count");
  return improper_convergence_report(mask_tilde, rho_tilde, rho_truncated, U, t0, p, {}, V.V);
}

std::string entanglement_json(const EntanglementReport& r) {
  auto part = [](const EntropyReport& e) {
    return nlohmann::json{{"value", e.value}, {"mc_error", e.mc_error}, {"converged", e.converged},
                          {"T_star", e.T_star.T}};
  };
  nlohmann::json j;
  j["E"] = r.E;
  j["mc_error"] = r.mc_error;
  j["global"] = part(r.global);
  j["local"] = part(r.local);
  j["complement"] = part(r.complement);
  return j.dump(2);
}

}  // namespace cfse
