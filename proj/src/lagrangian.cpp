#include "cfse/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cfse/errors.hpp"

namespace cfse {

void ModelParams::validate() const {
  if (!(kappa > 0)) throw Error(ErrorKind::InvalidArgument, "kappa must be positive");
  if (n < 1 || 2 * n > kMaxChain) throw Error(ErrorKind::InvalidArgument, "n must be in [1, 8]");
  if (s_param < 0) throw Error(ErrorKind::InvalidArgument, "s must be nonnegative");
}

double lagrangian_from_moduli(const double* moduli, int count, int n, double kappa) {
  // Zero padding to 2n only matters for the spread term.
  double spread = 0, sum = 0;
  for (int i = 0; i < 2 * n; ++i) {
    double li = i < count ? moduli[i] : 0.0;
    sum += li;
    for (int j = 0; j < 2 * n; ++j) {
      double lj = j < count ? moduli[j] : 0.0;
      spread += (li - lj) * (li - lj);
    }
  }
  return spread / (4.0 * n) + kappa * sum * sum;
}

double kappa_lagrangian(const OperatorPoint& x, const CMat& Qy, const RVec& Dy, const ModelParams& p) {
  ChainVec ev = chain_eigenvalues(x.factor(), x.nonzero_eigenvalues(), Qy, Dy);
  double mod[kMaxChain];
  int count = static_cast<int>(ev.size());
  for (int i = 0; i < count; ++i) mod[i] = std::abs(ev(i));
  return lagrangian_from_moduli(mod, count, p.n, p.kappa);
}

double kappa_lagrangian(const OperatorPoint& x, const OperatorPoint& y, const ModelParams& p) {
  if (x.f() != y.f()) throw Error(ErrorKind::DimensionMismatch, "points live in different spaces");
  return kappa_lagrangian(x, y.factor(), y.nonzero_eigenvalues(), p);
}

double causal_action(const DiscreteConfiguration& c, const ModelParams& p) {
  double s = 0;
  for (const auto& a : c.atoms)
    for (const auto& b : c.atoms) s += a.weight * b.weight * kappa_lagrangian(a.point, b.point, p);
  return s;
}

double ell(const OperatorPoint& x, const DiscreteConfiguration& c, const ModelParams& p) {
  double s = 0;
  for (const auto& b : c.atoms) s += b.weight * kappa_lagrangian(x, b.point, p);
  return s - p.s_param;
}

double minimal_atom_level(const DiscreteConfiguration& c, const ModelParams& p) {
  if (c.atoms.empty()) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  ModelParams q = p;
  q.s_param = 0;
  for (const auto& a : c.atoms) best = std::min(best, ell(a.point, c, q));
  return best;
}

ELResidual el_residual(const DiscreteConfiguration& c, const ModelParams& p, std::uint64_t seed, int probes) {
  ELResidual r;
  if (c.atoms.empty()) return r;
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& a : c.atoms) {
    double v = ell(a.point, c, p);
    r.max_abs_on_M = std::max(r.max_abs_on_M, std::abs(v));
    lowest = std::min(lowest, v);
  }
  for (int k = 0; k < probes; ++k) {
    Rng rng = make_rng(derive_seed(seed, "el-probe", static_cast<std::uint64_t>(k)));
    lowest = std::min(lowest, ell(random_point(c.f, c.n, rng), c, p));
  }
  r.min_off_M_probe = lowest;
  return r;
}

}  // namespace cfse
