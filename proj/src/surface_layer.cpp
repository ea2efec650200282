#include "cfse/surface_layer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cfse/errors.hpp"

namespace cfse {
namespace {

std::vector<CMat> conjugated_factors(const DiscreteConfiguration& rho, const CMat& U) {
  if (U.rows() != rho.f || U.cols() != rho.f) throw Error(ErrorKind::DimensionMismatch, "unitary size");
  std::vector<CMat> q;
  q.reserve(rho.atoms.size());
  for (const auto& b : rho.atoms) q.push_back(U * b.point.factor());
  return q;
}

void check_sizes(const DiscreteConfiguration& rho_tilde, const DiscreteConfiguration& rho, std::size_t mt,
                 std::size_t m) {
  if (rho_tilde.f != rho.f) throw Error(ErrorKind::DimensionMismatch, "measures live in different spaces");
  if (mt != rho_tilde.atoms.size() || m != rho.atoms.size())
    throw Error(ErrorKind::DimensionMismatch, "mask length differs from atom count");
}

// coef(a, b, cp, cm) fills the two coefficients; zero pairs are skipped.
template <class Coef>
SurfaceLayerValue accumulate(const DiscreteConfiguration& rho_tilde, const DiscreteConfiguration& rho,
                             const CMat& U, const ModelParams& p, Coef coef) {
  std::vector<CMat> q = conjugated_factors(rho, U);
  SurfaceLayerValue r;
  for (std::size_t a = 0; a < rho_tilde.atoms.size(); ++a) {
    const auto& xa = rho_tilde.atoms[a];
    for (std::size_t b = 0; b < rho.atoms.size(); ++b) {
      double cp = 0, cm = 0;
      coef(a, b, cp, cm);
      if (cp == 0 && cm == 0) continue;
      const auto& yb = rho.atoms[b];
      double L = kappa_lagrangian(xa.point, q[b], yb.point.nonzero_eigenvalues(), p);
      if (cp != 0) r.term_plus += xa.weight * yb.weight * cp * L;
      if (cm != 0) r.term_minus += xa.weight * yb.weight * cm * L;
    }
  }
  r.value = r.term_plus - r.term_minus;
  return r;
}

}  // namespace

SurfaceLayerValue gamma(const Mask& mask_tilde, const Mask& mask, const DiscreteConfiguration& rho_tilde,
                        const DiscreteConfiguration& rho, const CMat& U, const ModelParams& p) {
  check_sizes(rho_tilde, rho, mask_tilde.size(), mask.size());
  return accumulate(rho_tilde, rho, U, p, [&](std::size_t a, std::size_t b, double& cp, double& cm) {
    cp = (mask_tilde[a] && !mask[b]) ? 1.0 : 0.0;
    cm = (!mask_tilde[a] && mask[b]) ? 1.0 : 0.0;
  });
}

SurfaceLayerValue gamma_membership(const Membership& chi_tilde, const Membership& chi,
                                   const DiscreteConfiguration& rho_tilde, const DiscreteConfiguration& rho,
                                   const CMat& U, const ModelParams& p) {
  check_sizes(rho_tilde, rho, chi_tilde.size(), chi.size());
  return accumulate(rho_tilde, rho, U, p, [&](std::size_t a, std::size_t b, double& cp, double& cm) {
    cp = chi_tilde[a] * (1.0 - chi[b]);
    cm = (1.0 - chi_tilde[a]) * chi[b];
  });
}

SurfaceLayerValue gamma_tt(double t, double t_prime, const DiscreteConfiguration& eta_rho, const CMat& U,
                           const ModelParams& p) {
  return gamma(past_mask(eta_rho, t), past_mask(eta_rho, t_prime), eta_rho, eta_rho, U, p);
}

SurfaceLayerValue gamma_soft(double t, double t_prime, const DiscreteConfiguration& config,
                             const CutoffSpec& cut, const CMat& U, const ModelParams& p) {
  std::vector<double> e1, e2;
  for (const auto& a : config.atoms) {
    e1.push_back(cut.eta_window(t, a.t));
    e2.push_back(cut.eta_window(t_prime, a.t));
  }
  return accumulate(config, config, U, p, [&](std::size_t a, std::size_t b, double& cp, double& cm) {
    cp = e1[a] * (1.0 - e2[b]);
    cm = (1.0 - e1[a]) * e2[b];
  });
}

SurfaceLayerValue gamma_local(const Mask& mask_tilde, const Mask& mask, const Mask& region,
                              const DiscreteConfiguration& rho_tilde, const DiscreteConfiguration& rho,
                              const CMat& U, const ModelParams& p) {
  check_sizes(rho_tilde, rho, mask_tilde.size(), mask.size());
  if (region.size() != rho_tilde.atoms.size())
    throw Error(ErrorKind::DimensionMismatch, "region mask length differs from atom count");
  return accumulate(rho_tilde, rho, U, p, [&](std::size_t a, std::size_t b, double& cp, double& cm) {
    cp = (region[a] && mask_tilde[a] && !mask[b]) ? 1.0 : 0.0;
    cm = (region[a] && !mask_tilde[a] && mask[b]) ? 1.0 : 0.0;
  });
}

std::vector<std::size_t> slice_atoms(const DiscreteConfiguration& c, double t) {
  double tol = 1e-9 * (c.lattice_step > 0 ? c.lattice_step : 1.0);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < c.atoms.size(); ++i)
    if (std::abs(c.atoms[i].t - t) <= tol) idx.push_back(i);
  return idx;
}

double gamma_dt_kernel(double t0, const DiscreteConfiguration& config, const CMat& U, const ModelParams& p) {
  auto slice = slice_atoms(config, t0);
  if (slice.empty()) throw Error(ErrorKind::NoSliceAtoms, "no atoms at the requested time");
  double total = 0;
  for (std::size_t a : slice) {
    const auto& xa = config.atoms[a];
    OperatorPoint moved = conjugate(U, xa.point);
    double inner = 0;
    for (const auto& yb : config.atoms) inner += yb.weight * kappa_lagrangian(moved, yb.point, p);
    total += xa.weight / config.lattice_step * inner;
  }
  return -total;
}

TailReport improper_convergence_report(const Mask& mask_tilde, const DiscreteConfiguration& rho_tilde,
                                       const DiscreteConfiguration& rho_truncated, const CMat& U, double t0,
                                       const ModelParams& p, const PairKernel& kernel, const Mask& region) {
  const auto& rho = rho_truncated;
  if (mask_tilde.size() != rho_tilde.atoms.size())
    throw Error(ErrorKind::DimensionMismatch, "mask length differs from atom count");
  if (!region.empty() && region.size() != rho_tilde.atoms.size())
    throw Error(ErrorKind::DimensionMismatch, "region mask length differs from atom count");
  PairKernel L = kernel;
  std::vector<CMat> q;
  if (!L) {
    q = conjugated_factors(rho, U);
    L = [&](std::size_t a, std::size_t b) {
      return kappa_lagrangian(rho_tilde.atoms[a].point, q[b], rho.atoms[b].point.nonzero_eigenvalues(), p);
    };
  }

  // Contribution of each partner atom b, split by the side of t0 it sits on.
  std::vector<double> contrib(rho.atoms.size(), 0.0);
  for (std::size_t b = 0; b < rho.atoms.size(); ++b) {
    bool later = rho.atoms[b].t > t0;
    double s = 0;
    for (std::size_t a = 0; a < rho_tilde.atoms.size(); ++a) {
      if (!region.empty() && !region[a]) continue;
      if (later ? !mask_tilde[a] : mask_tilde[a]) continue;
      s += rho_tilde.atoms[a].weight * rho.atoms[b].weight * L(a, b);
    }
    contrib[b] = s;
  }

  TailReport r;
  std::map<int, SiteTail> by_site;
  for (std::size_t b = 0; b < rho.atoms.size(); ++b) {
    SiteTail& st = by_site[rho.atoms[b].site];
    st.site = rho.atoms[b].site;
    (rho.atoms[b].t > t0 ? st.future : st.past) += contrib[b];
  }
  for (const auto& [site, st] : by_site) {
    r.per_site_tails.push_back(st);
    r.total += std::abs(st.future - st.past);
  }

  std::vector<double> radii;
  for (const auto& b : rho.atoms) radii.push_back(std::abs(b.t - t0));
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
  for (double w : radii) {
    double fut = 0, pst = 0;
    for (std::size_t b = 0; b < rho.atoms.size(); ++b) {
      if (std::abs(rho.atoms[b].t - t0) > w) continue;
      (rho.atoms[b].t > t0 ? fut : pst) += contrib[b];
    }
    if (!r.window_future.empty() && (fut < r.window_future.back() || pst < r.window_past.back()))
      r.tails_monotone = false;
    r.window_radii.push_back(w);
    r.window_future.push_back(fut);
    r.window_past.push_back(pst);
  }
  return r;
}

}  // namespace cfse
