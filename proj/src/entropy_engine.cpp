#include "cfse/entropy_engine.hpp"

#include <algorithm>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <json.hpp>
#include <limits>

#include "cfse/codec.hpp"
#include "cfse/errors.hpp"
#include "cfse/surface_layer.hpp"

namespace cfse {

using nlohmann::json;

SliceKernel build_slice_kernel(const DiscreteConfiguration& rho_tilde, const CMat& h, const SliceEnsemble& e) {
  if (e.samples.empty()) throw Error(ErrorKind::EnsembleEmpty, "empty ensemble");
  const auto& vac = *e.problem.eta_rho;
  if (rho_tilde.f != vac.f) throw Error(ErrorKind::DimensionMismatch, "rho~ and vacuum live in different spaces");
  const Mask& past = e.problem.past;
  const ModelParams& p = e.problem.params;
  SliceKernel k;
  k.samples = e.samples.size();
  k.atoms = rho_tilde.atoms.size();
  k.future.assign(k.samples * k.atoms, 0.0);
  k.past.assign(k.samples * k.atoms, 0.0);
  k.weights = e.weights();
  parallel_for(k.samples, [&](std::size_t i) {
    CMat V = h * e.samples[i].U;
    std::vector<CMat> q(vac.atoms.size());
    for (std::size_t b = 0; b < vac.atoms.size(); ++b) q[b] = V * vac.atoms[b].point.factor();
    for (std::size_t a = 0; a < k.atoms; ++a) {
      const OperatorPoint& x = rho_tilde.atoms[a].point;
      double fu = 0, pa = 0;
      for (std::size_t b = 0; b < vac.atoms.size(); ++b) {
        double L = kappa_lagrangian(x, q[b], vac.atoms[b].point.nonzero_eigenvalues(), p);
        (past[b] ? pa : fu) += vac.atoms[b].weight * L;
      }
      k.future[i * k.atoms + a] = fu;
      k.past[i * k.atoms + a] = pa;
    }
  });
  return k;
}

std::vector<double> gamma_samples(const SliceKernel& k, const DiscreteConfiguration& rho_tilde,
                                  const Membership& chi, const Mask* region) {
  if (chi.size() != k.atoms || rho_tilde.atoms.size() != k.atoms)
    throw Error(ErrorKind::DimensionMismatch, "membership length differs from atom count");
  if (region && region->size() != k.atoms) throw Error(ErrorKind::DimensionMismatch, "region length");
  std::vector<double> g(k.samples);
  for (std::size_t i = 0; i < k.samples; ++i) {
    double plus = 0, minus = 0;
    for (std::size_t a = 0; a < k.atoms; ++a) {
      if (region && !(*region)[a]) continue;
      double w = rho_tilde.atoms[a].weight;
      plus += w * chi[a] * k.at_future(i, a);
      minus += w * (1.0 - chi[a]) * k.at_past(i, a);
    }
    g[i] = plus - minus;
  }
  return g;
}

namespace {

double weighted_mean(const std::vector<double>& v, const std::vector<double>& w) {
  double sw = 0, s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sw += w[i];
    s += w[i] * v[i];
  }
  return s / sw;
}

PastSet shifted(const PastSet& T, double s) {
  PastSet out = T;
  for (double& t : out.T) t -= s;
  return out;
}

bool opposite(double a, double b) { return (a < 0 && b > 0) || (a > 0 && b < 0); }

// Bracketed root of fn on [lo, hi]; any point with |fn| <= ftol counts as a root.
std::optional<double> bracketed_root(const std::function<double(double)>& fn, double lo, double hi, double flo,
                                     double fhi, double ftol, double xtol) {
  if (std::abs(flo) <= ftol) return lo;
  if (std::abs(fhi) <= ftol) return hi;
  if (!opposite(flo, fhi)) return std::nullopt;
  std::optional<double> hit;
  auto wrapped = [&](double x) {
    if (hit) return 0.0;
    double v = fn(x);
    if (std::abs(v) <= ftol) {
      hit = x;
      return 0.0;
    }
    return v;
  };
  std::uintmax_t iters = 80;
  auto stop = [xtol](double a, double b) { return std::abs(b - a) <= xtol; };
  try {
    auto r = boost::math::tools::toms748_solve(wrapped, lo, hi, flo, fhi, stop, iters);
    if (hit) return hit;
    double mid = 0.5 * (r.first + r.second);
    if (std::abs(fn(mid)) <= ftol) return mid;
  } catch (const std::exception&) {
  }
  return hit;
}

CMat random_direction(int f, int dims, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  CMat a = CMat::Zero(f, f);
  for (int i = 0; i < dims; ++i)
    for (int j = 0; j < dims; ++j) a(i, j) = cplx(g(rng), g(rng)) / std::sqrt(2.0);
  return (a + a.adjoint()) / 2.0;
}

CMat exp_i(const CMat& herm, double eps) {
  Eigen::SelfAdjointEigenSolver<CMat> es(herm);
  Eigen::VectorXcd ph(herm.rows());
  for (Eigen::Index i = 0; i < herm.rows(); ++i) ph(i) = std::polar(1.0, eps * es.eigenvalues()(i));
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

LogMeanExp evaluate(const SliceKernel& k, const DiscreteConfiguration& rho_tilde, const Membership& chi,
                    double beta, const Mask* region) {
  std::vector<double> g = gamma_samples(k, rho_tilde, chi, region);
  for (double& v : g) v *= beta;
  return log_mean_exp(g, k.weights);
}

double default_max_shift(const DiscreteConfiguration& rho_tilde, double max_shift) {
  return max_shift > 0 ? max_shift : 2 * rho_tilde.lattice_step;
}

}  // namespace

Estimate admissibility_residual(const Membership& chi, const CMat& h, const DiscreteConfiguration& rho_tilde,
                                const SliceEnsemble& e, const Mask* region) {
  SliceKernel k = build_slice_kernel(rho_tilde, h, e);
  return jackknife_mean(gamma_samples(k, rho_tilde, chi, region), k.weights);
}

Estimate admissibility_residual(const PastSet& T, const CMat& h, const DiscreteConfiguration& rho_tilde,
                                const SliceEnsemble& e, const Mask* region) {
  return admissibility_residual(membership(rho_tilde, T), h, rho_tilde, e, region);
}

ShiftResult project_admissible(const PastSet& T, const SliceKernel& k, const DiscreteConfiguration& rho_tilde,
                               double admiss_tol, double max_shift, const Mask* region) {
  auto resid = [&](double s) {
    return weighted_mean(gamma_samples(k, rho_tilde, membership(rho_tilde, shifted(T, s)), region), k.weights);
  };
  ShiftResult out;
  double r0 = resid(0);
  if (std::abs(r0) <= admiss_tol) {
    out.T = T;
    out.residual = r0;
    return out;
  }
  // The residual is nonincreasing in s, so the root lies on the side r0 points to.
  double edge = r0 > 0 ? max_shift : -max_shift;
  double re = resid(edge);
  double lo = std::min(0.0, edge), hi = std::max(0.0, edge);
  double flo = edge > 0 ? r0 : re, fhi = edge > 0 ? re : r0;
  auto s = bracketed_root(resid, lo, hi, flo, fhi, admiss_tol, 1e-14 * max_shift);
  if (!s) throw Error(ErrorKind::NoBracket, "no admissible global shift within the allowed range");
  out.shift = *s;
  out.T = shifted(T, *s);
  out.residual = resid(*s);
  return out;
}

ShiftResult project_admissible(const PastSet& T, const CMat& h, const DiscreteConfiguration& rho_tilde,
                               const SliceEnsemble& e, double max_shift, const Mask* region) {
  SliceKernel k = build_slice_kernel(rho_tilde, h, e);
  return project_admissible(T, k, rho_tilde, e.problem.admiss_tol(), default_max_shift(rho_tilde, max_shift),
                            region);
}

EntropyValue entropy_functional(const PastSet& T, const CMat& h, double beta, const DiscreteConfiguration& rho_tilde,
                                const SliceEnsemble& e, const Mask* region) {
  SliceKernel k = build_slice_kernel(rho_tilde, h, e);
  LogMeanExp r = evaluate(k, rho_tilde, membership(rho_tilde, T), beta, region);
  return {r.value, r.mc_error};
}

PartitionFunction partition_function(const PastSet& T, const CMat& h, double beta,
                                     const DiscreteConfiguration& rho_tilde, const SliceEnsemble& e,
                                     const Mask* region) {
  EntropyValue v = entropy_functional(T, h, beta, rho_tilde, e, region);
  PartitionFunction z;
  z.log_Z = v.value;
  z.Z = std::exp(v.value);
  z.mc_error = z.Z * v.mc_error;
  return z;
}

EntropyReport optimize_configuration(const PastSet& target, double beta, const DiscreteConfiguration& rho_tilde,
                                     const SliceEnsemble& e, const OptimizerBudget& budget, const Mask* region) {
  const SliceProblem& prob = e.problem;
  if (static_cast<int>(target.T.size()) != rho_tilde.sites)
    throw Error(ErrorKind::DimensionMismatch, "target past set length");
  const double tol = prob.admiss_tol();
  const double step = rho_tilde.lattice_step;
  const double max_shift = default_max_shift(rho_tilde, budget.max_shift);
  const double t_step0 = budget.t_step > 0 ? budget.t_step : step / 2;
  const double t_hi = rho_tilde.t_max();
  const Membership chi_target = membership(rho_tilde, target);
  const int f = prob.f();

  struct HSolution {
    CMat h;
    SliceKernel k;
    double residual = 0;
  };
  auto target_residual = [&](const CMat& hh, SliceKernel* keep) {
    SliceKernel k = build_slice_kernel(rho_tilde, hh, e);
    double r = weighted_mean(gamma_samples(k, rho_tilde, chi_target, region), k.weights);
    if (keep) *keep = std::move(k);
    return r;
  };
  // Moves h0 along the time-translation orbit until the target constraint holds.
  auto solve_h = [&](const CMat& h0) -> std::optional<HSolution> {
    HSolution sol;
    double r0 = target_residual(h0, &sol.k);
    if (std::abs(r0) <= tol) {
      sol.h = h0;
      sol.residual = r0;
      return sol;
    }
    auto resid = [&](double s) { return target_residual(time_translation(s, prob.generator) * h0, nullptr); };
    for (double m : {0.5, 1.0, 2.0}) {
      for (double sgn : {1.0, -1.0}) {
        double s = sgn * m * step;
        double r = resid(s);
        if (!(opposite(r, r0) || std::abs(r) <= tol)) continue;
        double lo = std::min(0.0, s), hi = std::max(0.0, s);
        double flo = s > 0 ? r0 : r, fhi = s > 0 ? r : r0;
        auto root = bracketed_root(resid, lo, hi, flo, fhi, tol, 1e-14 * step);
        if (!root) return std::nullopt;
        sol.h = time_translation(*root, prob.generator) * h0;
        sol.residual = target_residual(sol.h, &sol.k);
        return sol;
      }
    }
    return std::nullopt;
  };

  struct Descent {
    PastSet T;
    LogMeanExp best;
    int accepted = 0;
    bool last_improved = false;
  };
  auto descend = [&](const SliceKernel& k) {
    Descent d;
    d.T = target;
    d.best = evaluate(k, rho_tilde, chi_target, beta, region);
    double delta = t_step0;
    for (int sweep = 0; sweep < budget.t_sweeps; ++sweep) {
      bool improved = false;
      for (int x = 0; x < rho_tilde.sites; ++x) {
        for (double dir : {1.0, -1.0}) {
          PastSet cand = d.T;
          double& tx = cand.T[static_cast<std::size_t>(x)];
          tx = std::clamp(tx + dir * delta, 0.0, t_hi);
          if (tx == d.T.T[static_cast<std::size_t>(x)]) continue;
          ShiftResult sr;
          try {
            sr = project_admissible(cand, k, rho_tilde, tol, max_shift, region);
          } catch (const Error&) {
            continue;
          }
          LogMeanExp v = evaluate(k, rho_tilde, membership(rho_tilde, sr.T), beta, region);
          if (v.value < d.best.value) {
            d.T = sr.T;
            d.best = v;
            ++d.accepted;
            improved = true;
          }
        }
      }
      d.last_improved = improved;
      if (!improved) delta /= 2;
    }
    return d;
  };

  CMat h0 = CMat::Identity(f, f);
  std::optional<HSolution> sol = solve_h(h0);
  for (int r = 0; !sol && r < budget.restarts && prob.dims > 0; ++r) {
    h0 = subgroup_restriction(prob.dims, f, derive_seed(budget.seed, "restart", static_cast<std::uint64_t>(r)));
    sol = solve_h(h0);
  }
  if (!sol) throw Error(ErrorKind::NoAdmissibleStart, "target constraint has no admissible h in reach");

  HSolution best_sol = std::move(*sol);
  CMat best_h0 = h0;
  Descent best = descend(best_sol.k);
  EntropyReport rep;
  bool last_round_improved = false;
  double eps = budget.h_step;
  for (int round = 0; round < budget.h_rounds && prob.dims > 0; ++round) {
    CMat A = random_direction(f, prob.dims, derive_seed(budget.seed, "h-step", static_cast<std::uint64_t>(round)));
    CMat cand0 = best_h0 * exp_i(A, eps);
    last_round_improved = false;
    auto cand = solve_h(cand0);
    if (!cand) {
      eps /= 2;
      continue;
    }
    Descent d = descend(cand->k);
    if (d.best.value < best.best.value) {
      best = std::move(d);
      best_sol = std::move(*cand);
      best_h0 = cand0;
      ++rep.h_accepted;
      last_round_improved = true;
    } else {
      eps /= 2;
    }
  }

  rep.value = best.best.value;
  rep.mc_error = best.best.mc_error;
  rep.beta = beta;
  rep.h_star = best_sol.h;
  rep.T_star = best.T;
  rep.admiss_target = best_sol.residual;
  rep.admiss_optimized =
      weighted_mean(gamma_samples(best_sol.k, rho_tilde, membership(rho_tilde, best.T), region), best_sol.k.weights);
  rep.admiss_tol = tol;
  rep.gamma_scale = prob.gamma_scale;
  rep.converged = !last_round_improved && !best.last_improved;
  rep.t_accepted = best.accepted;
  rep.samples = e.samples.size();
  rep.seeds["ensemble"] = e.seed;
  rep.seeds["optimizer"] = budget.seed;
  return rep;
}

TTRCheck ttr_check(const SliceEnsemble& e, std::optional<double> floor) {
  if (e.samples.empty()) throw Error(ErrorKind::EnsembleEmpty, "empty ensemble");
  TTRCheck c;
  c.floor = floor ? *floor : 1e-12 * ttr_kernel(CMat::Identity(e.problem.f(), e.problem.f()), e.problem);
  std::vector<double> v(e.samples.size());
  parallel_for(v.size(), [&](std::size_t i) { v[i] = ttr_kernel(e.samples[i].U, e.problem); });
  c.min_over_U = *std::min_element(v.begin(), v.end());
  c.pass = c.min_over_U > c.floor;
  return c;
}

std::vector<SliceSite> slice_sites(const DiscreteConfiguration& rho_tilde, const PastSet& T) {
  if (static_cast<int>(T.T.size()) != rho_tilde.sites) throw Error(ErrorKind::DimensionMismatch, "past set length");
  const double step = rho_tilde.lattice_step;
  const double eps = 1e-9 * step;
  std::vector<SliceSite> out;
  for (int x = 0; x < rho_tilde.sites; ++x) {
    double t = T.T[static_cast<std::size_t>(x)];
    for (std::size_t a = 0; a < rho_tilde.atoms.size(); ++a) {
      const auto& at = rho_tilde.atoms[a];
      if (at.site != x) continue;
      if (at.t - step + eps < t && t <= at.t + eps) {
        out.push_back({x, a, at.weight / step});
        break;
      }
    }
  }
  return out;
}

TTRCheck ttr_check_tilde(const DiscreteConfiguration& rho_tilde, const PastSet& T, const CMat& h,
                         const SliceEnsemble& e, std::optional<double> floor) {
  auto sites = slice_sites(rho_tilde, T);
  if (sites.empty()) throw Error(ErrorKind::EmptySlice, "no rho~ atoms on the boundary of the past set");
  SliceKernel k = build_slice_kernel(rho_tilde, h, e);
  TTRCheck c;
  if (floor) {
    c.floor = *floor;
  } else {
    const auto& vac = *e.problem.eta_rho;
    double ref = 0;
    for (const auto& s : sites) {
      double inner = 0;
      for (const auto& yb : vac.atoms)
        inner += yb.weight * kappa_lagrangian(rho_tilde.atoms[s.atom].point, yb.point, e.problem.params);
      ref += s.mu * inner;
    }
    c.floor = 1e-12 * ref;
  }
  c.min_over_U = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k.samples; ++i) {
    double v = 0;
    for (const auto& s : sites) v += s.mu * k.total(i, s.atom);
    c.min_over_U = std::min(c.min_over_U, v);
  }
  c.pass = c.min_over_U > c.floor;
  return c;
}

EntropyReport entropy_static(const PastSet& target, double beta, const DiscreteConfiguration& rho_tilde,
                             const SliceEnsemble& e, const OptimizerBudget& budget, const Mask* region) {
  TTRCheck gate = ttr_check(e);
  if (!gate.pass) throw Error(ErrorKind::RegularityGateFailed, "slice kernel not strictly positive");
  return optimize_configuration(target, beta, rho_tilde, e, budget, region);
}

EntropyReport entropy_dt_limit(const PastSet& target, double beta, const DiscreteConfiguration& rho_tilde,
                               const SliceProblem& prob, const std::vector<double>& dt_schedule,
                               const EnsembleOptions& opt, const OptimizerBudget& budget, const Mask* region) {
  if (dt_schedule.empty()) throw Error(ErrorKind::InvalidArgument, "empty Delta t schedule");
  std::vector<EntropyReport> runs;
  for (std::size_t j = 0; j < dt_schedule.size(); ++j) {
    EnsembleOptions o = opt;
    o.seed = derive_seed(opt.seed, "dt", j);
    SliceEnsemble base = slice_ensemble(prob, o);
    if (j == 0) {
      TTRCheck gate = ttr_check(base);
      if (!gate.pass) throw Error(ErrorKind::RegularityGateFailed, "slice kernel not strictly positive");
    }
    SliceEnsemble thick = thicken(base, dt_schedule[j], derive_seed(opt.seed, "thicken", j), opt.symmetrize);
    runs.push_back(optimize_configuration(target, beta, rho_tilde, thick, budget, region));
  }
  std::size_t first = dt_schedule.size() / 2;
  std::size_t arg = first;
  for (std::size_t j = first; j < runs.size(); ++j)
    if (runs[j].value < runs[arg].value) arg = j;
  EntropyReport rep = runs[arg];
  rep.dt_schedule = dt_schedule;
  double running = std::numeric_limits<double>::infinity();
  for (const auto& r : runs) {
    rep.dt_values.push_back(r.value);
    rep.dt_errors.push_back(r.mc_error);
    running = std::min(running, r.value);
    rep.dt_running_min.push_back(running);
  }
  rep.seeds.clear();
  rep.seeds["ensemble"] = opt.seed;
  rep.seeds["optimizer"] = budget.seed;
  return rep;
}

namespace {

struct SiteKernel {
  std::vector<SliceSite> sites;
  std::vector<double> kernel;  // samples x sites
  std::vector<double> em1;     // expm1(beta gamma_i)
  std::vector<double> weights;
};

SiteKernel site_kernel(const PastSet& T, const CMat& h, double beta, const DiscreteConfiguration& rho_tilde,
                       const SliceEnsemble& e) {
  SiteKernel s;
  s.sites = slice_sites(rho_tilde, T);
  if (s.sites.empty()) throw Error(ErrorKind::EmptySlice, "no rho~ atoms on the boundary of the past set");
  SliceKernel k = build_slice_kernel(rho_tilde, h, e);
  std::vector<double> g = gamma_samples(k, rho_tilde, membership(rho_tilde, T));
  s.weights = k.weights;
  s.em1.resize(k.samples);
  s.kernel.resize(k.samples * s.sites.size());
  for (std::size_t i = 0; i < k.samples; ++i) {
    s.em1[i] = std::expm1(beta * g[i]);
    if (!std::isfinite(s.em1[i])) throw Error(ErrorKind::OverflowGuard, "exp(beta gamma) overflows");
    for (std::size_t x = 0; x < s.sites.size(); ++x) s.kernel[i * s.sites.size() + x] = k.total(i, s.sites[x].atom);
  }
  return s;
}

// c - 1 with sample `skip` left out (skip == samples keeps all).
double multiplier_minus_one(const SiteKernel& s, std::size_t skip) {
  const std::size_t m = s.sites.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.em1.size(); ++i) {
    if (i == skip) continue;
    for (std::size_t x = 0; x < m; ++x) {
      double t = s.sites[x].mu * s.weights[i] * s.kernel[i * m + x];
      num += t * s.em1[i];
      den += t;
    }
  }
  if (!(den > 0)) throw Error(ErrorKind::DegenerateKernel, "slice kernel integrates to zero");
  return num / den;
}

}  // namespace

double lagrange_c(const PastSet& T, const CMat& h, double beta, const DiscreteConfiguration& rho_tilde,
                  const SliceEnsemble& e) {
  SiteKernel s = site_kernel(T, h, beta, rho_tilde, e);
  return 1.0 + multiplier_minus_one(s, s.em1.size());
}

OptimalityResidual optimality_residual(const PastSet& T, const CMat& h, double beta,
                                       const DiscreteConfiguration& rho_tilde, const SliceEnsemble& e,
                                       std::optional<double> c) {
  SiteKernel s = site_kernel(T, h, beta, rho_tilde, e);
  const std::size_t n = s.em1.size(), m = s.sites.size();
  OptimalityResidual out;
  double cm1_all = c ? *c - 1.0 : multiplier_minus_one(s, n);
  out.c = 1.0 + cm1_all;
  // Leave-one-out multipliers, shared by all sites.
  std::vector<double> cm1(n + 1, cm1_all);
  if (!c)
    for (std::size_t i = 0; i < n && n > 1; ++i) cm1[i] = multiplier_minus_one(s, i);
  double best = -1;
  for (std::size_t x = 0; x < m; ++x) {
    auto stat = [&](std::size_t skip) {
      double num = 0, sw = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == skip) continue;
        num += s.weights[i] * s.kernel[i * m + x] * (s.em1[i] - cm1[skip]);
        sw += s.weights[i];
      }
      return num / sw;
    };
    Estimate est = jackknife(n, stat);
    out.sites.push_back(s.sites[x].site);
    out.per_site.push_back(est.mean);
    out.per_site_error.push_back(est.std_error);
    if (std::abs(est.mean) > best) {
      best = std::abs(est.mean);
      out.value = best;
      out.mc_error = est.std_error;
    }
  }
  return out;
}

SecondVariation beta2_coefficient(const std::vector<double>& kernel, std::size_t sites,
                                  const std::vector<double>& mu, const std::vector<double>& g,
                                  const std::vector<double>& exp_weights, const std::vector<double>& weights) {
  const std::size_t n = exp_weights.size();
  if (n == 0) throw Error(ErrorKind::EnsembleEmpty, "no samples");
  if (kernel.size() != n * sites || mu.size() != sites || g.size() != sites || weights.size() != n)
    throw Error(ErrorKind::DimensionMismatch, "second-variation inputs disagree in size");
  auto [gmin, gmax] = std::minmax_element(g.begin(), g.end());
  double gscale = std::max(std::abs(*gmin), std::abs(*gmax));
  if (*gmax - *gmin <= 1e-12 * std::max(1.0, gscale))
    throw Error(ErrorKind::ConstantDirection, "g is constant: a pure time translation");

  // Per-sample A_i = sum g K mu and B_i = sum K mu; the squared term is (A_i - c B_i)^2.
  std::vector<double> A(n, 0.0), B(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t x = 0; x < sites; ++x) {
      double km = kernel[i * sites + x] * mu[x];
      A[i] += g[x] * km;
      B[i] += km;
    }
  double sw = 0, sA = 0, sB = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += weights[i];
    sA += weights[i] * A[i];
    sB += weights[i] * B[i];
  }
  auto stat_with_c = [&](std::size_t skip, double* c_out) {
    double a = sA, b = sB, w = sw;
    if (skip < n) {
      a -= weights[skip] * A[skip];
      b -= weights[skip] * B[skip];
      w -= weights[skip];
    }
    if (!(b != 0)) throw Error(ErrorKind::DegenerateKernel, "kernel integrates to zero");
    double c = a / b;
    if (c_out) *c_out = c;
    double num = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == skip) continue;
      double d = A[i] - c * B[i];
      num += weights[i] * d * d * exp_weights[i];
    }
    return num / w;
  };
  SecondVariation out;
  Estimate est = jackknife(n, [&](std::size_t skip) { return stat_with_c(skip, nullptr); });
  stat_with_c(n, &out.c);
  out.leading_beta2_coeff = est.mean;
  out.mc_error = est.std_error;
  return out;
}

SecondVariation second_variation_probe(const std::vector<double>& g, double beta, const SliceEnsemble& e,
                                       double fd_step) {
  const auto& vac = *e.problem.eta_rho;
  if (static_cast<int>(g.size()) != vac.sites) throw Error(ErrorKind::DimensionMismatch, "g must have one entry per site");
  PastSet T0 = uniform_past(vac, e.problem.t0);
  CMat id = CMat::Identity(vac.f, vac.f);
  SliceKernel k = build_slice_kernel(vac, id, e);
  auto sites = slice_sites(vac, T0);
  if (sites.empty()) throw Error(ErrorKind::EmptySlice, "no atoms at t0");
  std::vector<double> gamma = gamma_samples(k, vac, membership(vac, T0));
  std::vector<double> kern(k.samples * sites.size()), mu, gs, expw(k.samples);
  for (const auto& s : sites) {
    mu.push_back(s.mu);
    gs.push_back(g[static_cast<std::size_t>(s.site)]);
  }
  for (std::size_t i = 0; i < k.samples; ++i) {
    expw[i] = std::exp(beta * gamma[i]);
    if (!std::isfinite(expw[i])) throw Error(ErrorKind::OverflowGuard, "exp(beta gamma) overflows");
    for (std::size_t x = 0; x < sites.size(); ++x) kern[i * sites.size() + x] = k.total(i, sites[x].atom);
  }
  SecondVariation out = beta2_coefficient(kern, sites.size(), mu, gs, expw, k.weights);

  // E(tau) along T_tau = t0 + tau g, projected back onto the constraint.
  double h = fd_step > 0 ? fd_step : 1e-2 * vac.lattice_step;
  double max_shift = 2 * vac.lattice_step;
  auto mean_exp = [&](double tau) {
    PastSet T = T0;
    for (std::size_t x = 0; x < T.T.size(); ++x) T.T[x] += tau * g[x];
    ShiftResult sr = project_admissible(T, k, vac, e.problem.admiss_tol(), max_shift);
    std::vector<double> gg = gamma_samples(k, vac, membership(vac, sr.T));
    double s = 0, sw = 0;
    for (std::size_t i = 0; i < gg.size(); ++i) {
      s += k.weights[i] * std::exp(beta * gg[i]);
      sw += k.weights[i];
    }
    return s / sw;
  };
  try {
    out.total = (mean_exp(h) - 2 * mean_exp(0) + mean_exp(-h)) / (h * h);
  } catch (const Error&) {
    out.total = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

HypothesisReport hypothesis_diagnostics(const DiscreteConfiguration& config, double t0, const ModelParams& p,
                                        std::optional<double> rank_tol, std::size_t max_triples) {
  HypothesisReport r;
  r.slice = slice_atoms(config, t0);
  for (std::size_t a : r.slice) {
    r.regular.push_back(config.atoms[a].point.rank() == 2 * config.n);
    r.level.push_back(ell(config.atoms[a].point, config, p));
  }
  const std::size_t m = r.slice.size();
  std::vector<std::vector<bool>> trivial(m, std::vector<bool>(m, false));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      trivial[i][j] = trivial[j][i] =
          spin_intersection_dim(config.atoms[r.slice[i]].point, config.atoms[r.slice[j]].point, rank_tol) == 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      for (std::size_t k = j + 1; k < m; ++k) {
        if (!(r.regular[i] && r.regular[j] && r.regular[k])) continue;
        if (!(trivial[i][j] && trivial[i][k] && trivial[j][k])) continue;
        if (r.triples.size() < max_triples) r.triples.push_back({r.slice[i], r.slice[j], r.slice[k]});
        r.hypothesis_i = true;
      }
  return r;
}

ExhaustionReport exhaustion_sweep(const PastSet& target, double beta, const DiscreteConfiguration& rho_tilde,
                                  const DiscreteConfiguration& eta_rho, double t0, const ModelParams& p,
                                  const std::vector<int>& dims_schedule, const EnsembleOptions& opt,
                                  const OptimizerBudget& budget, std::uint64_t scale_seed) {
  if (dims_schedule.empty()) throw Error(ErrorKind::InvalidArgument, "empty dims schedule");
  for (std::size_t i = 0; i < dims_schedule.size(); ++i) {
    if (dims_schedule[i] < 0 || dims_schedule[i] > eta_rho.f)
      throw Error(ErrorKind::InvalidArgument, "subgroup dimension out of range");
    if (i > 0 && dims_schedule[i] <= dims_schedule[i - 1])
      throw Error(ErrorKind::InvalidArgument, "dims schedule must increase");
  }
  ExhaustionReport out;
  double running = std::numeric_limits<double>::infinity();
  for (int d : dims_schedule) {
    SliceProblem prob = make_slice_problem(eta_rho, t0, p, scale_seed, d);
    SliceEnsemble e = slice_ensemble(prob, opt);
    out.dims.push_back(d);
    out.reports.push_back(entropy_static(target, beta, rho_tilde, e, budget));
    running = std::min(running, out.reports.back().value);
    out.running_min.push_back(running);
  }
  out.liminf = running;
  return out;
}

FeasibilityCheck verify_admissibility(const EntropyReport& r, const PastSet& target,
                                      const DiscreteConfiguration& rho_tilde, const SliceEnsemble& fresh,
                                      const Mask* region) {
  SliceKernel k = build_slice_kernel(rho_tilde, r.h_star, fresh);
  FeasibilityCheck c;
  c.target = jackknife_mean(gamma_samples(k, rho_tilde, membership(rho_tilde, target), region), k.weights);
  c.optimized = jackknife_mean(gamma_samples(k, rho_tilde, membership(rho_tilde, r.T_star), region), k.weights);
  return c;
}

namespace {

json matrix_record(const CMat& m) {
  std::vector<double> v;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      v.push_back(m(i, j).real());
      v.push_back(m(i, j).imag());
    }
  return {{"rows", m.rows()}, {"mat_b64", doubles_to_base64(v)}};
}

}  // namespace

std::string report_json(const EntropyReport& r) {
  json j;
  j["value"] = r.value;
  j["mc_error"] = r.mc_error;
  j["beta"] = r.beta;
  j["gamma_scale"] = r.gamma_scale;
  j["h_star"] = matrix_record(r.h_star);
  j["T_star"] = r.T_star.T;
  j["admiss_residuals"] = {{"target", r.admiss_target}, {"optimized", r.admiss_optimized}, {"tol", r.admiss_tol}};
  j["converged"] = r.converged;
  j["accepted_moves"] = {{"h", r.h_accepted}, {"T", r.t_accepted}};
  j["samples"] = r.samples;
  if (!r.dt_schedule.empty()) {
    j["dt_schedule"] = r.dt_schedule;
    j["dt_values"] = r.dt_values;
    j["dt_errors"] = r.dt_errors;
    j["dt_running_min"] = r.dt_running_min;
  }
  j["seeds"] = r.seeds;
  return j.dump(2);
}

}  // namespace cfse
