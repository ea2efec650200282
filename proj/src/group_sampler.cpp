#include "cfse/group_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <string>

#include "cfse/codec.hpp"
#include "cfse/errors.hpp"
#include "cfse/surface_layer.hpp"

namespace cfse {

using nlohmann::json;

CMat haar_sample(int f, Rng& rng) {
  if (f < 1) throw Error(ErrorKind::InvalidArgument, "dimension must be positive");
  std::normal_distribution<double> g(0.0, 1.0);
  CMat z(f, f);
  for (int j = 0; j < f; ++j)
    for (int i = 0; i < f; ++i) z(i, j) = cplx(g(rng), g(rng)) / std::sqrt(2.0);
  Eigen::HouseholderQR<CMat> qr(z);
  CMat q = qr.householderQ();
  const CMat& r = qr.matrixQR();
  for (int j = 0; j < f; ++j) {
    cplx d = r(j, j);
    double a = std::abs(d);
    q.col(j) *= a > 0 ? d / a : cplx(1.0, 0.0);
  }
  return q;
}

CMat haar_sample(int f, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return haar_sample(f, rng);
}

CMat time_translation(double tau, const CMat& generator) {
  const Eigen::Index f = generator.rows();
  if (generator.cols() != f) throw Error(ErrorKind::DimensionMismatch, "generator must be square");
  if (f > 0 && (generator - generator.adjoint()).cwiseAbs().maxCoeff() >
                   1e-12 * std::max(1.0, generator.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::NotHermitian, "time translation needs a Hermitian generator");
  bool diagonal = true;
  for (Eigen::Index i = 0; i < f && diagonal; ++i)
    for (Eigen::Index j = 0; j < f; ++j)
      if (i != j && generator(i, j) != cplx(0.0, 0.0)) {
        diagonal = false;
        break;
      }
  if (diagonal) {
    CMat U = CMat::Zero(f, f);
    for (Eigen::Index j = 0; j < f; ++j) U(j, j) = std::polar(1.0, -tau * generator(j, j).real());
    return U;
  }
  Eigen::SelfAdjointEigenSolver<CMat> es(generator);
  Eigen::VectorXcd ph(f);
  for (Eigen::Index j = 0; j < f; ++j) ph(j) = std::polar(1.0, -tau * es.eigenvalues()(j));
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

CMat subgroup_restriction(int dims, int f, Rng& rng) {
  if (dims < 0 || dims > f) throw Error(ErrorKind::InvalidArgument, "subgroup dimension out of range");
  if (dims == f) return haar_sample(f, rng);
  CMat U = CMat::Identity(f, f);
  if (dims > 0) U.topLeftCorner(dims, dims) = haar_sample(dims, rng);
  return U;
}

CMat subgroup_restriction(int dims, int f, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return subgroup_restriction(dims, f, rng);
}

CMat compress_generator(const CMat& H, int dims) {
  CMat out = CMat::Zero(H.rows(), H.cols());
  if (dims > 0) out.topLeftCorner(dims, dims) = H.topLeftCorner(dims, dims);
  return out;
}

double slice_residual(const CMat& U, const SliceProblem& prob) {
  return gamma(prob.past, prob.past, *prob.eta_rho, *prob.eta_rho, U, prob.params).value;
}

double slice_residual(const CMat& U, const DiscreteConfiguration& eta_rho, double t0, const ModelParams& p) {
  return gamma_tt(t0, t0, eta_rho, U, p).value;
}

double ttr_kernel(const CMat& U, const SliceProblem& prob) {
  const auto& c = *prob.eta_rho;
  auto slice = slice_atoms(c, prob.t0);
  if (slice.empty()) throw Error(ErrorKind::NoSliceAtoms, "no atoms at t0");
  double total = 0;
  for (std::size_t a : slice) {
    OperatorPoint moved = conjugate_unchecked(U, c.atoms[a].point);
    double inner = 0;
    for (const auto& yb : c.atoms) inner += yb.weight * kappa_lagrangian(moved, yb.point, prob.params);
    total += c.atoms[a].weight / c.lattice_step * inner;
  }
  return total;
}

SliceProblem make_slice_problem(const DiscreteConfiguration& eta_rho, double t0, const ModelParams& params,
                                std::uint64_t seed, int dims, int scale_samples) {
  params.validate();
  if (!eta_rho.static_info) throw Error(ErrorKind::InvalidArgument, "slice construction needs a static vacuum");
  if (eta_rho.n != params.n) throw Error(ErrorKind::DimensionMismatch, "params.n differs from the vacuum");
  if (dims < 0) dims = eta_rho.f;
  if (dims > eta_rho.f) throw Error(ErrorKind::InvalidArgument, "subgroup dimension exceeds f");
  if (scale_samples < 1) throw Error(ErrorKind::InvalidArgument, "need scale samples");
  SliceProblem prob;
  prob.eta_rho = std::make_shared<const DiscreteConfiguration>(eta_rho);
  prob.t0 = t0;
  prob.params = params;
  prob.dims = dims;
  prob.generator = dims == eta_rho.f ? eta_rho.static_info->generator
                                     : compress_generator(eta_rho.static_info->generator, dims);
  prob.past = past_mask(eta_rho, t0);
  if (slice_atoms(eta_rho, t0).empty()) throw Error(ErrorKind::NoSliceAtoms, "no atoms at t0");

  std::vector<double> mags(static_cast<std::size_t>(scale_samples));
  parallel_for(mags.size(), [&](std::size_t i) {
    // Full-group samples, so every subgroup of a sweep shares one scale.
    CMat U = haar_sample(eta_rho.f, derive_seed(seed, "scale", i));
    mags[i] = std::abs(slice_residual(U, prob));
  });
  std::sort(mags.begin(), mags.end());
  std::size_t mid = mags.size() / 2;
  prob.gamma_scale = mags.size() % 2 ? mags[mid] : 0.5 * (mags[mid - 1] + mags[mid]);
  if (!(prob.gamma_scale > 0)) prob.gamma_scale = 1.0;  // degenerate kernels; tolerances become absolute
  return prob;
}

namespace {

double residual_at(const CMat& U, double tau, const SliceProblem& prob) {
  if (tau == 0) return slice_residual(U, prob);
  return slice_residual(U * time_translation(tau, prob.generator), prob);
}

double tau_derivative(const CMat& U, const SliceProblem& prob) {
  double h = 1e-6 * prob.step();
  return (residual_at(U, h, prob) - residual_at(U, -h, prob)) / (2 * h);
}

bool opposite(double a, double b) { return (a < 0 && b > 0) || (a > 0 && b < 0); }

}  // namespace

ProjectionResult project_to_slice(const CMat& U, const SliceProblem& prob, double dt_max, int max_iter) {
  ProjectionResult out;
  const double tol = prob.tol();
  const double tau_tol = 1e-13 * std::max(prob.step(), dt_max);
  double r0 = residual_at(U, 0, prob);
  double tau = 0;
  if (std::abs(r0) > tol) {
    double rl = residual_at(U, -dt_max, prob);
    double rr = residual_at(U, dt_max, prob);
    bool right = opposite(r0, rr) || rr == 0;
    bool left = opposite(r0, rl) || rl == 0;
    if (!right && !left) return out;
    double lo, hi, flo;
    if (right && left) {
      // Both sides cross; take the side whose secant root is nearer to zero.
      double sr = dt_max * r0 / (r0 - rr), sl = dt_max * r0 / (r0 - rl);
      right = sr <= sl;
    }
    if (right) {
      lo = 0, hi = dt_max, flo = r0;
    } else {
      lo = -dt_max, hi = 0, flo = rl;
    }
    double fmid = flo;
    int it = 0;
    for (; it < max_iter; ++it) {
      tau = 0.5 * (lo + hi);
      fmid = residual_at(U, tau, prob);
      if (fmid == 0 || (hi - lo <= tau_tol && std::abs(fmid) <= tol)) break;
      if (opposite(fmid, flo)) {
        hi = tau;
      } else {
        lo = tau;
        flo = fmid;
      }
    }
    if (it == max_iter && std::abs(fmid) > tol)
      throw Error(ErrorKind::RootFindStall, "bisection did not reach tolerance");
  }
  out.status = ProjectStatus::Accepted;
  out.sample.U = tau == 0 ? U : CMat(U * time_translation(tau, prob.generator));
  out.sample.tau = tau;
  out.sample.residual = slice_residual(out.sample.U, prob);
  out.sample.derivative = tau_derivative(out.sample.U, prob);
  return out;
}

std::vector<double> SliceEnsemble::weights() const {
  std::vector<double> w;
  w.reserve(samples.size());
  for (const auto& s : samples) w.push_back(s.weight);
  return w;
}

SliceEnsemble slice_ensemble(const SliceProblem& prob, const EnsembleOptions& opt) {
  if (opt.K == 0) throw Error(ErrorKind::EnsembleEmpty, "requested ensemble size is zero");
  SliceEnsemble e;
  e.problem = prob;
  e.seed = opt.seed;
  e.dt_max = opt.dt_max > 0 ? opt.dt_max : prob.step();
  if (prob.eta_rho->period > 0 && e.dt_max >= prob.eta_rho->period / 2)
    throw Error(ErrorKind::InvalidArgument, "projection window must stay below half the period");
  const std::size_t max_trials = opt.max_trials ? opt.max_trials : 100 * opt.K;
  // A vanishing generator makes every derivative zero; nothing to flag then.
  const double floor = prob.generator.isZero(0.0) ? -1.0 : 1e-6 * prob.gamma_scale / prob.step();
  const double gate_floor = 1e-12 * ttr_kernel(CMat::Identity(prob.f(), prob.f()), prob);

  std::vector<SliceSample> accepted;
  std::size_t batch = static_cast<std::size_t>(std::max(1, worker_threads())) * 4;
  std::size_t next = 0;
  while (accepted.size() < opt.K && next < max_trials) {
    std::size_t count = std::min(batch, max_trials - next);
    std::vector<ProjectionResult> results(count);
    parallel_for(count, [&](std::size_t k) {
      CMat U = subgroup_restriction(prob.dims, prob.f(), derive_seed(opt.seed, "slice", next + k));
      results[k] = project_to_slice(U, prob, e.dt_max);
    });
    for (std::size_t k = 0; k < count && accepted.size() < opt.K; ++k) {
      ++e.trials;
      if (results[k].status != ProjectStatus::Accepted) continue;
      SliceSample s = std::move(results[k].sample);
      if (std::abs(s.derivative) < floor) {
        ++e.flagged;
        continue;
      }
      if (accepted.size() < opt.gate_probes && !(ttr_kernel(s.U, prob) > gate_floor))
        throw Error(ErrorKind::RegularityGateFailed, "slice kernel not positive at an accepted sample");
      s.weight = opt.weighting == SliceWeighting::Uniform ? 1.0 : 1.0 / std::abs(s.derivative);
      accepted.push_back(std::move(s));
    }
    next += count;
  }
  if (accepted.empty()) throw Error(ErrorKind::EnsembleEmpty, "no trial reached the slice");
  e.acceptance_rate = static_cast<double>(accepted.size() + e.flagged) / static_cast<double>(e.trials);

  std::vector<SliceSample> mirrors(opt.symmetrize ? accepted.size() : 0);
  parallel_for(mirrors.size(), [&](std::size_t i) {
    SliceSample m;
    m.U = accepted[i].U.adjoint();
    m.residual = slice_residual(m.U, prob);
    m.derivative = tau_derivative(m.U, prob);
    m.weight = accepted[i].weight;
    m.mirrored = true;
    mirrors[i] = std::move(m);
  });
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    e.samples.push_back(std::move(accepted[i]));
    if (opt.symmetrize) e.samples.push_back(std::move(mirrors[i]));
  }
  return e;
}

SliceEnsemble thicken(const SliceEnsemble& base, double dt, std::uint64_t seed, bool symmetrize) {
  if (!(dt > 0)) throw Error(ErrorKind::InvalidArgument, "thickening must be positive");
  SliceEnsemble e;
  e.problem = base.problem;
  e.acceptance_rate = base.acceptance_rate;
  e.seed = seed;
  e.dt_max = base.dt_max;
  e.thickening = dt;
  e.trials = base.trials;
  e.flagged = base.flagged;
  std::vector<const SliceSample*> roots;
  for (const auto& s : base.samples)
    if (!s.mirrored) roots.push_back(&s);
  if (roots.empty()) throw Error(ErrorKind::EnsembleEmpty, "base ensemble is empty");
  std::vector<SliceSample> out(roots.size() * (symmetrize ? 2 : 1));
  parallel_for(roots.size(), [&](std::size_t i) {
    Rng rng = make_rng(derive_seed(seed, "thicken", i));
    std::uniform_real_distribution<double> u(-dt, dt);
    double tau = u(rng);
    SliceSample s;
    s.U = roots[i]->U * time_translation(tau, e.problem.generator);
    s.tau = tau;
    s.residual = slice_residual(s.U, e.problem);
    s.weight = roots[i]->weight;
    if (symmetrize) {
      SliceSample m;
      m.U = s.U.adjoint();
      m.tau = -tau;
      m.residual = slice_residual(m.U, e.problem);
      m.weight = s.weight;
      m.mirrored = true;
      out[2 * i + 1] = std::move(m);
      out[2 * i] = std::move(s);
    } else {
      out[i] = std::move(s);
    }
  });
  e.samples = std::move(out);
  return e;
}

Estimate normalized_integral(const std::function<double(const SliceSample&)>& fn, const SliceEnsemble& e) {
  if (e.samples.empty()) throw Error(ErrorKind::EnsembleEmpty, "empty ensemble");
  std::vector<double> v(e.samples.size());
  parallel_for(v.size(), [&](std::size_t i) { v[i] = fn(e.samples[i]); });
  return jackknife_mean(v, e.weights());
}

PointSymmetryReport check_point_symmetry(const SliceEnsemble& e) {
  PointSymmetryReport r;
  std::vector<double> dev(e.samples.size());
  parallel_for(dev.size(), [&](std::size_t i) {
    const auto& s = e.samples[i];
    dev[i] = std::abs(slice_residual(s.U.adjoint(), e.problem) + s.residual);
  });
  for (double d : dev) r.max_abs_residual = std::max(r.max_abs_residual, d);
  r.holds = r.max_abs_residual <= e.problem.tol();
  return r;
}

namespace {

std::string pack_matrix(const CMat& U) {
  std::vector<double> v(static_cast<std::size_t>(2 * U.size()));
  for (Eigen::Index k = 0; k < U.size(); ++k) {
    v[static_cast<std::size_t>(2 * k)] = U.data()[k].real();
    v[static_cast<std::size_t>(2 * k + 1)] = U.data()[k].imag();
  }
  return doubles_to_base64(v);
}

CMat unpack_matrix(const std::string& text, int f) {
  auto v = doubles_from_base64(text);
  if (v.size() != static_cast<std::size_t>(2 * f * f)) throw Error(ErrorKind::Io, "matrix payload size");
  CMat U(f, f);
  for (Eigen::Index k = 0; k < U.size(); ++k)
    U.data()[k] = cplx(v[static_cast<std::size_t>(2 * k)], v[static_cast<std::size_t>(2 * k + 1)]);
  return U;
}

}  // namespace

void write_ensemble_jsonl(const SliceEnsemble& e, std::ostream& out) {
  json head;
  head["config_sha256"] = configuration_checksum(*e.problem.eta_rho);
  head["t0"] = e.problem.t0;
  head["dims"] = e.problem.dims;
  head["gamma_scale"] = e.problem.gamma_scale;
  head["seed"] = e.seed;
  head["dt_max"] = e.dt_max;
  head["thickening"] = e.thickening;
  head["acceptance_rate"] = e.acceptance_rate;
  head["trials"] = e.trials;
  head["flagged"] = e.flagged;
  head["count"] = e.samples.size();
  out << head.dump() << '\n';
  for (const auto& s : e.samples) {
    json j;
    j["mat_b64"] = pack_matrix(s.U);
    j["tau"] = s.tau;
    j["residual"] = s.residual;
    j["weight"] = s.weight;
    j["derivative"] = s.derivative;
    j["mirrored"] = s.mirrored;
    out << j.dump() << '\n';
  }
}

SliceEnsemble read_ensemble_jsonl(std::istream& in, const SliceProblem& prob) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Io, "empty ensemble file");
  try {
    json head = json::parse(line);
    if (head.at("config_sha256").get<std::string>() != configuration_checksum(*prob.eta_rho))
      throw Error(ErrorKind::Io, "ensemble was generated from a different configuration");
    SliceEnsemble e;
    e.problem = prob;
    e.problem.gamma_scale = head.at("gamma_scale").get<double>();
    e.seed = head.at("seed").get<std::uint64_t>();
    e.dt_max = head.at("dt_max").get<double>();
    e.thickening = head.at("thickening").get<double>();
    e.acceptance_rate = head.at("acceptance_rate").get<double>();
    e.trials = head.at("trials").get<std::size_t>();
    e.flagged = head.at("flagged").get<std::size_t>();
    std::size_t count = head.at("count").get<std::size_t>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      SliceSample s;
      s.U = unpack_matrix(j.at("mat_b64").get<std::string>(), prob.f());
      s.tau = j.at("tau").get<double>();
      s.residual = j.at("residual").get<double>();
      s.weight = j.at("weight").get<double>();
      s.derivative = j.value("derivative", 0.0);
      s.mirrored = j.value("mirrored", false);
      e.samples.push_back(std::move(s));
    }
    if (e.samples.size() != count) throw Error(ErrorKind::Io, "ensemble file truncated");
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::Io, std::string("ensemble JSON: ") + ex.what());
  }
}

}  // namespace cfse
