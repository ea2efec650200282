// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: acceptance <path to cfse tool>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cfse/entropy_engine.hpp"
#include "cfse/errors.hpp"
#include "cfse/surface_layer.hpp"
#include "oracles.hpp"

using namespace cfse;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// Everything built on the shared vacuum.
struct Vacuum {
  DiscreteConfiguration vac = oracle::small_vacuum();
  SliceProblem prob = make_slice_problem(vac, 0.5, ModelParams{}, derive_seed(1, "scale"));
  PastSet t0 = uniform_past(vac, 0.5);
  double beta = 1.0 / prob.gamma_scale;
  std::deque<SliceEnsemble> ensembles;  // every ensemble the run builds, for the symmetry suite
};

OptimizerBudget budget(std::uint64_t seed) {
  OptimizerBudget b;
  b.seed = seed;
  return b;
}

struct StaticResult {
  SliceEnsemble e;
  EntropyReport rep;
};

StaticResult criterion1(Vacuum& v) {
  auto start = std::chrono::steady_clock::now();
  EnsembleOptions o;
  o.K = 400;
  o.seed = derive_seed(1, "ensemble");
  StaticResult r{slice_ensemble(v.prob, o), {}};
  r.rep = entropy_static(v.t0, v.beta, v.vac, r.e, budget(derive_seed(1, "optimizer")));
  double secs = seconds_since(start);
  bool ok = std::abs(r.rep.value) <= 3 * r.rep.mc_error && secs <= 120;
  report(1, "vacuum-zero entropy", ok,
         fmt("value %.3g +- %.3g, %.1f s, converged %g", r.rep.value, r.rep.mc_error, secs, r.rep.converged));
  return r;
}

EntropyReport criterion2(Vacuum& v) {
  const double step = v.vac.lattice_step;
  std::vector<double> dts{0.2 * step, 0.1 * step, 0.05 * step, 0.025 * step};
  EnsembleOptions o;
  o.K = 100;
  o.seed = derive_seed(2, "ensemble");
  EntropyReport rep = entropy_dt_limit(v.t0, v.beta, v.vac, v.prob, dts, o, budget(derive_seed(2, "optimizer")));
  // The same base and thickened ensembles, rebuilt from their seeds for the symmetry suite.
  for (std::size_t j = 0; j < dts.size(); ++j) {
    EnsembleOptions b = o;
    b.seed = derive_seed(o.seed, "dt", j);
    v.ensembles.push_back(slice_ensemble(v.prob, b));
    v.ensembles.push_back(thicken(v.ensembles.back(), dts[j], derive_seed(o.seed, "thicken", j)));
  }
  // Ordinary least squares value = a + C dt; the intercept error is propagated from the per-point errors.
  const double n = static_cast<double>(dts.size());
  double mx = 0, my = 0;
  for (std::size_t j = 0; j < dts.size(); ++j) {
    mx += dts[j] / n;
    my += rep.dt_values[j] / n;
  }
  double sxx = 0, sxy = 0;
  for (std::size_t j = 0; j < dts.size(); ++j) {
    sxx += (dts[j] - mx) * (dts[j] - mx);
    sxy += (dts[j] - mx) * (rep.dt_values[j] - my);
  }
  double slope = sxy / sxx, intercept = my - slope * mx, var = 0;
  for (std::size_t j = 0; j < dts.size(); ++j) {
    double c = 1.0 / n - mx * (dts[j] - mx) / sxx;
    var += c * c * rep.dt_errors[j] * rep.dt_errors[j];
  }
  std::string trace;
  for (std::size_t j = 0; j < dts.size(); ++j)
    trace += fmt(" %.3g+-%.2g", rep.dt_values[j], rep.dt_errors[j]);
  report(2, "C*dt envelope", slope > 0 && intercept <= 3 * std::sqrt(var),
         fmt("slope %.3g, intercept %.3g +- %.2g;", slope, intercept, std::sqrt(var)) + trace);
  return rep;
}

void criterion3(Vacuum& v) {
  EnsembleOptions o;
  o.K = 100;
  o.seed = derive_seed(3, "ensemble");
  const SliceEnsemble& e = v.ensembles.emplace_back(slice_ensemble(v.prob, o));
  int bad = 0, failed = 0;
  double worst = 1e300;
  for (int k = 0; k < 50; ++k) {
    double strength = 0.3 * (k + 1) / 50.0;
    auto rt = perturb(v.vac, strength, derive_seed(3, "perturbation", static_cast<std::uint64_t>(k)));
    try {
      auto rep = optimize_configuration(v.t0, v.beta, rt, e, budget(derive_seed(3, "optimizer", k)));
      double margin = rep.value + std::abs(v.beta) * rep.admiss_tol + 3 * rep.mc_error;
      worst = std::min(worst, margin);
      if (margin < 0) ++bad;
    } catch (const Error&) {
      ++failed;
    }
  }
  report(3, "non-negativity", bad == 0 && failed == 0,
         fmt("%g of 50 below bound, %g without admissible start, smallest margin %.3g", bad, failed, worst));
}

void criterion4() {
  ModelParams p;
  int mismatches = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    auto s = oracle::random_system(derive_seed(4, "system", t));
    auto check = [&](double got, double ref) { mismatches += got != ref; };
    check(gamma(s.mt, s.m, s.rt, s.r, s.U, p).value,
          oracle::gamma_loop(
              s.rt, s.r, s.U, p, [&](std::size_t a, std::size_t b) { return s.mt[a] && !s.m[b] ? 1.0 : 0.0; },
              [&](std::size_t a, std::size_t b) { return !s.mt[a] && s.m[b] ? 1.0 : 0.0; }));
    check(gamma_membership(s.ct, s.c, s.rt, s.r, s.U, p).value,
          oracle::gamma_loop(
              s.rt, s.r, s.U, p, [&](std::size_t a, std::size_t b) { return s.ct[a] * (1.0 - s.c[b]); },
              [&](std::size_t a, std::size_t b) { return (1.0 - s.ct[a]) * s.c[b]; }));
    check(gamma_local(s.mt, s.m, s.region, s.rt, s.r, s.U, p).value,
          oracle::gamma_loop(
              s.rt, s.r, s.U, p,
              [&](std::size_t a, std::size_t b) { return s.region[a] && s.mt[a] && !s.m[b] ? 1.0 : 0.0; },
              [&](std::size_t a, std::size_t b) { return s.region[a] && !s.mt[a] && s.m[b] ? 1.0 : 0.0; }));
    double t1 = static_cast<double>(t % 4), t2 = static_cast<double>((t / 4) % 4);
    check(gamma_tt(t1, t2, s.r, s.U, p).value,
          oracle::gamma_loop(
              s.r, s.r, s.U, p,
              [&](std::size_t a, std::size_t b) { return s.r.atoms[a].t <= t1 && !(s.r.atoms[b].t <= t2) ? 1.0 : 0.0; },
              [&](std::size_t a, std::size_t b) { return !(s.r.atoms[a].t <= t1) && s.r.atoms[b].t <= t2 ? 1.0 : 0.0; }));
    auto cut = softened_cutoff(s.r, 3.0);
    check(gamma_soft(t1, t2, s.r, cut, s.U, p).value,
          oracle::gamma_loop(
              s.r, s.r, s.U, p,
              [&](std::size_t a, std::size_t b) {
                return cut.eta_window(t1, s.r.atoms[a].t) * (1.0 - cut.eta_window(t2, s.r.atoms[b].t));
              },
              [&](std::size_t a, std::size_t b) {
                return (1.0 - cut.eta_window(t1, s.r.atoms[a].t)) * cut.eta_window(t2, s.r.atoms[b].t);
              }));
  }
  double worst = 0;
  for (std::uint64_t t = 0; t < 1000; ++t) {
    Rng rng = make_rng(derive_seed(4, "pair", t));
    int f = 2 + static_cast<int>(t % 7);
    int n = 1 + static_cast<int>(t % static_cast<std::uint64_t>(std::min(3, f / 2)));
    ModelParams q{0.5 + static_cast<double>(t % 4), n, 0};
    auto x = random_point(f, n, rng);
    auto y = random_point(f, n, rng);
    double ref = oracle::full_lagrangian(x.matrix(), y.matrix(), n, q.kappa);
    worst = std::max(worst, std::abs(kappa_lagrangian(x, y, q) - ref) / std::max(1.0, ref));
  }
  report(4, "brute-force oracle equivalence", mismatches == 0 && worst <= 1e-9,
         fmt("%g of 500 gamma evaluations differ, worst Lagrangian deviation %.2g", mismatches, worst));
}

void criterion5(const Vacuum& v) {
  ModelParams p;
  double inv = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    Rng rng = make_rng(derive_seed(5, "pair", t));
    int f = 2 + static_cast<int>(t % 7);
    auto x = random_point(f, 1, rng);
    auto y = random_point(f, 1, rng);
    CMat U = haar_sample(f, rng);
    double l = kappa_lagrangian(x, y, p);
    inv = std::max(inv, std::abs(l - kappa_lagrangian(conjugate(U, x), conjugate(U, y), p)) / std::max(1.0, l));
  }
  double anti = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    CMat U = haar_sample(4, derive_seed(5, "anti", t));
    double a = gamma_tt(0.5, 0.5, v.vac, U, p).value;
    double b = gamma_tt(0.5, 0.5, v.vac, U.adjoint(), p).value;
    anti = std::max(anti, std::abs(a + b) / std::max(1.0, std::abs(a)));
  }
  int asym = 0;
  for (const SliceEnsemble& e : v.ensembles) asym += !check_point_symmetry(e).holds;
  // Additivity: the split sums agree with the whole to within one rounding per partial sum.
  double add = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    auto s = oracle::random_system(derive_seed(5, "region", t));
    cfse::Mask rest(s.rt.size());
    for (std::size_t a = 0; a < s.rt.size(); ++a) rest[a] = s.region[a] ? 0 : 1;
    auto g = gamma(s.mt, s.m, s.rt, s.r, s.U, p);
    auto a = gamma_local(s.mt, s.m, s.region, s.rt, s.r, s.U, p);
    auto b = gamma_local(s.mt, s.m, rest, s.rt, s.r, s.U, p);
    double scale = g.term_plus + g.term_minus;
    if (scale > 0) add = std::max(add, std::abs(a.value + b.value - g.value) / scale);
  }
  const double add_bound = 4 * std::numeric_limits<double>::epsilon();
  report(5, "symmetry suite", inv <= 1e-9 && anti <= 1e-9 && asym == 0 && add <= add_bound,
         fmt("invariance %.2g, antisymmetry %.2g, asymmetric ensembles %g, additivity %.2g (relative)", inv, anti,
             asym, add) +
             fmt(" over %g ensembles", static_cast<double>(v.ensembles.size())));
}

void criterion6(const EntropyReport& st, const EntropyReport& lim) {
  double diff = lim.value - st.value;
  double err = std::sqrt(st.mc_error * st.mc_error + lim.mc_error * lim.mc_error);
  report(6, "static and Delta t limit agree", std::abs(diff) <= 3 * err,
         fmt("static %.3g +- %.2g, limit %.3g +- %.2g", st.value, st.mc_error, lim.value, lim.mc_error));
}

void criterion7(const Vacuum& v, const StaticResult& s) {
  auto at = optimality_residual(s.rep.T_star, s.rep.h_star, v.beta, v.vac, s.e);
  PastSet off = s.rep.T_star;
  off.T[0] += v.vac.lattice_step;
  auto moved = optimality_residual(off, s.rep.h_star, v.beta, v.vac, s.e);
  report(7, "stationarity", at.value <= 3 * at.mc_error && moved.value > 3 * moved.mc_error,
         fmt("optimum %.3g +- %.2g (c = %.6g), shifted %.3g", at.value, at.mc_error, at.c, moved.value) +
             fmt(" +- %.2g", moved.mc_error));
}

void criterion8(const Vacuum& v, const SliceEnsemble& e) {
  std::vector<double> g{1, -1, 1, -1};
  bool ok = true;
  std::string detail;
  for (double b : {100.0, 1000.0}) {
    auto sv = second_variation_probe(g, b * v.beta, e);
    ok = ok && sv.leading_beta2_coeff > 3 * sv.mc_error;
    detail += fmt("beta %g: %.3g +- %.2g; ", b, sv.leading_beta2_coeff, sv.mc_error);
  }
  // Factorized kernel a(U) b(x) with g orthogonal to b.
  Rng rng = make_rng(derive_seed(8, "factorized"));
  std::uniform_real_distribution<double> u(0.5, 2.0);
  const std::size_t N = 200, M = 4;
  std::vector<double> bx{1, 2, 1, 2}, gx{2, -1, -2, 1}, mu(M, 1.0), kern(N * M), ew(N), w(N, 1.0);
  for (std::size_t i = 0; i < N; ++i) {
    double a = u(rng);
    ew[i] = u(rng);
    for (std::size_t x = 0; x < M; ++x) kern[i * M + x] = a * bx[x];
  }
  auto deg = beta2_coefficient(kern, M, mu, gx, ew, w);
  ok = ok && std::abs(deg.leading_beta2_coeff) <= 3 * deg.mc_error;
  detail += fmt("factorized %.3g +- %.2g", deg.leading_beta2_coeff, deg.mc_error);
  report(8, "second-variation sign", ok, detail);
}

void criterion9(const Vacuum& v, const StaticResult& s) {
  auto z0 = partition_function(v.t0, CMat::Identity(4, 4), 0.0, v.vac, s.e);
  bool same = true;
  for (double b : {0.5, 1.0, 10.0, -3.0}) {
    auto z = partition_function(s.rep.T_star, s.rep.h_star, b * v.beta, v.vac, s.e);
    auto ent = entropy_functional(s.rep.T_star, s.rep.h_star, b * v.beta, v.vac, s.e);
    same = same && z.log_Z == ent.value;
  }
  report(9, "partition function", z0.Z == 1.0 && same,
         fmt("Z(0) = %.17g, log Z bitwise equal to the entropy functional: %g", z0.Z, same));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion10(const std::string& bin) {
  fs::path dir = fs::temp_directory_path() / "cfse_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  fs::path cfg = dir / "exp.ini";
  std::ofstream(cfg) << "[run]\nseed = 5\n[entropy]\nbeta = 0, 1\nK = 30\nscale_samples = 64\nh_rounds = 2\n"
                        "t_sweeps = 2\nrestarts = 2\n[entangle]\nsites = 1, 0, 1, 0\n[vacuum]\nfile = "
                     << (dir / "vacuum.json").string() << "\n";
  std::vector<std::string> commands{"vacuum", "entropy", "sweep", "entangle"};
  int differ = 0, errors = 0;
  for (const auto& c : commands) {
    std::vector<std::map<std::string, std::string>> outs;
    for (int rep = 0; rep < 2; ++rep) {
      fs::path out = dir / (c + std::to_string(rep));
      std::string line = bin + " " + c + " --config " + cfg.string() + " --out " + out.string() +
                         (rep ? " --threads 4" : " --threads 1") + " 2>/dev/null";
      int st = std::system(line.c_str());
      if (!WIFEXITED(st) || WEXITSTATUS(st) != 0) ++errors;
      std::map<std::string, std::string> files;
      if (fs::exists(out))
        for (const auto& f : fs::directory_iterator(out)) files[f.path().filename().string()] = slurp(f.path());
      if (c == "vacuum") files["vacuum.json"] = slurp(dir / "vacuum.json");
      outs.push_back(files);
    }
    differ += outs[0] != outs[1] || outs[0].empty();
  }
  report(10, "determinism", differ == 0 && errors == 0,
         fmt("%g of 4 commands differ between reruns, %g failed runs", differ, errors));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <cfse tool>\n");
    return 2;
  }
  Vacuum v;
  // Criterion 1 is timed single-threaded; the rest may use every core.
  set_worker_threads(1);
  StaticResult s1 = criterion1(v);
  v.ensembles.push_back(s1.e);
  set_worker_threads(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  EntropyReport lim = criterion2(v);
  criterion3(v);
  criterion4();
  criterion5(v);
  criterion6(s1.rep, lim);
  criterion7(v, s1);
  criterion8(v, s1.e);
  criterion9(v, s1);
  criterion10(argv[1]);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
