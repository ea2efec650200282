#include "cfse/cli_runner.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "cfse/codec.hpp"
#include "cfse/entropy_engine.hpp"
#include "cfse/errors.hpp"
#include "cfse/local_entropy.hpp"

namespace cfse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"run", {"seed", "threads"}},
      {"model", {"f", "n", "kappa", "s_policy"}},
      {"vacuum", {"frequencies", "period", "n_t", "sites", "site_weights", "t0", "delta", "cutoff", "file"}},
      {"perturbation", {"strength"}},
      {"entropy", {"beta", "dt", "K", "scale_samples", "h_rounds", "t_sweeps", "restarts", "symmetrize"}},
      {"sweep", {"dims"}},
      {"entangle", {"sites"}},
      {"output", {"dir"}},
  };
  return s;
}

template <class T>
T parse_value(const std::string& key, const std::string& raw) {
  std::string v = boost::trim_copy(raw);
  try {
    return boost::lexical_cast<T>(v);
  } catch (const boost::bad_lexical_cast&) {
    throw Error(ErrorKind::InvalidArgument, "bad value for " + key + ": '" + raw + "'");
  }
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& raw) {
  std::vector<T> out;
  std::string v = boost::trim_copy(raw);
  if (v.empty()) return out;
  std::vector<std::string> parts;
  boost::split(parts, v, boost::is_any_of(","));
  for (const auto& p : parts) out.push_back(parse_value<T>(key, p));
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  std::string v = boost::to_lower_copy(boost::trim_copy(raw));
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorKind::InvalidArgument, "bad boolean for " + key);
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  c.sha256 = sha256_hex(text);
  for (const auto& [section, body] : tree) {
    auto it = schema().find(section);
    if (it == schema().end() || body.empty())
      throw Error(ErrorKind::InvalidArgument, "unknown config section or top-level key: " + section);
    for (const auto& [key, node] : body) {
      if (!it->second.count(key)) throw Error(ErrorKind::InvalidArgument, "unknown key " + section + "." + key);
      const std::string name = section + "." + key;
      const std::string v = node.get_value<std::string>();
      if (name == "run.seed") c.seed = parse_value<std::uint64_t>(name, v);
      else if (name == "run.threads") c.threads = parse_value<int>(name, v);
      else if (name == "model.f") c.f = parse_value<int>(name, v);
      else if (name == "model.n") c.model.n = parse_value<int>(name, v);
      else if (name == "model.kappa") c.model.kappa = parse_value<double>(name, v);
      else if (name == "model.s_policy") c.s_policy = boost::trim_copy(v);
      else if (name == "vacuum.frequencies") c.frequencies = parse_list<double>(name, v);
      else if (name == "vacuum.period") c.period = parse_value<double>(name, v);
      else if (name == "vacuum.n_t") c.n_t = parse_value<int>(name, v);
      else if (name == "vacuum.sites") c.sites = parse_value<int>(name, v);
      else if (name == "vacuum.site_weights") c.site_weights = parse_list<double>(name, v);
      else if (name == "vacuum.t0") c.t0 = parse_value<double>(name, v);
      else if (name == "vacuum.delta") c.delta = parse_value<double>(name, v);
      else if (name == "vacuum.cutoff") c.cutoff = boost::trim_copy(v);
      else if (name == "vacuum.file") c.vacuum_file = boost::trim_copy(v);
      else if (name == "perturbation.strength") c.perturbation = parse_value<double>(name, v);
      else if (name == "entropy.beta") c.beta = parse_list<double>(name, v);
      else if (name == "entropy.dt") c.dt = parse_list<double>(name, v);
      else if (name == "entropy.K") c.K = parse_value<std::size_t>(name, v);
      else if (name == "entropy.scale_samples") c.scale_samples = parse_value<int>(name, v);
      else if (name == "entropy.h_rounds") c.h_rounds = parse_value<int>(name, v);
      else if (name == "entropy.t_sweeps") c.t_sweeps = parse_value<int>(name, v);
      else if (name == "entropy.restarts") c.restarts = parse_value<int>(name, v);
      else if (name == "entropy.symmetrize") c.symmetrize = parse_bool(name, v);
      else if (name == "sweep.dims") c.dims = parse_list<int>(name, v);
      else if (name == "entangle.sites") {
        c.entangle_sites.clear();
        for (int b : parse_list<int>(name, v)) {
          if (b != 0 && b != 1) throw Error(ErrorKind::InvalidArgument, "entangle.sites takes 0/1 flags");
          c.entangle_sites.push_back(b == 1);
        }
      } else if (name == "output.dir") c.out_dir = boost::trim_copy(v);
    }
  }
  if (c.s_policy != "zero" && c.s_policy != "minimal_level")
    throw Error(ErrorKind::InvalidArgument, "model.s_policy must be zero or minimal_level");
  if (c.cutoff != "trapezoid" && c.cutoff != "none")
    throw Error(ErrorKind::InvalidArgument, "vacuum.cutoff must be trapezoid or none");
  if (c.beta.empty()) throw Error(ErrorKind::InvalidArgument, "entropy.beta is empty");
  if (c.K == 0) throw Error(ErrorKind::InvalidArgument, "entropy.K must be positive");
  if (c.perturbation < 0) throw Error(ErrorKind::InvalidArgument, "perturbation.strength must be nonnegative");
  for (std::size_t i = 1; i < c.dt.size(); ++i)
    if (!(c.dt[i] < c.dt[i - 1])) throw Error(ErrorKind::InvalidArgument, "entropy.dt must be strictly decreasing");
  for (double d : c.dt)
    if (!(d > 0)) throw Error(ErrorKind::InvalidArgument, "entropy.dt entries must be positive");
  c.model.validate();
  return c;
}

namespace {

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::RegularityGateFailed:
      return kExitGate;
    case ErrorKind::NoAdmissibleStart:
    case ErrorKind::NoBracket:
      return kExitInfeasible;
    case ErrorKind::RootFindStall:
    case ErrorKind::OverflowGuard:
    case ErrorKind::DegenerateKernel:
    case ErrorKind::ConstantDirection:
      return kExitInternal;
    default:
      return kExitValidation;
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + p.string());
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Run {
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
  fs::path out;

  fs::path vacuum_path() const { return cfg.vacuum_file.empty() ? out / "vacuum.json" : fs::path(cfg.vacuum_file); }

  json stamp(const std::string& command) const {
    return {{"command", command}, {"config_sha256", cfg.sha256}, {"seed", seed}};
  }
};

DiscreteConfiguration build_vacuum(const Run& r) {
  const auto& c = r.cfg;
  if (static_cast<int>(c.frequencies.size()) != c.f)
    throw Error(ErrorKind::InvalidArgument, "vacuum.frequencies needs f entries");
  std::vector<OperatorPoint> seeds;
  for (int x = 0; x < c.sites; ++x) {
    Rng rng = make_rng(derive_seed(r.seed, "vacuum-site", static_cast<std::uint64_t>(x)));
    seeds.push_back(random_point(c.f, c.model.n, rng));
  }
  std::vector<double> w = c.site_weights.empty() ? std::vector<double>(static_cast<std::size_t>(c.sites), 1.0)
                                                 : c.site_weights;
  DiscreteConfiguration vac = build_static_vacuum(c.f, c.model.n, c.frequencies, c.period, c.n_t, seeds, w);
  if (c.cutoff == "trapezoid") vac = apply_cutoff(vac, default_cutoff(vac, c.t0, c.delta));
  return vac;
}

ModelParams model_for(const Run& r, const DiscreteConfiguration& vac) {
  ModelParams p = r.cfg.model;
  if (r.cfg.s_policy == "minimal_level") p.s_param = minimal_atom_level(vac, p);
  return p;
}

int cmd_vacuum(const Run& r, std::ostream& log) {
  DiscreteConfiguration vac = build_vacuum(r);
  ModelParams p = model_for(r, vac);
  ELResidual el = el_residual(vac, p, derive_seed(r.seed, "el"));
  write_file(r.vacuum_path(), to_json(vac));
  log << "vacuum: " << vac.size() << " atoms, checksum " << configuration_checksum(vac) << "\n";
  log << "EL residual: max |l| on M = " << num(el.max_abs_on_M) << ", min l off M = " << num(el.min_off_M_probe)
      << "\n";
  return kExitOk;
}

struct EntropySetup {
  DiscreteConfiguration vac;
  DiscreteConfiguration rho_tilde;
  EntropyPipeline pipe;
  PastSet target;
};

EntropySetup setup_entropy(const Run& r) {
  fs::path vp = r.vacuum_path();
  if (!fs::exists(vp)) throw Error(ErrorKind::Io, "vacuum file not found: " + vp.string());
  EntropySetup s;
  s.vac = configuration_from_json(read_file(vp));
  ModelParams p = model_for(r, s.vac);
  s.rho_tilde = r.cfg.perturbation > 0 ? perturb(s.vac, r.cfg.perturbation, derive_seed(r.seed, "perturbation"))
                                       : s.vac;
  s.pipe.problem = make_slice_problem(s.vac, r.cfg.t0, p, derive_seed(r.seed, "scale"), -1, r.cfg.scale_samples);
  s.pipe.ensemble.K = r.cfg.K;
  s.pipe.ensemble.seed = derive_seed(r.seed, "ensemble");
  s.pipe.ensemble.symmetrize = r.cfg.symmetrize;
  s.pipe.budget.h_rounds = r.cfg.h_rounds;
  s.pipe.budget.t_sweeps = r.cfg.t_sweeps;
  s.pipe.budget.restarts = r.cfg.restarts;
  s.pipe.budget.seed = derive_seed(r.seed, "optimizer");
  for (double d : r.cfg.dt) s.pipe.dt_schedule.push_back(d * s.vac.lattice_step);
  s.target = uniform_past(s.rho_tilde, r.cfg.t0);
  return s;
}

json report_block(const EntropyReport& rep, const EntropySetup& s) {
  json j = json::parse(report_json(rep));
  j["vacuum_sha256"] = configuration_checksum(s.vac);
  j["rho_tilde_sha256"] = configuration_checksum(s.rho_tilde);
  return j;
}

const char* kCsvHeader = "beta,axis,x,value,mc_error,status\n";

int cmd_entropy(const Run& r, std::ostream& log) {
  EntropySetup s = setup_entropy(r);
  const double beta = r.cfg.beta.front() / s.pipe.problem.gamma_scale;
  EntropyReport rep;
  std::string csv = kCsvHeader;
  if (s.pipe.dt_schedule.empty()) {
    SliceEnsemble e = slice_ensemble(s.pipe.problem, s.pipe.ensemble);
    std::ostringstream ens;
    write_ensemble_jsonl(e, ens);
    write_file(r.out / "ensemble.jsonl", ens.str());
    rep = entropy_static(s.target, beta, s.rho_tilde, e, s.pipe.budget);
    csv += num(r.cfg.beta.front()) + ",static,0," + num(rep.value) + "," + num(rep.mc_error) + ",ok\n";
  } else {
    // The base ensemble of the first Delta t, as built inside the pipeline.
    EnsembleOptions o = s.pipe.ensemble;
    o.seed = derive_seed(o.seed, "dt", 0);
    std::ostringstream ens;
    write_ensemble_jsonl(slice_ensemble(s.pipe.problem, o), ens);
    write_file(r.out / "ensemble.jsonl", ens.str());
    rep = run_entropy(s.target, beta, s.rho_tilde, s.pipe);
    for (std::size_t j = 0; j < r.cfg.dt.size(); ++j)
      csv += num(r.cfg.beta.front()) + ",dt," + num(r.cfg.dt[j]) + "," + num(rep.dt_values[j]) + "," +
             num(rep.dt_errors[j]) + ",ok\n";
  }
  json j = r.stamp("entropy");
  j["beta_scaled"] = r.cfg.beta.front();
  j["report"] = report_block(rep, s);
  write_file(r.out / "report.json", j.dump(2) + "\n");
  write_file(r.out / "sweep.csv", csv);
  log << "entropy " << num(rep.value) << " +- " << num(rep.mc_error) << (rep.converged ? "" : " (budget spent)")
      << "\n";
  return kExitOk;
}

int cmd_sweep(const Run& r, std::ostream& log) {
  EntropySetup s = setup_entropy(r);
  std::string csv = kCsvHeader;
  json rows = json::array();
  int ok = 0, last_error = kExitOk;
  for (double b : r.cfg.beta) {
    const double beta = b / s.pipe.problem.gamma_scale;
    auto fail_rows = [&](const std::string& axis, const std::vector<double>& xs, const Error& e) {
      for (double x : xs) csv += num(b) + "," + axis + "," + num(x) + ",,," + to_string(e.kind()) + "\n";
      rows.push_back({{"beta", b}, {"error", e.what()}});
      last_error = exit_code_for(e.kind());
    };
    if (!r.cfg.dims.empty()) {
      std::vector<double> xs(r.cfg.dims.begin(), r.cfg.dims.end());
      try {
        ExhaustionReport ex = exhaustion_sweep(s.target, beta, s.rho_tilde, s.vac, r.cfg.t0, s.pipe.problem.params,
                                               r.cfg.dims, s.pipe.ensemble, s.pipe.budget,
                                               derive_seed(r.seed, "scale"));
        for (std::size_t i = 0; i < ex.dims.size(); ++i)
          csv += num(b) + ",dims," + std::to_string(ex.dims[i]) + "," + num(ex.reports[i].value) + "," +
                 num(ex.reports[i].mc_error) + ",ok\n";
        rows.push_back({{"beta", b}, {"dims", ex.dims}, {"running_min", ex.running_min}, {"liminf", ex.liminf}});
        ++ok;
      } catch (const Error& e) {
        fail_rows("dims", xs, e);
      }
    } else if (!s.pipe.dt_schedule.empty()) {
      try {
        EntropyReport rep = run_entropy(s.target, beta, s.rho_tilde, s.pipe);
        for (std::size_t j = 0; j < r.cfg.dt.size(); ++j)
          csv += num(b) + ",dt," + num(r.cfg.dt[j]) + "," + num(rep.dt_values[j]) + "," + num(rep.dt_errors[j]) +
                 ",ok\n";
        rows.push_back({{"beta", b}, {"report", report_block(rep, s)}});
        ++ok;
      } catch (const Error& e) {
        fail_rows("dt", r.cfg.dt, e);
      }
    } else {
      try {
        EntropyReport rep = run_entropy(s.target, beta, s.rho_tilde, s.pipe);
        csv += num(b) + ",static,0," + num(rep.value) + "," + num(rep.mc_error) + ",ok\n";
        rows.push_back({{"beta", b}, {"report", report_block(rep, s)}});
        ++ok;
      } catch (const Error& e) {
        fail_rows("static", {0.0}, e);
      }
    }
  }
  json j = r.stamp("sweep");
  j["rows"] = rows;
  write_file(r.out / "report.json", j.dump(2) + "\n");
  write_file(r.out / "sweep.csv", csv);
  log << "sweep: " << ok << " of " << r.cfg.beta.size() << " beta values succeeded\n";
  return ok > 0 ? kExitOk : last_error;
}

int cmd_entangle(const Run& r, std::ostream& log) {
  EntropySetup s = setup_entropy(r);
  if (static_cast<int>(r.cfg.entangle_sites.size()) != s.rho_tilde.sites)
    throw Error(ErrorKind::DimensionMismatch, "entangle.sites needs one flag per spatial site");
  RegionSpec V = RegionSpec::from_sites(s.rho_tilde, r.cfg.entangle_sites);
  const double beta = r.cfg.beta.front() / s.pipe.problem.gamma_scale;
  EntanglementReport ent = entanglement_entropy(s.target, V, beta, s.rho_tilde, s.pipe);
  json j = r.stamp("entangle");
  j["beta_scaled"] = r.cfg.beta.front();
  j["entanglement"] = json::parse(entanglement_json(ent));
  write_file(r.out / "report.json", j.dump(2) + "\n");
  log << "entanglement entropy " << num(ent.E) << " +- " << num(ent.mc_error) << "\n";
  return kExitOk;
}

}  // namespace

int run_command(const CliOptions& opts, std::ostream& log) {
  try {
    Run r;
    r.cfg = ExperimentConfig::parse(read_file(opts.config_path));
    r.seed = opts.seed ? *opts.seed : r.cfg.seed;
    r.out = opts.out_dir ? *opts.out_dir : r.cfg.out_dir;
    int threads = 1;
    if (opts.threads) {
      threads = *opts.threads;
    } else if (const char* env = std::getenv("CFSE_THREADS")) {
      threads = parse_value<int>("CFSE_THREADS", env);
    } else if (r.cfg.threads > 0) {
      threads = r.cfg.threads;
    }
    set_worker_threads(threads);
    if (opts.command == "vacuum") return cmd_vacuum(r, log);
    if (opts.command == "entropy") return cmd_entropy(r, log);
    if (opts.command == "sweep") return cmd_sweep(r, log);
    if (opts.command == "entangle") return cmd_entangle(r, log);
    log << "unknown command " << opts.command << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    log << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace cfse
