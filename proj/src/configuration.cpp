#include "cfse/configuration.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numbers>

#include "cfse/codec.hpp"
#include "cfse/errors.hpp"

namespace cfse {

using nlohmann::json;

double DiscreteConfiguration::t_max() const {
  if (period > 0) return period;
  if (window) return window->t_max;
  return t_lattice.empty() ? 0.0 : t_lattice.back();
}

PastSet uniform_past(const DiscreteConfiguration& c, double t) {
  return PastSet{std::vector<double>(static_cast<std::size_t>(c.sites), t)};
}

double CutoffSpec::eta(double t) const {
  if (t <= ramp_start || t >= ramp_end) return 0.0;
  double lo = t0 - delta, hi = t0 + delta;
  if (t >= lo && t <= hi) return 1.0;
  if (t < lo) return (t - ramp_start) / (lo - ramp_start);
  return (ramp_end - t) / (ramp_end - hi);
}

double CutoffSpec::eta_window(double t_cut, double s) const {
  if (mode == Mode::Hard || std::isinf(steepness)) return s <= t_cut ? 1.0 : 0.0;
  return 1.0 / (1.0 + std::exp(steepness * (s - t_cut - center_offset)));
}

double CutoffSpec::theta(double t_cut, double s) const {
  if (mode == Mode::Hard || std::isinf(steepness)) return 0.0;
  double e = eta_window(t_cut, s);
  return steepness * e * (1.0 - e);
}

CutoffSpec default_cutoff(const DiscreteConfiguration& c, double t0, double delta) {
  CutoffSpec cut;
  double lo = c.period > 0 ? 0.0 : (c.t_lattice.empty() ? 0.0 : c.t_lattice.front());
  double span = c.t_max() - lo;
  cut.t0 = t0;
  cut.delta = delta;
  cut.ramp_start = lo + 0.1 * span;
  cut.ramp_end = lo + 0.9 * span;
  if (delta < 0 || !(cut.ramp_start < t0 - delta) || !(t0 + delta < cut.ramp_end))
    throw Error(ErrorKind::InvalidArgument, "cutoff plateau must sit strictly inside the ramp region");
  return cut;
}

CutoffSpec softened_cutoff(const DiscreteConfiguration& c, double steepness) {
  CutoffSpec cut;
  cut.mode = CutoffSpec::Mode::Softened;
  cut.steepness = steepness;
  cut.center_offset = c.lattice_step / 2;
  return cut;
}

CMat time_translation_diag(double tau, const std::vector<double>& omegas) {
  CMat U = CMat::Zero(static_cast<Eigen::Index>(omegas.size()), static_cast<Eigen::Index>(omegas.size()));
  for (std::size_t j = 0; j < omegas.size(); ++j)
    U(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = std::polar(1.0, -tau * omegas[j]);
  return U;
}

DiscreteConfiguration build_static_vacuum(int f, int n, const std::vector<double>& frequencies, double period,
                                          int n_t, const std::vector<OperatorPoint>& seeds,
                                          const std::vector<double>& site_weights) {
  if (static_cast<int>(frequencies.size()) != f)
    throw Error(ErrorKind::InvalidArgument, "need one frequency per dimension");
  if (!(period > 0)) throw Error(ErrorKind::InvalidArgument, "period must be positive");
  if (n_t < 2) throw Error(ErrorKind::InvalidArgument, "need at least two time samples");
  if (seeds.empty() || seeds.size() != site_weights.size())
    throw Error(ErrorKind::InvalidArgument, "need one weight per seed");
  for (double k : frequencies)
    if (!std::isfinite(k) || std::abs(k - std::round(k)) > 1e-12)
      throw Error(ErrorKind::NonPeriodicGenerator, "frequency " + std::to_string(k) + " is not an integer");
  for (const auto& s : seeds)
    if (s.f() != f || s.n() != n) throw Error(ErrorKind::InvalidSeed, "seed dimension does not match (f, n)");
  for (double w : site_weights)
    if (!(w > 0)) throw Error(ErrorKind::InvalidArgument, "site weights must be positive");

  DiscreteConfiguration c;
  c.f = f;
  c.n = n;
  c.period = period;
  c.lattice_step = period / n_t;
  c.sites = static_cast<int>(seeds.size());
  std::vector<double> omegas;
  for (double k : frequencies) omegas.push_back(2 * std::numbers::pi * std::round(k) / period);

  StaticStructure st;
  st.generator = CMat::Zero(f, f);
  for (int j = 0; j < f; ++j) st.generator(j, j) = omegas[static_cast<std::size_t>(j)];
  st.frequencies = frequencies;
  st.n_t = n_t;
  st.site_weights = site_weights;
  c.static_info = st;

  for (int m = 0; m < n_t; ++m) {
    double t = m * c.lattice_step;
    c.t_lattice.push_back(t);
    CMat U = time_translation_diag(t, omegas);
    for (int s = 0; s < c.sites; ++s) {
      SpacetimeAtom a;
      a.point = conjugate_unchecked(U, seeds[static_cast<std::size_t>(s)]);
      a.t = t;
      a.site = s;
      a.weight = site_weights[static_cast<std::size_t>(s)] * c.lattice_step;
      c.atoms.push_back(std::move(a));
    }
  }
  return c;
}

DiscreteConfiguration pushforward(const DiscreteConfiguration& c, const CMat& U) {
  if (U.rows() != c.f || U.cols() != c.f) throw Error(ErrorKind::DimensionMismatch, "unitary size");
  if (!is_unitary(U)) throw Error(ErrorKind::NotUnitary, "pushforward needs a unitary");
  DiscreteConfiguration out = c;
  for (auto& a : out.atoms) a.point = conjugate_unchecked(U, a.point);
  if (out.static_info) out.static_info->generator = U * c.static_info->generator * U.adjoint();
  return out;
}

DiscreteConfiguration apply_cutoff(const DiscreteConfiguration& c, const std::function<double(double)>& eta) {
  DiscreteConfiguration out = c;
  out.atoms.clear();
  for (const auto& a : c.atoms) {
    double e = eta(a.t);
    if (e < 0 || e > 1) throw Error(ErrorKind::InvalidArgument, "cutoff values must lie in [0, 1]");
    if (e == 0) continue;
    SpacetimeAtom b = a;
    b.weight = a.weight * e;
    out.atoms.push_back(std::move(b));
  }
  return out;
}

DiscreteConfiguration apply_cutoff(const DiscreteConfiguration& c, const CutoffSpec& cut) {
  return apply_cutoff(c, [&cut](double t) { return cut.eta(t); });
}

Mask past_mask(const DiscreteConfiguration& c, double t) {
  Mask m(c.atoms.size());
  for (std::size_t i = 0; i < c.atoms.size(); ++i) m[i] = c.atoms[i].t <= t;
  return m;
}

Mask past_mask(const DiscreteConfiguration& c, const PastSet& T) {
  if (static_cast<int>(T.T.size()) != c.sites) throw Error(ErrorKind::DimensionMismatch, "past set length");
  Mask m(c.atoms.size());
  for (std::size_t i = 0; i < c.atoms.size(); ++i)
    m[i] = c.atoms[i].t <= T.T[static_cast<std::size_t>(c.atoms[i].site)];
  return m;
}

Membership membership(const DiscreteConfiguration& c, const PastSet& T) {
  if (static_cast<int>(T.T.size()) != c.sites) throw Error(ErrorKind::DimensionMismatch, "past set length");
  if (!(c.lattice_step > 0)) throw Error(ErrorKind::InvalidArgument, "membership needs a lattice step");
  Membership chi(c.atoms.size());
  for (std::size_t i = 0; i < c.atoms.size(); ++i) {
    double x = (T.T[static_cast<std::size_t>(c.atoms[i].site)] - c.atoms[i].t) / c.lattice_step + 1.0;
    chi[i] = std::clamp(x, 0.0, 1.0);
  }
  return chi;
}

Membership membership(const Mask& m) {
  Membership chi(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) chi[i] = m[i] ? 1.0 : 0.0;
  return chi;
}

Mask site_region(const DiscreteConfiguration& c, const std::vector<bool>& sites) {
  if (static_cast<int>(sites.size()) != c.sites) throw Error(ErrorKind::DimensionMismatch, "region mask length");
  Mask m(c.atoms.size());
  for (std::size_t i = 0; i < c.atoms.size(); ++i) m[i] = sites[static_cast<std::size_t>(c.atoms[i].site)];
  return m;
}

namespace {

CMat random_hermitian(int f, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMat a(f, f);
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < f; ++j) a(i, j) = cplx(g(rng), g(rng)) / std::sqrt(2.0);
  return (a + a.adjoint()) / 2.0;
}

CMat exp_i(const CMat& herm, double eps) {
  Eigen::SelfAdjointEigenSolver<CMat> es(herm);
  Eigen::VectorXcd ph(herm.rows());
  for (Eigen::Index i = 0; i < herm.rows(); ++i) ph(i) = std::polar(1.0, eps * es.eigenvalues()(i));
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

DiscreteConfiguration perturb(const DiscreteConfiguration& c, double strength, std::uint64_t seed) {
  if (strength < 0) throw Error(ErrorKind::InvalidArgument, "perturbation strength must be nonnegative");
  if (strength == 0) return c;
  std::vector<CMat> by_site, by_time;
  for (int s = 0; s < c.sites; ++s) {
    Rng rng = make_rng(derive_seed(seed, "perturb-site", static_cast<std::uint64_t>(s)));
    by_site.push_back(random_hermitian(c.f, rng));
  }
  for (std::size_t m = 0; m < c.t_lattice.size(); ++m) {
    Rng rng = make_rng(derive_seed(seed, "perturb-time", m));
    by_time.push_back(random_hermitian(c.f, rng));
  }
  DiscreteConfiguration out = c;
  for (auto& a : out.atoms) {
    auto it = std::lower_bound(c.t_lattice.begin(), c.t_lattice.end(), a.t - 1e-12 * c.lattice_step);
    std::size_t m = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        it - c.t_lattice.begin(), static_cast<std::ptrdiff_t>(c.t_lattice.size()) - 1));
    CMat A = (by_site[static_cast<std::size_t>(a.site)] + by_time[m]) / std::sqrt(2.0);
    bool ok = false;
    double eps = strength;
    for (int attempt = 0; attempt < 6 && !ok; ++attempt, eps /= 2) {
      CMat U = exp_i(A, eps);
      try {
        a.point = make_point(U * a.point.matrix() * U.adjoint(), a.point.n(), a.point.rank_tol());
        ok = true;
      } catch (const Error&) {
      }
    }
    if (!ok) throw Error(ErrorKind::ValidationFailure, "perturbed atom failed validation");
  }
  out.static_info.reset();
  return out;
}

namespace {

json matrix_json(const CMat& m, bool imag) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(imag ? m(i, j).imag() : m(i, j).real());
    rows.push_back(row);
  }
  return rows;
}

CMat matrix_from_json(const json& re, const json& im) {
  auto r = static_cast<Eigen::Index>(re.size());
  CMat m(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(re[i].size()) != r || im[i].size() != re[i].size())
      throw Error(ErrorKind::Io, "matrix must be square");
    for (Eigen::Index j = 0; j < r; ++j) m(i, j) = cplx(re[i][j].get<double>(), im[i][j].get<double>());
  }
  return m;
}

json configuration_json(const DiscreteConfiguration& c) {
  json j;
  j["f"] = c.f;
  j["n"] = c.n;
  j["period"] = c.period;
  j["lattice_step"] = c.lattice_step;
  j["sites"] = c.sites;
  j["t_lattice"] = c.t_lattice;
  json atoms = json::array();
  for (const auto& a : c.atoms) {
    json ja;
    ja["t"] = a.t;
    ja["site"] = a.site;
    ja["weight"] = a.weight;
    ja["rank_tol"] = a.point.rank_tol();
    ja["mat_re"] = matrix_json(a.point.matrix(), false);
    ja["mat_im"] = matrix_json(a.point.matrix(), true);
    atoms.push_back(ja);
  }
  j["atoms"] = atoms;
  if (c.static_info) {
    json s;
    s["generator_re"] = matrix_json(c.static_info->generator, false);
    s["generator_im"] = matrix_json(c.static_info->generator, true);
    s["frequencies"] = c.static_info->frequencies;
    s["n_t"] = c.static_info->n_t;
    s["site_weights"] = c.static_info->site_weights;
    j["static"] = s;
  }
  if (c.window) j["window"] = {{"t_min", c.window->t_min}, {"t_max", c.window->t_max}};
  return j;
}

}  // namespace

std::string to_json(const DiscreteConfiguration& c) { return configuration_json(c).dump(1); }

DiscreteConfiguration configuration_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    DiscreteConfiguration c;
    c.f = j.at("f").get<int>();
    c.n = j.at("n").get<int>();
    c.period = j.at("period").get<double>();
    c.lattice_step = j.value("lattice_step", 0.0);
    c.sites = j.value("sites", 0);
    c.t_lattice = j.value("t_lattice", std::vector<double>{});
    for (const auto& ja : j.at("atoms")) {
      SpacetimeAtom a;
      a.t = ja.at("t").get<double>();
      a.site = ja.at("site").get<int>();
      a.weight = ja.at("weight").get<double>();
      std::optional<double> tol;
      if (ja.contains("rank_tol")) tol = ja["rank_tol"].get<double>();
      CMat m = matrix_from_json(ja.at("mat_re"), ja.at("mat_im"));
      if (m.rows() != c.f) throw Error(ErrorKind::DimensionMismatch, "atom matrix size differs from f");
      a.point = make_point(m, c.n, tol);
      if (!(a.weight > 0)) throw Error(ErrorKind::InvalidArgument, "atom weights must be positive");
      c.sites = std::max(c.sites, a.site + 1);
      c.atoms.push_back(std::move(a));
    }
    if (j.contains("static")) {
      const json& s = j["static"];
      StaticStructure st;
      st.generator = matrix_from_json(s.at("generator_re"), s.at("generator_im"));
      st.frequencies = s.at("frequencies").get<std::vector<double>>();
      st.n_t = s.at("n_t").get<int>();
      st.site_weights = s.at("site_weights").get<std::vector<double>>();
      c.static_info = st;
    }
    if (j.contains("window"))
      c.window = TimeWindow{j["window"].at("t_min").get<double>(), j["window"].at("t_max").get<double>()};
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, std::string("configuration JSON: ") + e.what());
  }
}

std::string configuration_checksum(const DiscreteConfiguration& c) {
  return sha256_hex(configuration_json(c).dump());
}

}  // namespace cfse
