#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cfse/operator_core.hpp"

namespace cfse {

struct SpacetimeAtom {
  OperatorPoint point;
  double t = 0;
  int site = 0;
  double weight = 0;
};

// Present when the configuration is the orbit of a one-parameter group
// U_t = exp(-i t H). The generator follows pushforwards.
struct StaticStructure {
  CMat generator;
  std::vector<double> frequencies;  // integer k_j with H = diag(2 pi k_j / period) before pushforward
  int n_t = 0;
  std::vector<double> site_weights;
};

// Time window of a truncated infinite system.
struct TimeWindow {
  double t_min = 0;
  double t_max = 0;
};

struct DiscreteConfiguration {
  int f = 0;
  int n = 0;
  double period = 0;        // 0 for non-periodic systems
  double lattice_step = 0;
  int sites = 0;
  std::vector<double> t_lattice;
  std::vector<SpacetimeAtom> atoms;  // sorted by (t, site)
  std::optional<StaticStructure> static_info;
  std::optional<TimeWindow> window;

  std::size_t size() const { return atoms.size(); }
  double t_max() const;
};

using Mask = std::vector<std::uint8_t>;
using Membership = std::vector<double>;

// Past set {t <= T(site)}.
struct PastSet {
  std::vector<double> T;
};

PastSet uniform_past(const DiscreteConfiguration& c, double t);

struct CutoffSpec {
  enum class Mode { Hard, Softened };
  Mode mode = Mode::Hard;
  double t0 = 0;
  double delta = 0;
  double ramp_start = 0;  // eta vanishes at and below
  double ramp_end = 0;    // eta vanishes at and above
  double steepness = 0;   // softened past window
  double center_offset = 0;

  // Temporal cutoff: one on [t0 - delta, t0 + delta], linear ramps to zero.
  double eta(double t) const;
  // Softened past indicator of the cut at time t_cut, evaluated at atom time s.
  double eta_window(double t_cut, double s) const;
  // d/dt_cut of eta_window; nonnegative.
  double theta(double t_cut, double s) const;
};

// Trapezoid vanishing on the first and last tenth of the period.
CutoffSpec default_cutoff(const DiscreteConfiguration& c, double t0, double delta);
CutoffSpec softened_cutoff(const DiscreteConfiguration& c, double steepness);

CMat time_translation_diag(double tau, const std::vector<double>& omegas);

// Errors: NonPeriodicGenerator, InvalidSeed, InvalidArgument.
DiscreteConfiguration build_static_vacuum(int f, int n, const std::vector<double>& frequencies, double period,
                                          int n_t, const std::vector<OperatorPoint>& seeds,
                                          const std::vector<double>& site_weights);

// Errors: NotUnitary, DimensionMismatch.
DiscreteConfiguration pushforward(const DiscreteConfiguration& c, const CMat& U);

DiscreteConfiguration apply_cutoff(const DiscreteConfiguration& c, const std::function<double(double)>& eta);
DiscreteConfiguration apply_cutoff(const DiscreteConfiguration& c, const CutoffSpec& cut);

Mask past_mask(const DiscreteConfiguration& c, double t);
Mask past_mask(const DiscreteConfiguration& c, const PastSet& T);

// Fractional past membership: atom a owns the time cell (t_a - step, t_a];
// equal to past_mask whenever T takes lattice values.
Membership membership(const DiscreteConfiguration& c, const PastSet& T);
Membership membership(const Mask& m);

Mask site_region(const DiscreteConfiguration& c, const std::vector<bool>& sites);

// Conjugates atom (site, m) by exp(i strength A), A built from one site and one
// time Hermitian Gaussian. Errors: ValidationFailure after repeated retries.
DiscreteConfiguration perturb(const DiscreteConfiguration& c, double strength, std::uint64_t seed);

std::string to_json(const DiscreteConfiguration& c);
DiscreteConfiguration configuration_from_json(const std::string& text);
std::string configuration_checksum(const DiscreteConfiguration& c);

}  // namespace cfse
