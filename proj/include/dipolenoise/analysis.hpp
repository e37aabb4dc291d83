#pragma once

// Parameter sweeps, crossover search, orientation classification, scaling
// fits and conversions to physical rates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "constants.hpp"
#include "errors.hpp"
#include "fieldkernels.hpp"
#include "geometry.hpp"
#include "modes.hpp"
#include "noisecore.hpp"
#include "parallel.hpp"
#include "rootfind.hpp"

namespace dipnoise {

/// Where the electrodes come from: a named preset or an explicit region
/// list. With scale_with_height the preset scale is `scale * d`, so the
/// layout is regenerated at every ion height.
struct GeometrySpec {
  std::optional<Preset> preset = Preset::plane_surrogate;
  double scale = 1.0;
  bool scale_with_height = false;
  SegmentedTrapLayout layout;
  ElectrodeGeometry regions;

  ElectrodeGeometry build(double height) const {
    if (!preset) {
      regions.validate();
      return regions;
    }
    require(std::isfinite(scale) && scale > 0, "geometry scale must be positive");
    return preset_geometry(*preset, scale_with_height ? scale * height : scale, layout);
  }
};

struct GridSettings {
  double nodes_per_height = kDefaultNodesPerHeight;
  double resolution = 0;     // explicit nodes per unit length; overrides the rest when > 0
  int refine_factor = 2;
  double refine_radius = 4;  // in units of d
  double nodes_per_xi = 0;   // resolution floor nodes_per_xi / xi for correlated kernels
};

struct NoiseModel {
  GeometrySpec geometry;
  double height = 1.0;
  double separation = 1.0;  // used when sweeping the height
  double center_x = 0.0;
  double axis_z = 0.0;
  Axis motion = Axis::x;
  DipoleOrientation orientation;
  SourceKind source = SourceKind::dipole;
  CorrelationKernel kernel;
  std::uint64_t patch_seed = 1;
  GridSettings grid;
  PairSumEngine engine = PairSumEngine::automatic;
};

inline double model_resolution(const NoiseModel& m, double height) {
  if (m.grid.resolution > 0) return m.grid.resolution;
  require(m.grid.nodes_per_height > 0, "nodes_per_height must be positive");
  double res = m.grid.nodes_per_height / height;
  if (m.grid.nodes_per_xi > 0 && m.kernel.kind != KernelKind::uncorrelated)
    res = std::max(res, m.grid.nodes_per_xi / m.kernel.xi);
  return res;
}

/// Grid for the given ions. Cells within refine_radius * d of an ion's
/// surface projection are split refine_factor^2 ways, except for
/// translation-invariant kernels on the automatic/FFT engine, which need an
/// unrefined lattice.
inline QuadratureGrid model_grid(const NoiseModel& m, const IonConfiguration& ions) {
  ions.validate();
  m.kernel.validate();
  const double height = ions.positions.front().y;
  GridOptions opt;
  opt.resolution = model_resolution(m, height);
  opt.refine_factor = m.grid.refine_factor;
  const bool lattice_wanted = m.kernel.translation_invariant() && m.engine != PairSumEngine::direct;
  if (m.grid.refine_factor > 1 && m.grid.refine_radius > 0 && !lattice_wanted)
    for (const auto& p : ions.positions) opt.refine.push_back({{p.x, p.z}, m.grid.refine_radius * height});
  QuadratureGrid grid = build_grid(m.geometry.build(height), opt);
  if (m.kernel.kind == KernelKind::patch) grid = with_patches(std::move(grid), make_patch_map(grid, m.kernel.xi, m.patch_seed));
  return grid;
}

inline NoiseMatrix evaluate(const NoiseModel& m, const IonConfiguration& ions) {
  require(ions.motion == m.motion, "ion configuration and model disagree on the motion axis");
  const QuadratureGrid grid = model_grid(m, ions);
  NoiseOptions opt;
  opt.engine = m.engine;
  return noise_matrix(ions, grid, m.orientation, m.kernel, m.source, opt);
}

inline SelfCross pair_noise(const NoiseModel& m, double separation, double height) {
  return self_cross(evaluate(m, IonConfiguration::pair(height, separation, m.motion, m.center_x, m.axis_z)));
}

inline SelfCross pair_noise(const NoiseModel& m, double separation) {
  return pair_noise(m, separation, m.height);
}

inline std::vector<double> log_space(double lo, double hi, int points) {
  require(lo > 0 && hi > lo && std::isfinite(hi), "range must be positive and increasing");
  require(points >= 2, "a sweep needs at least two points");
  std::vector<double> v(static_cast<std::size_t>(points));
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < points; ++i) v[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (points - 1));
  v.front() = lo;
  v.back() = hi;
  return v;
}

// ---------------------------------------------------------------------------
// Ratio sweeps

enum class SweepVariable { ion_separation, ion_height };

inline std::string_view to_string(SweepVariable v) {
  return v == SweepVariable::ion_separation ? "ion_separation" : "ion_height";
}

inline SweepVariable parse_sweep_variable(std::string_view s) {
  if (s == "ion_separation") return SweepVariable::ion_separation;
  if (s == "ion_height") return SweepVariable::ion_height;
  throw ConfigError("unknown sweep variable '" + std::string(s) + "'");
}

/// Column name of the independent variable: l/d for separation sweeps, d
/// for height sweeps.
inline std::string_view variable_column(SweepVariable v) {
  return v == SweepVariable::ion_separation ? "l_over_d" : "d";
}

struct SweepRow {
  double variable = 0;
  SelfCross noise;
};

struct SweepResult {
  SweepVariable variable = SweepVariable::ion_separation;
  Axis axis = Axis::x;
  std::vector<SweepRow> rows;
  double resolution = 0;  // at the first row
};

/// Log-spaced sweep. Separation sweeps take (lo, hi) in units of d.
inline SweepResult ratio_sweep(const NoiseModel& m, SweepVariable variable, double lo, double hi, int points) {
  const auto values = log_space(lo, hi, points);
  SweepResult out;
  out.variable = variable;
  out.axis = m.motion;
  out.rows.resize(values.size());
  parallel_for_blocks(values.size(), [&](std::size_t i) {
    const double v = values[i];
    out.rows[i].variable = v;
    out.rows[i].noise = variable == SweepVariable::ion_separation ? pair_noise(m, v * m.height, m.height)
                                                                 : pair_noise(m, m.separation, v);
  });
  for (const auto& r : out.rows)
    if (std::abs(r.noise.ratio) > 1 + 1e-9) throw NumericalError("ratio outside [-1, 1]");
  out.resolution = model_resolution(m, variable == SweepVariable::ion_height ? values.front() : m.height);
  return out;
}

inline int count_sign_changes(const std::vector<double>& v) {
  int n = 0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    if ((v[i] < 0 && v[i + 1] > 0) || (v[i] > 0 && v[i + 1] < 0) || (v[i] == 0 && i > 0)) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// Crossover search

struct CrossoverReport {
  bool found = false;
  double location = std::numeric_limits<double>::quiet_NaN();  // l*
  double location_over_d = std::numeric_limits<double>::quiet_NaN();
  double bracket_lo = 0, bracket_hi = 0;  // in units of d, as requested
  double residual = std::numeric_limits<double>::quiet_NaN();  // |S_cross(l*)|
  double ratio_at_location = std::numeric_limits<double>::quiet_NaN();
  int sign_changes = 0;
};

inline constexpr double kDefaultBracketLo = 0.3;
inline constexpr double kDefaultBracketHi = 10.0;
inline constexpr int kCrossoverSamples = 48;

/// Samples S_cross at log-spaced l/d, counts sign changes and bisects the
/// smallest-l one down to a bracket narrower than 1e-3 d.
inline CrossoverReport find_crossover(const NoiseModel& m, double lo = kDefaultBracketLo,
                                      double hi = kDefaultBracketHi, int samples = kCrossoverSamples) {
  require(lo > 0 && hi > lo, "crossover bracket must be positive and ordered");
  CrossoverReport rep;
  rep.bracket_lo = lo;
  rep.bracket_hi = hi;
  const auto ls = log_space(lo, hi, samples);
  std::vector<double> cross(ls.size());
  parallel_for_blocks(ls.size(), [&](std::size_t i) { cross[i] = pair_noise(m, ls[i] * m.height).s_cross; });
  for (double c : cross)
    if (!std::isfinite(c)) throw NumericalError("non-finite S_cross during crossover search");
  rep.sign_changes = count_sign_changes(cross);
  std::size_t first = ls.size();
  for (std::size_t i = 0; i + 1 < ls.size(); ++i) {
    if (cross[i] == 0 || (cross[i] < 0) != (cross[i + 1] < 0)) {
      first = i;
      break;
    }
  }
  if (first == ls.size() || rep.sign_changes == 0) return rep;
  auto f = [&](double l_over_d) { return pair_noise(m, l_over_d * m.height).s_cross; };
  const Bracket b = bisect(f, ls[first], ls[first + 1], cross[first], cross[first + 1], 1e-3);
  rep.found = true;
  rep.location_over_d = 0.5 * (b.lo + b.hi);
  rep.location = rep.location_over_d * m.height;
  const SelfCross at = pair_noise(m, rep.location);
  rep.residual = std::abs(at.s_cross);
  rep.ratio_at_location = at.ratio;
  return rep;
}

// ---------------------------------------------------------------------------
// Orientation truth table

enum class OrientationClass { mu_x, mu_y, mu_z, inconsistent };

inline std::string_view to_string(OrientationClass c) {
  switch (c) {
    case OrientationClass::mu_x: return "mu_x";
    case OrientationClass::mu_y: return "mu_y";
    case OrientationClass::mu_z: return "mu_z";
    case OrientationClass::inconsistent: return "inconsistent";
  }
  return "?";
}

/// Crossover present in (y motion, z motion): (yes, yes) mu_x, (yes, no)
/// mu_y, (no, no) mu_z, (no, yes) inconsistent.
inline OrientationClass classify_orientation(bool y_crossover, bool z_crossover) {
  if (y_crossover) return z_crossover ? OrientationClass::mu_x : OrientationClass::mu_y;
  return z_crossover ? OrientationClass::inconsistent : OrientationClass::mu_z;
}

// ---------------------------------------------------------------------------
// Distance scaling

/// One-ion self-noise S(d) at log-spaced heights.
inline std::vector<double> scaling_sweep(const NoiseModel& m, const std::vector<double>& heights) {
  std::vector<double> s(heights.size());
  parallel_for_blocks(heights.size(), [&](std::size_t i) {
    const auto ions = IonConfiguration::single(heights[i], m.motion, m.center_x, m.axis_z);
    s[i] = evaluate(m, ions).s(0, 0);
  });
  return s;
}

/// Least-squares slope of ln S against ln d over points [first, last).
inline double log_slope(const std::vector<double>& d, const std::vector<double>& s, std::size_t first,
                        std::size_t last) {
  require(d.size() == s.size(), "d and S must have the same length");
  require(last <= d.size() && last >= first + 3, "a slope window needs at least three points");
  double mx = 0, my = 0;
  const double n = static_cast<double>(last - first);
  for (std::size_t i = first; i < last; ++i) {
    require(d[i] > 0 && s[i] > 0, "scaling fit needs positive d and S");
    mx += std::log(d[i]);
    my += std::log(s[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = first; i < last; ++i) {
    const double x = std::log(d[i]) - mx;
    sxy += x * (std::log(s[i]) - my);
    sxx += x * x;
  }
  require(sxx > 0, "scaling window has no spread in d");
  return sxy / sxx;
}

/// Slope over every point with d in [d_min, d_max].
inline double log_slope_in_range(const std::vector<double>& d, const std::vector<double>& s, double d_min,
                                 double d_max) {
  std::size_t first = d.size(), last = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] >= d_min * (1 - 1e-12) && d[i] <= d_max * (1 + 1e-12)) {
      first = std::min(first, i);
      last = i + 1;
    }
  }
  require(first < last, "no samples inside the requested d range");
  return log_slope(d, s, first, last);
}

struct ScalingFit {
  std::vector<double> local_slope;  // one per input point
  std::optional<double> break_point;
  int window = 0;
};

/// Local slopes from a centred sliding window of `window` points (shifted
/// inwards at the ends). The break point is where the local slope changes
/// fastest in ln d, refined by a parabola through the neighbouring samples.
inline ScalingFit scaling_exponent(const std::vector<double>& d, const std::vector<double>& s, int window = 5) {
  require(d.size() == s.size(), "d and S must have the same length");
  require(window >= 3, "slope window needs at least three points");
  require(d.size() >= static_cast<std::size_t>(window), "fewer samples than the slope window");
  for (std::size_t i = 0; i < d.size(); ++i) {
    require(d[i] > 0, "scaling fit needs positive d");
    require(s[i] > 0, "scaling fit needs positive S");
    if (i > 0) require(d[i] > d[i - 1], "d must be strictly increasing");
  }
  ScalingFit fit;
  fit.window = window;
  const std::size_t n = d.size(), w = static_cast<std::size_t>(window);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t first = i >= w / 2 ? i - w / 2 : 0;
    first = std::min(first, n - w);
    fit.local_slope.push_back(log_slope(d, s, first, first + w));
  }
  if (n >= 3) {
    std::vector<double> x(n), rate(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::log(d[i]);
    std::size_t best = 1;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      rate[i] = std::abs((fit.local_slope[i + 1] - fit.local_slope[i - 1]) / (x[i + 1] - x[i - 1]));
      if (rate[i] > rate[best]) best = i;
    }
    double xb = x[best];
    if (best >= 2 && best + 2 < n) {
      const double y0 = rate[best - 1], y1 = rate[best], y2 = rate[best + 1];
      const double denom = y0 - 2 * y1 + y2;
      const double h = 0.5 * (x[best + 1] - x[best - 1]);
      if (denom < 0) xb += std::clamp(0.5 * (y0 - y2) / denom, -1.0, 1.0) * h;
    }
    fit.break_point = std::exp(xb);
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Physical conversions

/// Gamma = q^2 S / (4 m hbar Omega), in quanta per second for S in V^2 m^-2 Hz^-1.
inline double heating_rate(double s, double mass = phys::kCa40IonMass, double charge = phys::kElementaryCharge,
                           double omega = 2 * std::numbers::pi * 1e6) {
  require(std::isfinite(s) && s >= 0, "spectral density must be non-negative");
  require(mass > 0 && std::isfinite(mass), "mass must be positive");
  require(charge > 0 && std::isfinite(charge), "charge must be positive");
  require(omega > 0 && std::isfinite(omega), "mode frequency must be positive");
  return charge * charge * s / (4.0 * mass * phys::kHbar * omega);
}

/// Absolute uncertainty of S_ratio = (G+ - G-)/(G+ + G-) from a relative
/// uncertainty eps on each rate (equal mode frequencies):
///   eps sqrt(1 + S_ratio^2) sqrt(G+^2 + G-^2) / (G+ + G-).
inline double ratio_uncertainty(double gamma_plus, double gamma_minus, double eps) {
  require(gamma_plus >= 0 && gamma_minus >= 0, "heating rates must be non-negative");
  require(gamma_plus + gamma_minus > 0, "heating rates cannot both be zero");
  require(eps >= 0 && std::isfinite(eps), "relative uncertainty must be non-negative");
  const double sum = gamma_plus + gamma_minus;
  const double sr = (gamma_plus - gamma_minus) / sum;
  return eps * std::sqrt(1 + sr * sr) * std::hypot(gamma_plus, gamma_minus) / sum;
}

/// Correlation length sqrt(D / Omega) of diffusing adsorbates.
inline double xi_from_diffusion(double diffusion, double omega) {
  require(diffusion > 0 && std::isfinite(diffusion), "diffusion constant must be positive");
  require(omega > 0 && std::isfinite(omega), "frequency must be positive");
  return std::sqrt(diffusion / omega);
}

// ---------------------------------------------------------------------------
// Chains

enum class ChainModel { coulomb, standing_wave };

inline std::string_view to_string(ChainModel c) { return c == ChainModel::coulomb ? "coulomb" : "standing_wave"; }

inline ChainModel parse_chain_model(std::string_view s) {
  if (s == "coulomb") return ChainModel::coulomb;
  if (s == "standing_wave") return ChainModel::standing_wave;
  throw ConfigError("unknown chain model '" + std::string(s) + "'");
}

struct ChainSpec {
  int ions = 10;
  ChainModel model = ChainModel::coulomb;
  double trap_frequency = 2 * std::numbers::pi * 1e6;  // rad/s
  double length_unit = 1e-6;                           // metres per simulation length unit
  double mass = phys::kCa40IonMass;
  double charge = phys::kElementaryCharge;
  double coupling = 1.0;
};

inline ModeBasis chain_basis(const ChainSpec& c, double spacing) {
  if (c.model == ChainModel::standing_wave) return standing_wave_modes(c.ions);
  require(c.length_unit > 0, "length unit must be positive");
  return chain_modes(c.ions, spacing * c.length_unit, c.trap_frequency, c.charge, c.mass, c.coupling);
}

struct ChainRow {
  double spacing = 0;
  std::vector<double> mode_noise;
};

struct ChainResult {
  std::vector<Parity> parity;
  std::vector<ChainRow> rows;
};

/// Mode-projected noise S_j(l) of an N-ion chain at height model.height,
/// with the mode basis recomputed at each spacing.
inline ChainResult chain_sweep(const NoiseModel& m, const ChainSpec& c, const std::vector<double>& spacings) {
  require(c.ions >= 2, "a chain needs at least two ions");
  ChainResult out;
  out.rows.resize(spacings.size());
  std::vector<std::vector<Parity>> parities(spacings.size());
  parallel_for_blocks(spacings.size(), [&](std::size_t i) {
    const double l = spacings[i];
    const auto ions = IonConfiguration::chain(c.ions, m.height, l, m.motion, m.center_x, m.axis_z);
    const ModeBasis basis = chain_basis(c, l);
    out.rows[i].spacing = l;
    out.rows[i].mode_noise = mode_noise(evaluate(m, ions), basis);
    parities[i] = basis.parity;
  });
  if (!parities.empty()) out.parity = parities.front();
  return out;
}

}  // namespace dipnoise
