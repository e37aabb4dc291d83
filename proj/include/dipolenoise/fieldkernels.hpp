#pragma once

// Per-source field functions and spatial correlation kernels.
//
// Geometry units: the 1/(4 pi eps0) prefactor and the dipole (or charge)
// magnitude are dropped, so g is a pure function of positions. Ratios,
// crossover locations and scaling exponents do not depend on the dropped
// factors.

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "errors.hpp"
#include "vec.hpp"

namespace dipnoise {

/// Unit vector giving the mean orientation of the surface dipoles.
class DipoleOrientation {
 public:
  DipoleOrientation() = default;

  /// Normalises (ux, uy, uz); throws on a zero or non-finite vector.
  static DipoleOrientation from_components(double ux, double uy, double uz) {
    double n = std::sqrt(ux * ux + uy * uy + uz * uz);
    require(std::isfinite(n) && n > 0, "dipole orientation must be a non-zero finite vector");
    DipoleOrientation d;
    d.u_ = {ux / n, uy / n, uz / n};
    return d;
  }

  static DipoleOrientation along(Axis a) {
    return from_components(a == Axis::x, a == Axis::y, a == Axis::z);
  }

  const Vec3& unit() const { return u_; }
  double operator[](int i) const { return u_[i]; }

 private:
  Vec3 u_{0.0, 1.0, 0.0};
};

enum class SourceKind { dipole, monopole };

inline std::string_view to_string(SourceKind s) {
  return s == SourceKind::dipole ? "dipole" : "monopole";
}

inline SourceKind parse_source_kind(std::string_view s) {
  if (s == "dipole") return SourceKind::dipole;
  if (s == "monopole") return SourceKind::monopole;
  throw ConfigError("unknown source kind '" + std::string(s) + "'");
}

namespace detail {

// R = r_source - r_ion with the source on y = 0. Caller guarantees d > 0.
inline double dipole_g_unchecked(int n, const Vec3& u, const Vec3& ion, SurfacePoint src) {
  const double rx = src.x - ion.x, ry = -ion.y, rz = src.z - ion.z;
  const double r2 = rx * rx + ry * ry + rz * rz;
  const double rn = n == 0 ? rx : (n == 1 ? ry : rz);
  const double udotr = u.x * rx + u.y * ry + u.z * rz;
  const double un = u[n];
  const double inv = 1.0 / r2;
  return (un * r2 - 3.0 * rn * udotr) * inv * inv / std::sqrt(r2);
}

inline double monopole_g_unchecked(int n, const Vec3& ion, SurfacePoint src) {
  const double rx = src.x - ion.x, ry = -ion.y, rz = src.z - ion.z;
  const double r2 = rx * rx + ry * ry + rz * rz;
  const double rn = n == 0 ? rx : (n == 1 ? ry : rz);
  return -rn / (r2 * std::sqrt(r2));
}

inline void check_height(const Vec3& ion) {
  require(std::isfinite(ion.y) && ion.y > 0,
          "ion must sit strictly above the electrode plane (height > 0)");
}

}  // namespace detail

/// Field component along `motion` at the ion due to a unit dipole with
/// orientation u at `src`:  g_n = (u_n R^2 - 3 R_n (u.R)) / R^5, with R the
/// vector from the ion to the dipole. Linear in u. Equals -d(phi)/d(r_ion,n)
/// for phi = u.R / R^3.
inline double dipole_g(Axis motion, const DipoleOrientation& u, const Vec3& ion, SurfacePoint src) {
  detail::check_height(ion);
  return detail::dipole_g_unchecked(index(motion), u.unit(), ion, src);
}

/// Point-charge analogue: g_n = -R_n / R^3 (gradient of 1/R along the motion
/// axis, unit global constant). For x motion this is (x_ion - x_src)/R^3 and
/// for y motion it is +d/R^3.
inline double monopole_g(Axis motion, const Vec3& ion, SurfacePoint src) {
  detail::check_height(ion);
  return detail::monopole_g_unchecked(index(motion), ion, src);
}

// ---------------------------------------------------------------------------
// Kelvin function ker_0

inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

namespace detail {

inline double ker0_series(double x) {
  const double q = 0.25 * x * x;  // x^2 / 4
  const double q2 = q * q;
  double ber = 0, bei = 0, psi_sum = 0;
  double t = 1.0;     // (-1)^k q^{2k} / ((2k)!)^2
  double u = q;       // (-1)^k q^{2k+1} / ((2k+1)!)^2
  double psi = -kEulerGamma;  // psi(2k + 1)
  for (int k = 0; k < 60; ++k) {
    ber += t;
    bei += u;
    psi_sum += psi * t;
    const double a = 2.0 * k + 1.0, b = 2.0 * k + 2.0, c = 2.0 * k + 3.0;
    psi += 1.0 / a + 1.0 / b;
    t *= -q2 / (a * a * b * b);
    u *= -q2 / (b * b * c * c);
    if (std::abs(t) < 1e-19 && std::abs(u) < 1e-19) break;
  }
  return -std::log(0.5 * x) * ber + 0.25 * std::numbers::pi * bei + psi_sum;
}

// Re K_0(x e^{i pi/4}) from the large-argument expansion of K_0, summed up
// to its smallest term.
inline double ker0_asymptotic(double x) {
  const std::complex<double> z = std::polar(x, 0.25 * std::numbers::pi);
  std::complex<double> sum = 1.0, term = 1.0;
  double prev = 1.0;
  for (int k = 1; k < 80; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -(odd * odd) / (8.0 * k) / z;
    const double mag = std::abs(term);
    if (mag >= prev) break;
    sum += term;
    prev = mag;
    if (mag < 1e-17) break;
  }
  return (std::sqrt(std::numbers::pi / (2.0 * z)) * std::exp(-z) * sum).real();
}

}  // namespace detail

inline constexpr double kKer0SeriesLimit = 8.0;

/// Kelvin function ker_0(x) for x > 0: ascending series up to x = 8,
/// large-argument expansion beyond. Logarithmic singularity at 0.
inline double kelvin_ker0(double x) {
  require(std::isfinite(x) && x > 0, "ker0 requires a positive argument");
  return x <= kKer0SeriesLimit ? detail::ker0_series(x) : detail::ker0_asymptotic(x);
}

// ---------------------------------------------------------------------------
// Spatial correlation kernels

enum class KernelKind { uncorrelated, exponential, sinc, kelvin_ker0, patch };

inline std::string_view to_string(KernelKind k) {
  switch (k) {
    case KernelKind::uncorrelated: return "uncorrelated";
    case KernelKind::exponential: return "exponential";
    case KernelKind::sinc: return "sinc";
    case KernelKind::kelvin_ker0: return "kelvin_ker0";
    case KernelKind::patch: return "patch";
  }
  return "?";
}

inline KernelKind parse_kernel_kind(std::string_view s) {
  if (s == "uncorrelated") return KernelKind::uncorrelated;
  if (s == "exponential") return KernelKind::exponential;
  if (s == "sinc") return KernelKind::sinc;
  if (s == "kelvin_ker0") return KernelKind::kelvin_ker0;
  if (s == "patch") return KernelKind::patch;
  throw ConfigError("unknown correlation kernel '" + std::string(s) + "'");
}

struct CorrelationKernel {
  KernelKind kind = KernelKind::uncorrelated;
  double xi = 0;         // correlation length; patch size for the patch kernel
  // ker0 is clamped below this distance and normalised to 1 there. Set it to
  // the grid cell diagonal (see clamp_to_grid).
  double ker0_rmin = 0;

  bool translation_invariant() const {
    return kind == KernelKind::exponential || kind == KernelKind::sinc ||
           kind == KernelKind::kelvin_ker0;
  }

  void validate() const {
    if (kind == KernelKind::uncorrelated) return;
    require(std::isfinite(xi) && xi > 0, std::string("kernel '") + std::string(to_string(kind)) +
                                             "' needs a positive correlation length");
  }

  static CorrelationKernel uncorrelated() { return {}; }
  static CorrelationKernel exponential(double xi) { return {KernelKind::exponential, xi, 0}; }
  static CorrelationKernel sinc(double xi) { return {KernelKind::sinc, xi, 0}; }
  static CorrelationKernel kelvin(double xi, double rmin) { return {KernelKind::kelvin_ker0, xi, rmin}; }
  static CorrelationKernel patch(double scale) { return {KernelKind::patch, scale, 0}; }
};

/// Evaluates f at separation r >= 0. The patch kernel needs both patch ids;
/// the uncorrelated kernel is the same-node indicator.
inline double corr_kernel(const CorrelationKernel& k, double r,
                          std::optional<std::pair<int, int>> patch_ids = std::nullopt) {
  require(std::isfinite(r) && r >= 0, "kernel distance must be non-negative");
  switch (k.kind) {
    case KernelKind::uncorrelated:
      return r == 0.0 ? 1.0 : 0.0;
    case KernelKind::exponential:
      return std::exp(-r / k.xi);
    case KernelKind::sinc: {
      const double t = r / k.xi;
      return t == 0.0 ? 1.0 : std::sin(t) / t;
    }
    case KernelKind::kelvin_ker0: {
      require(k.ker0_rmin > 0, "ker0 kernel needs a positive clamp distance");
      const double norm = kelvin_ker0(k.ker0_rmin / k.xi);
      if (!(norm > 0))
        throw NumericalError("ker0 clamp distance is too large for xi (ker0(rmin/xi) <= 0)");
      return r <= k.ker0_rmin ? 1.0 : kelvin_ker0(r / k.xi) / norm;
    }
    case KernelKind::patch:
      require(patch_ids.has_value(), "patch kernel needs a pair of patch ids");
      return patch_ids->first == patch_ids->second ? 1.0 : 0.0;
  }
  return 0.0;
}

}  // namespace dipnoise
