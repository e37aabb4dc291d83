#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dipolenoise/fieldkernels.hpp"

using namespace dipnoise;

namespace {

const Vec3 kIon{0, 1, 0};

double dipole_potential(const DipoleOrientation& u, const Vec3& ion, SurfacePoint src) {
  const Vec3 r{src.x - ion.x, -ion.y, src.z - ion.z};
  const double rr = norm(r);
  return dot(u.unit(), r) / (rr * rr * rr);
}

double monopole_potential(const Vec3& ion, SurfacePoint src) {
  return 1.0 / norm(Vec3{src.x - ion.x, -ion.y, src.z - ion.z});
}

Vec3 shifted(Vec3 p, int axis, double h) {
  if (axis == 0) p.x += h;
  if (axis == 1) p.y += h;
  if (axis == 2) p.z += h;
  return p;
}

}  // namespace

TEST(DipoleG, SpecExamples) {
  const auto y = DipoleOrientation::along(Axis::y);
  const auto x = DipoleOrientation::along(Axis::x);
  EXPECT_EQ(dipole_g(Axis::x, y, kIon, {0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(dipole_g(Axis::y, y, kIon, {0, 0}), -2.0);
  EXPECT_DOUBLE_EQ(dipole_g(Axis::x, x, kIon, {0, 0}), 1.0);
}

TEST(DipoleG, ClosedFormsForAxisDipoles) {
  // x motion with a y dipole is 3 d x_d / R^5; z motion with a y dipole is 3 d z_d / R^5
  const double d = 1.3, xd = 0.4, zd = -0.7;
  const double r2 = d * d + xd * xd + zd * zd;
  const double r5 = std::pow(r2, 2.5);
  const Vec3 ion{0, d, 0};
  const auto y = DipoleOrientation::along(Axis::y);
  EXPECT_NEAR(dipole_g(Axis::x, y, ion, {xd, zd}), 3 * d * xd / r5, 1e-14);
  EXPECT_NEAR(dipole_g(Axis::z, y, ion, {xd, zd}), 3 * d * zd / r5, 1e-14);
  EXPECT_NEAR(dipole_g(Axis::y, y, ion, {xd, zd}), (r2 - 3 * d * d) / r5, 1e-14);
}

TEST(DipoleG, RejectsIonOnOrBelowSurface) {
  const DipoleOrientation u;
  EXPECT_THROW(dipole_g(Axis::x, u, Vec3{0, 0, 0}, {0, 0}), ConfigError);
  EXPECT_THROW(dipole_g(Axis::x, u, Vec3{0, -1, 0}, {0, 0}), ConfigError);
  EXPECT_THROW(monopole_g(Axis::y, Vec3{0, 0, 0}, {1, 0}), ConfigError);
}

TEST(DipoleG, NineFormsMatchFiniteDifferences) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> pos(-3, 3), height(0.2, 2.5);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 ion{pos(rng), height(rng), pos(rng)};
    const SurfacePoint src{pos(rng), pos(rng)};
    for (Axis mu : kAllAxes) {
      const auto u = DipoleOrientation::along(mu);
      double g[3], fd[3];
      for (int n = 0; n < 3; ++n) {
        const double h = 1e-5 * ion.y;
        g[n] = dipole_g(static_cast<Axis>(n), u, ion, src);
        fd[n] = -(dipole_potential(u, shifted(ion, n, h), src) - dipole_potential(u, shifted(ion, n, -h), src)) / (2 * h);
      }
      const double scale = std::sqrt(fd[0] * fd[0] + fd[1] * fd[1] + fd[2] * fd[2]);
      for (int n = 0; n < 3; ++n) {
        EXPECT_LE(std::abs(g[n] - fd[n]), 1e-6 * scale) << "mu=" << to_string(mu) << " n=" << n;
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, 900);
}

TEST(DipoleG, LinearInOrientation) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> pos(-2, 2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto u1 = DipoleOrientation::from_components(nd(rng), nd(rng), nd(rng));
    const auto u2 = DipoleOrientation::from_components(nd(rng), nd(rng), nd(rng));
    const double a = nd(rng), b = nd(rng);
    const Vec3 mixed = a * u1.unit() + b * u2.unit();
    const double len = norm(mixed);
    const auto u = DipoleOrientation::from_components(mixed.x, mixed.y, mixed.z);
    const Vec3 ion{pos(rng), 0.5 + std::abs(pos(rng)), pos(rng)};
    const SurfacePoint src{pos(rng), pos(rng)};
    for (Axis n : kAllAxes) {
      const double lhs = len * dipole_g(n, u, ion, src);
      const double rhs = a * dipole_g(n, u1, ion, src) + b * dipole_g(n, u2, ion, src);
      EXPECT_NEAR(lhs, rhs, 1e-12 * (1 + std::abs(rhs)));
    }
  }
}

TEST(DipoleG, OrientationIsNormalised) {
  const auto u = DipoleOrientation::from_components(3, -4, 12);
  EXPECT_NEAR(norm(u.unit()), 1.0, 1e-12);
  EXPECT_THROW(DipoleOrientation::from_components(0, 0, 0), ConfigError);
  EXPECT_THROW(DipoleOrientation::from_components(NAN, 0, 1), ConfigError);
}

TEST(DipoleG, OddSymmetryForNormalDipoles) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-3, 3);
  const auto y = DipoleOrientation::along(Axis::y);
  const Vec3 ion{0.4, 0.9, -0.2};
  for (int i = 0; i < 500; ++i) {
    const double dx = pos(rng), dz = pos(rng);
    EXPECT_NEAR(dipole_g(Axis::x, y, ion, {ion.x + dx, ion.z + dz}), -dipole_g(Axis::x, y, ion, {ion.x - dx, ion.z + dz}), 1e-13);
    EXPECT_NEAR(dipole_g(Axis::z, y, ion, {ion.x + dx, ion.z + dz}), -dipole_g(Axis::z, y, ion, {ion.x + dx, ion.z - dz}), 1e-13);
  }
}

TEST(MonopoleG, SpecExamples) {
  EXPECT_EQ(monopole_g(Axis::x, kIon, {0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(monopole_g(Axis::y, kIon, {0, 0}), 1.0);  // +d / R^3
  EXPECT_NEAR(std::abs(monopole_g(Axis::x, kIon, {1, 0})), 1.0 / std::pow(2.0, 1.5), 1e-15);
}

TEST(MonopoleG, MatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-3, 3), height(0.2, 2.5);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 ion{pos(rng), height(rng), pos(rng)};
    const SurfacePoint src{pos(rng), pos(rng)};
    const double h = 1e-5 * ion.y;
    double g[3], fd[3];
    for (int n = 0; n < 3; ++n) {
      g[n] = monopole_g(static_cast<Axis>(n), ion, src);
      fd[n] = -(monopole_potential(shifted(ion, n, h), src) - monopole_potential(shifted(ion, n, -h), src)) / (2 * h);
    }
    const double scale = std::sqrt(fd[0] * fd[0] + fd[1] * fd[1] + fd[2] * fd[2]);
    for (int n = 0; n < 3; ++n) EXPECT_LE(std::abs(g[n] - fd[n]), 1e-6 * scale);
  }
}

TEST(Kernels, SpecExamples) {
  const auto e = CorrelationKernel::exponential(0.7);
  EXPECT_EQ(corr_kernel(e, 0.0), 1.0);
  EXPECT_NEAR(corr_kernel(e, 0.7), std::exp(-1.0), 1e-15);
  const auto p = CorrelationKernel::patch(1.0);
  EXPECT_EQ(corr_kernel(p, 3.0, std::pair{4, 4}), 1.0);
  EXPECT_EQ(corr_kernel(p, 0.0, std::pair{4, 5}), 0.0);
  EXPECT_EQ(corr_kernel(CorrelationKernel::sinc(2.0), 0.0), 1.0);
  EXPECT_EQ(corr_kernel(CorrelationKernel::uncorrelated(), 0.0), 1.0);
  EXPECT_EQ(corr_kernel(CorrelationKernel::uncorrelated(), 1e-9), 0.0);
}

TEST(Kernels, RejectsBadArguments) {
  EXPECT_THROW(corr_kernel(CorrelationKernel::exponential(1), -0.1), ConfigError);
  EXPECT_THROW(corr_kernel(CorrelationKernel::patch(1), 0.5), ConfigError);
  EXPECT_THROW(CorrelationKernel::exponential(0).validate(), ConfigError);
  EXPECT_THROW(CorrelationKernel::sinc(-1).validate(), ConfigError);
  EXPECT_THROW(parse_kernel_kind("gaussian"), ConfigError);
}

TEST(Kernels, BoundsByDenseSampling) {
  const auto e = CorrelationKernel::exponential(0.3);
  const auto s = CorrelationKernel::sinc(0.3);
  double smin = 1;
  for (int i = 0; i <= 200000; ++i) {
    const double r = i * 1e-4;
    const double fe = corr_kernel(e, r);
    const double fs = corr_kernel(s, r);
    EXPECT_GE(fe, 0.0);
    EXPECT_LE(fe, 1.0);
    EXPECT_GE(fs, -0.2173);
    EXPECT_LE(fs, 1.0);
    smin = std::min(smin, fs);
  }
  EXPECT_NEAR(smin, -0.21723362821, 1e-6);
}

TEST(Kernels, Ker0IsClampedAndNormalised) {
  const auto k = CorrelationKernel::kelvin(1.0, 0.05);
  EXPECT_EQ(corr_kernel(k, 0.0), 1.0);
  EXPECT_EQ(corr_kernel(k, 0.05), 1.0);
  for (int i = 1; i < 4000; ++i) EXPECT_LE(corr_kernel(k, 0.05 + i * 0.005), 1.0);
  EXPECT_THROW(corr_kernel(CorrelationKernel::kelvin(1.0, 3.0), 4.0), NumericalError);
  EXPECT_THROW(corr_kernel(CorrelationKernel::kelvin(1.0, 0.0), 1.0), ConfigError);
}

// Extended-precision reference values (tests/oracles/ker0_reference.py).
TEST(KelvinKer0, MatchesReferenceValues) {
  const std::pair<double, double> ref[] = {
      {1e-6, 13.93144207362288290245952},        {0.01, 4.721121335628541271292172},
      {0.5, 0.8559058721186342136915945},        {1.0, 0.2867062087283160459541973},
      {2.0, -0.04166451399150953225868222},      {5.0, -0.01151172719949066247036166},
      {6.0, -0.0006530375083472783918518826},    {7.0, 0.001922021568665341790361244},
      {8.0, 0.001485834068518962537290258},      {9.0, 0.0006371641911212718462746436},
      {10.0, 0.0001294663302148061221542394},    {12.0, -0.00006307713705205455566125905},
      {20.0, -7.715233109860961461142018e-8},    {30.0, -1.293826937602080309471852e-10},
      {50.0, -2.915077089396798271751149e-17},
  };
  for (auto [x, v] : ref) EXPECT_NEAR(kelvin_ker0(x), v, 1e-9) << "x=" << x;
  for (auto [x, v] : ref) EXPECT_NEAR(kelvin_ker0(x), v, 1e-12) << "x=" << x;
}

TEST(KelvinKer0, SmallArgumentLeadingTerm) {
  const double x = 1e-8;
  EXPECT_NEAR(kelvin_ker0(x), -std::log(x / 2) - kEulerGamma, 1e-6);
  EXPECT_NEAR(kelvin_ker0(x), 18.53661225961077794058961, 1e-9);
}

TEST(KelvinKer0, LargeArgumentIsTiny) { EXPECT_LT(std::abs(kelvin_ker0(20.0)), 1e-6); }

TEST(KelvinKer0, BranchesAgreeInOverlapBand) {
  double worst = 0;
  for (double x = 6.0; x <= 10.0; x += 0.01)
    worst = std::max(worst, std::abs(detail::ker0_series(x) - detail::ker0_asymptotic(x)));
  EXPECT_LT(worst, 1e-8);
}

TEST(KelvinKer0, RejectsNonPositive) {
  EXPECT_THROW(kelvin_ker0(0.0), ConfigError);
  EXPECT_THROW(kelvin_ker0(-1.0), ConfigError);
}
