#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "dipolenoise/noisecore.hpp"
#include "dipolenoise/parallel.hpp"

using namespace dipnoise;

namespace {

QuadratureGrid plane(double half, double res) {
  return build_grid(ElectrodeGeometry{{rectangle(-half, half, -half, half)}}, res);
}

const auto kMuY = DipoleOrientation::along(Axis::y);

NoiseOptions with_engine(PairSumEngine e) {
  NoiseOptions o;
  o.engine = e;
  return o;
}

}  // namespace

TEST(NoiseMatrix, CoincidentIonsGiveEqualEntries) {
  auto g = plane(4, 6);
  auto ions = IonConfiguration::pair(1.0, 0.0, Axis::x);
  auto n = noise_matrix(ions, g, kMuY, CorrelationKernel::uncorrelated());
  EXPECT_NEAR(n.s(0, 1), n.s(0, 0), 1e-14 * n.s(0, 0));
  EXPECT_NEAR(self_cross(n).ratio, 1.0, 1e-13);
}

TEST(NoiseMatrix, ZMotionCrossTermPositiveAtEverySeparation) {
  auto g = plane(6, 6);
  for (double l : {0.2, 0.5, 1.0, 2.0, 4.0}) {
    auto n = noise_matrix(IonConfiguration::pair(1.0, l, Axis::z), g, kMuY, CorrelationKernel::uncorrelated());
    EXPECT_GT(n.s(0, 1), 0.0) << "l=" << l;
  }
}

TEST(NoiseMatrix, InvariantsHoldForEveryKernel) {
  auto g = plane(3, 5);
  auto pg = with_patches(g, make_patch_map(g, 0.5, 4));
  auto ions = IonConfiguration::chain(4, 0.8, 0.6, Axis::x);
  for (auto k : {CorrelationKernel::uncorrelated(), CorrelationKernel::exponential(0.4),
                 CorrelationKernel::sinc(0.1), CorrelationKernel::kelvin(0.5, 0)}) {
    auto n = noise_matrix(ions, g, kMuY, k);
    EXPECT_NO_THROW(n.check_invariants());
    EXPECT_LE(n.cauchy_schwarz_excess(), 1e-9);
  }
  auto n = noise_matrix(ions, pg, kMuY, CorrelationKernel::patch(0.5));
  EXPECT_NO_THROW(n.check_invariants());
}

TEST(NoiseMatrix, CheckInvariantsRejectsBrokenMatrices) {
  NoiseMatrix n;
  n.s = Eigen::Matrix2d{{1.0, 2.0}, {2.0, 1.0}};
  EXPECT_THROW(n.check_invariants(), NumericalError);
  n.s = Eigen::Matrix2d{{1.0, 0.5}, {0.4, 1.0}};
  EXPECT_THROW(n.check_invariants(), NumericalError);
  n.s = Eigen::Matrix2d{{0.0, 0.0}, {0.0, 1.0}};
  EXPECT_THROW(n.check_invariants(), NumericalError);
  n.s = Eigen::Matrix2d{{1.0, 0.2}, {0.2, 1.0}};
  EXPECT_NO_THROW(n.check_invariants());
}

TEST(NoiseMatrix, TinyPatchesReduceToWeightedUncorrelatedSum) {
  auto g = plane(3, 6);
  auto pg = with_patches(g, make_patch_map(g, 0.01, 8));
  std::set<int> ids(pg.patch_id.begin(), pg.patch_id.end());
  ASSERT_EQ(ids.size(), g.size());
  const double w = g.weights.front();
  auto ions = IonConfiguration::pair(1.0, 1.2, Axis::x);
  auto patch = noise_matrix(ions, pg, kMuY, CorrelationKernel::patch(0.01));
  auto unc = noise_matrix(ions, g, kMuY, CorrelationKernel::uncorrelated());
  EXPECT_LT((patch.s - w * unc.s).cwiseAbs().maxCoeff(), 1e-12 * unc.s.cwiseAbs().maxCoeff() * w);
  EXPECT_NEAR(self_cross(patch).ratio, self_cross(unc).ratio, 1e-12);
}

TEST(NoiseMatrix, ShortExponentialMatchesUncorrelatedRatio) {
  auto g = plane(4, 6);
  const double xi = 0.01 * g.cell_diagonal;
  for (double l : {0.5, 1.0, 2.0}) {
    auto ions = IonConfiguration::pair(1.0, l, Axis::x);
    auto e = self_cross(noise_matrix(ions, g, kMuY, CorrelationKernel::exponential(xi)));
    auto u = self_cross(noise_matrix(ions, g, kMuY, CorrelationKernel::uncorrelated()));
    EXPECT_NEAR(e.ratio, u.ratio, 0.02);
  }
}

TEST(NoiseMatrix, PatchFactoredFormMatchesPairLoop) {
  auto g = plane(3, 6);
  auto pg = with_patches(g, make_patch_map(g, 0.7, 12));
  auto ions = IonConfiguration::chain(3, 1.0, 0.8, Axis::y);
  auto a = noise_matrix(ions, pg, kMuY, CorrelationKernel::patch(0.7));
  auto b = noise_matrix(ions, pg, kMuY, CorrelationKernel::patch(0.7), SourceKind::dipole,
                        with_engine(PairSumEngine::direct));
  EXPECT_LT((a.s - b.s).cwiseAbs().maxCoeff(), 1e-10 * a.s.cwiseAbs().maxCoeff());
}

TEST(NoiseMatrix, FftMatchesDirectSum) {
  auto g = plane(4, 6);
  ASSERT_TRUE(g.lattice.has_value());
  auto ions = IonConfiguration::pair(1.0, 1.3, Axis::x);
  for (auto k : {CorrelationKernel::exponential(0.5), CorrelationKernel::sinc(0.05),
                 CorrelationKernel::kelvin(0.7, 0)}) {
    auto fft = noise_matrix(ions, g, kMuY, k, SourceKind::dipole, with_engine(PairSumEngine::lattice_fft));
    auto dir = noise_matrix(ions, g, kMuY, k, SourceKind::dipole, with_engine(PairSumEngine::direct));
    EXPECT_EQ(fft.engine, PairSumEngine::lattice_fft);
    EXPECT_EQ(dir.engine, PairSumEngine::direct);
    EXPECT_LT((fft.s - dir.s).cwiseAbs().maxCoeff(), 1e-10 * dir.s.cwiseAbs().maxCoeff())
        << to_string(k.kind);
  }
}

TEST(NoiseMatrix, BitwiseIndependentOfThreadCount) {
  auto g = plane(5, 8);
  auto ions = IonConfiguration::chain(3, 1.0, 1.0, Axis::x);
  for (auto engine : {PairSumEngine::direct, PairSumEngine::lattice_fft}) {
    set_max_threads(1);
    auto a = noise_matrix(ions, g, kMuY, CorrelationKernel::exponential(0.3), SourceKind::dipole, with_engine(engine));
    auto u1 = noise_matrix(ions, g, kMuY, CorrelationKernel::uncorrelated());
    set_max_threads(7);
    auto b = noise_matrix(ions, g, kMuY, CorrelationKernel::exponential(0.3), SourceKind::dipole, with_engine(engine));
    auto u7 = noise_matrix(ions, g, kMuY, CorrelationKernel::uncorrelated());
    set_max_threads(0);
    EXPECT_TRUE(a.s == b.s);
    EXPECT_TRUE(u1.s == u7.s);
  }
}

TEST(NoiseMatrix, ExchangeSymmetryOnSymmetricGeometry) {
  auto g = plane(4, 6);
  auto n = noise_matrix(IonConfiguration::pair(1.0, 1.5, Axis::x), g, kMuY, CorrelationKernel::exponential(0.3));
  EXPECT_NEAR(n.s(0, 0), n.s(1, 1), 1e-10 * n.s(0, 0));
}

TEST(NoiseMatrix, ConvergesUnderGridRefinement) {
  auto geo = ElectrodeGeometry{{rectangle(-10, 10, -10, 10)}};
  auto ions = IonConfiguration::pair(1.0, 1.0, Axis::x);
  auto r = [&](double res) {
    return self_cross(noise_matrix(ions, build_grid(geo, res), kMuY, CorrelationKernel::uncorrelated())).ratio;
  };
  const double coarse = r(12), fine = r(24);
  EXPECT_LT(std::abs(coarse - fine), 0.01);
}

TEST(NoiseMatrix, RejectsMismatchedKernelAndGrid) {
  auto g = plane(2, 5);
  auto ions = IonConfiguration::pair(1.0, 1.0, Axis::x);
  EXPECT_THROW(noise_matrix(ions, g, kMuY, CorrelationKernel::patch(0.5)), ConfigError);
  EXPECT_THROW(noise_matrix(ions, g, kMuY, CorrelationKernel::uncorrelated(), SourceKind::dipole,
                            with_engine(PairSumEngine::lattice_fft)),
               ConfigError);
  GridOptions opt;
  opt.resolution = 5;
  opt.refine = {{{0, 0}, 1.0}};
  auto refined = build_grid(ElectrodeGeometry{{rectangle(-2, 2, -2, 2)}}, opt);
  EXPECT_THROW(noise_matrix(ions, refined, kMuY, CorrelationKernel::exponential(0.3), SourceKind::dipole,
                            with_engine(PairSumEngine::lattice_fft)),
               ConfigError);
  EXPECT_THROW(noise_matrix(IonConfiguration::pair(0.0, 1.0, Axis::x), g, kMuY, CorrelationKernel::uncorrelated()),
               ConfigError);
  EXPECT_THROW(noise_matrix(ions, g, kMuY, CorrelationKernel::exponential(0)), ConfigError);
}

TEST(NoiseMatrix, Ker0ClampDefaultsToCellDiagonal) {
  auto g = plane(2, 5);
  auto n = noise_matrix(IonConfiguration::pair(1.0, 1.0, Axis::x), g, kMuY, CorrelationKernel::kelvin(0.5, 0));
  EXPECT_DOUBLE_EQ(n.kernel.ker0_rmin, g.cell_diagonal);
}

TEST(SelfCross, Decomposition) {
  Eigen::Matrix2d s{{2.0, -0.5}, {-0.5, 2.0}};
  auto r = self_cross(s);
  EXPECT_DOUBLE_EQ(r.s_self, 2.0);
  EXPECT_DOUBLE_EQ(r.s_cross, -0.5);
  EXPECT_DOUBLE_EQ(r.ratio, -0.25);
  EXPECT_DOUBLE_EQ(r.s_plus, 1.5);
  EXPECT_DOUBLE_EQ(r.s_minus, 2.5);
  EXPECT_THROW(self_cross(Eigen::Matrix3d::Identity().eval()), ConfigError);
}

TEST(ModeNoise, SpecExamples) {
  const auto b = two_ion_basis();
  Eigen::Matrix2d s{{2.0, 1.0}, {1.0, 2.0}};
  auto v = mode_noise(s, b);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_NEAR(v[0], 3.0, 1e-14);
  EXPECT_NEAR(v[1], 1.0, 1e-14);
  Eigen::Matrix2d t{{3.0, 0.0}, {0.0, 1.0}};
  EXPECT_NEAR(cross_mode_term(t, b, 0, 1), 1.0, 1e-14);
  EXPECT_THROW(cross_mode_term(t, b, 1, 1), ConfigError);
  EXPECT_THROW(cross_mode_term(t, b, 0, 2), ConfigError);
  EXPECT_THROW(mode_noise(Eigen::Matrix3d::Identity().eval(), b), ConfigError);
}

TEST(ModeNoise, TraceIsBasisInvariant) {
  auto g = plane(4, 5);
  auto n = noise_matrix(IonConfiguration::chain(5, 1.0, 0.7, Axis::x), g, kMuY, CorrelationKernel::exponential(0.5));
  for (const auto& basis : {standing_wave_modes(5), chain_modes(5, 3e-6, 2 * std::numbers::pi * 1e6)}) {
    auto v = mode_noise(n, basis);
    double sum = 0;
    for (double x : v) sum += x;
    EXPECT_NEAR(sum, n.s.trace(), 1e-10 * n.s.trace());
  }
}

TEST(ModeNoise, TwoIonModesAreSumAndDifference) {
  auto g = plane(4, 6);
  auto n = noise_matrix(IonConfiguration::pair(1.0, 1.4, Axis::x), g, kMuY, CorrelationKernel::uncorrelated());
  auto sc = self_cross(n);
  auto v = mode_noise(n, two_ion_basis());
  EXPECT_NEAR(v[0], sc.s_plus, 1e-12 * sc.s_self);
  EXPECT_NEAR(v[1], sc.s_minus, 1e-12 * sc.s_self);
}
