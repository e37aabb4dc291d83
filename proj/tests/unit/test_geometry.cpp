#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "dipolenoise/geometry.hpp"

using namespace dipnoise;

namespace {

ElectrodeGeometry unit_square() { return {{rectangle(0, 1, 0, 1)}}; }

}  // namespace

TEST(BuildGrid, UnitSquareMidpoint) {
  auto g = build_grid(unit_square(), 10.0);
  EXPECT_EQ(g.size(), 100u);
  EXPECT_NEAR(g.total_weight(), 1.0, 1e-12);
  ASSERT_TRUE(g.lattice.has_value());
  EXPECT_EQ(g.lattice->nx, 10);
  EXPECT_EQ(g.lattice->nz, 10);
}

TEST(BuildGrid, DiskAreaWithinOnePercent) {
  ElectrodeGeometry geo{{disk(0, 0, 1)}};
  auto g = build_grid(geo, 40.0);
  EXPECT_NEAR(g.total_weight(), std::numbers::pi, 0.01 * std::numbers::pi);
}

TEST(BuildGrid, RejectsDegenerateGeometry) {
  EXPECT_THROW(build_grid(ElectrodeGeometry{}, 10.0), ConfigError);
  EXPECT_THROW(build_grid(ElectrodeGeometry{{rectangle(0, 0, 0, 1)}}, 10.0), ConfigError);
  EXPECT_THROW(build_grid(ElectrodeGeometry{{disk(0, 0, -1)}}, 10.0), ConfigError);
  EXPECT_THROW(build_grid(unit_square(), 0.0), ConfigError);
  EXPECT_THROW(build_grid(unit_square(), -3.0), ConfigError);
}

TEST(BuildGrid, RejectsOverlap) {
  ElectrodeGeometry rects{{rectangle(0, 1, 0, 1), rectangle(0.5, 1.5, 0.5, 1.5)}};
  EXPECT_THROW(rects.validate(), ConfigError);
  ElectrodeGeometry curved{{disk(0, 0, 1), annulus(0, 0, 0.5, 2)}};
  EXPECT_THROW(build_grid(curved, 20.0), ConfigError);
  ElectrodeGeometry touching{{rectangle(0, 1, 0, 1), rectangle(1, 2, 0, 1)}};
  EXPECT_NO_THROW(build_grid(touching, 10.0));
}

TEST(BuildGrid, RejectsAllGroundedGeometry) {
  auto ring = annulus(0, 0, 1, 2);
  ring.noise_bearing = false;
  EXPECT_THROW(build_grid(ElectrodeGeometry{{ring}}, 10.0), ConfigError);
}

TEST(BuildGrid, NodesInsideAndWeightsPositive) {
  for (auto p : {Preset::plane_surrogate, Preset::segmented_trap, Preset::square, Preset::stylus}) {
    auto geo = preset_geometry(p, 1.0);
    GridOptions opt;
    opt.resolution = 8.0;
    opt.refine.push_back({{0.3, 0.1}, 1.5});
    auto g = build_grid(geo, opt);
    ASSERT_EQ(g.weights.size(), g.size());
    for (std::size_t n = 0; n < g.size(); ++n) {
      EXPECT_GT(g.weights[n], 0.0);
      EXPECT_TRUE(geo.regions[static_cast<std::size_t>(g.region[n])].contains(g.nodes[n]));
      EXPECT_TRUE(geo.regions[static_cast<std::size_t>(g.region[n])].noise_bearing);
    }
  }
}

TEST(BuildGrid, ConvergesUnderDoubling) {
  auto rect = preset_geometry(Preset::segmented_trap, 1.0);
  for (double res : {12.0, 24.0}) {
    const double a = build_grid(rect, res).total_weight();
    const double b = build_grid(rect, 2 * res).total_weight();
    EXPECT_LT(std::abs(a - b) / b, 0.005);
    EXPECT_NEAR(a, rect.total_area(), 0.005 * rect.total_area());
  }
  ElectrodeGeometry circ{{disk(0, 0, 1), annulus(0, 0, 3, 5)}};
  for (double res : {12.0, 24.0}) {
    const double a = build_grid(circ, res).total_weight();
    const double b = build_grid(circ, 2 * res).total_weight();
    EXPECT_LT(std::abs(a - b) / b, 0.01);
  }
}

TEST(BuildGrid, RefinementKeepsRectangleArea) {
  GridOptions opt;
  opt.resolution = 6;
  opt.refine = {{{0, 0}, 2.0}};
  opt.refine_factor = 3;
  auto geo = preset_geometry(Preset::plane_surrogate, 0.5);
  auto coarse = build_grid(geo, 6.0);
  auto fine = build_grid(geo, opt);
  EXPECT_GT(fine.size(), coarse.size());
  EXPECT_NEAR(fine.total_weight(), 100.0, 1e-9);
  EXPECT_FALSE(fine.lattice.has_value());
}

TEST(BuildGrid, SegmentedStripsShareOneLattice) {
  auto g = build_grid(preset_geometry(Preset::segmented_trap, 1.0), 12.0);
  ASSERT_TRUE(g.lattice.has_value());
  EXPECT_EQ(g.lattice->nx, 120);
  EXPECT_EQ(g.lattice->nz, 48);  // z in [-3, 1] including the gap
  EXPECT_EQ(g.size(), 120u * 36u);
}

TEST(Presets, PlaneSurrogate) {
  auto g = preset_geometry(Preset::plane_surrogate, 1.0);
  ASSERT_EQ(g.regions.size(), 1u);
  auto b = g.bounds();
  EXPECT_DOUBLE_EQ(b.width(), 20.0);
  EXPECT_DOUBLE_EQ(b.depth(), 20.0);
  EXPECT_DOUBLE_EQ(b.x_min + b.x_max, 0.0);
}

TEST(Presets, Stylus) {
  auto g = preset_geometry(Preset::stylus, 1.0);
  ASSERT_EQ(g.regions.size(), 2u);
  EXPECT_NEAR(g.regions[0].area(), std::numbers::pi, 1e-12);
  EXPECT_NEAR(g.regions[1].area(), 16 * std::numbers::pi, 1e-12);
  EXPECT_NEAR(g.total_area(), 17 * std::numbers::pi, 1e-12);
  EXPECT_TRUE(g.regions[0].noise_bearing);
  EXPECT_FALSE(g.regions[1].noise_bearing);
}

TEST(Presets, SegmentedTrap) {
  auto g = preset_geometry(Preset::segmented_trap, 1.0);
  ASSERT_EQ(g.regions.size(), 2u);
  for (const auto& r : g.regions) EXPECT_DOUBLE_EQ(r.bounds().width(), 10.0);
  const auto& a = std::get<Rectangle>(g.regions[0].shape);
  const auto& b = std::get<Rectangle>(g.regions[1].shape);
  EXPECT_DOUBLE_EQ(a.z_min, 0.0);
  EXPECT_DOUBLE_EQ(a.z_max, 1.0);
  EXPECT_DOUBLE_EQ(b.z_min, -3.0);
  EXPECT_DOUBLE_EQ(b.z_max, -1.0);
}

TEST(Presets, SquareAndNames) {
  auto g = preset_geometry("square", 2.0);
  EXPECT_DOUBLE_EQ(g.total_area(), 4.0);
  EXPECT_THROW(preset_geometry("hexagon", 1.0), ConfigError);
  EXPECT_THROW(preset_geometry(Preset::square, 0.0), ConfigError);
  for (auto p : {Preset::plane_surrogate, Preset::segmented_trap, Preset::square, Preset::stylus})
    EXPECT_EQ(parse_preset(to_string(p)), p);
}

TEST(PatchMap, HugeScaleGivesOnePatch) {
  auto g = build_grid(unit_square(), 10.0);
  auto pm = make_patch_map(g, 5.0, 3);
  EXPECT_EQ(pm.patch_count, 1);
  for (int id : pm.assignment) EXPECT_EQ(id, 0);
}

TEST(PatchMap, Deterministic) {
  auto g = build_grid(preset_geometry(Preset::segmented_trap, 1.0), 12.0);
  auto a = make_patch_map(g, 0.3, 42);
  auto b = make_patch_map(g, 0.3, 42);
  EXPECT_EQ(a.assignment, b.assignment);
  auto c = make_patch_map(g, 0.3, 43);
  EXPECT_NE(a.assignment, c.assignment);
}

TEST(PatchMap, AssignmentIsNearestSite) {
  auto g = build_grid(unit_square(), 20.0);
  auto pm = make_patch_map(g, 0.15, 9);
  for (std::size_t n = 0; n < g.size(); ++n) {
    double best = 1e300;
    int arg = -1;
    for (int s = 0; s < pm.patch_count; ++s) {
      double d = distance(g.nodes[n], pm.sites[static_cast<std::size_t>(s)]);
      if (d < best) {
        best = d;
        arg = s;
      }
    }
    EXPECT_EQ(pm.assignment[n], arg);
  }
}

TEST(PatchMap, MeanPatchAreaTracksScale) {
  auto g = build_grid(unit_square(), 100.0);
  double mean_area = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto pm = make_patch_map(g, 0.1, seed);
    std::set<int> used(pm.assignment.begin(), pm.assignment.end());
    mean_area += g.total_weight() / static_cast<double>(used.size());
  }
  mean_area /= 20;
  EXPECT_GE(mean_area, 0.005);
  EXPECT_LE(mean_area, 0.02);
}

TEST(PatchMap, RejectsNonPositiveScale) {
  auto g = build_grid(unit_square(), 10.0);
  EXPECT_THROW(make_patch_map(g, 0.0, 1), ConfigError);
  EXPECT_THROW(make_patch_map(g, 1e-6, 1), ConfigError);
  auto pm = make_patch_map(g, 0.2, 1);
  auto other = build_grid(unit_square(), 5.0);
  EXPECT_THROW(with_patches(other, pm), ConfigError);
}
