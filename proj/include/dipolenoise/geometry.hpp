#pragma once

// Electrode surfaces in the plane y = 0, their quadrature grids, and the
// Voronoi patch tessellation used by the patch correlation model.
//
// Lengths are dimensionless simulation units throughout.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "vec.hpp"

namespace dipnoise {

struct Rectangle {
  double x_min, x_max, z_min, z_max;
};

struct Disk {
  double center_x, center_z, radius;
};

struct Annulus {
  double center_x, center_z, r_inner, r_outer;
};

struct BoundingBox {
  double x_min = 0, x_max = 0, z_min = 0, z_max = 0;

  double width() const { return x_max - x_min; }
  double depth() const { return z_max - z_min; }
  double diagonal() const { return std::hypot(width(), depth()); }
  double area() const { return width() * depth(); }
};

struct PlanarRegion {
  std::variant<Rectangle, Disk, Annulus> shape;
  // Grounded electrodes are part of the layout but carry no fluctuating
  // dipoles; build_grid skips them.
  bool noise_bearing = true;
  std::string label;

  double area() const {
    return std::visit(
        [](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Rectangle>) {
            return std::max(0.0, s.x_max - s.x_min) * std::max(0.0, s.z_max - s.z_min);
          } else if constexpr (std::is_same_v<S, Disk>) {
            return s.radius > 0 ? std::numbers::pi * s.radius * s.radius : 0.0;
          } else {
            if (s.r_inner < 0 || s.r_outer <= s.r_inner) return 0.0;
            return std::numbers::pi * (s.r_outer * s.r_outer - s.r_inner * s.r_inner);
          }
        },
        shape);
  }

  bool contains(SurfacePoint p) const {
    return std::visit(
        [p](const auto& s) -> bool {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Rectangle>) {
            return p.x >= s.x_min && p.x <= s.x_max && p.z >= s.z_min && p.z <= s.z_max;
          } else if constexpr (std::is_same_v<S, Disk>) {
            return std::hypot(p.x - s.center_x, p.z - s.center_z) <= s.radius;
          } else {
            double r = std::hypot(p.x - s.center_x, p.z - s.center_z);
            return r >= s.r_inner && r <= s.r_outer;
          }
        },
        shape);
  }

  // Open interior; used for the overlap check so that shared edges are fine.
  bool contains_strictly(SurfacePoint p) const {
    return std::visit(
        [p](const auto& s) -> bool {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Rectangle>) {
            return p.x > s.x_min && p.x < s.x_max && p.z > s.z_min && p.z < s.z_max;
          } else if constexpr (std::is_same_v<S, Disk>) {
            return std::hypot(p.x - s.center_x, p.z - s.center_z) < s.radius;
          } else {
            double r = std::hypot(p.x - s.center_x, p.z - s.center_z);
            return r > s.r_inner && r < s.r_outer;
          }
        },
        shape);
  }

  BoundingBox bounds() const {
    return std::visit(
        [](const auto& s) -> BoundingBox {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Rectangle>) {
            return {s.x_min, s.x_max, s.z_min, s.z_max};
          } else if constexpr (std::is_same_v<S, Disk>) {
            return {s.center_x - s.radius, s.center_x + s.radius, s.center_z - s.radius,
                    s.center_z + s.radius};
          } else {
            return {s.center_x - s.r_outer, s.center_x + s.r_outer, s.center_z - s.r_outer,
                    s.center_z + s.r_outer};
          }
        },
        shape);
  }
};

inline PlanarRegion rectangle(double x_min, double x_max, double z_min, double z_max,
                              std::string label = {}) {
  return {Rectangle{x_min, x_max, z_min, z_max}, true, std::move(label)};
}
inline PlanarRegion disk(double cx, double cz, double r, std::string label = {}) {
  return {Disk{cx, cz, r}, true, std::move(label)};
}
inline PlanarRegion annulus(double cx, double cz, double r_in, double r_out,
                            std::string label = {}) {
  return {Annulus{cx, cz, r_in, r_out}, true, std::move(label)};
}

struct ElectrodeGeometry {
  std::vector<PlanarRegion> regions;

  double total_area() const {
    double a = 0;
    for (const auto& r : regions) a += r.area();
    return a;
  }

  double noise_bearing_area() const {
    double a = 0;
    for (const auto& r : regions)
      if (r.noise_bearing) a += r.area();
    return a;
  }

  BoundingBox bounds() const {
    BoundingBox b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& r : regions) {
      auto rb = r.bounds();
      b.x_min = std::min(b.x_min, rb.x_min);
      b.x_max = std::max(b.x_max, rb.x_max);
      b.z_min = std::min(b.z_min, rb.z_min);
      b.z_max = std::max(b.z_max, rb.z_max);
    }
    return b;
  }

  double diameter() const { return bounds().diagonal(); }

  /// Throws ConfigError on an empty list, a region without positive finite
  /// area, or two rectangles whose interiors intersect. Curved overlaps are
  /// caught node-by-node in build_grid.
  void validate() const {
    require(!regions.empty(), "electrode geometry has no regions");
    bool any_noise = false;
    for (std::size_t i = 0; i < regions.size(); ++i) {
      double a = regions[i].area();
      require(std::isfinite(a) && a > 0.0,
              "region " + std::to_string(i) + " has zero or non-finite area");
      any_noise = any_noise || regions[i].noise_bearing;
    }
    require(any_noise, "electrode geometry has no noise-bearing region");
    for (std::size_t i = 0; i < regions.size(); ++i) {
      for (std::size_t j = i + 1; j < regions.size(); ++j) {
        const auto* a = std::get_if<Rectangle>(&regions[i].shape);
        const auto* b = std::get_if<Rectangle>(&regions[j].shape);
        if (!a || !b) continue;
        double ox = std::min(a->x_max, b->x_max) - std::max(a->x_min, b->x_min);
        double oz = std::min(a->z_max, b->z_max) - std::max(a->z_min, b->z_min);
        require(!(ox > 0 && oz > 0), "regions " + std::to_string(i) + " and " +
                                         std::to_string(j) + " overlap");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Presets

enum class Preset { plane_surrogate, segmented_trap, square, stylus };

inline Preset parse_preset(std::string_view name) {
  if (name == "plane_surrogate") return Preset::plane_surrogate;
  if (name == "segmented_trap") return Preset::segmented_trap;
  if (name == "square") return Preset::square;
  if (name == "stylus") return Preset::stylus;
  throw ConfigError("unknown geometry preset '" + std::string(name) + "'");
}

inline std::string_view to_string(Preset p) {
  switch (p) {
    case Preset::plane_surrogate: return "plane_surrogate";
    case Preset::segmented_trap: return "segmented_trap";
    case Preset::square: return "square";
    case Preset::stylus: return "stylus";
  }
  return "?";
}

/// Strip placement of the segmented trap, in units of the strip width L_z.
/// The ion axis sits at z = 0.
struct SegmentedTrapLayout {
  double length = 10.0;         // L_x / L_z
  double strip_a_z_min = 0.0;   // strip A spans [a, a + 1]
  double strip_b_z_max = -1.0;  // strip B spans [b - 2, b]
};

/// Named electrode layouts, all centred on x = 0.
///  - plane_surrogate: square of side 20*scale (stand-in for an infinite plane).
///  - segmented_trap: two RF strips of length 10*L_z, widths L_z and 2*L_z (scale = L_z).
///  - square: single square electrode of side scale.
///  - stylus: centre disk of radius R = scale (RF) and a grounded ring [3R, 5R].
inline ElectrodeGeometry preset_geometry(Preset p, double scale,
                                         const SegmentedTrapLayout& layout = {}) {
  require(std::isfinite(scale) && scale > 0, "preset scale must be positive");
  ElectrodeGeometry g;
  switch (p) {
    case Preset::plane_surrogate:
      g.regions.push_back(rectangle(-10 * scale, 10 * scale, -10 * scale, 10 * scale, "plane"));
      break;
    case Preset::segmented_trap: {
      double half = 0.5 * layout.length * scale;
      double a0 = layout.strip_a_z_min * scale;
      double b1 = layout.strip_b_z_max * scale;
      g.regions.push_back(rectangle(-half, half, a0, a0 + scale, "rf_a"));
      g.regions.push_back(rectangle(-half, half, b1 - 2 * scale, b1, "rf_b"));
      break;
    }
    case Preset::square:
      g.regions.push_back(rectangle(-0.5 * scale, 0.5 * scale, -0.5 * scale, 0.5 * scale, "square"));
      break;
    case Preset::stylus: {
      g.regions.push_back(disk(0, 0, scale, "rf_post"));
      auto ring = annulus(0, 0, 3 * scale, 5 * scale, "ground_ring");
      ring.noise_bearing = false;
      g.regions.push_back(ring);
      break;
    }
  }
  return g;
}

inline ElectrodeGeometry preset_geometry(std::string_view name, double scale) {
  return preset_geometry(parse_preset(name), scale);
}

// ---------------------------------------------------------------------------
// Quadrature grids

/// A common rectangular lattice shared by every node of a grid. Present only
/// for unrefined grids whose regions happen to align; enables FFT pair sums.
struct Lattice {
  double hx = 0, hz = 0;
  double x0 = 0, z0 = 0;  // centre of cell (0, 0)
  int nx = 0, nz = 0;
  std::vector<int> ix, iz;  // per node
};

struct QuadratureGrid {
  std::vector<SurfacePoint> nodes;
  std::vector<double> weights;
  std::vector<int> region;           // source region index per node
  std::vector<int> patch_id;         // empty unless a PatchMap was attached
  double resolution = 0;             // nodes per unit length (coarse level)
  double cell_diagonal = 0;          // largest coarse-cell diagonal
  BoundingBox domain;                // bounding box of the source geometry
  std::optional<Lattice> lattice;

  std::size_t size() const { return nodes.size(); }
  double total_weight() const {
    double s = 0;
    for (double w : weights) s += w;
    return s;
  }
};

struct RefineDisk {
  SurfacePoint center;
  double radius = 0;
};

struct GridOptions {
  double resolution = 0;            // nodes per unit length
  std::vector<RefineDisk> refine;   // cells centred inside get split
  int refine_factor = 2;            // split each refined cell into f x f
};

inline constexpr double kDefaultNodesPerHeight = 12.0;

/// Resolution that puts `nodes_per_height` coarse nodes across one ion height.
inline double default_resolution(double ion_height, double nodes_per_height = kDefaultNodesPerHeight) {
  require(ion_height > 0, "ion height must be positive");
  return nodes_per_height / ion_height;
}

namespace detail {

inline int cells_along(double extent, double resolution) {
  double n = std::ceil(extent * resolution - 1e-9);
  require(n < 2.0e7, "grid resolution too fine for region extent");
  return std::max(1, static_cast<int>(n));
}

inline std::optional<Lattice> detect_lattice(const QuadratureGrid& g, double hx, double hz) {
  if (g.nodes.empty()) return std::nullopt;
  Lattice L;
  L.hx = hx;
  L.hz = hz;
  L.x0 = g.nodes[0].x;
  L.z0 = g.nodes[0].z;
  for (const auto& p : g.nodes) {
    L.x0 = std::min(L.x0, p.x);
    L.z0 = std::min(L.z0, p.z);
  }
  L.ix.resize(g.size());
  L.iz.resize(g.size());
  int mx = 0, mz = 0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    double fx = (g.nodes[n].x - L.x0) / hx;
    double fz = (g.nodes[n].z - L.z0) / hz;
    double rx = std::round(fx), rz = std::round(fz);
    if (std::abs(fx - rx) > 1e-7 || std::abs(fz - rz) > 1e-7) return std::nullopt;
    L.ix[n] = static_cast<int>(rx);
    L.iz[n] = static_cast<int>(rz);
    mx = std::max(mx, L.ix[n]);
    mz = std::max(mz, L.iz[n]);
  }
  L.nx = mx + 1;
  L.nz = mz + 1;
  std::vector<char> seen(static_cast<std::size_t>(L.nx) * L.nz, 0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    auto& s = seen[static_cast<std::size_t>(L.ix[n]) * L.nz + L.iz[n]];
    if (s) return std::nullopt;
    s = 1;
  }
  return L;
}

}  // namespace detail

/// Midpoint tensor grid over every noise-bearing region. Curved regions are
/// gridded over their bounding box and a cell is kept iff its centre lies
/// inside. Cells whose centre falls inside a refinement disk are split into
/// refine_factor^2 equal sub-cells.
inline QuadratureGrid build_grid(const ElectrodeGeometry& geometry, const GridOptions& opt) {
  geometry.validate();
  require(std::isfinite(opt.resolution) && opt.resolution > 0, "grid resolution must be positive");
  require(opt.refine_factor >= 1, "refine factor must be >= 1");

  QuadratureGrid g;
  g.resolution = opt.resolution;
  g.domain = geometry.bounds();

  bool uniform_spacing = opt.refine.empty() || opt.refine_factor == 1;
  double hx_common = -1, hz_common = -1;

  auto in_refine = [&](SurfacePoint c) {
    for (const auto& r : opt.refine)
      if (distance(c, r.center) <= r.radius) return true;
    return false;
  };

  for (std::size_t ri = 0; ri < geometry.regions.size(); ++ri) {
    const auto& reg = geometry.regions[ri];
    if (!reg.noise_bearing) continue;
    BoundingBox b = reg.bounds();
    // Curved regions use a square cell so the lattice stays isotropic.
    int nx = detail::cells_along(b.width(), opt.resolution);
    int nz = detail::cells_along(b.depth(), opt.resolution);
    double hx = b.width() / nx;
    double hz = b.depth() / nz;
    g.cell_diagonal = std::max(g.cell_diagonal, std::hypot(hx, hz));
    if (hx_common < 0) {
      hx_common = hx;
      hz_common = hz;
    } else if (std::abs(hx - hx_common) > 1e-12 * hx_common ||
               std::abs(hz - hz_common) > 1e-12 * hz_common) {
      uniform_spacing = false;
    }
    for (int i = 0; i < nx; ++i) {
      for (int k = 0; k < nz; ++k) {
        SurfacePoint c{b.x_min + (i + 0.5) * hx, b.z_min + (k + 0.5) * hz};
        int f = (opt.refine_factor > 1 && in_refine(c)) ? opt.refine_factor : 1;
        double w = hx * hz / (f * f);
        for (int a = 0; a < f; ++a) {
          for (int bb = 0; bb < f; ++bb) {
            SurfacePoint p{c.x + ((a + 0.5) / f - 0.5) * hx, c.z + ((bb + 0.5) / f - 0.5) * hz};
            if (!reg.contains(p)) continue;
            g.nodes.push_back(p);
            g.weights.push_back(w);
            g.region.push_back(static_cast<int>(ri));
          }
        }
      }
    }
  }
  require(!g.nodes.empty(), "grid resolution too coarse: no node falls inside the geometry");

  for (std::size_t n = 0; n < g.size(); ++n) {
    for (std::size_t rj = 0; rj < geometry.regions.size(); ++rj) {
      if (static_cast<int>(rj) == g.region[n]) continue;
      if (geometry.regions[rj].contains_strictly(g.nodes[n]))
        throw ConfigError("regions " + std::to_string(g.region[n]) + " and " + std::to_string(rj) +
                          " overlap");
    }
  }

  if (uniform_spacing) g.lattice = detail::detect_lattice(g, hx_common, hz_common);
  return g;
}

inline QuadratureGrid build_grid(const ElectrodeGeometry& geometry, double resolution) {
  GridOptions opt;
  opt.resolution = resolution;
  return build_grid(geometry, opt);
}

// ---------------------------------------------------------------------------
// Patch tessellation

struct PatchMap {
  std::uint64_t seed = 0;
  double patch_scale = 0;
  std::vector<SurfacePoint> sites;
  std::vector<int> assignment;  // patch id per grid node
  int patch_count = 0;          // number of sites (some may own no node)
};

/// Poisson-Voronoi tessellation of the grid's geometry bounding box with
/// site density 1/patch_scale^2. Sites depend only on (bounding box, scale,
/// seed), so grids of the same geometry at different resolutions see the
/// same patches. A scale at or above the geometry diameter gives one patch.
inline PatchMap make_patch_map(const QuadratureGrid& grid, double patch_scale, std::uint64_t seed) {
  require(std::isfinite(patch_scale) && patch_scale > 0, "patch scale must be positive");
  require(!grid.nodes.empty(), "cannot tessellate an empty grid");
  PatchMap pm;
  pm.seed = seed;
  pm.patch_scale = patch_scale;
  const BoundingBox& box = grid.domain;

  if (patch_scale >= box.diagonal()) {
    pm.sites.push_back({0.5 * (box.x_min + box.x_max), 0.5 * (box.z_min + box.z_max)});
  } else {
    const double mean_sites = box.area() / (patch_scale * patch_scale);
    require(mean_sites <= 5e7, "patch scale too small for the geometry (more than 5e7 patches)");
    std::mt19937_64 rng(seed);
    std::poisson_distribution<long long> count(mean_sites);
    long long n = std::max<long long>(1, count(rng));
    std::uniform_real_distribution<double> ux(box.x_min, box.x_max);
    std::uniform_real_distribution<double> uz(box.z_min, box.z_max);
    pm.sites.reserve(static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i) {
      double x = ux(rng);
      double z = uz(rng);
      pm.sites.push_back({x, z});
    }
  }
  pm.patch_count = static_cast<int>(pm.sites.size());

  // Bucket the sites on a cell of size patch_scale and search outward.
  const double cell = patch_scale;
  const int bx = std::max(1, static_cast<int>(std::ceil(box.width() / cell)));
  const int bz = std::max(1, static_cast<int>(std::ceil(box.depth() / cell)));
  auto bucket_of = [&](SurfacePoint p) {
    int i = std::clamp(static_cast<int>((p.x - box.x_min) / cell), 0, bx - 1);
    int k = std::clamp(static_cast<int>((p.z - box.z_min) / cell), 0, bz - 1);
    return std::pair{i, k};
  };
  std::vector<std::vector<int>> buckets(static_cast<std::size_t>(bx) * bz);
  for (int s = 0; s < pm.patch_count; ++s) {
    auto [i, k] = bucket_of(pm.sites[s]);
    buckets[static_cast<std::size_t>(i) * bz + k].push_back(s);
  }

  pm.assignment.resize(grid.size());
  for (std::size_t n = 0; n < grid.size(); ++n) {
    SurfacePoint p = grid.nodes[n];
    auto [ci, ck] = bucket_of(p);
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int ring = 0;; ++ring) {
      bool any_cell = false;
      for (int i = ci - ring; i <= ci + ring; ++i) {
        for (int k = ck - ring; k <= ck + ring; ++k) {
          if (std::max(std::abs(i - ci), std::abs(k - ck)) != ring) continue;
          if (i < 0 || k < 0 || i >= bx || k >= bz) continue;
          any_cell = true;
          for (int s : buckets[static_cast<std::size_t>(i) * bz + k]) {
            double dx = pm.sites[s].x - p.x, dz = pm.sites[s].z - p.z;
            double d2 = dx * dx + dz * dz;
            // Ties go to the lower site index so the result is order-free.
            if (d2 < best_d2 || (d2 == best_d2 && s < best)) {
              best_d2 = d2;
              best = s;
            }
          }
        }
      }
      // Any site outside the searched square is at least `ring * cell` away.
      if (best >= 0 && ring * cell >= std::sqrt(best_d2)) break;
      if (!any_cell && ring > bx + bz) break;
    }
    pm.assignment[n] = best;
  }
  return pm;
}

/// Copies the patch assignment onto the grid so the patch kernel can use it.
inline QuadratureGrid with_patches(QuadratureGrid grid, const PatchMap& pm) {
  require(pm.assignment.size() == grid.size(), "patch map does not match grid");
  grid.patch_id = pm.assignment;
  return grid;
}

}  // namespace dipnoise
