#pragma once

// Field-noise correlators s_ij between ion positions, and their projection
// onto normal modes.
//
// Units: dipole surface density and dipole-strength variance are 1, and the
// 1/(4 pi eps0) prefactor is dropped, so absolute S values are in geometry
// units (length^-6 for dipoles, length^-4 for monopoles). Only ratios,
// crossover positions and scaling exponents are meaningful across setups.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "fft_convolution.hpp"
#include "fieldkernels.hpp"
#include "geometry.hpp"
#include "modes.hpp"
#include "parallel.hpp"
#include "vec.hpp"

namespace dipnoise {

struct IonConfiguration {
  std::vector<Vec3> positions;
  Axis motion = Axis::x;

  std::size_t size() const { return positions.size(); }

  /// Every ion must be strictly above the plane. Coincident ions are allowed
  /// (they are the common-bath limit).
  void validate() const {
    require(!positions.empty(), "ion configuration is empty");
    for (const auto& p : positions) {
      require(std::isfinite(p.x) && std::isfinite(p.z), "ion position must be finite");
      require(std::isfinite(p.y) && p.y > 0, "ion must sit strictly above the electrode plane (height > 0)");
    }
  }

  /// Two ions at height d separated by l along x, centred on (center_x, axis_z).
  static IonConfiguration pair(double height, double separation, Axis motion, double center_x = 0,
                               double axis_z = 0) {
    require(separation >= 0 && std::isfinite(separation), "ion separation must be non-negative");
    IonConfiguration c;
    c.motion = motion;
    c.positions = {{center_x - 0.5 * separation, height, axis_z},
                   {center_x + 0.5 * separation, height, axis_z}};
    return c;
  }

  /// N equally spaced ions along x centred on center_x.
  static IonConfiguration chain(int n, double height, double spacing, Axis motion, double center_x = 0,
                                double axis_z = 0) {
    require(n >= 1, "chain needs at least one ion");
    require(spacing >= 0 && std::isfinite(spacing), "chain spacing must be non-negative");
    IonConfiguration c;
    c.motion = motion;
    for (int i = 0; i < n; ++i)
      c.positions.push_back({center_x + (i - 0.5 * (n - 1)) * spacing, height, axis_z});
    return c;
  }

  static IonConfiguration single(double height, Axis motion, double x = 0, double z = 0) {
    IonConfiguration c;
    c.motion = motion;
    c.positions = {{x, height, z}};
    return c;
  }
};

enum class PairSumEngine { automatic, direct, lattice_fft };

inline std::string_view to_string(PairSumEngine e) {
  switch (e) {
    case PairSumEngine::automatic: return "automatic";
    case PairSumEngine::direct: return "direct";
    case PairSumEngine::lattice_fft: return "lattice_fft";
  }
  return "?";
}

struct NoiseMatrix {
  Eigen::MatrixXd s;
  Axis axis = Axis::x;
  SourceKind source = SourceKind::dipole;
  CorrelationKernel kernel;
  std::size_t nodes = 0;
  PairSumEngine engine = PairSumEngine::direct;  // what actually ran

  Eigen::Index size() const { return s.rows(); }

  /// Largest Cauchy-Schwarz excess |s_ij| - sqrt(s_ii s_jj), relative to the
  /// largest diagonal entry (<= 0 when the matrix is consistent).
  double cauchy_schwarz_excess() const {
    const double scale = std::max(s.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    double worst = -1.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      for (Eigen::Index j = i + 1; j < s.cols(); ++j)
        worst = std::max(worst, (std::abs(s(i, j)) - std::sqrt(std::max(0.0, s(i, i) * s(j, j)))) / scale);
    return worst;
  }

  /// Throws NumericalError unless s is finite, symmetric, has a positive
  /// diagonal and obeys Cauchy-Schwarz (relative slack `tol`).
  void check_invariants(double tol = 1e-9) const {
    if (!s.allFinite()) throw NumericalError("noise matrix has non-finite entries");
    const double scale = std::max(s.cwiseAbs().maxCoeff(), 1e-300);
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw NumericalError("noise matrix is not symmetric");
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      if (!(s(i, i) > 0)) throw NumericalError("noise matrix has a non-positive diagonal entry");
    if (cauchy_schwarz_excess() > tol)
      throw NumericalError("noise matrix violates Cauchy-Schwarz (kernel not positive semi-definite on this grid?)");
  }
};

struct NoiseOptions {
  PairSumEngine engine = PairSumEngine::automatic;
  bool check_invariants = true;
  // Below this node count the automatic engine prefers the direct loop.
  std::size_t fft_min_nodes = 512;
};

namespace detail {

inline constexpr std::size_t kNodeBlock = 2048;

// Row i holds g_i at every grid node.
inline Eigen::MatrixXd field_table(const IonConfiguration& ions, const QuadratureGrid& grid,
                                   const DipoleOrientation& u, SourceKind source) {
  const auto n_ions = static_cast<Eigen::Index>(ions.size());
  const std::size_t m = grid.size();
  const int axis = index(ions.motion);
  Eigen::MatrixXd g(n_ions, static_cast<Eigen::Index>(m));
  const std::size_t blocks = (m + kNodeBlock - 1) / kNodeBlock;
  parallel_for_blocks(blocks, [&](std::size_t b) {
    const std::size_t lo = b * kNodeBlock, hi = std::min(m, lo + kNodeBlock);
    for (Eigen::Index i = 0; i < n_ions; ++i) {
      const Vec3& ion = ions.positions[static_cast<std::size_t>(i)];
      for (std::size_t l = lo; l < hi; ++l)
        g(i, static_cast<Eigen::Index>(l)) =
            source == SourceKind::dipole ? dipole_g_unchecked(axis, u.unit(), ion, grid.nodes[l])
                                         : monopole_g_unchecked(axis, ion, grid.nodes[l]);
    }
  });
  return g;
}

// Kernel value for r > 0 without the argument checks of corr_kernel.
struct KernelEvaluator {
  KernelKind kind;
  double inv_xi = 0;
  double rmin = 0;
  double inv_norm = 1;

  explicit KernelEvaluator(const CorrelationKernel& k) : kind(k.kind) {
    if (k.kind == KernelKind::uncorrelated || k.kind == KernelKind::patch) return;
    inv_xi = 1.0 / k.xi;
    if (k.kind == KernelKind::kelvin_ker0) {
      require(k.ker0_rmin > 0, "ker0 kernel needs a positive clamp distance");
      rmin = k.ker0_rmin;
      const double norm = kelvin_ker0(rmin * inv_xi);
      if (!(norm > 0)) throw NumericalError("ker0 clamp distance is too large for xi (ker0(rmin/xi) <= 0)");
      inv_norm = 1.0 / norm;
    }
  }

  double operator()(double r) const {
    switch (kind) {
      case KernelKind::exponential: return std::exp(-r * inv_xi);
      case KernelKind::sinc: {
        const double t = r * inv_xi;
        return t == 0.0 ? 1.0 : std::sin(t) / t;
      }
      case KernelKind::kelvin_ker0: return r <= rmin ? 1.0 : kelvin_ker0(r * inv_xi) * inv_norm;
      default: return r == 0.0 ? 1.0 : 0.0;
    }
  }
};

inline Eigen::MatrixXd uncorrelated_sum(const Eigen::MatrixXd& g, const QuadratureGrid& grid) {
  const Eigen::Index n = g.rows();
  const std::size_t m = grid.size();
  const std::size_t blocks = (m + kNodeBlock - 1) / kNodeBlock;
  std::vector<Eigen::MatrixXd> parts(blocks, Eigen::MatrixXd::Zero(n, n));
  parallel_for_blocks(blocks, [&](std::size_t b) {
    const std::size_t lo = b * kNodeBlock, hi = std::min(m, lo + kNodeBlock);
    Eigen::MatrixXd& acc = parts[b];
    for (std::size_t l = lo; l < hi; ++l) {
      const double w = grid.weights[l];
      const auto col = g.col(static_cast<Eigen::Index>(l));
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) acc(i, j) += w * col[i] * col[j];
    }
  });
  Eigen::MatrixXd s = tree_reduce(std::move(parts), [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return Eigen::MatrixXd(a + b);
  });
  return s.selfadjointView<Eigen::Upper>();
}

inline Eigen::MatrixXd patch_sum(const Eigen::MatrixXd& g, const QuadratureGrid& grid) {
  const Eigen::Index n = g.rows();
  int n_patches = 0;
  for (int p : grid.patch_id) {
    require(p >= 0, "negative patch id");
    n_patches = std::max(n_patches, p + 1);
  }
  Eigen::MatrixXd per_patch = Eigen::MatrixXd::Zero(n, n_patches);
  for (std::size_t l = 0; l < grid.size(); ++l)
    per_patch.col(grid.patch_id[l]) += grid.weights[l] * g.col(static_cast<Eigen::Index>(l));
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  for (int p = 0; p < n_patches; ++p) s += per_patch.col(p) * per_patch.col(p).transpose();
  return s;
}

// Symmetric pair loop over k >= l. For fixed l the k > l tail is folded into
// a_j = sum_k f_lk w_k g_j(k), so each pair costs one kernel call and N
// multiply-adds.
inline Eigen::MatrixXd direct_pair_sum(const Eigen::MatrixXd& g, const QuadratureGrid& grid,
                                       const CorrelationKernel& kernel) {
  const Eigen::Index n = g.rows();
  const std::size_t m = grid.size();
  const KernelEvaluator f(kernel);
  const bool patch = kernel.kind == KernelKind::patch;
  // Rows are unequal in cost; small fixed blocks keep the dynamic schedule balanced.
  const std::size_t block = 64;
  const std::size_t blocks = (m + block - 1) / block;
  std::vector<Eigen::MatrixXd> parts(blocks, Eigen::MatrixXd::Zero(n, n));
  Eigen::MatrixXd wg = g;
  for (std::size_t k = 0; k < m; ++k) wg.col(static_cast<Eigen::Index>(k)) *= grid.weights[k];

  parallel_for_blocks(blocks, [&](std::size_t b) {
    const std::size_t lo = b * block, hi = std::min(m, lo + block);
    Eigen::MatrixXd& acc = parts[b];
    Eigen::VectorXd a(n);
    for (std::size_t l = lo; l < hi; ++l) {
      a.setZero();
      const SurfacePoint pl = grid.nodes[l];
      for (std::size_t k = l + 1; k < m; ++k) {
        double fk;
        if (patch) {
          fk = grid.patch_id[l] == grid.patch_id[k] ? 1.0 : 0.0;
        } else {
          const double dx = grid.nodes[k].x - pl.x, dz = grid.nodes[k].z - pl.z;
          fk = f(std::sqrt(dx * dx + dz * dz));
        }
        if (fk != 0.0) a += fk * wg.col(static_cast<Eigen::Index>(k));
      }
      const auto wgl = wg.col(static_cast<Eigen::Index>(l));
      // same-node term plus both orderings of every k > l pair
      acc += wgl * wgl.transpose() + wgl * a.transpose() + a * wgl.transpose();
    }
  });
  return tree_reduce(std::move(parts), [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    return Eigen::MatrixXd(x + y);
  });
}

inline Eigen::MatrixXd fft_pair_sum(const Eigen::MatrixXd& g, const QuadratureGrid& grid,
                                    const CorrelationKernel& kernel) {
  const Lattice& L = *grid.lattice;
  const KernelEvaluator f(kernel);
  LatticeConvolver conv(L.nx, L.nz, [&](int di, int dk) { return f(std::hypot(di * L.hx, dk * L.hz)); });
  const Eigen::Index n = g.rows();
  const std::size_t m = grid.size();
  std::vector<std::vector<double>> h(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> field(static_cast<std::size_t>(L.nx) * L.nz, 0.0);
    for (std::size_t l = 0; l < m; ++l)
      field[static_cast<std::size_t>(L.ix[l]) * L.nz + L.iz[l]] = grid.weights[l] * g(i, static_cast<Eigen::Index>(l));
    h[static_cast<std::size_t>(i)] = conv.apply(field);
  }
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& hj = h[static_cast<std::size_t>(j)];
      std::vector<double> terms(m);
      for (std::size_t l = 0; l < m; ++l)
        terms[l] = grid.weights[l] * g(i, static_cast<Eigen::Index>(l)) *
                   hj[static_cast<std::size_t>(L.ix[l]) * L.nz + L.iz[l]];
      s(i, j) = tree_sum(std::move(terms));
    }
  }
  return 0.5 * (s + s.transpose());
}

}  // namespace detail

/// s_ij for every ion pair along ions.motion.
///  - uncorrelated: s_ij = sum_l w_l g_i(l) g_j(l)
///  - patch: s_ij = sum_p (sum_{l in p} w_l g_i(l)) (sum_{k in p} w_k g_j(k))
///  - exponential / sinc / kelvin_ker0: s_ij = sum_{l,k} w_l w_k f(|r_l - r_k|) g_i(l) g_j(k),
///    same-node terms with f = 1.
/// A kelvin_ker0 kernel with ker0_rmin = 0 is clamped at the grid cell diagonal.
inline NoiseMatrix noise_matrix(const IonConfiguration& ions, const QuadratureGrid& grid,
                                const DipoleOrientation& orientation, const CorrelationKernel& kernel,
                                SourceKind source = SourceKind::dipole, const NoiseOptions& opt = {}) {
  ions.validate();
  kernel.validate();
  require(!grid.nodes.empty() && grid.weights.size() == grid.size(), "quadrature grid is empty or inconsistent");
  CorrelationKernel k = kernel;
  if (k.kind == KernelKind::kelvin_ker0 && k.ker0_rmin <= 0) k.ker0_rmin = grid.cell_diagonal;
  if (k.kind == KernelKind::patch)
    require(grid.patch_id.size() == grid.size(), "patch kernel needs a grid with a patch map attached");

  NoiseMatrix out;
  out.axis = ions.motion;
  out.source = source;
  out.kernel = k;
  out.nodes = grid.size();

  const Eigen::MatrixXd g = detail::field_table(ions, grid, orientation, source);
  switch (k.kind) {
    case KernelKind::uncorrelated:
      require(opt.engine != PairSumEngine::lattice_fft, "the FFT engine applies to correlated kernels only");
      out.s = detail::uncorrelated_sum(g, grid);
      out.engine = PairSumEngine::direct;
      break;
    case KernelKind::patch:
      require(opt.engine != PairSumEngine::lattice_fft, "the FFT engine applies to translation-invariant kernels only");
      out.s = opt.engine == PairSumEngine::direct ? detail::direct_pair_sum(g, grid, k) : detail::patch_sum(g, grid);
      out.engine = PairSumEngine::direct;
      break;
    default: {
      bool use_fft = false;
      if (opt.engine == PairSumEngine::lattice_fft) {
        require(grid.lattice.has_value(), "FFT engine needs a grid on a common lattice (no refinement)");
        use_fft = true;
      } else if (opt.engine == PairSumEngine::automatic) {
        use_fft = grid.lattice.has_value() && grid.size() >= opt.fft_min_nodes;
      }
      out.s = use_fft ? detail::fft_pair_sum(g, grid, k) : detail::direct_pair_sum(g, grid, k);
      out.engine = use_fft ? PairSumEngine::lattice_fft : PairSumEngine::direct;
    }
  }
  if (opt.check_invariants) out.check_invariants();
  return out;
}

struct SelfCross {
  double s_self = 0;
  double s_cross = 0;
  double ratio = 0;
  double s_plus = 0;   // COM
  double s_minus = 0;  // stretch
};

inline SelfCross self_cross(const Eigen::MatrixXd& s) {
  require(s.rows() == 2 && s.cols() == 2, "self/cross decomposition needs exactly two ions");
  SelfCross r;
  r.s_self = 0.5 * (s(0, 0) + s(1, 1));
  r.s_cross = 0.5 * (s(0, 1) + s(1, 0));
  if (!(r.s_self > 0)) throw NumericalError("self-noise is not positive");
  r.ratio = r.s_cross / r.s_self;
  r.s_plus = r.s_self + r.s_cross;
  r.s_minus = r.s_self - r.s_cross;
  return r;
}

inline SelfCross self_cross(const NoiseMatrix& noise) { return self_cross(noise.s); }

/// S_j = f_j s f_j^T for every mode row of the basis.
inline std::vector<double> mode_noise(const Eigen::MatrixXd& s, const ModeBasis& basis) {
  require(basis.f.cols() == s.rows() && s.rows() == s.cols(), "mode basis dimension does not match noise matrix");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(basis.size()));
  for (Eigen::Index j = 0; j < basis.size(); ++j) out.push_back(basis.f.row(j) * s * basis.f.row(j).transpose());
  return out;
}

inline std::vector<double> mode_noise(const NoiseMatrix& noise, const ModeBasis& basis) {
  return mode_noise(noise.s, basis);
}

/// Bath-induced coupling f_j s f_k^T between two distinct modes.
inline double cross_mode_term(const Eigen::MatrixXd& s, const ModeBasis& basis, Eigen::Index j, Eigen::Index k) {
  require(basis.f.cols() == s.rows() && s.rows() == s.cols(), "mode basis dimension does not match noise matrix");
  require(j >= 0 && k >= 0 && j < basis.size() && k < basis.size(), "mode index out of range");
  require(j != k, "cross_mode_term needs two distinct modes (use mode_noise for j == k)");
  return basis.f.row(j) * s * basis.f.row(k).transpose();
}

inline double cross_mode_term(const NoiseMatrix& noise, const ModeBasis& basis, Eigen::Index j, Eigen::Index k) {
  return cross_mode_term(noise.s, basis, j, k);
}

}  // namespace dipnoise
