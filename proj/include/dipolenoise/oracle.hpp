#pragma once

// Monte-Carlo check of the discretised correlator: draw explicit dipole
// amplitude fields with the kernel's covariance, form E_i = sum_l mu_l g_i(l)
// and average E_i E_j.
//
// Amplitudes per kernel (z standard normal):
//   uncorrelated  mu_l = sqrt(w_l) z_l
//   patch         mu_l = w_l z_p, one z per patch
//   exponential   mu = W L z with F + jitter = L L^T (Cholesky), W = diag(w)
//   sinc, ker0    mu = W Q sqrt(max(Lambda, 0)) z from F = Q Lambda Q^T
// so E[E_i E_j] equals the deterministic sum of noise_matrix on the same grid.
//
// Batch b (OracleOptions::batch samples) draws from mt19937_64 seeded with
// splitmix64(seed + b * 0x9E3779B97F4A7C15); batch partials are reduced in
// a fixed tree, so estimates do not depend on the thread count.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "errors.hpp"
#include "fieldkernels.hpp"
#include "geometry.hpp"
#include "noisecore.hpp"
#include "parallel.hpp"

namespace dipnoise {

struct EnsembleEstimate {
  Eigen::MatrixXd s_hat;
  Eigen::MatrixXd std_error;
  long long n_samples = 0;
  std::uint64_t seed = 0;
  double clipped_fraction = 0;  // spectral mass dropped for indefinite kernels
};

struct OracleOptions {
  bool corrupt_g_sign = false;  // fault injection: flips g of the last ion
  long long batch = 1024;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline constexpr std::size_t kOracleMaxNodes = 4096;

namespace detail {

// Rows: ions. Columns: independent standard normals. E = V z.
inline Eigen::MatrixXd oracle_loading(const Eigen::MatrixXd& g, const QuadratureGrid& grid,
                                      const CorrelationKernel& kernel, double& clipped) {
  const std::size_t m = grid.size();
  const auto mi = static_cast<Eigen::Index>(m);
  Eigen::VectorXd w(mi);
  for (std::size_t l = 0; l < m; ++l) w[static_cast<Eigen::Index>(l)] = grid.weights[l];
  clipped = 0;
  switch (kernel.kind) {
    case KernelKind::uncorrelated:
      return g * w.cwiseSqrt().asDiagonal();
    case KernelKind::patch: {
      int n_patches = 0;
      for (int p : grid.patch_id) n_patches = std::max(n_patches, p + 1);
      Eigen::MatrixXd v = Eigen::MatrixXd::Zero(g.rows(), n_patches);
      for (std::size_t l = 0; l < m; ++l) v.col(grid.patch_id[l]) += w[static_cast<Eigen::Index>(l)] * g.col(static_cast<Eigen::Index>(l));
      return v;
    }
    default: break;
  }
  require(m <= kOracleMaxNodes, "oracle covariance factorisation limited to 4096 nodes");
  const KernelEvaluator f(kernel);
  Eigen::MatrixXd cov(mi, mi);
  for (Eigen::Index l = 0; l < mi; ++l) {
    cov(l, l) = 1.0;
    for (Eigen::Index k = l + 1; k < mi; ++k)
      cov(l, k) = cov(k, l) = f(distance(grid.nodes[static_cast<std::size_t>(l)], grid.nodes[static_cast<std::size_t>(k)]));
  }
  const Eigen::MatrixXd gw = g * w.asDiagonal();
  if (kernel.kind == KernelKind::exponential) {
    cov.diagonal().array() += 1e-10 * cov.trace();
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw NumericalError("covariance is not positive definite after jitter");
    return gw * llt.matrixL().toDenseMatrix();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericalError("covariance eigen-decomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  double neg = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < 0) {
      neg -= lam[i];
      lam[i] = 0;
    }
  }
  clipped = neg / cov.trace();
  if (clipped > 0.01) throw NumericalError("kernel covariance too indefinite: clipped spectral mass above 1% of trace");
  return gw * es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

}  // namespace detail

inline EnsembleEstimate mc_ensemble_noise(const IonConfiguration& ions, const QuadratureGrid& grid,
                                          const DipoleOrientation& orientation, const CorrelationKernel& kernel,
                                          long long n_samples, std::uint64_t seed,
                                          SourceKind source = SourceKind::dipole, const OracleOptions& opt = {}) {
  require(n_samples >= 2, "need at least two samples for a standard error");
  require(opt.batch >= 1, "batch size must be positive");
  ions.validate();
  kernel.validate();
  require(!grid.nodes.empty(), "oracle grid is empty");
  CorrelationKernel k = kernel;
  if (k.kind == KernelKind::kelvin_ker0 && k.ker0_rmin <= 0) k.ker0_rmin = grid.cell_diagonal;
  if (k.kind == KernelKind::patch)
    require(grid.patch_id.size() == grid.size(), "patch kernel needs a grid with a patch map attached");

  Eigen::MatrixXd g = detail::field_table(ions, grid, orientation, source);
  if (opt.corrupt_g_sign) g.row(g.rows() - 1) *= -1.0;
  EnsembleEstimate est;
  est.seed = seed;
  est.n_samples = n_samples;
  const Eigen::MatrixXd v = detail::oracle_loading(g, grid, k, est.clipped_fraction);
  const Eigen::Index n = v.rows(), dim = v.cols();

  struct Partial {
    Eigen::MatrixXd sum, sum_sq;
  };
  const auto batches = static_cast<std::size_t>((n_samples + opt.batch - 1) / opt.batch);
  std::vector<Partial> parts(batches);
  parallel_for_blocks(batches, [&](std::size_t b) {
    const long long begin = static_cast<long long>(b) * opt.batch;
    const long long count = std::min(opt.batch, n_samples - begin);
    std::mt19937_64 rng(splitmix64(seed + static_cast<std::uint64_t>(b) * 0x9E3779B97F4A7C15ull));
    std::normal_distribution<double> normal;
    Partial p{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
    Eigen::VectorXd z(dim), e(n);
    for (long long s = 0; s < count; ++s) {
      for (Eigen::Index i = 0; i < dim; ++i) z[i] = normal(rng);
      e.noalias() = v * z;
      const Eigen::MatrixXd prod = e * e.transpose();
      p.sum += prod;
      p.sum_sq += prod.cwiseProduct(prod);
    }
    parts[b] = std::move(p);
  });
  const Partial total = tree_reduce(std::move(parts), [](const Partial& a, const Partial& b) {
    return Partial{a.sum + b.sum, a.sum_sq + b.sum_sq};
  });
  const double nn = static_cast<double>(n_samples);
  est.s_hat = total.sum / nn;
  const Eigen::MatrixXd var =
      ((total.sum_sq - nn * est.s_hat.cwiseProduct(est.s_hat)) / (nn - 1.0)).cwiseMax(0.0);
  est.std_error = (var / nn).cwiseSqrt();
  return est;
}

struct OracleComparison {
  Eigen::MatrixXd z;  // (s_hat - s) / stderr, upper triangle meaningful
  int entries = 0;
  int within = 0;     // |z| <= threshold
  double max_abs_z = 0;
};

inline OracleComparison compare_to_oracle(const Eigen::MatrixXd& s, const EnsembleEstimate& est,
                                          double threshold = 3.0) {
  require(s.rows() == est.s_hat.rows() && s.cols() == est.s_hat.cols(), "matrix sizes differ");
  OracleComparison c;
  c.z = Eigen::MatrixXd::Zero(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = i; j < s.cols(); ++j) {
      const double se = est.std_error(i, j);
      const double diff = est.s_hat(i, j) - s(i, j);
      const double zz = se > 0 ? diff / se : (diff == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff));
      c.z(i, j) = c.z(j, i) = zz;
      ++c.entries;
      if (std::abs(zz) <= threshold) ++c.within;
      c.max_abs_z = std::max(c.max_abs_z, std::abs(zz));
    }
  }
  return c;
}

}  // namespace dipnoise
