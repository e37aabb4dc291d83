#pragma once

// Normal-mode bases for two ions and for equally spaced axial chains.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "constants.hpp"
#include "errors.hpp"

namespace dipnoise {

enum class Parity { even, odd, none };

inline std::string_view to_string(Parity p) {
  switch (p) {
    case Parity::even: return "even";
    case Parity::odd: return "odd";
    case Parity::none: return "none";
  }
  return "?";
}

/// Rows of `f` are the modes: Q_j = sum_k f(j, k) x_k. `frequencies` is
/// empty for geometry-only bases; otherwise sorted ascending.
struct ModeBasis {
  Eigen::MatrixXd f;
  std::vector<double> frequencies;
  std::vector<Parity> parity;

  Eigen::Index size() const { return f.rows(); }
};

inline constexpr double kParityTolerance = 1e-6;

/// Mirror symmetry of a mode vector about the chain centre: even if the
/// reversed vector equals itself, odd if it equals its negative (both to
/// 1e-6 relative to the largest component), none otherwise.
inline Parity mode_parity(const Eigen::VectorXd& v) {
  require(v.size() >= 2, "mode vector needs at least two entries");
  const Eigen::VectorXd mirror = v.reverse();
  const double scale = std::max(v.cwiseAbs().maxCoeff(), 1e-300);
  if ((mirror - v).cwiseAbs().maxCoeff() <= kParityTolerance * scale) return Parity::even;
  if ((mirror + v).cwiseAbs().maxCoeff() <= kParityTolerance * scale) return Parity::odd;
  return Parity::none;
}

/// COM row (1, 1)/sqrt2 then stretch row (1, -1)/sqrt2.
inline ModeBasis two_ion_basis() {
  ModeBasis b;
  const double h = 1.0 / std::numbers::sqrt2;
  b.f.resize(2, 2);
  b.f << h, h, h, -h;
  b.parity = {Parity::even, Parity::odd};
  return b;
}

namespace detail {

// Orthonormal basis (rank by pivoted QR) of the range of (block + sign * mirrored) / 2,
// i.e. the even (sign = +1) or odd (sign = -1) part of a set of columns.
inline Eigen::MatrixXd column_basis_of_projection(const Eigen::MatrixXd& block,
                                                  const Eigen::MatrixXd& mirrored, double sign) {
  const Eigen::MatrixXd p = 0.5 * (block + sign * mirrored);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(p);
  qr.setThreshold(1e-8);
  const Eigen::Index r = qr.rank();
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(p.rows(), r);
  return q;
}

// Fixes the overall sign: first component above 1e-9 in magnitude is positive.
inline void canonical_sign(Eigen::Ref<Eigen::VectorXd> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-9) {
      if (v[i] < 0) v = -v;
      return;
    }
  }
}

}  // namespace detail

/// Diagonalises a symmetric stiffness matrix K (units of mass * frequency^2).
/// Modes come out sorted by ascending eigenvalue with Omega_j = sqrt(lambda_j / m).
/// Inside a cluster of degenerate eigenvalues the vectors are rotated onto
/// the even/odd subspaces of the mirror map when that split is exact (even
/// vectors first), so parity labels stay defined.
inline ModeBasis normal_modes(const Eigen::MatrixXd& stiffness, double mass) {
  require(stiffness.rows() == stiffness.cols() && stiffness.rows() >= 1, "stiffness must be square");
  require(mass > 0, "mass must be positive");
  const Eigen::Index n = stiffness.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(stiffness);
  if (es.info() != Eigen::Success) throw NumericalError("eigen-decomposition of stiffness failed");
  Eigen::VectorXd lambda = es.eigenvalues();
  Eigen::MatrixXd vecs = es.eigenvectors();  // columns

  const double knorm = std::max(stiffness.norm(), 1e-300);
  const double degen_tol = 1e-9 * knorm;
  for (Eigen::Index start = 0; start < n;) {
    Eigen::Index end = start + 1;
    while (end < n && lambda[end] - lambda[start] <= degen_tol) ++end;
    const Eigen::Index k = end - start;
    if (k > 1) {
      Eigen::MatrixXd block = vecs.middleCols(start, k);
      Eigen::MatrixXd mirrored = block.colwise().reverse();
      Eigen::MatrixXd even = detail::column_basis_of_projection(block, mirrored, +1.0);
      Eigen::MatrixXd odd = detail::column_basis_of_projection(block, mirrored, -1.0);
      if (even.cols() + odd.cols() == k) {
        vecs.middleCols(start, even.cols()) = even;
        vecs.middleCols(start + even.cols(), odd.cols()) = odd;
      }
    }
    start = end;
  }

  ModeBasis b;
  b.f = vecs.transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd row = b.f.row(j).transpose();
    detail::canonical_sign(row);
    b.f.row(j) = row.transpose();
    if (lambda[j] < -degen_tol) throw NumericalError("stiffness matrix is not positive semi-definite");
    b.frequencies.push_back(std::sqrt(std::max(lambda[j], 0.0) / mass));
    b.parity.push_back(n >= 2 ? mode_parity(row) : Parity::none);
  }
  return b;
}

/// Axial modes of N equally spaced ions (spacing l, metres) in a harmonic
/// well of angular frequency omega0, coupled by Coulomb repulsion:
///   K_ii = m omega0^2 + sum_j kappa_ij,  K_ij = -kappa_ij,
///   kappa_ij = 2 q^2 / (4 pi eps0 |x_i - x_j|^3).
/// `coupling` scales every kappa (1 = physical) so the strong/weak coupling
/// regime can be dialled independently of l.
inline ModeBasis chain_modes(int n_ions, double spacing, double omega0,
                             double charge = phys::kElementaryCharge,
                             double mass = phys::kCa40IonMass, double coupling = 1.0) {
  require(n_ions >= 2, "a chain needs at least two ions");
  require(spacing > 0 && std::isfinite(spacing), "chain spacing must be positive");
  require(omega0 > 0 && std::isfinite(omega0), "trap frequency must be positive");
  require(charge > 0 && mass > 0, "charge and mass must be positive");
  require(coupling >= 0 && std::isfinite(coupling), "coupling scale must be non-negative");
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n_ions, n_ions);
  for (int i = 0; i < n_ions; ++i) {
    k(i, i) += mass * omega0 * omega0;
    for (int j = 0; j < n_ions; ++j) {
      if (i == j) continue;
      const double r = std::abs(i - j) * spacing;
      const double kappa = coupling * 2.0 * charge * charge * phys::kCoulombConstant / (r * r * r);
      k(i, j) -= kappa;
      k(i, i) += kappa;
    }
  }
  return normal_modes(k, mass);
}

/// Fixed-end standing waves f(j, k) = sqrt(2/(N+1)) sin(pi j k / (N+1)),
/// j, k = 1..N: the idealised strongly coupled chain whose modes are all
/// sinusoidal. Odd j is mirror-even. No frequencies.
inline ModeBasis standing_wave_modes(int n_ions) {
  require(n_ions >= 2, "a chain needs at least two ions");
  ModeBasis b;
  b.f.resize(n_ions, n_ions);
  const double norm = std::sqrt(2.0 / (n_ions + 1));
  for (int j = 1; j <= n_ions; ++j)
    for (int k = 1; k <= n_ions; ++k)
      b.f(j - 1, k - 1) = norm * std::sin(std::numbers::pi * j * k / (n_ions + 1));
  for (int j = 0; j < n_ions; ++j) b.parity.push_back(mode_parity(b.f.row(j).transpose()));
  return b;
}

}  // namespace dipnoise
