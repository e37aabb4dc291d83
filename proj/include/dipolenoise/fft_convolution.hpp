#pragma once

// Linear convolution of lattice fields with a translation-invariant kernel,
// done with FFTW on a zero-padded periodic box. Used to evaluate the 4D pair
// sums of correlated kernels in O(M log M).

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

#include "errors.hpp"

namespace dipnoise {

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (!p) throw NumericalError("fftw_malloc failed");
  return FftwBuffer<T>(p);
}

// Smallest size >= n of the form 2^a 3^b 5^c.
inline int fft_friendly(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

}  // namespace detail

/// Convolves nx-by-nz fields (row-major, x major) with a kernel given as a
/// function of lattice offset (di, dk), |di| < nx, |dk| < nz. The kernel
/// spectrum is computed once per instance.
class LatticeConvolver {
 public:
  LatticeConvolver(int nx, int nz, const std::function<double(int, int)>& kernel)
      : nx_(nx), nz_(nz) {
    require(nx > 0 && nz > 0, "lattice must be non-empty");
    px_ = detail::fft_friendly(2 * nx - 1);
    pz_ = detail::fft_friendly(2 * nz - 1);
    const std::size_t real_n = static_cast<std::size_t>(px_) * pz_;
    const std::size_t cplx_n = static_cast<std::size_t>(px_) * (pz_ / 2 + 1);
    real_ = detail::fftw_buffer<double>(real_n);
    spec_ = detail::fftw_buffer<fftw_complex>(cplx_n);
    kernel_spec_.resize(cplx_n);
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      forward_ = fftw_plan_dft_r2c_2d(px_, pz_, real_.get(), spec_.get(), FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_c2r_2d(px_, pz_, spec_.get(), real_.get(), FFTW_ESTIMATE);
    }
    if (!forward_ || !backward_) throw NumericalError("FFTW planning failed");

    std::fill(real_.get(), real_.get() + real_n, 0.0);
    for (int di = -(nx - 1); di <= nx - 1; ++di) {
      int pi = di < 0 ? di + px_ : di;
      for (int dk = -(nz - 1); dk <= nz - 1; ++dk) {
        int pk = dk < 0 ? dk + pz_ : dk;
        real_[static_cast<std::size_t>(pi) * pz_ + pk] = kernel(di, dk);
      }
    }
    fftw_execute(forward_);
    for (std::size_t i = 0; i < cplx_n; ++i) kernel_spec_[i] = {spec_[i][0], spec_[i][1]};
  }

  ~LatticeConvolver() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (forward_) fftw_destroy_plan(forward_);
    if (backward_) fftw_destroy_plan(backward_);
  }

  LatticeConvolver(const LatticeConvolver&) = delete;
  LatticeConvolver& operator=(const LatticeConvolver&) = delete;

  /// out[i,k] = sum_{i',k'} K(i - i', k - k') field[i',k'].
  std::vector<double> apply(const std::vector<double>& field) {
    require(field.size() == static_cast<std::size_t>(nx_) * nz_, "field size mismatch");
    const std::size_t real_n = static_cast<std::size_t>(px_) * pz_;
    const std::size_t cplx_n = static_cast<std::size_t>(px_) * (pz_ / 2 + 1);
    std::fill(real_.get(), real_.get() + real_n, 0.0);
    for (int i = 0; i < nx_; ++i)
      for (int k = 0; k < nz_; ++k)
        real_[static_cast<std::size_t>(i) * pz_ + k] = field[static_cast<std::size_t>(i) * nz_ + k];
    fftw_execute(forward_);
    for (std::size_t i = 0; i < cplx_n; ++i) {
      std::complex<double> v{spec_[i][0], spec_[i][1]};
      v *= kernel_spec_[i];
      spec_[i][0] = v.real();
      spec_[i][1] = v.imag();
    }
    fftw_execute(backward_);
    const double scale = 1.0 / static_cast<double>(real_n);
    std::vector<double> out(field.size());
    for (int i = 0; i < nx_; ++i)
      for (int k = 0; k < nz_; ++k)
        out[static_cast<std::size_t>(i) * nz_ + k] = real_[static_cast<std::size_t>(i) * pz_ + k] * scale;
    return out;
  }

 private:
  int nx_, nz_, px_ = 0, pz_ = 0;
  detail::FftwBuffer<double> real_;
  detail::FftwBuffer<fftw_complex> spec_;
  std::vector<std::complex<double>> kernel_spec_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace dipnoise
