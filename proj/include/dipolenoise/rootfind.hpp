#pragma once

#include <cmath>
#include <utility>

#include "errors.hpp"

namespace dipnoise {

struct Bracket {
  double lo, hi;
  double f_lo, f_hi;
};

/// Bisects a sign change of f on [lo, hi] until hi - lo < tol. f(lo) and
/// f(hi) must be finite with opposite signs (or one of them zero).
template <class F>
Bracket bisect(F&& f, double lo, double hi, double f_lo, double f_hi, double tol, int max_iter = 200) {
  require(lo < hi && tol > 0, "bisection needs an ordered bracket and a positive tolerance");
  if (!std::isfinite(f_lo) || !std::isfinite(f_hi)) throw NumericalError("non-finite value at bracket end");
  require(f_lo == 0 || f_hi == 0 || (f_lo < 0) != (f_hi < 0), "bracket does not straddle a sign change");
  if (f_lo == 0) return {lo, lo, f_lo, f_lo};
  if (f_hi == 0) return {hi, hi, f_hi, f_hi};
  for (int it = 0; it < max_iter && hi - lo >= tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (!std::isfinite(fm)) throw NumericalError("non-finite value during bisection");
    if (fm == 0) return {mid, mid, fm, fm};
    if ((fm < 0) == (f_lo < 0)) {
      lo = mid;
      f_lo = fm;
    } else {
      hi = mid;
      f_hi = fm;
    }
  }
  return {lo, hi, f_lo, f_hi};
}

}  // namespace dipnoise
