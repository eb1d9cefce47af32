#pragma once

#include <cmath>
#include <utility>

namespace qns {

// Golden-section search for the minimum of a unimodal scalar function on
// [lo, hi]. Returns the abscissa of the minimum to within tol.
template <typename F>
double golden_minimize(F&& f, double lo, double hi, double tol) {
  constexpr double kInvPhi = 0.6180339887498949;  // 1/phi
  double a = lo, b = hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

// Golden-section search whose upper bracket grows until the minimum is
// interior (or max_doublings is exhausted). Used for scale parameters with no
// a-priori upper bound (κ², β).
template <typename F>
double golden_minimize_expanding(F&& f, double lo, double hi, double tol,
                                 int max_doublings = 60) {
  for (int i = 0; i < max_doublings; ++i) {
    const double x = golden_minimize(f, lo, hi, tol);
    if (x < hi - 2.0 * tol) return x;
    hi *= 2.0;
  }
  return golden_minimize(f, lo, hi, tol);
}

}  // namespace qns
