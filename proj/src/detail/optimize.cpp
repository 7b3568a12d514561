#include "detail/optimize.hpp"

#include <algorithm>
#include <cmath>

namespace mmot::detail {

namespace {

constexpr double kInvPhi = 0.6180339887498949;

// Golden-section over [lo, hi] along coordinate k; returns the best point
// seen. f_at mutates and restores x[k].
double golden_axis(const std::function<double(const Vec&)>& f, Vec& x, int k, double lo,
                   double hi, double bracket_tol, double& best_value) {
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  auto eval = [&](double t) {
    x[k] = t;
    return f(x);
  };
  double fc = eval(c);
  double fd = eval(d);
  double best_t = fc <= fd ? c : d;
  double best_f = std::min(fc, fd);
  while (b - a > bracket_tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = eval(d);
    }
    if (fc < best_f) best_f = fc, best_t = c;
    if (fd < best_f) best_f = fd, best_t = d;
  }
  best_value = best_f;
  x[k] = best_t;
  return best_t;
}

}  // namespace

GoldenResult golden_refine(const std::function<double(const Vec&)>& f, Vec start,
                           const Vec& radius, const Space& box, GoldenOptions opt) {
  GoldenResult out;
  Vec x = std::move(start);
  double value = f(x);
  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    double moved = 0.0;
    const double before = value;
    for (int k = 0; k < box.dim; ++k) {
      const double lo = std::max(box.lower[k], x[k] - radius[k]);
      const double hi = std::min(box.upper[k], x[k] + radius[k]);
      if (hi - lo <= opt.bracket_tol) continue;
      const double prev = x[k];
      double axis_best = value;
      golden_axis(f, x, k, lo, hi, opt.bracket_tol, axis_best);
      if (axis_best <= value) {
        value = axis_best;
      } else {
        x[k] = prev;  // keep the incumbent if the line search found nothing better
      }
      moved = std::max(moved, std::abs(x[k] - prev));
    }
    out.sweeps = sweep + 1;
    if (moved < opt.bracket_tol && before - value < 1e-15 * (1.0 + std::abs(value))) break;
  }
  out.point = std::move(x);
  out.value = value;
  return out;
}

}  // namespace mmot::detail
