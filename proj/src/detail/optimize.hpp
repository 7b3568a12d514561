#pragma once

#include <functional>

#include "mmot/measures.hpp"

namespace mmot::detail {

struct GoldenOptions {
  int max_sweeps = 30;
  double bracket_tol = 1e-10;
};

struct GoldenResult {
  Vec point;
  double value = 0.0;
  int sweeps = 0;
};

// Coordinate-wise golden-section descent: each sweep minimizes f along every
// coordinate over a bracket of the given radius around the current point,
// clamped to the box. Stops when a full sweep moves the point by less than
// bracket_tol and improves the value by less than 1e-15*(1+|value|).
GoldenResult golden_refine(const std::function<double(const Vec&)>& f, Vec start,
                           const Vec& radius, const Space& box, GoldenOptions opt = {});

}  // namespace mmot::detail
