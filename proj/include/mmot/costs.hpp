#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmot/measures.hpp"

namespace mmot {

enum class CostKind {
  gangbo_swiech,
  heinich,
  chain_bilinear,
  infimal_convolution,
  matching,
  tabulated,
  custom,
};

enum class Smoothness { everywhere_smooth, semiconcave_nonsmooth };

std::string to_string(CostKind kind);

// Outcome of a per-block differentiation. A nondifferentiable result carries
// at least two superdifferential witnesses separated by more than the
// gradient tolerance.
struct GradientResult {
  bool differentiable = true;
  Vec gradient;
  std::vector<Vec> witnesses;
};

// Block boundaries 0 = m_0 < m_1 < ... < m_k = m grouping the m-tuple into
// k consecutive sub-tuples X_1, ..., X_k.
struct BlockPartition {
  std::vector<int> boundaries;

  static BlockPartition singletons(int m);
  static BlockPartition of(std::vector<int> boundaries);

  int blocks() const { return static_cast<int>(boundaries.size()) - 1; }
  int begin(int j) const { return boundaries.at(j); }
  int end(int j) const { return boundaries.at(j + 1); }
  int size(int j) const { return end(j) - begin(j); }
  int block_of(int coordinate) const;
  void validate(int m) const;
};

// Finite stand-in for the minimization manifold Y: a candidate grid plus a
// per-coordinate refinement radius (one grid step). When an exact minimizer
// callback is present it replaces the grid search entirely and certifies a
// unique minimizer everywhere.
struct YDomain {
  Space space;
  std::vector<Vec> grid;
  Vec refine_radius;
  std::function<Vec(const Tuple&)> exact_minimizer;

  static YDomain lattice(Space space, const std::vector<int>& counts);
  static YDomain from_points(Space space, std::vector<Vec> points);
  void validate() const;
};

namespace detail {
class CostImpl;
}

// Immutable evaluator for c(x_1, ..., x_m) with per-block gradient access.
class CostFunction {
 public:
  explicit CostFunction(std::shared_ptr<const detail::CostImpl> impl);

  int arity() const;
  const std::vector<int>& block_dims() const;
  const std::vector<Space>& domains() const;
  CostKind kind() const;
  Smoothness smoothness() const;

  double operator()(const Tuple& x) const;

  const detail::CostImpl& impl() const { return *impl_; }
  std::shared_ptr<const detail::CostImpl> impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<const detail::CostImpl> impl_;
};

double eval_cost(const CostFunction& c, const Tuple& x);

// --- constructors ---------------------------------------------------------

// Scalar function of a d-vector with gradient, optionally Hessian.
struct ScalarFunction {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> grad;
  std::function<Mat(const Vec&)> hess;  // optional
};

// h(s) = -|s|^2
ScalarFunction neg_squared_norm();

// Two-block scalar function g(a, b) with first derivatives and optional
// second-derivative blocks.
struct TwoBlockFunction {
  std::function<double(const Vec&, const Vec&)> value;
  std::function<Vec(const Vec&, const Vec&)> grad_a;
  std::function<Vec(const Vec&, const Vec&)> grad_b;
  std::function<Mat(const Vec&, const Vec&)> mixed_ab;  // optional
  std::function<Mat(const Vec&, const Vec&)> hess_a;    // optional
  std::function<Mat(const Vec&, const Vec&)> hess_b;    // optional
};

TwoBlockFunction zero_two_block(int d);
// g(a, b) = a . b
TwoBlockFunction dot_two_block(int d);

// c(x) = sum_{i<j} |x_i - x_j|^2  (each unordered pair counted once).
CostFunction gangbo_swiech(int m, int d, std::optional<Space> box = {});

// c(x) = h(sum_i x_i). Concavity of h is the caller's responsibility.
CostFunction heinich(int m, int d, ScalarFunction h, std::optional<Space> box = {});

// c(x1, x2, x3) = x1.x2 + x2.x3 + g(x1, x3), all blocks of dimension d.
CostFunction chain_bilinear(TwoBlockFunction g, int d, std::optional<Space> box = {});

// c(X_1, ..., X_k) = min_y sum_j parts[j](X_j, y); each part has the block's
// coordinates followed by y as its final block.
CostFunction infimal_convolution(std::vector<CostFunction> parts, BlockPartition partition,
                                 YDomain y);

// Matching cost: infimal convolution with singleton blocks.
CostFunction matching_cost(std::vector<CostFunction> parts, YDomain y);

// c(a, b) = |a - b|^2, arity 2. The workhorse matching part.
CostFunction quadratic_pair_cost(int d, std::optional<Space> box_a = {},
                                 std::optional<Space> box_b = {});

// Convenience: matching cost with m quadratic parts.
CostFunction quadratic_matching(int m, int d, YDomain y);

// Dense tabulated cost over a product of sorted 1-d node axes; multilinear
// interpolation between nodes, clamped at the box edges. values is row-major
// with the last axis fastest.
CostFunction tabulated_cost(std::vector<std::vector<double>> axes, std::vector<double> values);

// Binary layout: uint64 m, uint64 n_1..n_m, float64 values (all little-endian,
// row-major). Axes supply the node coordinates the file does not carry.
CostFunction tabulated_cost_from_file(const std::string& path,
                                      std::vector<std::vector<double>> axes);
void write_tabulated_file(const std::string& path, const std::vector<int>& shape,
                          const std::vector<double>& values);

// User-supplied evaluator with optional analytic derivatives; finite
// differences fill the gaps.
struct CustomCost {
  std::vector<int> block_dims;
  std::vector<Space> domains;  // optional; unit boxes if empty
  Smoothness smoothness = Smoothness::everywhere_smooth;
  std::function<double(const Tuple&)> value;
  std::function<Vec(const Tuple&, int)> grad_block;                // optional
  std::function<Mat(const Tuple&, int, int)> mixed_hessian;        // optional
};

CostFunction custom_cost(CustomCost spec);

// alpha * c, preserving analytic derivative access.
CostFunction scale_cost(const CostFunction& c, double alpha);

// Structure of an infimal-convolution/matching cost; throw for other kinds.
const std::vector<CostFunction>& infimal_parts(const CostFunction& c);
const BlockPartition& infimal_partition(const CostFunction& c);

// --- evaluation-side operations -------------------------------------------

GradientResult grad_block(const CostFunction& c, const Tuple& x, int block);

struct ArgminCluster {
  Vec point;
  double value = 0.0;
  bool interior = true;
};

// All minimizers of the inner sum of an infimal-convolution cost, clustered
// by spatial tolerance. Throws for other kinds.
std::vector<ArgminCluster> argmin_y(const CostFunction& c, const Tuple& x);

struct CriticalityReport {
  double max_interior_gradient_norm = 0.0;
  int interior_minimizers = 0;
  int boundary_minimizers = 0;
  bool pass = true;  // max interior gradient norm <= tol
};

// |D_y sum_j c_j(X_j, y*)| at interior minimizers; boundary minimizers are
// reported separately, never failed.
CriticalityReport argmin_criticality_check(const CostFunction& c, const Tuple& x, double tol);

// --- numeric policy constants ---------------------------------------------

namespace tolerances {
// Central finite-difference step for first derivatives.
inline double fd_step(double coordinate) { return 1e-5 * (1.0 + std::abs(coordinate)); }
// Step for second differences; eps^(1/4) scaling keeps the roundoff floor
// below the 1e-5 agreement targets.
inline double fd2_step(double coordinate) { return 3e-4 * (1.0 + std::abs(coordinate)); }
// Candidate gradients from distinct argmin clusters further apart than this
// make the point nondifferentiable.
inline constexpr double nondifferentiable_gap = 1e-6;
// Argmin clusters: relative value tolerance and the spatial radius factor in
// units of the grid step.
inline constexpr double argmin_value_tol = 1e-9;
inline constexpr double argmin_cluster_steps = 2.0;
// Golden-section refinement.
inline constexpr int refine_max_sweeps = 30;
inline constexpr double refine_bracket_tol = 1e-10;
}  // namespace tolerances

}  // namespace mmot
