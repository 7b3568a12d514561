#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mmot/costs.hpp"
#include "mmot/measures.hpp"
#include "mmot/solver.hpp"

namespace mmot {

enum class HessianMode { automatic, finite_difference };

// Slice of a coupling over one first-marginal atom, with the gradient of the
// cost in the first variable at every partner.
struct SupportSection {
  int x1_index = 0;
  Vec x1;
  std::vector<Tuple> partners;  // (m-1)-tuples of coordinates
  std::vector<GradientResult> gradients;
};

SupportSection section_of_support(const Coupling& coupling, const CostFunction& c, int x1_index);

struct GraphReport {
  bool is_graph = false;
  std::vector<int> multivalued;  // x1 atoms with more than one partner tuple
  // x1 atom -> partner index tuple; filled iff is_graph.
  std::vector<std::vector<int>> map;
};

GraphReport graph_check(const Coupling& coupling);

struct TwistCollision {
  int x1_index = 0;
  int partner_a = 0;
  int partner_b = 0;
  double gradient_distance = 0.0;
  double partner_distance = 0.0;
};

struct TwistReport {
  int sections_audited = 0;
  int pairs_compared = 0;
  int nondifferentiable_excluded = 0;
  std::vector<TwistCollision> collisions;
  bool pass = true;  // no collisions among differentiable partners
};

// Audits injectivity of partners -> D_{x1}c on every section of the support.
// A pass is evidence for this support, not a proof of the twist condition.
TwistReport check_twist_on_support(const CostFunction& c, const Coupling& coupling,
                                   double grad_tol = 1e-6, double point_tol = 1e-8);

// D^2_{x_i x_j} c as a dims[i] x dims[j] matrix; analytic when the kind
// provides it, otherwise central second differences (infimal kinds difference
// their envelope gradients and propagate nondifferentiability as an error).
Mat mixed_hessian(const CostFunction& c, const Tuple& x, int i, int j,
                  HessianMode mode = HessianMode::automatic);

// Seeded uniform tuples in the cost's domain boxes.
std::vector<Tuple> sample_domain_tuples(const CostFunction& c, int count, std::uint64_t seed);

struct NondegeneracyReport {
  double min_abs_det = 0.0;
  int samples = 0;
  bool pass = false;  // min |det D^2_{x1 xm} c| > threshold on all samples
};

NondegeneracyReport nondegeneracy_check(const CostFunction& c, const std::vector<Tuple>& samples,
                                        double threshold = 1e-8,
                                        HessianMode mode = HessianMode::automatic);

struct OneMTwistReport {
  bool injective = true;
  int compared = 0;
  int nondifferentiable_excluded = 0;
  std::vector<std::pair<Vec, Vec>> colliding_pairs;  // x_m values
  double min_gradient_distance = 0.0;  // closest gradients among distinct grid points
};

// Injectivity of x_m -> D_{x1}c over a grid, the other coordinates fixed to
// the base tuple (its x_m slot is ignored).
OneMTwistReport one_m_twist_check(const CostFunction& c, const Tuple& base,
                                  const std::vector<Vec>& xm_grid, double grad_tol = 1e-6,
                                  double point_tol = 1e-8);

Mat tensor_S(const CostFunction& c, const Tuple& ybar, HessianMode mode = HessianMode::automatic);

// Anchors: one tuple per middle index i = 2..m-1 (vector position i-2),
// each with its i-th coordinate pinned to ybar's.
Mat tensor_H(const CostFunction& c, const Tuple& ybar, const std::vector<Tuple>& anchors,
             HessianMode mode = HessianMode::automatic);

struct TensorReport {
  Tuple base;
  std::vector<Tuple> anchors;
  Mat S, H, T;
  double pre_symmetrization_asymmetry = 0.0;
  Vec eigenvalues_T;      // ascending
  bool negative_definite = false;
};

struct TensorScanOptions {
  HessianMode mode = HessianMode::automatic;
  double eigenvalue_margin = 1e-10;
};

struct TensorScan {
  std::vector<TensorReport> reports;
  bool negative_on_samples = false;  // every sampled T has max eigenvalue < -margin
  double max_eigenvalue = 0.0;
  double min_eigenvalue = 0.0;
  int skipped_singular = 0;
};

// Seeded sampling audit of the differential conditions; the verdict claims
// "no violation found in these samples", never a proof.
TensorScan tensor_T_scan(const CostFunction& c, int base_samples, int anchors_per_base,
                         std::uint64_t seed, const TensorScanOptions& options = {});

struct YSectionPoint {
  std::vector<Vec> middles;  // x_2, ..., x_{m-1}
  Vec xm;
  double residual = 0.0;
};

struct YSectionSample {
  Vec x1;
  Vec p1;
  std::vector<YSectionPoint> samples;
  int attempted = 0;
};

// Approximates the set of middle tuples admitting an x_m with
// D_{x1}c = p1, by grid search plus refinement over x_m.
YSectionSample y_section_sample(const CostFunction& c, const Vec& x1, const Vec& p1,
                                const std::vector<std::vector<Vec>>& middle_grid,
                                const YDomain& xm_domain, double residual_tol);

struct ConvexityProbe {
  int pairs_tested = 0;
  int midpoint_hits = 0;
  bool advisory_convex = true;  // all tested midpoints stayed inside the section
};

// Midpoint membership heuristic on pairs of section samples. Advisory only.
ConvexityProbe convexity_probe(const YSectionSample& sample, const CostFunction& c,
                               const YDomain& xm_domain, double residual_tol, int max_pairs,
                               std::uint64_t seed);

}  // namespace mmot
