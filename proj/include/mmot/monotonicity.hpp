#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mmot/costs.hpp"
#include "mmot/measures.hpp"
#include "mmot/solver.hpp"

namespace mmot {

enum class SupportProvenance { coupling_support, user_supplied };

// Finite set of m-tuples of actual coordinates.
struct SupportSet {
  std::vector<Tuple> points;
  SupportProvenance provenance = SupportProvenance::user_supplied;

  static SupportSet from_coupling(const Coupling& coupling);
  static SupportSet of(std::vector<Tuple> points);
  void validate() const;  // pairwise distinct tuples
};

struct PermutationWitness {
  std::vector<int> subset;                      // indices into the support set
  std::vector<std::vector<int>> permutations;   // one per marginal, sigma_1 = Id
  double base_sum = 0.0;
  double permuted_sum = 0.0;
  double deficit = 0.0;  // base_sum - permuted_sum > 0
};

struct MonotonicityReport {
  bool monotone = true;
  int max_subset_checked = 0;
  std::optional<PermutationWitness> violation;
  std::uint64_t work = 0;  // permutation sums evaluated
  bool budget_exhausted = false;
};

inline constexpr std::uint64_t kDefaultMonotonicityBudget = 10'000'000;

// u_i[a] = min over tuples with x_i fixed to atom a of c - sum_{j != i} u_j.
// The slot u[i] of the input is ignored.
Vec c_conjugate(const std::vector<Vec>& u, const CostFunction& c, const MarginalSystem& system,
                int i);
Vec c_conjugate(const std::vector<Vec>& u, const CostTensor& tensor, int i);

struct SplittingCheck {
  bool certified = false;
  double max_equality_residual = 0.0;     // on S
  double max_feasibility_violation = 0.0;  // max(sum u - c, 0) over all tuples
};

// Certified iff sum_i u_i <= c + tol on every atom tuple with equality
// within tol on S. S must consist of atom tuples of the system.
SplittingCheck verify_splitting_set(const SupportSet& S, const SplittingPotentials& u,
                                    const CostFunction& c, const MarginalSystem& system,
                                    double tol);
SplittingCheck verify_splitting_set(const SupportSet& S, const SplittingPotentials& u,
                                    const CostTensor& tensor, const MarginalSystem& system,
                                    double tol);

// Exhaustive check of the permutation inequalities over all subsets of size
// N <= N_max with sigma_1 = Id. Budget exhaustion marks partial coverage.
MonotonicityReport is_cyclically_monotone(const SupportSet& S, const CostFunction& c, int N_max,
                                          std::uint64_t budget = kDefaultMonotonicityBudget);

MonotonicityReport order_two_monotone(const SupportSet& S, const CostFunction& c);

// Projects a coupling solved against an infimal-convolution cost onto block j
// (all argmin clusters included) and checks c_j-cyclical monotonicity with y
// as the final coordinate.
MonotonicityReport projected_monotonicity_check(const Coupling& coupling, const CostFunction& c,
                                                int block_j, const CostFunction& c_j, int N_max,
                                                std::uint64_t budget = kDefaultMonotonicityBudget);

// Builds the projected set used by projected_monotonicity_check.
SupportSet project_support(const Coupling& coupling, const CostFunction& c, int block_j);

struct ConjugationResult {
  SplittingPotentials potentials;
  bool certified = false;   // equality holds on S at the fixed point
  double equality_residual = 0.0;
  int sweeps = 0;
  bool converged = false;
};

// Alternating c-conjugate sweeps to a fixed point over the atoms appearing in
// S. A heuristic certifier: a fixed point that fails equality is evidence
// against the splitting property, not a proof.
ConjugationResult search_splitting_functions(const SupportSet& S, const CostFunction& c,
                                             int max_sweeps = 200, double tol = 1e-10);

// Pseudo-system whose marginals are the distinct i-th coordinates of S with
// uniform weights; the weights are irrelevant to splitting certificates.
MarginalSystem system_from_support(const SupportSet& S, const CostFunction& c);

}  // namespace mmot
