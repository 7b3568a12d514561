#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmot/costs.hpp"
#include "mmot/measures.hpp"

namespace mmot {

// Dense cost values over the product of atom index sets, row-major with the
// last marginal's index fastest.
struct CostTensor {
  std::vector<int> shape;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  std::size_t flat(const std::vector<int>& index) const;
  std::vector<int> unflat(std::size_t flat_index) const;
  double at(const std::vector<int>& index) const { return values[flat(index)]; }
  double max_abs() const;
  void validate() const;
};

// Product-size cap for dense tensors; MMOT_TENSOR_CAP overrides the default.
std::size_t tensor_size_cap();

CostTensor build_cost_tensor(const MarginalSystem& system, const CostFunction& c,
                             std::optional<std::size_t> cap = {});

struct CouplingEntry {
  std::vector<int> index;
  double mass = 0.0;
};

// Sparse transport plan on atom index tuples. Marginal consistency is
// validated at construction against the stated tolerance.
class Coupling {
 public:
  Coupling(MarginalSystem system, std::vector<CouplingEntry> entries,
           double marginal_tol = 1e-9);

  const MarginalSystem& system() const { return system_; }
  const std::vector<CouplingEntry>& entries() const { return entries_; }
  int m() const { return system_.m(); }

  // Mass the plan assigns to atom a of marginal i.
  std::vector<double> marginal(int i) const;
  double max_marginal_residual() const;
  // Support as coordinate tuples, entry order.
  std::vector<Tuple> support_points() const;

 private:
  MarginalSystem system_;
  std::vector<CouplingEntry> entries_;
};

struct SplittingPotentials {
  std::vector<Vec> u;  // one vector per marginal, one value per atom
  std::string anchor = "u_i[0] = 0 for i >= 2; shifts absorbed into u_1";
};

struct SolveReport {
  Coupling coupling;
  SplittingPotentials potentials;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  bool degenerate = false;  // optimal basis carries zero-mass basic variables
};

struct SimplexOptions {
  bool reverse = false;  // reversed greedy start, reversed Bland scans
  int max_iterations = 500000;
};

// Exact vertex solution of the discrete multi-marginal Kantorovich LP by
// revised simplex on the transport polytope (Bland's rule, deterministic).
SolveReport solve_exact_lp(const CostTensor& tensor, const MarginalSystem& system,
                           const SimplexOptions& options = {});

struct EntropicReport {
  Coupling coupling;
  bool converged = false;
  int sweeps = 0;
  double max_marginal_l1 = 0.0;
  double objective = 0.0;
};

// Multi-marginal iterative proportional scaling in the log domain.
// Non-convergence within max_iter sweeps is reported, not thrown.
EntropicReport solve_entropic(const CostTensor& tensor, const MarginalSystem& system,
                              double epsilon, int max_iter, double tol);

enum class Uniqueness { unique, non_unique, inconclusive };

struct UniquenessReport {
  Uniqueness verdict = Uniqueness::inconclusive;
  // Present iff non_unique: two structurally different plans, both optimal
  // for the unperturbed tensor.
  std::vector<Coupling> witnesses;
  int trials = 0;
  int support_matches = 0;
};

// Re-solves under seeded cost perturbations of the given relative magnitude
// and under reversed pivot orderings, and compares optimal supports.
UniquenessReport uniqueness_probe(const CostTensor& tensor, const MarginalSystem& system,
                                  int trials, double magnitude, std::uint64_t seed);

double coupling_objective(const CostTensor& tensor, const Coupling& coupling);

// Independence coupling of the marginals; always feasible.
Coupling product_coupling(const MarginalSystem& system);

void write_coupling_csv(const std::string& path, const Coupling& coupling);

}  // namespace mmot
