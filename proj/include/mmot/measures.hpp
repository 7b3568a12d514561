#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace mmot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// One point per marginal block.
using Tuple = std::vector<Vec>;

// Axis-aligned box domain standing in for one marginal space M_i.
struct Space {
  int dim = 1;
  Vec lower;
  Vec upper;
  std::string label;

  static Space box(int dim, double lo, double hi, std::string label = {});
  static Space box(Vec lo, Vec hi, std::string label = {});

  double width(int k) const { return upper[k] - lower[k]; }
  double diameter() const;
  bool contains(const Vec& p) const;
  void validate() const;
};

// Weighted atom cloud with strictly positive weights summing to one.
// Atoms are pairwise distinct; all invariants are enforced at construction.
class DiscreteMeasure {
 public:
  DiscreteMeasure(Space space, std::vector<Vec> atoms, std::vector<double> weights);

  const Space& space() const { return space_; }
  int size() const { return static_cast<int>(atoms_.size()); }
  const Vec& atom(int i) const { return atoms_.at(i); }
  const std::vector<Vec>& atoms() const { return atoms_; }
  double weight(int i) const { return weights_.at(i); }
  const std::vector<double>& weights() const { return weights_; }

  // Index of the atom equal to p (within tol per coordinate), -1 if none.
  int find_atom(const Vec& p, double tol = 1e-12) const;

 private:
  Space space_;
  std::vector<Vec> atoms_;
  std::vector<double> weights_;
};

// Validating constructor mirroring the building blocks above.
DiscreteMeasure new_discrete_measure(const Space& space, std::vector<Vec> atoms,
                                     std::vector<double> weights);

// n atoms uniform in the box, positive weights normalized to one. Pure
// function of (space, n, seed): the same arguments give bit-identical output.
DiscreteMeasure random_generic_measure(const Space& space, int n, std::uint64_t seed);

// Problem data bundle: m >= 2 validated marginals.
class MarginalSystem {
 public:
  explicit MarginalSystem(std::vector<DiscreteMeasure> measures);

  int m() const { return static_cast<int>(measures_.size()); }
  const DiscreteMeasure& marginal(int i) const { return measures_.at(i); }
  const std::vector<DiscreteMeasure>& marginals() const { return measures_; }
  std::vector<int> shape() const;

  // Coordinates of the atom tuple at the given index tuple.
  Tuple tuple_at(const std::vector<int>& index) const;

 private:
  std::vector<DiscreteMeasure> measures_;
};

// m one-dimensional marginals with independently sampled atoms but a single
// shared weight profile attached in sorted-atom order. For costs that favor
// comonotone alignment this makes a Monge (graph) coupling feasible, which a
// system of independently weighted marginals generically is not.
MarginalSystem random_aligned_system(const Space& space, int m, int n, std::uint64_t seed);

}  // namespace mmot
