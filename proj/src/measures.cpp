#include "mmot/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "detail/rng.hpp"

namespace mmot {

Space Space::box(int dim, double lo, double hi, std::string label) {
  Space s;
  s.dim = dim;
  s.lower = Vec::Constant(dim, lo);
  s.upper = Vec::Constant(dim, hi);
  s.label = std::move(label);
  s.validate();
  return s;
}

Space Space::box(Vec lo, Vec hi, std::string label) {
  Space s;
  s.dim = static_cast<int>(lo.size());
  s.lower = std::move(lo);
  s.upper = std::move(hi);
  s.label = std::move(label);
  s.validate();
  return s;
}

double Space::diameter() const { return (upper - lower).norm(); }

bool Space::contains(const Vec& p) const {
  if (p.size() != dim) return false;
  for (int k = 0; k < dim; ++k) {
    if (p[k] < lower[k] || p[k] > upper[k]) return false;
  }
  return true;
}

void Space::validate() const {
  if (dim < 1) throw std::invalid_argument("Space: dim must be >= 1");
  if (lower.size() != dim || upper.size() != dim) {
    throw std::invalid_argument("Space: bound vectors must have length dim");
  }
  for (int k = 0; k < dim; ++k) {
    if (!(lower[k] < upper[k])) {
      throw std::invalid_argument("Space: lower[k] < upper[k] required");
    }
  }
}

DiscreteMeasure::DiscreteMeasure(Space space, std::vector<Vec> atoms,
                                 std::vector<double> weights)
    : space_(std::move(space)), atoms_(std::move(atoms)), weights_(std::move(weights)) {
  space_.validate();
  if (atoms_.empty()) throw std::invalid_argument("DiscreteMeasure: no atoms");
  if (atoms_.size() != weights_.size()) {
    throw std::invalid_argument("DiscreteMeasure: atoms and weights length mismatch");
  }
  for (const Vec& a : atoms_) {
    if (a.size() != space_.dim) {
      throw std::invalid_argument("DiscreteMeasure: atom dimension mismatch");
    }
    if (!space_.contains(a)) {
      throw std::invalid_argument("DiscreteMeasure: atom outside box");
    }
  }
  for (double w : weights_) {
    if (!(w > 0.0)) {
      throw std::invalid_argument(w < 0.0 ? "DiscreteMeasure: negative weight"
                                          : "DiscreteMeasure: zero-weight atoms unsupported");
    }
  }
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    for (std::size_t j = i + 1; j < atoms_.size(); ++j) {
      if (atoms_[i] == atoms_[j]) {
        throw std::invalid_argument("DiscreteMeasure: duplicate atoms");
      }
    }
  }
  const double sum = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("DiscreteMeasure: weight sum outside [1-1e-9, 1+1e-9]");
  }
  for (double& w : weights_) w /= sum;
}

int DiscreteMeasure::find_atom(const Vec& p, double tol) const {
  for (int i = 0; i < size(); ++i) {
    if ((atoms_[i] - p).lpNorm<Eigen::Infinity>() <= tol) return i;
  }
  return -1;
}

DiscreteMeasure new_discrete_measure(const Space& space, std::vector<Vec> atoms,
                                     std::vector<double> weights) {
  return DiscreteMeasure(space, std::move(atoms), std::move(weights));
}

DiscreteMeasure random_generic_measure(const Space& space, int n, std::uint64_t seed) {
  space.validate();
  if (n < 1) throw std::invalid_argument("random_generic_measure: n must be >= 1");
  detail::Rng rng(seed);
  const double min_gap = 1e-9 * (1.0 + space.diameter());

  std::vector<Vec> atoms;
  atoms.reserve(n);
  int attempts = 0;
  while (static_cast<int>(atoms.size()) < n) {
    if (++attempts > 1000 * n) {
      throw std::runtime_error("random_generic_measure: could not place distinct atoms");
    }
    Vec p(space.dim);
    for (int k = 0; k < space.dim; ++k) p[k] = rng.uniform(space.lower[k], space.upper[k]);
    bool clash = false;
    for (const Vec& q : atoms) {
      if ((p - q).lpNorm<Eigen::Infinity>() < min_gap) {
        clash = true;
        break;
      }
    }
    if (!clash) atoms.push_back(std::move(p));
  }

  std::vector<double> weights(n);
  double sum = 0.0;
  for (double& w : weights) {
    w = 0.2 + rng.uniform01();
    sum += w;
  }
  for (double& w : weights) w /= sum;
  return DiscreteMeasure(space, std::move(atoms), std::move(weights));
}

MarginalSystem::MarginalSystem(std::vector<DiscreteMeasure> measures)
    : measures_(std::move(measures)) {
  if (measures_.size() < 2) {
    throw std::invalid_argument("MarginalSystem: at least two marginals required");
  }
}

std::vector<int> MarginalSystem::shape() const {
  std::vector<int> s(measures_.size());
  for (std::size_t i = 0; i < measures_.size(); ++i) s[i] = measures_[i].size();
  return s;
}

Tuple MarginalSystem::tuple_at(const std::vector<int>& index) const {
  if (index.size() != measures_.size()) {
    throw std::invalid_argument("MarginalSystem: index tuple arity mismatch");
  }
  Tuple x(measures_.size());
  for (std::size_t i = 0; i < measures_.size(); ++i) x[i] = measures_[i].atom(index[i]);
  return x;
}

MarginalSystem random_aligned_system(const Space& space, int m, int n, std::uint64_t seed) {
  if (space.dim != 1) {
    throw std::invalid_argument("random_aligned_system: only dim-1 spaces have a sort order");
  }
  if (m < 2) throw std::invalid_argument("random_aligned_system: m >= 2 required");
  detail::Rng rng(seed);

  // One weight profile shared by all marginals.
  detail::Rng wrng = rng.derive(0);
  std::vector<double> profile(n);
  double sum = 0.0;
  for (double& w : profile) {
    w = 0.2 + wrng.uniform01();
    sum += w;
  }
  for (double& w : profile) w /= sum;

  std::vector<DiscreteMeasure> measures;
  measures.reserve(m);
  for (int i = 0; i < m; ++i) {
    DiscreteMeasure base = random_generic_measure(space, n, rng.derive(i + 1).bits());
    std::vector<Vec> atoms = base.atoms();
    std::sort(atoms.begin(), atoms.end(),
              [](const Vec& a, const Vec& b) { return a[0] < b[0]; });
    measures.emplace_back(space, std::move(atoms), profile);
  }
  return MarginalSystem(std::move(measures));
}

}  // namespace mmot
