#include "mmot/monotonicity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "detail/cost_impl.hpp"

namespace mmot {

namespace {

bool same_tuple(const Tuple& a, const Tuple& b, double tol = 1e-12) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].size() != b[k].size()) return false;
    if ((a[k] - b[k]).lpNorm<Eigen::Infinity>() > tol) return false;
  }
  return true;
}

void check_points_against_cost(const std::vector<Tuple>& points, const CostFunction& c) {
  for (const Tuple& p : points) {
    if (static_cast<int>(p.size()) != c.arity()) {
      throw std::invalid_argument("SupportSet: tuple arity does not match cost");
    }
    for (int i = 0; i < c.arity(); ++i) {
      if (p[i].size() != c.block_dims()[i]) {
        throw std::invalid_argument("SupportSet: block dimension does not match cost");
      }
    }
  }
}

// Odometer over all atom index tuples of a system.
template <typename Fn>
void for_each_index_tuple(const std::vector<int>& shape, Fn&& fn) {
  std::size_t total = 1;
  for (int n : shape) total *= static_cast<std::size_t>(n);
  std::vector<int> idx(shape.size(), 0);
  for (std::size_t f = 0; f < total; ++f) {
    fn(idx);
    int i = static_cast<int>(shape.size()) - 1;
    while (i >= 0 && ++idx[i] == shape[i]) idx[i--] = 0;
  }
}

}  // namespace

SupportSet SupportSet::from_coupling(const Coupling& coupling) {
  SupportSet s;
  s.points = coupling.support_points();
  s.provenance = SupportProvenance::coupling_support;
  s.validate();
  return s;
}

SupportSet SupportSet::of(std::vector<Tuple> points) {
  SupportSet s;
  s.points = std::move(points);
  s.validate();
  return s;
}

void SupportSet::validate() const {
  if (points.empty()) throw std::invalid_argument("SupportSet: empty");
  for (std::size_t a = 0; a < points.size(); ++a) {
    for (std::size_t b = a + 1; b < points.size(); ++b) {
      if (same_tuple(points[a], points[b])) {
        throw std::invalid_argument("SupportSet: duplicate tuples");
      }
    }
  }
}

// --- c-conjugation -------------------------------------------------------------

Vec c_conjugate(const std::vector<Vec>& u, const CostFunction& c, const MarginalSystem& system,
                int i) {
  const int m = system.m();
  if (c.arity() != m) throw std::invalid_argument("c_conjugate: arity mismatch");
  if (i < 0 || i >= m) throw std::invalid_argument("c_conjugate: marginal index out of range");
  if (static_cast<int>(u.size()) != m) {
    throw std::invalid_argument("c_conjugate: one potential vector per marginal expected");
  }
  Vec out = Vec::Constant(system.marginal(i).size(), std::numeric_limits<double>::infinity());
  Tuple x(m);
  for_each_index_tuple(system.shape(), [&](const std::vector<int>& idx) {
    for (int j = 0; j < m; ++j) x[j] = system.marginal(j).atom(idx[j]);
    double v = c(x);
    for (int j = 0; j < m; ++j) {
      if (j != i) v -= u[j][idx[j]];
    }
    out[idx[i]] = std::min(out[idx[i]], v);
  });
  return out;
}

Vec c_conjugate(const std::vector<Vec>& u, const CostTensor& tensor, int i) {
  const int m = static_cast<int>(tensor.shape.size());
  if (i < 0 || i >= m) throw std::invalid_argument("c_conjugate: marginal index out of range");
  if (static_cast<int>(u.size()) != m) {
    throw std::invalid_argument("c_conjugate: one potential vector per marginal expected");
  }
  Vec out = Vec::Constant(tensor.shape[i], std::numeric_limits<double>::infinity());
  std::size_t f = 0;
  for_each_index_tuple(tensor.shape, [&](const std::vector<int>& idx) {
    double v = tensor.values[f++];
    for (int j = 0; j < m; ++j) {
      if (j != i) v -= u[j][idx[j]];
    }
    out[idx[i]] = std::min(out[idx[i]], v);
  });
  return out;
}

// --- splitting certification ------------------------------------------------------

namespace {

std::vector<std::vector<int>> atom_indices_of(const SupportSet& S, const MarginalSystem& system) {
  std::vector<std::vector<int>> out;
  out.reserve(S.points.size());
  for (const Tuple& p : S.points) {
    std::vector<int> idx(system.m());
    for (int i = 0; i < system.m(); ++i) {
      idx[i] = system.marginal(i).find_atom(p[i]);
      if (idx[i] < 0) {
        throw std::invalid_argument("verify_splitting_set: S contains a non-atom point");
      }
    }
    out.push_back(std::move(idx));
  }
  return out;
}

SplittingCheck splitting_check_core(const std::vector<std::vector<int>>& s_idx,
                                    const SplittingPotentials& u,
                                    const std::vector<int>& shape,
                                    const std::function<double(const std::vector<int>&)>& cost,
                                    double tol) {
  std::vector<std::vector<int>> sorted = s_idx;
  std::sort(sorted.begin(), sorted.end());
  SplittingCheck check;
  for_each_index_tuple(shape, [&](const std::vector<int>& idx) {
    double s = 0.0;
    for (std::size_t i = 0; i < shape.size(); ++i) s += u.u[i][idx[i]];
    const double cv = cost(idx);
    check.max_feasibility_violation = std::max(check.max_feasibility_violation, s - cv);
    if (std::binary_search(sorted.begin(), sorted.end(), idx)) {
      check.max_equality_residual = std::max(check.max_equality_residual, std::abs(s - cv));
    }
  });
  check.max_feasibility_violation = std::max(check.max_feasibility_violation, 0.0);
  check.certified =
      check.max_feasibility_violation <= tol && check.max_equality_residual <= tol;
  return check;
}

}  // namespace

SplittingCheck verify_splitting_set(const SupportSet& S, const SplittingPotentials& u,
                                    const CostFunction& c, const MarginalSystem& system,
                                    double tol) {
  const auto s_idx = atom_indices_of(S, system);
  Tuple x(system.m());
  return splitting_check_core(s_idx, u, system.shape(),
                              [&](const std::vector<int>& idx) {
                                for (int j = 0; j < system.m(); ++j) {
                                  x[j] = system.marginal(j).atom(idx[j]);
                                }
                                return c(x);
                              },
                              tol);
}

SplittingCheck verify_splitting_set(const SupportSet& S, const SplittingPotentials& u,
                                    const CostTensor& tensor, const MarginalSystem& system,
                                    double tol) {
  const auto s_idx = atom_indices_of(S, system);
  return splitting_check_core(s_idx, u, tensor.shape,
                              [&](const std::vector<int>& idx) { return tensor.at(idx); }, tol);
}

// --- cyclical monotonicity ---------------------------------------------------------

namespace {

// All permutations of {0..n-1} in lexicographic order; the first is the identity.
std::vector<std::vector<int>> all_permutations(int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

}  // namespace

MonotonicityReport is_cyclically_monotone(const SupportSet& S, const CostFunction& c, int N_max,
                                          std::uint64_t budget) {
  S.validate();
  check_points_against_cost(S.points, c);
  const int n = static_cast<int>(S.points.size());
  const int m = c.arity();

  MonotonicityReport report;
  report.max_subset_checked = std::min(N_max, 1);
  if (n == 1 || N_max < 2) return report;

  for (int N = 2; N <= std::min(N_max, n); ++N) {
    const auto perms = all_permutations(N);
    const std::size_t perm_count = perms.size();

    // Mixing table per subset: f(i, j_2, ..., j_m) with coordinate 1 pinned to
    // the i-th subset point (sigma_1 = Id reduction).
    std::size_t table_size = 1;
    for (int k = 0; k < m; ++k) table_size *= static_cast<std::size_t>(N);
    std::vector<double> table(table_size);

    std::vector<int> comb(N);
    std::iota(comb.begin(), comb.end(), 0);
    bool more = true;
    while (more) {
      // Fill the mixing table.
      {
        std::vector<int> sel(m, 0);
        Tuple x(m);
        for (std::size_t f = 0; f < table_size; ++f) {
          for (int k = 0; k < m; ++k) x[k] = S.points[comb[sel[k]]][k];
          table[f] = c(x);
          report.work += 1;
          int k = m - 1;
          while (k >= 0 && ++sel[k] == N) sel[k--] = 0;
        }
      }
      double base = 0.0;
      for (int i = 0; i < N; ++i) {
        std::size_t f = 0;
        for (int k = 0; k < m; ++k) f = f * N + i;
        base += table[f];
      }

      // All (m-1)-tuples of permutations, skipping the identity tuple.
      std::vector<std::size_t> sigma(m - 1, 0);
      while (true) {
        int k = m - 2;
        while (k >= 0 && ++sigma[k] == perm_count) sigma[k--] = 0;
        if (k < 0) break;
        double sum = 0.0;
        for (int i = 0; i < N; ++i) {
          std::size_t f = static_cast<std::size_t>(i);
          for (int kk = 0; kk < m - 1; ++kk) f = f * N + perms[sigma[kk]][i];
          sum += table[f];
        }
        report.work += 1;
        const double guard = 1e-9 * (1.0 + std::max(std::abs(base), std::abs(sum)));
        if (base - sum > guard) {
          PermutationWitness w;
          w.subset = comb;
          w.permutations.push_back(perms[0]);  // sigma_1 = Id
          for (int kk = 0; kk < m - 1; ++kk) w.permutations.push_back(perms[sigma[kk]]);
          w.base_sum = base;
          w.permuted_sum = sum;
          w.deficit = base - sum;
          report.monotone = false;
          report.violation = std::move(w);
          return report;
        }
        if (report.work >= budget) {
          report.budget_exhausted = true;
          return report;
        }
      }

      // Next combination.
      int pos = N - 1;
      while (pos >= 0 && comb[pos] == n - N + pos) --pos;
      if (pos < 0) {
        more = false;
      } else {
        ++comb[pos];
        for (int q = pos + 1; q < N; ++q) comb[q] = comb[q - 1] + 1;
      }
    }
    report.max_subset_checked = N;
  }
  return report;
}

MonotonicityReport order_two_monotone(const SupportSet& S, const CostFunction& c) {
  return is_cyclically_monotone(S, c, 2);
}

// --- projections ---------------------------------------------------------------------

SupportSet project_support(const Coupling& coupling, const CostFunction& c, int block_j) {
  const auto* inf = dynamic_cast<const detail::InfimalImpl*>(&c.impl());
  if (!inf) {
    throw std::invalid_argument("project_support: cost is not an infimal-convolution kind");
  }
  const BlockPartition& partition = inf->partition();
  if (block_j < 0 || block_j >= partition.blocks()) {
    throw std::invalid_argument("project_support: block index out of range");
  }
  SupportSet projected;
  projected.provenance = SupportProvenance::coupling_support;
  for (const Tuple& x : coupling.support_points()) {
    // Every argmin cluster contributes; dropping clusters could mask
    // violations of the projection lemmas.
    for (const ArgminCluster& cluster : inf->minimize(x).clusters) {
      Tuple p;
      p.reserve(partition.size(block_j) + 1);
      for (int i = partition.begin(block_j); i < partition.end(block_j); ++i) p.push_back(x[i]);
      p.push_back(cluster.point);
      bool dup = false;
      for (const Tuple& q : projected.points) {
        if (same_tuple(p, q)) {
          dup = true;
          break;
        }
      }
      if (!dup) projected.points.push_back(std::move(p));
    }
  }
  return projected;
}

MonotonicityReport projected_monotonicity_check(const Coupling& coupling, const CostFunction& c,
                                                int block_j, const CostFunction& c_j, int N_max,
                                                std::uint64_t budget) {
  const SupportSet projected = project_support(coupling, c, block_j);
  return is_cyclically_monotone(projected, c_j, N_max, budget);
}

// --- conjugate-sweep certification -----------------------------------------------------

MarginalSystem system_from_support(const SupportSet& S, const CostFunction& c) {
  S.validate();
  check_points_against_cost(S.points, c);
  const int m = c.arity();
  std::vector<DiscreteMeasure> measures;
  measures.reserve(m);
  for (int i = 0; i < m; ++i) {
    std::vector<Vec> atoms;
    for (const Tuple& p : S.points) {
      bool seen = false;
      for (const Vec& a : atoms) {
        if ((a - p[i]).lpNorm<Eigen::Infinity>() <= 1e-12) {
          seen = true;
          break;
        }
      }
      if (!seen) atoms.push_back(p[i]);
    }
    const int d = c.block_dims()[i];
    Vec lo(d), hi(d);
    for (int k = 0; k < d; ++k) {
      double mn = atoms.front()[k], mx = atoms.front()[k];
      for (const Vec& a : atoms) {
        mn = std::min(mn, a[k]);
        mx = std::max(mx, a[k]);
      }
      const double pad = 1e-6 * (1.0 + mx - mn);
      lo[k] = mn - pad;
      hi[k] = mx + pad;
    }
    std::vector<double> weights(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
    measures.emplace_back(Space::box(lo, hi), std::move(atoms), std::move(weights));
  }
  return MarginalSystem(std::move(measures));
}

ConjugationResult search_splitting_functions(const SupportSet& S, const CostFunction& c,
                                             int max_sweeps, double tol) {
  const MarginalSystem system = system_from_support(S, c);
  const CostTensor tensor = build_cost_tensor(system, c);
  const int m = system.m();
  const double scale = 1.0 + tensor.max_abs();

  ConjugationResult result;
  result.potentials.u.resize(m);
  for (int i = 0; i < m; ++i) {
    result.potentials.u[i] = Vec::Zero(system.marginal(i).size());
  }

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (int i = 0; i < m; ++i) {
      Vec updated = c_conjugate(result.potentials.u, tensor, i);
      change = std::max(change, (updated - result.potentials.u[i]).lpNorm<Eigen::Infinity>());
      result.potentials.u[i] = std::move(updated);
    }
    result.sweeps = sweep + 1;
    if (change <= tol * scale) {
      result.converged = true;
      break;
    }
  }

  double residual = 0.0;
  Tuple x(m);
  for (const Tuple& p : S.points) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) {
      const int a = system.marginal(i).find_atom(p[i]);
      s += result.potentials.u[i][a];
    }
    for (int i = 0; i < m; ++i) x[i] = p[i];
    residual = std::max(residual, std::abs(s - c(x)));
  }
  result.equality_residual = residual;
  result.certified = residual <= 1e-7 * scale;
  return result;
}

}  // namespace mmot
