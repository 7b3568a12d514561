#include "mmot/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "detail/rng.hpp"

namespace mmot {

// --- CostTensor ---------------------------------------------------------------

std::size_t CostTensor::flat(const std::vector<int>& index) const {
  if (index.size() != shape.size()) throw std::invalid_argument("CostTensor: index arity");
  std::size_t f = 0;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (index[i] < 0 || index[i] >= shape[i]) {
      throw std::out_of_range("CostTensor: index out of range");
    }
    f = f * static_cast<std::size_t>(shape[i]) + static_cast<std::size_t>(index[i]);
  }
  return f;
}

std::vector<int> CostTensor::unflat(std::size_t flat_index) const {
  std::vector<int> index(shape.size());
  for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
    index[i] = static_cast<int>(flat_index % static_cast<std::size_t>(shape[i]));
    flat_index /= static_cast<std::size_t>(shape[i]);
  }
  return index;
}

double CostTensor::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

void CostTensor::validate() const {
  std::size_t total = 1;
  for (int n : shape) {
    if (n < 1) throw std::invalid_argument("CostTensor: nonpositive axis");
    total *= static_cast<std::size_t>(n);
  }
  if (total != values.size()) throw std::invalid_argument("CostTensor: size mismatch");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("CostTensor: non-finite value");
  }
}

std::size_t tensor_size_cap() {
  if (const char* env = std::getenv("MMOT_TENSOR_CAP")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return 10'000'000;
}

CostTensor build_cost_tensor(const MarginalSystem& system, const CostFunction& c,
                             std::optional<std::size_t> cap) {
  const int m = system.m();
  if (c.arity() != m) throw std::invalid_argument("build_cost_tensor: arity mismatch");
  for (int i = 0; i < m; ++i) {
    if (c.block_dims()[i] != system.marginal(i).space().dim) {
      throw std::invalid_argument("build_cost_tensor: block dimension mismatch");
    }
  }
  const std::size_t limit = cap.value_or(tensor_size_cap());
  std::size_t total = 1;
  for (int i = 0; i < m; ++i) {
    const std::size_t n = static_cast<std::size_t>(system.marginal(i).size());
    if (total > limit / n) {
      throw std::invalid_argument("build_cost_tensor: product size exceeds cap");
    }
    total *= n;
  }

  CostTensor tensor;
  tensor.shape = system.shape();
  tensor.values.resize(total);

  std::vector<int> idx(m, 0);
  Tuple x(m);
  for (int i = 0; i < m; ++i) x[i] = system.marginal(i).atom(0);
  for (std::size_t f = 0; f < total; ++f) {
    tensor.values[f] = c(x);
    int i = m - 1;
    while (i >= 0) {
      if (++idx[i] < tensor.shape[i]) {
        x[i] = system.marginal(i).atom(idx[i]);
        break;
      }
      idx[i] = 0;
      x[i] = system.marginal(i).atom(0);
      --i;
    }
  }
  return tensor;
}

// --- Coupling -----------------------------------------------------------------

Coupling::Coupling(MarginalSystem system, std::vector<CouplingEntry> entries,
                   double marginal_tol)
    : system_(std::move(system)), entries_(std::move(entries)) {
  if (entries_.empty()) throw std::invalid_argument("Coupling: empty plan");
  const std::vector<int> shape = system_.shape();
  for (const CouplingEntry& e : entries_) {
    if (e.index.size() != shape.size()) throw std::invalid_argument("Coupling: index arity");
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (e.index[i] < 0 || e.index[i] >= shape[i]) {
        throw std::invalid_argument("Coupling: index out of range");
      }
    }
    if (!(e.mass > 0.0)) throw std::invalid_argument("Coupling: nonpositive mass");
  }
  std::vector<std::vector<int>> seen;
  seen.reserve(entries_.size());
  for (const CouplingEntry& e : entries_) seen.push_back(e.index);
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw std::invalid_argument("Coupling: duplicate index tuples");
  }
  if (max_marginal_residual() > marginal_tol) {
    throw std::invalid_argument("Coupling: marginal residual exceeds tolerance");
  }
}

std::vector<double> Coupling::marginal(int i) const {
  std::vector<double> sums(system_.marginal(i).size(), 0.0);
  for (const CouplingEntry& e : entries_) sums[e.index[i]] += e.mass;
  return sums;
}

double Coupling::max_marginal_residual() const {
  double r = 0.0;
  for (int i = 0; i < system_.m(); ++i) {
    const std::vector<double> sums = marginal(i);
    for (int a = 0; a < system_.marginal(i).size(); ++a) {
      r = std::max(r, std::abs(sums[a] - system_.marginal(i).weight(a)));
    }
  }
  return r;
}

std::vector<Tuple> Coupling::support_points() const {
  std::vector<Tuple> pts;
  pts.reserve(entries_.size());
  for (const CouplingEntry& e : entries_) pts.push_back(system_.tuple_at(e.index));
  return pts;
}

double coupling_objective(const CostTensor& tensor, const Coupling& coupling) {
  double obj = 0.0;
  for (const CouplingEntry& e : coupling.entries()) obj += e.mass * tensor.at(e.index);
  return obj;
}

Coupling product_coupling(const MarginalSystem& system) {
  const std::vector<int> shape = system.shape();
  std::size_t total = 1;
  for (int n : shape) total *= static_cast<std::size_t>(n);
  std::vector<CouplingEntry> entries;
  entries.reserve(total);
  std::vector<int> idx(shape.size(), 0);
  for (std::size_t f = 0; f < total; ++f) {
    double mass = 1.0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
      mass *= system.marginal(static_cast<int>(i)).weight(idx[i]);
    }
    entries.push_back({idx, mass});
    int i = static_cast<int>(shape.size()) - 1;
    while (i >= 0 && ++idx[i] == shape[i]) idx[i--] = 0;
  }
  return Coupling(system, std::move(entries), 1e-9);
}

void write_coupling_csv(const std::string& path, const Coupling& coupling) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_coupling_csv: cannot open " + path);
  for (int i = 0; i < coupling.m(); ++i) out << "i_" << (i + 1) << ",";
  out << "mass\n";
  char buf[64];
  for (const CouplingEntry& e : coupling.entries()) {
    for (int v : e.index) out << v << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", e.mass);
    out << buf << "\n";
  }
}

// --- revised simplex on the transport polytope ---------------------------------

namespace {

// Equality rows after dropping the redundant last row of every marginal but
// the first; the remaining system has full row rank sum(n_i) - (m - 1).
struct RowLayout {
  std::vector<int> shape;
  std::vector<int> offset;  // row offset per marginal (first marginal keeps all rows)
  int rows = 0;

  explicit RowLayout(std::vector<int> s) : shape(std::move(s)) {
    offset.resize(shape.size());
    int r = 0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
      offset[i] = r;
      r += i == 0 ? shape[i] : shape[i] - 1;
    }
    rows = r;
  }

  // Appends the row indices of the column for the given atom index tuple.
  void column_rows(const std::vector<int>& index, std::vector<int>& out) const {
    out.clear();
    out.push_back(index[0]);
    for (std::size_t i = 1; i < shape.size(); ++i) {
      if (index[i] < shape[i] - 1) out.push_back(offset[i] + index[i]);
    }
  }
};

struct Simplex {
  const CostTensor& tensor;
  const MarginalSystem& system;
  const SimplexOptions& options;
  RowLayout layout;
  std::size_t total;
  Vec b;
  std::vector<std::size_t> basis;
  std::vector<char> in_basis;
  std::vector<int> rowbuf;

  Simplex(const CostTensor& t, const MarginalSystem& sys, const SimplexOptions& opt)
      : tensor(t), system(sys), options(opt), layout(t.shape) {
    total = t.size();
    b = Vec::Zero(layout.rows);
    for (int a = 0; a < t.shape[0]; ++a) b[a] = system.marginal(0).weight(a);
    for (int i = 1; i < system.m(); ++i) {
      for (int a = 0; a + 1 < t.shape[i]; ++a) {
        b[layout.offset[i] + a] = system.marginal(i).weight(a);
      }
    }
    in_basis.assign(total, 0);
  }

  std::vector<int> index_of(std::size_t flat) const { return tensor.unflat(flat); }

  void column_into(std::size_t flat, Vec& col) {
    col.setZero();
    layout.column_rows(index_of(flat), rowbuf);
    for (int r : rowbuf) col[r] = 1.0;
  }

  // North-west-corner style greedy plan; its columns are linearly independent
  // and number at most the reduced row count.
  std::vector<std::size_t> greedy_columns() {
    const int m = system.m();
    std::vector<std::vector<double>> residual(m);
    std::vector<int> ptr(m);
    for (int i = 0; i < m; ++i) {
      residual[i] = system.marginal(i).weights();
      ptr[i] = options.reverse ? tensor.shape[i] - 1 : 0;
    }
    const int step = options.reverse ? -1 : 1;
    auto in_range = [&](int i) {
      return ptr[i] >= 0 && ptr[i] < tensor.shape[i];
    };
    std::vector<std::size_t> cols;
    std::vector<int> idx(m);
    while (true) {
      bool ok = true;
      for (int i = 0; i < m; ++i) ok = ok && in_range(i);
      if (!ok) break;
      double mass = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) mass = std::min(mass, residual[i][ptr[i]]);
      for (int i = 0; i < m; ++i) idx[i] = ptr[i];
      cols.push_back(tensor.flat(idx));
      bool advanced = false;
      for (int i = 0; i < m; ++i) {
        residual[i][ptr[i]] -= mass;
        if (residual[i][ptr[i]] <= 1e-13) {
          residual[i][ptr[i]] = 0.0;
          ptr[i] += step;
          advanced = true;
        }
      }
      if (!advanced) {
        throw std::runtime_error("solve_exact_lp: greedy start stalled (internal error)");
      }
    }
    for (int i = 0; i < m; ++i) {
      for (double r : residual[i]) {
        if (std::abs(r) > 1e-9) {
          throw std::runtime_error("solve_exact_lp: greedy start left residual mass");
        }
      }
    }
    if (static_cast<int>(cols.size()) > layout.rows) {
      throw std::runtime_error("solve_exact_lp: greedy start produced too many columns");
    }
    return cols;
  }

  // Completes the greedy columns to a full basis by scanning product columns
  // and keeping those that extend the span (modified Gram-Schmidt).
  void build_basis() {
    basis = greedy_columns();
    std::vector<Vec> ortho;
    Vec col(layout.rows);
    auto try_accept = [&](std::size_t flat, bool force_member) {
      column_into(flat, col);
      Vec r = col;
      for (const Vec& q : ortho) r -= q.dot(r) * q;
      const double norm = r.norm();
      if (norm > 1e-7) {
        ortho.push_back(r / norm);
        if (!force_member) basis.push_back(flat);
        in_basis[flat] = 1;
        return true;
      }
      return false;
    };
    for (std::size_t flat : basis) {
      if (!try_accept(flat, true)) {
        throw std::runtime_error("solve_exact_lp: greedy columns dependent (internal error)");
      }
    }
    if (static_cast<int>(basis.size()) < layout.rows) {
      if (options.reverse) {
        for (std::size_t f = total; f-- > 0 && static_cast<int>(basis.size()) < layout.rows;) {
          if (!in_basis[f]) try_accept(f, false);
        }
      } else {
        for (std::size_t f = 0; f < total && static_cast<int>(basis.size()) < layout.rows; ++f) {
          if (!in_basis[f]) try_accept(f, false);
        }
      }
    }
    if (static_cast<int>(basis.size()) != layout.rows) {
      throw std::runtime_error("solve_exact_lp: could not complete basis (internal error)");
    }
  }

  SolveReport run() {
    build_basis();
    const int R = layout.rows;
    Mat B(R, R);
    Vec cB(R), xB(R), y(R), dir(R), col(R);
    const double cost_scale = 1.0 + tensor.max_abs();
    const double rc_tol = std::max(1e-13, 1e-12 * cost_scale);

    int iterations = 0;
    while (true) {
      if (++iterations > options.max_iterations) {
        throw std::runtime_error("solve_exact_lp: iteration limit exceeded (internal error)");
      }
      for (int k = 0; k < R; ++k) {
        column_into(basis[k], col);
        B.col(k) = col;
        cB[k] = tensor.values[basis[k]];
      }
      Eigen::PartialPivLU<Mat> lu(B);
      xB = lu.solve(b);
      y = lu.transpose().solve(cB);

      // Potentials on full rows; dropped rows carry zero.
      std::vector<Vec> pot(system.m());
      pot[0] = y.segment(0, tensor.shape[0]);
      for (int i = 1; i < system.m(); ++i) {
        pot[i] = Vec::Zero(tensor.shape[i]);
        for (int a = 0; a + 1 < tensor.shape[i]; ++a) pot[i][a] = y[layout.offset[i] + a];
      }

      // Bland entering rule: first nonbasic column with negative reduced cost
      // in the fixed scan order.
      std::ptrdiff_t entering = -1;
      std::vector<int> idx(system.m(), 0);
      auto reduced_cost = [&](std::size_t f, const std::vector<int>& ix) {
        double rc = tensor.values[f];
        for (int i = 0; i < system.m(); ++i) rc -= pot[i][ix[i]];
        return rc;
      };
      if (!options.reverse) {
        for (std::size_t f = 0; f < total; ++f) {
          if (!in_basis[f] && reduced_cost(f, idx) < -rc_tol) {
            entering = static_cast<std::ptrdiff_t>(f);
            break;
          }
          int i = system.m() - 1;
          while (i >= 0 && ++idx[i] == tensor.shape[i]) idx[i--] = 0;
        }
      } else {
        for (std::size_t f = total; f-- > 0;) {
          if (!in_basis[f]) {
            const std::vector<int> ix = tensor.unflat(f);
            if (reduced_cost(f, ix) < -rc_tol) {
              entering = static_cast<std::ptrdiff_t>(f);
              break;
            }
          }
        }
      }

      if (entering < 0) {
        return finish(lu, xB, pot, iterations);
      }

      column_into(static_cast<std::size_t>(entering), col);
      dir = lu.solve(col);
      double theta = std::numeric_limits<double>::infinity();
      for (int k = 0; k < R; ++k) {
        if (dir[k] > 1e-11) theta = std::min(theta, std::max(xB[k], 0.0) / dir[k]);
      }
      if (!std::isfinite(theta)) {
        throw std::runtime_error("solve_exact_lp: unbounded direction (internal error)");
      }
      // Bland leaving rule: smallest (largest when reversed) variable id
      // among the ratio-test ties.
      int leave = -1;
      const double tie = theta + 1e-12 * (1.0 + theta);
      for (int k = 0; k < R; ++k) {
        if (dir[k] > 1e-11 && std::max(xB[k], 0.0) / dir[k] <= tie) {
          if (leave < 0) {
            leave = k;
          } else {
            const bool better = options.reverse ? basis[k] > basis[leave]
                                                : basis[k] < basis[leave];
            if (better) leave = k;
          }
        }
      }
      in_basis[basis[leave]] = 0;
      basis[leave] = static_cast<std::size_t>(entering);
      in_basis[static_cast<std::size_t>(entering)] = 1;
    }
  }

  SolveReport finish(Eigen::PartialPivLU<Mat>& lu, Vec& xB, std::vector<Vec>& pot,
                     int iterations) {
    // Recompute basic values once more for the certificate.
    xB = lu.solve(b);
    bool degenerate = false;
    std::vector<CouplingEntry> entries;
    double primal = 0.0;
    std::vector<std::pair<std::size_t, double>> basic;
    basic.reserve(basis.size());
    for (std::size_t k = 0; k < basis.size(); ++k) {
      double v = xB[static_cast<int>(k)];
      if (v < 0.0) {
        if (v < -1e-9) {
          throw std::runtime_error("solve_exact_lp: infeasible basic value (internal error)");
        }
        v = 0.0;
      }
      if (v <= 1e-12) {
        degenerate = true;
        continue;
      }
      basic.emplace_back(basis[k], v);
      primal += v * tensor.values[basis[k]];
    }
    std::sort(basic.begin(), basic.end());
    for (const auto& [flat, mass] : basic) entries.push_back({tensor.unflat(flat), mass});

    // Anchor normalization: u_i[0] = 0 for i >= 2, shifts absorbed into u_1.
    SplittingPotentials potentials;
    potentials.u = pot;
    double shift = 0.0;
    for (int i = 1; i < system.m(); ++i) {
      const double s = potentials.u[i][0];
      potentials.u[i].array() -= s;
      shift += s;
    }
    potentials.u[0].array() += shift;

    double dual = 0.0;
    for (int i = 0; i < system.m(); ++i) {
      for (int a = 0; a < tensor.shape[i]; ++a) {
        dual += potentials.u[i][a] * system.marginal(i).weight(a);
      }
    }

    SolveReport report{Coupling(system, std::move(entries), 1e-9), std::move(potentials),
                       primal, dual, primal - dual, iterations, degenerate};
    return report;
  }
};

}  // namespace

SolveReport solve_exact_lp(const CostTensor& tensor, const MarginalSystem& system,
                           const SimplexOptions& options) {
  tensor.validate();
  if (tensor.shape != system.shape()) {
    throw std::invalid_argument("solve_exact_lp: tensor shape does not match system");
  }
  Simplex simplex(tensor, system, options);
  return simplex.run();
}

// --- entropic solver ------------------------------------------------------------

EntropicReport solve_entropic(const CostTensor& tensor, const MarginalSystem& system,
                              double epsilon, int max_iter, double tol) {
  tensor.validate();
  if (tensor.shape != system.shape()) {
    throw std::invalid_argument("solve_entropic: tensor shape does not match system");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("solve_entropic: epsilon must be > 0");
  const int m = system.m();
  const std::size_t total = tensor.size();

  // Dimensionless log potentials g_i; the plan is exp(sum_i g_i[a_i] - C/eps).
  std::vector<std::vector<double>> g(m);
  for (int i = 0; i < m; ++i) g[i].assign(tensor.shape[i], 0.0);

  std::vector<int> idx(m, 0);
  auto for_each_tuple = [&](auto&& fn) {
    std::fill(idx.begin(), idx.end(), 0);
    for (std::size_t f = 0; f < total; ++f) {
      fn(f, idx);
      int i = m - 1;
      while (i >= 0 && ++idx[i] == tensor.shape[i]) idx[i--] = 0;
    }
  };

  auto log_plan = [&](std::size_t f, const std::vector<int>& ix) {
    double lp = -tensor.values[f] / epsilon;
    for (int i = 0; i < m; ++i) lp += g[i][ix[i]];
    return lp;
  };

  int sweeps = 0;
  double max_err = std::numeric_limits<double>::infinity();
  bool converged = false;
  std::vector<double> slice_max, slice_sum;
  while (sweeps < max_iter) {
    ++sweeps;
    for (int i = 0; i < m; ++i) {
      const int n = tensor.shape[i];
      slice_max.assign(n, -std::numeric_limits<double>::infinity());
      for_each_tuple([&](std::size_t f, const std::vector<int>& ix) {
        slice_max[ix[i]] = std::max(slice_max[ix[i]], log_plan(f, ix) - g[i][ix[i]]);
      });
      slice_sum.assign(n, 0.0);
      for_each_tuple([&](std::size_t f, const std::vector<int>& ix) {
        slice_sum[ix[i]] += std::exp(log_plan(f, ix) - g[i][ix[i]] - slice_max[ix[i]]);
      });
      for (int a = 0; a < n; ++a) {
        g[i][a] = std::log(system.marginal(i).weight(a)) - slice_max[a] - std::log(slice_sum[a]);
      }
    }
    // Marginal L1 errors of the current plan.
    std::vector<std::vector<double>> sums(m);
    for (int i = 0; i < m; ++i) sums[i].assign(tensor.shape[i], 0.0);
    for_each_tuple([&](std::size_t f, const std::vector<int>& ix) {
      const double mass = std::exp(log_plan(f, ix));
      for (int i = 0; i < m; ++i) sums[i][ix[i]] += mass;
    });
    max_err = 0.0;
    for (int i = 0; i < m; ++i) {
      double l1 = 0.0;
      for (int a = 0; a < tensor.shape[i]; ++a) {
        l1 += std::abs(sums[i][a] - system.marginal(i).weight(a));
      }
      max_err = std::max(max_err, l1);
    }
    if (max_err < tol) {
      converged = true;
      break;
    }
  }

  std::vector<CouplingEntry> entries;
  double objective = 0.0;
  double total_mass = 0.0;
  for_each_tuple([&](std::size_t f, const std::vector<int>& ix) {
    const double mass = std::exp(log_plan(f, ix));
    objective += mass * tensor.values[f];
    total_mass += mass;
    if (mass > 1e-15) entries.push_back({ix, mass});
  });
  (void)total_mass;

  // The plan satisfies the marginals only up to the achieved error.
  Coupling coupling(system, std::move(entries), std::max(1e-9, 2.0 * max_err));
  return EntropicReport{std::move(coupling), converged, sweeps, max_err, objective};
}

// --- uniqueness probe ------------------------------------------------------------

namespace {

std::vector<std::vector<int>> support_of(const Coupling& coupling) {
  std::vector<std::vector<int>> s;
  s.reserve(coupling.entries().size());
  for (const CouplingEntry& e : coupling.entries()) {
    if (e.mass > 1e-12) s.push_back(e.index);
  }
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

UniquenessReport uniqueness_probe(const CostTensor& tensor, const MarginalSystem& system,
                                  int trials, double magnitude, std::uint64_t seed) {
  if (trials < 2) throw std::invalid_argument("uniqueness_probe: trials must be >= 2");
  const SolveReport base = solve_exact_lp(tensor, system, SimplexOptions{});
  const auto base_support = support_of(base.coupling);
  const double accept = 1e-7 * (1.0 + std::abs(base.primal));

  UniquenessReport report;
  report.trials = trials;

  detail::Rng rng(seed);
  const double scale = magnitude * (1.0 + tensor.max_abs());
  for (int t = 0; t < trials; ++t) {
    CostTensor probe = tensor;
    if (t > 0) {
      detail::Rng stream = rng.derive(static_cast<std::uint64_t>(t));
      for (double& v : probe.values) v += scale * stream.symmetric();
    }
    SimplexOptions opts;
    opts.reverse = (t % 2 == 0);
    const SolveReport solved = solve_exact_lp(probe, system, opts);
    const auto support = support_of(solved.coupling);
    if (support == base_support) {
      ++report.support_matches;
      continue;
    }
    // A structurally different plan only witnesses non-uniqueness when it
    // certifies optimality for the unperturbed tensor.
    const double unperturbed = coupling_objective(tensor, solved.coupling);
    if (unperturbed <= base.primal + accept) {
      report.verdict = Uniqueness::non_unique;
      report.witnesses.push_back(base.coupling);
      report.witnesses.push_back(solved.coupling);
      return report;
    }
  }
  report.verdict = report.support_matches == trials ? Uniqueness::unique
                                                    : Uniqueness::inconclusive;
  return report;
}

}  // namespace mmot
