#include "mmot/costs.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "detail/cost_impl.hpp"
#include "detail/optimize.hpp"

namespace mmot {

std::string to_string(CostKind kind) {
  switch (kind) {
    case CostKind::gangbo_swiech: return "gangbo_swiech";
    case CostKind::heinich: return "heinich";
    case CostKind::chain_bilinear: return "chain_bilinear";
    case CostKind::infimal_convolution: return "infimal_convolution";
    case CostKind::matching: return "matching";
    case CostKind::tabulated: return "tabulated";
    case CostKind::custom: return "custom";
  }
  return "unknown";
}

// --- BlockPartition ---------------------------------------------------------

BlockPartition BlockPartition::singletons(int m) {
  BlockPartition p;
  p.boundaries.resize(m + 1);
  std::iota(p.boundaries.begin(), p.boundaries.end(), 0);
  return p;
}

BlockPartition BlockPartition::of(std::vector<int> boundaries) {
  BlockPartition p;
  p.boundaries = std::move(boundaries);
  return p;
}

int BlockPartition::block_of(int coordinate) const {
  for (int j = 0; j < blocks(); ++j) {
    if (coordinate >= begin(j) && coordinate < end(j)) return j;
  }
  throw std::out_of_range("BlockPartition: coordinate outside partition");
}

void BlockPartition::validate(int m) const {
  if (boundaries.size() < 2 || boundaries.front() != 0 || boundaries.back() != m) {
    throw std::invalid_argument("BlockPartition: boundaries must run 0 = m_0 < ... < m_k = m");
  }
  for (std::size_t i = 1; i < boundaries.size(); ++i) {
    if (boundaries[i] <= boundaries[i - 1]) {
      throw std::invalid_argument("BlockPartition: boundaries must be strictly increasing");
    }
  }
}

// --- YDomain ----------------------------------------------------------------

YDomain YDomain::lattice(Space space, const std::vector<int>& counts) {
  space.validate();
  if (static_cast<int>(counts.size()) != space.dim) {
    throw std::invalid_argument("YDomain::lattice: counts length must equal dim");
  }
  for (int c : counts) {
    if (c < 1) throw std::invalid_argument("YDomain::lattice: counts must be >= 1");
  }
  YDomain y;
  y.refine_radius = Vec(space.dim);
  for (int k = 0; k < space.dim; ++k) {
    y.refine_radius[k] =
        counts[k] > 1 ? space.width(k) / (counts[k] - 1) : 0.5 * space.width(k);
  }
  std::vector<int> idx(space.dim, 0);
  while (true) {
    Vec p(space.dim);
    for (int k = 0; k < space.dim; ++k) {
      p[k] = counts[k] > 1
                 ? space.lower[k] + space.width(k) * idx[k] / (counts[k] - 1)
                 : 0.5 * (space.lower[k] + space.upper[k]);
    }
    y.grid.push_back(std::move(p));
    int k = space.dim - 1;
    while (k >= 0 && ++idx[k] == counts[k]) idx[k--] = 0;
    if (k < 0) break;
  }
  y.space = std::move(space);
  return y;
}

YDomain YDomain::from_points(Space space, std::vector<Vec> points) {
  space.validate();
  if (points.empty()) throw std::invalid_argument("YDomain: empty candidate grid");
  YDomain y;
  y.refine_radius = Vec(space.dim);
  for (int k = 0; k < space.dim; ++k) {
    std::vector<double> vals;
    vals.reserve(points.size());
    for (const Vec& p : points) vals.push_back(p[k]);
    std::sort(vals.begin(), vals.end());
    double gap = 0.0;
    for (std::size_t i = 1; i < vals.size(); ++i) gap = std::max(gap, vals[i] - vals[i - 1]);
    y.refine_radius[k] = gap > 0.0 ? gap : 0.5 * space.width(k);
  }
  y.grid = std::move(points);
  y.space = std::move(space);
  y.validate();
  return y;
}

void YDomain::validate() const {
  space.validate();
  if (grid.empty()) throw std::invalid_argument("YDomain: empty candidate grid");
  for (const Vec& p : grid) {
    if (!space.contains(p)) throw std::invalid_argument("YDomain: grid point outside box");
  }
  if (refine_radius.size() != space.dim) {
    throw std::invalid_argument("YDomain: refine_radius length mismatch");
  }
}

// --- CostImpl base ----------------------------------------------------------

namespace detail {

void CostImpl::check_tuple(const Tuple& x) const {
  if (static_cast<int>(x.size()) != arity()) {
    throw std::invalid_argument("cost: tuple arity mismatch");
  }
  for (int i = 0; i < arity(); ++i) {
    if (x[i].size() != dims_[i]) {
      throw std::invalid_argument("cost: block dimension mismatch");
    }
  }
}

std::vector<Space> default_domains(const std::vector<int>& dims,
                                   const std::optional<Space>& box) {
  std::vector<Space> out;
  out.reserve(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (box) {
      if (box->dim != dims[i]) {
        throw std::invalid_argument("cost: box dimension does not match block dimension");
      }
      out.push_back(*box);
    } else {
      out.push_back(Space::box(dims[i], 0.0, 1.0));
    }
  }
  return out;
}

namespace {

class GangboSwiechImpl final : public CostImpl {
 public:
  GangboSwiechImpl(int m, int d, std::vector<Space> domains)
      : CostImpl(CostKind::gangbo_swiech, Smoothness::everywhere_smooth,
                 std::vector<int>(m, d), std::move(domains)) {}

  double eval(const Tuple& x) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = i + 1; j < x.size(); ++j) s += (x[i] - x[j]).squaredNorm();
    }
    return s;
  }

  std::optional<Vec> analytic_grad(const Tuple& x, int block) const override {
    Vec g = Vec::Zero(dims()[block]);
    for (int j = 0; j < arity(); ++j) {
      if (j != block) g += 2.0 * (x[block] - x[j]);
    }
    return g;
  }

  std::optional<Mat> analytic_mixed_hessian(const Tuple&, int bi, int bj) const override {
    const int d = dims()[bi];
    if (bi == bj) return Mat(2.0 * (arity() - 1) * Mat::Identity(d, d));
    return Mat(-2.0 * Mat::Identity(d, d));
  }
};

class HeinichImpl final : public CostImpl {
 public:
  HeinichImpl(int m, int d, ScalarFunction h, std::vector<Space> domains)
      : CostImpl(CostKind::heinich, Smoothness::everywhere_smooth, std::vector<int>(m, d),
                 std::move(domains)),
        h_(std::move(h)) {}

  double eval(const Tuple& x) const override { return h_.value(sum(x)); }

  std::optional<Vec> analytic_grad(const Tuple& x, int) const override {
    return h_.grad(sum(x));
  }

  std::optional<Mat> analytic_mixed_hessian(const Tuple& x, int, int) const override {
    if (!h_.hess) return std::nullopt;
    return h_.hess(sum(x));
  }

 private:
  Vec sum(const Tuple& x) const {
    Vec s = Vec::Zero(dims()[0]);
    for (const Vec& xi : x) s += xi;
    return s;
  }

  ScalarFunction h_;
};

class ChainBilinearImpl final : public CostImpl {
 public:
  ChainBilinearImpl(TwoBlockFunction g, int d, std::vector<Space> domains)
      : CostImpl(CostKind::chain_bilinear, Smoothness::everywhere_smooth,
                 std::vector<int>(3, d), std::move(domains)),
        g_(std::move(g)) {}

  double eval(const Tuple& x) const override {
    return x[0].dot(x[1]) + x[1].dot(x[2]) + g_.value(x[0], x[2]);
  }

  std::optional<Vec> analytic_grad(const Tuple& x, int block) const override {
    switch (block) {
      case 0: return Vec(x[1] + g_.grad_a(x[0], x[2]));
      case 1: return Vec(x[0] + x[2]);
      default: return Vec(x[1] + g_.grad_b(x[0], x[2]));
    }
  }

  std::optional<Mat> analytic_mixed_hessian(const Tuple& x, int bi, int bj) const override {
    const int d = dims()[0];
    const Mat id = Mat::Identity(d, d);
    if ((bi == 0 && bj == 1) || (bi == 1 && bj == 0)) return id;
    if ((bi == 1 && bj == 2) || (bi == 2 && bj == 1)) return id;
    if (bi == 0 && bj == 2) {
      if (!g_.mixed_ab) return std::nullopt;
      return g_.mixed_ab(x[0], x[2]);
    }
    if (bi == 2 && bj == 0) {
      if (!g_.mixed_ab) return std::nullopt;
      return Mat(g_.mixed_ab(x[0], x[2]).transpose());
    }
    if (bi == 1 && bj == 1) return Mat(Mat::Zero(d, d));
    if (bi == 0 && bj == 0) {
      if (!g_.hess_a) return std::nullopt;
      return g_.hess_a(x[0], x[2]);
    }
    if (!g_.hess_b) return std::nullopt;
    return g_.hess_b(x[0], x[2]);
  }

 private:
  TwoBlockFunction g_;
};

class TabulatedImpl final : public CostImpl {
 public:
  TabulatedImpl(std::vector<std::vector<double>> axes, std::vector<double> values,
                std::vector<Space> domains)
      : CostImpl(CostKind::tabulated, Smoothness::semiconcave_nonsmooth,
                 std::vector<int>(axes.size(), 1), std::move(domains)),
        axes_(std::move(axes)),
        values_(std::move(values)) {
    std::size_t total = 1;
    for (const auto& ax : axes_) {
      if (ax.empty()) throw std::invalid_argument("tabulated_cost: empty axis");
      if (!std::is_sorted(ax.begin(), ax.end())) {
        throw std::invalid_argument("tabulated_cost: axis nodes must be sorted ascending");
      }
      total *= ax.size();
    }
    if (total != values_.size()) {
      throw std::invalid_argument("tabulated_cost: value count does not match axes");
    }
    strides_.assign(axes_.size(), 1);
    for (int i = static_cast<int>(axes_.size()) - 2; i >= 0; --i) {
      strides_[i] = strides_[i + 1] * axes_[i + 1].size();
    }
  }

  double eval(const Tuple& x) const override {
    const int m = arity();
    std::vector<int> base(m);
    std::vector<double> frac(m);
    for (int i = 0; i < m; ++i) {
      const auto& ax = axes_[i];
      const double t = x[i][0];
      if (t <= ax.front() || ax.size() == 1) {
        base[i] = 0;
        frac[i] = 0.0;
      } else if (t >= ax.back()) {
        base[i] = static_cast<int>(ax.size()) - 2;
        frac[i] = 1.0;
      } else {
        const auto it = std::upper_bound(ax.begin(), ax.end(), t);
        base[i] = static_cast<int>(it - ax.begin()) - 1;
        frac[i] = (t - ax[base[i]]) / (ax[base[i] + 1] - ax[base[i]]);
      }
    }
    double acc = 0.0;
    const unsigned corners = 1u << m;
    for (unsigned mask = 0; mask < corners; ++mask) {
      double w = 1.0;
      std::size_t flat = 0;
      for (int i = 0; i < m; ++i) {
        const bool hi = (mask >> i) & 1u;
        const int node = base[i] + (hi ? 1 : 0);
        if (hi && node >= static_cast<int>(axes_[i].size())) {
          w = 0.0;
          break;
        }
        w *= hi ? frac[i] : 1.0 - frac[i];
        flat += strides_[i] * node;
      }
      if (w != 0.0) acc += w * values_[flat];
    }
    return acc;
  }

 private:
  std::vector<std::vector<double>> axes_;
  std::vector<double> values_;
  std::vector<std::size_t> strides_;
};

class CustomImpl final : public CostImpl {
 public:
  explicit CustomImpl(CustomCost spec)
      : CostImpl(CostKind::custom, spec.smoothness, spec.block_dims,
                 spec.domains.empty() ? default_domains(spec.block_dims, std::nullopt)
                                      : spec.domains),
        spec_(std::move(spec)) {
    if (!spec_.value) throw std::invalid_argument("custom_cost: value callback required");
    if (static_cast<int>(domains().size()) != arity()) {
      throw std::invalid_argument("custom_cost: domains/block count mismatch");
    }
  }

  double eval(const Tuple& x) const override { return spec_.value(x); }

  std::optional<Vec> analytic_grad(const Tuple& x, int block) const override {
    if (!spec_.grad_block) return std::nullopt;
    return spec_.grad_block(x, block);
  }

  std::optional<Mat> analytic_mixed_hessian(const Tuple& x, int bi, int bj) const override {
    if (!spec_.mixed_hessian) return std::nullopt;
    return spec_.mixed_hessian(x, bi, bj);
  }

 private:
  CustomCost spec_;
};

class ScaledImpl final : public CostImpl {
 public:
  ScaledImpl(std::shared_ptr<const CostImpl> inner, double alpha)
      : CostImpl(CostKind::custom, inner->smoothness(), inner->dims(), inner->domains()),
        inner_(std::move(inner)),
        alpha_(alpha) {}

  double eval(const Tuple& x) const override { return alpha_ * inner_->eval(x); }

  std::optional<Vec> analytic_grad(const Tuple& x, int block) const override {
    auto g = inner_->analytic_grad(x, block);
    if (!g) return std::nullopt;
    return Vec(alpha_ * *g);
  }

  std::optional<Mat> analytic_mixed_hessian(const Tuple& x, int bi, int bj) const override {
    auto h = inner_->analytic_mixed_hessian(x, bi, bj);
    if (!h) return std::nullopt;
    return Mat(alpha_ * *h);
  }

 private:
  std::shared_ptr<const CostImpl> inner_;
  double alpha_;
};

}  // namespace

// --- InfimalImpl ------------------------------------------------------------

InfimalImpl::InfimalImpl(std::vector<CostFunction> parts, BlockPartition partition, YDomain y,
                         CostKind kind)
    : CostImpl(kind,
               y.exact_minimizer ? Smoothness::everywhere_smooth
                                 : Smoothness::semiconcave_nonsmooth,
               [&] {
                 std::vector<int> dims;
                 for (std::size_t j = 0; j < parts.size(); ++j) {
                   const auto& pd = parts[j].block_dims();
                   dims.insert(dims.end(), pd.begin(), pd.end() - 1);
                 }
                 return dims;
               }(),
               [&] {
                 std::vector<Space> doms;
                 for (std::size_t j = 0; j < parts.size(); ++j) {
                   const auto& pd = parts[j].domains();
                   doms.insert(doms.end(), pd.begin(), pd.end() - 1);
                 }
                 return doms;
               }()),
      parts_(std::move(parts)),
      partition_(std::move(partition)),
      y_(std::move(y)) {
  y_.validate();
  partition_.validate(arity());
  if (static_cast<int>(parts_.size()) != partition_.blocks()) {
    throw std::invalid_argument("infimal_convolution: one part per partition block required");
  }
  for (int j = 0; j < partition_.blocks(); ++j) {
    const auto& part = parts_[j];
    if (part.arity() != partition_.size(j) + 1) {
      throw std::invalid_argument("infimal_convolution: part arity must be |X_j| + 1");
    }
    if (part.block_dims().back() != y_.space.dim) {
      throw std::invalid_argument("infimal_convolution: part y-block dimension mismatch");
    }
  }
}

Tuple InfimalImpl::part_tuple(const Tuple& x, int j, const Vec& y) const {
  Tuple t;
  t.reserve(partition_.size(j) + 1);
  for (int i = partition_.begin(j); i < partition_.end(j); ++i) t.push_back(x[i]);
  t.push_back(y);
  return t;
}

double InfimalImpl::inner_sum(const Tuple& x, const Vec& y) const {
  double s = 0.0;
  for (int j = 0; j < partition_.blocks(); ++j) s += parts_[j](part_tuple(x, j, y));
  return s;
}

Vec InfimalImpl::inner_y_gradient(const Tuple& x, const Vec& y) const {
  Vec g = Vec::Zero(y_.space.dim);
  for (int j = 0; j < partition_.blocks(); ++j) {
    const Tuple t = part_tuple(x, j, y);
    const GradientResult r = grad_block(parts_[j], t, parts_[j].arity() - 1);
    if (!r.differentiable) {
      throw std::runtime_error("infimal_convolution: part nondifferentiable in y at minimizer");
    }
    g += r.gradient;
  }
  return g;
}

Vec InfimalImpl::envelope_grad(const Tuple& x, int block, const Vec& y) const {
  const int j = partition_.block_of(block);
  const Tuple t = part_tuple(x, j, y);
  const GradientResult r = grad_block(parts_[j], t, block - partition_.begin(j));
  if (!r.differentiable) {
    throw std::runtime_error("infimal_convolution: part nondifferentiable under envelope");
  }
  return r.gradient;
}

bool InfimalImpl::is_interior(const Vec& y) const {
  for (int k = 0; k < y_.space.dim; ++k) {
    const double margin = 1e-7 * (1.0 + y_.space.width(k));
    if (y[k] - y_.space.lower[k] <= margin || y_.space.upper[k] - y[k] <= margin) return false;
  }
  return true;
}

InfimalImpl::Minimized InfimalImpl::minimize(const Tuple& x) const {
  check_tuple(x);
  Minimized out;

  if (y_.exact_minimizer) {
    Vec y = y_.exact_minimizer(x);
    const double v = inner_sum(x, y);
    out.value = v;
    out.clusters.push_back({std::move(y), v, true});
    out.clusters.back().interior = is_interior(out.clusters.back().point);
    return out;
  }

  // Workspaces so the refinement loop does not allocate per evaluation.
  std::vector<Tuple> work(partition_.blocks());
  for (int j = 0; j < partition_.blocks(); ++j) {
    work[j] = part_tuple(x, j, y_.grid.front());
  }
  auto objective = [&](const Vec& y) {
    double s = 0.0;
    for (int j = 0; j < partition_.blocks(); ++j) {
      work[j].back() = y;
      s += parts_[j](work[j]);
    }
    return s;
  };

  std::vector<double> grid_values(y_.grid.size());
  double grid_best = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < y_.grid.size(); ++g) {
    grid_values[g] = objective(y_.grid[g]);
    grid_best = std::min(grid_best, grid_values[g]);
  }

  // Candidates near the grid optimum; a generous slack lets basins whose grid
  // sample is slightly high still compete after refinement.
  const double slack = 1e-6 * (1.0 + std::abs(grid_best));
  std::vector<std::size_t> candidates;
  for (std::size_t g = 0; g < y_.grid.size(); ++g) {
    if (grid_values[g] <= grid_best + slack) candidates.push_back(g);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    return grid_values[a] < grid_values[b];
  });
  constexpr std::size_t kMaxCandidates = 64;
  if (candidates.size() > kMaxCandidates) candidates.resize(kMaxCandidates);

  detail::GoldenOptions gopt;
  gopt.max_sweeps = tolerances::refine_max_sweeps;
  gopt.bracket_tol = tolerances::refine_bracket_tol;
  struct Refined {
    Vec point;
    double value;
  };
  std::vector<Refined> refined;
  refined.reserve(candidates.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t g : candidates) {
    detail::GoldenResult r = detail::golden_refine(objective, y_.grid[g], y_.refine_radius,
                                                   y_.space, gopt);
    best = std::min(best, r.value);
    refined.push_back({std::move(r.point), r.value});
  }
  out.value = best;

  const double keep_tol = tolerances::argmin_value_tol * (1.0 + std::abs(best));
  std::vector<Refined> kept;
  for (auto& r : refined) {
    if (r.value <= best + keep_tol) kept.push_back(std::move(r));
  }

  // Single-link clustering with per-coordinate radius of two grid steps.
  std::vector<int> parent(kept.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  auto near = [&](const Vec& p, const Vec& q) {
    for (int k = 0; k < y_.space.dim; ++k) {
      if (std::abs(p[k] - q[k]) > tolerances::argmin_cluster_steps * y_.refine_radius[k]) {
        return false;
      }
    }
    return true;
  };
  for (std::size_t a = 0; a < kept.size(); ++a) {
    for (std::size_t b = a + 1; b < kept.size(); ++b) {
      if (near(kept[a].point, kept[b].point)) {
        parent[find(static_cast<int>(a))] = find(static_cast<int>(b));
      }
    }
  }
  std::vector<int> rep_of(kept.size(), -1);
  for (std::size_t a = 0; a < kept.size(); ++a) {
    const int root = find(static_cast<int>(a));
    if (rep_of[root] < 0 || kept[a].value < kept[rep_of[root]].value) {
      rep_of[root] = static_cast<int>(a);
    }
  }
  for (std::size_t root = 0; root < kept.size(); ++root) {
    if (rep_of[root] < 0 || find(static_cast<int>(root)) != static_cast<int>(root)) continue;
    const auto& r = kept[rep_of[root]];
    out.clusters.push_back({r.point, r.value, is_interior(r.point)});
  }
  std::sort(out.clusters.begin(), out.clusters.end(),
            [](const ArgminCluster& a, const ArgminCluster& b) {
              return std::lexicographical_compare(a.point.data(), a.point.data() + a.point.size(),
                                                  b.point.data(), b.point.data() + b.point.size());
            });
  return out;
}

double InfimalImpl::eval(const Tuple& x) const { return minimize(x).value; }

}  // namespace detail

// --- CostFunction -----------------------------------------------------------

CostFunction::CostFunction(std::shared_ptr<const detail::CostImpl> impl)
    : impl_(std::move(impl)) {
  if (!impl_) throw std::invalid_argument("CostFunction: null implementation");
}

int CostFunction::arity() const { return impl_->arity(); }
const std::vector<int>& CostFunction::block_dims() const { return impl_->dims(); }
const std::vector<Space>& CostFunction::domains() const { return impl_->domains(); }
CostKind CostFunction::kind() const { return impl_->kind(); }
Smoothness CostFunction::smoothness() const { return impl_->smoothness(); }

double CostFunction::operator()(const Tuple& x) const {
  impl_->check_tuple(x);
  return impl_->eval(x);
}

double eval_cost(const CostFunction& c, const Tuple& x) { return c(x); }

// --- constructors -----------------------------------------------------------

ScalarFunction neg_squared_norm() {
  ScalarFunction h;
  h.value = [](const Vec& s) { return -s.squaredNorm(); };
  h.grad = [](const Vec& s) { return Vec(-2.0 * s); };
  h.hess = [](const Vec& s) { return Mat(-2.0 * Mat::Identity(s.size(), s.size())); };
  return h;
}

TwoBlockFunction zero_two_block(int d) {
  TwoBlockFunction g;
  g.value = [](const Vec&, const Vec&) { return 0.0; };
  g.grad_a = [d](const Vec&, const Vec&) { return Vec(Vec::Zero(d)); };
  g.grad_b = [d](const Vec&, const Vec&) { return Vec(Vec::Zero(d)); };
  g.mixed_ab = [d](const Vec&, const Vec&) { return Mat(Mat::Zero(d, d)); };
  g.hess_a = [d](const Vec&, const Vec&) { return Mat(Mat::Zero(d, d)); };
  g.hess_b = [d](const Vec&, const Vec&) { return Mat(Mat::Zero(d, d)); };
  return g;
}

TwoBlockFunction dot_two_block(int d) {
  TwoBlockFunction g;
  g.value = [](const Vec& a, const Vec& b) { return a.dot(b); };
  g.grad_a = [](const Vec&, const Vec& b) { return b; };
  g.grad_b = [](const Vec& a, const Vec&) { return a; };
  g.mixed_ab = [d](const Vec&, const Vec&) { return Mat(Mat::Identity(d, d)); };
  g.hess_a = [d](const Vec&, const Vec&) { return Mat(Mat::Zero(d, d)); };
  g.hess_b = [d](const Vec&, const Vec&) { return Mat(Mat::Zero(d, d)); };
  return g;
}

CostFunction gangbo_swiech(int m, int d, std::optional<Space> box) {
  if (m < 2 || d < 1) throw std::invalid_argument("gangbo_swiech: m >= 2 and d >= 1 required");
  return CostFunction(std::make_shared<detail::GangboSwiechImpl>(
      m, d, detail::default_domains(std::vector<int>(m, d), box)));
}

CostFunction heinich(int m, int d, ScalarFunction h, std::optional<Space> box) {
  if (m < 2 || d < 1) throw std::invalid_argument("heinich: m >= 2 and d >= 1 required");
  if (!h.value || !h.grad) throw std::invalid_argument("heinich: h needs value and gradient");
  return CostFunction(std::make_shared<detail::HeinichImpl>(
      m, d, std::move(h), detail::default_domains(std::vector<int>(m, d), box)));
}

CostFunction chain_bilinear(TwoBlockFunction g, int d, std::optional<Space> box) {
  if (d < 1) throw std::invalid_argument("chain_bilinear: d >= 1 required");
  if (!g.value || !g.grad_a || !g.grad_b) {
    throw std::invalid_argument("chain_bilinear: g needs value and both gradients");
  }
  return CostFunction(std::make_shared<detail::ChainBilinearImpl>(
      std::move(g), d, detail::default_domains(std::vector<int>(3, d), box)));
}

CostFunction infimal_convolution(std::vector<CostFunction> parts, BlockPartition partition,
                                 YDomain y) {
  return CostFunction(std::make_shared<detail::InfimalImpl>(
      std::move(parts), std::move(partition), std::move(y), CostKind::infimal_convolution));
}

CostFunction matching_cost(std::vector<CostFunction> parts, YDomain y) {
  const int m = static_cast<int>(parts.size());
  if (m < 2) throw std::invalid_argument("matching_cost: at least two parts required");
  return CostFunction(std::make_shared<detail::InfimalImpl>(
      std::move(parts), BlockPartition::singletons(m), std::move(y), CostKind::matching));
}

CostFunction quadratic_pair_cost(int d, std::optional<Space> box_a, std::optional<Space> box_b) {
  CustomCost spec;
  spec.block_dims = {d, d};
  spec.domains = {box_a ? *box_a : Space::box(d, 0.0, 1.0),
                  box_b ? *box_b : Space::box(d, 0.0, 1.0)};
  spec.smoothness = Smoothness::everywhere_smooth;
  spec.value = [](const Tuple& x) { return (x[0] - x[1]).squaredNorm(); };
  spec.grad_block = [](const Tuple& x, int b) {
    return Vec(b == 0 ? 2.0 * (x[0] - x[1]) : 2.0 * (x[1] - x[0]));
  };
  spec.mixed_hessian = [d](const Tuple&, int bi, int bj) {
    return Mat((bi == bj ? 2.0 : -2.0) * Mat::Identity(d, d));
  };
  return custom_cost(std::move(spec));
}

CostFunction quadratic_matching(int m, int d, YDomain y) {
  std::vector<CostFunction> parts;
  parts.reserve(m);
  for (int i = 0; i < m; ++i) parts.push_back(quadratic_pair_cost(d, std::nullopt, y.space));
  return matching_cost(std::move(parts), std::move(y));
}

CostFunction tabulated_cost(std::vector<std::vector<double>> axes, std::vector<double> values) {
  std::vector<Space> domains;
  domains.reserve(axes.size());
  for (const auto& ax : axes) {
    if (ax.empty()) throw std::invalid_argument("tabulated_cost: empty axis");
    const double lo = ax.front();
    const double hi = ax.back() > lo ? ax.back() : lo + 1.0;
    domains.push_back(Space::box(Vec::Constant(1, lo), Vec::Constant(1, hi)));
  }
  return CostFunction(std::make_shared<detail::TabulatedImpl>(std::move(axes), std::move(values),
                                                              std::move(domains)));
}

CostFunction tabulated_cost_from_file(const std::string& path,
                                      std::vector<std::vector<double>> axes) {
  static_assert(std::endian::native == std::endian::little,
                "tabulated file i/o assumes a little-endian host");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("tabulated_cost_from_file: cannot open " + path);
  std::uint64_t m = 0;
  in.read(reinterpret_cast<char*>(&m), sizeof(m));
  if (!in || m == 0 || m > 64) {
    throw std::runtime_error("tabulated_cost_from_file: bad header arity");
  }
  std::vector<std::uint64_t> shape(m);
  in.read(reinterpret_cast<char*>(shape.data()), static_cast<std::streamsize>(m * 8));
  if (!in) throw std::runtime_error("tabulated_cost_from_file: truncated header");
  std::size_t total = 1;
  for (std::uint64_t n : shape) {
    if (n == 0) throw std::runtime_error("tabulated_cost_from_file: zero axis length");
    total *= static_cast<std::size_t>(n);
  }
  std::vector<double> values(total);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(total * 8));
  if (!in) throw std::runtime_error("tabulated_cost_from_file: truncated values");
  if (axes.size() != m) {
    throw std::invalid_argument("tabulated_cost_from_file: axes/arity mismatch");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (axes[i].size() != shape[i]) {
      throw std::invalid_argument("tabulated_cost_from_file: axis length does not match header");
    }
  }
  return tabulated_cost(std::move(axes), std::move(values));
}

void write_tabulated_file(const std::string& path, const std::vector<int>& shape,
                          const std::vector<double>& values) {
  static_assert(std::endian::native == std::endian::little,
                "tabulated file i/o assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_tabulated_file: cannot open " + path);
  const std::uint64_t m = shape.size();
  out.write(reinterpret_cast<const char*>(&m), sizeof(m));
  std::size_t total = 1;
  for (int n : shape) {
    const std::uint64_t v = static_cast<std::uint64_t>(n);
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    total *= static_cast<std::size_t>(n);
  }
  if (total != values.size()) {
    throw std::invalid_argument("write_tabulated_file: value count does not match shape");
  }
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * 8));
  if (!out) throw std::runtime_error("write_tabulated_file: write failed");
}

CostFunction custom_cost(CustomCost spec) {
  return CostFunction(std::make_shared<detail::CustomImpl>(std::move(spec)));
}

CostFunction scale_cost(const CostFunction& c, double alpha) {
  return CostFunction(std::make_shared<detail::ScaledImpl>(c.impl_ptr(), alpha));
}

namespace {

const detail::InfimalImpl& infimal_impl_of(const CostFunction& c) {
  const auto* inf = dynamic_cast<const detail::InfimalImpl*>(&c.impl());
  if (!inf) throw std::invalid_argument("cost is not an infimal-convolution kind");
  return *inf;
}

}  // namespace

const std::vector<CostFunction>& infimal_parts(const CostFunction& c) {
  return infimal_impl_of(c).parts();
}

const BlockPartition& infimal_partition(const CostFunction& c) {
  return infimal_impl_of(c).partition();
}

// --- gradients and argmin ---------------------------------------------------

namespace {

Vec central_difference_grad(const detail::CostImpl& impl, const Tuple& x, int block) {
  Tuple probe = x;
  Vec g(impl.dims()[block]);
  for (int k = 0; k < impl.dims()[block]; ++k) {
    const double h = tolerances::fd_step(x[block][k]);
    probe[block][k] = x[block][k] + h;
    const double fp = impl.eval(probe);
    probe[block][k] = x[block][k] - h;
    const double fm = impl.eval(probe);
    probe[block][k] = x[block][k];
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

std::vector<Vec> dedupe_by_gap(const std::vector<Vec>& candidates, double gap) {
  std::vector<Vec> uniq;
  for (const Vec& c : candidates) {
    bool seen = false;
    for (const Vec& u : uniq) {
      if ((c - u).lpNorm<Eigen::Infinity>() <= gap) {
        seen = true;
        break;
      }
    }
    if (!seen) uniq.push_back(c);
  }
  return uniq;
}

}  // namespace

GradientResult grad_block(const CostFunction& c, const Tuple& x, int block) {
  const detail::CostImpl& impl = c.impl();
  impl.check_tuple(x);
  if (block < 0 || block >= impl.arity()) {
    throw std::out_of_range("grad_block: block index out of range");
  }

  GradientResult out;
  if (auto g = impl.analytic_grad(x, block)) {
    out.gradient = std::move(*g);
    return out;
  }

  if (const auto* inf = dynamic_cast<const detail::InfimalImpl*>(&impl)) {
    const auto minimized = inf->minimize(x);
    std::vector<Vec> candidates;
    candidates.reserve(minimized.clusters.size());
    for (const auto& cluster : minimized.clusters) {
      candidates.push_back(inf->envelope_grad(x, block, cluster.point));
    }
    const std::vector<Vec> uniq = dedupe_by_gap(candidates, tolerances::nondifferentiable_gap);
    if (uniq.size() <= 1) {
      out.gradient = candidates.front();
      return out;
    }
    out.differentiable = false;
    out.witnesses = uniq;
    return out;
  }

  out.gradient = central_difference_grad(impl, x, block);
  return out;
}

std::vector<ArgminCluster> argmin_y(const CostFunction& c, const Tuple& x) {
  const auto* inf = dynamic_cast<const detail::InfimalImpl*>(&c.impl());
  if (!inf) throw std::invalid_argument("argmin_y: cost is not an infimal-convolution kind");
  return inf->minimize(x).clusters;
}

CriticalityReport argmin_criticality_check(const CostFunction& c, const Tuple& x, double tol) {
  const auto* inf = dynamic_cast<const detail::InfimalImpl*>(&c.impl());
  if (!inf) {
    throw std::invalid_argument(
        "argmin_criticality_check: cost is not an infimal-convolution kind");
  }
  CriticalityReport report;
  for (const ArgminCluster& cluster : inf->minimize(x).clusters) {
    if (!cluster.interior) {
      ++report.boundary_minimizers;
      continue;
    }
    ++report.interior_minimizers;
    const double norm = inf->inner_y_gradient(x, cluster.point).norm();
    report.max_interior_gradient_norm = std::max(report.max_interior_gradient_norm, norm);
  }
  report.pass = report.max_interior_gradient_norm <= tol;
  return report;
}

}  // namespace mmot
