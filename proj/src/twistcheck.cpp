#include "mmot/twistcheck.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "detail/cost_impl.hpp"
#include "detail/optimize.hpp"
#include "detail/rng.hpp"

namespace mmot {

namespace {

double tuple_distance(const Tuple& a, const Tuple& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    d = std::max(d, (a[k] - b[k]).lpNorm<Eigen::Infinity>());
  }
  return d;
}

bool is_infimal(const CostFunction& c) {
  return dynamic_cast<const detail::InfimalImpl*>(&c.impl()) != nullptr;
}

Mat fd_mixed_hessian_values(const CostFunction& c, const Tuple& x, int i, int j) {
  const int di = c.block_dims()[i];
  const int dj = c.block_dims()[j];
  Mat h(di, dj);
  Tuple probe = x;
  for (int a = 0; a < di; ++a) {
    const double ha = tolerances::fd2_step(x[i][a]);
    for (int b = 0; b < dj; ++b) {
      if (i == j && a == b) {
        probe[i][a] = x[i][a] + ha;
        const double fp = c(probe);
        probe[i][a] = x[i][a] - ha;
        const double fm = c(probe);
        probe[i][a] = x[i][a];
        h(a, b) = (fp - 2.0 * c(x) + fm) / (ha * ha);
        continue;
      }
      const double hb = tolerances::fd2_step(x[j][b]);
      probe[i][a] = x[i][a] + ha;
      probe[j][b] = x[j][b] + hb;
      const double fpp = c(probe);
      probe[j][b] = x[j][b] - hb;
      const double fpm = c(probe);
      probe[i][a] = x[i][a] - ha;
      const double fmm = c(probe);
      probe[j][b] = x[j][b] + hb;
      const double fmp = c(probe);
      probe[i][a] = x[i][a];
      probe[j][b] = x[j][b];
      h(a, b) = (fpp - fpm - fmp + fmm) / (4.0 * ha * hb);
    }
  }
  return h;
}

// Differences of envelope gradients; throws when a stencil point is
// nondifferentiable, per the mixed_hessian error contract.
Mat fd_mixed_hessian_gradients(const CostFunction& c, const Tuple& x, int i, int j) {
  const int di = c.block_dims()[i];
  const int dj = c.block_dims()[j];
  Mat h(di, dj);
  Tuple probe = x;
  for (int b = 0; b < dj; ++b) {
    const double hb = tolerances::fd_step(x[j][b]);
    probe[j][b] = x[j][b] + hb;
    const GradientResult gp = grad_block(c, probe, i);
    probe[j][b] = x[j][b] - hb;
    const GradientResult gm = grad_block(c, probe, i);
    probe[j][b] = x[j][b];
    if (!gp.differentiable || !gm.differentiable) {
      throw std::runtime_error("mixed_hessian: nondifferentiable point encountered");
    }
    h.col(b) = (gp.gradient - gm.gradient) / (2.0 * hb);
  }
  return h;
}

}  // namespace

Mat mixed_hessian(const CostFunction& c, const Tuple& x, int i, int j, HessianMode mode) {
  c.impl().check_tuple(x);
  const int m = c.arity();
  if (i < 0 || i >= m || j < 0 || j >= m) {
    throw std::out_of_range("mixed_hessian: block index out of range");
  }
  if (mode == HessianMode::automatic) {
    if (auto h = c.impl().analytic_mixed_hessian(x, i, j)) return *h;
  }
  if (is_infimal(c)) return fd_mixed_hessian_gradients(c, x, i, j);
  return fd_mixed_hessian_values(c, x, i, j);
}

// --- support sections and twist audit -------------------------------------------

SupportSection section_of_support(const Coupling& coupling, const CostFunction& c,
                                  int x1_index) {
  const MarginalSystem& system = coupling.system();
  if (x1_index < 0 || x1_index >= system.marginal(0).size()) {
    throw std::out_of_range("section_of_support: x1 index out of range");
  }
  SupportSection section;
  section.x1_index = x1_index;
  section.x1 = system.marginal(0).atom(x1_index);
  for (const CouplingEntry& e : coupling.entries()) {
    if (e.index[0] != x1_index) continue;
    const Tuple x = system.tuple_at(e.index);
    Tuple partner(x.begin() + 1, x.end());
    section.partners.push_back(std::move(partner));
    section.gradients.push_back(grad_block(c, x, 0));
  }
  // Positive weights force every first-marginal atom into the support.
  if (section.partners.empty()) {
    throw std::runtime_error("section_of_support: empty section (violated measure invariants)");
  }
  return section;
}

GraphReport graph_check(const Coupling& coupling) {
  const int n1 = coupling.system().marginal(0).size();
  std::vector<std::vector<std::vector<int>>> partners(n1);
  for (const CouplingEntry& e : coupling.entries()) {
    std::vector<int> rest(e.index.begin() + 1, e.index.end());
    auto& list = partners[e.index[0]];
    if (std::find(list.begin(), list.end(), rest) == list.end()) list.push_back(rest);
  }
  GraphReport report;
  report.is_graph = true;
  for (int a = 0; a < n1; ++a) {
    if (partners[a].size() != 1) {
      report.is_graph = false;
      if (partners[a].size() > 1) report.multivalued.push_back(a);
    }
  }
  if (report.is_graph) {
    report.map.reserve(n1);
    for (int a = 0; a < n1; ++a) report.map.push_back(partners[a].front());
  }
  return report;
}

TwistReport check_twist_on_support(const CostFunction& c, const Coupling& coupling,
                                   double grad_tol, double point_tol) {
  TwistReport report;
  const int n1 = coupling.system().marginal(0).size();
  for (int a = 0; a < n1; ++a) {
    const SupportSection section = section_of_support(coupling, c, a);
    ++report.sections_audited;
    std::vector<int> usable;
    for (std::size_t p = 0; p < section.partners.size(); ++p) {
      if (section.gradients[p].differentiable) {
        usable.push_back(static_cast<int>(p));
      } else {
        ++report.nondifferentiable_excluded;
      }
    }
    for (std::size_t u = 0; u < usable.size(); ++u) {
      for (std::size_t v = u + 1; v < usable.size(); ++v) {
        const int p = usable[u], q = usable[v];
        ++report.pairs_compared;
        const double gd = (section.gradients[p].gradient - section.gradients[q].gradient)
                              .lpNorm<Eigen::Infinity>();
        const double pd = tuple_distance(section.partners[p], section.partners[q]);
        if (gd <= grad_tol && pd > point_tol) {
          report.collisions.push_back({a, p, q, gd, pd});
        }
      }
    }
  }
  report.pass = report.collisions.empty();
  return report;
}

// --- sampling-based differential audits -------------------------------------------

std::vector<Tuple> sample_domain_tuples(const CostFunction& c, int count, std::uint64_t seed) {
  detail::Rng rng(seed);
  std::vector<Tuple> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    Tuple x(c.arity());
    for (int i = 0; i < c.arity(); ++i) {
      const Space& box = c.domains()[i];
      x[i] = Vec(box.dim);
      for (int k = 0; k < box.dim; ++k) x[i][k] = rng.uniform(box.lower[k], box.upper[k]);
    }
    out.push_back(std::move(x));
  }
  return out;
}

NondegeneracyReport nondegeneracy_check(const CostFunction& c, const std::vector<Tuple>& samples,
                                        double threshold, HessianMode mode) {
  const int m = c.arity();
  if (c.block_dims()[0] != c.block_dims()[m - 1]) {
    throw std::invalid_argument("nondegeneracy_check: d_1 must equal d_m");
  }
  NondegeneracyReport report;
  report.min_abs_det = std::numeric_limits<double>::infinity();
  for (const Tuple& x : samples) {
    const Mat h = mixed_hessian(c, x, 0, m - 1, mode);
    report.min_abs_det = std::min(report.min_abs_det, std::abs(h.determinant()));
    ++report.samples;
  }
  if (report.samples == 0) report.min_abs_det = 0.0;
  report.pass = report.samples > 0 && report.min_abs_det > threshold;
  return report;
}

OneMTwistReport one_m_twist_check(const CostFunction& c, const Tuple& base,
                                  const std::vector<Vec>& xm_grid, double grad_tol,
                                  double point_tol) {
  if (xm_grid.size() < 2) {
    throw std::invalid_argument("one_m_twist_check: grid needs at least two points");
  }
  const int m = c.arity();
  OneMTwistReport report;
  report.min_gradient_distance = std::numeric_limits<double>::infinity();
  std::vector<Vec> grads;
  std::vector<Vec> points;
  Tuple x = base;
  for (const Vec& xm : xm_grid) {
    x[m - 1] = xm;
    const GradientResult g = grad_block(c, x, 0);
    if (!g.differentiable) {
      ++report.nondifferentiable_excluded;
      continue;
    }
    grads.push_back(g.gradient);
    points.push_back(xm);
  }
  for (std::size_t a = 0; a < grads.size(); ++a) {
    for (std::size_t b = a + 1; b < grads.size(); ++b) {
      ++report.compared;
      const double gd = (grads[a] - grads[b]).lpNorm<Eigen::Infinity>();
      const double pd = (points[a] - points[b]).lpNorm<Eigen::Infinity>();
      if (pd > point_tol) {
        report.min_gradient_distance = std::min(report.min_gradient_distance, gd);
        if (gd <= grad_tol) {
          report.colliding_pairs.emplace_back(points[a], points[b]);
        }
      }
    }
  }
  if (!std::isfinite(report.min_gradient_distance)) report.min_gradient_distance = 0.0;
  report.injective = report.colliding_pairs.empty();
  return report;
}

// --- tensors of the differential conditions ----------------------------------------

namespace {

struct MiddleLayout {
  std::vector<int> offsets;  // per middle block i = 1..m-2 (zero-based)
  int side = 0;
};

MiddleLayout middle_layout(const CostFunction& c) {
  const int m = c.arity();
  if (m < 3) throw std::invalid_argument("tensor operations need m >= 3");
  MiddleLayout layout;
  for (int i = 1; i + 1 < m; ++i) {
    layout.offsets.push_back(layout.side);
    layout.side += c.block_dims()[i];
  }
  return layout;
}

Mat inverse_first_last(const CostFunction& c, const Tuple& ybar, HessianMode mode) {
  const int m = c.arity();
  if (c.block_dims()[0] != c.block_dims()[m - 1]) {
    throw std::invalid_argument("tensor_S: d_1 must equal d_m for the mixed-Hessian inverse");
  }
  const Mat first_last = mixed_hessian(c, ybar, 0, m - 1, mode);
  Eigen::FullPivLU<Mat> lu(first_last);
  if (!lu.isInvertible()) {
    throw std::runtime_error("tensor_S: singular D^2_{x1 xm} c at the base point");
  }
  return lu.inverse();
}

}  // namespace

Mat tensor_S(const CostFunction& c, const Tuple& ybar, HessianMode mode) {
  const int m = c.arity();
  const MiddleLayout layout = middle_layout(c);
  const Mat inv = inverse_first_last(c, ybar, mode);

  Mat S = Mat::Zero(layout.side, layout.side);
  for (int bi = 1; bi + 1 < m; ++bi) {
    const Mat i_last = mixed_hessian(c, ybar, bi, m - 1, mode);
    for (int bj = 1; bj + 1 < m; ++bj) {
      Mat block = i_last * inv * mixed_hessian(c, ybar, 0, bj, mode);
      if (bi != bj) block -= mixed_hessian(c, ybar, bi, bj, mode);
      S.block(layout.offsets[bi - 1], layout.offsets[bj - 1], c.block_dims()[bi],
              c.block_dims()[bj]) = block;
    }
  }
  return S;
}

Mat tensor_H(const CostFunction& c, const Tuple& ybar, const std::vector<Tuple>& anchors,
             HessianMode mode) {
  const int m = c.arity();
  const MiddleLayout layout = middle_layout(c);
  if (static_cast<int>(anchors.size()) != m - 2) {
    throw std::invalid_argument("tensor_H: one anchor tuple per middle index required");
  }
  Mat H = Mat::Zero(layout.side, layout.side);
  for (int bi = 1; bi + 1 < m; ++bi) {
    const Tuple& anchor = anchors[bi - 1];
    c.impl().check_tuple(anchor);
    if ((anchor[bi] - ybar[bi]).lpNorm<Eigen::Infinity>() > 1e-12) {
      throw std::invalid_argument("tensor_H: anchor must pin its own middle coordinate");
    }
    const Mat diff =
        mixed_hessian(c, anchor, bi, bi, mode) - mixed_hessian(c, ybar, bi, bi, mode);
    H.block(layout.offsets[bi - 1], layout.offsets[bi - 1], c.block_dims()[bi],
            c.block_dims()[bi]) = diff;
  }
  return H;
}

TensorScan tensor_T_scan(const CostFunction& c, int base_samples, int anchors_per_base,
                         std::uint64_t seed, const TensorScanOptions& options) {
  const int m = c.arity();
  if (m < 3) throw std::invalid_argument("tensor_T_scan: m >= 3 required");
  if (base_samples < 1 || anchors_per_base < 1) {
    throw std::invalid_argument("tensor_T_scan: sample counts must be >= 1");
  }
  detail::Rng rng(seed);
  auto draw_tuple = [&](detail::Rng& r) {
    Tuple x(m);
    for (int i = 0; i < m; ++i) {
      const Space& box = c.domains()[i];
      x[i] = Vec(box.dim);
      for (int k = 0; k < box.dim; ++k) x[i][k] = r.uniform(box.lower[k], box.upper[k]);
    }
    return x;
  };

  TensorScan scan;
  scan.max_eigenvalue = -std::numeric_limits<double>::infinity();
  scan.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (int s = 0; s < base_samples; ++s) {
    detail::Rng stream = rng.derive(static_cast<std::uint64_t>(s));
    const Tuple ybar = draw_tuple(stream);
    for (int t = 0; t < anchors_per_base; ++t) {
      std::vector<Tuple> anchors;
      anchors.reserve(m - 2);
      for (int bi = 1; bi + 1 < m; ++bi) {
        Tuple anchor = draw_tuple(stream);
        anchor[bi] = ybar[bi];
        anchors.push_back(std::move(anchor));
      }
      TensorReport report;
      report.base = ybar;
      report.anchors = anchors;
      try {
        report.S = tensor_S(c, ybar, options.mode);
      } catch (const std::runtime_error&) {
        ++scan.skipped_singular;
        continue;
      }
      report.H = tensor_H(c, ybar, anchors, options.mode);
      report.T = report.S + report.H;
      report.pre_symmetrization_asymmetry =
          (report.T - report.T.transpose()).cwiseAbs().maxCoeff();
      const Mat sym = 0.5 * (report.T + report.T.transpose());
      Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
      report.eigenvalues_T = eig.eigenvalues();
      report.negative_definite =
          report.eigenvalues_T.maxCoeff() < -options.eigenvalue_margin;
      scan.max_eigenvalue = std::max(scan.max_eigenvalue, report.eigenvalues_T.maxCoeff());
      scan.min_eigenvalue = std::min(scan.min_eigenvalue, report.eigenvalues_T.minCoeff());
      scan.reports.push_back(std::move(report));
    }
  }
  scan.negative_on_samples =
      !scan.reports.empty() && scan.max_eigenvalue < -options.eigenvalue_margin;
  if (scan.reports.empty()) {
    scan.max_eigenvalue = 0.0;
    scan.min_eigenvalue = 0.0;
  }
  return scan;
}

// --- Y-section sampling --------------------------------------------------------------

namespace {

// Best x_m bringing D_{x1}c to p1 over a grid plus refinement; residual is
// the Euclidean norm of the remaining gradient mismatch.
std::pair<Vec, double> solve_xm(const CostFunction& c, Tuple& x, const Vec& p1,
                                const YDomain& xm_domain) {
  const int m = c.arity();
  auto objective = [&](const Vec& xm) {
    x[m - 1] = xm;
    const GradientResult g = grad_block(c, x, 0);
    if (!g.differentiable) return 1e30;
    return (g.gradient - p1).squaredNorm();
  };
  double best = std::numeric_limits<double>::infinity();
  Vec best_xm;
  for (const Vec& xm : xm_domain.grid) {
    const double v = objective(xm);
    if (v < best) {
      best = v;
      best_xm = xm;
    }
  }
  detail::GoldenOptions gopt;
  gopt.max_sweeps = tolerances::refine_max_sweeps;
  gopt.bracket_tol = tolerances::refine_bracket_tol;
  const detail::GoldenResult refined =
      detail::golden_refine(objective, best_xm, xm_domain.refine_radius, xm_domain.space, gopt);
  return {refined.point, std::sqrt(std::max(refined.value, 0.0))};
}

}  // namespace

YSectionSample y_section_sample(const CostFunction& c, const Vec& x1, const Vec& p1,
                                const std::vector<std::vector<Vec>>& middle_grid,
                                const YDomain& xm_domain, double residual_tol) {
  const int m = c.arity();
  if (m < 3) throw std::invalid_argument("y_section_sample: m >= 3 required");
  xm_domain.validate();
  YSectionSample out;
  out.x1 = x1;
  out.p1 = p1;
  Tuple x(m);
  x[0] = x1;
  for (const auto& middles : middle_grid) {
    if (static_cast<int>(middles.size()) != m - 2) {
      throw std::invalid_argument("y_section_sample: middle tuple arity mismatch");
    }
    ++out.attempted;
    for (int i = 1; i + 1 < m; ++i) x[i] = middles[i - 1];
    x[m - 1] = xm_domain.grid.front();
    const auto [xm, residual] = solve_xm(c, x, p1, xm_domain);
    if (residual <= residual_tol) {
      out.samples.push_back({middles, xm, residual});
    }
  }
  return out;
}

ConvexityProbe convexity_probe(const YSectionSample& sample, const CostFunction& c,
                               const YDomain& xm_domain, double residual_tol, int max_pairs,
                               std::uint64_t seed) {
  ConvexityProbe probe;
  const std::size_t n = sample.samples.size();
  if (n < 2) return probe;
  const int m = c.arity();
  detail::Rng rng(seed);
  Tuple x(m);
  x[0] = sample.x1;
  for (int p = 0; p < max_pairs; ++p) {
    const std::size_t a = static_cast<std::size_t>(rng.uniform01() * n) % n;
    const std::size_t b = static_cast<std::size_t>(rng.uniform01() * n) % n;
    if (a == b) continue;
    ++probe.pairs_tested;
    for (int i = 1; i + 1 < m; ++i) {
      x[i] = 0.5 * (sample.samples[a].middles[i - 1] + sample.samples[b].middles[i - 1]);
    }
    x[m - 1] = xm_domain.grid.front();
    const auto [xm, residual] = solve_xm(c, x, sample.p1, xm_domain);
    (void)xm;
    if (residual <= residual_tol) {
      ++probe.midpoint_hits;
    } else {
      probe.advisory_convex = false;
    }
  }
  return probe;
}

}  // namespace mmot
