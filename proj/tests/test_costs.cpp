#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mmot/costs.hpp"

using namespace mmot;

namespace {

Vec pt(double x) { return Vec::Constant(1, x); }

Tuple tuple1(std::initializer_list<double> xs) {
  Tuple t;
  for (double x : xs) t.push_back(pt(x));
  return t;
}

// Independent central-difference oracle for gradients (not the library path).
Vec fd_grad_oracle(const CostFunction& c, const Tuple& x, int block, double h = 1e-6) {
  Tuple probe = x;
  Vec g(x[block].size());
  for (int k = 0; k < x[block].size(); ++k) {
    probe[block][k] = x[block][k] + h;
    const double fp = c(probe);
    probe[block][k] = x[block][k] - h;
    const double fm = c(probe);
    probe[block][k] = x[block][k];
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

std::vector<Tuple> seeded_tuples(int m, int d, int count, unsigned seed, double lo = 0.05,
                                 double hi = 0.95) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(lo, hi);
  std::vector<Tuple> out;
  for (int s = 0; s < count; ++s) {
    Tuple x(m);
    for (int i = 0; i < m; ++i) {
      x[i] = Vec(d);
      for (int k = 0; k < d; ++k) x[i][k] = unif(gen);
    }
    out.push_back(std::move(x));
  }
  return out;
}

YDomain unit_y_lattice(double lo = -0.5, double hi = 1.5, int counts = 33) {
  return YDomain::lattice(Space::box(1, lo, hi, "Y"), {counts});
}

}  // namespace

TEST_CASE("gangbo_swiech evaluation") {
  const CostFunction c3 = gangbo_swiech(3, 1);
  CHECK(c3(tuple1({0.0, 1.0, 2.0})) == doctest::Approx(6.0));
  const CostFunction c2 = gangbo_swiech(2, 1);
  CHECK(c2(tuple1({0.0, 1.0})) == doctest::Approx(1.0));
  const CostFunction c4 = gangbo_swiech(4, 1);
  CHECK(c4(tuple1({0.0, 1.0, 2.0, 3.0})) == doctest::Approx(20.0));

  const CostFunction cd = gangbo_swiech(3, 2);
  Tuple diag(3, Vec::Constant(2, 0.37));
  CHECK(cd(diag) == doctest::Approx(0.0));

  CHECK_THROWS_AS(c3(tuple1({0.0, 1.0})), std::invalid_argument);
  CHECK_THROWS_AS(gangbo_swiech(1, 1), std::invalid_argument);
}

TEST_CASE("heinich evaluation and gradients") {
  const CostFunction c = heinich(3, 1, neg_squared_norm());
  CHECK(c(tuple1({0.0, 1.0, 2.0})) == doctest::Approx(-9.0));
  CHECK(c(tuple1({1.0, 1.0, 1.0})) == doctest::Approx(-9.0));
  const Tuple x = tuple1({0.0, 1.0, 2.0});
  for (int b = 0; b < 3; ++b) {
    const GradientResult g = grad_block(c, x, b);
    REQUIRE(g.differentiable);
    CHECK(g.gradient[0] == doctest::Approx(-6.0));
  }
}

TEST_CASE("chain_bilinear evaluation and gradients") {
  const CostFunction c0 = chain_bilinear(zero_two_block(1), 1);
  CHECK(c0(tuple1({1.0, 2.0, 3.0})) == doctest::Approx(8.0));
  const CostFunction cg = chain_bilinear(dot_two_block(1), 1);
  CHECK(cg(tuple1({1.0, 1.0, 1.0})) == doctest::Approx(3.0));
  const GradientResult g = grad_block(cg, tuple1({1.0, 2.0, 3.0}), 0);
  REQUIRE(g.differentiable);
  CHECK(g.gradient[0] == doctest::Approx(5.0));
}

TEST_CASE("analytic gradients agree with the FD oracle") {
  const CostFunction c = gangbo_swiech(3, 1);
  const Tuple x = tuple1({0.0, 1.0, 2.0});
  const GradientResult g = grad_block(c, x, 0);
  REQUIRE(g.differentiable);
  CHECK(g.gradient[0] == doctest::Approx(-6.0));

  const CostFunction cd = gangbo_swiech(4, 2);
  const CostFunction h = heinich(4, 2, neg_squared_norm());
  const CostFunction chain = chain_bilinear(dot_two_block(2), 2);
  for (const Tuple& t : seeded_tuples(4, 2, 10, 77)) {
    for (int b = 0; b < 4; ++b) {
      for (const CostFunction* cc : {&cd, &h}) {
        const GradientResult gr = grad_block(*cc, t, b);
        REQUIRE(gr.differentiable);
        CHECK((gr.gradient - fd_grad_oracle(*cc, t, b)).lpNorm<Eigen::Infinity>() < 1e-6);
      }
    }
  }
  for (const Tuple& t : seeded_tuples(3, 2, 10, 78)) {
    for (int b = 0; b < 3; ++b) {
      const GradientResult gr = grad_block(chain, t, b);
      REQUIRE(gr.differentiable);
      CHECK((gr.gradient - fd_grad_oracle(chain, t, b)).lpNorm<Eigen::Infinity>() < 1e-6);
    }
  }
  CHECK_THROWS_AS(grad_block(c, x, 3), std::out_of_range);
}

TEST_CASE("matching cost with exact minimizer callback evaluates the closed form") {
  YDomain y = unit_y_lattice(-1.0, 3.0, 5);
  y.exact_minimizer = [](const Tuple& x) {
    Vec mean = Vec::Zero(x[0].size());
    for (const Vec& xi : x) mean += xi;
    return Vec(mean / static_cast<double>(x.size()));
  };
  const CostFunction c = quadratic_matching(3, 1, y);
  CHECK(c.smoothness() == Smoothness::everywhere_smooth);
  CHECK(c(tuple1({0.0, 1.0, 2.0})) == doctest::Approx(2.0));
}

TEST_CASE("matching cost via grid plus refinement") {
  const CostFunction c = quadratic_matching(3, 1, unit_y_lattice(-1.0, 3.0, 33));
  CHECK(c.kind() == CostKind::matching);
  CHECK(c.smoothness() == Smoothness::semiconcave_nonsmooth);
  CHECK(std::abs(c(tuple1({0.0, 1.0, 2.0})) - 2.0) < 1e-9);
  // y* = a makes the cost vanish on the diagonal
  CHECK(std::abs(c(tuple1({0.4, 0.4, 0.4}))) < 1e-12);

  const CostFunction c2 = quadratic_matching(2, 1, unit_y_lattice(-1.0, 3.0, 33));
  CHECK(std::abs(c2(tuple1({0.0, 2.0})) - 2.0) < 1e-9);
}

TEST_CASE("degenerate single-block infimal convolution") {
  // c_1(X_1, y) = |y|^2 ignores X_1 entirely; the minimum is the constant 0.
  CustomCost part;
  part.block_dims = {1, 1};
  part.domains = {Space::box(1, 0.0, 1.0), Space::box(1, -1.0, 1.0)};
  part.value = [](const Tuple& x) { return x[1].squaredNorm(); };
  const CostFunction c = infimal_convolution(
      {custom_cost(part)}, BlockPartition::of({0, 1}),
      YDomain::lattice(Space::box(1, -1.0, 1.0), {21}));
  CHECK(std::abs(c(tuple1({0.3}))) < 1e-12);
  CHECK(std::abs(c(tuple1({0.9}))) < 1e-12);
}

TEST_CASE("matching equals gangbo_swiech/3 and the closed form on seeded tuples") {
  const CostFunction match = quadratic_matching(3, 1, unit_y_lattice(-1.0, 2.0, 33));
  const CostFunction gs = gangbo_swiech(3, 1);
  for (const Tuple& x : seeded_tuples(3, 1, 50, 1234)) {
    // independent closed-form oracle: sum_i |x_i - mean|^2
    Vec mean = Vec::Zero(1);
    for (const Vec& xi : x) mean += xi;
    mean /= 3.0;
    double oracle = 0.0;
    for (const Vec& xi : x) oracle += (xi - mean).squaredNorm();
    const double via_grid = match(x);
    CHECK(std::abs(via_grid - oracle) < 1e-9);
    CHECK(std::abs(via_grid - gs(x) / 3.0) < 1e-9);
  }
}

TEST_CASE("envelope gradient at the barycenter and against finite differences") {
  const CostFunction c = quadratic_matching(3, 1, unit_y_lattice(-1.0, 2.0, 33));
  const GradientResult g = grad_block(c, tuple1({0.0, 1.0, 2.0}), 0);
  REQUIRE(g.differentiable);
  CHECK(g.gradient[0] == doctest::Approx(-2.0).epsilon(1e-7));

  for (const Tuple& x : seeded_tuples(3, 1, 100, 555)) {
    for (int b = 0; b < 3; ++b) {
      const GradientResult ge = grad_block(c, x, b);
      REQUIRE(ge.differentiable);
      const Vec fd = fd_grad_oracle(c, x, b, 1e-5);
      CHECK((ge.gradient - fd).lpNorm<Eigen::Infinity>() < 1e-4);
    }
  }
}

TEST_CASE("two-branch minimum is nondifferentiable where both branches are active") {
  // min(|x1 - x2|^2, |x1 + x2|^2) realized as an infimal convolution over a
  // localized y parameter: (x1 - y x2)^2 + (y^2 - 1)^2 with minimizers pinned
  // to y = +-1.
  CustomCost part;
  part.block_dims = {1, 1, 1};
  part.domains = {Space::box(1, -2.0, 2.0), Space::box(1, -2.0, 2.0),
                  Space::box(1, -1.5, 1.5)};
  part.value = [](const Tuple& x) {
    const double v = x[0][0] - x[2][0] * x[1][0];
    const double loc = x[2][0] * x[2][0] - 1.0;
    return v * v + loc * loc;
  };
  const CostFunction c = infimal_convolution(
      {custom_cost(part)}, BlockPartition::of({0, 2}),
      YDomain::lattice(Space::box(1, -1.5, 1.5), {31}));

  // both branches active at (1, 0): candidate gradients in x2 are -2 and +2
  const GradientResult g = grad_block(c, tuple1({1.0, 0.0}), 1);
  REQUIRE_FALSE(g.differentiable);
  REQUIRE(g.witnesses.size() == 2);
  std::vector<double> w{g.witnesses[0][0], g.witnesses[1][0]};
  std::sort(w.begin(), w.end());
  CHECK(w[0] == doctest::Approx(-2.0).epsilon(1e-5));
  CHECK(w[1] == doctest::Approx(2.0).epsilon(1e-5));

  // away from the crease only one branch is active
  const GradientResult smooth = grad_block(c, tuple1({0.5, 0.4}), 1);
  CHECK(smooth.differentiable);
}

TEST_CASE("argmin_y clusters") {
  const CostFunction match = quadratic_matching(3, 1, unit_y_lattice(-1.0, 2.0, 33));
  const auto clusters = argmin_y(match, tuple1({0.0, 1.0, 2.0}));
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].point[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(clusters[0].interior);

  const CostFunction sym =
      quadratic_matching(2, 1, YDomain::lattice(Space::box(1, -1.0, 1.0), {21}));
  const auto at_zero = argmin_y(sym, tuple1({-1.0, 1.0}));
  REQUIRE(at_zero.size() == 1);
  CHECK(std::abs(at_zero[0].point[0]) < 1e-8);

  // symmetric double well: two global minimizers by construction
  CustomCost well;
  well.block_dims = {1, 1};
  well.domains = {Space::box(1, 0.0, 1.0), Space::box(1, -1.5, 1.5)};
  well.value = [](const Tuple& x) {
    const double v = x[1][0] * x[1][0] - 1.0;
    return v * v;
  };
  const CostFunction dw = infimal_convolution(
      {custom_cost(well)}, BlockPartition::of({0, 1}),
      YDomain::lattice(Space::box(1, -1.5, 1.5), {31}));
  const auto wells = argmin_y(dw, tuple1({0.5}));
  REQUIRE(wells.size() == 2);
  CHECK(wells[0].point[0] == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(wells[1].point[0] == doctest::Approx(1.0).epsilon(1e-7));

  CHECK_THROWS_AS(argmin_y(gangbo_swiech(2, 1), tuple1({0.0, 1.0})), std::invalid_argument);
}

TEST_CASE("minimization soundness: eval is a lower envelope of the inner sums") {
  const YDomain y = unit_y_lattice(-1.0, 2.0, 17);
  const CostFunction match = quadratic_matching(3, 1, y);
  for (const Tuple& x : seeded_tuples(3, 1, 20, 2024)) {
    const double v = match(x);
    for (const Vec& grid_y : y.grid) {
      double inner = 0.0;
      for (const Vec& xi : x) inner += (xi - grid_y).squaredNorm();
      CHECK(v <= inner + 1e-12);
    }
    const auto clusters = argmin_y(match, x);
    REQUIRE(!clusters.empty());
    double inner_at_min = 0.0;
    for (const Vec& xi : x) inner_at_min += (xi - clusters[0].point).squaredNorm();
    CHECK(v == doctest::Approx(inner_at_min).epsilon(1e-12));
  }
}

TEST_CASE("argmin criticality") {
  const CostFunction match =
      quadratic_matching(3, 1, YDomain::lattice(Space::box(1, -5.0, 5.0), {41}));
  const CriticalityReport rep = argmin_criticality_check(match, tuple1({0.0, 1.0, 2.0}), 1e-7);
  CHECK(rep.interior_minimizers == 1);
  CHECK(rep.boundary_minimizers == 0);
  CHECK(rep.max_interior_gradient_norm <= 1e-7);
  CHECK(rep.pass);

  // minimizer pinned at the Y boundary: reported, not failed
  const CostFunction clamped =
      quadratic_matching(3, 1, YDomain::lattice(Space::box(1, 0.0, 0.5), {11}));
  const CriticalityReport at_edge =
      argmin_criticality_check(clamped, tuple1({0.0, 1.0, 2.0}), 1e-7);
  CHECK(at_edge.boundary_minimizers == 1);
  CHECK(at_edge.interior_minimizers == 0);
  CHECK(at_edge.pass);

  // single block, c_1(X_1, y) = |X_1 - y|^2: critical at y* = X_1
  const CostFunction single = infimal_convolution(
      {quadratic_pair_cost(1, Space::box(1, 0.0, 1.0), Space::box(1, -2.0, 2.0))},
      BlockPartition::of({0, 1}), YDomain::lattice(Space::box(1, -2.0, 2.0), {21}));
  const CriticalityReport crit = argmin_criticality_check(single, tuple1({0.3}), 1e-7);
  CHECK(crit.interior_minimizers == 1);
  CHECK(crit.pass);

  CHECK_THROWS_AS(argmin_criticality_check(gangbo_swiech(2, 1), tuple1({0.0, 1.0}), 1e-7),
                  std::invalid_argument);
}

TEST_CASE("smooth kinds never report nondifferentiable") {
  const std::vector<CostFunction> smooth{gangbo_swiech(3, 2),
                                         heinich(3, 2, neg_squared_norm()),
                                         chain_bilinear(dot_two_block(2), 2)};
  for (const CostFunction& c : smooth) {
    for (const Tuple& x : seeded_tuples(c.arity(), 2, 25, 4321)) {
      for (int b = 0; b < c.arity(); ++b) {
        CHECK(grad_block(c, x, b).differentiable);
      }
    }
  }
}

TEST_CASE("tabulated cost: file round trip, node values and interpolation") {
  const std::vector<int> shape{2, 3};
  // values[i][j] = 10 i + j, row-major
  const std::vector<double> values{0, 1, 2, 10, 11, 12};
  const std::string path = "tab_cost_test.bin";
  write_tabulated_file(path, shape, values);
  const std::vector<std::vector<double>> axes{{0.0, 1.0}, {0.0, 0.5, 1.0}};
  const CostFunction c = tabulated_cost_from_file(path, axes);
  CHECK(c.kind() == CostKind::tabulated);
  CHECK(c(tuple1({0.0, 0.5})) == doctest::Approx(1.0));
  CHECK(c(tuple1({1.0, 1.0})) == doctest::Approx(12.0));
  // multilinear midpoint
  CHECK(c(tuple1({0.5, 0.25})) == doctest::Approx(0.5 * 0.5 + 0.5 * 10.5));
  // FD gradient path works on tabulated kinds
  const GradientResult g = grad_block(c, tuple1({0.5, 0.25}), 0);
  CHECK(g.differentiable);
  CHECK(g.gradient[0] == doctest::Approx(10.0).epsilon(1e-6));

  CHECK_THROWS_AS(tabulated_cost_from_file(path, {{0.0, 1.0}, {0.0, 1.0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(tabulated_cost({{0.0, 1.0}}, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("scale_cost forwards evaluation and derivatives") {
  const CostFunction c = scale_cost(gangbo_swiech(3, 1), -1.0 / 3.0);
  const Tuple x = tuple1({0.0, 1.0, 2.0});
  CHECK(c(x) == doctest::Approx(-2.0));
  const GradientResult g = grad_block(c, x, 0);
  REQUIRE(g.differentiable);
  CHECK(g.gradient[0] == doctest::Approx(2.0));
}

TEST_CASE("block partition and y-domain validation") {
  CHECK_THROWS_AS(BlockPartition::of({0, 2, 1}).validate(3), std::invalid_argument);
  CHECK_THROWS_AS(BlockPartition::of({0, 1}).validate(3), std::invalid_argument);
  const BlockPartition p = BlockPartition::of({0, 2, 3});
  p.validate(3);
  CHECK(p.blocks() == 2);
  CHECK(p.block_of(1) == 0);
  CHECK(p.block_of(2) == 1);

  CHECK_THROWS_AS(YDomain::lattice(Space::box(1, 0.0, 1.0), {0}), std::invalid_argument);
  const YDomain lat = YDomain::lattice(Space::box(2, 0.0, 1.0), {3, 2});
  CHECK(lat.grid.size() == 6);
  CHECK(lat.refine_radius[0] == doctest::Approx(0.5));
  CHECK(lat.refine_radius[1] == doctest::Approx(1.0));
}
