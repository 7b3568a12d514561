#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mmot/costs.hpp"
#include "mmot/measures.hpp"
#include "mmot/monotonicity.hpp"
#include "mmot/solver.hpp"

using namespace mmot;

namespace {

Vec pt(double x) { return Vec::Constant(1, x); }

Tuple tuple1(std::initializer_list<double> xs) {
  Tuple t;
  for (double x : xs) t.push_back(pt(x));
  return t;
}

DiscreteMeasure uniform_measure(const Space& space, std::vector<double> atoms) {
  std::vector<Vec> pts;
  for (double a : atoms) pts.push_back(pt(a));
  std::vector<double> w(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
  return DiscreteMeasure(space, std::move(pts), std::move(w));
}

}  // namespace

TEST_CASE("c_conjugate on the 2x2 quadratic tensor") {
  const Space space = Space::box(1, 0.0, 1.0);
  const MarginalSystem system{{uniform_measure(space, {0.0, 1.0}),
                               uniform_measure(space, {0.0, 1.0})}};
  const CostFunction quad = quadratic_pair_cost(1, space, space);

  std::vector<Vec> u(2);
  u[1] = Vec::Zero(2);
  Vec u1 = c_conjugate(u, quad, system, 0);
  CHECK(u1[0] == doctest::Approx(0.0));
  CHECK(u1[1] == doctest::Approx(0.0));

  u[1] = Vec(2);
  u[1] << 0.0, -1.0;
  u1 = c_conjugate(u, quad, system, 0);
  CHECK(u1[0] == doctest::Approx(0.0));  // min(0 - 0, 1 + 1)
  CHECK(u1[1] == doctest::Approx(1.0));  // min(1 - 0, 0 + 1)

  const CostTensor tensor = build_cost_tensor(system, quad);
  const Vec via_tensor = c_conjugate(u, tensor, 0);
  CHECK((u1 - via_tensor).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
}

TEST_CASE("double conjugation from LP duals never decreases the dual objective") {
  const Space space = Space::box(1, 0.0, 1.0);
  const MarginalSystem system{{random_generic_measure(space, 4, 3),
                               random_generic_measure(space, 5, 4)}};
  const CostFunction quad = quadratic_pair_cost(1, space, space);
  const CostTensor tensor = build_cost_tensor(system, quad);
  const SolveReport report = solve_exact_lp(tensor, system);

  auto dual_objective = [&](const std::vector<Vec>& u) {
    double s = 0.0;
    for (int i = 0; i < system.m(); ++i) {
      for (int a = 0; a < system.marginal(i).size(); ++a) {
        s += u[i][a] * system.marginal(i).weight(a);
      }
    }
    return s;
  };
  auto feasible = [&](const std::vector<Vec>& u) {
    for (int a = 0; a < system.marginal(0).size(); ++a) {
      for (int b = 0; b < system.marginal(1).size(); ++b) {
        if (u[0][a] + u[1][b] > tensor.at({a, b}) + 1e-12) return false;
      }
    }
    return true;
  };

  std::vector<Vec> u = report.potentials.u;
  REQUIRE(feasible(u));
  double prev = dual_objective(u);
  for (int round = 0; round < 2; ++round) {
    for (int i = 0; i < 2; ++i) {
      u[i] = c_conjugate(u, tensor, i);
      CHECK(feasible(u));
      const double now = dual_objective(u);
      CHECK(now >= prev - 1e-12);
      prev = now;
    }
  }
}

TEST_CASE("verify_splitting_set certifies LP supports with their own duals") {
  const Space space = Space::box(1, 0.0, 1.0);
  const MarginalSystem system{{random_generic_measure(space, 4, 10),
                               random_generic_measure(space, 4, 11),
                               random_generic_measure(space, 3, 12)}};
  const CostFunction c = gangbo_swiech(3, 1);
  const CostTensor tensor = build_cost_tensor(system, c);
  const SolveReport report = solve_exact_lp(tensor, system);

  const SupportSet support = SupportSet::from_coupling(report.coupling);
  const SplittingCheck check =
      verify_splitting_set(support, report.potentials, c, system, 1e-7);
  CHECK(check.certified);
  CHECK(check.max_equality_residual < 1e-7);
  CHECK(check.max_feasibility_violation < 1e-7);
}

TEST_CASE("diagonal support with zero potentials is a splitting set for gangbo_swiech") {
  const Space space = Space::box(1, 0.0, 1.0);
  const MarginalSystem system{{uniform_measure(space, {0.0, 1.0}),
                               uniform_measure(space, {0.0, 1.0}),
                               uniform_measure(space, {0.0, 1.0})}};
  const CostFunction c = gangbo_swiech(3, 1);
  SupportSet diag;
  diag.points = {tuple1({0.0, 0.0, 0.0}), tuple1({1.0, 1.0, 1.0})};
  SplittingPotentials zero;
  zero.u = {Vec::Zero(2), Vec::Zero(2), Vec::Zero(2)};
  const SplittingCheck check = verify_splitting_set(diag, zero, c, system, 1e-9);
  CHECK(check.certified);

  SupportSet off;
  off.points = {tuple1({0.5, 0.0, 0.0})};
  CHECK_THROWS_AS(verify_splitting_set(off, zero, c, system, 1e-9), std::invalid_argument);
}

TEST_CASE("anti-diagonal support is refuted by conjugate sweeps") {
  SupportSet anti;
  anti.points = {tuple1({0.0, 1.0}), tuple1({1.0, 0.0})};
  const Space space = Space::box(1, 0.0, 1.0);
  const CostFunction quad = quadratic_pair_cost(1, space, space);
  const ConjugationResult result = search_splitting_functions(anti, quad);
  CHECK(result.converged);
  CHECK_FALSE(result.certified);
  CHECK(result.equality_residual > 0.1);

  // the monotone diagonal, by contrast, is certified
  SupportSet diag;
  diag.points = {tuple1({0.0, 0.0}), tuple1({1.0, 1.0})};
  const ConjugationResult good = search_splitting_functions(diag, quad);
  CHECK(good.certified);
}

TEST_CASE("cyclical monotonicity on two-point sets") {
  const Space space = Space::box(1, 0.0, 1.0);
  const CostFunction quad = quadratic_pair_cost(1, space, space);

  SupportSet mono;
  mono.points = {tuple1({0.0, 0.0}), tuple1({1.0, 1.0})};
  const MonotonicityReport ok = is_cyclically_monotone(mono, quad, 2);
  CHECK(ok.monotone);
  CHECK(ok.max_subset_checked == 2);
  CHECK_FALSE(ok.violation.has_value());

  SupportSet anti;
  anti.points = {tuple1({0.0, 1.0}), tuple1({1.0, 0.0})};
  const MonotonicityReport bad = is_cyclically_monotone(anti, quad, 2);
  CHECK_FALSE(bad.monotone);
  REQUIRE(bad.violation.has_value());
  CHECK(bad.violation->deficit == doctest::Approx(2.0));
  CHECK(bad.violation->base_sum == doctest::Approx(2.0));
  CHECK(bad.violation->permuted_sum == doctest::Approx(0.0));

  SupportSet single;
  single.points = {tuple1({0.3, 0.7})};
  CHECK(is_cyclically_monotone(single, quad, 3).monotone);
  CHECK(order_two_monotone(single, quad).monotone);
}

TEST_CASE("order-two check equals the N_max = 2 run") {
  const Space space = Space::box(1, 0.0, 1.0);
  const CostFunction quad = quadratic_pair_cost(1, space, space);
  SupportSet anti;
  anti.points = {tuple1({0.0, 1.0}), tuple1({1.0, 0.0})};
  const MonotonicityReport a = order_two_monotone(anti, quad);
  const MonotonicityReport b = is_cyclically_monotone(anti, quad, 2);
  CHECK(a.monotone == b.monotone);
  CHECK(a.violation->deficit == doctest::Approx(b.violation->deficit));
}

TEST_CASE("LP supports are cyclically monotone for N <= 3; verdict survives relabeling") {
  std::mt19937_64 gen(555);
  const Space space = Space::box(1, 0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const MarginalSystem system{
        {random_generic_measure(space, 4, static_cast<std::uint64_t>(gen())),
         random_generic_measure(space, 4, static_cast<std::uint64_t>(gen())),
         random_generic_measure(space, 4, static_cast<std::uint64_t>(gen()))}};
    const CostFunction c = gangbo_swiech(3, 1);
    const CostTensor tensor = build_cost_tensor(system, c);
    const SolveReport report = solve_exact_lp(tensor, system);
    SupportSet support = SupportSet::from_coupling(report.coupling);
    REQUIRE(support.points.size() <= 10);

    const MonotonicityReport mono = is_cyclically_monotone(support, c, 3);
    CHECK(mono.monotone);
    CHECK(mono.max_subset_checked == 3);
    CHECK_FALSE(mono.budget_exhausted);

    std::shuffle(support.points.begin(), support.points.end(), gen);
    const MonotonicityReport shuffled = is_cyclically_monotone(support, c, 3);
    CHECK(shuffled.monotone == mono.monotone);
  }
}

TEST_CASE("a tiny budget reports partial coverage instead of a verdict") {
  // the diagonal is monotone for gangbo_swiech, so nothing ends the scan early
  SupportSet big;
  const CostFunction c = gangbo_swiech(3, 1);
  for (int i = 0; i < 10; ++i) {
    const double t = 0.05 + 0.09 * i;
    big.points.push_back(tuple1({t, t, t}));
  }
  const MonotonicityReport report = is_cyclically_monotone(big, c, 3, 50);
  CHECK(report.budget_exhausted);
  CHECK(report.monotone);  // nothing found before the budget ran out
  CHECK(report.max_subset_checked < 3);
  CHECK(report.work >= 50);
}

TEST_CASE("projected sets of solved matching instances are c_j-monotone") {
  const Space space = Space::box(1, 0.0, 1.0);
  const YDomain y = YDomain::lattice(Space::box(1, -0.5, 1.5, "Y"), {33});
  const CostFunction match = quadratic_matching(3, 1, y);
  const MarginalSystem system = random_aligned_system(space, 3, 4, 2024);
  const CostTensor tensor = build_cost_tensor(system, match);
  const SolveReport report = solve_exact_lp(tensor, system);

  const auto& parts = infimal_parts(match);
  for (int j = 0; j < 3; ++j) {
    const MonotonicityReport proj =
        projected_monotonicity_check(report.coupling, match, j, parts[j], 3);
    CHECK(proj.monotone);
    CHECK(proj.max_subset_checked == 3);
  }

  // single-entry coupling projects to a singleton
  const MarginalSystem tiny{{uniform_measure(space, {0.3}), uniform_measure(space, {0.4}),
                             uniform_measure(space, {0.5})}};
  const Coupling one(tiny, {{{0, 0, 0}, 1.0}});
  const MonotonicityReport single =
      projected_monotonicity_check(one, match, 0, parts[0], 3);
  CHECK(single.monotone);

  CHECK_THROWS_AS(projected_monotonicity_check(one, gangbo_swiech(3, 1), 0, parts[0], 3),
                  std::invalid_argument);
}

TEST_CASE("a corrupted projection is caught as a violation") {
  // Take the projected pairs (x_j, y) of a genuine solution and swap the y
  // values of two points: the quadratic part sums then strictly order.
  const Space space = Space::box(1, 0.0, 1.0);
  const CostFunction quad = quadratic_pair_cost(1, space, Space::box(1, -0.5, 1.5));
  SupportSet corrupted;
  corrupted.points = {tuple1({0.1, 0.9}), tuple1({0.9, 0.1})};  // y far from its block
  const MonotonicityReport report = is_cyclically_monotone(corrupted, quad, 2);
  CHECK_FALSE(report.monotone);
  REQUIRE(report.violation.has_value());
  CHECK(report.violation->deficit > 0.0);
}

TEST_CASE("support sets reject duplicates") {
  SupportSet dup;
  dup.points = {tuple1({0.0, 1.0}), tuple1({0.0, 1.0})};
  CHECK_THROWS_AS(dup.validate(), std::invalid_argument);
}
