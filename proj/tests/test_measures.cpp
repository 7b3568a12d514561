#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "mmot/io_json.hpp"
#include "mmot/measures.hpp"

using namespace mmot;

namespace {

Vec pt(double x) { return Vec::Constant(1, x); }

}  // namespace

TEST_CASE("two-point uniform measure on [0,2]") {
  const Space space = Space::box(1, 0.0, 2.0);
  const DiscreteMeasure mu = new_discrete_measure(space, {pt(0.0), pt(1.0)}, {0.5, 0.5});
  CHECK(mu.size() == 2);
  CHECK(mu.weight(0) == doctest::Approx(0.5));
  CHECK(mu.weight(1) == doctest::Approx(0.5));
}

TEST_CASE("duplicate atoms are rejected") {
  const Space space = Space::box(1, -1.0, 1.0);
  CHECK_THROWS_AS(new_discrete_measure(space, {pt(0.0), pt(0.0)}, {0.5, 0.5}),
                  std::invalid_argument);
}

TEST_CASE("weight sum far from one is rejected") {
  const Space space = Space::box(1, -1.0, 1.0);
  CHECK_THROWS_AS(new_discrete_measure(space, {pt(0.0), pt(1.0)}, {0.3, 0.3}),
                  std::invalid_argument);
}

TEST_CASE("weights within 1e-9 of one are renormalized exactly") {
  const Space space = Space::box(1, -1.0, 1.0);
  const DiscreteMeasure mu =
      new_discrete_measure(space, {pt(0.0), pt(1.0)}, {0.5, 0.5 + 5e-10});
  double sum = 0.0;
  for (double w : mu.weights()) sum += w;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("negative, zero and out-of-box inputs are rejected") {
  const Space space = Space::box(1, 0.0, 1.0);
  CHECK_THROWS_AS(new_discrete_measure(space, {pt(0.0), pt(1.0)}, {1.5, -0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(new_discrete_measure(space, {pt(0.0), pt(1.0)}, {1.0, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(new_discrete_measure(space, {pt(0.0), pt(2.0)}, {0.5, 0.5}),
                  std::invalid_argument);
}

TEST_CASE("space invariants") {
  CHECK_THROWS_AS(Space::box(0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(Space::box(1, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("random_generic_measure is deterministic in (space, n, seed)") {
  const Space space = Space::box(1, 0.0, 1.0);
  const DiscreteMeasure a = random_generic_measure(space, 4, 7);
  const DiscreteMeasure b = random_generic_measure(space, 4, 7);
  REQUIRE(a.size() == b.size());
  for (int i = 0; i < a.size(); ++i) {
    CHECK(a.atom(i) == b.atom(i));  // bit-identical
    CHECK(a.weight(i) == b.weight(i));
  }
  const DiscreteMeasure c = random_generic_measure(space, 4, 8);
  bool any_diff = false;
  for (int i = 0; i < 4; ++i) any_diff = any_diff || a.atom(i) != c.atom(i);
  CHECK(any_diff);
}

TEST_CASE("random_generic_measure invariants at dim 2") {
  const Space space = Space::box(2, -1.0, 3.0);
  const DiscreteMeasure mu = random_generic_measure(space, 10, 1);
  CHECK(mu.size() == 10);
  double sum = 0.0;
  for (double w : mu.weights()) {
    CHECK(w > 0.0);
    sum += w;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < mu.size(); ++i) {
    CHECK(space.contains(mu.atom(i)));
    for (int j = i + 1; j < mu.size(); ++j) {
      CHECK((mu.atom(i) - mu.atom(j)).norm() > 0.0);
    }
  }
  CHECK_THROWS_AS(random_generic_measure(space, 0, 1), std::invalid_argument);
}

TEST_CASE("construction never yields an invariant-violating measure") {
  // Property sweep over random valid and invalid inputs.
  std::mt19937_64 gen(123);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Space space = Space::box(1, 0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(unif(gen) * 5);
    std::vector<Vec> atoms;
    std::vector<double> weights;
    for (int i = 0; i < n; ++i) {
      atoms.push_back(pt(unif(gen)));
      weights.push_back(unif(gen) - 0.2);
    }
    try {
      const DiscreteMeasure mu = new_discrete_measure(space, atoms, weights);
      double sum = 0.0;
      for (double w : mu.weights()) {
        CHECK(w > 0.0);
        sum += w;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    } catch (const std::invalid_argument&) {
      // rejected inputs are fine; they must not produce a measure
    }
  }
}

TEST_CASE("marginal system shape and tuple access") {
  const Space space = Space::box(1, 0.0, 1.0);
  const MarginalSystem system{{random_generic_measure(space, 3, 1),
                               random_generic_measure(space, 4, 2)}};
  CHECK(system.m() == 2);
  CHECK(system.shape() == std::vector<int>{3, 4});
  const Tuple x = system.tuple_at({2, 1});
  CHECK(x[0] == system.marginal(0).atom(2));
  CHECK(x[1] == system.marginal(1).atom(1));
  CHECK_THROWS_AS(MarginalSystem{std::vector<DiscreteMeasure>{
                      random_generic_measure(space, 3, 1)}},
                  std::invalid_argument);
}

TEST_CASE("aligned system shares one weight profile in sorted order") {
  const Space space = Space::box(1, 0.0, 1.0);
  const MarginalSystem system = random_aligned_system(space, 3, 6, 99);
  REQUIRE(system.m() == 3);
  for (int i = 0; i < 3; ++i) {
    for (int a = 1; a < 6; ++a) {
      CHECK(system.marginal(i).atom(a)[0] > system.marginal(i).atom(a - 1)[0]);
      CHECK(system.marginal(i).weight(a) == system.marginal(0).weight(a));
    }
  }
  // non-uniform profile
  bool nonuniform = false;
  for (int a = 1; a < 6; ++a) {
    nonuniform = nonuniform || std::abs(system.marginal(0).weight(a) -
                                        system.marginal(0).weight(0)) > 1e-6;
  }
  CHECK(nonuniform);
}

TEST_CASE("measure JSON round trip and random spec") {
  const Space space = Space::box(2, 0.0, 2.0);
  const DiscreteMeasure mu = random_generic_measure(space, 5, 11);
  const json j = measure_to_json(mu);
  const DiscreteMeasure back = measure_from_json(j);
  REQUIRE(back.size() == mu.size());
  for (int i = 0; i < mu.size(); ++i) {
    CHECK((back.atom(i) - mu.atom(i)).norm() == doctest::Approx(0.0));
    CHECK(back.weight(i) == doctest::Approx(mu.weight(i)));
  }
  const json rnd = {{"dim", 1}, {"lower", 0.0}, {"upper", 1.0}, {"n", 3}, {"seed", 4}};
  const DiscreteMeasure r = measure_from_json(rnd);
  CHECK(r.size() == 3);
  const DiscreteMeasure r2 = measure_from_json(rnd);
  for (int i = 0; i < 3; ++i) CHECK(r.atom(i) == r2.atom(i));
}
