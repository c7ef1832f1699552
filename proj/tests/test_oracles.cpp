#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "matsubara/oracles.hpp"
#include "matsubara/random_graph.hpp"

using namespace matsubara;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// same graph with line ids permuted
MatsubaraGraph relabel(const MatsubaraGraph& g, const std::vector<int>& new_ids) {
  RawGraph raw;
  raw.vertices = g.vertices();
  for (std::size_t p = 0; p < g.line_count(); ++p)
    raw.lines.push_back({new_ids[p], g.vertices()[g.line(p).tail], g.vertices()[g.line(p).head]});
  return MatsubaraGraph::validate(raw);
}

}  // namespace

TEST_CASE("lattice machinery") {
  // sum_n 1/(n^2 + 1) = pi coth(pi); the tail beyond M is about 2/M
  CHECK_THAT(single_line_sum(1.0, 100000), WithinRel(3.1533480949371622, 1e-4));
  CHECK_THAT(single_line_sum(1.0, 100000), WithinAbs(3.1533480949371622 - 2e-5, 1e-9));
}

TEST_CASE("brute force sums at reference points") {
  auto g2 = fixtures::g2();
  auto s2 = brute_force_sum(g2, {0}, {1.0, 1.0}, 10000);
  CHECK_THAT(s2.value, WithinRel(1.6136739508458174, 1e-10));
  CHECK(s2.convergence() < 1e-9);

  auto s3 = brute_force_sum(fixtures::g3(), {1}, {0.7, 1.1, 1.6}, 500);
  CHECK_THAT(s3.value, WithinRel(2.2418500311064956, 1e-3));

  auto s4 = brute_force_sum(fixtures::g4(), {1, -2, 1}, {0.7, 1.1, 0.9, 1.3, 0.5}, 200);
  CHECK_THAT(s4.value, WithinRel(1.9125301377790015, 1e-3));

  CHECK_THROWS_AS(brute_force_sum(g2, {0}, {1.0, 1.0}, 5), std::invalid_argument);
  CHECK_THROWS_AS(brute_force_sum(g2, {0}, {1.0, -1.0}, 20), std::invalid_argument);
}

TEST_CASE("brute force convergence improves with the cutoff") {
  for (const auto& name : {"g2", "g3", "g4"}) {
    auto g = fixtures::load(name);
    std::vector<long long> N(g.vertex_count() - 1, 1);
    std::vector<double> q(g.line_count(), 0.8);
    double previous = 1e300;
    for (long long m : {20, 40, 80}) {
      const double c = brute_force_sum(g, N, q, m).convergence();
      CHECK(c < previous);
      previous = c;
    }
  }
}

TEST_CASE("unbalanced vertex charges give a vanishing sum") {
  auto g2 = fixtures::g2();
  CHECK(lattice_box_sum(g2, {3, 0}, {1.0, 1.0}, 8) == 0.0);
  CHECK(lattice_box_sum(g2, {3, -3}, {1.0, 1.0}, 8) > 0.0);
  auto g4 = fixtures::g4();
  CHECK(lattice_box_sum(g4, {1, -2, 1, 1}, {0.7, 1.1, 0.9, 1.3, 0.5}, 3) == 0.0);
  CHECK(lattice_box_sum(g4, {1, -2, 1, 0}, {0.7, 1.1, 0.9, 1.3, 0.5}, 3) > 0.0);
}

TEST_CASE("quadrature at reference points") {
  auto g2 = fixtures::g2();
  CHECK_THAT(quadrature_integral(g2, {1}, {1.0, 1.0}, 1e-12), WithinRel(2 * std::numbers::pi / 5, 1e-10));
  CHECK_THAT(quadrature_integral(fixtures::g3(), {0}, {1.0, 1.0, 1.0}, 1e-10),
             WithinRel(std::numbers::pi * std::numbers::pi / 3, 1e-8));
  auto g4 = fixtures::g4();
  const std::vector<double> q{0.7, 1.1, 0.9, 1.3, 0.5};
  CHECK_THAT(quadrature_integral(g4, {1, -2, 1}, q, 1e-9),
             WithinRel(eval_numeric(matsubara_integral(g4), q, {1, -2, 1}).real(), 1e-6));

  auto rank3 = MatsubaraGraph::validate({{"a", "b"}, {{1, "a", "b"}, {2, "a", "b"}, {3, "a", "b"}, {4, "a", "b"}}});
  CHECK_THROWS_AS(quadrature_integral(rank3, {0}, {1, 1, 1, 1}, 1e-6), RankTooHighError);
  CHECK_THROWS_AS(verify_integral(rank3, 1, 1e-6, 1), RankTooHighError);
}

TEST_CASE("verification runs") {
  auto r2 = verify_sum(fixtures::g2(), 20, 10000, 1e-6, 1);
  CHECK(r2.size() == 20);
  CHECK(std::all_of(r2.begin(), r2.end(), [](const auto& r) { return r.pass; }));

  auto i2 = verify_integral(fixtures::g2(), 20, 1e-9, 2);
  CHECK(std::all_of(i2.begin(), i2.end(), [](const auto& r) { return r.pass; }));
  auto i3 = verify_integral(fixtures::g3(), 10, 1e-6, 3);
  CHECK(std::all_of(i3.begin(), i3.end(), [](const auto& r) { return r.pass; }));
  auto i4 = verify_integral(fixtures::g4(), 5, 1e-5, 4);
  CHECK(std::all_of(i4.begin(), i4.end(), [](const auto& r) { return r.pass; }));

  auto j = r2.front().to_json();
  for (const char* key : {"q", "N", "symbolic", "oracle", "abs_error", "rel_error", "convergence", "pass"})
    CHECK(j.contains(key));
}

TEST_CASE("verification is reproducible and label equivariant") {
  auto g4 = fixtures::g4();
  auto a = verify_sum(g4, 3, 60, 1e-3, 99);
  auto b = verify_sum(g4, 3, 60, 1e-3, 99);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].to_json() == b[k].to_json());
  }
  auto relabelled = relabel(g4, {4, 1, 5, 2, 3});
  auto c = verify_sum(relabelled, 3, 60, 1e-3, 99);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].pass == c[k].pass);
}

TEST_CASE("pass rule") {
  CHECK(within_tolerance(1.0005, 1.0, 1e-3));
  CHECK_FALSE(within_tolerance(1.01, 1.0, 1e-3));
  CHECK(within_tolerance(1e-4, 5e-4, 1e-3));
  CHECK_FALSE(within_tolerance(2.0, 1.0, 1e-3));
}

TEST_CASE("Gaudin identity") {
  CHECK(check_gaudin_identity(fixtures::g3(), {1, 2, 3}, {1, 1, -2}, {0}) < 1e-13);
  CHECK(check_gaudin_identity(fixtures::g2(), {1, 1}, {2, -2}, {0}) < 1e-13);
  CHECK_THROWS_AS(check_gaudin_identity(fixtures::g3(), {1, 2, 3}, {1, 1, 1}, {0}), ConstraintViolatedError);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> qd(0.3, 3.0);
  std::uniform_int_distribution<long long> nd(-4, 4);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = random_graph(rng);
    std::vector<double> q(g.line_count());
    std::vector<long long> n(g.line_count()), flow(g.vertex_count(), 0);
    for (auto& v : q) v = qd(rng);
    for (std::size_t p = 0; p < n.size(); ++p) {
      n[p] = nd(rng);
      flow[g.line(p).head] += n[p];
      flow[g.line(p).tail] -= n[p];
    }
    flow.pop_back();
    CHECK(check_gaudin_identity(g, q, n, flow) < 1e-12);
  }
}

TEST_CASE("three oracles agree on the integral") {
  // closed form, quadrature and the unsimplified tree sum
  auto g3 = fixtures::g3();
  const std::vector<double> q{0.6, 1.4, 2.1};
  const double closed = eval_numeric(matsubara_integral(g3), q, {2}).real();
  const double quad = quadrature_integral(g3, {2}, q, 1e-10);
  Expression trees(SymbolTable::for_graph(g3));
  for (const auto& t : enumerate_spanning_trees(g3)) trees = add(trees, tree_integral(g3, solve_tree(g3, t)));
  const double gaudin = eval_numeric(trees, q, {2}).real();
  CHECK_THAT(closed, WithinRel(quad, 1e-7));
  CHECK_THAT(closed, WithinRel(gaudin, 1e-12));
}
