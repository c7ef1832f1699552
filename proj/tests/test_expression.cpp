#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "matsubara/expression.hpp"
#include "matsubara/kernel.hpp"

using namespace matsubara;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::shared_ptr<const SymbolTable> symbols(std::size_t n, std::size_t lines) {
  auto s = std::make_shared<SymbolTable>();
  for (std::size_t k = 0; k < n; ++k) s->n_names.push_back(std::to_string(k + 1));
  for (std::size_t k = 0; k < lines; ++k) s->lines.push_back(LineId{static_cast<int>(k + 1)});
  return s;
}

Term term(Rational c, int pi, std::vector<int> qexp, std::vector<LinearForm> dens, LineMask kernels = 0) {
  return Term{c, pi, std::move(qexp), kernels, std::move(dens)};
}

struct RandomTerms {
  std::mt19937_64 rng;
  std::size_t n, lines;

  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

  LinearForm form() {
    LinearForm f{std::vector<int>(n), std::vector<int>(lines)};
    f.n[pick(0, static_cast<int>(n) - 1)] = pick(0, 1) ? 1 : -1;
    for (auto& x : f.n)
      if (x == 0) x = pick(-1, 1);
    for (auto& x : f.q) x = pick(-1, 1);
    return f;
  }

  Term next(LineMask kernel_pool = 0) {
    Term t;
    t.coeff = Rational(pick(-5, 5) | 1, pick(1, 4));
    t.two_pi_power = pick(0, 2);
    t.q_exponents.assign(lines, 0);
    for (auto& x : t.q_exponents) x = pick(-2, 0);
    t.kernels = kernel_pool & static_cast<LineMask>(pick(0, 255));
    const int d = pick(1, 3);
    for (int k = 0; k < d; ++k) t.denominators.push_back(form());
    return t;
  }

  Expression expression(std::shared_ptr<const SymbolTable> s, int size, LineMask kernel_pool = 0) {
    Expression e(std::move(s));
    for (int k = 0; k < size; ++k) e.add_term(next(kernel_pool));
    return e;
  }

  std::vector<double> q() {
    std::uniform_real_distribution<double> d(0.3, 3.0);
    std::vector<double> v(lines);
    for (auto& x : v) x = d(rng);
    return v;
  }

  std::vector<long long> N() {
    std::vector<long long> v(n);
    for (auto& x : v) x = pick(-3, 3);
    return v;
  }
};

std::complex<double> safe_eval(const Expression& e, const std::vector<double>& q, const std::vector<long long>& N) {
  return eval_numeric(e, q, N);
}

bool close(std::complex<double> a, std::complex<double> b, double tol = 1e-11) {
  return std::abs(a - b) <= tol * (1 + std::abs(a) + std::abs(b));
}

}  // namespace

TEST_CASE("linear form normalization") {
  LinearForm f{{-2, 4}, {2, 0, -2}};
  const Rational factor = f.normalize();
  CHECK(f.n == std::vector<int>{1, -2});
  CHECK(f.q == std::vector<int>{-1, 0, 1});
  CHECK(factor == Rational(-1, 2));

  LinearForm zero{{0}, {0, 0}};
  CHECK_THROWS_AS(zero.normalize(), SymbolicError);
}

TEST_CASE("reflection of the two-line integral term") {
  auto s = symbols(1, 2);
  // (2 pi / (2q1 2q2)) * 1/(iN - q1 - q2)
  auto e = Expression::from_terms(s, {term(Rational(1, 4), 1, {-1, -1}, {{{1}, {-1, -1}}})});
  auto r = reflect(e, LineId{1});
  auto expected = Expression::from_terms(s, {term(Rational(-1, 4), 1, {-1, -1}, {{{1}, {1, -1}}})});
  CHECK(r == expected);
  CHECK(reflect(r, LineId{1}) == e);
}

TEST_CASE("reflection leaves q-independent expressions alone") {
  auto s = symbols(1, 2);
  auto e = Expression::from_terms(s, {term(Rational(3), 0, {0, 0}, {{{1}, {0, 1}}})});
  CHECK(reflect(e, LineId{1}) == e);
}

TEST_CASE("reflection errors") {
  auto s = symbols(1, 2);
  auto e = Expression::from_terms(s, {term(Rational(1), 0, {0, 0}, {{{1}, {1, 1}}}, 0b01)});
  try {
    reflect(e, LineId{1});
    FAIL("reflected a kernel line");
  } catch (const SymbolicError& ex) {
    CHECK(ex.kind() == SymbolicErrorKind::KernelReflection);
  }
  CHECK_NOTHROW(reflect(e, LineId{2}));
  CHECK_THROWS_AS(reflect(e, LineId{3}), SymbolicError);
}

TEST_CASE("kernel multiplication") {
  auto s = symbols(1, 2);
  auto e = Expression::from_terms(s, {term(Rational(1), 0, {0, 0}, {{{1}, {1, 1}}})});
  auto k1 = kernel_multiply(e, LineId{1});
  REQUIRE(k1.size() == 1);
  CHECK(k1.terms().front().kernels == 0b01);
  CHECK(kernel_multiply(k1, LineId{2}) == kernel_multiply(kernel_multiply(e, LineId{2}), LineId{1}));
  try {
    kernel_multiply(k1, LineId{1});
    FAIL("duplicate kernel accepted");
  } catch (const SymbolicError& ex) {
    CHECK(ex.kind() == SymbolicErrorKind::DuplicateKernel);
  }
}

TEST_CASE("add and scale") {
  auto s = symbols(2, 3);
  RandomTerms gen{std::mt19937_64(1), 2, 3};
  auto e = gen.expression(s, 6);
  CHECK(add(e, scale(e, Rational(-1))).empty());
  CHECK(add(Expression(s), e) == e);
  CHECK(scale(e, Rational(0)).empty());

  auto one = Expression::from_terms(s, {term(Rational(1, 3), 0, {0, 0, 0}, {{{1, 0}, {1, 0, 0}}})});
  auto two = Expression::from_terms(s, {term(Rational(1, 2), 0, {0, 0, 0}, {{{-1, 0}, {-1, 0, 0}}})});
  auto sum = add(one, two);
  REQUIRE(sum.size() == 1);
  CHECK(sum.terms().front().coeff == Rational(-1, 6));
}

TEST_CASE("expressions in different symbols do not mix") {
  CHECK_THROWS_AS(add(Expression(symbols(1, 2)), Expression(symbols(1, 3))), SymbolicError);
  auto s = symbols(1, 2);
  Expression e(s);
  CHECK_THROWS_AS(e.add_term(term(Rational(1), 0, {0, 0, 0}, {})), SymbolicError);
}

TEST_CASE("canonical form is insensitive to term order") {
  auto s = symbols(2, 3);
  RandomTerms gen{std::mt19937_64(2), 2, 3};
  std::vector<Term> terms;
  for (int k = 0; k < 20; ++k) terms.push_back(gen.next(0b111));
  // duplicate some keys with other signs so that merging happens
  for (int k = 0; k < 5; ++k) {
    Term t = terms[k];
    for (auto& d : t.denominators) {
      for (auto& x : d.n) x = -x;
      for (auto& x : d.q) x = -x;
    }
    terms.push_back(t);
  }
  const auto reference = Expression::from_terms(s, terms);
  auto rebuilt = Expression::from_terms(s, reference.terms());
  CHECK(rebuilt == reference);
  std::mt19937_64 rng(3);
  for (int round = 0; round < 10; ++round) {
    std::shuffle(terms.begin(), terms.end(), rng);
    CHECK(Expression::from_terms(s, terms) == reference);
  }
  for (const auto& t : reference.terms())
    for (const auto& d : t.denominators) {
      const int first = d.leading_n() < d.n.size() ? d.n[d.leading_n()]
                                                   : *std::find_if(d.q.begin(), d.q.end(), [](int x) { return x != 0; });
      CHECK(first > 0);
    }
}

TEST_CASE("reflections are commuting involutions") {
  auto s = symbols(2, 4);
  RandomTerms gen{std::mt19937_64(5), 2, 4};
  for (int round = 0; round < 20; ++round) {
    auto e = gen.expression(s, 8);
    for (int i = 1; i <= 4; ++i) {
      CHECK(reflect(reflect(e, LineId{i}), LineId{i}) == e);
      for (int j = i + 1; j <= 4; ++j)
        CHECK(reflect(reflect(e, LineId{i}), LineId{j}) == reflect(reflect(e, LineId{j}), LineId{i}));
    }
  }
}

TEST_CASE("(1 - R)(1/q)(1 - R) annihilates") {
  auto s = symbols(2, 3);
  RandomTerms gen{std::mt19937_64(6), 2, 3};
  for (int round = 0; round < 20; ++round) {
    Expression h(s);
    for (int k = 0; k < 6; ++k) {
      Term t = gen.next();
      t.q_exponents[1] = 0;
      h.add_term(t);
    }
    auto odd = detail::antisymmetrize_at(h, 1);
    Expression divided(s);
    for (const auto& [k, c] : odd.term_map()) {
      TermKey key = k;
      key.q_exponents[1] -= 1;
      divided.accumulate(key, c);
    }
    CHECK(detail::antisymmetrize_at(divided, 1).empty());
    // without the 1/q the composite is 2(1 - R), not zero
    CHECK(detail::antisymmetrize_at(odd, 1) == scale(odd, Rational(2)));
  }
}

TEST_CASE("numeric evaluation") {
  auto s = symbols(1, 2);
  CHECK(eval_numeric(Expression(s), {1.0, 1.0}, {1}) == std::complex<double>(0.0, 0.0));

  // (2 pi/(2q1 2q2)) [1/(iN+q1+q2) - 1/(iN-q1-q2)] at N = 1, q = 1, 1 is 2 pi / 5
  auto integral = Expression::from_terms(s, {term(Rational(1, 4), 1, {-1, -1}, {{{1}, {1, 1}}}),
                                             term(Rational(-1, 4), 1, {-1, -1}, {{{1}, {-1, -1}}})});
  auto v = eval_numeric(integral, {1.0, 1.0}, {1});
  CHECK_THAT(v.real(), WithinRel(1.2566370614359173, 1e-14));
  CHECK_THAT(v.imag(), WithinAbs(0.0, 1e-15));

  auto degenerate = Expression::from_terms(s, {term(Rational(1), 0, {0, 0}, {{{1}, {1, -1}}})});
  try {
    eval_numeric(degenerate, {0.5, 0.5}, {0});
    FAIL("zero denominator not detected");
  } catch (const SymbolicError& ex) {
    CHECK(ex.kind() == SymbolicErrorKind::ZeroDenominator);
  }
  CHECK_THROWS_AS(eval_numeric(degenerate, {0.5}, {0}), SymbolicError);
}

TEST_CASE("numeric evaluation is linear") {
  auto s = symbols(2, 3);
  RandomTerms gen{std::mt19937_64(7), 2, 3};
  for (int round = 0; round < 30; ++round) {
    auto a = gen.expression(s, 5, 0b101);
    auto b = gen.expression(s, 5, 0b011);
    auto q = gen.q();
    auto N = gen.N();
    try {
      auto ea = safe_eval(a, q, N), eb = safe_eval(b, q, N);
      auto sum = safe_eval(add(a, b), q, N), scaled = safe_eval(scale(a, Rational(-7, 3)), q, N);
      CHECK(close(sum, ea + eb));
      CHECK(close(scaled, (-7.0 / 3.0) * ea));
    } catch (const SymbolicError& ex) {
      REQUIRE(ex.kind() == SymbolicErrorKind::ZeroDenominator);
    }
  }
}

TEST_CASE("partial fractions preserve the value and are idempotent") {
  auto s = symbols(3, 4);
  RandomTerms gen{std::mt19937_64(8), 3, 4};
  int checked = 0;
  for (int round = 0; round < 40; ++round) {
    auto e = gen.expression(s, 4, 0b1010);
    Expression a(s);
    try {
      a = apart(e);
    } catch (const SymbolicError& ex) {
      REQUIRE(ex.kind() == SymbolicErrorKind::DegenerateDenominators);
      continue;
    }
    CHECK(apart(a) == a);
    for (const auto& t : a.terms()) {
      std::vector<int> leading;
      for (const auto& d : t.denominators)
        if (d.leading_n() < 3) leading.push_back(static_cast<int>(d.leading_n()));
      std::sort(leading.begin(), leading.end());
      CHECK(std::adjacent_find(leading.begin(), leading.end()) == leading.end());
    }
    for (int p = 0; p < 3; ++p) {
      auto q = gen.q();
      auto N = gen.N();
      try {
        const auto lhs = safe_eval(a, q, N);
        const auto rhs = safe_eval(e, q, N);
        CHECK(close(lhs, rhs, 1e-9));
        ++checked;
      } catch (const SymbolicError& ex) {
        REQUIRE(ex.kind() == SymbolicErrorKind::ZeroDenominator);
      }
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("partial fractions identify equal rational functions") {
  auto s = symbols(1, 2);
  // 1/((iN+q1)(iN+q2)) == [1/(iN+q1) - 1/(iN+q2)] / (q2 - q1)
  auto product = Expression::from_terms(s, {term(Rational(1), 0, {0, 0}, {{{1}, {1, 0}}, {{1}, {0, 1}}})});
  auto split = Expression::from_terms(s, {term(Rational(1), 0, {0, 0}, {{{1}, {1, 0}}, {{0}, {-1, 1}}}),
                                          term(Rational(-1), 0, {0, 0}, {{{1}, {0, 1}}, {{0}, {-1, 1}}})});
  CHECK_FALSE(product == split);
  CHECK(apart(product) == apart(split));
}

TEST_CASE("Bose-Einstein kernel") {
  CHECK_THAT(nbe(1.0), WithinRel(1.8709365986606441e-3, 1e-14));
  CHECK_THAT(nbe(0.25), WithinRel(1.0 / std::expm1(std::numbers::pi / 2), 1e-14));
  CHECK(nbe(50.0) >= 0.0);
  CHECK(nbe(50.0) < 1e-130);
  CHECK(nbe(100.0) < 1e-270);
  CHECK(nbe(200.0) == 0.0);
  CHECK(nbe(-100.0) == -1.0);
  CHECK_THROWS_AS(nbe(0.0), ZeroArgumentError);
  for (double z : {0.25, 1.0, 3.0}) CHECK_THAT(nbe(z) + nbe(-z), WithinAbs(-1.0, 1e-15));
}

TEST_CASE("kernel reflection identity on random arguments") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(0.1, 5.0);
  for (int k = 0; k < 200; ++k) {
    const double q = d(rng);
    CHECK_THAT(nbe(q) + nbe(-q) + 1.0, WithinAbs(0.0, 1e-14));
  }
  // nbe(q) = -theta(-q) + sign(q) nbe(|q|)
  for (double q : {0.3, -0.3, 2.7, -2.7}) {
    const double theta = q < 0 ? 1.0 : 0.0;
    const double sign = q < 0 ? -1.0 : 1.0;
    CHECK_THAT(nbe(q), WithinAbs(-theta + sign * nbe(std::abs(q)), 1e-14));
  }
}
