#pragma once

// Numeric ground truth for sums and integrals, independent of the symbolic
// pipeline except for the linear solve of the vertex constraints.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

#include "matsubara/engine.hpp"
#include "matsubara/expression.hpp"
#include "matsubara/graph.hpp"

namespace matsubara {

class RankTooHighError : public std::invalid_argument {
 public:
  explicit RankTooHighError(int rank)
      : std::invalid_argument("RankTooHigh: quadrature supports cycle rank <= 2, got " +
                              std::to_string(rank)) {}
};

class ConstraintViolatedError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

/// Compensated accumulator; summation order is fixed by the caller.
class KahanSum {
 public:
  void add(long double x) {
    const long double y = x - c_;
    const long double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return static_cast<double>(s_); }

 private:
  long double s_ = 0, c_ = 0;
};

/// Tree-line values from N and the free (non-tree) variables.
template <class T>
void fill_tree_lines(const TreeSolution& sol, const MatsubaraGraph& g,
                     const std::vector<long long>& n_values, std::vector<T>& x) {
  for (const auto& row : sol.omega) {
    T v = 0;
    for (std::size_t k = 0; k < row.n_coeffs.size(); ++k) v += T(row.n_coeffs[k] * n_values[k]);
    for (std::size_t p = 0; p < row.b.size(); ++p)
      if (row.b[p] != 0) v += T(row.b[p]) * x[p];
    x[g.line_position(row.line)] = v;
  }
}

inline void check_point(const MatsubaraGraph& g, const std::vector<double>& q,
                        const std::vector<long long>& n_values) {
  if (q.size() != g.line_count() || n_values.size() + 1 != g.vertex_count())
    throw std::invalid_argument("expected one q per line and one N per non-root vertex");
  for (double v : q)
    if (!(v > 0)) throw std::invalid_argument("q values must be positive");
}

}  // namespace detail

struct LatticeSum {
  double value = 0;       // cutoff M
  double half_value = 0;  // cutoff M/2
  double convergence() const { return std::abs(value - half_value); }
};

/// Truncated lattice sum over the independent variables of the first tree,
/// each running over [-M, M].
inline LatticeSum brute_force_sum(const MatsubaraGraph& g, const std::vector<long long>& n_values,
                                  const std::vector<double>& q, long long cutoff) {
  detail::check_point(g, q, n_values);
  if (cutoff < 10) throw std::invalid_argument("cutoff must be at least 10");
  const auto sol = solve_tree(g, enumerate_spanning_trees(g).front());
  std::vector<std::size_t> free;
  for (std::size_t p = 0; p < g.line_count(); ++p)
    if (!(sol.tree_mask & (LineMask{1} << p))) free.push_back(p);

  const long long half = cutoff / 2;
  std::vector<double> x(g.line_count(), 0.0);
  std::vector<long long> idx(free.size(), -cutoff);
  detail::KahanSum full, inner;
  while (true) {
    bool in_half = true;
    for (std::size_t k = 0; k < free.size(); ++k) {
      x[free[k]] = static_cast<double>(idx[k]);
      in_half = in_half && std::llabs(idx[k]) <= half;
    }
    detail::fill_tree_lines(sol, g, n_values, x);
    long double term = 1;
    for (std::size_t p = 0; p < x.size(); ++p)
      term /= static_cast<long double>(x[p]) * x[p] + static_cast<long double>(q[p]) * q[p];
    full.add(term);
    if (in_half) inner.add(term);

    std::size_t k = 0;
    while (k < idx.size() && idx[k] == cutoff) idx[k++] = -cutoff;
    if (k == idx.size()) break;
    ++idx[k];
  }
  return {full.value(), inner.value()};
}

/// Single-variable check of the lattice machinery: sum_n 1/(n^2 + q^2).
inline double single_line_sum(double q, long long cutoff) {
  detail::KahanSum s;
  for (long long n = -cutoff; n <= cutoff; ++n)
    s.add(1.0L / (static_cast<long double>(n) * n + static_cast<long double>(q) * q));
  return s.value();
}

/// Sum over the box [-M, M]^I of all line variables with every vertex
/// constraint imposed as a Kronecker delta. n_all carries one N per vertex,
/// root included, so that an unbalanced assignment can be tested.
inline double lattice_box_sum(const MatsubaraGraph& g, const std::vector<long long>& n_all,
                              const std::vector<double>& q, long long box) {
  if (n_all.size() != g.vertex_count() || q.size() != g.line_count())
    throw std::invalid_argument("expected one N per vertex and one q per line");
  const std::size_t lines = g.line_count();
  std::vector<long long> n(lines, -box);
  std::vector<long long> flow(g.vertex_count());
  detail::KahanSum s;
  while (true) {
    std::fill(flow.begin(), flow.end(), 0);
    for (std::size_t p = 0; p < lines; ++p) {
      flow[g.line(p).head] += n[p];
      flow[g.line(p).tail] -= n[p];
    }
    if (flow == n_all) {
      long double term = 1;
      for (std::size_t p = 0; p < lines; ++p)
        term /= static_cast<long double>(n[p]) * n[p] + static_cast<long double>(q[p]) * q[p];
      s.add(term);
    }
    std::size_t k = 0;
    while (k < lines && n[k] == box) n[k++] = -box;
    if (k == lines) break;
    ++n[k];
  }
  return s.value();
}

/// Integral over the independent variables of the first tree, each axis mapped
/// by x = tan(u).
inline double quadrature_integral(const MatsubaraGraph& g, const std::vector<long long>& n_values,
                                  const std::vector<double>& q, double tolerance) {
  detail::check_point(g, q, n_values);
  const int rank = cycle_rank(g);
  if (rank > 2) throw RankTooHighError(rank);
  const auto sol = solve_tree(g, enumerate_spanning_trees(g).front());
  std::vector<std::size_t> free;
  for (std::size_t p = 0; p < g.line_count(); ++p)
    if (!(sol.tree_mask & (LineMask{1} << p))) free.push_back(p);

  using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
  constexpr double h = std::numbers::pi / 2;
  constexpr unsigned depth = 20;

  auto integrand = [&](const std::vector<double>& free_values) {
    std::vector<double> x(g.line_count(), 0.0);
    for (std::size_t k = 0; k < free.size(); ++k) x[free[k]] = free_values[k];
    detail::fill_tree_lines(sol, g, n_values, x);
    double f = 1;
    for (std::size_t p = 0; p < x.size(); ++p) f /= x[p] * x[p] + q[p] * q[p];
    return f;
  };
  auto jac = [](double u) {
    const double c = std::cos(u);
    return 1.0 / (c * c);
  };

  if (rank == 1)
    return Quad::integrate([&](double u) { return integrand({std::tan(u)}) * jac(u); }, -h, h,
                           depth, tolerance);
  return Quad::integrate(
      [&](double u) {
        const double x0 = std::tan(u);
        const double inner = Quad::integrate(
            [&](double v) { return integrand({x0, std::tan(v)}) * jac(v); }, -h, h, depth,
            tolerance);
        return inner * jac(u);
      },
      -h, h, depth, tolerance);
}

struct VerificationReport {
  std::vector<double> q;
  std::vector<long long> n;
  double symbolic = 0;
  double oracle = 0;
  double abs_error = 0;
  double rel_error = 0;
  double convergence = 0;
  double tolerance = 0;
  int redraws = 0;
  bool pass = false;

  nlohmann::json to_json() const {
    return {{"q", q},
            {"N", n},
            {"symbolic", symbolic},
            {"oracle", oracle},
            {"abs_error", abs_error},
            {"rel_error", rel_error},
            {"convergence", convergence},
            {"tolerance", tolerance},
            {"redraws", redraws},
            {"pass", pass}};
  }
};

inline bool within_tolerance(double symbolic, double oracle, double tolerance) {
  const double abs_error = std::abs(symbolic - oracle);
  const double rel_error = oracle != 0 ? abs_error / std::abs(oracle) : abs_error;
  return rel_error <= tolerance || (std::abs(oracle) < 1 && abs_error <= tolerance);
}

namespace detail {

struct Draw {
  std::vector<double> q;
  std::vector<long long> n;
  double symbolic = 0;
  int redraws = 0;
};

/// Random point at which the expression is finite.
inline Draw draw_point(const MatsubaraGraph& g, const Expression& e, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> qd(0.3, 3.0);
  std::uniform_int_distribution<long long> nd(-3, 3);
  Draw d;
  while (true) {
    d.q.assign(g.line_count(), 0);
    d.n.assign(g.vertex_count() - 1, 0);
    for (auto& v : d.q) v = qd(rng);
    for (auto& v : d.n) v = nd(rng);
    try {
      d.symbolic = eval_numeric(e, d.q, d.n).real();
      return d;
    } catch (const SymbolicError& ex) {
      if (ex.kind() != SymbolicErrorKind::ZeroDenominator) throw;
      ++d.redraws;
    }
  }
}

inline VerificationReport make_report(Draw d, double oracle, double convergence, double tolerance) {
  VerificationReport r;
  r.q = std::move(d.q);
  r.n = std::move(d.n);
  r.symbolic = d.symbolic;
  r.oracle = oracle;
  r.abs_error = std::abs(d.symbolic - oracle);
  r.rel_error = oracle != 0 ? r.abs_error / std::abs(oracle) : r.abs_error;
  r.convergence = convergence;
  r.tolerance = tolerance;
  r.redraws = d.redraws;
  r.pass = within_tolerance(d.symbolic, oracle, tolerance);
  return r;
}

}  // namespace detail

inline std::vector<VerificationReport> verify_sum(const MatsubaraGraph& g, int trials, long long cutoff,
                                                  double tolerance, std::uint64_t seed) {
  const Expression s = matsubara_sum(g);
  std::mt19937_64 rng(seed);
  std::vector<VerificationReport> out;
  for (int t = 0; t < trials; ++t) {
    auto d = detail::draw_point(g, s, rng);
    const auto lattice = brute_force_sum(g, d.n, d.q, cutoff);
    out.push_back(detail::make_report(std::move(d), lattice.value, lattice.convergence(), tolerance));
  }
  return out;
}

inline std::vector<VerificationReport> verify_integral(const MatsubaraGraph& g, int trials,
                                                       double tolerance, std::uint64_t seed) {
  if (cycle_rank(g) > 2) throw RankTooHighError(cycle_rank(g));
  const Expression integral = matsubara_integral(g);
  std::mt19937_64 rng(seed);
  std::vector<VerificationReport> out;
  for (int t = 0; t < trials; ++t) {
    auto d = detail::draw_point(g, integral, rng);
    const double value = quadrature_integral(g, d.n, d.q, tolerance * 1e-2);
    out.push_back(detail::make_report(std::move(d), value, 0.0, tolerance));
  }
  return out;
}

/// Relative residual of the tree decomposition of prod_k 1/(q_k - i n_k).
/// n carries one value per line; N one value per non-root vertex.
inline double check_gaudin_identity(const MatsubaraGraph& g, const std::vector<double>& q,
                                    const std::vector<long long>& n, const std::vector<long long>& N) {
  detail::check_point(g, q, N);
  if (n.size() != g.line_count()) throw std::invalid_argument("expected one n per line");
  std::vector<long long> flow(g.vertex_count(), 0);
  for (std::size_t p = 0; p < g.line_count(); ++p) {
    flow[g.line(p).head] += n[p];
    flow[g.line(p).tail] -= n[p];
  }
  long long total = 0;
  for (std::size_t v = 0; v + 1 < g.vertex_count(); ++v) {
    total += N[v];
    if (flow[v] != N[v])
      throw ConstraintViolatedError("ConstraintViolated: vertex " + g.vertices()[v] +
                                    " receives " + std::to_string(flow[v]) + ", expected " +
                                    std::to_string(N[v]));
  }
  if (flow[g.root()] != -total)
    throw ConstraintViolatedError("ConstraintViolated: root vertex " + g.vertices()[g.root()]);

  using C = std::complex<double>;
  const C i(0, 1);
  C lhs = 1;
  for (std::size_t p = 0; p < g.line_count(); ++p) lhs /= q[p] - i * double(n[p]);

  C rhs = 0;
  for (const auto& tree : enumerate_spanning_trees(g)) {
    const auto sol = solve_tree(g, tree);
    std::vector<C> x(g.line_count());
    for (std::size_t p = 0; p < g.line_count(); ++p) x[p] = -i * q[p];
    detail::fill_tree_lines(sol, g, N, x);
    C term = 1;
    for (std::size_t p = 0; p < g.line_count(); ++p) {
      if (sol.tree_mask & (LineMask{1} << p)) term /= q[p] - i * x[p];
      else term /= q[p] - i * double(n[p]);
    }
    rhs += term;
  }
  return std::abs(lhs - rhs) / std::abs(lhs);
}

}  // namespace matsubara
