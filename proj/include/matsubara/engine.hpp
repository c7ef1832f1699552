#pragma once

// Closed-form evaluation of Matsubara integrals and sums.
//
// The integral is assembled tree by tree: every spanning tree T contributes
//
//   (2 pi)^L prod_k 1/(2 q_k) prod_{j in T} (1 - R_j) 1/(q_j - i Omega_j(N, i eps_l q_l))
//
// and the sum follows by applying the thermal operator, either the
// cutset-reduced one to the whole integral or, per tree, the full product over
// the tree's complement.

#include <algorithm>
#include <bit>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "matsubara/expression.hpp"
#include "matsubara/graph.hpp"

namespace matsubara {

/// Permutation of line ids; earlier lines carry parametrically larger
/// regulators (tau_{h(1)} >> tau_{h(2)} >> ... > 0).
using Hierarchy = std::vector<LineId>;

inline Hierarchy default_hierarchy(const MatsubaraGraph& g) { return g.line_ids(); }

inline void check_hierarchy(const MatsubaraGraph& g, const Hierarchy& h) {
  Hierarchy sorted = h;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != g.line_ids())
    throw GraphError(GraphErrorKind::UnknownLine, "hierarchy is not a permutation of the line ids");
}

/// n_line = n_coeffs . N + sum_l b[l] n_l, over non-root N and non-tree lines.
struct TreeLineSolution {
  LineId line;
  std::vector<int> n_coeffs;  // per non-root vertex
  std::vector<int> b;         // per line position; zero on tree lines
};

struct TreeSolution {
  SpanningTree tree;
  LineMask tree_mask = 0;
  std::vector<TreeLineSolution> omega;  // one per tree line, ascending id
  std::map<LineId, int> epsilon;        // one per non-tree line
};

/// Regulator signs: eps_l is the sign carried by the top-ranked line of the
/// fundamental cycle of l.
inline std::map<LineId, int> epsilon_signs(const MatsubaraGraph& g, const SpanningTree& tree,
                                           const Hierarchy& hierarchy) {
  check_hierarchy(g, hierarchy);
  const LineMask tmask = require_tree(g, tree);
  std::vector<std::size_t> rank(g.line_count());
  for (std::size_t r = 0; r < hierarchy.size(); ++r) rank[g.line_position(hierarchy[r])] = r;

  std::map<LineId, int> eps;
  for (std::size_t p = 0; p < g.line_count(); ++p) {
    if (tmask & (LineMask{1} << p)) continue;
    const auto cycle = fundamental_cycle(g, tree, g.line(p).id);
    const auto top = std::min_element(cycle.begin(), cycle.end(), [&](const auto& a, const auto& b) {
      return rank[g.line_position(a.line)] < rank[g.line_position(b.line)];
    });
    eps[g.line(p).id] = top->sign;
  }
  return eps;
}

inline std::map<LineId, int> epsilon_signs(const MatsubaraGraph& g, const SpanningTree& tree) {
  return epsilon_signs(g, tree, default_hierarchy(g));
}

/// Solves the vertex constraints for the tree lines. Summing the constraints
/// over the side of a tree line's fundamental cutset isolates that line.
inline TreeSolution solve_tree(const MatsubaraGraph& g, const SpanningTree& tree,
                               const Hierarchy& hierarchy) {
  TreeSolution sol;
  sol.tree = tree;
  std::sort(sol.tree.lines.begin(), sol.tree.lines.end());
  sol.tree_mask = require_tree(g, sol.tree);
  const std::size_t root = g.root();
  for (LineId j : sol.tree.lines) {
    const auto cut = fundamental_cutset(g, sol.tree, j);
    TreeLineSolution row{j, std::vector<int>(g.vertex_count() - 1, 0),
                         std::vector<int>(g.line_count(), 0)};
    // sum of N over the side, with N_root = -(sum of the others)
    for (std::size_t v = 0; v < root; ++v) {
      if (cut.side[root]) row.n_coeffs[v] = cut.side[v] ? 0 : -1;
      else row.n_coeffs[v] = cut.side[v] ? 1 : 0;
    }
    for (const auto& c : cut.crossing)
      if (c.line != j) row.b[g.line_position(c.line)] = -c.sign;
    sol.omega.push_back(std::move(row));
  }
  sol.epsilon = epsilon_signs(g, sol.tree, hierarchy);
  return sol;
}

inline TreeSolution solve_tree(const MatsubaraGraph& g, const SpanningTree& tree) {
  return solve_tree(g, tree, default_hierarchy(g));
}

/// Contribution of one tree to the integral, before any cross-tree
/// simplification: 2^(V-1) terms.
inline Expression tree_integral(const MatsubaraGraph& g, const TreeSolution& sol) {
  const auto symbols = SymbolTable::for_graph(g);
  const std::size_t lines = g.line_count();

  Term base;
  base.q_exponents.assign(lines, 0);
  for (const auto& row : sol.omega) {
    // q_j + sum_l eps_l b_l q_l - i (n_coeffs . N)
    LinearForm f{std::vector<int>(row.n_coeffs.size()), std::vector<int>(lines, 0)};
    for (std::size_t v = 0; v < f.n.size(); ++v) f.n[v] = -row.n_coeffs[v];
    f.q[g.line_position(row.line)] = 1;
    for (std::size_t p = 0; p < lines; ++p)
      if (row.b[p] != 0) f.q[p] = sol.epsilon.at(g.line(p).id) * row.b[p];
    base.denominators.push_back(std::move(f));
  }
  Expression body(symbols);
  body.add_term(std::move(base));
  for (LineId j : sol.tree.lines) body = detail::antisymmetrize_at(body, g.line_position(j));

  // (2 pi)^L prod_k 1/(2 q_k)
  Expression out(symbols);
  const Rational prefactor(1, std::int64_t{1} << lines);
  for (const auto& [k, c] : body.term_map()) {
    TermKey key = k;
    key.two_pi_power = cycle_rank(g);
    key.q_exponents.assign(lines, -1);
    out.accumulate(std::move(key), c * prefactor);
  }
  return out;
}

/// Sum over trees, reduced to the partial-fraction normal form.
inline Expression matsubara_integral(const MatsubaraGraph& g, const Hierarchy& hierarchy) {
  Expression total(SymbolTable::for_graph(g));
  for (const auto& tree : enumerate_spanning_trees(g))
    total = add(total, tree_integral(g, solve_tree(g, tree, hierarchy)));
  return apart(total);
}

inline Expression matsubara_integral(const MatsubaraGraph& g) {
  return matsubara_integral(g, default_hierarchy(g));
}

/// Each subset S stands for prod_{i in S} nbe_i (1 - R_i); the empty subset is 1.
struct OperatorSpec {
  std::vector<std::vector<LineId>> subsets;
};

inline OperatorSpec operator_full(const MatsubaraGraph& g) {
  if (g.line_count() > kMaxLines)
    throw GraphError(GraphErrorKind::GraphTooLarge, "operator expansion needs at most 16 lines");
  OperatorSpec spec;
  const std::size_t n = g.line_count();
  std::vector<LineMask> masks;
  for (LineMask m = 0; m < (LineMask{1} << n); ++m) masks.push_back(m);
  std::stable_sort(masks.begin(), masks.end(), [](LineMask a, LineMask b) {
    return std::popcount(a) < std::popcount(b);
  });
  // within a size, lexicographic on sorted ids
  auto lex_less = [&](LineMask a, LineMask b) {
    const auto ia = g.ids_of(a), ib = g.ids_of(b);
    return ia < ib;
  };
  auto it = masks.begin();
  while (it != masks.end()) {
    auto end = std::find_if(it, masks.end(), [&](LineMask m) { return std::popcount(m) != std::popcount(*it); });
    std::sort(it, end, lex_less);
    it = end;
  }
  for (LineMask m : masks) spec.subsets.push_back(g.ids_of(m));
  return spec;
}

/// Cutset-free subsets of size at most the cycle rank.
inline OperatorSpec operator_reduced(const MatsubaraGraph& g) {
  return {non_cutset_subsets(g, static_cast<std::size_t>(cycle_rank(g)))};
}

/// Applies the operator; (1 - R_i) factors act in ascending line order and
/// the kernels are attached afterwards.
inline Expression apply_operator(const OperatorSpec& spec, const Expression& e) {
  const auto& symbols = *e.symbols();
  std::map<LineMask, Expression> differences;
  differences.emplace(LineMask{0}, e);
  std::function<const Expression&(LineMask)> difference = [&](LineMask m) -> const Expression& {
    if (auto it = differences.find(m); it != differences.end()) return it->second;
    const int top = 31 - std::countl_zero(m);
    Expression d = detail::antisymmetrize_at(difference(m & ~(LineMask{1} << top)), top);
    return differences.emplace(m, std::move(d)).first->second;
  };

  Expression result(e.symbols());
  for (const auto& subset : spec.subsets) {
    LineMask m = 0;
    for (LineId id : subset) m |= LineMask{1} << symbols.line_position(id);
    Expression term = difference(m);
    for (std::size_t p = 0; p < symbols.q_count(); ++p)
      if (m & (LineMask{1} << p)) term = detail::kernel_multiply_at(term, p);
    result = add(result, term);
  }
  return result;
}

enum class SumMethod { Operator, Direct };

inline Expression matsubara_sum(const MatsubaraGraph& g, SumMethod method, const Hierarchy& hierarchy) {
  if (method == SumMethod::Operator)
    return apart(apply_operator(operator_reduced(g), matsubara_integral(g, hierarchy)));

  // Per tree: prod over non-tree lines of [1 + nbe_l (1 - R_l)] on that tree's integral.
  Expression total(SymbolTable::for_graph(g));
  for (const auto& tree : enumerate_spanning_trees(g)) {
    const auto sol = solve_tree(g, tree, hierarchy);
    const LineMask complement = g.all_lines_mask() & ~sol.tree_mask;
    OperatorSpec spec;
    for (LineMask s = complement;; s = (s - 1) & complement) {
      spec.subsets.push_back(g.ids_of(s));
      if (s == 0) break;
    }
    total = add(total, apply_operator(spec, tree_integral(g, sol)));
  }
  return apart(total);
}

inline Expression matsubara_sum(const MatsubaraGraph& g, SumMethod method = SumMethod::Operator) {
  return matsubara_sum(g, method, default_hierarchy(g));
}

/// True iff prod_{i in lines} (1 - R_i) sends the expression to zero.
inline bool annihilator_check(const MatsubaraGraph& g, const std::vector<LineId>& lines,
                              const Expression& e) {
  Expression current = e;
  std::vector<LineId> sorted = lines;
  std::sort(sorted.begin(), sorted.end());
  for (LineId id : sorted) current = detail::antisymmetrize_at(current, g.line_position(id));
  return apart(current).empty();
}

}  // namespace matsubara
