#pragma once

// Canonical sums of terms
//
//   coeff * (2 pi)^p * prod_i q_i^{e_i} * prod_{k in K} nbe(q_k) / prod_d (i n_d.N + c_d.q)
//
// with exact rational coefficients. Every denominator is a linear form in the
// non-root N symbols (times i) and the q symbols. Canonical form means: forms
// are primitive with a positive leading coefficient, denominators of a term
// are sorted, equal keys are merged and zero terms dropped.

#include <algorithm>
#include <bit>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "matsubara/graph.hpp"
#include "matsubara/kernel.hpp"

namespace matsubara {

using Rational = boost::rational<std::int64_t>;

enum class SymbolicErrorKind {
  KernelReflection,
  DuplicateKernel,
  ZeroDenominator,
  ZeroForm,
  DegenerateDenominators,
  SymbolMismatch,
  UnknownSymbol,
};

inline const char* to_string(SymbolicErrorKind kind) {
  switch (kind) {
    case SymbolicErrorKind::KernelReflection: return "KernelReflection";
    case SymbolicErrorKind::DuplicateKernel: return "DuplicateKernel";
    case SymbolicErrorKind::ZeroDenominator: return "ZeroDenominator";
    case SymbolicErrorKind::ZeroForm: return "ZeroForm";
    case SymbolicErrorKind::DegenerateDenominators: return "DegenerateDenominators";
    case SymbolicErrorKind::SymbolMismatch: return "SymbolMismatch";
    case SymbolicErrorKind::UnknownSymbol: return "UnknownSymbol";
  }
  return "Unknown";
}

class SymbolicError : public std::runtime_error {
 public:
  SymbolicError(SymbolicErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}
  SymbolicErrorKind kind() const noexcept { return kind_; }

 private:
  SymbolicErrorKind kind_;
};

/// Names of the symbols an expression is written in: N for each non-root
/// vertex (input order) and q for each line (ascending id).
struct SymbolTable {
  std::vector<std::string> n_names;
  std::vector<LineId> lines;

  static std::shared_ptr<const SymbolTable> for_graph(const MatsubaraGraph& g) {
    auto s = std::make_shared<SymbolTable>();
    s->n_names.assign(g.vertices().begin(), g.vertices().end() - 1);
    s->lines = g.line_ids();
    return s;
  }

  std::size_t n_count() const noexcept { return n_names.size(); }
  std::size_t q_count() const noexcept { return lines.size(); }

  std::size_t line_position(LineId id) const {
    auto it = std::lower_bound(lines.begin(), lines.end(), id);
    if (it == lines.end() || *it != id)
      throw SymbolicError(SymbolicErrorKind::UnknownSymbol, "q" + std::to_string(id.value));
    return static_cast<std::size_t>(it - lines.begin());
  }

  std::size_t n_position(const std::string& name) const {
    auto it = std::find(n_names.begin(), n_names.end(), name);
    if (it == n_names.end()) throw SymbolicError(SymbolicErrorKind::UnknownSymbol, "N" + name);
    return static_cast<std::size_t>(it - n_names.begin());
  }

  friend bool operator==(const SymbolTable&, const SymbolTable&) = default;
};

/// i * (n . N) + (c . q)
struct LinearForm {
  std::vector<int> n;
  std::vector<int> q;

  bool is_zero() const {
    auto nz = [](int x) { return x != 0; };
    return std::none_of(n.begin(), n.end(), nz) && std::none_of(q.begin(), q.end(), nz);
  }

  /// Index of the first N symbol with a nonzero coefficient, or n.size().
  std::size_t leading_n() const {
    std::size_t k = 0;
    while (k < n.size() && n[k] == 0) ++k;
    return k;
  }

  /// Makes the form primitive with a positive first coefficient. Returns f
  /// with 1/(old form) == f / (new form).
  Rational normalize() {
    if (is_zero()) throw SymbolicError(SymbolicErrorKind::ZeroForm, "identically zero denominator");
    int g = 0;
    int first = 0;
    for (int x : n) {
      g = std::gcd(g, x);
      if (first == 0) first = x;
    }
    for (int x : q) {
      g = std::gcd(g, x);
      if (first == 0) first = x;
    }
    const int scale = first < 0 ? -g : g;
    if (scale != 1) {
      for (int& x : n) x /= scale;
      for (int& x : q) x /= scale;
    }
    return Rational(1, scale);
  }

  std::complex<double> evaluate(const std::vector<double>& q_values,
                                const std::vector<long long>& n_values) const {
    long long imag = 0;
    for (std::size_t k = 0; k < n.size(); ++k) imag += n[k] * n_values[k];
    double real = 0.0, magnitude = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
      real += q[k] * q_values[k];
      magnitude += std::abs(q[k] * q_values[k]);
    }
    if (imag == 0 && std::abs(real) <= 8.0 * std::numeric_limits<double>::epsilon() * magnitude)
      throw SymbolicError(SymbolicErrorKind::ZeroDenominator, "denominator vanishes at this point");
    return {real, static_cast<double>(imag)};
  }

  friend auto operator<=>(const LinearForm&, const LinearForm&) = default;
};

struct Term {
  Rational coeff{1};
  int two_pi_power = 0;
  std::vector<int> q_exponents;
  LineMask kernels = 0;
  std::vector<LinearForm> denominators;
};

/// Everything about a term except its coefficient. Ordered so that, among
/// denominators, forms with larger coefficient vectors come first.
struct TermKey {
  int two_pi_power = 0;
  std::vector<int> q_exponents;
  LineMask kernels = 0;
  std::vector<LinearForm> denominators;  // sorted descending

  friend bool operator==(const TermKey&, const TermKey&) = default;
  friend bool operator<(const TermKey& a, const TermKey& b) {
    if (a.two_pi_power != b.two_pi_power) return a.two_pi_power < b.two_pi_power;
    if (a.q_exponents != b.q_exponents) return a.q_exponents > b.q_exponents;
    if (a.kernels != b.kernels) {
      const int pa = std::popcount(a.kernels), pb = std::popcount(b.kernels);
      return pa != pb ? pa < pb : a.kernels < b.kernels;
    }
    return std::lexicographical_compare(a.denominators.begin(), a.denominators.end(),
                                        b.denominators.begin(), b.denominators.end(),
                                        std::greater<>{});
  }
};

class Expression {
 public:
  explicit Expression(std::shared_ptr<const SymbolTable> symbols) : symbols_(std::move(symbols)) {}

  static Expression from_terms(std::shared_ptr<const SymbolTable> symbols,
                               const std::vector<Term>& terms) {
    Expression e(std::move(symbols));
    for (const auto& t : terms) e.add_term(t);
    return e;
  }

  /// Normalizes the term's denominators and merges it into the sum.
  void add_term(Term t) {
    if (t.q_exponents.empty()) t.q_exponents.assign(symbols_->q_count(), 0);
    check_shape(t);
    for (auto& d : t.denominators) t.coeff *= d.normalize();
    std::sort(t.denominators.begin(), t.denominators.end(), std::greater<>{});
    accumulate({t.two_pi_power, std::move(t.q_exponents), t.kernels, std::move(t.denominators)},
               t.coeff);
  }

  void accumulate(TermKey key, const Rational& coeff) {
    if (coeff.numerator() == 0) return;
    auto [it, inserted] = terms_.try_emplace(std::move(key), coeff);
    if (!inserted) {
      it->second += coeff;
      if (it->second.numerator() == 0) terms_.erase(it);
    }
  }

  std::vector<Term> terms() const {
    std::vector<Term> out;
    out.reserve(terms_.size());
    for (const auto& [k, c] : terms_)
      out.push_back({c, k.two_pi_power, k.q_exponents, k.kernels, k.denominators});
    return out;
  }

  const std::map<TermKey, Rational>& term_map() const noexcept { return terms_; }
  const std::shared_ptr<const SymbolTable>& symbols() const noexcept { return symbols_; }
  std::size_t size() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }

  friend bool operator==(const Expression& a, const Expression& b) {
    return *a.symbols_ == *b.symbols_ && a.terms_ == b.terms_;
  }

 private:
  void check_shape(const Term& t) const {
    const bool ok = t.q_exponents.size() == symbols_->q_count() &&
                    (symbols_->q_count() >= 32 ||
                     (t.kernels >> symbols_->q_count()) == 0) &&
                    std::all_of(t.denominators.begin(), t.denominators.end(), [&](const auto& d) {
                      return d.n.size() == symbols_->n_count() && d.q.size() == symbols_->q_count();
                    });
    if (!ok) throw SymbolicError(SymbolicErrorKind::SymbolMismatch, "term shape does not match symbols");
  }

  std::shared_ptr<const SymbolTable> symbols_;
  std::map<TermKey, Rational> terms_;
};

inline void require_same_symbols(const Expression& a, const Expression& b) {
  if (!(*a.symbols() == *b.symbols()))
    throw SymbolicError(SymbolicErrorKind::SymbolMismatch, "expressions use different symbols");
}

inline Expression add(const Expression& a, const Expression& b) {
  require_same_symbols(a, b);
  Expression out = a;
  for (const auto& [k, c] : b.term_map()) out.accumulate(k, c);
  return out;
}

inline Expression scale(const Expression& e, const Rational& factor) {
  Expression out(e.symbols());
  if (factor.numerator() == 0) return out;
  for (const auto& [k, c] : e.term_map()) out.accumulate(k, c * factor);
  return out;
}

inline Expression subtract(const Expression& a, const Expression& b) {
  return add(a, scale(b, Rational(-1)));
}

namespace detail {

inline Expression reflect_at(const Expression& e, std::size_t pos) {
  Expression out(e.symbols());
  const LineMask bit = LineMask{1} << pos;
  for (const auto& [k, c] : e.term_map()) {
    if (k.kernels & bit)
      throw SymbolicError(SymbolicErrorKind::KernelReflection,
                          "q" + std::to_string(e.symbols()->lines[pos].value) + " carries a kernel");
    Term t{c, k.two_pi_power, k.q_exponents, k.kernels, k.denominators};
    if (t.q_exponents[pos] % 2 != 0) t.coeff = -t.coeff;
    for (auto& d : t.denominators) d.q[pos] = -d.q[pos];
    out.add_term(std::move(t));
  }
  return out;
}

/// (1 - R) applied to e.
inline Expression antisymmetrize_at(const Expression& e, std::size_t pos) {
  return subtract(e, reflect_at(e, pos));
}

inline Expression kernel_multiply_at(const Expression& e, std::size_t pos) {
  Expression out(e.symbols());
  const LineMask bit = LineMask{1} << pos;
  for (const auto& [k, c] : e.term_map()) {
    if (k.kernels & bit)
      throw SymbolicError(SymbolicErrorKind::DuplicateKernel,
                          "q" + std::to_string(e.symbols()->lines[pos].value));
    TermKey key = k;
    key.kernels |= bit;
    out.accumulate(std::move(key), c);
  }
  return out;
}

}  // namespace detail

/// Negates q_line everywhere.
inline Expression reflect(const Expression& e, LineId line) {
  return detail::reflect_at(e, e.symbols()->line_position(line));
}

/// Multiplies every term by nbe(q_line).
inline Expression kernel_multiply(const Expression& e, LineId line) {
  return detail::kernel_multiply_at(e, e.symbols()->line_position(line));
}

/// Iterated partial fractions in N_1, then N_2, ... Afterwards every term has
/// at most one denominator whose leading N symbol is N_k, for each k.
///
/// For terms whose denominators have linearly independent N parts (which is
/// what the Matsubara pipeline produces) the result is a normal form: equal
/// rational functions give identical expressions.
inline Expression apart(const Expression& e) {
  const std::size_t n_count = e.symbols()->n_count();
  Expression current = e;
  for (std::size_t var = 0; var < n_count; ++var) {
    Expression next(e.symbols());
    for (const auto& [k, c] : current.term_map()) {
      std::vector<LinearForm> poles, rest;
      for (const auto& d : k.denominators) (d.leading_n() == var ? poles : rest).push_back(d);
      if (poles.size() <= 1) {
        next.accumulate(k, c);
        continue;
      }
      // 1/prod_m L_m = sum_j 1/L_j * prod_{m != j} c_j / (c_j L_m - c_m L_j),
      // with c the coefficient of N_var.
      for (std::size_t j = 0; j < poles.size(); ++j) {
        Term t{c, k.two_pi_power, k.q_exponents, k.kernels, rest};
        const int cj = poles[j].n[var];
        t.denominators.push_back(poles[j]);
        for (std::size_t m = 0; m < poles.size(); ++m) {
          if (m == j) continue;
          const int cm = poles[m].n[var];
          LinearForm r{std::vector<int>(n_count), std::vector<int>(poles[m].q.size())};
          for (std::size_t i = 0; i < n_count; ++i) r.n[i] = cj * poles[m].n[i] - cm * poles[j].n[i];
          for (std::size_t i = 0; i < r.q.size(); ++i) r.q[i] = cj * poles[m].q[i] - cm * poles[j].q[i];
          if (r.is_zero())
            throw SymbolicError(SymbolicErrorKind::DegenerateDenominators, "repeated pole");
          t.coeff *= cj;
          t.denominators.push_back(std::move(r));
        }
        next.add_term(std::move(t));
      }
    }
    current = std::move(next);
  }
  return current;
}

/// Numeric value at positive q (per line, ascending id) and integer N (per
/// non-root vertex).
inline std::complex<double> eval_numeric(const Expression& e, const std::vector<double>& q_values,
                                         const std::vector<long long>& n_values) {
  const auto& s = *e.symbols();
  if (q_values.size() != s.q_count() || n_values.size() != s.n_count())
    throw SymbolicError(SymbolicErrorKind::SymbolMismatch, "wrong number of values");
  std::vector<double> kernel(q_values.size());
  for (std::size_t i = 0; i < q_values.size(); ++i) kernel[i] = nbe(q_values[i]);

  std::complex<double> total = 0.0;
  for (const auto& [k, c] : e.term_map()) {
    std::complex<double> value =
        boost::rational_cast<double>(c) * std::pow(2.0 * std::numbers::pi, k.two_pi_power);
    for (std::size_t i = 0; i < q_values.size(); ++i) {
      if (k.q_exponents[i] != 0) value *= std::pow(q_values[i], k.q_exponents[i]);
      if (k.kernels & (LineMask{1} << i)) value *= kernel[i];
    }
    for (const auto& d : k.denominators) value /= d.evaluate(q_values, n_values);
    total += value;
  }
  return total;
}

}  // namespace matsubara
