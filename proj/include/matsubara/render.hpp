#pragma once

// Text, LaTeX and JSON renderings of expressions, and the JSON parser.
//
// Text and LaTeX group terms sharing (2 pi)^p and the q-monomial behind one
// prefactor, writing 1/q_i as 1/(2 q_i) the way the Matsubara literature does.

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "matsubara/expression.hpp"

namespace matsubara {

enum class Format { Text, Latex, Json };

inline std::optional<Format> parse_format(const std::string& s) {
  if (s == "text") return Format::Text;
  if (s == "latex") return Format::Latex;
  if (s == "json") return Format::Json;
  return std::nullopt;
}

inline std::string rational_to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline Rational rational_from_string(const std::string& s) {
  try {
    std::size_t used = 0;
    const auto slash = s.find('/');
    const long long num = std::stoll(s.substr(0, slash), &used);
    if (used != (slash == std::string::npos ? s.size() : slash)) throw std::invalid_argument(s);
    if (slash == std::string::npos) return Rational(num);
    const std::string rest = s.substr(slash + 1);
    const long long den = std::stoll(rest, &used);
    if (used != rest.size() || den == 0) throw std::invalid_argument(s);
    return Rational(num, den);
  } catch (const std::logic_error&) {
    throw SymbolicError(SymbolicErrorKind::UnknownSymbol, "bad rational literal '" + s + "'");
  }
}

namespace detail {

struct Style {
  bool latex;
  std::string minus() const { return latex ? "-" : "−"; }
  std::string pi() const { return latex ? "\\pi" : "π"; }
  std::string times() const { return latex ? "\\," : "·"; }

  static std::string subscript(const std::string& name) {
    return name.size() == 1 ? "_" + name : "_{" + name + "}";
  }
  std::string n_symbol(const std::string& name) const {
    return latex ? "N" + subscript(name) : "N" + name;
  }
  std::string q_symbol(LineId id) const {
    return latex ? "q" + subscript(std::to_string(id.value)) : "q" + std::to_string(id.value);
  }
  std::string kernel(LineId id) const {
    return latex ? "n_B(" + q_symbol(id) + ")" : "nbe(" + q_symbol(id) + ")";
  }
  std::string plus_sep() const { return latex ? " + " : "+"; }
  std::string minus_sep() const { return latex ? " - " : minus(); }
};

inline std::string signed_sum(const Style& st, const std::vector<std::pair<int, std::string>>& parts) {
  std::string out;
  bool first = true;
  for (const auto& [c, sym] : parts) {
    if (c == 0) continue;
    const int mag = c < 0 ? -c : c;
    if (first) out += c < 0 ? st.minus() : "";
    else out += c < 0 ? st.minus_sep() : st.plus_sep();
    if (mag != 1) out += std::to_string(mag) + (st.latex ? " " : "");
    out += sym;
    first = false;
  }
  return out;
}

inline std::string form_to_string(const Style& st, const SymbolTable& s, const LinearForm& f) {
  std::vector<std::pair<int, std::string>> n_parts, q_parts;
  for (std::size_t k = 0; k < f.n.size(); ++k) n_parts.emplace_back(f.n[k], st.n_symbol(s.n_names[k]));
  for (std::size_t k = 0; k < f.q.size(); ++k) q_parts.emplace_back(f.q[k], st.q_symbol(s.lines[k]));

  int n_terms = 0, single = 0;
  for (const auto& [c, sym] : n_parts)
    if (c != 0) {
      ++n_terms;
      single = c;
    }
  std::string out;
  const std::string i = st.latex ? "i " : "i";
  if (n_terms == 1 && (single == 1 || single == -1)) {
    out = (single < 0 ? st.minus() : "") + i;
    for (const auto& [c, sym] : n_parts)
      if (c != 0) out += sym;
  } else if (n_terms > 0) {
    out = i + "(" + signed_sum(st, n_parts) + ")";
  }
  const std::string qs = signed_sum(st, q_parts);
  if (!qs.empty()) {
    if (out.empty()) out = qs;
    else if (qs.rfind(st.minus(), 0) == 0)
      out += st.minus_sep() + qs.substr(st.minus().size());
    else
      out += st.plus_sep() + qs;
  }
  return out;
}

inline std::string render_grouped(const Expression& e, const Style& st) {
  const auto& s = *e.symbols();
  const auto terms = e.terms();
  if (terms.empty()) return "0";

  std::string out;
  std::size_t begin = 0;
  while (begin < terms.size()) {
    std::size_t end = begin;
    while (end < terms.size() && terms[end].two_pi_power == terms[begin].two_pi_power &&
           terms[end].q_exponents == terms[begin].q_exponents)
      ++end;
    const Term& head = terms[begin];

    // Prefactor: (2 pi)^p * prod q^e, negative powers written as (2q)^|e|.
    std::vector<std::string> num, den;
    std::int64_t twos = 1;
    if (head.two_pi_power == 1) num.push_back("2" + st.pi());
    else if (head.two_pi_power > 1)
      num.push_back("(2" + st.pi() + ")^" + (st.latex ? "{" + std::to_string(head.two_pi_power) + "}"
                                                      : std::to_string(head.two_pi_power)));
    for (std::size_t i = 0; i < head.q_exponents.size(); ++i) {
      const int ex = head.q_exponents[i];
      if (ex == 0) continue;
      const std::string sym = st.q_symbol(s.lines[i]);
      const std::string pw = st.latex ? "^{" + std::to_string(ex < 0 ? -ex : ex) + "}"
                                      : "^" + std::to_string(ex < 0 ? -ex : ex);
      if (ex > 0) {
        num.push_back(ex == 1 ? sym : sym + pw);
      } else {
        for (int k = 0; k < -ex; ++k) twos *= 2;
        den.push_back(ex == -1 ? "2" + sym : "(2" + sym + ")" + pw);
      }
    }
    auto join = [&](const std::vector<std::string>& parts) {
      std::string r;
      for (std::size_t k = 0; k < parts.size(); ++k) r += (k ? st.times() : "") + parts[k];
      return r;
    };
    std::string prefactor;
    if (!num.empty() || !den.empty()) {
      const std::string n = num.empty() ? "1" : join(num);
      if (st.latex) prefactor = den.empty() ? n : "\\frac{" + n + "}{" + join(den) + "}";
      else if (den.empty()) prefactor = "(" + n + ")";
      else prefactor = "(" + n + "/" + (den.size() > 1 ? "(" + join(den) + ")" : join(den)) + ")";
    }

    std::string body;
    for (std::size_t t = begin; t < end; ++t) {
      const Rational c = terms[t].coeff * twos;
      const bool negative = c.numerator() < 0;
      if (t == begin) body += negative ? st.minus() : "";
      else body += negative ? (st.latex ? " - " : " − ") : " + ";
      const std::int64_t cn = negative ? -c.numerator() : c.numerator();

      std::vector<std::string> numer;
      if (cn != 1 || terms[t].kernels == 0) numer.push_back(std::to_string(cn));
      for (std::size_t i = 0; i < s.q_count(); ++i)
        if (terms[t].kernels & (LineMask{1} << i)) numer.push_back(st.kernel(s.lines[i]));
      std::vector<std::string> denom;
      if (c.denominator() != 1) denom.push_back(std::to_string(c.denominator()));
      for (const auto& d : terms[t].denominators) denom.push_back("(" + form_to_string(st, s, d) + ")");

      const std::string ns = join(numer);
      if (st.latex) {
        std::string ds;
        if (denom.size() == 1 && terms[t].denominators.size() == 1)
          ds = form_to_string(st, s, terms[t].denominators.front());
        else
          for (const auto& d : denom) ds += (ds.empty() ? "" : " ") + d;
        body += denom.empty() ? ns : "\\frac{" + ns + "}{" + ds + "}";
      } else {
        std::string ds;
        for (const auto& d : denom) ds += d;
        if (denom.empty()) body += ns;
        else if (denom.size() == 1) body += ns + "/" + ds;
        else body += ns + "/(" + ds + ")";
      }
    }

    if (!out.empty()) out += " + ";
    if (prefactor.empty()) out += body;
    else out += prefactor + (st.latex ? "\\left[" + body + "\\right]" : "[" + body + "]");
    begin = end;
  }
  return out;
}

}  // namespace detail

inline nlohmann::json expression_to_json(const Expression& e) {
  const auto& s = *e.symbols();
  nlohmann::json j;
  j["symbols"]["N"] = s.n_names;
  j["symbols"]["q"] = nlohmann::json::array();
  for (LineId id : s.lines) j["symbols"]["q"].push_back(id.value);
  j["terms"] = nlohmann::json::array();
  for (const auto& t : e.terms()) {
    nlohmann::json jt;
    jt["coeff"] = rational_to_string(t.coeff);
    jt["two_pi_pow"] = t.two_pi_power;
    jt["q_exp"] = nlohmann::json::object();
    for (std::size_t i = 0; i < t.q_exponents.size(); ++i)
      if (t.q_exponents[i] != 0) jt["q_exp"][std::to_string(s.lines[i].value)] = t.q_exponents[i];
    jt["kernels"] = nlohmann::json::array();
    for (std::size_t i = 0; i < s.q_count(); ++i)
      if (t.kernels & (LineMask{1} << i)) jt["kernels"].push_back(s.lines[i].value);
    jt["denoms"] = nlohmann::json::array();
    for (const auto& d : t.denominators) {
      nlohmann::json jd;
      jd["n"] = nlohmann::json::object();
      jd["q"] = nlohmann::json::object();
      for (std::size_t k = 0; k < d.n.size(); ++k)
        if (d.n[k] != 0) jd["n"][s.n_names[k]] = d.n[k];
      for (std::size_t k = 0; k < d.q.size(); ++k)
        if (d.q[k] != 0) jd["q"][std::to_string(s.lines[k].value)] = d.q[k];
      jt["denoms"].push_back(std::move(jd));
    }
    j["terms"].push_back(std::move(jt));
  }
  return j;
}

/// Parses the JSON rendering. Symbols come from the document when present,
/// otherwise from `fallback`.
inline Expression expression_from_json(const nlohmann::json& j,
                                       std::shared_ptr<const SymbolTable> fallback = nullptr) {
  try {
    std::shared_ptr<const SymbolTable> symbols = fallback;
    if (j.contains("symbols")) {
      auto s = std::make_shared<SymbolTable>();
      for (const auto& n : j.at("symbols").at("N")) s->n_names.push_back(n.get<std::string>());
      for (const auto& q : j.at("symbols").at("q")) s->lines.push_back(LineId{q.get<int>()});
      if (!std::is_sorted(s->lines.begin(), s->lines.end()))
        throw SymbolicError(SymbolicErrorKind::SymbolMismatch, "q symbols must be ascending");
      symbols = std::move(s);
    }
    if (!symbols) throw SymbolicError(SymbolicErrorKind::SymbolMismatch, "no symbol table");

    auto line_pos = [&](const std::string& key) { return symbols->line_position(LineId{std::stoi(key)}); };
    Expression e(symbols);
    for (const auto& jt : j.at("terms")) {
      Term t;
      t.coeff = rational_from_string(jt.at("coeff").get<std::string>());
      t.two_pi_power = jt.value("two_pi_pow", 0);
      t.q_exponents.assign(symbols->q_count(), 0);
      if (jt.contains("q_exp"))
        for (const auto& [key, v] : jt.at("q_exp").items()) t.q_exponents[line_pos(key)] = v.get<int>();
      if (jt.contains("kernels"))
        for (const auto& k : jt.at("kernels")) {
          const LineMask bit = LineMask{1} << symbols->line_position(LineId{k.get<int>()});
          if (t.kernels & bit) throw SymbolicError(SymbolicErrorKind::DuplicateKernel, k.dump());
          t.kernels |= bit;
        }
      for (const auto& jd : jt.at("denoms")) {
        LinearForm f{std::vector<int>(symbols->n_count()), std::vector<int>(symbols->q_count())};
        if (jd.contains("n"))
          for (const auto& [key, v] : jd.at("n").items()) f.n[symbols->n_position(key)] = v.get<int>();
        if (jd.contains("q"))
          for (const auto& [key, v] : jd.at("q").items()) f.q[line_pos(key)] = v.get<int>();
        t.denominators.push_back(std::move(f));
      }
      e.add_term(std::move(t));
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw SymbolicError(SymbolicErrorKind::SymbolMismatch, std::string("malformed expression JSON: ") + ex.what());
  } catch (const std::logic_error& ex) {
    throw SymbolicError(SymbolicErrorKind::UnknownSymbol, std::string("malformed expression JSON: ") + ex.what());
  }
}

inline std::string render(const Expression& e, Format format) {
  switch (format) {
    case Format::Text: return detail::render_grouped(e, {false});
    case Format::Latex: return detail::render_grouped(e, {true});
    case Format::Json: return expression_to_json(e).dump();
  }
  return {};
}

}  // namespace matsubara
