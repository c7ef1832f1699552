#pragma once

#include <cstdint>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "matsubara/engine.hpp"
#include "matsubara/graph.hpp"
#include "matsubara/graph_json.hpp"
#include "matsubara/oracles.hpp"
#include "matsubara/render.hpp"

namespace matsubara::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitVerifyFailed = 2;
inline constexpr int kExitUsage = 64;
inline constexpr std::uint64_t kDefaultSeed = 20100501;

struct Invocation {
  std::string subcommand;
  std::string graph_path;
  std::string format = "text";
  bool full = false;
  std::string method = "operator";
  std::string what = "sum";
  std::string oracle = "sum";
  int trials = 10;
  long long cutoff = 200;
  double tol = 1e-3;
  std::uint64_t seed = kDefaultSeed;
  std::string hierarchy;
  std::string q_values;
  std::string n_values;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream is(item);
    T v;
    if (!(is >> v) || !(is >> std::ws).eof())
      throw UsageError(std::string("cannot parse ") + what + " list '" + text + "'");
    out.push_back(v);
  }
  return out;
}

inline Hierarchy parse_hierarchy(const MatsubaraGraph& g, const std::string& text) {
  if (text.empty()) return default_hierarchy(g);
  Hierarchy h;
  for (int v : parse_list<int>(text, "hierarchy")) h.push_back(LineId{v});
  try {
    check_hierarchy(g, h);
  } catch (const GraphError&) {
    throw UsageError("--hierarchy must be a permutation of the line ids");
  }
  return h;
}

inline std::string id_list(const std::vector<LineId>& ids) {
  std::string s = "{";
  for (std::size_t k = 0; k < ids.size(); ++k) s += (k ? "," : "") + std::to_string(ids[k].value);
  return s + "}";
}

inline nlohmann::json id_array(const std::vector<LineId>& ids) {
  auto a = nlohmann::json::array();
  for (LineId id : ids) a.push_back(id.value);
  return a;
}

inline std::string operator_to_string(const OperatorSpec& spec, Format f) {
  if (f == Format::Json) {
    nlohmann::json j;
    j["subsets"] = nlohmann::json::array();
    for (const auto& s : spec.subsets) j["subsets"].push_back(id_array(s));
    return j.dump();
  }
  std::string out;
  for (std::size_t k = 0; k < spec.subsets.size(); ++k) {
    const auto& s = spec.subsets[k];
    if (k) out += " + ";
    if (s.empty()) {
      out += "1";
      continue;
    }
    std::string kernels, reflections;
    for (LineId id : s) {
      const std::string n = std::to_string(id.value);
      if (f == Format::Latex) {
        const std::string sub = n.size() == 1 ? n : "{" + n + "}";
        kernels += "n_B(q_" + sub + ")";
        reflections += "(1 - \\hat{R}_" + sub + ")";
      } else {
        kernels += "nbe(q" + n + ")";
        reflections += "(1−R" + n + ")";
      }
    }
    out += kernels + reflections;
  }
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline int execute(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const auto parsed_format = parse_format(inv.format);
  if (!parsed_format) throw UsageError("--format must be text, latex or json");
  const Format format = *parsed_format;
  const MatsubaraGraph g = load_graph(inv.graph_path);

  if (inv.subcommand == "validate") {
    out << "valid: V=" << g.vertex_count() << " I=" << g.line_count() << " L=" << cycle_rank(g)
        << " root=" << g.vertices()[g.root()] << "\n";
    return kExitOk;
  }
  if (inv.subcommand == "trees") {
    const auto trees = enumerate_spanning_trees(g);
    if (format == Format::Json) {
      nlohmann::json j;
      j["trees"] = nlohmann::json::array();
      for (const auto& t : trees) j["trees"].push_back(id_array(t.lines));
      j["count"] = trees.size();
      j["matrix_tree_count"] = count_spanning_trees(g);
      out << j.dump() << "\n";
    } else {
      for (const auto& t : trees) out << id_list(t.lines) << "\n";
      out << "count: " << trees.size() << " (matrix-tree: " << count_spanning_trees(g) << ")\n";
    }
    return kExitOk;
  }
  if (inv.subcommand == "cutsets") {
    std::vector<std::vector<LineId>> cuts;
    for (LineMask m = 1; m <= g.all_lines_mask(); ++m)
      if (is_cutset(g, m)) cuts.push_back(g.ids_of(m));
    std::stable_sort(cuts.begin(), cuts.end(),
                     [](const auto& a, const auto& b) { return a.size() < b.size() || (a.size() == b.size() && a < b); });
    if (format == Format::Json) {
      nlohmann::json j;
      j["cutsets"] = nlohmann::json::array();
      for (const auto& c : cuts) j["cutsets"].push_back(id_array(c));
      j["count"] = cuts.size();
      out << j.dump() << "\n";
    } else {
      for (const auto& c : cuts) out << id_list(c) << "\n";
      out << "count: " << cuts.size() << "\n";
    }
    return kExitOk;
  }
  if (inv.subcommand == "operator") {
    const auto spec = inv.full ? operator_full(g) : operator_reduced(g);
    out << operator_to_string(spec, format) << "\n";
    if (format != Format::Json) out << "terms: " << spec.subsets.size() << "\n";
    return kExitOk;
  }

  const Hierarchy h = detail::parse_hierarchy(g, inv.hierarchy);
  auto build_sum = [&] {
    if (inv.method != "operator" && inv.method != "direct")
      throw UsageError("--method must be operator or direct");
    return matsubara_sum(g, inv.method == "direct" ? SumMethod::Direct : SumMethod::Operator, h);
  };

  if (inv.subcommand == "integral") {
    out << render(matsubara_integral(g, h), format) << "\n";
    return kExitOk;
  }
  if (inv.subcommand == "sum") {
    out << render(build_sum(), format) << "\n";
    return kExitOk;
  }
  if (inv.subcommand == "eval") {
    if (inv.what != "sum" && inv.what != "integral") throw UsageError("--what must be sum or integral");
    const auto q = parse_list<double>(inv.q_values, "q");
    const auto n = parse_list<long long>(inv.n_values, "N");
    const Expression e = inv.what == "sum" ? build_sum() : matsubara_integral(g, h);
    if (q.size() != g.line_count() || n.size() + 1 != g.vertex_count())
      throw UsageError("--q needs " + std::to_string(g.line_count()) + " values and --N needs " +
                       std::to_string(g.vertex_count() - 1));
    const auto v = eval_numeric(e, q, n);
    if (format == Format::Json)
      out << nlohmann::json{{"real", v.real()}, {"imag", v.imag()}}.dump() << "\n";
    else
      out << format_double(v.real()) << (v.imag() < 0 ? " - " : " + ")
          << format_double(std::abs(v.imag())) << "i\n";
    return kExitOk;
  }
  if (inv.subcommand == "verify") {
    out << "# seed " << inv.seed << "\n";
    std::vector<VerificationReport> reports;
    if (inv.oracle == "sum") reports = verify_sum(g, inv.trials, inv.cutoff, inv.tol, inv.seed);
    else if (inv.oracle == "integral") reports = verify_integral(g, inv.trials, inv.tol, inv.seed);
    else throw UsageError("--oracle must be sum or integral");
    bool all = true;
    for (const auto& r : reports) {
      out << r.to_json().dump() << "\n";
      all = all && r.pass;
    }
    if (!all) err << "verification failed\n";
    return all ? kExitOk : kExitVerifyFailed;
  }
  if (inv.subcommand == "gaudin-check") {
    out << "# seed " << inv.seed << "\n";
    std::mt19937_64 rng(inv.seed);
    std::uniform_real_distribution<double> qd(0.3, 3.0);
    std::uniform_int_distribution<long long> nd(-4, 4);
    bool all = true;
    for (int t = 0; t < inv.trials; ++t) {
      std::vector<double> q(g.line_count());
      std::vector<long long> n(g.line_count()), flow(g.vertex_count(), 0);
      for (auto& v : q) v = qd(rng);
      for (std::size_t p = 0; p < n.size(); ++p) {
        n[p] = nd(rng);
        flow[g.line(p).head] += n[p];
        flow[g.line(p).tail] -= n[p];
      }
      flow.pop_back();
      const double residual = check_gaudin_identity(g, q, n, flow);
      const bool pass = residual <= inv.tol;
      all = all && pass;
      out << nlohmann::json{{"q", q}, {"n", n}, {"N", flow}, {"residual", residual}, {"pass", pass}}.dump()
          << "\n";
    }
    if (!all) err << "gaudin identity residual above tolerance\n";
    return all ? kExitOk : kExitVerifyFailed;
  }
  throw UsageError("unknown subcommand " + inv.subcommand);
}

}  // namespace detail

/// Runs one command line (without the program name). Results go to `out`,
/// diagnostics to `err`.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Invocation inv;
  CLI::App app{"Closed-form Matsubara sums and integrals"};
  app.require_subcommand(1, 1);

  auto graph_opt = [&](CLI::App* sub) {
    sub->add_option("--graph", inv.graph_path, "graph description (JSON)")->required();
    sub->add_option("--format", inv.format, "text, latex or json")
        ->check(CLI::IsMember({"text", "latex", "json"}));
  };
  auto hierarchy_opt = [&](CLI::App* sub) {
    sub->add_option("--hierarchy", inv.hierarchy, "regulator hierarchy as comma separated line ids");
  };

  auto* validate = app.add_subcommand("validate", "check a graph description");
  graph_opt(validate);
  auto* trees = app.add_subcommand("trees", "list spanning trees");
  graph_opt(trees);
  auto* cutsets = app.add_subcommand("cutsets", "list cutsets");
  graph_opt(cutsets);
  auto* op = app.add_subcommand("operator", "print the thermal operator");
  graph_opt(op);
  op->add_flag("--full", inv.full, "all line subsets instead of the cutset-reduced operator");
  auto* integral = app.add_subcommand("integral", "closed form of the integral");
  graph_opt(integral);
  hierarchy_opt(integral);
  auto* sum = app.add_subcommand("sum", "closed form of the sum");
  graph_opt(sum);
  hierarchy_opt(sum);
  sum->add_option("--method", inv.method, "operator or direct")
      ->check(CLI::IsMember({"operator", "direct"}));
  auto* eval = app.add_subcommand("eval", "evaluate the closed form at a point");
  graph_opt(eval);
  hierarchy_opt(eval);
  eval->add_option("--what", inv.what, "sum or integral")->check(CLI::IsMember({"sum", "integral"}));
  eval->add_option("--q", inv.q_values, "comma separated q per line")->required();
  eval->add_option("--N", inv.n_values, "comma separated N per non-root vertex")->required();
  auto* verify = app.add_subcommand("verify", "compare against numeric oracles");
  graph_opt(verify);
  verify->add_option("--oracle", inv.oracle, "sum (lattice) or integral (quadrature)")
      ->check(CLI::IsMember({"sum", "integral"}));
  verify->add_option("--trials", inv.trials)->check(CLI::PositiveNumber);
  verify->add_option("--cutoff", inv.cutoff)->check(CLI::Range(10LL, 100000000LL));
  verify->add_option("--tol", inv.tol)->check(CLI::PositiveNumber);
  verify->add_option("--seed", inv.seed);
  auto* gaudin = app.add_subcommand("gaudin-check", "residuals of the tree decomposition identity");
  graph_opt(gaudin);
  gaudin->add_option("--trials", inv.trials)->check(CLI::PositiveNumber);
  gaudin->add_option("--tol", inv.tol, "residual threshold (default 1e-12)")->check(CLI::PositiveNumber);
  gaudin->add_option("--seed", inv.seed);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "usage error: " << ex.what() << "\n" << app.help();
    return kExitUsage;
  }
  inv.subcommand = app.get_subcommands().front()->get_name();
  if (inv.subcommand == "gaudin-check" && gaudin->count("--tol") == 0) inv.tol = 1e-12;

  try {
    return detail::execute(inv, out, err);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const GraphError& ex) {
    err << "invalid graph: " << ex.what() << "\n";
    return kExitInvalid;
  } catch (const InputError& ex) {
    err << "invalid input: " << ex.what() << "\n";
    return kExitInvalid;
  } catch (const SymbolicError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInvalid;
  }
}

}  // namespace matsubara::cli
