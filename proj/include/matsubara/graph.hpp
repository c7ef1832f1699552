#pragma once

// Oriented connected multigraphs carrying a Matsubara sum, and the
// combinatorics the evaluation needs: spanning trees, cutsets, fundamental
// cutsets and cycles.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace matsubara {

/// Line identifier as written in the graph description (positive integer).
struct LineId {
  int value = 0;
  friend auto operator<=>(const LineId&, const LineId&) = default;
};

inline constexpr std::size_t kMaxLines = 16;

enum class GraphErrorKind {
  SelfLoop,
  DegreeBelowTwo,
  Disconnected,
  DuplicateId,
  UnknownVertex,
  UnknownLine,
  InvalidId,
  EmptyGraph,
  GraphTooLarge,
  NotASpanningTree,
};

inline const char* to_string(GraphErrorKind kind) {
  switch (kind) {
    case GraphErrorKind::SelfLoop: return "SelfLoop";
    case GraphErrorKind::DegreeBelowTwo: return "DegreeBelowTwo";
    case GraphErrorKind::Disconnected: return "Disconnected";
    case GraphErrorKind::DuplicateId: return "DuplicateId";
    case GraphErrorKind::UnknownVertex: return "UnknownVertex";
    case GraphErrorKind::UnknownLine: return "UnknownLine";
    case GraphErrorKind::InvalidId: return "InvalidId";
    case GraphErrorKind::EmptyGraph: return "EmptyGraph";
    case GraphErrorKind::GraphTooLarge: return "GraphTooLarge";
    case GraphErrorKind::NotASpanningTree: return "NotASpanningTree";
  }
  return "Unknown";
}

class GraphError : public std::runtime_error {
 public:
  GraphError(GraphErrorKind kind, std::string detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
        kind_(kind),
        detail_(std::move(detail)) {}

  GraphErrorKind kind() const noexcept { return kind_; }
  /// Offending vertex name or line id, as text.
  const std::string& detail() const noexcept { return detail_; }

 private:
  GraphErrorKind kind_;
  std::string detail_;
};

/// Unvalidated graph description, as read from input.
struct RawGraph {
  struct Line {
    int id = 0;
    std::string from;  // tail
    std::string to;    // head
  };
  std::vector<std::string> vertices;
  std::vector<Line> lines;
};

/// Small union-find over dense indices.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0), components_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  /// Returns false when a and b were already joined.
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    --components_;
    return true;
  }

  std::size_t components() const noexcept { return components_; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned> rank_;
  std::size_t components_;
};

/// Set of lines, stored as a bitmask over line positions (ascending id order).
using LineMask = std::uint32_t;

/// A validated Matsubara graph. Lines are kept sorted by id; a line's
/// position in that order indexes q-symbols everywhere. The root vertex is
/// the last vertex of the input, whose N is eliminated through sum N_v = 0.
class MatsubaraGraph {
 public:
  struct Line {
    LineId id;
    std::size_t tail;
    std::size_t head;
  };

  static MatsubaraGraph validate(const RawGraph& raw);

  std::size_t vertex_count() const noexcept { return vertices_.size(); }
  std::size_t line_count() const noexcept { return lines_.size(); }
  std::size_t root() const noexcept { return vertices_.size() - 1; }
  const std::vector<std::string>& vertices() const noexcept { return vertices_; }
  const std::vector<Line>& lines() const noexcept { return lines_; }
  const Line& line(std::size_t pos) const { return lines_.at(pos); }

  std::vector<LineId> line_ids() const {
    std::vector<LineId> ids;
    ids.reserve(lines_.size());
    for (const auto& l : lines_) ids.push_back(l.id);
    return ids;
  }

  std::size_t line_position(LineId id) const {
    auto it = std::lower_bound(lines_.begin(), lines_.end(), id,
                               [](const Line& l, LineId v) { return l.id < v; });
    if (it == lines_.end() || it->id != id)
      throw GraphError(GraphErrorKind::UnknownLine, std::to_string(id.value));
    return static_cast<std::size_t>(it - lines_.begin());
  }

  std::size_t vertex_index(const std::string& name) const {
    auto it = vertex_lookup_.find(name);
    if (it == vertex_lookup_.end()) throw GraphError(GraphErrorKind::UnknownVertex, name);
    return it->second;
  }

  LineMask all_lines_mask() const noexcept {
    return lines_.size() == 32 ? ~LineMask{0} : (LineMask{1} << lines_.size()) - 1;
  }

  LineMask mask_of(const std::vector<LineId>& ids) const {
    LineMask m = 0;
    for (LineId id : ids) m |= LineMask{1} << line_position(id);
    return m;
  }

  std::vector<LineId> ids_of(LineMask mask) const {
    std::vector<LineId> ids;
    for (std::size_t p = 0; p < lines_.size(); ++p)
      if (mask & (LineMask{1} << p)) ids.push_back(lines_[p].id);
    return ids;
  }

  /// Number of connected components using only the lines in `mask`.
  std::size_t components(LineMask mask) const {
    DisjointSets ds(vertices_.size());
    for (std::size_t p = 0; p < lines_.size(); ++p)
      if (mask & (LineMask{1} << p)) ds.unite(lines_[p].tail, lines_[p].head);
    return ds.components();
  }

 private:
  std::vector<std::string> vertices_;
  std::unordered_map<std::string, std::size_t> vertex_lookup_;
  std::vector<Line> lines_;
};

inline MatsubaraGraph MatsubaraGraph::validate(const RawGraph& raw) {
  MatsubaraGraph g;
  if (raw.vertices.empty()) throw GraphError(GraphErrorKind::EmptyGraph, "no vertices");
  for (const auto& name : raw.vertices) {
    if (!g.vertex_lookup_.emplace(name, g.vertices_.size()).second)
      throw GraphError(GraphErrorKind::DuplicateId, "vertex " + name);
    g.vertices_.push_back(name);
  }
  if (raw.lines.size() > kMaxLines)
    throw GraphError(GraphErrorKind::GraphTooLarge,
                     std::to_string(raw.lines.size()) + " lines exceed the cap of " +
                         std::to_string(kMaxLines));
  for (const auto& l : raw.lines) {
    if (l.id <= 0) throw GraphError(GraphErrorKind::InvalidId, std::to_string(l.id));
    auto tail = g.vertex_lookup_.find(l.from);
    if (tail == g.vertex_lookup_.end()) throw GraphError(GraphErrorKind::UnknownVertex, l.from);
    auto head = g.vertex_lookup_.find(l.to);
    if (head == g.vertex_lookup_.end()) throw GraphError(GraphErrorKind::UnknownVertex, l.to);
    if (tail->second == head->second)
      throw GraphError(GraphErrorKind::SelfLoop, std::to_string(l.id));
    g.lines_.push_back({LineId{l.id}, tail->second, head->second});
  }
  std::sort(g.lines_.begin(), g.lines_.end(),
            [](const Line& a, const Line& b) { return a.id < b.id; });
  for (std::size_t p = 1; p < g.lines_.size(); ++p)
    if (g.lines_[p].id == g.lines_[p - 1].id)
      throw GraphError(GraphErrorKind::DuplicateId, "line " + std::to_string(g.lines_[p].id.value));

  std::vector<int> degree(g.vertices_.size(), 0);
  for (const auto& l : g.lines_) {
    ++degree[l.tail];
    ++degree[l.head];
  }
  for (std::size_t v = 0; v < degree.size(); ++v)
    if (degree[v] < 2) throw GraphError(GraphErrorKind::DegreeBelowTwo, g.vertices_[v]);
  if (g.components(g.all_lines_mask()) != 1)
    throw GraphError(GraphErrorKind::Disconnected, "graph has more than one component");
  return g;
}

/// +1 if the line points into the vertex, -1 if it leaves it, 0 otherwise.
inline int incidence_sign(const MatsubaraGraph& g, std::size_t vertex, LineId line) {
  if (vertex >= g.vertex_count())
    throw GraphError(GraphErrorKind::UnknownVertex, std::to_string(vertex));
  const auto& l = g.line(g.line_position(line));
  if (l.head == vertex) return 1;
  if (l.tail == vertex) return -1;
  return 0;
}

inline int incidence_sign(const MatsubaraGraph& g, const std::string& vertex, LineId line) {
  return incidence_sign(g, g.vertex_index(vertex), line);
}

/// L = I - V + 1.
inline int cycle_rank(const MatsubaraGraph& g) {
  return static_cast<int>(g.line_count()) - static_cast<int>(g.vertex_count()) + 1;
}

/// Spanning tree as a sorted list of line ids.
struct SpanningTree {
  std::vector<LineId> lines;
  friend bool operator==(const SpanningTree&, const SpanningTree&) = default;
};

namespace detail {

inline void collect_trees(const MatsubaraGraph& g, std::size_t pos, LineMask chosen,
                          std::size_t chosen_count, LineMask excluded,
                          std::vector<LineMask>& out) {
  const std::size_t need = g.vertex_count() - 1;
  if (chosen_count == need) {
    out.push_back(chosen);
    return;
  }
  if (pos == g.line_count() || g.line_count() - pos < need - chosen_count) return;
  // The chosen lines plus everything not yet excluded must still connect.
  if (g.components(g.all_lines_mask() & ~excluded) != 1) return;

  const LineMask bit = LineMask{1} << pos;
  if (g.components(chosen | bit) == g.vertex_count() - chosen_count - 1)
    collect_trees(g, pos + 1, chosen | bit, chosen_count + 1, excluded, out);
  collect_trees(g, pos + 1, chosen, chosen_count, excluded | bit, out);
}

}  // namespace detail

/// Masks of all spanning trees, lexicographic on sorted line ids.
inline std::vector<LineMask> spanning_tree_masks(const MatsubaraGraph& g) {
  std::vector<LineMask> out;
  if (g.vertex_count() == 1) return {LineMask{0}};
  detail::collect_trees(g, 0, 0, 0, 0, out);
  return out;
}

inline std::vector<SpanningTree> enumerate_spanning_trees(const MatsubaraGraph& g) {
  std::vector<SpanningTree> trees;
  for (LineMask m : spanning_tree_masks(g)) trees.push_back({g.ids_of(m)});
  return trees;
}

/// Matrix-tree theorem: determinant of the reduced Laplacian (Bareiss, exact).
inline std::int64_t count_spanning_trees(const MatsubaraGraph& g) {
  const std::size_t n = g.vertex_count() - 1;
  if (n == 0) return 1;
  std::vector<std::vector<std::int64_t>> m(n, std::vector<std::int64_t>(n, 0));
  for (const auto& l : g.lines()) {
    const std::size_t a = l.tail, b = l.head;
    if (a < n) ++m[a][a];
    if (b < n) ++m[b][b];
    if (a < n && b < n) {
      --m[a][b];
      --m[b][a];
    }
  }
  std::int64_t sign = 1, prev = 1;
  for (std::size_t k = 0; k < n; ++k) {
    if (m[k][k] == 0) {
      std::size_t swap_row = k + 1;
      while (swap_row < n && m[swap_row][k] == 0) ++swap_row;
      if (swap_row == n) return 0;
      std::swap(m[k], m[swap_row]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i)
      for (std::size_t j = k + 1; j < n; ++j)
        m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
    prev = m[k][k];
  }
  return sign * m[n - 1][n - 1];
}

inline bool is_cutset(const MatsubaraGraph& g, LineMask subset) {
  return g.components(g.all_lines_mask() & ~subset) > 1;
}

inline bool is_cutset(const MatsubaraGraph& g, const std::vector<LineId>& subset) {
  return is_cutset(g, g.mask_of(subset));
}

/// All non-cutset line subsets of size 0..max_size, ordered by size and then
/// lexicographically on sorted ids.
inline std::vector<LineMask> non_cutset_masks(const MatsubaraGraph& g, std::size_t max_size) {
  const std::size_t n = g.line_count();
  max_size = std::min(max_size, n);
  std::vector<LineMask> out;
  std::vector<std::size_t> pick;
  for (std::size_t k = 0; k <= max_size; ++k) {
    pick.resize(k);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    while (true) {
      LineMask m = 0;
      for (auto p : pick) m |= LineMask{1} << p;
      if (!is_cutset(g, m)) out.push_back(m);
      // next combination
      std::size_t i = k;
      while (i > 0 && pick[i - 1] == n - k + i - 1) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
  }
  return out;
}

inline std::vector<std::vector<LineId>> non_cutset_subsets(const MatsubaraGraph& g,
                                                           std::size_t max_size) {
  std::vector<std::vector<LineId>> out;
  for (LineMask m : non_cutset_masks(g, max_size)) out.push_back(g.ids_of(m));
  return out;
}

/// Line with a relative sign (+1 or -1).
struct SignedLine {
  LineId line;
  int sign;
  friend bool operator==(const SignedLine&, const SignedLine&) = default;
};

struct FundamentalCutset {
  std::vector<bool> side;             // by vertex index
  std::vector<SignedLine> crossing;   // ascending line id; +1 if oriented into side
};

inline LineMask require_tree(const MatsubaraGraph& g, const SpanningTree& tree) {
  LineMask m = g.mask_of(tree.lines);
  if (tree.lines.size() + 1 != g.vertex_count() || g.components(m) != 1)
    throw GraphError(GraphErrorKind::NotASpanningTree, "line set does not span the graph");
  return m;
}

inline FundamentalCutset fundamental_cutset(const MatsubaraGraph& g, const SpanningTree& tree,
                                            LineId tree_line) {
  const LineMask tmask = require_tree(g, tree);
  const std::size_t pos = g.line_position(tree_line);
  if (!(tmask & (LineMask{1} << pos)))
    throw GraphError(GraphErrorKind::UnknownLine,
                     std::to_string(tree_line.value) + " is not a tree line");
  DisjointSets ds(g.vertex_count());
  for (std::size_t p = 0; p < g.line_count(); ++p)
    if (p != pos && (tmask & (LineMask{1} << p))) ds.unite(g.line(p).tail, g.line(p).head);

  FundamentalCutset cut;
  const std::size_t head_root = ds.find(g.line(pos).head);
  cut.side.resize(g.vertex_count());
  for (std::size_t v = 0; v < g.vertex_count(); ++v) cut.side[v] = ds.find(v) == head_root;
  for (const auto& l : g.lines()) {
    const int s = (cut.side[l.head] ? 1 : 0) - (cut.side[l.tail] ? 1 : 0);
    if (s != 0) cut.crossing.push_back({l.id, s});
  }
  return cut;
}

/// The cycle closed by a non-tree line, walked in that line's direction:
/// the line itself first, then the tree path from its head back to its tail.
/// Each line is +1 when walked along its own orientation.
inline std::vector<SignedLine> fundamental_cycle(const MatsubaraGraph& g, const SpanningTree& tree,
                                                 LineId nontree_line) {
  const LineMask tmask = require_tree(g, tree);
  const std::size_t pos = g.line_position(nontree_line);
  if (tmask & (LineMask{1} << pos))
    throw GraphError(GraphErrorKind::UnknownLine,
                     std::to_string(nontree_line.value) + " is a tree line");

  // BFS over the tree from the head of the closing line.
  const std::size_t start = g.line(pos).head, goal = g.line(pos).tail;
  std::vector<std::optional<std::size_t>> via(g.vertex_count());  // line position reaching vertex
  std::vector<bool> seen(g.vertex_count(), false);
  std::vector<std::size_t> queue{start};
  seen[start] = true;
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    const std::size_t v = queue[qi];
    for (std::size_t p = 0; p < g.line_count(); ++p) {
      if (!(tmask & (LineMask{1} << p))) continue;
      const auto& l = g.line(p);
      std::size_t w;
      if (l.tail == v) w = l.head;
      else if (l.head == v) w = l.tail;
      else continue;
      if (seen[w]) continue;
      seen[w] = true;
      via[w] = p;
      queue.push_back(w);
    }
  }

  std::vector<SignedLine> path;  // goal back to start, reversed below
  for (std::size_t v = goal; v != start;) {
    const auto& l = g.line(*via[v]);
    const std::size_t prev = (l.head == v) ? l.tail : l.head;
    // walking prev -> v
    path.push_back({l.id, l.tail == prev ? 1 : -1});
    v = prev;
  }
  std::vector<SignedLine> cycle{{nontree_line, 1}};
  cycle.insert(cycle.end(), path.rbegin(), path.rend());
  return cycle;
}

}  // namespace matsubara
