#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "matsubara/graph.hpp"

namespace matsubara {

/// Random valid graph with 2..max_vertices vertices and at most max_lines
/// lines. Line ids are a random permutation of 1..I.
inline MatsubaraGraph random_graph(std::mt19937_64& rng, int max_vertices = 5, int max_lines = 7) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  while (true) {
    const int v = pick(2, max_vertices);
    if (max_lines < v) continue;
    const int lines = pick(v, max_lines);

    RawGraph raw;
    for (int k = 0; k < v; ++k) raw.vertices.push_back(std::string(1, char('a' + k)));
    std::vector<std::pair<int, int>> ends;
    for (int k = 1; k < v; ++k) ends.emplace_back(pick(0, k - 1), k);
    while (static_cast<int>(ends.size()) < lines) {
      const int a = pick(0, v - 1), b = pick(0, v - 1);
      if (a != b) ends.emplace_back(a, b);
    }
    std::vector<int> ids(lines);
    std::iota(ids.begin(), ids.end(), 1);
    std::shuffle(ids.begin(), ids.end(), rng);
    for (int k = 0; k < lines; ++k) {
      auto [a, b] = ends[k];
      if (pick(0, 1)) std::swap(a, b);
      raw.lines.push_back({ids[k], raw.vertices[a], raw.vertices[b]});
    }
    try {
      return MatsubaraGraph::validate(raw);
    } catch (const GraphError&) {
    }
  }
}

}  // namespace matsubara
