#pragma once

#include <string>

#include "matsubara/graph_json.hpp"

namespace fixtures {

inline matsubara::MatsubaraGraph load(const std::string& name) {
  return matsubara::load_graph(std::string(MATSUBARA_GRAPHS_DIR) + "/" + name + ".json");
}

inline std::string path(const std::string& name) {
  return std::string(MATSUBARA_GRAPHS_DIR) + "/" + name + ".json";
}

inline matsubara::MatsubaraGraph g2() { return load("g2"); }
inline matsubara::MatsubaraGraph g3() { return load("g3"); }
inline matsubara::MatsubaraGraph g4() { return load("g4"); }

}  // namespace fixtures
