#pragma once

// Graph description in JSON:
//   {"vertices": ["a", "b"], "edges": [{"id": 1, "from": "b", "to": "a"}, ...]}

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "matsubara/graph.hpp"

namespace matsubara {

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline RawGraph raw_graph_from_json(const nlohmann::json& j) {
  RawGraph raw;
  try {
    for (const auto& v : j.at("vertices")) raw.vertices.push_back(v.get<std::string>());
    for (const auto& e : j.at("edges")) {
      const auto& id = e.at("id");
      if (!id.is_number_integer()) throw InputError("edge id must be an integer");
      raw.lines.push_back({id.get<int>(), e.at("from").get<std::string>(),
                           e.at("to").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("malformed graph description: ") + ex.what());
  }
  return raw;
}

inline MatsubaraGraph graph_from_json(const nlohmann::json& j) {
  return MatsubaraGraph::validate(raw_graph_from_json(j));
}

inline MatsubaraGraph graph_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw InputError(std::string("invalid JSON: ") + ex.what());
  }
  return graph_from_json(j);
}

inline MatsubaraGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open graph file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return graph_from_json_text(buf.str());
}

inline nlohmann::json graph_to_json(const MatsubaraGraph& g) {
  nlohmann::json j;
  j["vertices"] = g.vertices();
  j["edges"] = nlohmann::json::array();
  for (const auto& l : g.lines())
    j["edges"].push_back(
        {{"id", l.id.value}, {"from", g.vertices()[l.tail]}, {"to", g.vertices()[l.head]}});
  return j;
}

}  // namespace matsubara
