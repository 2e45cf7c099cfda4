#pragma once

#include "gist/graph.hpp"

#include <json.hpp>

namespace gist::detail {

inline nlohmann::json graph_to_json(const Graph& g) {
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < g.feature_dim(); ++j) row.push_back(g.node_features(i, j));
        features.push_back(std::move(row));
    }
    nlohmann::json edges = nlohmann::json::array();
    for (auto [i, j] : g.edge_list()) edges.push_back({i, j});
    nlohmann::json out{{"features", std::move(features)}, {"edges", std::move(edges)}};
    if (g.label) out["label"] = *g.label;
    return out;
}

} // namespace gist::detail
