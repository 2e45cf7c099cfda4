#include "gist/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace gist {

std::size_t Graph::num_edges() const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < adjacency.rows(); ++i)
        for (std::size_t j = i + 1; j < adjacency.cols(); ++j)
            if (adjacency(i, j) != 0.0) ++count;
    return count;
}

std::vector<std::pair<std::size_t, std::size_t>> Graph::edge_list() const {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < adjacency.rows(); ++i)
        for (std::size_t j = i + 1; j < adjacency.cols(); ++j)
            if (adjacency(i, j) != 0.0) edges.emplace_back(i, j);
    return edges;
}

void Graph::validate() const {
    const std::size_t n = adjacency.rows();
    if (adjacency.cols() != n) throw std::invalid_argument("graph: adjacency must be square");
    if (node_features.rows() != n)
        throw std::invalid_argument("graph: node_features must have one row per node");
    for (std::size_t i = 0; i < n; ++i) {
        if (adjacency(i, i) != 0.0) throw std::invalid_argument("graph: nonzero diagonal entry");
        for (std::size_t j = 0; j < n; ++j) {
            if (adjacency(i, j) < 0.0) throw std::invalid_argument("graph: negative adjacency entry");
            if (adjacency(i, j) != adjacency(j, i))
                throw std::invalid_argument("graph: adjacency not symmetric");
        }
    }
}

Matrix degree_matrix(const Graph& g) {
    return Matrix::diagonal(g.adjacency.row_sums());
}

Matrix laplacian_from_adjacency(const Matrix& adjacency, LaplacianKind kind) {
    const std::size_t n = adjacency.rows();
    const std::vector<double> deg = adjacency.row_sums();
    Matrix lap(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        lap(i, i) = deg[i];
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) lap(i, j) = -adjacency(i, j);
    }
    if (kind == LaplacianKind::Combinatorial) return lap;

    // Zero-degree rows use the pseudo-inverse convention: D^{-1/2} entry 0,
    // so padded graphs stay well-defined and only contribute zero eigenvalues.
    std::vector<double> dinv(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        if (deg[i] > 0.0) dinv[i] = 1.0 / std::sqrt(deg[i]);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) lap(i, j) *= dinv[i] * dinv[j];
    return lap;
}

Matrix laplacian(const Graph& g, LaplacianKind kind) {
    return laplacian_from_adjacency(g.adjacency, kind);
}

Graph pad_to(const Graph& g, std::size_t m) {
    const std::size_t n = g.num_nodes();
    if (m < n) throw std::invalid_argument("pad_to: target size smaller than graph");
    if (m == n) return g;
    Graph out;
    out.label = g.label;
    out.adjacency = Matrix(m, m);
    out.node_features = Matrix(m, g.feature_dim());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.adjacency(i, j) = g.adjacency(i, j);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < g.feature_dim(); ++j)
            out.node_features(i, j) = g.node_features(i, j);
    return out;
}

bool is_connected(const Graph& g) {
    const std::size_t n = g.num_nodes();
    if (n == 0) return false;
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t v = 0; v < n; ++v) {
            if (!seen[v] && g.adjacency(u, v) != 0.0) {
                seen[v] = 1;
                ++reached;
                stack.push_back(v);
            }
        }
    }
    return reached == n;
}

Graph graph_from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                       std::size_t feature_dim) {
    Graph g;
    g.adjacency = Matrix(n, n);
    g.node_features = Matrix(n, feature_dim);
    for (auto [i, j] : edges) {
        if (i >= n || j >= n) throw std::invalid_argument("graph_from_edges: node index out of range");
        if (i == j) throw std::invalid_argument("graph_from_edges: self loop");
        g.adjacency(i, j) = 1.0;
        g.adjacency(j, i) = 1.0;
    }
    return g;
}

} // namespace gist
