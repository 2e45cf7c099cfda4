#pragma once

#include "gist/matrix.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gist {

/// Node features (n x d) plus a symmetric, zero-diagonal adjacency (n x n).
/// Node identity is positional: generation and explanation preserve node
/// order, so graphs compare entry-by-entry with no matching step.
struct Graph {
    Matrix node_features;            // n x d
    Matrix adjacency;                // n x n, symmetric, zero diagonal, entries >= 0
    std::optional<int> label;

    std::size_t num_nodes() const { return adjacency.rows(); }
    std::size_t feature_dim() const { return node_features.cols(); }

    /// Number of undirected edges (nonzero upper-triangular entries).
    std::size_t num_edges() const;

    /// Undirected edge list (i < j) over nonzero adjacency entries.
    std::vector<std::pair<std::size_t, std::size_t>> edge_list() const;

    /// Throws std::invalid_argument when any structural invariant is broken.
    void validate() const;
};

struct Dataset {
    std::string name;
    int num_classes = 0;
    std::vector<Graph> graphs;
};

enum class LaplacianKind { Combinatorial, Normalized };

/// Diagonal matrix of adjacency row sums.
Matrix degree_matrix(const Graph& g);

/// D - A, or D^{-1/2} (D - A) D^{-1/2} with zero-degree rows contributing 0.
/// The normalized form has its spectrum in [0, 2].
Matrix laplacian(const Graph& g, LaplacianKind kind);

/// Same construction on a bare (possibly weighted) adjacency matrix.
Matrix laplacian_from_adjacency(const Matrix& adjacency, LaplacianKind kind);

/// Appends m - n isolated nodes with zero feature rows; throws on m < n.
Graph pad_to(const Graph& g, std::size_t m);

/// True iff a traversal from node 0 reaches every node over nonzero entries.
bool is_connected(const Graph& g);

/// Convenience constructor from an undirected edge list; symmetrizes.
Graph graph_from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                       std::size_t feature_dim = 1);

} // namespace gist
