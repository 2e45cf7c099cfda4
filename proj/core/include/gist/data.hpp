#pragma once

#include "gist/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace gist {

struct DatasetParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DatasetEdgeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DatasetLabelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GenSpec {
    enum class Family { BaShapes, TreeCycle, ColorCount };

    Family family = Family::TreeCycle;
    int num_graphs = 300;
    int min_nodes = 8;
    int max_nodes = 30;
    int color_classes = 4;  // ColorCount only; >= 3
    std::uint64_t seed = 0;

    void validate() const;
};

/// Dispatches on spec.family. Generators are pure functions of the spec:
/// the same spec yields byte-identical datasets.
Dataset generate(const GenSpec& spec);

/// Preferential-attachment base (8 nodes) with motifs hung off it: class 0
/// carries pentagon-with-roof houses, class 1 carries 3x3 grid fragments.
/// Node features are an 8-bucket one-hot of the degree.
Dataset gen_ba_shapes(const GenSpec& spec);

/// Class 0: uniform random spanning trees (Pruefer-coded); class 1: a tree
/// plus 1-3 random chords. Features: degree and clustering coefficient.
Dataset gen_tree_cycle(const GenSpec& spec);

/// Random connected graphs with 3 one-hot node colors; the label is the
/// capped count of target-color nodes, exercising multi-class paths.
Dataset gen_color_count(const GenSpec& spec);

/// JSON schema: {"name": str, "num_classes": int, "graphs": [{"features":
/// [[f64]], "edges": [[i,j]], "label": int}]} with undirected edges listed
/// once; the loader symmetrizes. Round-trips are lossless.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Order-sensitive FNV-1a content hash, printed for reproducibility logs.
std::uint64_t dataset_hash(const Dataset& dataset);

} // namespace gist
