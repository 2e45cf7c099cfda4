#include "gist/data.hpp"

#include "gist/rng.hpp"
#include "graph_json.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

namespace gist {

void GenSpec::validate() const {
    if (num_graphs < 1) throw std::invalid_argument("gen spec: need at least one graph");
    if (min_nodes < 3 || max_nodes < min_nodes)
        throw std::invalid_argument("gen spec: bad node range");
    if (family == Family::ColorCount && color_classes < 3)
        throw std::invalid_argument("gen spec: color-count needs >= 3 classes");
}

namespace {

std::uint64_t per_graph_seed(std::uint64_t root, int index) {
    std::uint64_t x = root ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1));
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return x;
}

// Pruefer decoding produces a uniform random labeled tree.
std::vector<std::pair<std::size_t, std::size_t>> random_tree(std::size_t n, Rng& rng) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    if (n == 1) return edges;
    if (n == 2) {
        edges.emplace_back(0, 1);
        return edges;
    }
    std::vector<std::size_t> pruefer(n - 2);
    for (auto& p : pruefer) p = rng.uniform_int(n);
    std::vector<std::size_t> degree(n, 1);
    for (std::size_t p : pruefer) ++degree[p];
    std::set<std::size_t> leaves;
    for (std::size_t v = 0; v < n; ++v)
        if (degree[v] == 1) leaves.insert(v);
    for (std::size_t p : pruefer) {
        const std::size_t leaf = *leaves.begin();
        leaves.erase(leaves.begin());
        edges.emplace_back(std::min(leaf, p), std::max(leaf, p));
        if (--degree[p] == 1) leaves.insert(p);
    }
    const std::size_t u = *leaves.begin();
    const std::size_t v = *std::next(leaves.begin());
    edges.emplace_back(std::min(u, v), std::max(u, v));
    return edges;
}

void add_random_chords(Graph& g, std::size_t count, Rng& rng) {
    const std::size_t n = g.num_nodes();
    std::size_t added = 0;
    std::size_t attempts = 0;
    while (added < count && attempts < 64 * count) {
        ++attempts;
        const std::size_t i = rng.uniform_int(n);
        const std::size_t j = rng.uniform_int(n);
        if (i == j || g.adjacency(i, j) != 0.0) continue;
        g.adjacency(i, j) = 1.0;
        g.adjacency(j, i) = 1.0;
        ++added;
    }
}

void set_degree_clustering_features(Graph& g) {
    const std::size_t n = g.num_nodes();
    g.node_features = Matrix(n, 2);
    for (std::size_t v = 0; v < n; ++v) {
        std::vector<std::size_t> nbrs;
        for (std::size_t u = 0; u < n; ++u)
            if (g.adjacency(v, u) != 0.0) nbrs.push_back(u);
        const std::size_t k = nbrs.size();
        g.node_features(v, 0) = static_cast<double>(k);
        if (k < 2) continue;
        std::size_t links = 0;
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a + 1; b < k; ++b)
                if (g.adjacency(nbrs[a], nbrs[b]) != 0.0) ++links;
        g.node_features(v, 1) =
            2.0 * static_cast<double>(links) / static_cast<double>(k * (k - 1));
    }
}

void set_degree_bucket_features(Graph& g) {
    const std::size_t n = g.num_nodes();
    constexpr std::size_t kBuckets = 8;
    g.node_features = Matrix(n, kBuckets);
    const std::vector<double> deg = g.adjacency.row_sums();
    for (std::size_t v = 0; v < n; ++v) {
        const auto d = static_cast<std::size_t>(deg[v]);
        const std::size_t bucket = d == 0 ? 0 : std::min(d, kBuckets) - 1;
        g.node_features(v, bucket) = 1.0;
    }
}

// Preferential-attachment base: triangle seed, then each node brings two
// degree-weighted edges to distinct existing nodes.
Graph barabasi_albert_base(std::size_t n, Rng& rng) {
    Graph g;
    g.adjacency = Matrix(n, n);
    g.node_features = Matrix(n, 1);
    auto connect = [&](std::size_t a, std::size_t b) {
        g.adjacency(a, b) = 1.0;
        g.adjacency(b, a) = 1.0;
    };
    connect(0, 1);
    connect(1, 2);
    connect(0, 2);
    for (std::size_t v = 3; v < n; ++v) {
        for (int e = 0; e < 2; ++e) {
            std::vector<double> weight(v, 0.0);
            double total = 0.0;
            for (std::size_t u = 0; u < v; ++u) {
                if (g.adjacency(v, u) != 0.0) continue;  // already attached
                weight[u] = g.adjacency.row_sums()[u] + 1.0;
                total += weight[u];
            }
            if (total == 0.0) break;
            double pick = rng.uniform() * total;
            std::size_t target = 0;
            for (std::size_t u = 0; u < v; ++u) {
                pick -= weight[u];
                if (weight[u] > 0.0 && pick <= 0.0) {
                    target = u;
                    break;
                }
            }
            connect(v, target);
        }
    }
    return g;
}

constexpr std::size_t kHouseSize = 5;
constexpr std::size_t kGridSide = 3;
constexpr std::size_t kGridSize = kGridSide * kGridSide;

// Pentagon with a roof chord.
const std::vector<std::pair<std::size_t, std::size_t>>& house_edges() {
    static const std::vector<std::pair<std::size_t, std::size_t>> edges{
        {0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}, {1, 4}};
    return edges;
}

std::vector<std::pair<std::size_t, std::size_t>> grid_edges() {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t r = 0; r < kGridSide; ++r)
        for (std::size_t c = 0; c < kGridSide; ++c) {
            const std::size_t v = r * kGridSide + c;
            if (c + 1 < kGridSide) edges.emplace_back(v, v + 1);
            if (r + 1 < kGridSide) edges.emplace_back(v, v + kGridSide);
        }
    return edges;
}

Graph grow_with_motifs(const Graph& base, int cls, int max_nodes, Rng& rng) {
    const std::size_t base_n = base.num_nodes();
    const std::size_t motif_size = cls == 0 ? kHouseSize : kGridSize;
    const auto motif = cls == 0 ? house_edges() : grid_edges();

    std::size_t capacity = (static_cast<std::size_t>(max_nodes) - base_n) / motif_size;
    capacity = std::max<std::size_t>(capacity, 1);
    const std::size_t motifs = 1 + rng.uniform_int(capacity);

    const std::size_t n = base_n + motifs * motif_size;
    Graph g;
    g.adjacency = Matrix(n, n);
    g.node_features = Matrix(n, 1);
    for (std::size_t i = 0; i < base_n; ++i)
        for (std::size_t j = 0; j < base_n; ++j) g.adjacency(i, j) = base.adjacency(i, j);

    for (std::size_t k = 0; k < motifs; ++k) {
        const std::size_t offset = base_n + k * motif_size;
        for (auto [a, b] : motif) {
            g.adjacency(offset + a, offset + b) = 1.0;
            g.adjacency(offset + b, offset + a) = 1.0;
        }
        const std::size_t anchor = offset + rng.uniform_int(motif_size);
        const std::size_t target = rng.uniform_int(base_n);
        g.adjacency(anchor, target) = 1.0;
        g.adjacency(target, anchor) = 1.0;
    }
    return g;
}

} // namespace

Dataset gen_ba_shapes(const GenSpec& spec) {
    spec.validate();
    constexpr std::size_t kBaseNodes = 8;
    if (spec.max_nodes < static_cast<int>(kBaseNodes + kGridSize))
        throw std::invalid_argument("gen_ba_shapes: max_nodes must fit base plus one grid motif");

    Dataset ds;
    ds.name = "ba-shapes";
    ds.num_classes = 2;

    // One preferential-attachment base per dataset; instances vary by motif
    // type, motif count, and attachment edges. A shared base keeps the
    // instance-to-instance variation in the class-relevant structure.
    Rng base_rng(per_graph_seed(spec.seed, -1));
    const Graph base = barabasi_albert_base(kBaseNodes, base_rng);

    for (int i = 0; i < spec.num_graphs; ++i) {
        Rng rng(per_graph_seed(spec.seed, i));
        const int cls = i % 2;
        Graph g = grow_with_motifs(base, cls, spec.max_nodes, rng);
        set_degree_bucket_features(g);
        g.label = cls;
        ds.graphs.push_back(std::move(g));
    }
    return ds;
}

Dataset gen_tree_cycle(const GenSpec& spec) {
    spec.validate();
    Dataset ds;
    ds.name = "tree-cycle";
    ds.num_classes = 2;
    for (int i = 0; i < spec.num_graphs; ++i) {
        Rng rng(per_graph_seed(spec.seed, i));
        const int cls = i % 2;
        const std::size_t n =
            static_cast<std::size_t>(rng.uniform_range(spec.min_nodes, spec.max_nodes));
        Graph g = graph_from_edges(n, random_tree(n, rng));
        if (cls == 1) add_random_chords(g, 1 + rng.uniform_int(3), rng);
        set_degree_clustering_features(g);
        g.label = cls;
        ds.graphs.push_back(std::move(g));
    }
    return ds;
}

Dataset gen_color_count(const GenSpec& spec) {
    spec.validate();
    Dataset ds;
    ds.name = "color-count";
    ds.num_classes = spec.color_classes;
    const int k = spec.color_classes;
    for (int i = 0; i < spec.num_graphs; ++i) {
        Rng rng(per_graph_seed(spec.seed, i));
        const std::size_t n =
            static_cast<std::size_t>(rng.uniform_range(spec.min_nodes, spec.max_nodes));
        Graph g = graph_from_edges(n, random_tree(n, rng));
        add_random_chords(g, rng.uniform_int(n / 2 + 1), rng);

        // Draw the target-color count past the cap so the top class appears too.
        std::size_t count = rng.uniform_int(static_cast<std::size_t>(k) + 2);
        count = std::min(count, n);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        g.node_features = Matrix(n, 3);
        for (std::size_t v = 0; v < n; ++v) {
            const bool target = std::find(order.begin(), order.begin() + count, v) !=
                                order.begin() + count;
            const std::size_t color = target ? 0 : 1 + rng.uniform_int(2);
            g.node_features(v, color) = 1.0;
        }
        g.label = static_cast<int>(std::min<std::size_t>(count, static_cast<std::size_t>(k - 1)));
        ds.graphs.push_back(std::move(g));
    }
    return ds;
}

Dataset generate(const GenSpec& spec) {
    switch (spec.family) {
        case GenSpec::Family::BaShapes: return gen_ba_shapes(spec);
        case GenSpec::Family::TreeCycle: return gen_tree_cycle(spec);
        case GenSpec::Family::ColorCount: return gen_color_count(spec);
    }
    throw std::invalid_argument("generate: unknown family");
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DatasetParseError("load_dataset: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DatasetParseError(std::string("load_dataset: malformed JSON: ") + e.what());
    }

    Dataset ds;
    try {
        ds.name = j.at("name").get<std::string>();
        ds.num_classes = j.at("num_classes").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw DatasetParseError(std::string("load_dataset: bad header: ") + e.what());
    }
    if (ds.num_classes < 1) throw DatasetParseError("load_dataset: num_classes must be positive");
    if (!j.contains("graphs") || !j["graphs"].is_array() || j["graphs"].empty())
        throw DatasetParseError("load_dataset: graphs list missing or empty");

    for (const auto& gj : j["graphs"]) {
        Graph g;
        std::vector<std::vector<double>> features;
        try {
            features = gj.at("features").get<std::vector<std::vector<double>>>();
        } catch (const nlohmann::json::exception& e) {
            throw DatasetParseError(std::string("load_dataset: bad features: ") + e.what());
        }
        const std::size_t n = features.size();
        const std::size_t d = n == 0 ? 0 : features.front().size();
        g.node_features = Matrix(n, d);
        for (std::size_t i = 0; i < n; ++i) {
            if (features[i].size() != d)
                throw DatasetParseError("load_dataset: ragged feature rows");
            for (std::size_t c = 0; c < d; ++c) g.node_features(i, c) = features[i][c];
        }

        g.adjacency = Matrix(n, n);
        if (gj.contains("edges")) {
            for (const auto& e : gj["edges"]) {
                if (!e.is_array() || e.size() != 2)
                    throw DatasetEdgeError("load_dataset: edge entries must be [i, j]");
                const auto i = e[0].get<long long>();
                const auto jdx = e[1].get<long long>();
                if (i < 0 || jdx < 0 || i >= static_cast<long long>(n) ||
                    jdx >= static_cast<long long>(n))
                    throw DatasetEdgeError("load_dataset: edge index out of range");
                if (i == jdx) throw DatasetEdgeError("load_dataset: self loop");
                const auto a = static_cast<std::size_t>(i);
                const auto b = static_cast<std::size_t>(jdx);
                if (g.adjacency(a, b) != 0.0)
                    throw DatasetEdgeError("load_dataset: duplicate edge (undirected edges are listed once)");
                g.adjacency(a, b) = 1.0;
                g.adjacency(b, a) = 1.0;
            }
        }

        if (gj.contains("label")) {
            const int label = gj["label"].get<int>();
            if (label < 0 || label >= ds.num_classes)
                throw DatasetLabelError("load_dataset: label out of range");
            g.label = label;
        }
        ds.graphs.push_back(std::move(g));
    }
    return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    nlohmann::json graphs = nlohmann::json::array();
    for (const Graph& g : dataset.graphs) graphs.push_back(detail::graph_to_json(g));
    nlohmann::json j{{"name", dataset.name},
                     {"num_classes", dataset.num_classes},
                     {"graphs", std::move(graphs)}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_dataset: cannot open " + path.string());
    out << j.dump() << "\n";
}

namespace {
void fnv(std::uint64_t& h, const void* bytes, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
}
void fnv_u64(std::uint64_t& h, std::uint64_t v) { fnv(h, &v, sizeof(v)); }
void fnv_double(std::uint64_t& h, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    fnv_u64(h, bits);
}
} // namespace

std::uint64_t dataset_hash(const Dataset& dataset) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    fnv(h, dataset.name.data(), dataset.name.size());
    fnv_u64(h, static_cast<std::uint64_t>(dataset.num_classes));
    for (const Graph& g : dataset.graphs) {
        fnv_u64(h, g.num_nodes());
        fnv_u64(h, g.feature_dim());
        for (std::size_t i = 0; i < g.node_features.size(); ++i)
            fnv_double(h, g.node_features.data()[i]);
        for (auto [i, j] : g.edge_list()) {
            fnv_u64(h, i);
            fnv_u64(h, j);
        }
        fnv_u64(h, g.label ? static_cast<std::uint64_t>(*g.label) + 1 : 0);
    }
    return h;
}

} // namespace gist
