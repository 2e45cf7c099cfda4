#include "gist/oracle.hpp"

#include "gist/data.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numeric>

using namespace gist;
using test_support::grad_check;

namespace {

Dataset single_class_dataset(int count, std::uint64_t seed) {
    Dataset ds;
    ds.name = "single";
    ds.num_classes = 2;
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        Graph g = test_support::random_connected_graph(5 + rng.uniform_int(4), rng);
        g.label = 0;
        ds.graphs.push_back(std::move(g));
    }
    return ds;
}

} // namespace

TEST_SUITE("oracle") {

TEST_CASE("zero weights produce zero logits") {
    Rng rng(151);
    GcnParams params = make_gcn(2, 8, 3, rng);
    for (ad::Tensor p : params.parameters()) {
        Matrix& v = p.value_mut();
        for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = 0.0;
    }
    const Graph g = test_support::random_connected_graph(6, rng);
    CHECK(gcn_forward(g, params).value().max_abs() == 0.0);
}

TEST_CASE("mean pooling makes logits permutation invariant") {
    Rng rng(157);
    GcnParams params = make_gcn(2, 8, 2, rng);
    const Graph g = test_support::random_connected_graph(7, rng);

    // Reverse the node order.
    const std::size_t n = g.num_nodes();
    Graph permuted;
    permuted.adjacency = Matrix(n, n);
    permuted.node_features = Matrix(n, g.feature_dim());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            permuted.adjacency(n - 1 - i, n - 1 - j) = g.adjacency(i, j);
        for (std::size_t c = 0; c < g.feature_dim(); ++c)
            permuted.node_features(n - 1 - i, c) = g.node_features(i, c);
    }

    const Matrix a = gcn_forward(g, params).value();
    const Matrix b = gcn_forward(permuted, params).value();
    CHECK(max_abs_diff(a, b) < 1e-8);
}

TEST_CASE("gcn gradients match finite differences") {
    Rng rng(163);
    GcnParams params = make_gcn(3, 6, 2, rng);
    const Graph g = test_support::random_connected_graph(6, rng, 3);
    std::vector<ad::Tensor> plist = params.parameters();
    auto build = [&]() { return ad::cross_entropy(gcn_forward(g, params), 1); };
    const auto res = grad_check(build, plist, 1e-5);
    CHECK(res.checked > 0);
    CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("gcn_forward rejects mismatched feature dimensions") {
    Rng rng(167);
    GcnParams params = make_gcn(3, 6, 2, rng);
    const Graph g = test_support::random_connected_graph(5, rng, 2);
    CHECK_THROWS_AS(gcn_forward(g, params), std::invalid_argument);
}

TEST_CASE("single-class dataset trains to perfect accuracy") {
    const Dataset train = single_class_dataset(24, 1);
    const Dataset val = single_class_dataset(6, 2);
    OracleConfig cfg;
    cfg.epochs = 12;
    cfg.seed = 5;
    const Oracle oracle = train_oracle(train, val, cfg);
    CHECK(oracle.call_count() == 0);

    std::size_t hits = 0;
    for (const Graph& g : train.graphs)
        if (oracle.predict(g) == 0) ++hits;
    CHECK(hits == train.graphs.size());
    CHECK(oracle.predict(train.graphs.front()) == 0);
}

TEST_CASE("training is deterministic for a fixed seed") {
    GenSpec spec;
    spec.family = GenSpec::Family::TreeCycle;
    spec.num_graphs = 40;
    spec.min_nodes = 8;
    spec.max_nodes = 14;
    spec.seed = 3;
    const Dataset ds = gen_tree_cycle(spec);
    Dataset train = ds, val = ds;
    train.graphs.assign(ds.graphs.begin(), ds.graphs.begin() + 32);
    val.graphs.assign(ds.graphs.begin() + 32, ds.graphs.end());

    OracleConfig cfg;
    cfg.epochs = 6;
    cfg.seed = 11;
    const Oracle a = train_oracle(train, val, cfg);
    const Oracle b = train_oracle(train, val, cfg);
    const auto pa = a.params().parameters();
    const auto pb = b.params().parameters();
    for (std::size_t i = 0; i < pa.size(); ++i)
        CHECK(pa[i].value() == pb[i].value());  // bit identical
}

TEST_CASE("empty training set is an input error") {
    Dataset empty;
    empty.num_classes = 2;
    CHECK_THROWS_AS(train_oracle(empty, empty, OracleConfig{}), std::invalid_argument);
}

TEST_CASE("predict counts every invocation and breaks ties toward the low class") {
    Rng rng(173);
    GcnParams params = make_gcn(2, 4, 3, rng);
    for (ad::Tensor p : params.parameters()) {
        Matrix& v = p.value_mut();
        for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = 0.0;
    }
    const Oracle oracle(std::move(params), 3);
    const Graph g = test_support::random_connected_graph(5, rng);

    CHECK(oracle.call_count() == 0);
    // All logits are zero, so the tie resolves to class 0.
    CHECK(oracle.predict(g) == 0);
    CHECK(oracle.predict(g) == 0);
    CHECK(oracle.call_count() == 2);
}

TEST_CASE("argmax is invariant to a constant logit shift") {
    Rng rng(179);
    GcnParams params = make_gcn(2, 6, 3, rng);
    const Graph g = test_support::random_connected_graph(6, rng);
    const Oracle oracle(std::move(params), 3);
    const int base = oracle.predict(g);

    // Shifting the dense bias shifts every logit equally.
    GcnParams shifted = make_gcn(2, 6, 3, rng);
    auto src = oracle.params().parameters();
    auto dst = shifted.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].value_mut() = src[i].value();
    for (std::size_t c = 0; c < 3; ++c) shifted.dense_b.value_mut()(0, c) += 5.0;
    const Oracle oracle2(std::move(shifted), 3);
    CHECK(oracle2.predict(g) == base);
}

} // TEST_SUITE
