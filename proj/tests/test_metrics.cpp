#include "gist/metrics.hpp"

#include "gist/data.hpp"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <sstream>

using namespace gist;

namespace {

// Independent edit-path oracle for same-size graphs with identical features:
// breadth-first search over edge-flip states finds the true minimum number of
// single-edge edits under positional node identity.
int bfs_edge_edit_distance(const Graph& a, const Graph& b) {
    const std::size_t n = a.num_nodes();
    auto mask_of = [n](const Graph& g) {
        unsigned mask = 0;
        unsigned bit = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j, ++bit)
                if (g.adjacency(i, j) != 0.0) mask |= 1u << bit;
        return mask;
    };
    const unsigned start = mask_of(a);
    const unsigned goal = mask_of(b);
    const unsigned bits = static_cast<unsigned>(n * (n - 1) / 2);
    std::map<unsigned, int> dist{{start, 0}};
    std::queue<unsigned> frontier;
    frontier.push(start);
    while (!frontier.empty()) {
        const unsigned cur = frontier.front();
        frontier.pop();
        if (cur == goal) return dist[cur];
        for (unsigned bit = 0; bit < bits; ++bit) {
            const unsigned next = cur ^ (1u << bit);
            if (dist.emplace(next, dist[cur] + 1).second) frontier.push(next);
        }
    }
    return -1;
}

Graph random_int_feature_graph(Rng& rng, std::size_t max_n = 6) {
    const std::size_t n = 2 + rng.uniform_int(max_n - 1);
    Graph g = test_support::random_graph(n, 0.4, rng, 2);
    // Integer features keep the changed-row tolerance well away from ties.
    for (std::size_t i = 0; i < g.node_features.size(); ++i)
        g.node_features.data()[i] = static_cast<double>(rng.uniform_int(3));
    return g;
}

} // namespace

TEST_SUITE("eval") {

TEST_CASE("validity is the disagreement indicator") {
    auto fx = test_support::magnitude_oracle(211);
    CHECK(validity(fx.low, fx.high, fx.oracle) == 1);
    CHECK(validity(fx.low, fx.low, fx.oracle) == 0);
    CHECK(validity(fx.high, fx.high, fx.oracle) == 0);
}

TEST_CASE("fidelity takes exactly the documented values") {
    auto fx = test_support::magnitude_oracle(223);
    const int cls_low = fx.oracle.predict(fx.low);
    const int cls_high = fx.oracle.predict(fx.high);
    REQUIRE(cls_low != cls_high);

    // chi = 1 and the counterfactual leaves the true class: 1.
    CHECK(fidelity(fx.low, cls_low, fx.high, fx.oracle) == 1);
    // chi = 1 but the counterfactual is still predicted as y: 0.
    CHECK(fidelity(fx.low, cls_low, fx.low, fx.oracle) == 0);
    // chi = 0 and the counterfactual reaches y: -1.
    CHECK(fidelity(fx.low, cls_high, fx.high, fx.oracle) == -1);
    // chi = 0, counterfactual also off-target: 0.
    CHECK(fidelity(fx.low, cls_high, fx.low, fx.oracle) == 0);
}

TEST_CASE("ged hand cases") {
    const Graph g = graph_from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
    CHECK(ged(g, g) == 0.0);

    Graph removed = g;
    removed.adjacency(1, 2) = 0.0;
    removed.adjacency(2, 1) = 0.0;
    CHECK(ged(g, removed) == 1.0);

    Graph feature_change = g;
    feature_change.node_features(2, 0) += 1.0;
    CHECK(ged(g, feature_change) == 1.0);

    // Node insertion: pad adds isolated nodes only.
    CHECK(ged(g, pad_to(g, 6)) == 2.0);

    // Deleting a node also deletes its incident edges.
    Graph shrunk = graph_from_edges(3, {{0, 1}, {1, 2}});
    CHECK(ged(g, shrunk) == 2.0);  // one node plus edge (2,3)
}

TEST_CASE("ged equals the exhaustive edit-path optimum on 4-node graphs") {
    Rng rng(227);
    for (int it = 0; it < 60; ++it) {
        Graph a = test_support::random_graph(4, 0.5, rng, 1);
        Graph b = test_support::random_graph(4, 0.5, rng, 1);
        b.node_features = a.node_features;  // isolate the edge-edit component
        CHECK(ged(a, b) == doctest::Approx(bfs_edge_edit_distance(a, b)));
    }
}

TEST_CASE("ged is a metric on random small graphs") {
    Rng rng(229);
    for (int it = 0; it < 300; ++it) {
        const Graph a = random_int_feature_graph(rng);
        const Graph b = random_int_feature_graph(rng);
        const Graph c = random_int_feature_graph(rng);
        const double dab = ged(a, b);
        const double dba = ged(b, a);
        const double dac = ged(a, c);
        const double dcb = ged(c, b);
        CHECK(dab >= 0.0);
        CHECK(ged(a, a) == 0.0);
        CHECK(dab == dba);
        CHECK(dab <= dac + dcb + 1e-12);
    }
}

TEST_CASE("ged identity of indiscernibles") {
    Rng rng(233);
    for (int it = 0; it < 100; ++it) {
        const Graph a = random_int_feature_graph(rng);
        const Graph b = random_int_feature_graph(rng);
        if (ged(a, b) == 0.0) {
            CHECK(a.num_nodes() == b.num_nodes());
            CHECK(a.adjacency == b.adjacency);
        }
    }
}

TEST_CASE("sparsity") {
    const Graph g = graph_from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}});
    CHECK(sparsity(g, g) == 0.0);

    Graph removed = g;
    removed.adjacency(0, 1) = 0.0;
    removed.adjacency(1, 0) = 0.0;
    CHECK(sparsity(g, removed) == doctest::Approx(1.0 / 10.0));

    Graph empty;
    empty.adjacency = Matrix(0, 0);
    empty.node_features = Matrix(0, 1);
    CHECK_THROWS_AS(sparsity(empty, g), std::invalid_argument);
}

TEST_CASE("cv partition is disjoint and covers the dataset") {
    for (int folds : {2, 5}) {
        const auto chunks = cv_partition(47, folds, 12345);
        std::set<std::size_t> seen;
        std::size_t total = 0;
        for (const auto& chunk : chunks) {
            total += chunk.size();
            for (std::size_t idx : chunk) CHECK(seen.insert(idx).second);
        }
        CHECK(total == 47);
        CHECK(seen.size() == 47);
        CHECK(*seen.rbegin() == 46);
    }
}

TEST_CASE("run_cv is deterministic and labels both explainers") {
    GenSpec spec;
    spec.family = GenSpec::Family::TreeCycle;
    spec.num_graphs = 120;
    spec.min_nodes = 8;
    spec.max_nodes = 10;
    spec.seed = 5;
    const Dataset ds = gen_tree_cycle(spec);

    CvConfig cfg;
    cfg.folds = 2;
    cfg.seed = 99;
    cfg.oracle.epochs = 30;
    cfg.gist.epochs = 3;
    cfg.gist.batch_size = 8;

    const auto a = run_cv(ds, cfg);
    const auto b = run_cv(ds, cfg);
    REQUIRE(a.size() == 4);  // two explainers per fold
    REQUIRE(b.size() == 4);
    std::size_t rows = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].explainer == b[i].explainer);
        REQUIRE(a[i].rows.size() == b[i].rows.size());
        for (std::size_t r = 0; r < a[i].rows.size(); ++r) {
            CHECK(a[i].rows[r].validity == b[i].rows[r].validity);
            CHECK(a[i].rows[r].fidelity == b[i].rows[r].fidelity);
            CHECK(a[i].rows[r].ged == b[i].rows[r].ged);
            CHECK(a[i].rows[r].oracle_calls == b[i].rows[r].oracle_calls);
            CHECK((a[i].rows[r].fidelity >= -1 && a[i].rows[r].fidelity <= 1));
            CHECK((a[i].rows[r].validity == 0 || a[i].rows[r].validity == 1));
        }
        if (a[i].explainer == "gist") rows += a[i].rows.size();
    }
    CHECK(rows == 120);  // fold test sets cover the dataset

    // Aggregate validity equals the mean of the row bits exactly.
    for (const auto& report : a) {
        double sum = 0.0;
        for (const auto& r : report.rows) sum += r.validity;
        CHECK(report.validity.mean ==
              doctest::Approx(sum / double(report.rows.size())).epsilon(1e-15));
    }
}

TEST_CASE("fold CSV and aggregate JSON formats") {
    MetricReport report;
    report.fold_id = 0;
    report.explainer = "gist";
    report.rows.push_back({0, 1, 1, 0.25, 3.0, 4, 12.5});
    report.rows.push_back({1, 0, 0, 0.5, 6.0, 5, 13.5});
    report.finalize();

    std::ostringstream csv;
    write_fold_csv({report}, "config: {}", csv);
    const std::string text = csv.str();
    CHECK(text.find("# config: {}") == 0);
    CHECK(text.find("explainer,instance,validity,fidelity,sparsity,ged,oracle_calls") !=
          std::string::npos);
    CHECK(text.find("gist,0,1,1,0.25,3,4") != std::string::npos);
    CHECK(text.find("runtime") == std::string::npos);  // timings stay out of the CSV

    const std::string agg = aggregate_json({report}, "config: {}");
    const auto j = nlohmann::json::parse(agg);
    for (const char* key : {"GED", "Oracle Calls", "Validity", "Sparsity", "Fidelity"}) {
        REQUIRE(j["explainers"]["gist"].contains(key));
        CHECK(j["explainers"]["gist"][key].contains("mean"));
        CHECK(j["explainers"]["gist"][key].contains("std"));
    }
    CHECK(j["explainers"]["gist"]["Validity"]["mean"].get<double>() == doctest::Approx(0.5));
}

TEST_CASE("spearman") {
    CHECK(spearman({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4, 5}, {10, 8, 6, 4, 2}) == doctest::Approx(-1.0));
    CHECK(std::abs(spearman({1, 2, 3, 4}, {1, 3, 2, 4})) < 1.0);
    CHECK_THROWS_AS(spearman({1.0}, {1.0}), std::invalid_argument);
}

} // TEST_SUITE
