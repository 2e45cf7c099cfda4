#pragma once

#include "gist/graph.hpp"
#include "gist/oracle.hpp"
#include "gist/rng.hpp"
#include "gist/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace test_support {

inline gist::Graph random_graph(std::size_t n, double edge_prob, gist::Rng& rng,
                                std::size_t feature_dim = 2) {
    gist::Graph g;
    g.adjacency = gist::Matrix(n, n);
    g.node_features = gist::Matrix(n, feature_dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.uniform() < edge_prob) {
                g.adjacency(i, j) = 1.0;
                g.adjacency(j, i) = 1.0;
            }
    for (std::size_t i = 0; i < g.node_features.size(); ++i)
        g.node_features.data()[i] = rng.uniform();
    return g;
}

/// Random attachment tree plus extra edges; always connected.
inline gist::Graph random_connected_graph(std::size_t n, gist::Rng& rng,
                                          std::size_t feature_dim = 2, double extra_prob = 0.15) {
    gist::Graph g;
    g.adjacency = gist::Matrix(n, n);
    g.node_features = gist::Matrix(n, feature_dim);
    for (std::size_t v = 1; v < n; ++v) {
        const std::size_t u = rng.uniform_int(v);
        g.adjacency(u, v) = 1.0;
        g.adjacency(v, u) = 1.0;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (g.adjacency(i, j) == 0.0 && rng.uniform() < extra_prob) {
                g.adjacency(i, j) = 1.0;
                g.adjacency(j, i) = 1.0;
            }
    for (std::size_t i = 0; i < g.node_features.size(); ++i)
        g.node_features.data()[i] = rng.uniform();
    return g;
}

/// Deterministic oracle that classifies by node-feature magnitude: identical
/// unit conv chains and logits [pooled, t - pooled], with t placed between the
/// pooled values of the two returned graphs. `low` and `high` share one
/// adjacency but land on opposite sides of the boundary.
struct MagnitudeOracleFixture {
    gist::Oracle oracle;
    gist::Graph low;   // constant features 0.2, predicted class 1
    gist::Graph high;  // constant features 1.0, predicted class 0
};

inline MagnitudeOracleFixture magnitude_oracle(std::uint64_t seed) {
    gist::Rng rng(seed);
    auto with_features = [](gist::Graph g, double value) {
        for (std::size_t i = 0; i < g.node_features.size(); ++i)
            g.node_features.data()[i] = value;
        return g;
    };
    const gist::Graph base = random_connected_graph(7, rng, 1);
    gist::Graph low = with_features(base, 0.2);
    gist::Graph high = with_features(base, 1.0);

    gist::GcnParams params = gist::make_gcn(1, 1, 2, rng);
    for (gist::ad::Tensor w : params.conv_weights) w.value_mut()(0, 0) = 1.0;
    params.dense_w.value_mut() = gist::Matrix(1, 2);
    params.dense_w.value_mut()(0, 0) = 1.0;
    params.dense_w.value_mut()(0, 1) = -1.0;
    params.dense_b.value_mut() = gist::Matrix(1, 2);
    const double pooled_low = gist::gcn_forward(low, params).value()(0, 0);
    const double pooled_high = gist::gcn_forward(high, params).value()(0, 0);
    params.dense_b.value_mut()(0, 1) = pooled_low + pooled_high;
    return {gist::Oracle(std::move(params), 2), std::move(low), std::move(high)};
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

/// Central finite differences against reverse-mode gradients. The builder
/// must construct a fresh loss graph from the current parameter values (any
/// sampled noise has to be fixed outside).
inline GradCheckResult grad_check(const std::function<gist::ad::Tensor()>& build_loss,
                                  std::vector<gist::ad::Tensor>& params, double h = 1e-5,
                                  double min_grad = 1e-8) {
    gist::ad::zero_grad(params);
    gist::ad::Tensor loss = build_loss();
    gist::ad::backward(loss);
    std::vector<gist::Matrix> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    GradCheckResult result;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        gist::Matrix& value = params[pi].value_mut();
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double a = analytic[pi].data()[k];
            if (std::abs(a) < min_grad) continue;
            const double orig = value.data()[k];
            value.data()[k] = orig + h;
            const double fp = build_loss().scalar();
            value.data()[k] = orig - h;
            const double fm = build_loss().scalar();
            value.data()[k] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double rel =
                std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-12});
            result.max_rel_error = std::max(result.max_rel_error, rel);
            ++result.checked;
        }
    }
    return result;
}

} // namespace test_support
