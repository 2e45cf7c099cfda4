#include "gist/nn.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace gist;
using test_support::grad_check;

TEST_SUITE("autodiff-nn") {

TEST_CASE("transformer conv on an isolated node reduces to skip + value") {
    Rng rng(103);
    nn::GistModel model = nn::make_gist_model(3, 8, 2, 1, rng);
    Graph g;
    g.adjacency = Matrix(1, 1);
    g.node_features = Matrix(1, 3);
    for (std::size_t j = 0; j < 3; ++j) g.node_features(0, j) = rng.uniform();

    const ad::Tensor x = ad::constant(g.node_features);
    const ad::Tensor out = nn::transformer_conv(x, g.adjacency, model.conv_layers[0]);

    std::size_t col = 0;
    for (const nn::ConvHead& head : model.conv_layers[0].heads) {
        const Matrix skip = matmul(g.node_features, head.w_skip.value());
        const Matrix value = matmul(g.node_features, head.w_value.value());
        for (std::size_t j = 0; j < skip.cols(); ++j, ++col)
            CHECK(out.value()(0, col) == doctest::Approx(skip(0, j) + value(0, j)).epsilon(1e-12));
    }
}

TEST_CASE("transformer conv with zero weights gives zero output") {
    Rng rng(107);
    nn::GistModel model = nn::make_gist_model(2, 8, 2, 1, rng);
    for (ad::Tensor& p : model.parameters()) {
        Matrix& v = p.value_mut();
        for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = 0.0;
    }
    const Graph g = test_support::random_connected_graph(5, rng);
    const ad::Tensor out =
        nn::transformer_conv(ad::constant(g.node_features), g.adjacency, model.conv_layers[0]);
    CHECK(out.value().max_abs() == 0.0);
}

TEST_CASE("transformer conv attention rows sum to one") {
    Rng rng(109);
    nn::GistModel model = nn::make_gist_model(2, 16, 2, 1, rng);
    const Graph g = test_support::random_graph(7, 0.3, rng);
    std::vector<Matrix> attention;
    nn::transformer_conv(ad::constant(g.node_features), g.adjacency, model.conv_layers[0],
                         &attention);
    REQUIRE(attention.size() == 2);
    for (const Matrix& att : attention)
        for (std::size_t i = 0; i < att.rows(); ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < att.cols(); ++j) row += att(i, j);
            CHECK(row == doctest::Approx(1.0).epsilon(1e-8));
        }
}

TEST_CASE("transformer conv gradients match finite differences") {
    Rng rng(113);
    nn::GistModel model = nn::make_gist_model(3, 8, 2, 1, rng);
    const Graph g = test_support::random_connected_graph(5, rng, 3);
    std::vector<ad::Tensor> params;
    for (const nn::ConvHead& head : model.conv_layers[0].heads) {
        params.push_back(head.w_query);
        params.push_back(head.w_key);
        params.push_back(head.w_value);
        params.push_back(head.w_skip);
    }
    auto build = [&]() {
        return ad::sum(
            nn::transformer_conv(ad::constant(g.node_features), g.adjacency, model.conv_layers[0]));
    };
    const auto res = grad_check(build, params, 1e-5);
    CHECK(res.checked > 0);
    CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("edge scores: zero weights give 0.5 off the diagonal, zero on it") {
    Rng rng(127);
    nn::GistModel model = nn::make_gist_model(2, 8, 2, 1, rng);
    for (ad::Tensor p : {model.edge_mlp.w1, model.edge_mlp.b1, model.edge_mlp.w2,
                         model.edge_mlp.b2}) {
        Matrix& v = p.value_mut();
        for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = 0.0;
    }
    Matrix h(4, 8);
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = rng.uniform();
    const Matrix p = nn::edge_scores(ad::constant(h), model.edge_mlp).value();
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(p(i, j) == doctest::Approx(i == j ? 0.0 : 0.5));
}

TEST_CASE("edge scores are symmetric with zero diagonal and differentiable") {
    Rng rng(131);
    nn::GistModel model = nn::make_gist_model(2, 8, 2, 1, rng);
    Matrix h(5, 8);
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = 2.0 * rng.uniform() - 1.0;
    const Matrix p = nn::edge_scores(ad::constant(h), model.edge_mlp).value();
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(p(i, i) == 0.0);
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(std::abs(p(i, j) - p(j, i)) < 1e-12);
            CHECK(p(i, j) >= 0.0);
            CHECK(p(i, j) <= 1.0);
        }
    }

    std::vector<ad::Tensor> params{model.edge_mlp.w1, model.edge_mlp.b1, model.edge_mlp.w2,
                                   model.edge_mlp.b2};
    auto build = [&]() {
        ad::Tensor scores = nn::edge_scores(ad::constant(h), model.edge_mlp);
        return ad::sum(ad::mul(scores, scores));
    };
    const auto res = grad_check(build, params, 1e-6);
    CHECK(res.checked > 0);
    CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("gumbel softmax fixed points and monotonicity") {
    nn::GumbelConfig cfg;  // T = 1, eps = 1e-7

    Matrix half(1, 1);
    half(0, 0) = 0.5;
    const double at_half = nn::gumbel_softmax_zero_noise(ad::constant(half), cfg).value()(0, 0);
    CHECK(at_half == doctest::Approx(0.5).epsilon(1e-6));

    // p = 0.9 with T -> 0+ saturates to 1.
    Matrix high(1, 1);
    high(0, 0) = 0.9;
    nn::GumbelConfig cold = cfg;
    cold.temperature = 1e-3;
    const double saturated = nn::gumbel_softmax_zero_noise(ad::constant(high), cold).value()(0, 0);
    CHECK(saturated == doctest::Approx(1.0).epsilon(1e-8));

    // Strictly increasing in p for fixed noise and temperature.
    double prev = -1.0;
    for (double p = 0.05; p < 1.0; p += 0.05) {
        Matrix m(1, 1);
        m(0, 0) = p;
        const double rho = nn::gumbel_softmax_zero_noise(ad::constant(m), cfg).value()(0, 0);
        CHECK(rho > prev);
        CHECK(rho > 0.0);
        CHECK(rho < 1.0);
        prev = rho;
    }
}

TEST_CASE("gumbel softmax matches the Bernoulli marginal at threshold 0.5") {
    // P(rho > 0.5) = P(logit(p) + noise > 0) = p for logistic noise.
    nn::GumbelConfig cfg;
    Rng rng(137);
    for (double p : {0.2, 0.5, 0.8}) {
        Matrix m(1, 1);
        m(0, 0) = p;
        const ad::Tensor pt = ad::constant(m);
        std::size_t above = 0;
        const std::size_t draws = 100000;
        for (std::size_t i = 0; i < draws; ++i) {
            Matrix noise(1, 1);
            noise(0, 0) = rng.logistic();
            if (ad::gumbel_sigmoid(pt, noise, cfg.temperature, cfg.epsilon).value()(0, 0) > 0.5)
                ++above;
        }
        const double frequency = double(above) / double(draws);
        CHECK(std::abs(frequency - p) < 0.01);
    }
}

TEST_CASE("adam: zero gradient leaves parameters, a positive gradient descends") {
    std::vector<ad::Tensor> params{ad::parameter(Matrix::identity(2))};
    nn::AdamState state;
    params[0].grad_mut();  // allocate zeros
    const Matrix before = params[0].value();
    nn::adam_step(params, state, 1e-3, 0.0);
    CHECK(max_abs_diff(params[0].value(), before) == 0.0);

    Matrix one(1, 1, 1.0);
    std::vector<ad::Tensor> scalar{ad::parameter(one)};
    scalar[0].grad_mut()(0, 0) = 1.0;
    nn::AdamState s2;
    nn::adam_step(scalar, s2, 1e-3, 0.0);
    CHECK(scalar[0].value()(0, 0) < 1.0);
}

TEST_CASE("adam with weight decay shrinks an untouched parameter") {
    Matrix one(1, 1, 2.0);
    std::vector<ad::Tensor> params{ad::parameter(one)};
    params[0].grad_mut();
    nn::AdamState state;
    nn::adam_step(params, state, 1e-2, 0.1);
    CHECK(params[0].value()(0, 0) == doctest::Approx(2.0 - 1e-2 * 0.1 * 2.0));
}

TEST_CASE("optimizer runs are deterministic") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        nn::GistModel model = nn::make_gist_model(2, 8, 2, 2, rng);
        std::vector<ad::Tensor> params = model.parameters();
        nn::AdamState state;
        Rng data_rng(seed + 1);
        for (int step = 0; step < 5; ++step) {
            Matrix x(3, 2);
            for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = data_rng.uniform();
            ad::zero_grad(params);
            ad::Tensor loss = ad::sum(ad::matmul(ad::constant(x), model.conv_layers[0].heads[0].w_query));
            ad::backward(loss);
            nn::adam_step(params, state, 1e-3, 1e-5);
        }
        std::vector<double> flat;
        for (const ad::Tensor& p : params)
            flat.insert(flat.end(), p.value().storage().begin(), p.value().storage().end());
        return flat;
    };
    CHECK(run(42) == run(42));
}

TEST_CASE("checkpoint round trip and shape validation") {
    Rng rng(139);
    nn::GistModel model = nn::make_gist_model(3, 8, 2, 2, rng);
    std::vector<ad::Tensor> params = model.parameters();
    const std::filesystem::path path = std::filesystem::temp_directory_path() / "gist_ckpt.json";
    nn::save_checkpoint(path, params, 99, "{\"alpha\": 0.9}");

    Rng rng2(777);
    nn::GistModel other = nn::make_gist_model(3, 8, 2, 2, rng2);
    std::vector<ad::Tensor> other_params = other.parameters();
    std::uint64_t seed = 0;
    std::string config;
    nn::load_checkpoint(path, other_params, &seed, &config);
    CHECK(seed == 99);
    CHECK(config.find("0.9") != std::string::npos);
    for (std::size_t i = 0; i < params.size(); ++i)
        CHECK(max_abs_diff(params[i].value(), other_params[i].value()) == 0.0);

    Rng rng3(778);
    nn::GistModel mismatched = nn::make_gist_model(4, 8, 2, 2, rng3);
    std::vector<ad::Tensor> bad = mismatched.parameters();
    CHECK_THROWS_AS(nn::load_checkpoint(path, bad), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("model construction validates head divisibility") {
    Rng rng(149);
    CHECK_THROWS_AS(nn::make_gist_model(2, 15, 2, 2, rng), std::invalid_argument);
}

} // TEST_SUITE
