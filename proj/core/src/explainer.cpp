#include "gist/explainer.hpp"

#include "graph_json.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace gist {

void GistConfig::validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("gist config: alpha outside [0,1]");
    if (epochs < 0 || batch_size < 1) throw std::invalid_argument("gist config: bad epochs/batch");
    if (heads == 0 || embed_dim % heads != 0)
        throw std::invalid_argument("gist config: embed_dim must be divisible by heads");
    if (lr <= 0.0 || weight_decay < 0.0) throw std::invalid_argument("gist config: bad lr/decay");
    if (temperature <= 0.0) throw std::invalid_argument("gist config: temperature must be > 0");
    if (gumbel_epsilon <= 0.0 || gumbel_epsilon > 1e-6)
        throw std::invalid_argument("gist config: gumbel epsilon outside (0, 1e-6]");
}

namespace {

Graph overshoot_impl(const Graph& g, const Dataset& pool, const Oracle& oracle, Rng& rng,
                     OvershootKind kind, int* phi_g_out, std::size_t* scanned_out) {
    if (pool.graphs.empty()) throw NoCounterfactualError("overshoot: empty pool");
    const int phi_g = oracle.predict(g);
    if (phi_g_out) *phi_g_out = phi_g;

    if (kind == OvershootKind::Random) {
        std::vector<std::size_t> order(pool.graphs.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        std::size_t scanned = 0;
        for (std::size_t idx : order) {
            ++scanned;
            if (oracle.predict(pool.graphs[idx]) != phi_g) {
                if (scanned_out) *scanned_out = scanned;
                return pool.graphs[idx];
            }
        }
        throw NoCounterfactualError("overshoot: pool has no graph of a different class");
    }

    // Smart variant: scan everything, keep the structurally closest candidate.
    bool found = false;
    std::size_t best_idx = 0;
    double best_dist = 0.0;
    for (std::size_t idx = 0; idx < pool.graphs.size(); ++idx) {
        if (oracle.predict(pool.graphs[idx]) == phi_g) continue;
        const Graph& cand = pool.graphs[idx];
        const std::size_t m = std::max(g.num_nodes(), cand.num_nodes());
        const double dist =
            frobenius_diff(laplacian(pad_to(cand, m), LaplacianKind::Combinatorial),
                           laplacian(pad_to(g, m), LaplacianKind::Combinatorial));
        if (!found || dist < best_dist) {
            found = true;
            best_idx = idx;
            best_dist = dist;
        }
    }
    if (!found) throw NoCounterfactualError("smart_overshoot: pool has no graph of a different class");
    if (scanned_out) *scanned_out = pool.graphs.size();
    return pool.graphs[best_idx];
}

ad::Tensor soft_laplacian(const ad::Tensor& weights, LaplacianKind kind) {
    ad::Tensor degrees = ad::row_sum(weights);
    ad::Tensor lap = ad::sub(ad::make_diag(degrees), weights);
    if (kind == LaplacianKind::Combinatorial) return lap;
    ad::Tensor scaling = ad::make_diag(ad::rsqrt_or_zero(degrees, 1e-12));
    return ad::matmul(ad::matmul(scaling, lap), scaling);
}

Matrix zero_diag_mask(std::size_t n) {
    Matrix mask(n, n, 1.0);
    for (std::size_t i = 0; i < n; ++i) mask(i, i) = 0.0;
    return mask;
}

} // namespace

Graph overshoot(const Graph& g, const Dataset& pool, const Oracle& oracle, Rng& rng) {
    return overshoot_impl(g, pool, oracle, rng, OvershootKind::Random, nullptr, nullptr);
}

Graph smart_overshoot(const Graph& g, const Dataset& pool, const Oracle& oracle, double alpha) {
    (void)alpha;  // the (1 - alpha) factor scales every candidate equally
    Rng unused(0);
    return overshoot_impl(g, pool, oracle, unused, OvershootKind::Smart, nullptr, nullptr);
}

ForwardOut gist_forward(const Graph& ge, const nn::GistModel& model, const GistConfig& cfg,
                        Rng& rng, SampleMode mode) {
    if (ge.feature_dim() != model.feature_dim)
        throw std::invalid_argument("gist_forward: feature dimension mismatch");
    const std::size_t n = ge.num_nodes();

    ad::Tensor h = ad::constant(ge.node_features);
    for (const nn::ConvLayer& layer : model.conv_layers)
        h = ad::relu(nn::transformer_conv(h, ge.adjacency, layer));

    ad::Tensor p = nn::edge_scores(h, model.edge_mlp);
    nn::GumbelConfig gumbel{cfg.temperature, cfg.gumbel_epsilon, cfg.seed};
    ad::Tensor rho_raw = (mode == SampleMode::Deterministic)
                             ? nn::gumbel_softmax_zero_noise(p, gumbel)
                             : nn::gumbel_softmax(p, gumbel, rng);
    ForwardOut out;
    out.rho = ad::mul_const(rho_raw, zero_diag_mask(n));
    out.features = ad::matmul(h, model.feature_projector);

    out.edges = Matrix(n, n);
    const Matrix& rho = out.rho.value();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool on = (mode == SampleMode::Deterministic) ? rho(i, j) > 0.5
                                                                : rng.bernoulli(rho(i, j));
            if (on) {
                out.edges(i, j) = 1.0;
                out.edges(j, i) = 1.0;
            }
        }
    return out;
}

ad::Tensor gist_loss(const Graph& g, const Graph& ge, const ForwardOut& fwd,
                     const GistConfig& cfg) {
    // Each term averages over its own support (feature entries, adjacency
    // entries, eigenvalues) so alpha trades off quantities of comparable
    // scale; raw sums would let whichever term has the most entries swamp
    // the others and strip alpha of any leverage.
    const double feature_entries = static_cast<double>(ge.node_features.size());
    ad::Tensor content =
        ad::add(ad::scale(ad::l1_diff(fwd.features, ad::constant(ge.node_features)),
                          1.0 / std::max(1.0, feature_entries)),
                ad::bce_mean(fwd.rho, ge.adjacency));

    const std::size_t m = std::max(g.num_nodes(), ge.num_nodes());
    ad::Tensor rho_padded = (m == ge.num_nodes()) ? fwd.rho : ad::pad_square(fwd.rho, m);
    ad::Tensor lambda_star = ad::eigvals_sym(soft_laplacian(rho_padded, cfg.spectral_kind));

    const Spectrum target = eig_values(laplacian(pad_to(g, m), cfg.spectral_kind));
    Matrix target_row(1, m);
    for (std::size_t i = 0; i < m; ++i) target_row(0, i) = target[i];
    ad::Tensor style = ad::scale(ad::l1_diff(lambda_star, ad::constant(target_row)),
                                 1.0 / static_cast<double>(m));

    return ad::add(ad::scale(content, cfg.alpha), ad::scale(style, 1.0 - cfg.alpha));
}

nn::GistModel train_gist(const Dataset& train, const Oracle& oracle, const GistConfig& cfg,
                         TrainTrace* trace) {
    cfg.validate();
    if (train.graphs.empty()) throw std::invalid_argument("train_gist: empty training set");

    Rng root(cfg.seed);
    Rng pair_rng = root.split(1);
    Rng model_rng = root.split(2);
    Rng order_rng = root.split(3);
    Rng noise_rng = root.split(4);

    // Fixed seeded pairs, built once; training never queries the oracle again.
    std::vector<std::pair<const Graph*, Graph>> pairs;
    pairs.reserve(train.graphs.size());
    for (const Graph& g : train.graphs) {
        Graph ge = (cfg.overshoot_kind == OvershootKind::Smart)
                       ? smart_overshoot(g, train, oracle, cfg.alpha)
                       : overshoot(g, train, oracle, pair_rng);
        pairs.emplace_back(&g, std::move(ge));
    }

    nn::GistModel model = nn::make_gist_model(train.graphs.front().feature_dim(), cfg.embed_dim,
                                              cfg.heads, cfg.num_conv_layers, model_rng);
    std::vector<ad::Tensor> params = model.parameters();
    nn::AdamState opt;

    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);

    auto first_pair_loss = [&]() {
        Rng tmp(0);
        const ForwardOut fwd =
            gist_forward(pairs.front().second, model, cfg, tmp, SampleMode::Deterministic);
        return gist_loss(*pairs.front().first, pairs.front().second, fwd, cfg).scalar();
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Cosine decay from lr to lr/10 across the epoch budget.
        const double progress =
            cfg.epochs > 1 ? static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1) : 0.0;
        const double lr =
            0.1 * cfg.lr + 0.45 * cfg.lr * (1.0 + std::cos(3.14159265358979323846 * progress));
        order_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            ad::Tensor total;
            for (std::size_t k = start; k < end; ++k) {
                const auto& [g, ge] = pairs[order[k]];
                const ForwardOut fwd = gist_forward(ge, model, cfg, noise_rng, SampleMode::Bernoulli);
                ad::Tensor loss = gist_loss(*g, ge, fwd, cfg);
                total = total.defined() ? ad::add(total, loss) : loss;
            }
            total = ad::scale(total, 1.0 / static_cast<double>(end - start));
            ad::zero_grad(params);
            ad::backward(total);
            // Spectral subgradients can spike when soft degrees get small;
            // a global-norm clip keeps those spikes out of the Adam moments.
            double grad_norm_sq = 0.0;
            for (ad::Tensor& p : params)
                for (std::size_t i = 0; i < p.grad().size(); ++i)
                    grad_norm_sq += p.grad().data()[i] * p.grad().data()[i];
            constexpr double kClipNorm = 5.0;
            if (grad_norm_sq > kClipNorm * kClipNorm) {
                const double scale = kClipNorm / std::sqrt(grad_norm_sq);
                for (ad::Tensor& p : params) p.grad_mut() *= scale;
            }
            nn::adam_step(params, opt, lr, cfg.weight_decay);
        }
        if (trace) trace->epoch_loss.push_back(first_pair_loss());
    }
    return model;
}

Counterfactual explain(const nn::GistModel& model, const Graph& g, const Dataset& pool,
                       const Oracle& oracle, const GistConfig& cfg) {
    cfg.validate();
    Rng rng = Rng(cfg.seed).split(0xE);
    const std::uint64_t calls_before = oracle.call_count();

    int phi_g = 0;
    Graph ge = overshoot_impl(g, pool, oracle, rng, cfg.overshoot_kind, &phi_g, nullptr);
    const ForwardOut fwd = gist_forward(ge, model, cfg, rng, cfg.mode);

    Counterfactual cf;
    cf.input = g;
    cf.overshoot = std::move(ge);
    cf.result.node_features = fwd.features.value();
    cf.result.adjacency = fwd.edges;
    cf.soft_edges = fwd.rho.value();

    const int phi_star = oracle.predict(cf.result);
    cf.valid = (phi_star != phi_g);
    cf.oracle_calls_used = oracle.call_count() - calls_before;
    return cf;
}

Counterfactual irand_explain(const Graph& g, const Oracle& oracle, double p, int t, Rng& rng) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("irand: p must be in (0, 1)");
    if (t < 1) throw std::invalid_argument("irand: need at least one round");
    const std::uint64_t calls_before = oracle.call_count();
    const int phi_g = oracle.predict(g);
    const std::size_t n = g.num_nodes();

    Counterfactual cf;
    cf.input = g;
    cf.overshoot = g;  // no overshooting stage in this baseline

    for (int round = 0; round < t; ++round) {
        Graph candidate = g;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (rng.bernoulli(p)) {
                    const double flipped = candidate.adjacency(i, j) == 0.0 ? 1.0 : 0.0;
                    candidate.adjacency(i, j) = flipped;
                    candidate.adjacency(j, i) = flipped;
                }
        const int phi_c = oracle.predict(candidate);
        cf.result = std::move(candidate);
        if (phi_c != phi_g) {
            cf.valid = true;
            break;
        }
    }
    cf.oracle_calls_used = oracle.call_count() - calls_before;
    return cf;
}

void export_counterfactual(const Counterfactual& cf, double alpha, std::uint64_t seed,
                           const std::filesystem::path& path) {
    nlohmann::json soft = nlohmann::json::array();
    for (std::size_t i = 0; i < cf.soft_edges.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < cf.soft_edges.cols(); ++j) row.push_back(cf.soft_edges(i, j));
        soft.push_back(std::move(row));
    }
    nlohmann::json j{{"input", detail::graph_to_json(cf.input)},
                     {"overshoot", detail::graph_to_json(cf.overshoot)},
                     {"result", detail::graph_to_json(cf.result)},
                     {"valid", cf.valid},
                     {"oracle_calls_used", cf.oracle_calls_used},
                     {"soft_edges", std::move(soft)},
                     {"alpha", alpha},
                     {"seed", seed}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_counterfactual: cannot open " + path.string());
    out << j.dump(2) << "\n";
}

} // namespace gist
