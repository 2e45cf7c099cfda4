#include "gist/nn.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace gist::nn {

namespace {

Matrix xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * rng.uniform() - 1.0) * limit;
    return w;
}

} // namespace

std::vector<ad::Tensor> GistModel::parameters() const {
    std::vector<ad::Tensor> out;
    for (const ConvLayer& layer : conv_layers)
        for (const ConvHead& head : layer.heads) {
            out.push_back(head.w_query);
            out.push_back(head.w_key);
            out.push_back(head.w_value);
            out.push_back(head.w_skip);
        }
    out.push_back(edge_mlp.w1);
    out.push_back(edge_mlp.b1);
    out.push_back(edge_mlp.w2);
    out.push_back(edge_mlp.b2);
    out.push_back(feature_projector);
    return out;
}

GistModel make_gist_model(std::size_t feature_dim, std::size_t embed_dim, std::size_t heads,
                          std::size_t num_conv_layers, Rng& rng) {
    if (heads == 0 || embed_dim % heads != 0)
        throw std::invalid_argument("make_gist_model: embed_dim must be divisible by heads");
    if (num_conv_layers == 0) throw std::invalid_argument("make_gist_model: need conv layers");

    GistModel model;
    model.heads = heads;
    model.embed_dim = embed_dim;
    model.feature_dim = feature_dim;
    const std::size_t head_dim = embed_dim / heads;

    for (std::size_t l = 0; l < num_conv_layers; ++l) {
        ConvLayer layer;
        layer.in_dim = (l == 0) ? feature_dim : embed_dim;
        layer.head_dim = head_dim;
        for (std::size_t h = 0; h < heads; ++h) {
            ConvHead head;
            head.w_query = ad::parameter(xavier_uniform(layer.in_dim, head_dim, rng));
            head.w_key = ad::parameter(xavier_uniform(layer.in_dim, head_dim, rng));
            head.w_value = ad::parameter(xavier_uniform(layer.in_dim, head_dim, rng));
            head.w_skip = ad::parameter(xavier_uniform(layer.in_dim, head_dim, rng));
            layer.heads.push_back(std::move(head));
        }
        model.conv_layers.push_back(std::move(layer));
    }

    const std::size_t hidden = 4 * embed_dim;
    model.edge_mlp.w1 = ad::parameter(xavier_uniform(2 * embed_dim, hidden, rng));
    model.edge_mlp.b1 = ad::parameter(Matrix(1, hidden));
    model.edge_mlp.w2 = ad::parameter(xavier_uniform(hidden, 1, rng));
    model.edge_mlp.b2 = ad::parameter(Matrix(1, 1));
    model.feature_projector = ad::parameter(xavier_uniform(embed_dim, feature_dim, rng));
    return model;
}

ad::Tensor transformer_conv(const ad::Tensor& x, const Matrix& adjacency, const ConvLayer& layer,
                            std::vector<Matrix>* attn_out) {
    const std::size_t n = x.rows();
    if (adjacency.rows() != n || adjacency.cols() != n)
        throw std::invalid_argument("transformer_conv: adjacency shape mismatch");
    if (x.cols() != layer.in_dim)
        throw std::invalid_argument("transformer_conv: feature dimension mismatch");

    // Attention mask over N(i) + {i}.
    Matrix mask(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        mask(i, i) = 1.0;
        for (std::size_t j = 0; j < n; ++j)
            if (adjacency(i, j) != 0.0) mask(i, j) = 1.0;
    }

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(layer.head_dim));
    std::vector<ad::Tensor> head_outputs;
    head_outputs.reserve(layer.heads.size());
    for (const ConvHead& head : layer.heads) {
        ad::Tensor q = ad::matmul(x, head.w_query);
        ad::Tensor k = ad::matmul(x, head.w_key);
        ad::Tensor v = ad::matmul(x, head.w_value);
        ad::Tensor scores = ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_d);
        ad::Tensor att = ad::masked_row_softmax(scores, mask);
        if (attn_out) attn_out->push_back(att.value());
        ad::Tensor out = ad::add(ad::matmul(x, head.w_skip), ad::matmul(att, v));
        head_outputs.push_back(std::move(out));
    }
    return ad::hstack(head_outputs);
}

ad::Tensor edge_scores(const ad::Tensor& h, const EdgeMlp& mlp) {
    const std::size_t n = h.rows();
    ad::Tensor pairs = ad::pair_concat(h);
    ad::Tensor hidden = ad::relu(ad::add_rowvec(ad::matmul(pairs, mlp.w1), mlp.b1));
    ad::Tensor logits = ad::add_rowvec(ad::matmul(hidden, mlp.w2), mlp.b2);
    ad::Tensor probs = ad::sigmoid(ad::reshape(logits, n, n));
    return ad::symmetrize_zero_diag(probs);
}

Matrix symmetric_logistic_noise(std::size_t n, Rng& rng) {
    Matrix noise(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double g = rng.logistic();
            noise(i, j) = g;
            noise(j, i) = g;
        }
    return noise;
}

ad::Tensor gumbel_softmax(const ad::Tensor& p, const GumbelConfig& cfg, Rng& rng) {
    if (cfg.temperature <= 0.0) throw std::invalid_argument("gumbel_softmax: temperature must be > 0");
    if (cfg.epsilon <= 0.0 || cfg.epsilon > 1e-6)
        throw std::invalid_argument("gumbel_softmax: epsilon must be in (0, 1e-6]");
    if (p.rows() == p.cols()) {
        return ad::gumbel_sigmoid(p, symmetric_logistic_noise(p.rows(), rng), cfg.temperature,
                                  cfg.epsilon);
    }
    Matrix noise(p.rows(), p.cols());
    for (std::size_t i = 0; i < noise.size(); ++i) noise.data()[i] = rng.logistic();
    return ad::gumbel_sigmoid(p, noise, cfg.temperature, cfg.epsilon);
}

ad::Tensor gumbel_softmax_zero_noise(const ad::Tensor& p, const GumbelConfig& cfg) {
    if (cfg.temperature <= 0.0) throw std::invalid_argument("gumbel_softmax: temperature must be > 0");
    return ad::gumbel_sigmoid(p, Matrix(p.rows(), p.cols()), cfg.temperature, cfg.epsilon);
}

void adam_step(std::span<ad::Tensor> params, AdamState& state, double lr, double weight_decay) {
    if (state.m.empty()) {
        for (const ad::Tensor& t : params) {
            state.m.emplace_back(t.value().rows(), t.value().cols());
            state.v.emplace_back(t.value().rows(), t.value().cols());
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state/parameter count mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& value = params[i].value_mut();
        const Matrix& grad = params[i].grad();
        if (grad.size() != value.size()) throw std::invalid_argument("adam_step: grad shape mismatch");
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double g = grad.data()[k];
            double& m = state.m[i].data()[k];
            double& v = state.v[i].data()[k];
            m = state.beta1 * m + (1.0 - state.beta1) * g;
            v = state.beta2 * v + (1.0 - state.beta2) * g * g;
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            double& p = value.data()[k];
            p -= lr * (mhat / (std::sqrt(vhat) + state.eps) + weight_decay * p);
        }
    }
}

void rmsprop_step(std::span<ad::Tensor> params, RmsPropState& state, double lr) {
    if (state.v.empty())
        for (const ad::Tensor& t : params) state.v.emplace_back(t.value().rows(), t.value().cols());
    if (state.v.size() != params.size())
        throw std::invalid_argument("rmsprop_step: state/parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& value = params[i].value_mut();
        const Matrix& grad = params[i].grad();
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double g = grad.data()[k];
            double& v = state.v[i].data()[k];
            v = state.alpha * v + (1.0 - state.alpha) * g * g;
            value.data()[k] -= lr * g / (std::sqrt(v) + state.eps);
        }
    }
}

void save_checkpoint(const std::filesystem::path& path, std::span<const ad::Tensor> params,
                     std::uint64_t rng_seed, const std::string& config_json) {
    nlohmann::json shapes = nlohmann::json::array();
    nlohmann::json flats = nlohmann::json::array();
    for (const ad::Tensor& t : params) {
        shapes.push_back({t.value().rows(), t.value().cols()});
        flats.push_back(t.value().storage());
    }
    nlohmann::json j{{"version", 1},
                     {"shapes", shapes},
                     {"parameters", flats},
                     {"rng_seed", rng_seed},
                     {"config", config_json.empty() ? nlohmann::json(nullptr)
                                                    : nlohmann::json::parse(config_json)}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    out << j.dump(2) << "\n";
}

void load_checkpoint(const std::filesystem::path& path, std::span<ad::Tensor> params,
                     std::uint64_t* rng_seed, std::string* config_json) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    if (j.value("version", 0) != 1) throw std::runtime_error("load_checkpoint: unsupported version");
    const auto& shapes = j.at("shapes");
    const auto& flats = j.at("parameters");
    if (shapes.size() != params.size() || flats.size() != params.size())
        throw std::runtime_error("load_checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::size_t rows = shapes[i][0].get<std::size_t>();
        const std::size_t cols = shapes[i][1].get<std::size_t>();
        Matrix& value = params[i].value_mut();
        if (rows != value.rows() || cols != value.cols())
            throw std::runtime_error("load_checkpoint: shape mismatch for parameter " +
                                     std::to_string(i));
        const auto flat = flats[i].get<std::vector<double>>();
        if (flat.size() != value.size())
            throw std::runtime_error("load_checkpoint: data length mismatch");
        for (std::size_t k = 0; k < flat.size(); ++k) value.data()[k] = flat[k];
    }
    if (rng_seed) *rng_seed = j.value("rng_seed", std::uint64_t{0});
    if (config_json && j.contains("config") && !j["config"].is_null())
        *config_json = j["config"].dump();
}

} // namespace gist::nn
