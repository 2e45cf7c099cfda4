#pragma once

#include "gist/matrix.hpp"
#include "gist/rng.hpp"
#include "gist/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gist::nn {

struct GumbelConfig {
    double temperature = 1.0;   // > 0; constant, no annealing schedule
    double epsilon = 1e-7;      // numerical-stability constant, <= 1e-6
    std::uint64_t rng_seed = 0;
};

/// One attention head of a transformer convolution; all maps are f_in x head_dim.
struct ConvHead {
    ad::Tensor w_query, w_key, w_value, w_skip;
};

struct ConvLayer {
    std::vector<ConvHead> heads;
    std::size_t in_dim = 0;
    std::size_t head_dim = 0;
};

/// Two-layer perceptron scoring node pairs: (2f -> hidden) ReLU (hidden -> 1).
struct EdgeMlp {
    ad::Tensor w1, b1, w2, b2;
};

/// Parameters of the backtracking network: transformer-convolution encoder,
/// pairwise edge MLP, and a linear projector from embedding space back to the
/// input feature dimension.
struct GistModel {
    std::vector<ConvLayer> conv_layers;
    EdgeMlp edge_mlp;
    ad::Tensor feature_projector;   // embed_dim x feature_dim
    std::size_t heads = 2;
    std::size_t embed_dim = 16;
    std::size_t feature_dim = 0;

    /// Flat parameter list in a stable order (checkpoint and optimizer order).
    std::vector<ad::Tensor> parameters() const;
};

/// Xavier-uniform initialized model; embed_dim must be divisible by heads.
GistModel make_gist_model(std::size_t feature_dim, std::size_t embed_dim, std::size_t heads,
                          std::size_t num_conv_layers, Rng& rng);

/// Multi-head attention over each node's neighborhood (self always included):
/// per head, scaled dot-product scores softmax-normalized over N(i) + {i},
/// output = skip(x_i) + sum_j att_ij * value(x_j); heads concatenated.
/// attn_out, when given, receives one attention matrix per head.
ad::Tensor transformer_conv(const ad::Tensor& x, const Matrix& adjacency, const ConvLayer& layer,
                            std::vector<Matrix>* attn_out = nullptr);

/// p_ij = sigmoid(MLP([h_i | h_j])), symmetrized as (p_ij + p_ji)/2 with a
/// zero diagonal. Result is an n x n tensor of probabilities.
ad::Tensor edge_scores(const ad::Tensor& h, const EdgeMlp& mlp);

/// Logistic noise drawn once per unordered pair and mirrored, zero diagonal,
/// so downstream soft adjacencies stay symmetric.
Matrix symmetric_logistic_noise(std::size_t n, Rng& rng);

/// Binary-concrete relaxation of Bernoulli edge sampling. Noise is resampled
/// from rng on every call; the zero-noise variant drives deterministic mode.
ad::Tensor gumbel_softmax(const ad::Tensor& p, const GumbelConfig& cfg, Rng& rng);
ad::Tensor gumbel_softmax_zero_noise(const ad::Tensor& p, const GumbelConfig& cfg);

struct AdamState {
    std::vector<Matrix> m, v;
    std::uint64_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

/// Adam with decoupled weight decay and bias-corrected moments.
void adam_step(std::span<ad::Tensor> params, AdamState& state, double lr, double weight_decay);

struct RmsPropState {
    std::vector<Matrix> v;
    double alpha = 0.99, eps = 1e-8;
};

void rmsprop_step(std::span<ad::Tensor> params, RmsPropState& state, double lr);

/// Checkpoint JSON: {version, shapes, flat parameter arrays, rng_seed, config}.
void save_checkpoint(const std::filesystem::path& path, std::span<const ad::Tensor> params,
                     std::uint64_t rng_seed, const std::string& config_json);

/// Loads into existing parameter tensors; throws std::runtime_error when the
/// stored shapes do not match.
void load_checkpoint(const std::filesystem::path& path, std::span<ad::Tensor> params,
                     std::uint64_t* rng_seed = nullptr, std::string* config_json = nullptr);

} // namespace gist::nn
