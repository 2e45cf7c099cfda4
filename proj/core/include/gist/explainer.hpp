#pragma once

#include "gist/graph.hpp"
#include "gist/nn.hpp"
#include "gist/oracle.hpp"
#include "gist/rng.hpp"
#include "gist/spectral.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace gist {

/// Raised when a pool contains no graph of a class different from the input's.
struct NoCounterfactualError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SampleMode { Deterministic, Bernoulli };
enum class OvershootKind { Random, Smart };

struct GistConfig {
    double alpha = 0.9;           // content weight; 1 - alpha weights the spectral style term
    int epochs = 50;
    int batch_size = 16;
    std::size_t heads = 2;
    std::size_t embed_dim = 16;
    std::size_t num_conv_layers = 2;
    double lr = 1e-3;
    double weight_decay = 1e-5;
    double temperature = 1.0;
    double gumbel_epsilon = 1e-7;
    std::uint64_t seed = 0;
    LaplacianKind spectral_kind = LaplacianKind::Normalized;
    SampleMode mode = SampleMode::Deterministic;  // inference-time edge decision
    OvershootKind overshoot_kind = OvershootKind::Random;

    void validate() const;
};

/// The (input, overshoot, result) triple plus bookkeeping for one instance.
struct Counterfactual {
    Graph input;      // G
    Graph overshoot;  // G-epsilon (equals input for explainers without one)
    Graph result;     // G*, binary symmetric adjacency
    bool valid = false;
    std::uint64_t oracle_calls_used = 0;
    Matrix soft_edges;  // rho at inference time
};

/// Scans a shuffled pool and returns the first graph the oracle classifies
/// differently from g. Consumes 1 + k oracle calls (input plus k candidates).
Graph overshoot(const Graph& g, const Dataset& pool, const Oracle& oracle, Rng& rng);

/// Among all pool graphs of a different class, returns the one minimizing the
/// Frobenius distance between combinatorial Laplacians after padding.
Graph smart_overshoot(const Graph& g, const Dataset& pool, const Oracle& oracle, double alpha);

struct ForwardOut {
    ad::Tensor features;  // X*, n x d (projected back to input feature space)
    ad::Tensor rho;       // soft adjacency, symmetric, zero diagonal
    Matrix edges;         // E* as a binary symmetric adjacency
};

/// Alg.-style forward pass: conv stack with ReLU over (X_eps, A_eps), pairwise
/// edge probabilities, binary-concrete relaxation, and an edge decision that is
/// a Bernoulli draw in stochastic mode or a 0.5 threshold in deterministic mode.
ForwardOut gist_forward(const Graph& ge, const nn::GistModel& model, const GistConfig& cfg,
                        Rng& rng, SampleMode mode);

/// alpha * [ |X* - X_eps|_1 + BCE(rho, A_eps) ]
///   + (1 - alpha) * sum_i |lambda_i(L(G)) - lambda_i(L(G*_soft))|.
/// The style term runs on the soft adjacency so the whole loss stays
/// differentiable; graphs are padded to a common size for the spectral part.
ad::Tensor gist_loss(const Graph& g, const Graph& ge, const ForwardOut& fwd, const GistConfig& cfg);

struct TrainTrace {
    std::vector<double> epoch_loss;  // deterministic-mode loss of the first pair
};

/// Trains one shared model over seeded (G, G-eps) pairs built once up front;
/// Adam with decoupled weight decay, gradients accumulated across the batch
/// (variable graph sizes forbid tensor batching). The oracle is only queried
/// during pair construction.
nn::GistModel train_gist(const Dataset& train, const Oracle& oracle, const GistConfig& cfg,
                         TrainTrace* trace = nullptr);

/// overshoot -> deterministic forward -> assemble G* -> one validity call.
Counterfactual explain(const nn::GistModel& model, const Graph& g, const Dataset& pool,
                       const Oracle& oracle, const GistConfig& cfg);

/// Baseline: up to t rounds, each flipping every node pair independently with
/// probability p, stopping at the first class change.
Counterfactual irand_explain(const Graph& g, const Oracle& oracle, double p, int t, Rng& rng);

/// JSON export of the triple, validity, soft edges, alpha, and seed.
void export_counterfactual(const Counterfactual& cf, double alpha, std::uint64_t seed,
                           const std::filesystem::path& path);

} // namespace gist
