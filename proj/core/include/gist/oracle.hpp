#pragma once

#include "gist/graph.hpp"
#include "gist/nn.hpp"
#include "gist/rng.hpp"
#include "gist/tensor.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

namespace gist {

struct OracleConfig {
    int epochs = 50;
    int batch_size = 32;
    double lr = 0.01;                // RMS propagation
    double early_stop_delta = 1e-4;  // minimum validation-loss improvement
    int patience = 5;                // epochs without improvement before stopping
    int hidden_dim = 32;
    std::uint64_t seed = 0;
};

/// Three graph-convolution layers plus one dense head.
struct GcnParams {
    std::vector<ad::Tensor> conv_weights;  // layer i: in_dim x hidden
    ad::Tensor dense_w;                    // hidden x num_classes
    ad::Tensor dense_b;                    // 1 x num_classes
    std::vector<ad::Tensor> parameters() const;
};

GcnParams make_gcn(std::size_t feature_dim, int hidden_dim, int num_classes, Rng& rng);

/// H <- ReLU(D^{-1/2} (A + I) D^{-1/2} H W) three times, mean-pooled over
/// nodes, then a dense layer to class logits (1 x num_classes).
ad::Tensor gcn_forward(const Graph& g, const GcnParams& params);

/// The black-box predictor. Parameters are frozen once training returns;
/// every predict() increments the invocation counter by exactly one and the
/// counter is safe under concurrent increments.
class Oracle {
public:
    Oracle(GcnParams params, int num_classes);

    /// Argmax of the logits, ties broken toward the lowest class index.
    int predict(const Graph& g) const;

    std::uint64_t call_count() const { return calls_->load(); }
    int num_classes() const { return num_classes_; }
    const GcnParams& params() const { return params_; }

    void save(const std::filesystem::path& path) const;
    static Oracle load(const std::filesystem::path& path, std::size_t feature_dim, int hidden_dim,
                       int num_classes);

private:
    GcnParams params_;
    int num_classes_;
    std::shared_ptr<std::atomic<std::uint64_t>> calls_;
};

/// Cross-entropy training with RMS propagation and early stopping on the
/// validation loss. The returned oracle is frozen with call_count() == 0.
Oracle train_oracle(const Dataset& train, const Dataset& val, const OracleConfig& cfg);

/// Fraction of graphs whose prediction matches the stored label. Counts one
/// oracle call per graph.
double oracle_accuracy(const Oracle& oracle, const Dataset& ds);

} // namespace gist
