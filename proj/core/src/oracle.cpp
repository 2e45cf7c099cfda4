#include "gist/oracle.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gist {

std::vector<ad::Tensor> GcnParams::parameters() const {
    std::vector<ad::Tensor> out = conv_weights;
    out.push_back(dense_w);
    out.push_back(dense_b);
    return out;
}

GcnParams make_gcn(std::size_t feature_dim, int hidden_dim, int num_classes, Rng& rng) {
    auto xavier = [&rng](std::size_t fin, std::size_t fout) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fin + fout));
        Matrix w(fin, fout);
        for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * rng.uniform() - 1.0) * limit;
        return w;
    };
    const auto hidden = static_cast<std::size_t>(hidden_dim);
    GcnParams p;
    p.conv_weights.push_back(ad::parameter(xavier(feature_dim, hidden)));
    p.conv_weights.push_back(ad::parameter(xavier(hidden, hidden)));
    p.conv_weights.push_back(ad::parameter(xavier(hidden, hidden)));
    p.dense_w = ad::parameter(xavier(hidden, static_cast<std::size_t>(num_classes)));
    p.dense_b = ad::parameter(Matrix(1, static_cast<std::size_t>(num_classes)));
    return p;
}

namespace {

// D^{-1/2} (A + I) D^{-1/2} with self-loops included in the degrees.
Matrix normalized_augmented_adjacency(const Graph& g) {
    const std::size_t n = g.num_nodes();
    Matrix a = g.adjacency;
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
    const std::vector<double> deg = a.row_sums();
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out(i, j) = a(i, j) / std::sqrt(deg[i] * deg[j]);
    return out;
}

} // namespace

ad::Tensor gcn_forward(const Graph& g, const GcnParams& params) {
    if (params.conv_weights.empty()) throw std::invalid_argument("gcn_forward: no layers");
    if (g.feature_dim() != params.conv_weights.front().value().rows())
        throw std::invalid_argument("gcn_forward: feature dimension mismatch");
    const ad::Tensor norm_adj = ad::constant(normalized_augmented_adjacency(g));
    ad::Tensor h = ad::constant(g.node_features);
    for (const ad::Tensor& w : params.conv_weights)
        h = ad::relu(ad::matmul(ad::matmul(norm_adj, h), w));
    ad::Tensor pooled = ad::mean_pool_rows(h);
    return ad::add_rowvec(ad::matmul(pooled, params.dense_w), params.dense_b);
}

Oracle::Oracle(GcnParams params, int num_classes)
    : params_(std::move(params)),
      num_classes_(num_classes),
      calls_(std::make_shared<std::atomic<std::uint64_t>>(0)) {}

int Oracle::predict(const Graph& g) const {
    const Matrix logits = gcn_forward(g, params_).value();
    int best = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j)
        if (logits(0, j) > logits(0, best)) best = static_cast<int>(j);
    calls_->fetch_add(1);
    return best;
}

void Oracle::save(const std::filesystem::path& path) const {
    const auto params = params_.parameters();
    nn::save_checkpoint(path, params, 0,
                        "{\"num_classes\": " + std::to_string(num_classes_) + "}");
}

Oracle Oracle::load(const std::filesystem::path& path, std::size_t feature_dim, int hidden_dim,
                    int num_classes) {
    Rng rng(0);
    GcnParams params = make_gcn(feature_dim, hidden_dim, num_classes, rng);
    auto list = params.parameters();
    nn::load_checkpoint(path, list);
    return Oracle(std::move(params), num_classes);
}

Oracle train_oracle(const Dataset& train, const Dataset& val, const OracleConfig& cfg) {
    if (train.graphs.empty()) throw std::invalid_argument("train_oracle: empty training set");
    for (const Graph& g : train.graphs)
        if (!g.label) throw std::invalid_argument("train_oracle: unlabeled training graph");

    Rng rng(cfg.seed);
    GcnParams params = make_gcn(train.graphs.front().feature_dim(), cfg.hidden_dim,
                                train.num_classes, rng);
    auto param_list = params.parameters();
    nn::RmsPropState opt;

    auto validation_loss = [&]() {
        if (val.graphs.empty()) return 0.0;
        double total = 0.0;
        for (const Graph& g : val.graphs)
            total += ad::cross_entropy(gcn_forward(g, params), *g.label).scalar();
        return total / static_cast<double>(val.graphs.size());
    };

    std::vector<std::size_t> order(train.graphs.size());
    std::iota(order.begin(), order.end(), 0);

    double best_val = 1e300;
    int bad_epochs = 0;
    std::vector<Matrix> best_params;
    for (const ad::Tensor& t : param_list) best_params.push_back(t.value());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            ad::Tensor loss;
            for (std::size_t k = start; k < end; ++k) {
                const Graph& g = train.graphs[order[k]];
                ad::Tensor ce = ad::cross_entropy(gcn_forward(g, params), *g.label);
                loss = loss.defined() ? ad::add(loss, ce) : ce;
            }
            loss = ad::scale(loss, 1.0 / static_cast<double>(end - start));
            ad::zero_grad(param_list);
            ad::backward(loss);
            nn::rmsprop_step(param_list, opt, cfg.lr);
        }

        if (!val.graphs.empty()) {
            const double vl = validation_loss();
            if (best_val - vl >= cfg.early_stop_delta) {
                best_val = vl;
                bad_epochs = 0;
                for (std::size_t i = 0; i < param_list.size(); ++i)
                    best_params[i] = param_list[i].value();
            } else if (++bad_epochs >= cfg.patience) {
                break;
            }
        }
    }

    if (!val.graphs.empty())
        for (std::size_t i = 0; i < param_list.size(); ++i)
            param_list[i].value_mut() = best_params[i];

    return Oracle(std::move(params), train.num_classes);
}

double oracle_accuracy(const Oracle& oracle, const Dataset& ds) {
    if (ds.graphs.empty()) throw std::invalid_argument("oracle_accuracy: empty dataset");
    std::size_t hits = 0;
    for (const Graph& g : ds.graphs)
        if (g.label && oracle.predict(g) == *g.label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ds.graphs.size());
}

} // namespace gist
