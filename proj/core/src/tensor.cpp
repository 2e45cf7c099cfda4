#include "gist/tensor.hpp"

#include "gist/spectral.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace gist::ad {

namespace {
std::atomic<std::uint64_t> g_next_id{1};
std::atomic<std::uint64_t> g_degenerate_eig{0};
} // namespace

struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::vector<Tensor> parents;
    std::function<void(const Matrix&, std::span<Node* const>)> backward_fn;
    std::uint64_t id = 0;

    void ensure_grad() {
        if (grad.size() != value.size()) grad = Matrix(value.rows(), value.cols());
    }
};

Node* node_of(const Tensor& t) { return t.node_.get(); }

const Matrix& Tensor::value() const {
    if (!node_) throw std::logic_error("tensor: empty handle");
    return node_->value;
}

Matrix& Tensor::value_mut() {
    if (!node_) throw std::logic_error("tensor: empty handle");
    return node_->value;
}

const Matrix& Tensor::grad() const {
    if (!node_) throw std::logic_error("tensor: empty handle");
    const_cast<Node*>(node_.get())->ensure_grad();
    return node_->grad;
}

Matrix& Tensor::grad_mut() {
    if (!node_) throw std::logic_error("tensor: empty handle");
    node_->ensure_grad();
    return node_->grad;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

double Tensor::scalar() const {
    if (value().rows() != 1 || value().cols() != 1)
        throw std::invalid_argument("tensor: scalar() on non 1x1 value");
    return value()(0, 0);
}

Tensor make_tensor(Matrix value, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    node->id = g_next_id.fetch_add(1);
    return Tensor(std::move(node));
}

Tensor constant(Matrix value) { return make_tensor(std::move(value), false); }
Tensor parameter(Matrix value) { return make_tensor(std::move(value), true); }

Tensor make_op(Matrix value, std::vector<Tensor> parents,
               std::function<void(const Matrix&, std::span<Node* const>)> backward_fn) {
    bool needs = false;
    for (const Tensor& p : parents) needs = needs || p.requires_grad();
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = needs;
    node->id = g_next_id.fetch_add(1);
    if (needs) {
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

void backward(const Tensor& root) {
    Node* r = node_of(root);
    if (!r) throw std::logic_error("backward: empty root");
    if (r->value.rows() != 1 || r->value.cols() != 1)
        throw std::invalid_argument("backward: root must be a scalar");

    std::vector<Node*> topo;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{r, 0}};
    visited.insert(r);
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            Node* child = node_of(node->parents[next_child++]);
            if (visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    r->ensure_grad();
    r->grad(0, 0) += 1.0;

    std::vector<Node*> parent_ptrs;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* node = *it;
        if (!node->backward_fn || !node->requires_grad) continue;
        parent_ptrs.clear();
        for (const Tensor& p : node->parents) {
            Node* pn = node_of(p);
            pn->ensure_grad();
            parent_ptrs.push_back(pn);
        }
        node->ensure_grad();
        node->backward_fn(node->grad, parent_ptrs);
    }
}

void zero_grad(std::span<Tensor> tensors) {
    for (Tensor& t : tensors) {
        Matrix& g = t.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = 0.0;
    }
}

std::uint64_t degenerate_eig_events() { return g_degenerate_eig.load(); }
void reset_degenerate_eig_events() { g_degenerate_eig.store(0); }

namespace {
void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}
} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    return make_op(a.value() + b.value(), {a, b},
                   [](const Matrix& up, std::span<Node* const> p) {
                       p[0]->grad += up;
                       p[1]->grad += up;
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    return make_op(a.value() - b.value(), {a, b},
                   [](const Matrix& up, std::span<Node* const> p) {
                       p[0]->grad += up;
                       p[1]->grad -= up;
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.value().data()[i];
    return make_op(std::move(out), {a, b},
                   [](const Matrix& up, std::span<Node* const> p) {
                       for (std::size_t i = 0; i < up.size(); ++i) {
                           p[0]->grad.data()[i] += up.data()[i] * p[1]->value.data()[i];
                           p[1]->grad.data()[i] += up.data()[i] * p[0]->value.data()[i];
                       }
                   });
}

Tensor scale(const Tensor& a, double s) {
    return make_op(a.value() * s, {a},
                   [s](const Matrix& up, std::span<Node* const> p) {
                       for (std::size_t i = 0; i < up.size(); ++i)
                           p[0]->grad.data()[i] += s * up.data()[i];
                   });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    return make_op(gist::matmul(a.value(), b.value()), {a, b},
                   [](const Matrix& up, std::span<Node* const> p) {
                       p[0]->grad += gist::matmul(up, p[1]->value.transposed());
                       p[1]->grad += gist::matmul(p[0]->value.transposed(), up);
                   });
}

Tensor transpose(const Tensor& a) {
    return make_op(a.value().transposed(), {a},
                   [](const Matrix& up, std::span<Node* const> p) {
                       p[0]->grad += up.transposed();
                   });
}

Tensor relu(const Tensor& a) {
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::max(0.0, out.data()[i]);
    return make_op(std::move(out), {a},
                   [](const Matrix& up, std::span<Node* const> p) {
                       for (std::size_t i = 0; i < up.size(); ++i)
                           if (p[0]->value.data()[i] > 0.0) p[0]->grad.data()[i] += up.data()[i];
                   });
}

Tensor sigmoid(const Tensor& a) {
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = 1.0 / (1.0 + std::exp(-out.data()[i]));
    Matrix captured = out;
    return make_op(std::move(out), {a},
                   [captured](const Matrix& up, std::span<Node* const> p) {
                       for (std::size_t i = 0; i < up.size(); ++i) {
                           const double o = captured.data()[i];
                           p[0]->grad.data()[i] += up.data()[i] * o * (1.0 - o);
                       }
                   });
}

Tensor sum(const Tensor& a) {
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return make_op(std::move(out), {a},
                   [](const Matrix& up, std::span<Node* const> p) {
                       const double g = up(0, 0);
                       for (std::size_t i = 0; i < p[0]->grad.size(); ++i) p[0]->grad.data()[i] += g;
                   });
}

Tensor l1_diff(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "l1_diff");
    Matrix out(1, 1);
    double s = 0.0;
    for (std::size_t i = 0; i < a.value().size(); ++i)
        s += std::abs(a.value().data()[i] - b.value().data()[i]);
    out(0, 0) = s;
    return make_op(std::move(out), {a, b},
                   [](const Matrix& up, std::span<Node* const> p) {
                       const double g = up(0, 0);
                       for (std::size_t i = 0; i < p[0]->grad.size(); ++i) {
                           const double d = p[0]->value.data()[i] - p[1]->value.data()[i];
                           const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                           p[0]->grad.data()[i] += g * sgn;
                           p[1]->grad.data()[i] -= g * sgn;
                       }
                   });
}

Tensor mean_pool_rows(const Tensor& a) {
    const std::size_t n = a.rows();
    const std::size_t f = a.cols();
    Matrix out(1, f);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) out(0, j) += a.value()(i, j) / static_cast<double>(n);
    return make_op(std::move(out), {a},
                   [n](const Matrix& up, std::span<Node* const> p) {
                       const double inv = 1.0 / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < up.cols(); ++j)
                               p[0]->grad(i, j) += up(0, j) * inv;
                   });
}

Tensor bce_mean(const Tensor& pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw std::invalid_argument("bce_mean: shape mismatch");
    constexpr double kLo = 1e-7;
    constexpr double kHi = 1.0 - 1e-7;
    const std::size_t count = target.size();
    Matrix out(1, 1);
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double ph = std::clamp(pred.value().data()[i], kLo, kHi);
        const double t = target.data()[i];
        s += -(t * std::log(ph) + (1.0 - t) * std::log(1.0 - ph));
    }
    out(0, 0) = s / static_cast<double>(count);
    Matrix tgt = target;
    return make_op(std::move(out), {pred},
                   [tgt, count](const Matrix& up, std::span<Node* const> p) {
                       const double g = up(0, 0) / static_cast<double>(count);
                       for (std::size_t i = 0; i < count; ++i) {
                           const double raw = p[0]->value.data()[i];
                           if (raw <= kLo || raw >= kHi) continue;  // clamp region
                           const double t = tgt.data()[i];
                           p[0]->grad.data()[i] += g * (raw - t) / (raw * (1.0 - raw));
                       }
                   });
}

Tensor cross_entropy(const Tensor& logits, int target) {
    if (logits.rows() != 1) throw std::invalid_argument("cross_entropy: logits must be 1 x C");
    const std::size_t c = logits.cols();
    if (target < 0 || static_cast<std::size_t>(target) >= c)
        throw std::out_of_range("cross_entropy: target class out of range");
    double mx = logits.value()(0, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.value()(0, j));
    double lse = 0.0;
    for (std::size_t j = 0; j < c; ++j) lse += std::exp(logits.value()(0, j) - mx);
    lse = mx + std::log(lse);
    Matrix softmax(1, c);
    for (std::size_t j = 0; j < c; ++j) softmax(0, j) = std::exp(logits.value()(0, j) - lse);
    Matrix out(1, 1);
    out(0, 0) = lse - logits.value()(0, static_cast<std::size_t>(target));
    return make_op(std::move(out), {logits},
                   [softmax, target](const Matrix& up, std::span<Node* const> p) {
                       const double g = up(0, 0);
                       for (std::size_t j = 0; j < softmax.cols(); ++j) {
                           const double onehot = (static_cast<int>(j) == target) ? 1.0 : 0.0;
                           p[0]->grad(0, j) += g * (softmax(0, j) - onehot);
                       }
                   });
}

Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols) {
    if (rows * cols != a.value().size()) throw std::invalid_argument("reshape: size mismatch");
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.value().data()[i];
    return make_op(std::move(out), {a},
                   [](const Matrix& up, std::span<Node* const> p) {
                       for (std::size_t i = 0; i < up.size(); ++i)
                           p[0]->grad.data()[i] += up.data()[i];
                   });
}

Tensor hstack(std::span<const Tensor> parts) {
    if (parts.empty()) throw std::invalid_argument("hstack: no parts");
    const std::size_t n = parts[0].rows();
    std::size_t total_cols = 0;
    for (const Tensor& t : parts) {
        if (t.rows() != n) throw std::invalid_argument("hstack: row mismatch");
        total_cols += t.cols();
    }
    Matrix out(n, total_cols);
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const Tensor& t : parts) {
        offsets.push_back(off);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < t.cols(); ++j) out(i, off + j) = t.value()(i, j);
        off += t.cols();
    }
    std::vector<Tensor> parents(parts.begin(), parts.end());
    return make_op(std::move(out), std::move(parents),
                   [offsets, n](const Matrix& up, std::span<Node* const> p) {
                       for (std::size_t k = 0; k < p.size(); ++k) {
                           const std::size_t off = offsets[k];
                           for (std::size_t i = 0; i < n; ++i)
                               for (std::size_t j = 0; j < p[k]->grad.cols(); ++j)
                                   p[k]->grad(i, j) += up(i, off + j);
                       }
                   });
}

Tensor pair_concat(const Tensor& h) {
    const std::size_t n = h.rows();
    const std::size_t f = h.cols();
    Matrix out(n * n, 2 * f);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < f; ++k) {
                out(i * n + j, k) = h.value()(i, k);
                out(i * n + j, f + k) = h.value()(j, k);
            }
    return make_op(std::move(out), {h},
                   [n, f](const Matrix& up, std::span<Node* const> p) {
                       for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < n; ++j)
                               for (std::size_t k = 0; k < f; ++k) {
                                   p[0]->grad(i, k) += up(i * n + j, k);
                                   p[0]->grad(j, k) += up(i * n + j, f + k);
                               }
                   });
}

Tensor pad_square(const Tensor& a, std::size_t m) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("pad_square: input must be square");
    if (m < n) throw std::invalid_argument("pad_square: target smaller than input");
    Matrix out(m, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = a.value()(i, j);
    return make_op(std::move(out), {a},
                   [n](const Matrix& up, std::span<Node* const> p) {
                       for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < n; ++j) p[0]->grad(i, j) += up(i, j);
                   });
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != a.cols())
        throw std::invalid_argument("add_rowvec: row must be 1 x cols(a)");
    Matrix out = a.value();
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) += row.value()(0, j);
    return make_op(std::move(out), {a, row},
                   [](const Matrix& up, std::span<Node* const> p) {
                       p[0]->grad += up;
                       for (std::size_t i = 0; i < up.rows(); ++i)
                           for (std::size_t j = 0; j < up.cols(); ++j) p[1]->grad(0, j) += up(i, j);
                   });
}

Tensor mul_const(const Tensor& a, const Matrix& mask) {
    if (a.rows() != mask.rows() || a.cols() != mask.cols())
        throw std::invalid_argument("mul_const: shape mismatch");
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
    Matrix m = mask;
    return make_op(std::move(out), {a},
                   [m](const Matrix& up, std::span<Node* const> p) {
                       for (std::size_t i = 0; i < up.size(); ++i)
                           p[0]->grad.data()[i] += up.data()[i] * m.data()[i];
                   });
}

Tensor symmetrize_zero_diag(const Tensor& a) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("symmetrize_zero_diag: input must be square");
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) out(i, j) = 0.5 * (a.value()(i, j) + a.value()(j, i));
    return make_op(std::move(out), {a},
                   [n](const Matrix& up, std::span<Node* const> p) {
                       for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < n; ++j)
                               if (i != j) p[0]->grad(i, j) += 0.5 * (up(i, j) + up(j, i));
                   });
}

Tensor masked_row_softmax(const Tensor& scores, const Matrix& mask) {
    const std::size_t n = scores.rows();
    const std::size_t m = scores.cols();
    if (mask.rows() != n || mask.cols() != m)
        throw std::invalid_argument("masked_row_softmax: mask shape mismatch");
    Matrix out(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < m; ++j)
            if (mask(i, j) != 0.0) mx = std::max(mx, scores.value()(i, j));
        if (mx == -1e300) continue;  // fully masked row stays zero
        double denom = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            if (mask(i, j) != 0.0) denom += std::exp(scores.value()(i, j) - mx);
        for (std::size_t j = 0; j < m; ++j)
            if (mask(i, j) != 0.0) out(i, j) = std::exp(scores.value()(i, j) - mx) / denom;
    }
    Matrix captured = out;
    Matrix mk = mask;
    return make_op(std::move(out), {scores},
                   [captured, mk](const Matrix& up, std::span<Node* const> p) {
                       const std::size_t n = up.rows();
                       const std::size_t m = up.cols();
                       for (std::size_t i = 0; i < n; ++i) {
                           double dot = 0.0;
                           for (std::size_t k = 0; k < m; ++k)
                               if (mk(i, k) != 0.0) dot += up(i, k) * captured(i, k);
                           for (std::size_t j = 0; j < m; ++j)
                               if (mk(i, j) != 0.0)
                                   p[0]->grad(i, j) += captured(i, j) * (up(i, j) - dot);
                       }
                   });
}

Tensor row_sum(const Tensor& a) {
    const std::size_t n = a.rows();
    Matrix out(n, 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, 0) += a.value()(i, j);
    return make_op(std::move(out), {a},
                   [](const Matrix& up, std::span<Node* const> p) {
                       for (std::size_t i = 0; i < p[0]->grad.rows(); ++i)
                           for (std::size_t j = 0; j < p[0]->grad.cols(); ++j)
                               p[0]->grad(i, j) += up(i, 0);
                   });
}

Tensor make_diag(const Tensor& v) {
    if (v.cols() != 1) throw std::invalid_argument("make_diag: input must be n x 1");
    const std::size_t n = v.rows();
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = v.value()(i, 0);
    return make_op(std::move(out), {v},
                   [n](const Matrix& up, std::span<Node* const> p) {
                       for (std::size_t i = 0; i < n; ++i) p[0]->grad(i, 0) += up(i, i);
                   });
}

Tensor rsqrt_or_zero(const Tensor& v, double tol) {
    Matrix out = v.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = out.data()[i] > tol ? 1.0 / std::sqrt(out.data()[i]) : 0.0;
    return make_op(std::move(out), {v},
                   [tol](const Matrix& up, std::span<Node* const> p) {
                       for (std::size_t i = 0; i < up.size(); ++i) {
                           const double d = p[0]->value.data()[i];
                           if (d > tol)
                               p[0]->grad.data()[i] += up.data()[i] * (-0.5 * std::pow(d, -1.5));
                       }
                   });
}

Tensor gumbel_sigmoid(const Tensor& p, const Matrix& noise, double temperature, double eps) {
    if (p.rows() != noise.rows() || p.cols() != noise.cols())
        throw std::invalid_argument("gumbel_sigmoid: noise shape mismatch");
    if (temperature <= 0.0) throw std::invalid_argument("gumbel_sigmoid: temperature must be > 0");
    Matrix out(p.rows(), p.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double pv = p.value().data()[i];
        const double z =
            (std::log(pv + eps) - std::log(1.0 - pv + eps) + noise.data()[i]) / temperature;
        out.data()[i] = 1.0 / (1.0 + std::exp(-z));
    }
    Matrix captured = out;
    return make_op(std::move(out), {p},
                   [captured, temperature, eps](const Matrix& up, std::span<Node* const> pr) {
                       for (std::size_t i = 0; i < up.size(); ++i) {
                           const double pv = pr[0]->value.data()[i];
                           const double o = captured.data()[i];
                           const double dz = 1.0 / (pv + eps) + 1.0 / (1.0 - pv + eps);
                           pr[0]->grad.data()[i] += up.data()[i] * o * (1.0 - o) * dz / temperature;
                       }
                   });
}

Tensor eigvals_sym(const Tensor& a) {
    const EigenPair ep = eig_sym(a.value());
    const std::size_t n = ep.values.size();
    Matrix out(1, n);
    for (std::size_t i = 0; i < n; ++i) out(0, i) = ep.values[i];
    Matrix vectors = ep.vectors;
    std::vector<double> values = ep.values.values;
    return make_op(std::move(out), {a},
                   [vectors, values, n](const Matrix& up, std::span<Node* const> p) {
                       for (std::size_t i = 0; i + 1 < n; ++i)
                           if (values[i + 1] - values[i] < 1e-8) g_degenerate_eig.fetch_add(1);
                       Matrix g(n, n);
                       for (std::size_t i = 0; i < n; ++i) {
                           const double gi = up(0, i);
                           if (gi == 0.0) continue;
                           for (std::size_t r = 0; r < n; ++r)
                               for (std::size_t c = 0; c < n; ++c)
                                   g(r, c) += gi * vectors(r, i) * vectors(c, i);
                       }
                       for (std::size_t r = 0; r < n; ++r)
                           for (std::size_t c = 0; c < n; ++c)
                               p[0]->grad(r, c) += 0.5 * (g(r, c) + g(c, r));
                   });
}

} // namespace gist::ad
