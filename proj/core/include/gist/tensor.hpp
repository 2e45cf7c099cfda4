#pragma once

#include "gist/matrix.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace gist::ad {

struct Node;

/// Reverse-mode autodiff handle over a dense matrix value. Tensors are cheap
/// shared handles into a dynamically built tape; backward(root) walks the
/// tape once in reverse creation order. Only the operations this pipeline
/// needs exist; there is no broadcasting beyond what the ops define.
class Tensor {
public:
    Tensor() = default;

    const Matrix& value() const;
    Matrix& value_mut();                 // leaf updates (optimizer steps)
    const Matrix& grad() const;
    Matrix& grad_mut();
    bool requires_grad() const;
    bool defined() const { return node_ != nullptr; }

    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }

    /// Value of a 1x1 tensor; throws otherwise.
    double scalar() const;

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;

    friend Tensor make_tensor(Matrix value, bool requires_grad);
    friend Tensor make_op(Matrix value, std::vector<Tensor> parents,
                          std::function<void(const Matrix&, std::span<Node* const>)> backward);
    friend void backward(const Tensor& root);
    friend Node* node_of(const Tensor& t);
};

Tensor constant(Matrix value);
Tensor parameter(Matrix value);

// Arithmetic
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);   // elementwise
Tensor scale(const Tensor& a, double s);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Nonlinearities
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// Reductions
Tensor sum(const Tensor& a);                       // 1x1
Tensor l1_diff(const Tensor& a, const Tensor& b);  // 1x1, sum |a - b|
Tensor mean_pool_rows(const Tensor& a);            // 1 x cols

/// Mean binary cross-entropy over all entries, prediction clamped to
/// [1e-7, 1 - 1e-7]; the clamp stops gradients outside the interval.
Tensor bce_mean(const Tensor& pred, const Matrix& target);

/// -log softmax(logits)[target] for a 1 x C logits row.
Tensor cross_entropy(const Tensor& logits, int target);

// Shape plumbing
Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols);
Tensor hstack(std::span<const Tensor> parts);
Tensor pair_concat(const Tensor& h);               // n x f -> n^2 x 2f, row i*n+j = [h_i | h_j]
Tensor pad_square(const Tensor& a, std::size_t m); // embed n x n top-left into m x m zeros
Tensor add_rowvec(const Tensor& a, const Tensor& row);  // broadcast 1 x f over rows

// Structured ops
Tensor mul_const(const Tensor& a, const Matrix& mask);
Tensor symmetrize_zero_diag(const Tensor& a);      // 0.5 (A + A^T), diagonal forced 0
Tensor masked_row_softmax(const Tensor& scores, const Matrix& mask);
Tensor row_sum(const Tensor& a);                   // n x m -> n x 1
Tensor make_diag(const Tensor& v);                 // n x 1 -> n x n
Tensor rsqrt_or_zero(const Tensor& v, double tol); // elementwise d^{-1/2}, 0 at d <= tol

/// Binary-concrete relaxation: sigmoid((log(p+eps) - log(1-p+eps) + noise)/T).
/// The noise matrix is treated as a constant.
Tensor gumbel_sigmoid(const Tensor& p, const Matrix& noise, double temperature, double eps);

/// Ascending eigenvalues of a symmetric matrix as a 1 x n row. The backward
/// pass maps upstream eigenvalue gradients to sum_i g_i u_i u_i^T; with a
/// consecutive eigen-gap below 1e-8 this is a subgradient choice and the
/// event is recorded in the degeneracy counter.
Tensor eigvals_sym(const Tensor& a);

std::uint64_t degenerate_eig_events();
void reset_degenerate_eig_events();

/// Runs reverse-mode accumulation from a scalar root.
void backward(const Tensor& root);

/// Clears the gradients of the given (typically leaf) tensors.
void zero_grad(std::span<Tensor> tensors);

} // namespace gist::ad
