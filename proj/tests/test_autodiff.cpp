#include "gist/tensor.hpp"

#include "gist/spectral.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace gist;
using test_support::grad_check;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * (2.0 * rng.uniform() - 1.0);
    return m;
}

} // namespace

TEST_SUITE("autodiff") {

TEST_CASE("arithmetic and matmul gradients match finite differences") {
    Rng rng(71);
    std::vector<ad::Tensor> params{ad::parameter(random_matrix(4, 3, rng)),
                                   ad::parameter(random_matrix(3, 5, rng)),
                                   ad::parameter(random_matrix(4, 5, rng))};
    auto build = [&]() {
        ad::Tensor prod = ad::matmul(params[0], params[1]);
        ad::Tensor mixed = ad::mul(prod, params[2]);
        return ad::sum(ad::add(mixed, ad::scale(params[2], 0.7)));
    };
    const auto res = grad_check(build, params, 1e-6);
    CHECK(res.checked > 0);
    CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("relu, sigmoid, transpose, softmax gradients") {
    Rng rng(73);
    std::vector<ad::Tensor> params{ad::parameter(random_matrix(5, 5, rng, 2.0))};
    Matrix mask(5, 5);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) mask(i, j) = (i == j || rng.uniform() < 0.5) ? 1.0 : 0.0;
    auto build = [&]() {
        ad::Tensor s = ad::masked_row_softmax(params[0], mask);
        ad::Tensor r = ad::relu(ad::transpose(params[0]));
        return ad::add(ad::sum(ad::mul(s, s)), ad::sum(ad::sigmoid(r)));
    };
    const auto res = grad_check(build, params, 1e-6);
    CHECK(res.checked > 0);
    CHECK(res.max_rel_error < 1e-5);
}

TEST_CASE("masked softmax rows sum to one on unmasked entries") {
    Rng rng(79);
    ad::Tensor scores = ad::constant(random_matrix(6, 6, rng, 3.0));
    Matrix mask(6, 6);
    for (std::size_t i = 0; i < 6; ++i) {
        mask(i, i) = 1.0;
        for (std::size_t j = 0; j < 6; ++j)
            if (rng.uniform() < 0.4) mask(i, j) = 1.0;
    }
    const Matrix out = ad::masked_row_softmax(scores, mask).value();
    for (std::size_t i = 0; i < 6; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < 6; ++j) {
            row += out(i, j);
            if (mask(i, j) == 0.0) CHECK(out(i, j) == 0.0);
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("structured op gradients: pair_concat, reshape, hstack, pad, diag, rsqrt") {
    Rng rng(83);
    std::vector<ad::Tensor> params{ad::parameter(random_matrix(4, 3, rng)),
                                   ad::parameter(random_matrix(4, 2, rng))};
    Matrix weights = random_matrix(6, 1, rng);
    auto build = [&]() {
        ad::Tensor pc = ad::pair_concat(params[0]);            // 16 x 6
        ad::Tensor lin = ad::matmul(pc, ad::constant(weights)); // 16 x 1
        ad::Tensor sq = ad::reshape(lin, 4, 4);
        ad::Tensor sym = ad::symmetrize_zero_diag(sq);
        ad::Tensor padded = ad::pad_square(sym, 6);
        std::vector<ad::Tensor> parts{params[0], params[1]};
        ad::Tensor stacked = ad::hstack(parts);
        ad::Tensor degs = ad::row_sum(ad::mul(stacked, stacked));
        ad::Tensor diag = ad::make_diag(ad::rsqrt_or_zero(degs, 1e-12));
        return ad::add(ad::sum(padded), ad::sum(diag));
    };
    const auto res = grad_check(build, params, 1e-6);
    CHECK(res.checked > 0);
    CHECK(res.max_rel_error < 1e-5);
}

TEST_CASE("l1_diff, bce, cross_entropy, mean_pool gradients") {
    Rng rng(89);
    std::vector<ad::Tensor> params{ad::parameter(random_matrix(4, 4, rng))};
    Matrix target(4, 4);
    for (std::size_t i = 0; i < target.size(); ++i) target.data()[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    const Matrix other = random_matrix(4, 4, rng);
    auto build = [&]() {
        ad::Tensor probs = ad::sigmoid(params[0]);
        ad::Tensor bce = ad::bce_mean(probs, target);
        ad::Tensor l1 = ad::l1_diff(params[0], ad::constant(other));
        ad::Tensor pooled = ad::mean_pool_rows(params[0]);
        ad::Tensor ce = ad::cross_entropy(pooled, 2);
        return ad::add(ad::add(bce, l1), ce);
    };
    const auto res = grad_check(build, params, 1e-6);
    CHECK(res.checked > 0);
    CHECK(res.max_rel_error < 1e-5);
}

TEST_CASE("gumbel sigmoid gradients and values") {
    Rng rng(97);
    Matrix raw = random_matrix(3, 3, rng);
    for (std::size_t i = 0; i < raw.size(); ++i) raw.data()[i] = 0.1 + 0.8 * rng.uniform();
    std::vector<ad::Tensor> params{ad::parameter(raw)};
    Matrix noise = random_matrix(3, 3, rng, 0.5);
    auto build = [&]() { return ad::sum(ad::gumbel_sigmoid(params[0], noise, 0.7, 1e-7)); };
    const auto res = grad_check(build, params, 1e-7);
    CHECK(res.checked == 9);
    CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("eigvals_sym: values, trivial gradients, finite differences") {
    // Diagonal case: d lambda_1 / dL = e1 e1^T.
    Matrix d(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = 2.0;
    ad::Tensor lt = ad::parameter(d);
    ad::Tensor vals = ad::eigvals_sym(lt);
    CHECK(vals.value()(0, 0) == doctest::Approx(1.0));
    CHECK(vals.value()(0, 1) == doctest::Approx(2.0));
    ad::Tensor first = ad::mul_const(vals, [] {
        Matrix pick(1, 2);
        pick(0, 0) = 1.0;
        return pick;
    }());
    ad::backward(ad::sum(first));
    CHECK(lt.grad()(0, 0) == doctest::Approx(1.0));
    CHECK(lt.grad()(0, 1) == doctest::Approx(0.0));
    CHECK(lt.grad()(1, 1) == doctest::Approx(0.0));

    // Zero upstream -> zero gradient.
    ad::Tensor lt2 = ad::parameter(d);
    ad::backward(ad::scale(ad::sum(ad::eigvals_sym(lt2)), 0.0));
    CHECK(lt2.grad().max_abs() == 0.0);

    // Random symmetric PSD with a simple spectrum against finite differences.
    Rng rng(101);
    for (int it = 0; it < 5; ++it) {
        const Matrix half = random_matrix(6, 6, rng);
        Matrix psd = matmul(half, half.transposed());
        const Spectrum probe = eig_values(psd);
        bool simple = true;
        for (std::size_t i = 0; i + 1 < probe.size(); ++i)
            if (probe[i + 1] - probe[i] < 1e-3) simple = false;
        if (!simple) continue;

        Matrix targets(1, 6);
        for (std::size_t i = 0; i < 6; ++i) targets(0, i) = rng.uniform() * 3.0;
        std::vector<ad::Tensor> params{ad::parameter(psd)};
        auto build = [&]() {
            ad::Tensor sym = ad::symmetrize_zero_diag(params[0]);  // keep input symmetric under FD pokes
            ad::Tensor shifted = ad::add(sym, ad::mul_const(params[0], Matrix::identity(6)));
            return ad::l1_diff(ad::eigvals_sym(shifted), ad::constant(targets));
        };
        const auto res = grad_check(build, params, 1e-5);
        CHECK(res.checked > 0);
        CHECK(res.max_rel_error < 1e-3);
    }
}

TEST_CASE("degenerate eigenvalue gradients are counted") {
    ad::reset_degenerate_eig_events();
    ad::Tensor lt = ad::parameter(Matrix::identity(4));  // fully degenerate spectrum
    ad::backward(ad::sum(ad::eigvals_sym(lt)));
    CHECK(ad::degenerate_eig_events() == 3);
    ad::reset_degenerate_eig_events();
    CHECK(ad::degenerate_eig_events() == 0);
}

TEST_CASE("zero_grad clears accumulated gradients") {
    std::vector<ad::Tensor> params{ad::parameter(Matrix::identity(3))};
    ad::backward(ad::sum(ad::mul(params[0], params[0])));
    CHECK(params[0].grad().max_abs() > 0.0);
    ad::zero_grad(params);
    CHECK(params[0].grad().max_abs() == 0.0);
}

TEST_CASE("backward demands a scalar root") {
    ad::Tensor t = ad::parameter(Matrix::identity(2));
    CHECK_THROWS_AS(ad::backward(t), std::invalid_argument);
}

} // TEST_SUITE
