#include <doctest.h>

#include "maniloc/adam.hpp"
#include "maniloc/attention.hpp"
#include "maniloc/loss.hpp"
#include "maniloc/nn.hpp"
#include "support/test_util.hpp"

using namespace maniloc;
using nn::Conv2d;

namespace {

// central finite difference of a scalar function at one parameter slot
template <typename LossFn>
double fd_gradient(double* slot, const LossFn& loss, double h = 1e-6) {
    const double saved = *slot;
    *slot = saved + h;
    const double up = loss();
    *slot = saved - h;
    const double down = loss();
    *slot = saved;
    return (up - down) / (2 * h);
}

void check_close(double analytic, double numeric, double tol = 1e-6) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    CHECK(std::abs(analytic - numeric) / scale < tol);
}

Conv2d<double> make_conv(int in_ch, int out_ch, int k, int stride, int pad, std::uint64_t seed,
                         bool bias) {
    Conv2d<double> conv;
    conv.in_ch = in_ch;
    conv.out_ch = out_ch;
    conv.ksize = k;
    conv.stride = stride;
    conv.pad = pad;
    conv.weight.resize(out_ch, std::int64_t(k) * k * in_ch);
    GaussianRng rng(seed);
    rng.fill_normal(conv.weight, 0.3);
    if (bias) {
        conv.bias.resize(out_ch);
        rng.fill_normal(conv.bias, 0.1);
    }
    conv.zero_grad();
    return conv;
}

}  // namespace

TEST_CASE("conv2d forward matches a naive direct convolution") {
    auto conv = make_conv(3, 4, 5, 1, 2, 11, true);
    const auto x = testutil::random_grid<double>(7, 9, 3, 21);
    const auto y = conv.forward(x);
    REQUIRE(y.height == 7);
    REQUIRE(y.width == 9);
    REQUIRE(y.channels == 4);

    for (int co = 0; co < 4; ++co)
        for (int oy = 0; oy < y.height; ++oy)
            for (int ox = 0; ox < y.width; ++ox) {
                double acc = conv.bias[co];
                for (int ky = 0; ky < 5; ++ky)
                    for (int kx = 0; kx < 5; ++kx)
                        for (int ci = 0; ci < 3; ++ci) {
                            const int iy = oy - 2 + ky, ix = ox - 2 + kx;
                            if (iy < 0 || iy >= x.height || ix < 0 || ix >= x.width) continue;
                            acc += conv.weight(co, (ky * 5 + kx) * 3 + ci) * x.at(iy, ix, ci);
                        }
                check_close(y.at(oy, ox, co), acc, 1e-10);
            }
}

TEST_CASE("strided conv output size matches the standard formula") {
    auto conv = make_conv(2, 3, 3, 2, 1, 5, false);
    const auto x = testutil::random_grid<double>(224, 224, 2, 3);
    const auto y = conv.forward(x);
    CHECK(y.height == 112);
    CHECK(y.width == 112);
}

TEST_CASE("conv2d gradients match finite differences") {
    auto conv = make_conv(2, 3, 3, 1, 1, 7, true);
    const auto x = testutil::random_grid<double>(5, 6, 2, 8);
    const auto weights_l = testutil::random_grid<double>(5, 6, 3, 9);  // loss projection

    auto loss = [&]() {
        const auto y = conv.forward(x);
        return (y.data.array() * weights_l.data.array()).sum();
    };

    conv.zero_grad();
    Grid<double> grad_out(5, 6, 3);
    grad_out.data = weights_l.data;
    conv.accumulate_param_grads(x, grad_out);
    const auto grad_x = conv.backward_input(grad_out, 5, 6);

    GaussianRng pick(123);
    for (int trial = 0; trial < 12; ++trial) {
        const auto wi = Eigen::Index(pick.uniform() * conv.weight.size());
        check_close(conv.grad_weight.data()[wi], fd_gradient(&conv.weight.data()[wi], loss));
    }
    check_close(conv.grad_bias[1], fd_gradient(&conv.bias[1], loss));

    Grid<double> x_mut = x;
    auto loss_x = [&]() {
        const auto y = conv.forward(x_mut);
        return (y.data.array() * weights_l.data.array()).sum();
    };
    for (int trial = 0; trial < 12; ++trial) {
        const auto xi = Eigen::Index(pick.uniform() * x_mut.data.size());
        check_close(grad_x.data.data()[xi], fd_gradient(&x_mut.data.data()[xi], loss_x));
    }
}

TEST_CASE("batch norm: training statistics, eval path, gradients") {
    nn::BatchNorm2d<double> bn(3);
    GaussianRng rng(4);
    rng.fill_normal(bn.gamma, 0.2);
    bn.gamma.array() += 1.0;
    rng.fill_normal(bn.beta, 0.2);
    bn.zero_grad();

    std::vector<Grid<double>> z{testutil::random_grid<double>(4, 5, 3, 31, 2.0),
                                testutil::random_grid<double>(4, 5, 3, 32, 2.0)};

    nn::BatchNorm2d<double>::Cache cache;
    const auto y = bn.forward_train(z, cache, /*update_running=*/true);

    SUBCASE("per-channel output statistics are normalized") {
        for (int c = 0; c < 3; ++c) {
            double sum = 0, sum_sq = 0;
            std::int64_t n = 0;
            for (const auto& g : y) {
                sum += g.data.row(c).sum();
                sum_sq += g.data.row(c).array().square().sum();
                n += g.locations();
            }
            const double mean = sum / double(n);
            const double var = sum_sq / double(n) - mean * mean;
            CHECK(mean == doctest::Approx(bn.beta[c]).epsilon(1e-6));
            CHECK(var == doctest::Approx(bn.gamma[c] * bn.gamma[c]).epsilon(1e-3));
        }
    }

    SUBCASE("running statistics converge to batch statistics") {
        nn::BatchNorm2d<double>::Cache c2;
        for (int i = 0; i < 200; ++i) bn.forward_train(z, c2);
        const auto eval_out = bn.forward_eval(z);
        for (std::size_t b = 0; b < z.size(); ++b)
            for (Eigen::Index i = 0; i < eval_out[b].data.size(); ++i)
                CHECK(eval_out[b].data.data()[i] ==
                      doctest::Approx(y[b].data.data()[i]).epsilon(1e-2));
    }

    SUBCASE("backward matches finite differences") {
        const auto proj0 = testutil::random_grid<double>(4, 5, 3, 41);
        const auto proj1 = testutil::random_grid<double>(4, 5, 3, 42);
        auto loss = [&]() {
            nn::BatchNorm2d<double>::Cache c;
            const auto out = bn.forward_train(z, c, /*update_running=*/false);
            return (out[0].data.array() * proj0.data.array()).sum() +
                   (out[1].data.array() * proj1.data.array()).sum();
        };
        nn::BatchNorm2d<double>::Cache c;
        const auto out = bn.forward_train(z, c, false);
        std::vector<Grid<double>> grad_y(2);
        grad_y[0] = proj0;
        grad_y[1] = proj1;
        bn.zero_grad();
        const auto grad_z = bn.backward(z, grad_y, c);

        check_close(bn.grad_gamma[0], fd_gradient(&bn.gamma[0], loss));
        check_close(bn.grad_beta[2], fd_gradient(&bn.beta[2], loss));
        GaussianRng pick(5);
        for (int trial = 0; trial < 10; ++trial) {
            const auto b = std::size_t(pick.uniform() * 2);
            const auto i = Eigen::Index(pick.uniform() * z[b].data.size());
            check_close(grad_z[b].data.data()[i], fd_gradient(&z[b].data.data()[i], loss), 1e-5);
        }
    }
}

TEST_CASE("layer norm gradients match finite differences") {
    nn::LayerNorm<double> ln(6);
    GaussianRng rng(9);
    rng.fill_normal(ln.gamma, 0.3);
    ln.gamma.array() += 1.0;
    rng.fill_normal(ln.beta, 0.3);
    ln.zero_grad();

    Mat<double> x(6, 4);
    rng.fill_normal(x, 1.5);
    Mat<double> proj(6, 4);
    rng.fill_normal(proj, 1.0);

    auto loss = [&]() { return (ln.forward(x).array() * proj.array()).sum(); };
    const auto grad_x = ln.backward(x, proj);

    check_close(ln.grad_gamma[3], fd_gradient(&ln.gamma[3], loss));
    check_close(ln.grad_beta[1], fd_gradient(&ln.beta[1], loss));
    GaussianRng pick(6);
    for (int trial = 0; trial < 10; ++trial) {
        const auto i = Eigen::Index(pick.uniform() * x.size());
        check_close(grad_x.data()[i], fd_gradient(&x.data()[i], loss), 1e-5);
    }
}

TEST_CASE("softmax rows are stochastic and invariant to shifts") {
    Mat<double> s(3, 5);
    GaussianRng rng(13);
    rng.fill_normal(s, 3.0);
    const auto a = nn::softmax_rows(s);
    for (int i = 0; i < 3; ++i) CHECK(a.row(i).sum() == doctest::Approx(1.0));
    Mat<double> shifted = s;
    shifted.array() += 1000.0;  // stability under large offsets
    const auto b = nn::softmax_rows(shifted);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("transformer block gradients match finite differences") {
    const int dim = 8, heads = 2, mlp = 16, tokens = 5;
    nn::TransformerBlock<double> block;
    block.dim = dim;
    block.mlp_dim = mlp;
    block.ln1 = nn::LayerNorm<double>(dim);
    block.ln2 = nn::LayerNorm<double>(dim);
    block.attn.dim = dim;
    block.attn.heads = heads;
    GaussianRng rng(17);
    auto init = [&](nn::Linear<double>& lin, int out, int in) {
        lin.weight.resize(out, in);
        lin.bias.resize(out);
        rng.fill_normal(lin.weight, 0.4);
        rng.fill_normal(lin.bias, 0.1);
    };
    init(block.attn.qkv, 3 * dim, dim);
    init(block.attn.out, dim, dim);
    init(block.fc, mlp, dim);
    init(block.proj, dim, mlp);
    rng.fill_normal(block.ln1.gamma, 0.1);
    block.ln1.gamma.array() += 1.0;
    rng.fill_normal(block.ln2.beta, 0.1);
    block.zero_grad();

    Mat<double> x(dim, tokens);
    rng.fill_normal(x, 1.0);
    Mat<double> proj(dim, tokens);
    rng.fill_normal(proj, 1.0);

    auto loss = [&]() { return (block.forward(x).array() * proj.array()).sum(); };

    nn::TransformerBlock<double>::Cache cache;
    block.forward(x, &cache);
    const auto grad_x = block.backward(cache, proj);

    GaussianRng pick(19);
    auto sample_check = [&](Mat<double>& w, Mat<double>& gw) {
        for (int trial = 0; trial < 6; ++trial) {
            const auto i = Eigen::Index(pick.uniform() * w.size());
            check_close(gw.data()[i], fd_gradient(&w.data()[i], loss), 2e-5);
        }
    };
    sample_check(block.attn.qkv.weight, block.attn.qkv.grad_weight);
    sample_check(block.attn.out.weight, block.attn.out.grad_weight);
    sample_check(block.fc.weight, block.fc.grad_weight);
    sample_check(block.proj.weight, block.proj.grad_weight);
    check_close(block.ln1.grad_gamma[2], fd_gradient(&block.ln1.gamma[2], loss), 2e-5);
    check_close(block.attn.qkv.grad_bias[3], fd_gradient(&block.attn.qkv.bias[3], loss), 2e-5);
    for (int trial = 0; trial < 8; ++trial) {
        const auto i = Eigen::Index(pick.uniform() * x.size());
        check_close(grad_x.data()[i], fd_gradient(&x.data()[i], loss), 2e-5);
    }
}

TEST_CASE("adam takes a descent step and respects the learning rate") {
    Vec<double> w(2);
    w << 5.0, -3.0;
    nn::Adam<double> adam;
    // minimize 0.5*|w|^2, gradient = w
    for (int step = 0; step < 200; ++step) {
        Vec<double> g = w;
        adam.step({{w.data(), 2}}, {{g.data(), 2}}, 0.1);
    }
    CHECK(std::abs(w[0]) < 0.5);
    CHECK(std::abs(w[1]) < 0.5);
    CHECK(adam.step_count() == 200);
}

TEST_CASE("quick gelu derivative matches finite differences") {
    Mat<double> x(2, 3);
    x << -2.0, -0.3, 0.0, 0.4, 1.2, 3.0;
    Mat<double> ones = Mat<double>::Ones(2, 3);
    const auto grad = nn::quick_gelu_backward(x, ones);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        auto loss = [&]() { return nn::quick_gelu(x).sum(); };
        check_close(grad.data()[i], fd_gradient(&x.data()[i], loss));
    }
}
