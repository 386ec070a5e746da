#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "lcnn/nn.hpp"

namespace lcnn {
namespace {

using testing::max_relative_error;
using testing::numeric_gradient;
using testing::project;
using testing::random_tensor;

constexpr double kGradTol = 1e-4;

TEST(Conv2d, ZeroInputGivesBiasPlanes) {
    Tensor input(Shape{3, 5, 7});
    Rng rng(1);
    Tensor w = random_tensor({4, 3, 3, 3}, rng).cast<float>();
    Tensor b(Shape{4});
    for (std::size_t i = 0; i < 4; ++i) b[i] = 0.5f * static_cast<float>(i) - 1.0f;
    const Tensor out = nn::conv2d_forward(input, w, b);
    ASSERT_EQ(out.shape(), (Shape{4, 5, 7}));
    for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t i = 0; i < 35; ++i) EXPECT_EQ(out[c * 35 + i], b[c]);
    }
}

TEST(Conv2d, OnesKernelOnOnesCountsCoveredCells) {
    const Tensor input(Shape{1, 3, 3}, 1.0f);
    const Tensor w(Shape{1, 1, 3, 3}, 1.0f);
    const Tensor b(Shape{1});
    const Tensor out = nn::conv2d_forward(input, w, b);
    EXPECT_EQ(out[4], 9.0f);
    EXPECT_EQ(out[0], 4.0f);
    EXPECT_EQ(out[2], 4.0f);
    EXPECT_EQ(out[6], 4.0f);
    EXPECT_EQ(out[8], 4.0f);
    EXPECT_EQ(out[1], 6.0f);
}

TEST(Conv2d, PreservesSpatialShape) {
    const Tensor input(Shape{1, 40, 51}, 0.25f);
    const Tensor w(Shape{16, 1, 3, 3}, 0.1f);
    const Tensor out = nn::conv2d_forward(input, w, Tensor(Shape{16}));
    EXPECT_EQ(out.shape(), (Shape{16, 40, 51}));
    const Tensor w2(Shape{16, 16, 3, 3}, 0.1f);
    EXPECT_EQ(nn::conv2d_forward(out, w2, Tensor(Shape{16})).shape(), (Shape{16, 40, 51}));
}

TEST(Conv2d, ChannelMismatchIsShapeError) {
    const Tensor input(Shape{2, 4, 4});
    EXPECT_THROW(nn::conv2d_forward(input, Tensor(Shape{1, 3, 3, 3}), Tensor(Shape{1})), ShapeError);
    EXPECT_THROW(nn::conv2d_forward(input, Tensor(Shape{1, 2, 5, 5}), Tensor(Shape{1})), ShapeError);
}

TEST(Conv2d, MatchesDirectConvolution) {
    Rng rng(7);
    const TensorD x = random_tensor({2, 3, 5, 6}, rng);
    const TensorD w = random_tensor({4, 3, 3, 3}, rng);
    const TensorD b = random_tensor({4}, rng);
    const TensorD y = nn::conv2d_forward(x, w, b);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t o = 0; o < 4; ++o)
            for (std::size_t r = 0; r < 5; ++r)
                for (std::size_t c = 0; c < 6; ++c) {
                    double acc = b[o];
                    for (std::size_t i = 0; i < 3; ++i)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                const int rr = static_cast<int>(r) + dy;
                                const int cc = static_cast<int>(c) + dx;
                                if (rr < 0 || rr >= 5 || cc < 0 || cc >= 6) continue;
                                acc += w[((o * 3 + i) * 3 + (dy + 1)) * 3 + (dx + 1)] *
                                       x[((n * 3 + i) * 5 + rr) * 6 + cc];
                            }
                    EXPECT_NEAR(y[((n * 4 + o) * 5 + r) * 6 + c], acc, 1e-12);
                }
}

TEST(BatchNorm, IdentityParameters) {
    Rng rng(3);
    const Tensor x = random_tensor({3, 4, 5}, rng).cast<float>();
    const Tensor ones(Shape{3}, 1.0f);
    const Tensor zeros(Shape{3});
    EXPECT_EQ(nn::batchnorm_forward(x, ones, zeros, zeros, ones, 0.0f), x);
}

TEST(BatchNorm, NonPositiveVarianceIsNumericError) {
    const Tensor x(Shape{2, 2, 2});
    const Tensor ones(Shape{2}, 1.0f);
    const Tensor zeros(Shape{2});
    EXPECT_THROW(nn::batchnorm_forward(x, ones, zeros, zeros, zeros, 0.0f), NumericError);
}

TEST(BatchNorm, ConstantInputNormalizesToBeta) {
    Tensor x(Shape{4, 2, 3, 3});
    for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t i = 0; i < 9; ++i) {
            x[(n * 2 + 0) * 9 + i] = 2.5f;
            x[(n * 2 + 1) * 9 + i] = -7.0f;
        }
    const Tensor gamma(Shape{2}, 3.0f);
    Tensor beta(Shape{2});
    beta[0] = 0.25f;
    beta[1] = -1.0f;
    nn::BatchNormBatchState<float> state;
    const Tensor y = nn::batchnorm_train_forward(x, gamma, beta, 1e-3f, state);
    for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t i = 0; i < 9; ++i) {
            EXPECT_EQ(y[(n * 2 + 0) * 9 + i], 0.25f);
            EXPECT_EQ(y[(n * 2 + 1) * 9 + i], -1.0f);
        }
}

TEST(AvgPool, NetworkShapes) {
    EXPECT_EQ(nn::avgpool_forward(Tensor(Shape{16, 40, 51}), {5, 5}).shape(), (Shape{16, 8, 10}));
    EXPECT_EQ(nn::avgpool_forward(Tensor(Shape{32, 8, 10}), {4, 10}).shape(), (Shape{32, 2, 1}));
    EXPECT_EQ(nn::avgpool_forward(Tensor(Shape{7, 32, 8, 10}), {4, 10}).shape(), (Shape{7, 32, 2, 1}));
}

TEST(AvgPool, WindowLargerThanInputIsShapeError) {
    EXPECT_THROW(nn::avgpool_forward(Tensor(Shape{1, 3, 20}), {4, 10}), ShapeError);
}

TEST(AvgPool, ConstantSurvivesPoolThenReplicate) {
    const float c = 0.3f;
    const Tensor x(Shape{2, 40, 51}, c);
    const Tensor y = nn::avgpool_forward(x, {5, 5});
    for (float v : y) EXPECT_EQ(v, c);
    // Upsample by replication over the covered region.
    for (std::size_t ch = 0; ch < 2; ++ch)
        for (std::size_t r = 0; r < 40; ++r)
            for (std::size_t col = 0; col < 50; ++col) {
                EXPECT_EQ(y[(ch * 8 + r / 5) * 10 + col / 5], x[(ch * 40 + r) * 51 + col]);
            }
}

TEST(AvgPool, DropsIncompleteWindows) {
    Tensor x(Shape{1, 5, 6});
    std::iota(x.begin(), x.end(), 0.0f);
    const Tensor y = nn::avgpool_forward(x, {5, 5});
    ASSERT_EQ(y.shape(), (Shape{1, 1, 1}));
    double sum = 0.0;
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 5; ++c) sum += x[r * 6 + c];
    EXPECT_FLOAT_EQ(y[0], static_cast<float>(sum / 25.0));
}

TEST(Dense, IdentityWeights) {
    Tensor w(Shape{5, 5});
    for (std::size_t i = 0; i < 5; ++i) w[i * 5 + i] = 1.0f;
    Rng rng(5);
    const Tensor x = random_tensor({5}, rng).cast<float>();
    EXPECT_EQ(nn::dense_forward(x, w, Tensor(Shape{5})), x);
}

TEST(Dense, NetworkShapeAndMismatch) {
    const Tensor x(Shape{64}, 0.5f);
    EXPECT_EQ(nn::dense_forward(x, Tensor(Shape{100, 64}), Tensor(Shape{100})).shape(), (Shape{100}));
    EXPECT_THROW(nn::dense_forward(Tensor(Shape{63}), Tensor(Shape{100, 64}), Tensor(Shape{100})), ShapeError);
}

TEST(Activations, BasicValues) {
    Tensor x(Shape{2});
    x[0] = -3.0f;
    x[1] = 2.0f;
    const Tensor r = nn::relu_forward(x);
    EXPECT_EQ(r[0], 0.0f);
    EXPECT_EQ(r[1], 2.0f);

    const Tensor p = nn::softmax_forward(Tensor(Shape{10}, 1.7f));
    for (float v : p) EXPECT_NEAR(v, 0.1f, 1e-7);
}

TEST(Activations, SoftmaxSimplexAndShiftInvariance) {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        // Dyadic logits and an integer shift keep x + k exact in float.
        Tensor logits = random_tensor({10}, rng, -30.0, 30.0).cast<float>();
        for (float& v : logits) v = std::round(v * 1024.0f) / 1024.0f;
        const Tensor p = nn::softmax_forward(logits);
        double sum = 0.0;
        for (float v : p) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
            sum += v;
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
        Tensor shifted = logits;
        const float k = std::round(static_cast<float>(rng.uniform(-50.0, 50.0)));
        for (float& v : shifted) v += k;
        const Tensor q = nn::softmax_forward(shifted);
        for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(p[i], q[i], 1e-6);
    }
}

TEST(Purity, RepeatedCallsAreBitIdentical) {
    Rng rng(13);
    const Tensor x = random_tensor({2, 3, 10, 12}, rng).cast<float>();
    const Tensor w = random_tensor({5, 3, 3, 3}, rng).cast<float>();
    const Tensor b = random_tensor({5}, rng).cast<float>();
    EXPECT_EQ(nn::conv2d_forward(x, w, b), nn::conv2d_forward(x, w, b));
    const Tensor g = random_tensor({5}, rng).cast<float>();
    const Tensor m = random_tensor({5}, rng).cast<float>();
    const Tensor v = random_tensor({5}, rng, 0.5, 2.0).cast<float>();
    const Tensor y = nn::conv2d_forward(x, w, b);
    EXPECT_EQ(nn::batchnorm_forward(y, g, b, m, v, 1e-3f), nn::batchnorm_forward(y, g, b, m, v, 1e-3f));
    EXPECT_EQ(nn::avgpool_forward(y, {5, 6}), nn::avgpool_forward(y, {5, 6}));
}

// ---- analytic gradients against central finite differences (64-bit) ----

class LayerGradient : public ::testing::TestWithParam<int> {};

TEST_P(LayerGradient, ConvMatchesFiniteDifferences) {
    Rng rng(100 + GetParam());
    const std::size_t c_in = 1 + rng.below(16);
    const std::size_t c_out = 1 + rng.below(32);
    const std::size_t h = 1 + rng.below(8);
    const std::size_t w = 1 + rng.below(10);
    TensorD x = random_tensor({2, c_in, h, w}, rng);
    TensorD wt = random_tensor({c_out, c_in, 3, 3}, rng);
    TensorD b = random_tensor({c_out}, rng);
    const TensorD probe = random_tensor({2, c_out, h, w}, rng);
    const auto loss = [&] { return project(nn::conv2d_forward(x, wt, b), probe); };
    const auto grads = nn::conv2d_backward(x, wt, probe);
    EXPECT_LT(max_relative_error(grads.input, numeric_gradient(x, loss)), kGradTol);
    EXPECT_LT(max_relative_error(grads.weights, numeric_gradient(wt, loss)), kGradTol);
    EXPECT_LT(max_relative_error(grads.bias, numeric_gradient(b, loss)), kGradTol);
}

TEST_P(LayerGradient, BatchNormTrainingMatchesFiniteDifferences) {
    Rng rng(200 + GetParam());
    const std::size_t c = 1 + rng.below(8);
    TensorD x = random_tensor({3, c, 1 + rng.below(4), 2 + rng.below(4)}, rng, -2.0, 3.0);
    TensorD gamma = random_tensor({c}, rng, 0.5, 1.5);
    TensorD beta = random_tensor({c}, rng);
    const TensorD probe = random_tensor(x.shape(), rng);
    const auto loss = [&] {
        nn::BatchNormBatchState<double> s;
        return project(nn::batchnorm_train_forward(x, gamma, beta, 1e-3, s), probe);
    };
    nn::BatchNormBatchState<double> state;
    nn::batchnorm_train_forward(x, gamma, beta, 1e-3, state);
    const auto grads = nn::batchnorm_train_backward(state, gamma, probe);
    EXPECT_LT(max_relative_error(grads.input, numeric_gradient(x, loss)), kGradTol);
    EXPECT_LT(max_relative_error(grads.gamma, numeric_gradient(gamma, loss)), kGradTol);
    EXPECT_LT(max_relative_error(grads.beta, numeric_gradient(beta, loss)), kGradTol);
}

TEST_P(LayerGradient, BatchNormInferenceMatchesFiniteDifferences) {
    Rng rng(300 + GetParam());
    const std::size_t c = 1 + rng.below(8);
    TensorD x = random_tensor({2, c, 3, 4}, rng);
    TensorD gamma = random_tensor({c}, rng, 0.5, 1.5);
    const TensorD beta = random_tensor({c}, rng);
    const TensorD mean = random_tensor({c}, rng);
    const TensorD var = random_tensor({c}, rng, 0.2, 2.0);
    const TensorD probe = random_tensor(x.shape(), rng);
    const auto loss = [&] { return project(nn::batchnorm_forward(x, gamma, beta, mean, var, 1e-3), probe); };
    const auto grads = nn::batchnorm_eval_backward(x, gamma, mean, var, 1e-3, probe);
    EXPECT_LT(max_relative_error(grads.input, numeric_gradient(x, loss)), kGradTol);
    EXPECT_LT(max_relative_error(grads.gamma, numeric_gradient(gamma, loss)), kGradTol);
}

TEST_P(LayerGradient, PoolDenseActivationsMatchFiniteDifferences) {
    Rng rng(400 + GetParam());
    {
        const nn::PoolWindow win = GetParam() % 2 ? nn::PoolWindow{5, 5} : nn::PoolWindow{4, 10};
        TensorD x = random_tensor({2, 1 + rng.below(4), 8 + rng.below(5), 10 + rng.below(5)}, rng);
        const TensorD y0 = nn::avgpool_forward(x, win);
        const TensorD probe = random_tensor(y0.shape(), rng);
        const auto loss = [&] { return project(nn::avgpool_forward(x, win), probe); };
        EXPECT_LT(max_relative_error(nn::avgpool_backward(x.shape(), win, probe), numeric_gradient(x, loss)),
                  kGradTol);
    }
    {
        const std::size_t n = 1 + rng.below(64);
        const std::size_t m = 1 + rng.below(100);
        TensorD x = random_tensor({3, n}, rng);
        TensorD w = random_tensor({m, n}, rng);
        TensorD b = random_tensor({m}, rng);
        const TensorD probe = random_tensor({3, m}, rng);
        const auto loss = [&] { return project(nn::dense_forward(x, w, b), probe); };
        const auto grads = nn::dense_backward(x, w, probe);
        EXPECT_LT(max_relative_error(grads.input, numeric_gradient(x, loss)), kGradTol);
        EXPECT_LT(max_relative_error(grads.weights, numeric_gradient(w, loss)), kGradTol);
        EXPECT_LT(max_relative_error(grads.bias, numeric_gradient(b, loss)), kGradTol);
    }
    {
        TensorD x = random_tensor({4, 10}, rng, -3.0, 3.0);
        const TensorD probe = random_tensor(x.shape(), rng);
        const auto tanh_loss = [&] { return project(nn::tanh_forward(x), probe); };
        EXPECT_LT(max_relative_error(nn::tanh_backward(nn::tanh_forward(x), probe), numeric_gradient(x, tanh_loss)),
                  kGradTol);
        const auto softmax_loss = [&] { return project(nn::softmax_forward(x), probe); };
        EXPECT_LT(max_relative_error(nn::softmax_backward(nn::softmax_forward(x), probe),
                                     numeric_gradient(x, softmax_loss)),
                  kGradTol);
        // Keep ReLU inputs away from the kink so the difference quotient is exact.
        for (double& v : x) v = v >= 0 ? v + 0.01 : v - 0.01;
        const auto relu_loss = [&] { return project(nn::relu_forward(x), probe); };
        EXPECT_LT(max_relative_error(nn::relu_backward(x, probe), numeric_gradient(x, relu_loss)), kGradTol);
    }
}

INSTANTIATE_TEST_SUITE_P(RandomShapes, LayerGradient, ::testing::Range(0, 6));

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
    Rng rng(9);
    const TensorD x = random_tensor({1, 2, 4, 4}, rng);
    const TensorD w = random_tensor({3, 2, 3, 3}, rng);
    const auto g = nn::conv2d_backward(x, w, TensorD(Shape{1, 3, 4, 4}));
    for (double v : g.weights) EXPECT_EQ(v, 0.0);
    for (double v : g.bias) EXPECT_EQ(v, 0.0);
    for (double v : g.input) EXPECT_EQ(v, 0.0);
}

TEST(Backward, MissingCacheIsStateError) {
    nn::BatchNormBatchState<float> empty;
    EXPECT_THROW(nn::batchnorm_train_backward(empty, Tensor(Shape{1}), Tensor(Shape{1, 1, 1})), StateError);
}

}  // namespace
}  // namespace lcnn
