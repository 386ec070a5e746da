#include <gtest/gtest.h>

#include <cmath>

#include "lcnn/complexity.hpp"
#include "lcnn/quantizer.hpp"
#include "lcnn/rng.hpp"

namespace lcnn {
namespace {

TEST(RoundHalfEven, Ties) {
    EXPECT_EQ(round_half_even(0.5), 0.0);
    EXPECT_EQ(round_half_even(1.5), 2.0);
    EXPECT_EQ(round_half_even(2.5), 2.0);
    EXPECT_EQ(round_half_even(-0.5), 0.0);
    EXPECT_EQ(round_half_even(-1.5), -2.0);
    EXPECT_EQ(round_half_even(127.5), 128.0);
}

TEST(ComputeQParams, SymmetricUnitRange) {
    const QuantParams qp = compute_qparams(-1.0, 1.0);
    EXPECT_NEAR(qp.scale, 2.0 / 255.0, 1e-9);
    EXPECT_GE(static_cast<double>(qp.scale), 2.0 / 255.0);
    EXPECT_TRUE(qp.zero_point == -1 || qp.zero_point == 0);
    // Oracle: -min/scale with the stored scale, rounded half to even.
    EXPECT_EQ(qp.zero_point, static_cast<int>(std::nearbyint(1.0 / qp.scale)) - 128);
}

TEST(ComputeQParams, RangeOfTwoFiftyFiveStepsRecoversStep) {
    for (float s : {0.5f, 0.25f, 1.0f / 1024.0f, 3.0f}) {
        const QuantParams qp = compute_qparams(0.0, 255.0 * s);
        EXPECT_EQ(qp.scale, s);
        EXPECT_EQ(qp.zero_point, -128);
    }
}

TEST(ComputeQParams, RangeWidenedToIncludeZero) {
    const QuantParams qp = compute_qparams(2.0, 4.0);  // treated as [0, 4]
    EXPECT_NEAR(qp.scale, 4.0 / 255.0, 1e-9);
    EXPECT_EQ(qp.zero_point, -128);
    const QuantParams neg = compute_qparams(-4.0, -2.0);  // [-4, 0]
    EXPECT_EQ(neg.zero_point, 127);
}

TEST(ComputeQParams, DegenerateRanges) {
    EXPECT_EQ(compute_qparams(0.0, 0.0), (QuantParams{1.0f, 0}));
    for (float c : {1.0f, -0.3f, 7.25f, 1e-8f}) {
        const Tensor t(Shape{5}, c);
        const QuantizedTensor q = quantize_tensor(t);
        for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(q.dequantized(i), static_cast<double>(c));
        EXPECT_EQ(dequantize(q), t);
    }
}

TEST(ComputeQParams, NonFiniteIsNumericError) {
    EXPECT_THROW(compute_qparams(-INFINITY, 1.0), NumericError);
    EXPECT_THROW(compute_qparams(0.0, NAN), NumericError);
    EXPECT_THROW(compute_qparams(1.0, -1.0), NumericError);
}

TEST(Quantize, GridValuesAreFixedPoints) {
    const QuantParams qp = compute_qparams(-1.0, 1.0);
    Tensor t(Shape{256});
    for (int q = -128; q < 128; ++q) t[q + 128] = static_cast<float>((q - qp.zero_point) * static_cast<double>(qp.scale));
    const QuantizedTensor qt = quantize_tensor(t, qp);
    for (int q = -128; q < 128; ++q) EXPECT_EQ(qt.data[q + 128], q);
    EXPECT_EQ(dequantize(qt), t);
}

TEST(Quantize, RoundTripErrorWithinHalfStep) {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const double lo = rng.uniform(-3.0, 0.5);
        const double hi = lo + rng.uniform(1e-3, 4.0);
        Tensor t(Shape{5000});
        for (float& v : t) v = static_cast<float>(rng.uniform(lo, hi));
        const QuantizedTensor q = quantize_tensor(t);
        const double half = static_cast<double>(q.qparams.scale) / 2.0;
        for (std::size_t i = 0; i < t.size(); ++i) EXPECT_LE(std::abs(t[i] - q.dequantized(i)), half);
    }
}

TEST(Quantize, ChoosesNearestGridPoint) {
    Rng rng(78);
    Tensor t(Shape{2000});
    for (float& v : t) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    const QuantizedTensor q = quantize_tensor(t);
    const double s = q.qparams.scale;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double err = std::abs(t[i] - q.dequantized(i));
        for (int d : {-1, 1}) {
            const int other = q.data[i] + d;
            if (other < -128 || other > 127) continue;
            EXPECT_LE(err, std::abs(t[i] - (other - q.qparams.zero_point) * s));
        }
    }
}

TEST(Quantize, ZeroIsExact) {
    Rng rng(79);
    for (int trial = 0; trial < 50; ++trial) {
        const QuantParams qp = compute_qparams(rng.uniform(-5.0, 0.0), rng.uniform(0.0, 5.0));
        EXPECT_EQ((quantize_value(0.0f, qp) - qp.zero_point) * static_cast<double>(qp.scale), 0.0);
    }
}

TEST(Quantize, IdempotentOnDequantizedValues) {
    Rng rng(80);
    Tensor t(Shape{3000});
    for (float& v : t) v = static_cast<float>(rng.uniform(-0.7, 2.0));
    const QuantizedTensor q = quantize_tensor(t);
    EXPECT_EQ(quantize_tensor(dequantize(q), q.qparams).data, q.data);
}

TEST(Quantize, OutOfRangeValuesClamp) {
    const QuantParams qp = compute_qparams(-1.0, 1.0);
    EXPECT_EQ(quantize_value(100.0f, qp), 127);
    EXPECT_EQ(quantize_value(-100.0f, qp), -128);
}

TEST(QuantizeModel, PayloadIsOneBytePerParam) {
    const Network net = build(ArchConfig{}, 4);
    const Network q = quantize_model(net);
    EXPECT_EQ(q.precision, Precision::Int8);
    std::size_t bytes = 0;
    std::size_t tensors = 0;
    for (const auto& layer : q.quantized) {
        for (const auto& t : layer) {
            bytes += t.data.size();
            ++tensors;
        }
    }
    EXPECT_EQ(bytes, 14886u);
    EXPECT_EQ(tensors, 22u);
    for (const auto& layer : q.layers) EXPECT_TRUE(layer.params.empty());
}

TEST(QuantizeModel, AlreadyQuantizedIsPrecisionError) {
    const Network q = quantize_model(build(ArchConfig{}, 4));
    EXPECT_THROW(quantize_model(q), PrecisionError);
    EXPECT_THROW(forward(q, Tensor(Shape{1, 40, 51})), PrecisionError);
}

TEST(QuantizeModel, ZeroInputMatchesFloatWithinOnePercent) {
    for (std::uint64_t seed : {1, 2, 3}) {
        Network net = build(ArchConfig{}, seed);
        Rng rng(seed + 10);
        for (auto& layer : net.layers) {
            if (layer.spec.kind != LayerKind::BatchNorm) continue;
            for (float& v : layer.params[1]) v = static_cast<float>(rng.uniform(-0.5, 0.5));
            for (float& v : layer.params[2]) v = static_cast<float>(rng.uniform(-0.2, 0.2));
            for (float& v : layer.params[3]) v = static_cast<float>(rng.uniform(0.5, 2.0));
        }
        const Tensor zeros(Shape{1, 40, 51});
        const Tensor pf = forward(net, zeros);
        const Tensor pq = infer(quantize_model(net), zeros);
        for (std::size_t k = 0; k < 10; ++k) EXPECT_NEAR(pf[k], pq[k], 1e-2);
    }
}

TEST(QuantizeModel, DequantizedModelRunsFloatPath) {
    const Network net = build(ArchConfig::parse("12-12-22-100"), 6);
    const Network q = quantize_model(net);
    const Network d = dequantize_model(q);
    EXPECT_EQ(d.precision, Precision::Float32);
    EXPECT_EQ(d.config, net.config);
    Rng rng(7);
    Tensor batch(Shape{3, 1, 40, 51});
    for (float& v : batch) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    EXPECT_EQ(predict_batch(q, batch), forward_batch(d, batch));
    EXPECT_EQ(predict_batch(net, batch), forward_batch(net, batch));
}

}  // namespace
}  // namespace lcnn
