#include "lcnn/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lcnn {

namespace {

constexpr std::int32_t kQMin = -128;
constexpr std::int32_t kQMax = 127;

// Smallest float >= x (x positive and finite).
float float_at_least(double x) {
    float f = static_cast<float>(x);
    if (static_cast<double>(f) < x) f = std::nextafter(f, std::numeric_limits<float>::infinity());
    return f;
}

}  // namespace

double round_half_even(double x) { return std::nearbyint(x); }

QuantParams compute_qparams(double min_val, double max_val) {
    if (!std::isfinite(min_val) || !std::isfinite(max_val)) {
        throw NumericError("compute_qparams: non-finite range bounds");
    }
    if (min_val > max_val) throw NumericError("compute_qparams: min > max");
    if (min_val == max_val) {
        if (min_val == 0.0) return {1.0f, 0};
        const float scale = static_cast<float>(std::abs(min_val));
        if (!(scale > 0.0f) || static_cast<double>(scale) != std::abs(min_val)) {
            // Not representable as a float scale; fall back to the general rule.
            return compute_qparams(std::min(min_val, 0.0), std::max(max_val, 0.0));
        }
        return {scale, 0};
    }
    const double lo = std::min(min_val, 0.0);
    const double hi = std::max(max_val, 0.0);
    const float scale = float_at_least((hi - lo) / 255.0);
    if (!(scale > 0.0f) || !std::isfinite(scale)) throw NumericError("compute_qparams: range not representable");
    const double zp = round_half_even(-lo / static_cast<double>(scale)) - 128.0;
    return {scale, static_cast<std::int32_t>(std::clamp(zp, static_cast<double>(kQMin), static_cast<double>(kQMax)))};
}

std::int8_t quantize_value(float x, QuantParams qp) {
    const double s = qp.scale;
    const double xd = x;
    double k = round_half_even(xd / s);  // grid index relative to the zero point
    // The division rounds; settle the nearest index from the exact residual.
    for (int i = 0; i < 2; ++i) {
        const double e = xd - k * s;
        const bool odd = std::fmod(k, 2.0) != 0.0;
        if (e > s / 2 || (e == s / 2 && odd)) {
            k += 1;
        } else if (e < -s / 2 || (e == -s / 2 && odd)) {
            k -= 1;
        } else {
            break;
        }
    }
    const double q = std::clamp(k + qp.zero_point, static_cast<double>(kQMin), static_cast<double>(kQMax));
    return static_cast<std::int8_t>(q);
}

QuantizedTensor quantize_tensor(const Tensor& t, QuantParams qp) {
    if (!(qp.scale > 0.0f) || qp.zero_point < kQMin || qp.zero_point > kQMax) {
        throw NumericError("quantize_tensor: invalid quantization parameters");
    }
    QuantizedTensor q;
    q.shape = t.shape();
    q.qparams = qp;
    q.data.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) q.data[i] = quantize_value(t[i], qp);
    return q;
}

QuantizedTensor quantize_tensor(const Tensor& t) {
    if (t.empty()) throw ShapeError("quantize_tensor: empty tensor");
    if (!t.all_finite()) throw NumericError("quantize_tensor: tensor has non-finite values");
    const auto [mn, mx] = std::minmax_element(t.begin(), t.end());
    return quantize_tensor(t, compute_qparams(*mn, *mx));
}

Tensor dequantize(const QuantizedTensor& q) {
    Tensor t(q.shape);
    for (std::size_t i = 0; i < q.size(); ++i) t[i] = static_cast<float>(q.dequantized(i));
    return t;
}

Network quantize_model(const Network& net) {
    if (net.precision != Precision::Float32) {
        throw PrecisionError("quantize_model: network '" + net.name + "' is already int8");
    }
    Network q;
    q.config = net.config;
    q.name = net.name;
    q.precision = Precision::Int8;
    q.meta = net.meta;
    q.meta["quantization"] = "int8 per-tensor affine, round half to even";
    q.layers.reserve(net.layers.size());
    q.quantized.resize(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer<float>& layer = net.layers[i];
        q.layers.push_back({layer.name, layer.spec, {}});
        for (const Tensor& p : layer.params) q.quantized[i].push_back(quantize_tensor(p));
    }
    return q;
}

Network dequantize_model(const Network& net) {
    if (net.precision != Precision::Int8) throw PrecisionError("dequantize_model: network is not int8");
    if (net.quantized.size() != net.layers.size()) throw StructuralError("dequantize_model: missing int8 tensors");
    Network f;
    f.config = net.config;
    f.name = net.name;
    f.meta = net.meta;
    f.layers = net.layers;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        f.layers[i].params.clear();
        for (const QuantizedTensor& q : net.quantized[i]) f.layers[i].params.push_back(dequantize(q));
    }
    return f;
}

Tensor infer(const Network& net, const Tensor& features) { return forward(dequantize_model(net), features); }

Tensor infer_batch(const Network& net, const Tensor& batch) { return forward_batch(dequantize_model(net), batch); }

Tensor predict_batch(const Network& net, const Tensor& batch) {
    return net.precision == Precision::Int8 ? infer_batch(net, batch) : forward_batch(net, batch);
}

}  // namespace lcnn
