#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcnn/nn.hpp"
#include "lcnn/quantized_tensor.hpp"
#include "lcnn/tensor.hpp"

namespace lcnn {

// Channel widths of the three convolutions and the hidden dense layer,
// written "c1-c2-c3-dense" (e.g. "16-16-32-100").
struct ArchConfig {
    std::size_t c1 = 16;
    std::size_t c2 = 16;
    std::size_t c3 = 32;
    std::size_t dense = 100;
    std::size_t n_classes = 10;
    std::size_t in_channels = 1;
    std::size_t in_height = 40;
    std::size_t in_width = 51;

    static ArchConfig parse(std::string_view notation);
    std::string notation() const;

    // Throws ConfigError if a count is zero or a pooling stage empties the feature map.
    void validate() const;

    std::size_t pool1_height() const { return in_height / 5; }
    std::size_t pool1_width() const { return in_width / 5; }
    std::size_t pool2_height() const { return pool1_height() / 4; }
    std::size_t pool2_width() const { return pool1_width() / 10; }
    std::size_t flatten_size() const { return c3 * pool2_height() * pool2_width(); }

    friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

enum class LayerKind : std::uint8_t {
    Conv3x3Same = 1,
    BatchNorm = 2,
    Tanh = 3,
    ReLU = 4,
    AvgPool = 5,
    Dense = 6,
    Softmax = 7,
};

std::string_view kind_name(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::Tanh;
    std::size_t in = 0;   // conv input channels, dense input units, BN channels
    std::size_t out = 0;  // conv filters, dense output units, BN channels
    nn::PoolWindow window{};

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Parameter order: conv {weight [out,in,3,3], bias}; batch norm {gamma, beta,
// running mean, running var}; dense {weight [out,in], bias}.
template <typename T>
struct Layer {
    std::string name;
    LayerSpec spec;
    std::vector<BasicTensor<T>> params;

    friend bool operator==(const Layer&, const Layer&) = default;
};

bool is_trainable(LayerKind kind, std::size_t param_index);
std::vector<Shape> param_shapes(const LayerSpec& spec);

template <typename U, typename T>
std::vector<Layer<U>> cast_layers(std::span<const Layer<T>> layers) {
    std::vector<Layer<U>> out;
    out.reserve(layers.size());
    for (const auto& l : layers) {
        Layer<U> c{l.name, l.spec, {}};
        for (const auto& p : l.params) c.params.push_back(p.template cast<U>());
        out.push_back(std::move(c));
    }
    return out;
}

enum class Precision : std::uint8_t { Float32 = 0, Int8 = 1 };

std::string_view precision_name(Precision p);

// A built network. Float networks carry `layers[i].params`; int8 networks keep
// the same layer list with empty float params and their codes in `quantized[i]`.
struct Network {
    ArchConfig config;
    std::string name;
    Precision precision = Precision::Float32;
    std::vector<Layer<float>> layers;
    std::vector<std::vector<QuantizedTensor>> quantized;
    std::map<std::string, std::string> meta;

    const Layer<float>& layer(std::string_view layer_name) const;
    Layer<float>& layer(std::string_view layer_name);
    std::size_t layer_index(std::string_view layer_name) const;

    // Element count over every stored tensor, including BN running statistics.
    std::size_t stored_element_count() const;

    friend bool operator==(const Network&, const Network&) = default;
};

// Layer stack for `config` with correctly shaped zero parameters.
std::vector<Layer<float>> make_layers(const ArchConfig& config);

// Glorot-uniform weights, zero biases, BN gamma=1 beta=0 mean=0 var=1.
Network build(const ArchConfig& config, std::uint64_t seed);

// Inference on one feature map [1,40,51]; returns class probabilities [n_classes].
Tensor forward(const Network& net, const Tensor& features);

// Inference on a batch [N,1,40,51]; returns [N,n_classes].
Tensor forward_batch(const Network& net, const Tensor& batch);

// ---------------------------------------------------------------------------
// Layer-stack engine shared by inference, training and gradient checks.

enum class Mode { Inference, Training };

template <typename T>
struct LayerTrace {
    BasicTensor<T> input;
    BasicTensor<T> output;  // kept for tanh and softmax
    nn::BatchNormBatchState<T> batch_norm;
};

template <typename T>
struct Trace {
    Mode mode = Mode::Inference;
    std::vector<LayerTrace<T>> layers;
};

template <typename T>
using ParamGrads = std::vector<std::vector<BasicTensor<T>>>;

template <typename T>
struct BackwardResult {
    BasicTensor<T> input;
    ParamGrads<T> params;  // aligned with layers[i].params; BN running stats get zeros
};

// `input` is [N,C,H,W]. Training mode normalizes with batch statistics; the
// caller applies running-stat updates from the trace.
template <typename T>
BasicTensor<T> run_forward(std::span<const Layer<T>> layers, const BasicTensor<T>& input, Mode mode,
                           Trace<T>* trace);

// Reverse pass. If `from_logits` is set, `upstream` is the gradient with respect
// to the softmax input and the softmax layer is skipped.
template <typename T>
BackwardResult<T> run_backward(std::span<const Layer<T>> layers, const Trace<T>& trace,
                               const BasicTensor<T>& upstream, bool from_logits);

}  // namespace lcnn
