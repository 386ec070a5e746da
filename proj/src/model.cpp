#include "lcnn/model.hpp"

#include <charconv>
#include <cmath>

#include "lcnn/error.hpp"
#include "lcnn/rng.hpp"

namespace lcnn {

ArchConfig ArchConfig::parse(std::string_view notation) {
    ArchConfig config;
    std::size_t values[4] = {};
    std::size_t count = 0;
    std::size_t pos = 0;
    while (pos <= notation.size()) {
        const std::size_t end = std::min(notation.find('-', pos), notation.size());
        const std::string_view field = notation.substr(pos, end - pos);
        if (count == 4 || field.empty()) {
            throw ConfigError("architecture must be written c1-c2-c3-dense, got '" + std::string(notation) + "'");
        }
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc{} || ptr != field.data() + field.size()) {
            throw ConfigError("architecture field '" + std::string(field) + "' is not a count");
        }
        values[count++] = v;
        pos = end + 1;
    }
    if (count != 4) {
        throw ConfigError("architecture must be written c1-c2-c3-dense, got '" + std::string(notation) + "'");
    }
    config.c1 = values[0];
    config.c2 = values[1];
    config.c3 = values[2];
    config.dense = values[3];
    config.validate();
    return config;
}

std::string ArchConfig::notation() const {
    return std::to_string(c1) + "-" + std::to_string(c2) + "-" + std::to_string(c3) + "-" + std::to_string(dense);
}

void ArchConfig::validate() const {
    if (c1 == 0 || c2 == 0 || c3 == 0 || dense == 0 || n_classes == 0 || in_channels == 0) {
        throw ConfigError("all layer widths must be >= 1 (" + notation() + ")");
    }
    if (pool1_height() == 0 || pool1_width() == 0) {
        throw ConfigError("input " + std::to_string(in_height) + "x" + std::to_string(in_width) +
                          " is smaller than the (5,5) pooling window");
    }
    if (pool2_height() == 0 || pool2_width() == 0) {
        throw ConfigError("pooled map " + std::to_string(pool1_height()) + "x" + std::to_string(pool1_width()) +
                          " is smaller than the (4,10) pooling window");
    }
}

std::string_view kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv3x3Same: return "conv3x3";
        case LayerKind::BatchNorm: return "batchnorm";
        case LayerKind::Tanh: return "tanh";
        case LayerKind::ReLU: return "relu";
        case LayerKind::AvgPool: return "avgpool";
        case LayerKind::Dense: return "dense";
        case LayerKind::Softmax: return "softmax";
    }
    return "unknown";
}

std::string_view precision_name(Precision p) {
    return p == Precision::Int8 ? "int8" : "float32";
}

bool is_trainable(LayerKind kind, std::size_t param_index) {
    if (kind == LayerKind::BatchNorm) return param_index < 2;
    return kind == LayerKind::Conv3x3Same || kind == LayerKind::Dense;
}

std::vector<Shape> param_shapes(const LayerSpec& spec) {
    switch (spec.kind) {
        case LayerKind::Conv3x3Same: return {{spec.out, spec.in, 3, 3}, {spec.out}};
        case LayerKind::BatchNorm: return {{spec.out}, {spec.out}, {spec.out}, {spec.out}};
        case LayerKind::Dense: return {{spec.out, spec.in}, {spec.out}};
        default: return {};
    }
}

std::vector<Layer<float>> make_layers(const ArchConfig& config) {
    config.validate();
    const auto conv = [](std::size_t in, std::size_t out) { return LayerSpec{LayerKind::Conv3x3Same, in, out, {}}; };
    const auto bn = [](std::size_t c) { return LayerSpec{LayerKind::BatchNorm, c, c, {}}; };
    const auto act = [](LayerKind k) { return LayerSpec{k, 0, 0, {}}; };
    const auto pool = [](std::size_t h, std::size_t w) { return LayerSpec{LayerKind::AvgPool, 0, 0, {h, w}}; };
    const auto dense = [](std::size_t in, std::size_t out) { return LayerSpec{LayerKind::Dense, in, out, {}}; };

    const std::vector<std::pair<std::string, LayerSpec>> stack = {
        {"C1.conv", conv(config.in_channels, config.c1)},
        {"C1.bn", bn(config.c1)},
        {"C1.tanh", act(LayerKind::Tanh)},
        {"C2.conv", conv(config.c1, config.c2)},
        {"C2.bn", bn(config.c2)},
        {"C2.relu", act(LayerKind::ReLU)},
        {"P1", pool(5, 5)},
        {"C3.conv", conv(config.c2, config.c3)},
        {"C3.bn", bn(config.c3)},
        {"C3.tanh", act(LayerKind::Tanh)},
        {"P2", pool(4, 10)},
        {"D1", dense(config.flatten_size(), config.dense)},
        {"D1.tanh", act(LayerKind::Tanh)},
        {"Classification", dense(config.dense, config.n_classes)},
        {"Classification.softmax", act(LayerKind::Softmax)},
    };

    std::vector<Layer<float>> layers;
    layers.reserve(stack.size());
    for (const auto& [name, spec] : stack) {
        Layer<float> layer{name, spec, {}};
        for (const Shape& s : param_shapes(spec)) layer.params.emplace_back(s);
        layers.push_back(std::move(layer));
    }
    return layers;
}

const Layer<float>& Network::layer(std::string_view layer_name) const { return layers.at(layer_index(layer_name)); }

Layer<float>& Network::layer(std::string_view layer_name) { return layers.at(layer_index(layer_name)); }

std::size_t Network::layer_index(std::string_view layer_name) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].name == layer_name) return i;
    }
    throw StructuralError("network has no layer named '" + std::string(layer_name) + "'");
}

std::size_t Network::stored_element_count() const {
    std::size_t n = 0;
    if (precision == Precision::Int8) {
        for (const auto& layer : quantized) {
            for (const auto& q : layer) n += q.size();
        }
    } else {
        for (const auto& layer : layers) {
            for (const auto& p : layer.params) n += p.size();
        }
    }
    return n;
}

Network build(const ArchConfig& config, std::uint64_t seed) {
    Network net;
    net.config = config;
    net.name = "Unpruned";
    net.layers = make_layers(config);
    Rng rng(seed);
    for (auto& layer : net.layers) {
        const LayerSpec& spec = layer.spec;
        if (spec.kind == LayerKind::Conv3x3Same || spec.kind == LayerKind::Dense) {
            const std::size_t receptive = spec.kind == LayerKind::Conv3x3Same ? 9 : 1;
            const double limit = std::sqrt(6.0 / static_cast<double>((spec.in + spec.out) * receptive));
            for (float& w : layer.params[0]) w = static_cast<float>(rng.uniform(-limit, limit));
        } else if (spec.kind == LayerKind::BatchNorm) {
            layer.params[0].fill(1.0f);
            layer.params[3].fill(1.0f);
        }
    }
    net.meta["init"] = "glorot_uniform";
    net.meta["seed"] = std::to_string(seed);
    return net;
}

namespace {

void require_float(const Network& net) {
    if (net.precision != Precision::Float32) {
        throw PrecisionError("network '" + net.name + "' is int8-quantized; run it through the quantizer");
    }
}

}  // namespace

Tensor forward_batch(const Network& net, const Tensor& batch) {
    require_float(net);
    if (batch.rank() != 4) throw ShapeError("forward_batch: expected [N,C,H,W], got " + shape_str(batch.shape()));
    return run_forward<float>(net.layers, batch, Mode::Inference, nullptr);
}

Tensor forward(const Network& net, const Tensor& features) {
    require_float(net);
    if (features.rank() != 3) throw ShapeError("forward: expected [C,H,W], got " + shape_str(features.shape()));
    Shape batched = features.shape();
    batched.insert(batched.begin(), 1);
    Tensor probs = run_forward<float>(net.layers, features.reshaped(batched), Mode::Inference, nullptr);
    return probs.reshaped({probs.size()});
}

template <typename T>
BasicTensor<T> run_forward(std::span<const Layer<T>> layers, const BasicTensor<T>& input, Mode mode,
                           Trace<T>* trace) {
    if (input.rank() != 4) throw ShapeError("run_forward: expected [N,C,H,W], got " + shape_str(input.shape()));
    if (trace) {
        trace->mode = mode;
        trace->layers.assign(layers.size(), {});
    }
    const T eps = static_cast<T>(nn::kBatchNormEps);
    const std::size_t batch = input.dim(0);
    BasicTensor<T> x = input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Layer<T>& layer = layers[i];
        const auto& p = layer.params;
        LayerTrace<T>* lt = trace ? &trace->layers[i] : nullptr;
        BasicTensor<T> y;
        switch (layer.spec.kind) {
            case LayerKind::Conv3x3Same: y = nn::conv2d_forward(x, p[0], p[1]); break;
            case LayerKind::BatchNorm:
                if (mode == Mode::Training) {
                    nn::BatchNormBatchState<T> local;
                    y = nn::batchnorm_train_forward(x, p[0], p[1], eps, lt ? lt->batch_norm : local);
                } else {
                    y = nn::batchnorm_forward(x, p[0], p[1], p[2], p[3], eps);
                }
                break;
            case LayerKind::Tanh: y = nn::tanh_forward(x); break;
            case LayerKind::ReLU: y = nn::relu_forward(x); break;
            case LayerKind::AvgPool: y = nn::avgpool_forward(x, layer.spec.window); break;
            case LayerKind::Dense:
                y = nn::dense_forward(x.rank() == 2 ? x : x.reshaped({batch, x.size() / batch}), p[0], p[1]);
                break;
            case LayerKind::Softmax: y = nn::softmax_forward(x); break;
        }
        if (lt) {
            if (layer.spec.kind == LayerKind::Tanh || layer.spec.kind == LayerKind::Softmax) lt->output = y;
            lt->input = std::move(x);
        }
        x = std::move(y);
    }
    return x;
}

template <typename T>
BackwardResult<T> run_backward(std::span<const Layer<T>> layers, const Trace<T>& trace,
                               const BasicTensor<T>& upstream, bool from_logits) {
    if (trace.layers.size() != layers.size()) {
        throw StateError("run_backward: no forward trace for this layer stack");
    }
    BackwardResult<T> result;
    result.params.resize(layers.size());
    const T eps = static_cast<T>(nn::kBatchNormEps);

    BasicTensor<T> g = upstream;
    std::size_t i = layers.size();
    if (from_logits && i > 0 && layers[i - 1].spec.kind == LayerKind::Softmax) --i;
    while (i-- > 0) {
        const Layer<T>& layer = layers[i];
        const LayerTrace<T>& lt = trace.layers[i];
        if (lt.input.empty()) throw StateError("run_backward: layer '" + layer.name + "' has no cached input");
        auto& pg = result.params[i];
        switch (layer.spec.kind) {
            case LayerKind::Conv3x3Same: {
                auto grads = nn::conv2d_backward(lt.input, layer.params[0], g);
                pg = {std::move(grads.weights), std::move(grads.bias)};
                g = std::move(grads.input);
                break;
            }
            case LayerKind::BatchNorm: {
                auto grads = trace.mode == Mode::Training
                                 ? nn::batchnorm_train_backward(lt.batch_norm, layer.params[0], g)
                                 : nn::batchnorm_eval_backward(lt.input, layer.params[0], layer.params[2],
                                                               layer.params[3], eps, g);
                const Shape c{layer.spec.out};
                pg = {std::move(grads.gamma), std::move(grads.beta), BasicTensor<T>(c), BasicTensor<T>(c)};
                g = std::move(grads.input);
                break;
            }
            case LayerKind::Tanh: g = nn::tanh_backward(lt.output, g.reshaped(lt.output.shape())); break;
            case LayerKind::ReLU: g = nn::relu_backward(lt.input, g.reshaped(lt.input.shape())); break;
            case LayerKind::AvgPool: g = nn::avgpool_backward(lt.input.shape(), layer.spec.window, g); break;
            case LayerKind::Dense: {
                const std::size_t n = lt.input.dim(0);
                auto grads = nn::dense_backward(lt.input.reshaped({n, lt.input.size() / n}), layer.params[0], g);
                pg = {std::move(grads.weights), std::move(grads.bias)};
                g = std::move(grads.input);
                break;
            }
            case LayerKind::Softmax: g = nn::softmax_backward(lt.output, g); break;
        }
        if (g.shape() != lt.input.shape()) g = g.reshaped(lt.input.shape());
    }
    result.input = std::move(g);
    return result;
}

template Tensor run_forward(std::span<const Layer<float>>, const Tensor&, Mode, Trace<float>*);
template TensorD run_forward(std::span<const Layer<double>>, const TensorD&, Mode, Trace<double>*);
template BackwardResult<float> run_backward(std::span<const Layer<float>>, const Trace<float>&, const Tensor&, bool);
template BackwardResult<double> run_backward(std::span<const Layer<double>>, const Trace<double>&, const TensorD&,
                                             bool);

}  // namespace lcnn
