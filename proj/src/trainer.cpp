#include "lcnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lcnn/ensemble.hpp"
#include "lcnn/error.hpp"
#include "lcnn/format.hpp"
#include "lcnn/rng.hpp"

namespace lcnn {

namespace {

constexpr double kLogFloor = 1e-12;

void require_float(const Network& net, const char* op) {
    if (net.precision != Precision::Float32) throw PrecisionError(std::string(op) + ": network must be float32");
}

void update_running_stats(Network& net, const Trace<float>& trace, double momentum) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& layer = net.layers[i];
        if (layer.spec.kind != LayerKind::BatchNorm) continue;
        const auto& bn = trace.layers[i].batch_norm;
        Tensor& mean = layer.params[2];
        Tensor& var = layer.params[3];
        for (std::size_t c = 0; c < mean.size(); ++c) {
            mean[c] = static_cast<float>(momentum * mean[c] + (1.0 - momentum) * bn.batch_mean[c]);
            var[c] = static_cast<float>(momentum * var[c] + (1.0 - momentum) * bn.batch_var[c]);
        }
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    if (patience > max_epochs) {
        throw ConfigError("train: patience (" + std::to_string(patience) + ") exceeds max_epochs (" +
                          std::to_string(max_epochs) + ")");
    }
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train: Adam betas must be in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("train: Adam epsilon must be positive");
    if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) throw ConfigError("train: bn_momentum must be in [0, 1]");
}

double cross_entropy(std::span<const float> probabilities, std::size_t label) {
    if (label >= probabilities.size()) {
        throw InputError("cross_entropy: label " + std::to_string(label) + " out of range");
    }
    return -std::log(static_cast<double>(probabilities[label]) + kLogFloor);
}

AdamState make_adam_state(const Network& net) {
    require_float(net, "adam");
    AdamState s;
    for (const auto& layer : net.layers) {
        auto& m = s.m.emplace_back();
        auto& v = s.v.emplace_back();
        for (const auto& p : layer.params) {
            m.emplace_back(p.shape());
            v.emplace_back(p.shape());
        }
    }
    return s;
}

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::size_t t, const TrainConfig& config) {
    if (grad.shape() != param.shape() || m.shape() != param.shape() || v.shape() != param.shape()) {
        throw StructuralError("adam: gradient/state shape " + shape_str(grad.shape()) + " does not match parameter " +
                              shape_str(param.shape()));
    }
    if (t == 0) throw StateError("adam: step count starts at 1");
    const double b1 = config.beta1;
    const double b2 = config.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        const double mi = b1 * m[i] + (1.0 - b1) * g;
        const double vi = b2 * v[i] + (1.0 - b2) * g * g;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        const double m_hat = mi / c1;
        const double v_hat = vi / c2;
        param[i] = static_cast<float>(param[i] - config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon));
    }
}

void adam_step(Network& net, const ParamGrads<float>& grads, AdamState& state, const TrainConfig& config) {
    require_float(net, "adam");
    if (grads.size() != net.layers.size() || state.m.size() != net.layers.size()) {
        throw StructuralError("adam: " + std::to_string(grads.size()) + " gradient groups for " +
                              std::to_string(net.layers.size()) + " layers");
    }
    ++state.step;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& layer = net.layers[i];
        if (layer.params.empty()) continue;
        if (grads[i].size() != layer.params.size() || state.m[i].size() != layer.params.size()) {
            throw StructuralError("adam: layer '" + layer.name + "' gradient count mismatch");
        }
        for (std::size_t j = 0; j < layer.params.size(); ++j) {
            if (!is_trainable(layer.spec.kind, j)) continue;
            adam_update(layer.params[j], grads[i][j], state.m[i][j], state.v[i][j], state.step, config);
        }
    }
}

TrainResult train(const Network& init, const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const TrainConfig& config) {
    config.validate();
    require_float(init, "train");
    TrainResult result{init, {}, 0, 0.0};
    if (config.max_epochs == 0) return result;
    if (train_set.size() == 0) throw InputError("train: training set is empty");
    if (val_set.size() == 0) throw InputError("train: validation set is empty");

    Network net = init;
    AdamState adam = make_adam_state(net);
    Rng rng(config.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t k = net.config.n_classes;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        double loss_sum = 0.0;
        for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, order.size() - first);
            const std::span<const std::size_t> idx(order.data() + first, count);
            const Tensor x = train_set.batch(idx);
            Trace<float> trace;
            const Tensor probs = run_forward<float>(net.layers, x, Mode::Training, &trace);

            Tensor upstream = probs;
            const float inv = 1.0f / static_cast<float>(count);
            for (std::size_t n = 0; n < count; ++n) {
                const std::size_t label = train_set.labels[idx[n]];
                loss_sum += cross_entropy(std::span<const float>(probs.ptr() + n * k, k), label);
                upstream[n * k + label] -= 1.0f;
                for (std::size_t c = 0; c < k; ++c) upstream[n * k + c] *= inv;
            }
            const BackwardResult<float> grads = run_backward<float>(net.layers, trace, upstream, true);
            adam_step(net, grads.params, adam, config);
            update_running_stats(net, trace, config.bn_momentum);
        }

        const Evaluation val = evaluate(net, val_set);
        result.history.push_back({epoch, loss_sum / static_cast<double>(order.size()), val.log_loss, val.accuracy});
        if (result.best_epoch == 0 || val.log_loss < result.best_val_loss) {
            result.network = net;
            result.best_epoch = epoch;
            result.best_val_loss = val.log_loss;
            since_best = 0;
        } else if (++since_best > config.patience) {
            break;
        }
    }
    return result;
}

TrainResult finetune(const Network& pruned, const LabeledDataset& train_set, const LabeledDataset& val_set,
                     const TrainConfig& config) {
    return train(pruned, train_set, val_set, config);
}

std::string format_history(std::span<const EpochRecord> history) {
    std::string out = "epoch,train_loss,val_loss,val_acc\n";
    for (const auto& r : history) {
        out += std::to_string(r.epoch) + ',' + format_number(r.train_loss) + ',' + format_number(r.val_loss) + ',' +
               format_number(r.val_accuracy) + '\n';
    }
    return out;
}

}  // namespace lcnn
