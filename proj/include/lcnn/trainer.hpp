#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lcnn/dataset.hpp"
#include "lcnn/model.hpp"

namespace lcnn {

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t max_epochs = 1000;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t patience = 50;
    std::uint64_t seed = 0;
    // Running statistics: running = momentum * running + (1 - momentum) * batch.
    double bn_momentum = 0.99;

    // ConfigError unless batch_size >= 1, patience <= max_epochs and the
    // optimizer constants are in range.
    void validate() const;
};

// -log(p[label] + 1e-12).
double cross_entropy(std::span<const float> probabilities, std::size_t label);

// First and second moment estimates for every parameter tensor, aligned with
// Network::layers[i].params. `step` counts completed updates.
struct AdamState {
    std::vector<std::vector<Tensor>> m;
    std::vector<std::vector<Tensor>> v;
    std::size_t step = 0;
};

AdamState make_adam_state(const Network& net);

// One bias-corrected Adam update of a single tensor at step t >= 1. Shape
// mismatch raises StructuralError.
void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::size_t t, const TrainConfig& config);

// Applies one Adam step to every trainable tensor (conv/dense weights and
// biases, BN gamma and beta). BN running statistics are left alone.
void adam_step(Network& net, const ParamGrads<float>& grads, AdamState& state, const TrainConfig& config);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;  // percent

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
    Network network;  // weights of the best epoch
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;  // 0 when no epoch ran
    double best_val_loss = 0.0;
};

// Mini-batch Adam on mean cross-entropy with a seeded reshuffle per epoch.
// After each epoch the validation log-loss is computed; the network from the
// epoch with the strictly lowest value is kept, and training stops once more
// than `patience` epochs pass without improvement, or at max_epochs.
TrainResult train(const Network& init, const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const TrainConfig& config);

// Same procedure, starting from the surviving weights of a pruned network.
TrainResult finetune(const Network& pruned, const LabeledDataset& train_set, const LabeledDataset& val_set,
                     const TrainConfig& config);

// "epoch,train_loss,val_loss,val_acc" CSV.
std::string format_history(std::span<const EpochRecord> history);

}  // namespace lcnn
