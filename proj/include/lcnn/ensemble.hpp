#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lcnn/dataset.hpp"
#include "lcnn/model.hpp"

namespace lcnn {

// Elementwise mean of probability vectors [K] or batches [N,K], accumulated in
// double. Empty input raises InputError; mismatched shapes raise ShapeError.
Tensor aggregate(std::span<const Tensor> predictions);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const float> values);

struct Evaluation {
    double accuracy = 0.0;  // percent
    double log_loss = 0.0;  // mean cross-entropy
    std::size_t count = 0;

    friend bool operator==(const Evaluation&, const Evaluation&) = default;
};

// Scores probabilities [N,K] against N labels.
Evaluation score(const Tensor& probabilities, std::span<const std::size_t> labels);

// Class probabilities [N,K] over the whole dataset, in chunks of `batch_size`.
Tensor predict_dataset(const Network& net, const LabeledDataset& data, std::size_t batch_size = 64);

Evaluation evaluate(const Network& net, const LabeledDataset& data);

// Members' probabilities averaged per example, then scored.
Evaluation evaluate(std::span<const Network> members, const LabeledDataset& data);

// Same, from per-member predictions already computed on `data`.
Evaluation evaluate_predictions(std::span<const Tensor> member_predictions, std::span<const std::size_t> labels);

}  // namespace lcnn
