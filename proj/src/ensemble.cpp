#include "lcnn/ensemble.hpp"

#include <algorithm>
#include <vector>

#include "lcnn/error.hpp"
#include "lcnn/quantizer.hpp"
#include "lcnn/trainer.hpp"

namespace lcnn {

Tensor aggregate(std::span<const Tensor> predictions) {
    if (predictions.empty()) throw InputError("aggregate: no predictions");
    const Shape& shape = predictions.front().shape();
    for (const auto& p : predictions) {
        if (p.shape() != shape) {
            throw ShapeError("aggregate: shape " + shape_str(p.shape()) + " differs from " + shape_str(shape));
        }
    }
    const std::size_t n = predictions.front().size();
    std::vector<double> sum(n, 0.0);
    for (const auto& p : predictions) {
        for (std::size_t i = 0; i < n; ++i) sum[i] += static_cast<double>(p[i]);
    }
    Tensor out(shape);
    const auto count = static_cast<double>(predictions.size());
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(sum[i] / count);
    return out;
}

std::size_t argmax(std::span<const float> values) {
    if (values.empty()) throw InputError("argmax: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

Evaluation score(const Tensor& probabilities, std::span<const std::size_t> labels) {
    if (probabilities.rank() != 2) throw ShapeError("score: expected [N,K], got " + shape_str(probabilities.shape()));
    const std::size_t n = probabilities.dim(0);
    const std::size_t k = probabilities.dim(1);
    if (n != labels.size()) throw ShapeError("score: " + std::to_string(n) + " predictions for " +
                                             std::to_string(labels.size()) + " labels");
    if (n == 0) throw InputError("score: empty dataset");
    std::size_t correct = 0;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::span<const float> row(probabilities.ptr() + i * k, k);
        if (labels[i] >= k) throw InputError("score: label " + std::to_string(labels[i]) + " out of range");
        if (argmax(row) == labels[i]) ++correct;
        loss += cross_entropy(row, labels[i]);
    }
    return {100.0 * static_cast<double>(correct) / static_cast<double>(n), loss / static_cast<double>(n), n};
}

Tensor predict_dataset(const Network& net, const LabeledDataset& data, std::size_t batch_size) {
    if (data.size() == 0) throw InputError("predict: empty dataset");
    if (batch_size == 0) throw ConfigError("predict: batch_size must be >= 1");
    const Network* run = &net;
    Network dequantized;
    if (net.precision == Precision::Int8) {
        dequantized = dequantize_model(net);
        run = &dequantized;
    }
    const std::size_t k = net.config.n_classes;
    Tensor out(Shape{data.size(), k});
    for (std::size_t first = 0; first < data.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, data.size() - first);
        const Tensor probs = forward_batch(*run, data.batch(first, count));
        std::copy(probs.begin(), probs.end(), out.begin() + static_cast<std::ptrdiff_t>(first * k));
    }
    return out;
}

Evaluation evaluate(const Network& net, const LabeledDataset& data) {
    const Tensor p = predict_dataset(net, data);
    return evaluate_predictions(std::span(&p, 1), data.labels);
}

Evaluation evaluate(std::span<const Network> members, const LabeledDataset& data) {
    if (members.empty()) throw InputError("evaluate: ensemble has no members");
    std::vector<Tensor> preds;
    preds.reserve(members.size());
    for (const auto& m : members) preds.push_back(predict_dataset(m, data));
    return evaluate_predictions(preds, data.labels);
}

Evaluation evaluate_predictions(std::span<const Tensor> member_predictions, std::span<const std::size_t> labels) {
    return score(aggregate(member_predictions), labels);
}

}  // namespace lcnn
