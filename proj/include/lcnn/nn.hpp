#pragma once

#include <cstddef>
#include <vector>

#include "lcnn/tensor.hpp"

// Dense layer kernels for the fixed topology: 3x3 same convolution, batch
// normalization, average pooling, dense, tanh, ReLU and softmax. Layout is
// channels-first row-major. Spatial ops accept a single sample [C,H,W] or a
// batch [N,C,H,W] and return the same rank they were given.
namespace lcnn::nn {

inline constexpr double kBatchNormEps = 1e-3;
inline constexpr double kBatchNormMomentum = 0.99;

struct PoolWindow {
    std::size_t height = 1;
    std::size_t width = 1;
    friend bool operator==(const PoolWindow&, const PoolWindow&) = default;
};

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias);

template <typename T>
struct ConvGrads {
    BasicTensor<T> input;
    BasicTensor<T> weights;
    BasicTensor<T> bias;
};

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out);

// Inference form: running statistics.
template <typename T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                                 const BasicTensor<T>& beta, const BasicTensor<T>& mean,
                                 const BasicTensor<T>& var, T eps);

// Saved by the training form for its backward pass.
template <typename T>
struct BatchNormBatchState {
    BasicTensor<T> normalized;   // (x - mu) / sqrt(var + eps)
    std::vector<T> inv_std;      // per channel
    std::vector<T> batch_mean;   // per channel
    std::vector<T> batch_var;    // biased, per channel
};

// Training form: normalizes with the statistics of the batch (over N, H, W).
template <typename T>
BasicTensor<T> batchnorm_train_forward(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                                       const BasicTensor<T>& beta, T eps,
                                       BatchNormBatchState<T>& state);

template <typename T>
struct BatchNormGrads {
    BasicTensor<T> input;
    BasicTensor<T> gamma;
    BasicTensor<T> beta;
};

template <typename T>
BatchNormGrads<T> batchnorm_train_backward(const BatchNormBatchState<T>& state,
                                           const BasicTensor<T>& gamma,
                                           const BasicTensor<T>& grad_out);

template <typename T>
BatchNormGrads<T> batchnorm_eval_backward(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                                          const BasicTensor<T>& mean, const BasicTensor<T>& var,
                                          T eps, const BasicTensor<T>& grad_out);

// Stride equals the window; trailing rows/columns that do not fill a window are dropped.
template <typename T>
BasicTensor<T> avgpool_forward(const BasicTensor<T>& input, PoolWindow window);

template <typename T>
BasicTensor<T> avgpool_backward(const Shape& input_shape, PoolWindow window,
                                const BasicTensor<T>& grad_out);

// input [n] or [N,n] (higher ranks are flattened per sample); weights [m,n].
template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& bias);

template <typename T>
struct DenseGrads {
    BasicTensor<T> input;
    BasicTensor<T> weights;
    BasicTensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> tanh_forward(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> tanh_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out);

// Softmax over the last axis with max subtraction.
template <typename T>
BasicTensor<T> softmax_forward(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out);

}  // namespace lcnn::nn
