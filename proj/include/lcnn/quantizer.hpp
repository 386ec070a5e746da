#pragma once

#include "lcnn/model.hpp"
#include "lcnn/quantized_tensor.hpp"

// Per-tensor asymmetric affine INT8 quantization of network parameters.
// Compute stays in float: int8 networks are dequantized before inference.
namespace lcnn {

double round_half_even(double x);

// Range is widened to include 0. scale = (max-min)/255, stored as the nearest
// float not below the exact value; zero_point = round_half_even(-min/scale) - 128.
// A constant range [c,c] with c != 0 gets scale |c| and zero_point 0 so c is a
// grid point; [0,0] gets scale 1, zero_point 0. Non-finite bounds or
// min > max raise NumericError.
QuantParams compute_qparams(double min_val, double max_val);

// Nearest grid point to x (ties to the even code), clamped to [-128,127].
std::int8_t quantize_value(float x, QuantParams qp);

QuantizedTensor quantize_tensor(const Tensor& t);
QuantizedTensor quantize_tensor(const Tensor& t, QuantParams qp);
Tensor dequantize(const QuantizedTensor& q);

// Every weight, bias and batch-norm tensor quantized per tensor. Throws
// PrecisionError if the network is already int8.
Network quantize_model(const Network& net);

// Float network whose parameters are the dequantized int8 values.
Network dequantize_model(const Network& net);

// Inference on int8 networks (dequantize, then float forward).
Tensor infer(const Network& net, const Tensor& features);
Tensor infer_batch(const Network& net, const Tensor& batch);

// Class probabilities [N,n_classes] for a network of either precision.
Tensor predict_batch(const Network& net, const Tensor& batch);

}  // namespace lcnn
