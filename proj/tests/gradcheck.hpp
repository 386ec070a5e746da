#pragma once

// Central finite-difference oracle used by the gradient tests. Independent of
// the analytic backward code: it only calls the forward function it is given.

#include <algorithm>
#include <cmath>
#include <functional>

#include "lcnn/rng.hpp"
#include "lcnn/tensor.hpp"

namespace lcnn::testing {

inline constexpr double kFiniteDifferenceStep = 1e-5;

// Gradients that are structurally zero (a conv bias feeding batch-norm in
// training mode) come out of central differences as rounding noise of roughly
// eps * |loss| / h ~ 1e-11. The denominator floor keeps those comparing by
// absolute error.
inline constexpr double kRelativeErrorFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
    return std::abs(analytic - numeric) / denom;
}

inline TensorD random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    TensorD t(shape);
    for (double& v : t) v = rng.uniform(lo, hi);
    return t;
}

// d loss / d target[i] for every i, where loss() reads target.
inline TensorD numeric_gradient(TensorD& target, const std::function<double()>& loss,
                                double h = kFiniteDifferenceStep) {
    TensorD grad(target.shape());
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double saved = target[i];
        target[i] = saved + h;
        const double plus = loss();
        target[i] = saved - h;
        const double minus = loss();
        target[i] = saved;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    return grad;
}

inline double max_relative_error(const TensorD& analytic, const TensorD& numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        worst = std::max(worst, relative_error(analytic[i], numeric[i]));
    }
    return worst;
}

// Scalar probe: sum(weights * output).
inline double project(const TensorD& output, const TensorD& weights) {
    double s = 0.0;
    for (std::size_t i = 0; i < output.size(); ++i) s += output[i] * weights[i];
    return s;
}

}  // namespace lcnn::testing
