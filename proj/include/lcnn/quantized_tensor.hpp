#pragma once

#include <cstdint>
#include <vector>

#include "lcnn/tensor.hpp"

namespace lcnn {

// Affine int8 code: real = (q - zero_point) * scale.
struct QuantParams {
    float scale = 1.0f;
    std::int32_t zero_point = 0;
    friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

struct QuantizedTensor {
    Shape shape;
    std::vector<std::int8_t> data;
    QuantParams qparams;

    std::size_t size() const noexcept { return data.size(); }

    // Exact real value of element i (the product fits a double without rounding).
    double dequantized(std::size_t i) const {
        return static_cast<double>(static_cast<std::int32_t>(data[i]) - qparams.zero_point) *
               static_cast<double>(qparams.scale);
    }

    friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

}  // namespace lcnn
