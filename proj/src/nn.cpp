#include "lcnn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <type_traits>

namespace lcnn::nn {

namespace {

struct Geometry {
    std::size_t batch;
    std::size_t channels;
    std::size_t height;
    std::size_t width;
    bool batched;

    std::size_t plane() const { return height * width; }
    std::size_t sample() const { return channels * plane(); }

    Shape shape_with(std::size_t c, std::size_t h, std::size_t w) const {
        return batched ? Shape{batch, c, h, w} : Shape{c, h, w};
    }
};

Geometry spatial_geometry(const Shape& shape, const char* op) {
    if (shape.size() == 3) return {1, shape[0], shape[1], shape[2], false};
    if (shape.size() == 4) return {shape[0], shape[1], shape[2], shape[3], true};
    throw ShapeError(std::string(op) + ": expected [C,H,W] or [N,C,H,W], got " + shape_str(shape));
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (a != b) {
        throw ShapeError(std::string(op) + ": shape " + shape_str(a) + " does not match " + shape_str(b));
    }
}

void require_vector(const Shape& s, std::size_t length, const char* op, const char* what) {
    if (s.size() != 1 || s[0] != length) {
        throw ShapeError(std::string(op) + ": " + what + " must have shape (" + std::to_string(length) +
                         "), got " + shape_str(s));
    }
}

// cols has shape [C*9, H*W]; row (c, ky, kx) holds the input shifted by (ky-1, kx-1).
// y[o,p] = sum_k w[o,k] * cols[k,p]. Every output element accumulates its k
// terms in ascending order on its own, independent of c_out and of the tiling,
// so dropping a filter, or an input channel whose weights are zero, leaves the
// other outputs bit-identical. (The library is built without FP contraction so
// the vector and scalar paths round identically.)
template <typename T>
void ordered_gemm(const T* w, const T* cols, T* y, std::size_t c_out, std::size_t k, std::size_t hw) {
    using V [[gnu::vector_size(32)]] = T;
    constexpr std::size_t kLanes = sizeof(V) / sizeof(T);
    constexpr std::size_t kRows = 4;
    constexpr std::size_t kVecs = 2;
    constexpr std::size_t kCols = kLanes * kVecs;
    const auto load = [](const T* p) {
        V v;
        std::memcpy(&v, p, sizeof v);
        return v;
    };
    const auto store = [](T* p, V v) { std::memcpy(p, &v, sizeof v); };

    std::size_t p0 = 0;
    for (; p0 + kCols <= hw; p0 += kCols) {
        std::size_t o = 0;
        for (; o + kRows <= c_out; o += kRows) {
            V acc[kRows][kVecs] = {};
            const T* w0 = w + o * k;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const T* c = cols + kk * hw + p0;
                const V c0 = load(c);
                const V c1 = load(c + kLanes);
                for (std::size_t r = 0; r < kRows; ++r) {
                    const T wv = w0[r * k + kk];
                    acc[r][0] += wv * c0;
                    acc[r][1] += wv * c1;
                }
            }
            for (std::size_t r = 0; r < kRows; ++r) {
                store(y + (o + r) * hw + p0, acc[r][0]);
                store(y + (o + r) * hw + p0 + kLanes, acc[r][1]);
            }
        }
        for (; o < c_out; ++o) {
            V acc[kVecs] = {};
            for (std::size_t kk = 0; kk < k; ++kk) {
                const T* c = cols + kk * hw + p0;
                const T wv = w[o * k + kk];
                acc[0] += wv * load(c);
                acc[1] += wv * load(c + kLanes);
            }
            store(y + o * hw + p0, acc[0]);
            store(y + o * hw + p0 + kLanes, acc[1]);
        }
    }
    for (std::size_t o = 0; o < c_out; ++o) {
        for (std::size_t p = p0; p < hw; ++p) {
            T acc{};
            for (std::size_t kk = 0; kk < k; ++kk) acc += w[o * k + kk] * cols[kk * hw + p];
            y[o * hw + p] = acc;
        }
    }
}

// out[i,j] += sum_p a[i,p] * b[j,p] for a [m,len] and b [n,len]. Each dot
// product keeps one partial sum per vector lane and reduces them in a fixed
// order, so the result does not depend on where the buffers happen to sit.
template <typename T>
void ordered_gemm_nt(const T* a, const T* b, T* out, std::size_t m, std::size_t n, std::size_t len) {
    using V [[gnu::vector_size(32)]] = T;
    constexpr std::size_t kLanes = sizeof(V) / sizeof(T);
    constexpr std::size_t kRows = 4;
    const std::size_t vec_end = len - len % kLanes;
    const auto load = [](const T* p) {
        V v;
        std::memcpy(&v, p, sizeof v);
        return v;
    };
    constexpr std::size_t kCols = 2;
    for (std::size_t i = 0; i < m; i += kRows) {
        const std::size_t rows = std::min(kRows, m - i);
        for (std::size_t j = 0; j < n; j += kCols) {
            const std::size_t cols = std::min(kCols, n - j);
            V acc[kRows][kCols] = {};
            if (rows == kRows && cols == kCols) {
                const T* b0 = b + j * len;
                const T* b1 = b0 + len;
                for (std::size_t p = 0; p < vec_end; p += kLanes) {
                    const V v0 = load(b0 + p);
                    const V v1 = load(b1 + p);
                    for (std::size_t r = 0; r < kRows; ++r) {
                        const V av = load(a + (i + r) * len + p);
                        acc[r][0] += av * v0;
                        acc[r][1] += av * v1;
                    }
                }
            } else {
                for (std::size_t p = 0; p < vec_end; p += kLanes) {
                    for (std::size_t r = 0; r < rows; ++r) {
                        const V av = load(a + (i + r) * len + p);
                        for (std::size_t c = 0; c < cols; ++c) acc[r][c] += av * load(b + (j + c) * len + p);
                    }
                }
            }
            for (std::size_t r = 0; r < rows; ++r) {
                const T* ai = a + (i + r) * len;
                for (std::size_t c = 0; c < cols; ++c) {
                    const T* bj = b + (j + c) * len;
                    T s{};
                    for (std::size_t l = 0; l < kLanes; ++l) s += acc[r][c][l];
                    for (std::size_t p = vec_end; p < len; ++p) s += ai[p] * bj[p];
                    out[(i + r) * n + j + c] += s;
                }
            }
        }
    }
}

// Rational minimax tanh for float, within a few ulp on [-7.9, 7.9] and exactly
// +-1 beyond. Plain arithmetic only, so the loop vectorizes and every lane
// rounds the same way as the scalar path.
inline float tanh_float(float a) {
    constexpr float kClamp = 7.90531110763549805f;
    const float x = std::min(std::max(a, -kClamp), kClamp);
    const float x2 = x * x;
    float p = x2 * -2.76076847742355e-16f + 2.00018790482477e-13f;
    p = x2 * p + -8.60467152213735e-11f;
    p = x2 * p + 5.12229709037114e-08f;
    p = x2 * p + 1.48572235717979e-05f;
    p = x2 * p + 6.37261928875436e-04f;
    p = x2 * p + 4.89352455891786e-03f;
    p = x * p;
    float q = x2 * 1.19825839466702e-06f + 1.18534705686654e-04f;
    q = x2 * q + 2.26843463243900e-03f;
    q = x2 * q + 4.89352518554385e-03f;
    const float r = p / q;
    return std::abs(a) < 0.0004f ? a : r;
}

template <typename T>
void im2col(const T* x, std::size_t channels, std::size_t h, std::size_t w, T* cols) {
    const std::size_t hw = h * w;
    for (std::size_t c = 0; c < channels; ++c) {
        const T* plane = x + c * hw;
        for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) {
                T* row = cols + ((c * 3 + ky) * 3 + kx) * hw;
                const std::size_t x0 = kx == 0 ? 1 : 0;
                const std::size_t x1 = kx == 2 ? w - 1 : w;
                for (std::size_t y = 0; y < h; ++y) {
                    T* dst = row + y * w;
                    const auto iy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                        std::fill(dst, dst + w, T{0});
                        continue;
                    }
                    if (x0 > 0) dst[0] = T{0};
                    if (x1 < w) dst[w - 1] = T{0};
                    if (x1 > x0) {
                        const T* src = plane + static_cast<std::size_t>(iy) * w + (x0 + kx - 1);
                        std::memcpy(dst + x0, src, (x1 - x0) * sizeof(T));
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* cols, std::size_t channels, std::size_t h, std::size_t w, T* x) {
    const std::size_t hw = h * w;
    for (std::size_t c = 0; c < channels; ++c) {
        T* plane = x + c * hw;
        for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) {
                const T* row = cols + ((c * 3 + ky) * 3 + kx) * hw;
                const std::size_t x0 = kx == 0 ? 1 : 0;
                const std::size_t x1 = kx == 2 ? w - 1 : w;
                for (std::size_t y = 0; y < h; ++y) {
                    const auto iy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    T* dst = plane + static_cast<std::size_t>(iy) * w + (x0 + kx - 1);
                    const T* src = row + y * w + x0;
                    for (std::size_t i = 0; i < x1 - x0; ++i) dst[i] += src[i];
                }
            }
        }
    }
}

template <typename T>
void check_conv_args(const Geometry& g, const BasicTensor<T>& weights, const BasicTensor<T>& bias) {
    const Shape& ws = weights.shape();
    if (ws.size() != 4 || ws[2] != 3 || ws[3] != 3) {
        throw ShapeError("conv2d: weights must be [C_out,C_in,3,3], got " + shape_str(ws));
    }
    if (ws[1] != g.channels) {
        throw ShapeError("conv2d: input has " + std::to_string(g.channels) + " channels, weights expect " +
                         std::to_string(ws[1]));
    }
    require_vector(bias.shape(), ws[0], "conv2d", "bias");
}

template <typename T>
std::size_t channel_count_for_norm(const Geometry& g, const BasicTensor<T>& param, const char* what) {
    require_vector(param.shape(), g.channels, "batchnorm", what);
    return g.channels;
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias) {
    const Geometry g = spatial_geometry(input.shape(), "conv2d");
    check_conv_args(g, weights, bias);
    const std::size_t c_out = weights.dim(0);
    const std::size_t k = g.channels * 9;
    const std::size_t hw = g.plane();

    BasicTensor<T> out(g.shape_with(c_out, g.height, g.width));
    std::vector<T> cols(k * hw);
    for (std::size_t n = 0; n < g.batch; ++n) {
        im2col(input.ptr() + n * g.sample(), g.channels, g.height, g.width, cols.data());
        T* y = out.ptr() + n * c_out * hw;
        ordered_gemm(weights.ptr(), cols.data(), y, c_out, k, hw);
        for (std::size_t o = 0; o < c_out; ++o) {
            for (std::size_t p = 0; p < hw; ++p) y[o * hw + p] += bias[o];
        }
    }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out) {
    const Geometry g = spatial_geometry(input.shape(), "conv2d_backward");
    const std::size_t c_out = weights.dim(0);
    require_same_shape(grad_out.shape(), g.shape_with(c_out, g.height, g.width), "conv2d_backward");
    const std::size_t k = g.channels * 9;
    const std::size_t hw = g.plane();

    ConvGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()),
                       BasicTensor<T>(Shape{c_out})};
    std::vector<T> cols(k * hw);
    std::vector<T> grad_cols(k * hw);
    std::vector<T> wt(k * c_out);
    for (std::size_t o = 0; o < c_out; ++o) {
        for (std::size_t kk = 0; kk < k; ++kk) wt[kk * c_out + o] = weights[o * k + kk];
    }

    for (std::size_t n = 0; n < g.batch; ++n) {
        const T* gy = grad_out.ptr() + n * c_out * hw;
        im2col(input.ptr() + n * g.sample(), g.channels, g.height, g.width, cols.data());
        ordered_gemm_nt(gy, cols.data(), grads.weights.ptr(), c_out, k, hw);
        for (std::size_t o = 0; o < c_out; ++o) {
            T s{};
            for (std::size_t p = 0; p < hw; ++p) s += gy[o * hw + p];
            grads.bias[o] += s;
        }
        ordered_gemm(wt.data(), gy, grad_cols.data(), k, c_out, hw);
        col2im_add(grad_cols.data(), g.channels, g.height, g.width, grads.input.ptr() + n * g.sample());
    }
    return grads;
}

template <typename T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                                 const BasicTensor<T>& beta, const BasicTensor<T>& mean,
                                 const BasicTensor<T>& var, T eps) {
    const Geometry g = spatial_geometry(input.shape(), "batchnorm");
    channel_count_for_norm(g, gamma, "gamma");
    channel_count_for_norm(g, beta, "beta");
    channel_count_for_norm(g, mean, "mean");
    channel_count_for_norm(g, var, "var");

    std::vector<T> scale(g.channels);
    std::vector<T> shift(g.channels);
    for (std::size_t c = 0; c < g.channels; ++c) {
        const T denom = var[c] + eps;
        if (!(denom > T{0})) {
            throw NumericError("batchnorm: var + eps must be positive (channel " + std::to_string(c) + ")");
        }
        scale[c] = gamma[c] / std::sqrt(denom);
        shift[c] = beta[c] - mean[c] * scale[c];
    }

    BasicTensor<T> out(input.shape());
    const std::size_t hw = g.plane();
    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t c = 0; c < g.channels; ++c) {
            const T* x = input.ptr() + (n * g.channels + c) * hw;
            T* y = out.ptr() + (n * g.channels + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) y[i] = x[i] * scale[c] + shift[c];
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> batchnorm_train_forward(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                                       const BasicTensor<T>& beta, T eps,
                                       BatchNormBatchState<T>& state) {
    const Geometry g = spatial_geometry(input.shape(), "batchnorm");
    channel_count_for_norm(g, gamma, "gamma");
    channel_count_for_norm(g, beta, "beta");
    if (!(eps > T{0})) throw NumericError("batchnorm: eps must be positive in training mode");

    const std::size_t hw = g.plane();
    const auto count = static_cast<double>(g.batch * hw);
    state.normalized = BasicTensor<T>(input.shape());
    state.inv_std.assign(g.channels, T{0});
    state.batch_mean.assign(g.channels, T{0});
    state.batch_var.assign(g.channels, T{0});

    BasicTensor<T> out(input.shape());
    for (std::size_t c = 0; c < g.channels; ++c) {
        // Two-pass statistics accumulated in double.
        double sum = 0.0;
        for (std::size_t n = 0; n < g.batch; ++n) {
            const T* x = input.ptr() + (n * g.channels + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) sum += static_cast<double>(x[i]);
        }
        const double mu = sum / count;
        double sq = 0.0;
        for (std::size_t n = 0; n < g.batch; ++n) {
            const T* x = input.ptr() + (n * g.channels + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                const double d = static_cast<double>(x[i]) - mu;
                sq += d * d;
            }
        }
        const double var = sq / count;
        const T inv_std = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        state.batch_mean[c] = static_cast<T>(mu);
        state.batch_var[c] = static_cast<T>(var);
        state.inv_std[c] = inv_std;
        const T mu_t = static_cast<T>(mu);
        for (std::size_t n = 0; n < g.batch; ++n) {
            const std::size_t off = (n * g.channels + c) * hw;
            const T* x = input.ptr() + off;
            T* xhat = state.normalized.ptr() + off;
            T* y = out.ptr() + off;
            for (std::size_t i = 0; i < hw; ++i) {
                xhat[i] = (x[i] - mu_t) * inv_std;
                y[i] = gamma[c] * xhat[i] + beta[c];
            }
        }
    }
    return out;
}

template <typename T>
BatchNormGrads<T> batchnorm_train_backward(const BatchNormBatchState<T>& state,
                                           const BasicTensor<T>& gamma,
                                           const BasicTensor<T>& grad_out) {
    if (state.normalized.empty()) throw StateError("batchnorm_backward: no cached batch statistics");
    require_same_shape(grad_out.shape(), state.normalized.shape(), "batchnorm_backward");
    const Geometry g = spatial_geometry(grad_out.shape(), "batchnorm_backward");
    channel_count_for_norm(g, gamma, "gamma");

    const std::size_t hw = g.plane();
    const auto count = static_cast<double>(g.batch * hw);
    BatchNormGrads<T> grads{BasicTensor<T>(grad_out.shape()), BasicTensor<T>(Shape{g.channels}),
                            BasicTensor<T>(Shape{g.channels})};
    for (std::size_t c = 0; c < g.channels; ++c) {
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (std::size_t n = 0; n < g.batch; ++n) {
            const std::size_t off = (n * g.channels + c) * hw;
            const T* dy = grad_out.ptr() + off;
            const T* xhat = state.normalized.ptr() + off;
            for (std::size_t i = 0; i < hw; ++i) {
                sum_dy += static_cast<double>(dy[i]);
                sum_dy_xhat += static_cast<double>(dy[i]) * static_cast<double>(xhat[i]);
            }
        }
        grads.beta[c] = static_cast<T>(sum_dy);
        grads.gamma[c] = static_cast<T>(sum_dy_xhat);
        const T k = gamma[c] * state.inv_std[c];
        const T mean_dy = static_cast<T>(sum_dy / count);
        const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / count);
        for (std::size_t n = 0; n < g.batch; ++n) {
            const std::size_t off = (n * g.channels + c) * hw;
            const T* dy = grad_out.ptr() + off;
            const T* xhat = state.normalized.ptr() + off;
            T* dx = grads.input.ptr() + off;
            for (std::size_t i = 0; i < hw; ++i) dx[i] = k * (dy[i] - mean_dy - xhat[i] * mean_dy_xhat);
        }
    }
    return grads;
}

template <typename T>
BatchNormGrads<T> batchnorm_eval_backward(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                                          const BasicTensor<T>& mean, const BasicTensor<T>& var,
                                          T eps, const BasicTensor<T>& grad_out) {
    require_same_shape(grad_out.shape(), input.shape(), "batchnorm_backward");
    const Geometry g = spatial_geometry(input.shape(), "batchnorm_backward");
    channel_count_for_norm(g, gamma, "gamma");
    const std::size_t hw = g.plane();
    BatchNormGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(Shape{g.channels}),
                            BasicTensor<T>(Shape{g.channels})};
    for (std::size_t c = 0; c < g.channels; ++c) {
        const T denom = var[c] + eps;
        if (!(denom > T{0})) throw NumericError("batchnorm: var + eps must be positive");
        const T inv_std = T{1} / std::sqrt(denom);
        for (std::size_t n = 0; n < g.batch; ++n) {
            const std::size_t off = (n * g.channels + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                const T dy = grad_out[off + i];
                grads.beta[c] += dy;
                grads.gamma[c] += dy * (input[off + i] - mean[c]) * inv_std;
                grads.input[off + i] = dy * gamma[c] * inv_std;
            }
        }
    }
    return grads;
}

template <typename T>
BasicTensor<T> avgpool_forward(const BasicTensor<T>& input, PoolWindow window) {
    const Geometry g = spatial_geometry(input.shape(), "avgpool");
    if (window.height == 0 || window.width == 0 || window.height > g.height || window.width > g.width) {
        throw ShapeError("avgpool: window (" + std::to_string(window.height) + "," +
                         std::to_string(window.width) + ") does not fit input " + shape_str(input.shape()));
    }
    const std::size_t oh = g.height / window.height;
    const std::size_t ow = g.width / window.width;
    // Wider accumulator so the mean of a constant window is exactly that constant.
    using Acc = std::conditional_t<std::is_same_v<T, float>, double, long double>;
    const auto area = static_cast<Acc>(window.height * window.width);
    BasicTensor<T> out(g.shape_with(g.channels, oh, ow));
    for (std::size_t nc = 0; nc < g.batch * g.channels; ++nc) {
        const T* x = input.ptr() + nc * g.plane();
        T* y = out.ptr() + nc * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                Acc acc{0};
                for (std::size_t dy = 0; dy < window.height; ++dy) {
                    const T* row = x + (oy * window.height + dy) * g.width + ox * window.width;
                    for (std::size_t dx = 0; dx < window.width; ++dx) acc += row[dx];
                }
                y[oy * ow + ox] = static_cast<T>(acc / area);
            }
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> avgpool_backward(const Shape& input_shape, PoolWindow window, const BasicTensor<T>& grad_out) {
    const Geometry g = spatial_geometry(input_shape, "avgpool_backward");
    const std::size_t oh = g.height / window.height;
    const std::size_t ow = g.width / window.width;
    require_same_shape(grad_out.shape(), g.shape_with(g.channels, oh, ow), "avgpool_backward");
    const T inv_area = T{1} / static_cast<T>(window.height * window.width);
    BasicTensor<T> grad_in(input_shape);
    for (std::size_t nc = 0; nc < g.batch * g.channels; ++nc) {
        const T* gy = grad_out.ptr() + nc * oh * ow;
        T* gx = grad_in.ptr() + nc * g.plane();
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const T v = gy[oy * ow + ox] * inv_area;
                for (std::size_t dy = 0; dy < window.height; ++dy) {
                    T* row = gx + (oy * window.height + dy) * g.width + ox * window.width;
                    for (std::size_t dx = 0; dx < window.width; ++dx) row[dx] = v;
                }
            }
        }
    }
    return grad_in;
}

namespace {

struct DenseGeometry {
    std::size_t batch;
    std::size_t features;
    bool batched;
};

DenseGeometry dense_geometry(const Shape& shape, std::size_t features, const char* op) {
    const std::size_t total = shape_numel(shape);
    if (shape.size() == 1) {
        if (total != features) {
            throw ShapeError(std::string(op) + ": input length " + std::to_string(total) + " != " +
                             std::to_string(features));
        }
        return {1, features, false};
    }
    const std::size_t per_sample = total / shape[0];
    if (per_sample != features) {
        throw ShapeError(std::string(op) + ": per-sample input length " + std::to_string(per_sample) +
                         " != " + std::to_string(features));
    }
    return {shape[0], features, true};
}

}  // namespace

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& bias) {
    if (weights.rank() != 2) throw ShapeError("dense: weights must be [m,n], got " + shape_str(weights.shape()));
    const std::size_t m = weights.dim(0);
    const std::size_t n = weights.dim(1);
    require_vector(bias.shape(), m, "dense", "bias");
    const DenseGeometry g = dense_geometry(input.shape(), n, "dense");
    BasicTensor<T> out(g.batched ? Shape{g.batch, m} : Shape{m});
    for (std::size_t s = 0; s < g.batch; ++s) {
        const T* x = input.ptr() + s * n;
        T* y = out.ptr() + s * m;
        for (std::size_t i = 0; i < m; ++i) {
            const T* w = weights.ptr() + i * n;
            T acc = bias[i];
            for (std::size_t j = 0; j < n; ++j) acc += w[j] * x[j];
            y[i] = acc;
        }
    }
    return out;
}

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out) {
    const std::size_t m = weights.dim(0);
    const std::size_t n = weights.dim(1);
    const DenseGeometry g = dense_geometry(input.shape(), n, "dense_backward");
    if (grad_out.size() != g.batch * m) throw ShapeError("dense_backward: upstream gradient size mismatch");
    DenseGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()), BasicTensor<T>(Shape{m})};
    for (std::size_t s = 0; s < g.batch; ++s) {
        const T* x = input.ptr() + s * n;
        const T* gy = grad_out.ptr() + s * m;
        T* gx = grads.input.ptr() + s * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T d = gy[i];
            grads.bias[i] += d;
            const T* w = weights.ptr() + i * n;
            T* gw = grads.weights.ptr() + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                gw[j] += d * x[j];
                gx[j] += d * w[j];
            }
        }
    }
    return grads;
}

template <typename T>
BasicTensor<T> tanh_forward(const BasicTensor<T>& input) {
    BasicTensor<T> out(input.shape());
    if constexpr (std::is_same_v<T, float>) {
        const float* x = input.ptr();
        float* y = out.ptr();
        for (std::size_t i = 0; i < input.size(); ++i) y[i] = tanh_float(x[i]);
    } else {
        std::transform(input.begin(), input.end(), out.begin(), [](T v) { return std::tanh(v); });
    }
    return out;
}

template <typename T>
BasicTensor<T> tanh_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out) {
    require_same_shape(output.shape(), grad_out.shape(), "tanh_backward");
    BasicTensor<T> grad_in(output.shape());
    for (std::size_t i = 0; i < output.size(); ++i) grad_in[i] = grad_out[i] * (T{1} - output[i] * output[i]);
    return grad_in;
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input) {
    BasicTensor<T> out(input.shape());
    std::transform(input.begin(), input.end(), out.begin(), [](T v) { return v > T{0} ? v : T{0}; });
    return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
    require_same_shape(input.shape(), grad_out.shape(), "relu_backward");
    BasicTensor<T> grad_in(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) grad_in[i] = input[i] > T{0} ? grad_out[i] : T{0};
    return grad_in;
}

template <typename T>
BasicTensor<T> softmax_forward(const BasicTensor<T>& input) {
    if (input.rank() == 0) throw ShapeError("softmax: rank-0 input");
    const std::size_t classes = input.shape().back();
    const std::size_t rows = input.size() / classes;
    BasicTensor<T> out(input.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* x = input.ptr() + r * classes;
        T* y = out.ptr() + r * classes;
        const T peak = *std::max_element(x, x + classes);
        T sum{0};
        for (std::size_t c = 0; c < classes; ++c) {
            y[c] = std::exp(x[c] - peak);
            sum += y[c];
        }
        for (std::size_t c = 0; c < classes; ++c) y[c] /= sum;
    }
    return out;
}

template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out) {
    require_same_shape(output.shape(), grad_out.shape(), "softmax_backward");
    const std::size_t classes = output.shape().back();
    const std::size_t rows = output.size() / classes;
    BasicTensor<T> grad_in(output.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* p = output.ptr() + r * classes;
        const T* gy = grad_out.ptr() + r * classes;
        T* gx = grad_in.ptr() + r * classes;
        T dot{0};
        for (std::size_t c = 0; c < classes; ++c) dot += gy[c] * p[c];
        for (std::size_t c = 0; c < classes; ++c) gx[c] = p[c] * (gy[c] - dot);
    }
    return grad_in;
}

#define LCNN_INSTANTIATE_NN(T)                                                                              \
    template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicTensor<T>&,                     \
                                           const BasicTensor<T>&);                                           \
    template ConvGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
    template BasicTensor<T> batchnorm_forward(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                              const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                              const BasicTensor<T>&, T);                                      \
    template BasicTensor<T> batchnorm_train_forward(const BasicTensor<T>&, const BasicTensor<T>&,            \
                                                    const BasicTensor<T>&, T, BatchNormBatchState<T>&);       \
    template BatchNormGrads<T> batchnorm_train_backward(const BatchNormBatchState<T>&, const BasicTensor<T>&, \
                                                        const BasicTensor<T>&);                               \
    template BatchNormGrads<T> batchnorm_eval_backward(const BasicTensor<T>&, const BasicTensor<T>&,         \
                                                       const BasicTensor<T>&, const BasicTensor<T>&, T,      \
                                                       const BasicTensor<T>&);                                \
    template BasicTensor<T> avgpool_forward(const BasicTensor<T>&, PoolWindow);                              \
    template BasicTensor<T> avgpool_backward(const Shape&, PoolWindow, const BasicTensor<T>&);               \
    template BasicTensor<T> dense_forward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
    template DenseGrads<T> dense_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
    template BasicTensor<T> tanh_forward(const BasicTensor<T>&);                                              \
    template BasicTensor<T> tanh_backward(const BasicTensor<T>&, const BasicTensor<T>&);                      \
    template BasicTensor<T> relu_forward(const BasicTensor<T>&);                                              \
    template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                      \
    template BasicTensor<T> softmax_forward(const BasicTensor<T>&);                                           \
    template BasicTensor<T> softmax_backward(const BasicTensor<T>&, const BasicTensor<T>&);

LCNN_INSTANTIATE_NN(float)
LCNN_INSTANTIATE_NN(double)

#undef LCNN_INSTANTIATE_NN

}  // namespace lcnn::nn
