#pragma once

#include <optional>
#include <span>

#include "atnf/tape.hpp"
#include "atnf/tensor.hpp"

namespace atnf {

enum class PoolMode { Avg, Max };
enum class ActKind { ReLU, Sigmoid };
enum class BinOp { Add, Mul };
enum class Mode { Train, Eval };

/// Batch-norm running statistics, updated in Train mode, consumed in Eval.
template <typename T>
struct BatchNormState {
    Tensor<T> running_mean;  // [C], starts at 0
    Tensor<T> running_var;   // [C], starts at 1

    static BatchNormState make(int64_t channels) {
        BatchNormState s;
        s.running_mean = Tensor<T>::zeros({channels});
        s.running_var = Tensor<T>::full({channels}, T(1));
        return s;
    }
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// 2-d cross-correlation (no kernel flip) with zero padding.
/// x: [N,Cin,H,W], weight: [Cout,Cin,kh,kw], bias: [Cout] or empty.
/// Output spatial size: floor((H + 2*padding - kh)/stride) + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const std::optional<Tensor<T>>& bias, int64_t stride, int64_t padding);

/// Per-channel convolution: weight [C,1,kh,kw] applied channel-wise.
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                           const std::optional<Tensor<T>>& bias, int64_t stride,
                           int64_t padding);

/// Window max, no padding; gradient routes to the argmax (first index in
/// row-major window scan on ties).
template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, int64_t k, int64_t stride);

/// Window mean with optional zero padding; padded cells count toward the
/// k*k divisor.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, int64_t k, int64_t stride, int64_t padding = 0);

/// Reduces H,W to 1x1 per channel: [N,C,H,W] -> [N,C,1,1].
template <typename T>
Tensor<T> global_spatial_pool(const Tensor<T>& x, PoolMode mode);

/// Reduces channels per spatial position: [N,C,H,W] -> [N,1,H,W].
template <typename T>
Tensor<T> channel_pool(const Tensor<T>& x, PoolMode mode);

/// y = x * W^T + b. x: [N,Din], weight: [Dout,Din], bias: [Dout].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> activation(const Tensor<T>& x, ActKind kind);

/// Batch normalization over (N,H,W) per channel. Train mode normalizes by
/// batch statistics (and requires N*H*W >= 2); Eval normalizes by running
/// statistics. Freshly initialized running stats (mean 0, var 1) are valid.
template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       BatchNormState<T>& state, Mode mode);

/// Elementwise op with numpy-style broadcasting of b onto a's shape:
/// b must have the same rank with every dimension equal to a's or 1.
/// Backward sums gradients over the broadcast dimensions.
template <typename T>
Tensor<T> broadcast_binary(const Tensor<T>& a, const Tensor<T>& b, BinOp op);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return broadcast_binary(a, b, BinOp::Add);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return broadcast_binary(a, b, BinOp::Mul);
}

/// Concatenates along the channel axis; inputs share N,H,W.
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> xs);

/// Mean over the batch of -log softmax(logits)[label], max-stabilized.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels);

/// Row-wise softmax probabilities (no tape participation; prediction helper).
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

/// Scalar sum of all elements.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

/// Multiplies every element by a constant.
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

/// Copies data under a new shape with identical element count.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape);

/// [N,C,H,W] -> [N, C*H*W].
template <typename T>
Tensor<T> flatten(const Tensor<T>& x);

}  // namespace atnf
