#pragma once

#include "atnf/ops.hpp"
#include "atnf/rng.hpp"

namespace atnf {

/// Channel-attention (squeeze-and-excitation) block.
///
/// Squeeze: global average pool to a per-channel descriptor. Excitation: a
/// two-layer bottleneck (width max(1, floor(C/r)), ReLU between the layers)
/// followed by a sigmoid, giving one gate per channel that rescales the
/// input map. The excitation layers act on the squeezed (N,C) vector; on a
/// 1x1 spatial map this is exactly a pair of 1x1 convolutions.
///
/// fc2 starts at zero (weights and bias), so a freshly built block applies a
/// uniform 0.5 gate: inserting untrained attention rescales features without
/// preferring any channel. fc1 is Kaiming-uniform so fc2 receives a useful
/// gradient from the first step.
template <typename T>
struct SEBlock {
    int64_t channels = 0;
    int64_t reduction = 16;
    int64_t hidden = 0;  // max(1, channels / reduction)
    Tensor<T> fc1_weight;  // [hidden, channels]
    Tensor<T> fc1_bias;    // [hidden]
    Tensor<T> fc2_weight;  // [channels, hidden]
    Tensor<T> fc2_bias;    // [channels]

    static SEBlock make(int64_t channels, int64_t reduction, Rng& rng);
};

/// Spatial-attention block.
///
/// Channel-wise average and max pooling give a 2-channel spatial descriptor;
/// a kxk convolution (zero padding (k-1)/2, single output channel) plus a
/// sigmoid turn it into a per-position gate broadcast across channels.
/// The convolution starts at zero so the initial gate is a uniform 0.5,
/// matching the SE block's neutral start.
template <typename T>
struct SABlock {
    int64_t kernel = 7;  // odd
    Tensor<T> conv_weight;  // [1, 2, k, k]
    Tensor<T> conv_bias;    // [1]

    static SABlock make(int64_t kernel);
};

/// x * sigmoid(fc2(relu(fc1(gap(x))))) with the gate broadcast over H,W.
template <typename T>
Tensor<T> se_forward(const Tensor<T>& x, const SEBlock<T>& block);

/// x * sigmoid(conv([avg_c(x); max_c(x)])) with the gate broadcast over C.
template <typename T>
Tensor<T> sa_forward(const Tensor<T>& x, const SABlock<T>& block);

/// Parameters added by one SE block: two FC layers with biases.
inline int64_t se_param_count(int64_t channels, int64_t reduction) {
    const int64_t h = std::max<int64_t>(1, channels / reduction);
    return 2 * channels * h + h + channels;
}

/// Parameters added by one SA block: the kxk two-channel conv plus its bias.
inline int64_t sa_param_count(int64_t kernel) { return 2 * kernel * kernel + 1; }

}  // namespace atnf
