#include "atnf/attention.hpp"

namespace atnf {

template <typename T>
SEBlock<T> SEBlock<T>::make(int64_t channels, int64_t reduction, Rng& rng) {
    if (channels < 1) throw ShapeError("SEBlock: channels must be positive");
    if (reduction < 1) throw ShapeError("SEBlock: reduction must be positive");
    SEBlock<T> b;
    b.channels = channels;
    b.reduction = reduction;
    b.hidden = std::max<int64_t>(1, channels / reduction);
    b.fc1_weight = Tensor<T>::kaiming_uniform({b.hidden, channels}, channels, rng);
    b.fc1_bias = Tensor<T>::zeros({b.hidden});
    b.fc2_weight = Tensor<T>::zeros({channels, b.hidden});
    b.fc2_bias = Tensor<T>::zeros({channels});
    return b;
}

template <typename T>
SABlock<T> SABlock<T>::make(int64_t kernel) {
    if (kernel < 1 || kernel % 2 == 0) throw ShapeError("SABlock: kernel must be odd");
    SABlock<T> b;
    b.kernel = kernel;
    b.conv_weight = Tensor<T>::zeros({1, 2, kernel, kernel});
    b.conv_bias = Tensor<T>::zeros({1});
    return b;
}

template <typename T>
Tensor<T> se_forward(const Tensor<T>& x, const SEBlock<T>& block) {
    if (x.ndim() != 4 || x.dim(1) != block.channels)
        throw ShapeError("se_forward: input " + shape_str(x.shape()) + " does not carry " +
                         std::to_string(block.channels) + " channels");
    const int64_t n = x.dim(0), c = x.dim(1);
    Tensor<T> z = reshape(global_spatial_pool(x, PoolMode::Avg), {n, c});
    Tensor<T> hidden = activation(linear(z, block.fc1_weight, block.fc1_bias), ActKind::ReLU);
    Tensor<T> gate = activation(linear(hidden, block.fc2_weight, block.fc2_bias), ActKind::Sigmoid);
    return mul(x, reshape(gate, {n, c, 1, 1}));
}

template <typename T>
Tensor<T> sa_forward(const Tensor<T>& x, const SABlock<T>& block) {
    if (x.ndim() != 4) throw ShapeError("sa_forward expects a 4-d input");
    std::vector<Tensor<T>> pooled = {channel_pool(x, PoolMode::Avg),
                                     channel_pool(x, PoolMode::Max)};
    Tensor<T> desc = concat_channels(std::span<const Tensor<T>>(pooled));
    Tensor<T> conv = conv2d(desc, block.conv_weight, std::optional<Tensor<T>>(block.conv_bias),
                            1, (block.kernel - 1) / 2);
    Tensor<T> gate = activation(conv, ActKind::Sigmoid);
    return mul(x, gate);
}

template struct SEBlock<float>;
template struct SEBlock<double>;
template struct SABlock<float>;
template struct SABlock<double>;
template Tensor<float> se_forward<float>(const Tensor<float>&, const SEBlock<float>&);
template Tensor<double> se_forward<double>(const Tensor<double>&, const SEBlock<double>&);
template Tensor<float> sa_forward<float>(const Tensor<float>&, const SABlock<float>&);
template Tensor<double> sa_forward<double>(const Tensor<double>&, const SABlock<double>&);

}  // namespace atnf
