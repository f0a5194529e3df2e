#pragma once

#include <cstdint>
#include <vector>

#include "atnf/plan.hpp"

namespace atnf::arch {

/// Structural constants shared by the backbone builders and the canonical
/// plan tables. Toy scale divides the reference widths by 4 and caps repeat
/// counts at 2; input sizes are 32 (toy) and 224 (paper).

inline int64_t input_size(Scale s) { return s == Scale::Toy ? 32 : 224; }

struct VggCfg {
    std::vector<int64_t> channels;
    std::vector<int> convs_per_block;
    int64_t head_hidden;
};
inline VggCfg vgg_cfg(Scale s) {
    if (s == Scale::Toy) return {{16, 32, 64, 128, 128}, {2, 2, 2, 2, 2}, 128};
    return {{64, 128, 256, 512, 512}, {2, 2, 3, 3, 3}, 512};
}

struct ResNetCfg {
    int64_t stem_channels;
    bool stem_downsample;  // 7x7/2 conv + pool at paper scale
    std::vector<int64_t> channels;
    int blocks_per_layer;
    std::vector<int64_t> layer_strides;
};
inline ResNetCfg resnet_cfg(Scale s) {
    if (s == Scale::Toy) return {16, false, {16, 32, 64, 128}, 2, {1, 2, 2, 2}};
    return {64, true, {64, 128, 256, 512}, 2, {1, 2, 2, 2}};
}

struct InceptionCfg {
    std::vector<int64_t> stem_channels;  // two stem convs
    std::vector<int64_t> module_channels;  // outputs of modules A..E (divisible by 4)
};
inline InceptionCfg inception_cfg(Scale s) {
    if (s == Scale::Toy) return {{16, 32}, {32, 48, 64, 96, 128}};
    return {{32, 64}, {128, 192, 256, 384, 512}};
}

struct DenseNetCfg {
    int64_t stem_channels;
    bool stem_downsample;
    int64_t growth;
    std::vector<int> layers_per_block;
};
inline DenseNetCfg densenet_cfg(Scale s) {
    if (s == Scale::Toy) return {16, false, 8, {2, 2, 2, 2}};
    return {64, true, 32, {6, 12, 24, 16}};
}

struct EfficientNetCfg {
    int64_t stem_channels;
    bool stem_downsample;
    std::vector<int64_t> stage_channels;
    std::vector<int> blocks_per_stage;
    std::vector<int64_t> stage_strides;
    int64_t expand_ratio;
};
inline EfficientNetCfg efficientnet_cfg(Scale s) {
    if (s == Scale::Toy) return {16, false, {16, 44, 128, 128, 128}, {1, 2, 2, 2, 2}, {1, 2, 2, 2, 1}, 4};
    return {48, true, {64, 176, 512, 512, 512}, {2, 2, 2, 2, 2}, {1, 2, 2, 2, 1}, 4};
}

}  // namespace atnf::arch
