#pragma once

#include "atnf/model.hpp"

namespace atnf {

/// Checkpoint container: magic ATNF, version u32, manifest (family, scale,
/// num_classes u32, seed u64, serialized plan text), then every state tensor
/// (trainable parameters and batch-norm running statistics) in name-sorted
/// order as (name, dim count u32, dims u64, f32 little-endian data).
std::vector<uint8_t> serialize_checkpoint(ModelGraph<float>& model);

/// Rebuilds the model from the embedded manifest and restores every tensor.
ModelGraph<float> deserialize_checkpoint(std::span<const uint8_t> bytes);

void write_checkpoint(ModelGraph<float>& model, const std::string& path);
ModelGraph<float> load_checkpoint(const std::string& path);

}  // namespace atnf
