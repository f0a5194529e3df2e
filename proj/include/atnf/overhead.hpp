#pragma once

#include "atnf/model.hpp"

namespace atnf {

struct OverheadEntry {
    std::string hook;
    AttentionKind kind = AttentionKind::SE;
    int64_t params_added = 0;
    int64_t flops_added = 0;  // multiply-accumulates for one forward pass
};

/// Cost added by a placement plan: parameter count and per-forward MACs,
/// evaluated at the feature-map shapes flowing through each hook.
struct OverheadReport {
    int64_t params_added = 0;
    int64_t flops_added = 0;
    std::vector<OverheadEntry> breakdown;
};

/// MAC accounting per insertion at shape (N,C,H,W):
///   SE: squeeze N*C*H*W, excitation 2*N*C*h, rescale N*C*H*W
///   SA: pooling 2*N*C*H*W, conv N*2*k^2*H*W, rescale N*C*H*W
/// Throws UsageError if the plan does not validate against the model.
template <typename T>
OverheadReport attention_overhead(const ModelGraph<T>& model, const PlacementPlan& plan,
                                  const Shape& input_shape);

}  // namespace atnf
