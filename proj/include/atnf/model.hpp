#pragma once

#include <optional>
#include <string>
#include <vector>

#include "atnf/attention.hpp"
#include "atnf/ops.hpp"
#include "atnf/plan.hpp"

namespace atnf {

enum class ParamGroup { Backbone, Attention };

template <typename T>
struct Param {
    std::string name;  // hierarchical, unique within a graph
    ParamGroup group = ParamGroup::Backbone;
    Tensor<T> value;
};

/// A named position in the graph where attention can be spliced in. The
/// channel count is verified by a shape probe when the graph is built.
struct HookPoint {
    std::string name;
    int64_t channels = 0;
    int64_t position = 0;  // node index whose output the hook taps
};

/// One executable graph node. Parameters are registry indices, so cloning a
/// graph only has to clone the registry.
struct LayerNode {
    enum class Kind {
        Input,
        Conv,
        DwConv,
        BatchNorm,
        ReLU,
        MaxPool,
        AvgPool,
        GlobalAvgPool,
        Concat,
        Add,
        Flatten,
        Linear,
        SE,
        SA
    };
    Kind kind = Kind::Input;
    std::string name;
    std::vector<int32_t> inputs;
    int64_t stride = 1;
    int64_t padding = 0;
    int64_t pool_k = 0;
    std::vector<int32_t> param_ids;
    int32_t bn_state = -1;
    // attention config (SE: channels+reduction, SA: kernel)
    int64_t attn_channels = 0;
    int64_t attn_reduction = 16;
    int64_t attn_kernel = 7;
};

/// Ordered computation graph for one backbone (plus any attached attention),
/// with named hook points and a parameter registry split into Backbone and
/// Attention groups.
template <typename T>
class ModelGraph {
public:
    struct NamedBnState {
        std::string name;
        BatchNormState<T> state;
    };

    Family family = Family::VggMini;
    Scale scale = Scale::Toy;
    int64_t num_classes = 0;
    uint64_t seed = 0;
    int64_t input_size = 0;
    std::string plan_text;   // serialized plan this graph was built with
    std::string plan_label;  // human-facing plan name for reports

    std::vector<LayerNode> nodes;
    std::vector<HookPoint> hooks;
    std::vector<Param<T>> params;
    // running statistics are execution state, not structure
    mutable std::vector<NamedBnState> bn_states;

    /// Runs the graph; Train engages batch statistics (and the active tape,
    /// if any), Eval uses running statistics.
    Tensor<T> forward(const Tensor<T>& batch, Mode mode) const;

    /// Like forward but returns every node activation (test instrumentation).
    std::vector<Tensor<T>> forward_all(const Tensor<T>& batch, Mode mode) const;

    /// Static shape inference over the graph for a given input shape.
    std::vector<Shape> probe_shapes(const Shape& input_shape) const;

    int64_t count_params(std::optional<ParamGroup> group = std::nullopt) const;
    std::vector<Param<T>*> group_params(ParamGroup group);
    void zero_grad();

    int32_t node_index(const std::string& name) const;
    const HookPoint* find_hook(const std::string& name) const;
    std::vector<std::pair<std::string, int64_t>> hook_table() const;

    /// Every serializable tensor: trainable parameters plus batch-norm
    /// running statistics, addressed by unique name.
    struct NamedTensor {
        std::string name;
        Tensor<T>* tensor;
    };
    std::vector<NamedTensor> state_entries();

    ModelGraph deep_clone() const;

    // graph-building helpers (public so tests can assemble custom graphs)
    int32_t add_input();
    int32_t add_conv(const std::string& name, int32_t in, int64_t cin, int64_t cout, int64_t k,
                     int64_t stride, int64_t padding, bool bias, Rng& rng);
    int32_t add_dwconv(const std::string& name, int32_t in, int64_t channels, int64_t k,
                       int64_t stride, int64_t padding, Rng& rng);
    int32_t add_bn(const std::string& name, int32_t in, int64_t channels);
    int32_t add_relu(const std::string& name, int32_t in);
    int32_t add_maxpool(const std::string& name, int32_t in, int64_t k, int64_t stride);
    int32_t add_avgpool(const std::string& name, int32_t in, int64_t k, int64_t stride,
                        int64_t padding = 0);
    int32_t add_gap(const std::string& name, int32_t in);
    int32_t add_concat(const std::string& name, std::vector<int32_t> ins);
    int32_t add_add(const std::string& name, int32_t a, int32_t b);
    int32_t add_flatten(const std::string& name, int32_t in);
    int32_t add_linear(const std::string& name, int32_t in, int64_t din, int64_t dout, Rng& rng);
    int32_t add_se(const std::string& name, int32_t in, int64_t channels, int64_t reduction,
                   Rng& rng);
    int32_t add_sa(const std::string& name, int32_t in, int64_t kernel);
    void add_hook(const std::string& name, int32_t node, int64_t channels);

    SEBlock<T> se_view(const LayerNode& node) const;
    SABlock<T> sa_view(const LayerNode& node) const;

private:
    int32_t push_node(LayerNode node);
    int32_t push_param(const std::string& name, ParamGroup group, Tensor<T> value);
};

/// Deterministic construction: identical arguments give bitwise-identical
/// parameters and outputs.
template <typename T>
ModelGraph<T> build_backbone(Family family, Scale scale, int64_t num_classes, uint64_t seed);

template <typename T>
const std::vector<HookPoint>& list_hook_points(const ModelGraph<T>& model) {
    return model.hooks;
}

/// Validates + normalizes the plan against the model's hooks.
template <typename T>
std::optional<PlanParseError> validate_plan(PlacementPlan& plan, const ModelGraph<T>& model) {
    if (plan.family != model.family)
        throw UsageError(std::string("plan family ") + family_name(plan.family) +
                         " does not match model family " + family_name(model.family));
    return validate_plan(plan, model.hook_table());
}

/// Returns a new graph with SE/SA blocks spliced in at the plan's hooks.
/// The original graph is untouched; backbone parameters are deep-copied so
/// the two graphs train independently.
template <typename T>
ModelGraph<T> attach_attention(const ModelGraph<T>& model, const PlacementPlan& plan);

/// Builds a backbone and attaches a plan in one step (plan may be baseline).
template <typename T>
ModelGraph<T> build_model(Family family, Scale scale, int64_t num_classes, uint64_t seed,
                          const PlacementPlan& plan, const std::string& plan_label);

}  // namespace atnf
