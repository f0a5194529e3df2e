#include "atnf/model.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "atnf/arch_config.hpp"

namespace atnf {

// ---------------------------------------------------------------------------
// graph-building helpers

template <typename T>
int32_t ModelGraph<T>::push_node(LayerNode node) {
    nodes.push_back(std::move(node));
    return static_cast<int32_t>(nodes.size() - 1);
}

template <typename T>
int32_t ModelGraph<T>::push_param(const std::string& name, ParamGroup group, Tensor<T> value) {
    for (const auto& p : params)
        if (p.name == name) throw UsageError("duplicate parameter name: " + name);
    value.set_requires_grad(true);
    params.push_back({name, group, std::move(value)});
    return static_cast<int32_t>(params.size() - 1);
}

template <typename T>
int32_t ModelGraph<T>::add_input() {
    LayerNode n;
    n.kind = LayerNode::Kind::Input;
    n.name = "input";
    return push_node(std::move(n));
}

template <typename T>
int32_t ModelGraph<T>::add_conv(const std::string& name, int32_t in, int64_t cin, int64_t cout,
                                int64_t k, int64_t stride, int64_t padding, bool bias, Rng& rng) {
    LayerNode n;
    n.kind = LayerNode::Kind::Conv;
    n.name = name;
    n.inputs = {in};
    n.stride = stride;
    n.padding = padding;
    n.param_ids.push_back(push_param(
        name + ".weight", ParamGroup::Backbone,
        Tensor<T>::kaiming_uniform({cout, cin, k, k}, cin * k * k, rng)));
    if (bias)
        n.param_ids.push_back(push_param(name + ".bias", ParamGroup::Backbone,
                                         Tensor<T>::zeros({cout})));
    return push_node(std::move(n));
}

template <typename T>
int32_t ModelGraph<T>::add_dwconv(const std::string& name, int32_t in, int64_t channels,
                                  int64_t k, int64_t stride, int64_t padding, Rng& rng) {
    LayerNode n;
    n.kind = LayerNode::Kind::DwConv;
    n.name = name;
    n.inputs = {in};
    n.stride = stride;
    n.padding = padding;
    n.param_ids.push_back(push_param(name + ".weight", ParamGroup::Backbone,
                                     Tensor<T>::kaiming_uniform({channels, 1, k, k}, k * k, rng)));
    return push_node(std::move(n));
}

template <typename T>
int32_t ModelGraph<T>::add_bn(const std::string& name, int32_t in, int64_t channels) {
    LayerNode n;
    n.kind = LayerNode::Kind::BatchNorm;
    n.name = name;
    n.inputs = {in};
    n.param_ids.push_back(
        push_param(name + ".gamma", ParamGroup::Backbone, Tensor<T>::full({channels}, T(1))));
    n.param_ids.push_back(
        push_param(name + ".beta", ParamGroup::Backbone, Tensor<T>::zeros({channels})));
    bn_states.push_back({name, BatchNormState<T>::make(channels)});
    n.bn_state = static_cast<int32_t>(bn_states.size() - 1);
    return push_node(std::move(n));
}

template <typename T>
int32_t ModelGraph<T>::add_relu(const std::string& name, int32_t in) {
    LayerNode n;
    n.kind = LayerNode::Kind::ReLU;
    n.name = name;
    n.inputs = {in};
    return push_node(std::move(n));
}

template <typename T>
int32_t ModelGraph<T>::add_maxpool(const std::string& name, int32_t in, int64_t k,
                                   int64_t stride) {
    LayerNode n;
    n.kind = LayerNode::Kind::MaxPool;
    n.name = name;
    n.inputs = {in};
    n.pool_k = k;
    n.stride = stride;
    return push_node(std::move(n));
}

template <typename T>
int32_t ModelGraph<T>::add_avgpool(const std::string& name, int32_t in, int64_t k, int64_t stride,
                                   int64_t padding) {
    LayerNode n;
    n.kind = LayerNode::Kind::AvgPool;
    n.name = name;
    n.inputs = {in};
    n.pool_k = k;
    n.stride = stride;
    n.padding = padding;
    return push_node(std::move(n));
}

template <typename T>
int32_t ModelGraph<T>::add_gap(const std::string& name, int32_t in) {
    LayerNode n;
    n.kind = LayerNode::Kind::GlobalAvgPool;
    n.name = name;
    n.inputs = {in};
    return push_node(std::move(n));
}

template <typename T>
int32_t ModelGraph<T>::add_concat(const std::string& name, std::vector<int32_t> ins) {
    LayerNode n;
    n.kind = LayerNode::Kind::Concat;
    n.name = name;
    n.inputs = std::move(ins);
    return push_node(std::move(n));
}

template <typename T>
int32_t ModelGraph<T>::add_add(const std::string& name, int32_t a, int32_t b) {
    LayerNode n;
    n.kind = LayerNode::Kind::Add;
    n.name = name;
    n.inputs = {a, b};
    return push_node(std::move(n));
}

template <typename T>
int32_t ModelGraph<T>::add_flatten(const std::string& name, int32_t in) {
    LayerNode n;
    n.kind = LayerNode::Kind::Flatten;
    n.name = name;
    n.inputs = {in};
    return push_node(std::move(n));
}

template <typename T>
int32_t ModelGraph<T>::add_linear(const std::string& name, int32_t in, int64_t din, int64_t dout,
                                  Rng& rng) {
    LayerNode n;
    n.kind = LayerNode::Kind::Linear;
    n.name = name;
    n.inputs = {in};
    n.param_ids.push_back(push_param(name + ".weight", ParamGroup::Backbone,
                                     Tensor<T>::kaiming_uniform({dout, din}, din, rng)));
    n.param_ids.push_back(
        push_param(name + ".bias", ParamGroup::Backbone, Tensor<T>::zeros({dout})));
    return push_node(std::move(n));
}

template <typename T>
int32_t ModelGraph<T>::add_se(const std::string& name, int32_t in, int64_t channels,
                              int64_t reduction, Rng& rng) {
    SEBlock<T> block = SEBlock<T>::make(channels, reduction, rng);
    LayerNode n;
    n.kind = LayerNode::Kind::SE;
    n.name = name;
    n.inputs = {in};
    n.attn_channels = channels;
    n.attn_reduction = reduction;
    n.param_ids = {push_param(name + ".fc1.weight", ParamGroup::Attention, block.fc1_weight),
                   push_param(name + ".fc1.bias", ParamGroup::Attention, block.fc1_bias),
                   push_param(name + ".fc2.weight", ParamGroup::Attention, block.fc2_weight),
                   push_param(name + ".fc2.bias", ParamGroup::Attention, block.fc2_bias)};
    return push_node(std::move(n));
}

template <typename T>
int32_t ModelGraph<T>::add_sa(const std::string& name, int32_t in, int64_t kernel) {
    SABlock<T> block = SABlock<T>::make(kernel);
    LayerNode n;
    n.kind = LayerNode::Kind::SA;
    n.name = name;
    n.inputs = {in};
    n.attn_kernel = kernel;
    n.param_ids = {push_param(name + ".conv.weight", ParamGroup::Attention, block.conv_weight),
                   push_param(name + ".conv.bias", ParamGroup::Attention, block.conv_bias)};
    return push_node(std::move(n));
}

template <typename T>
void ModelGraph<T>::add_hook(const std::string& name, int32_t node, int64_t channels) {
    for (const auto& h : hooks)
        if (h.name == name) throw UsageError("duplicate hook name: " + name);
    hooks.push_back({name, channels, node});
}

template <typename T>
SEBlock<T> ModelGraph<T>::se_view(const LayerNode& node) const {
    SEBlock<T> b;
    b.channels = node.attn_channels;
    b.reduction = node.attn_reduction;
    b.hidden = std::max<int64_t>(1, b.channels / b.reduction);
    b.fc1_weight = params[node.param_ids[0]].value;
    b.fc1_bias = params[node.param_ids[1]].value;
    b.fc2_weight = params[node.param_ids[2]].value;
    b.fc2_bias = params[node.param_ids[3]].value;
    return b;
}

template <typename T>
SABlock<T> ModelGraph<T>::sa_view(const LayerNode& node) const {
    SABlock<T> b;
    b.kernel = node.attn_kernel;
    b.conv_weight = params[node.param_ids[0]].value;
    b.conv_bias = params[node.param_ids[1]].value;
    return b;
}

// ---------------------------------------------------------------------------
// execution

template <typename T>
std::vector<Tensor<T>> ModelGraph<T>::forward_all(const Tensor<T>& batch, Mode mode) const {
    if (batch.ndim() != 4)
        throw ShapeError("forward expects a (N,C,H,W) batch, got " + shape_str(batch.shape()));
    std::vector<Tensor<T>> acts(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i) {
        const LayerNode& n = nodes[i];
        auto in = [&](size_t j) -> const Tensor<T>& { return acts[static_cast<size_t>(n.inputs[j])]; };
        switch (n.kind) {
            case LayerNode::Kind::Input:
                acts[i] = batch;
                break;
            case LayerNode::Kind::Conv: {
                std::optional<Tensor<T>> bias;
                if (n.param_ids.size() > 1) bias = params[n.param_ids[1]].value;
                acts[i] = conv2d(in(0), params[n.param_ids[0]].value, bias, n.stride, n.padding);
                break;
            }
            case LayerNode::Kind::DwConv:
                acts[i] = depthwise_conv2d(in(0), params[n.param_ids[0]].value,
                                           std::optional<Tensor<T>>(), n.stride, n.padding);
                break;
            case LayerNode::Kind::BatchNorm:
                acts[i] = batch_norm2d(in(0), params[n.param_ids[0]].value,
                                       params[n.param_ids[1]].value,
                                       bn_states[n.bn_state].state, mode);
                break;
            case LayerNode::Kind::ReLU:
                acts[i] = activation(in(0), ActKind::ReLU);
                break;
            case LayerNode::Kind::MaxPool:
                acts[i] = max_pool2d(in(0), n.pool_k, n.stride);
                break;
            case LayerNode::Kind::AvgPool:
                acts[i] = avg_pool2d(in(0), n.pool_k, n.stride, n.padding);
                break;
            case LayerNode::Kind::GlobalAvgPool:
                acts[i] = global_spatial_pool(in(0), PoolMode::Avg);
                break;
            case LayerNode::Kind::Concat: {
                std::vector<Tensor<T>> xs;
                xs.reserve(n.inputs.size());
                for (size_t j = 0; j < n.inputs.size(); ++j) xs.push_back(in(j));
                acts[i] = concat_channels(std::span<const Tensor<T>>(xs));
                break;
            }
            case LayerNode::Kind::Add:
                acts[i] = add(in(0), in(1));
                break;
            case LayerNode::Kind::Flatten:
                acts[i] = flatten(in(0));
                break;
            case LayerNode::Kind::Linear:
                acts[i] = linear(in(0), params[n.param_ids[0]].value, params[n.param_ids[1]].value);
                break;
            case LayerNode::Kind::SE:
                acts[i] = se_forward(in(0), se_view(n));
                break;
            case LayerNode::Kind::SA:
                acts[i] = sa_forward(in(0), sa_view(n));
                break;
        }
    }
    return acts;
}

template <typename T>
Tensor<T> ModelGraph<T>::forward(const Tensor<T>& batch, Mode mode) const {
    return forward_all(batch, mode).back();
}

template <typename T>
std::vector<Shape> ModelGraph<T>::probe_shapes(const Shape& input_shape) const {
    if (input_shape.size() != 4)
        throw ShapeError("probe_shapes expects a 4-d input shape");
    std::vector<Shape> shapes(nodes.size());
    auto conv_out = [](const Shape& in, int64_t cout, int64_t kh, int64_t kw, int64_t stride,
                       int64_t pad, const std::string& name) -> Shape {
        const int64_t oh = (in[2] + 2 * pad - kh) / stride + 1;
        const int64_t ow = (in[3] + 2 * pad - kw) / stride + 1;
        if (kh > in[2] + 2 * pad || kw > in[3] + 2 * pad || oh < 1 || ow < 1)
            throw ShapeError(name + ": spatial extent " + shape_str(in) + " too small");
        return {in[0], cout, oh, ow};
    };
    for (size_t i = 0; i < nodes.size(); ++i) {
        const LayerNode& n = nodes[i];
        auto in = [&](size_t j) -> const Shape& { return shapes[static_cast<size_t>(n.inputs[j])]; };
        switch (n.kind) {
            case LayerNode::Kind::Input:
                shapes[i] = input_shape;
                break;
            case LayerNode::Kind::Conv: {
                const Shape& w = params[n.param_ids[0]].value.shape();
                if (in(0)[1] != w[1])
                    throw ShapeError(n.name + ": expects " + std::to_string(w[1]) +
                                     " channels, got " + std::to_string(in(0)[1]));
                shapes[i] = conv_out(in(0), w[0], w[2], w[3], n.stride, n.padding, n.name);
                break;
            }
            case LayerNode::Kind::DwConv: {
                const Shape& w = params[n.param_ids[0]].value.shape();
                if (in(0)[1] != w[0])
                    throw ShapeError(n.name + ": expects " + std::to_string(w[0]) +
                                     " channels, got " + std::to_string(in(0)[1]));
                shapes[i] = conv_out(in(0), w[0], w[2], w[3], n.stride, n.padding, n.name);
                break;
            }
            case LayerNode::Kind::BatchNorm:
            case LayerNode::Kind::ReLU:
            case LayerNode::Kind::SE:
            case LayerNode::Kind::SA:
                shapes[i] = in(0);
                break;
            case LayerNode::Kind::MaxPool:
                shapes[i] = conv_out(in(0), in(0)[1], n.pool_k, n.pool_k, n.stride, 0, n.name);
                break;
            case LayerNode::Kind::AvgPool:
                shapes[i] =
                    conv_out(in(0), in(0)[1], n.pool_k, n.pool_k, n.stride, n.padding, n.name);
                break;
            case LayerNode::Kind::GlobalAvgPool:
                shapes[i] = {in(0)[0], in(0)[1], 1, 1};
                break;
            case LayerNode::Kind::Concat: {
                Shape s = in(0);
                for (size_t j = 1; j < n.inputs.size(); ++j) {
                    const Shape& o = in(j);
                    if (o[0] != s[0] || o[2] != s[2] || o[3] != s[3])
                        throw ShapeError(n.name + ": concat inputs disagree on N/H/W");
                    s[1] += o[1];
                }
                shapes[i] = s;
                break;
            }
            case LayerNode::Kind::Add:
                if (in(0) != in(1))
                    throw ShapeError(n.name + ": add inputs disagree: " + shape_str(in(0)) +
                                     " vs " + shape_str(in(1)));
                shapes[i] = in(0);
                break;
            case LayerNode::Kind::Flatten: {
                const Shape& s = in(0);
                int64_t rest = 1;
                for (size_t d = 1; d < s.size(); ++d) rest *= s[d];
                shapes[i] = {s[0], rest};
                break;
            }
            case LayerNode::Kind::Linear: {
                const Shape& w = params[n.param_ids[0]].value.shape();
                if (in(0)[1] != w[1])
                    throw ShapeError(n.name + ": expects " + std::to_string(w[1]) +
                                     " input features, got " + std::to_string(in(0)[1]));
                shapes[i] = {in(0)[0], w[0]};
                break;
            }
        }
    }
    return shapes;
}

// ---------------------------------------------------------------------------
// bookkeeping

template <typename T>
int64_t ModelGraph<T>::count_params(std::optional<ParamGroup> group) const {
    int64_t total = 0;
    for (const auto& p : params)
        if (!group || p.group == *group) total += p.value.numel();
    return total;
}

template <typename T>
std::vector<Param<T>*> ModelGraph<T>::group_params(ParamGroup group) {
    std::vector<Param<T>*> out;
    for (auto& p : params)
        if (p.group == group) out.push_back(&p);
    return out;
}

template <typename T>
void ModelGraph<T>::zero_grad() {
    for (auto& p : params) p.value.zero_grad();
}

template <typename T>
int32_t ModelGraph<T>::node_index(const std::string& name) const {
    for (size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].name == name) return static_cast<int32_t>(i);
    throw UsageError("no node named " + name);
}

template <typename T>
const HookPoint* ModelGraph<T>::find_hook(const std::string& name) const {
    for (const auto& h : hooks)
        if (h.name == name) return &h;
    return nullptr;
}

template <typename T>
std::vector<std::pair<std::string, int64_t>> ModelGraph<T>::hook_table() const {
    std::vector<std::pair<std::string, int64_t>> out;
    out.reserve(hooks.size());
    for (const auto& h : hooks) out.emplace_back(h.name, h.position);
    return out;
}

template <typename T>
std::vector<typename ModelGraph<T>::NamedTensor> ModelGraph<T>::state_entries() {
    std::vector<NamedTensor> out;
    out.reserve(params.size() + 2 * bn_states.size());
    for (auto& p : params) out.push_back({p.name, &p.value});
    for (auto& s : bn_states) {
        out.push_back({s.name + ".running_mean", &s.state.running_mean});
        out.push_back({s.name + ".running_var", &s.state.running_var});
    }
    return out;
}

template <typename T>
ModelGraph<T> ModelGraph<T>::deep_clone() const {
    ModelGraph<T> out;
    out.family = family;
    out.scale = scale;
    out.num_classes = num_classes;
    out.seed = seed;
    out.input_size = input_size;
    out.plan_text = plan_text;
    out.plan_label = plan_label;
    out.nodes = nodes;
    out.hooks = hooks;
    out.params.reserve(params.size());
    for (const auto& p : params) out.params.push_back({p.name, p.group, p.value.clone()});
    out.bn_states.reserve(bn_states.size());
    for (const auto& s : bn_states)
        out.bn_states.push_back(
            {s.name, {s.state.running_mean.clone(), s.state.running_var.clone()}});
    return out;
}

// ---------------------------------------------------------------------------
// family builders

namespace {

template <typename T>
void build_vgg(ModelGraph<T>& g, Rng& rng) {
    arch::VggCfg cfg = arch::vgg_cfg(g.scale);
    int32_t cur = g.add_input();
    int64_t cin = 3;
    for (size_t b = 0; b < cfg.channels.size(); ++b) {
        const int64_t ch = cfg.channels[b];
        const std::string bp = "b" + std::to_string(b + 1);
        for (int j = 1; j <= cfg.convs_per_block[b]; ++j) {
            const std::string cn = bp + ".conv" + std::to_string(j);
            cur = g.add_conv(cn, cur, cin, ch, 3, 1, 1, true, rng);
            cur = g.add_relu(cn + ".relu", cur);
            g.add_hook(cn, cur, ch);
            cin = ch;
        }
        g.add_hook(bp + ".last", cur, ch);  // alias of the block's final conv hook
        cur = g.add_maxpool(bp + ".pool", cur, 2, 2);
    }
    const int64_t spatial = g.input_size / 32;
    const int64_t flat = cfg.channels.back() * spatial * spatial;
    cur = g.add_flatten("head.flatten", cur);
    cur = g.add_linear("head.fc1", cur, flat, cfg.head_hidden, rng);
    cur = g.add_relu("head.fc1.relu", cur);
    g.add_linear("head.fc2", cur, cfg.head_hidden, g.num_classes, rng);
}

template <typename T>
int32_t res_basic_block(ModelGraph<T>& g, Rng& rng, const std::string& name, int32_t in,
                        int64_t cin, int64_t cout, int64_t stride) {
    int32_t cur = g.add_conv(name + ".conv1", in, cin, cout, 3, stride, 1, false, rng);
    cur = g.add_bn(name + ".bn1", cur, cout);
    cur = g.add_relu(name + ".relu1", cur);
    cur = g.add_conv(name + ".conv2", cur, cout, cout, 3, 1, 1, false, rng);
    cur = g.add_bn(name + ".bn2", cur, cout);
    g.add_hook(name + ".inner", cur, cout);
    int32_t shortcut = in;
    if (cin != cout || stride != 1) {
        shortcut = g.add_conv(name + ".down.conv", in, cin, cout, 1, stride, 0, false, rng);
        shortcut = g.add_bn(name + ".down.bn", shortcut, cout);
    }
    cur = g.add_add(name + ".add", cur, shortcut);
    return g.add_relu(name + ".relu2", cur);
}

template <typename T>
void build_resnet(ModelGraph<T>& g, Rng& rng) {
    arch::ResNetCfg cfg = arch::resnet_cfg(g.scale);
    int32_t cur = g.add_input();
    if (cfg.stem_downsample) {
        cur = g.add_conv("stem.conv", cur, 3, cfg.stem_channels, 7, 2, 3, false, rng);
        cur = g.add_bn("stem.bn", cur, cfg.stem_channels);
        cur = g.add_relu("stem.relu", cur);
        cur = g.add_maxpool("stem.pool", cur, 2, 2);
    } else {
        cur = g.add_conv("stem.conv", cur, 3, cfg.stem_channels, 3, 1, 1, false, rng);
        cur = g.add_bn("stem.bn", cur, cfg.stem_channels);
        cur = g.add_relu("stem.relu", cur);
    }
    int64_t cin = cfg.stem_channels;
    for (size_t l = 0; l < cfg.channels.size(); ++l) {
        const int64_t ch = cfg.channels[l];
        const std::string lp = "layer" + std::to_string(l + 1);
        for (int b = 1; b <= cfg.blocks_per_layer; ++b) {
            const int64_t stride = b == 1 ? cfg.layer_strides[l] : 1;
            cur = res_basic_block(g, rng, lp + ".block" + std::to_string(b), cur, cin, ch, stride);
            cin = ch;
        }
        g.add_hook(lp + ".end", cur, ch);
    }
    cur = g.add_gap("gap", cur);
    cur = g.add_flatten("head.flatten", cur);
    g.add_linear("head.fc", cur, cfg.channels.back(), g.num_classes, rng);
}

template <typename T>
int32_t conv_bn_relu(ModelGraph<T>& g, Rng& rng, const std::string& name, int32_t in, int64_t cin,
                     int64_t cout, int64_t k, int64_t stride, int64_t pad) {
    int32_t cur = g.add_conv(name, in, cin, cout, k, stride, pad, false, rng);
    cur = g.add_bn(name + ".bn", cur, cout);
    return g.add_relu(name + ".relu", cur);
}

template <typename T>
int32_t inception_module(ModelGraph<T>& g, Rng& rng, const std::string& name, int32_t in,
                         int64_t cin, int64_t cout) {
    const int64_t bc = cout / 4;
    int32_t b1 = conv_bn_relu(g, rng, name + ".br1.conv", in, cin, bc, 1, 1, 0);
    int32_t b2 = conv_bn_relu(g, rng, name + ".br2.reduce", in, cin, bc, 1, 1, 0);
    b2 = conv_bn_relu(g, rng, name + ".br2.conv", b2, bc, bc, 3, 1, 1);
    int32_t b3 = conv_bn_relu(g, rng, name + ".br3.reduce", in, cin, bc, 1, 1, 0);
    b3 = conv_bn_relu(g, rng, name + ".br3.conv1", b3, bc, bc, 3, 1, 1);
    b3 = conv_bn_relu(g, rng, name + ".br3.conv2", b3, bc, bc, 3, 1, 1);
    int32_t b4 = g.add_avgpool(name + ".br4.pool", in, 3, 1, 1);
    b4 = conv_bn_relu(g, rng, name + ".br4.conv", b4, cin, bc, 1, 1, 0);
    return g.add_concat(name + ".cat", {b1, b2, b3, b4});
}

template <typename T>
void build_inception(ModelGraph<T>& g, Rng& rng) {
    arch::InceptionCfg cfg = arch::inception_cfg(g.scale);
    const bool paper = g.scale == Scale::Paper;
    int32_t cur = g.add_input();
    cur = conv_bn_relu(g, rng, "stem.conv1", cur, 3, cfg.stem_channels[0], 3, paper ? 2 : 1, 1);
    cur = conv_bn_relu(g, rng, "stem.conv2", cur, cfg.stem_channels[0], cfg.stem_channels[1], 3, 2, 1);
    int64_t cin = cfg.stem_channels[1];
    const char* names = "ABCDE";
    for (int m = 0; m < 5; ++m) {
        const std::string mp = std::string("incep") + names[m];
        cur = inception_module(g, rng, mp, cur, cin, cfg.module_channels[m]);
        cin = cfg.module_channels[m];
        g.add_hook(mp + ".end", cur, cin);
        if (m == 1 || m == 3)  // downsample after B and D
            cur = g.add_maxpool(mp + ".pool", cur, 2, 2);
    }
    g.add_hook("pre_gap", cur, cin);  // alias position: the last feature map
    cur = g.add_gap("gap", cur);
    cur = g.add_flatten("head.flatten", cur);
    g.add_linear("head.fc", cur, cin, g.num_classes, rng);
}

template <typename T>
void build_densenet(ModelGraph<T>& g, Rng& rng) {
    arch::DenseNetCfg cfg = arch::densenet_cfg(g.scale);
    int32_t cur = g.add_input();
    if (cfg.stem_downsample) {
        cur = g.add_conv("stem.conv", cur, 3, cfg.stem_channels, 7, 2, 3, false, rng);
        cur = g.add_bn("stem.bn", cur, cfg.stem_channels);
        cur = g.add_relu("stem.relu", cur);
        cur = g.add_maxpool("stem.pool", cur, 2, 2);
    } else {
        cur = g.add_conv("stem.conv", cur, 3, cfg.stem_channels, 3, 1, 1, false, rng);
        cur = g.add_bn("stem.bn", cur, cfg.stem_channels);
        cur = g.add_relu("stem.relu", cur);
    }
    int64_t ch = cfg.stem_channels;
    for (size_t b = 1; b <= cfg.layers_per_block.size(); ++b) {
        const std::string bp = "dense" + std::to_string(b);
        for (int l = 1; l <= cfg.layers_per_block[b - 1]; ++l) {
            // composite layer: BN - ReLU - 3x3 conv(growth), then concat
            const std::string ln = bp + ".layer" + std::to_string(l);
            int32_t t = g.add_bn(ln + ".bn", cur, ch);
            t = g.add_relu(ln + ".relu", t);
            t = g.add_conv(ln + ".conv", t, ch, cfg.growth, 3, 1, 1, false, rng);
            cur = g.add_concat(bp + ".cat" + std::to_string(l), {cur, t});
            ch += cfg.growth;
        }
        g.add_hook(bp + ".end", cur, ch);
        if (b < cfg.layers_per_block.size()) {
            const std::string tp = "trans" + std::to_string(b);
            int32_t t = g.add_bn(tp + ".bn", cur, ch);
            t = g.add_relu(tp + ".relu", t);
            ch /= 2;
            t = g.add_conv(tp + ".conv", t, ch * 2, ch, 1, 1, 0, false, rng);
            cur = g.add_avgpool(tp + ".pool", t, 2, 2);
            g.add_hook(tp + ".end", cur, ch);
        }
    }
    cur = g.add_bn("final.bn", cur, ch);
    cur = g.add_relu("final.relu", cur);
    g.add_hook("pre_gap", cur, ch);
    cur = g.add_gap("gap", cur);
    cur = g.add_flatten("head.flatten", cur);
    g.add_linear("head.fc", cur, ch, g.num_classes, rng);
}

template <typename T>
int32_t mbconv_block(ModelGraph<T>& g, Rng& rng, const std::string& name, int32_t in, int64_t cin,
                     int64_t cout, int64_t stride, int64_t expand) {
    const int64_t mid = cin * expand;
    int32_t cur = conv_bn_relu(g, rng, name + ".expand", in, cin, mid, 1, 1, 0);
    cur = g.add_dwconv(name + ".dw", cur, mid, 3, stride, 1, rng);
    cur = g.add_bn(name + ".dw.bn", cur, mid);
    cur = g.add_relu(name + ".dw.relu", cur);
    g.add_hook(name + ".post_dw", cur, mid);
    cur = g.add_conv(name + ".project", cur, mid, cout, 1, 1, 0, false, rng);
    cur = g.add_bn(name + ".project.bn", cur, cout);
    if (cin == cout && stride == 1) cur = g.add_add(name + ".add", cur, in);
    return cur;
}

template <typename T>
void build_efficientnet(ModelGraph<T>& g, Rng& rng) {
    arch::EfficientNetCfg cfg = arch::efficientnet_cfg(g.scale);
    int32_t cur = g.add_input();
    cur = conv_bn_relu(g, rng, "stem.conv", cur, 3, cfg.stem_channels, 3,
                       cfg.stem_downsample ? 2 : 1, 1);
    int64_t cin = cfg.stem_channels;
    for (size_t s = 1; s <= cfg.stage_channels.size(); ++s) {
        const int64_t ch = cfg.stage_channels[s - 1];
        const std::string sp = "stage" + std::to_string(s);
        for (int b = 1; b <= cfg.blocks_per_stage[s - 1]; ++b) {
            const int64_t stride = b == 1 ? cfg.stage_strides[s - 1] : 1;
            cur = mbconv_block(g, rng, sp + ".mbconv" + std::to_string(b), cur, cin, ch, stride,
                               cfg.expand_ratio);
            cin = ch;
        }
        g.add_hook(sp + ".end", cur, ch);
    }
    cur = g.add_gap("gap", cur);
    cur = g.add_flatten("head.flatten", cur);
    g.add_linear("head.fc", cur, cfg.stage_channels.back(), g.num_classes, rng);
}

}  // namespace

template <typename T>
ModelGraph<T> build_backbone(Family family, Scale scale, int64_t num_classes, uint64_t seed) {
    if (num_classes < 2) throw UsageError("build_backbone: num_classes must be at least 2");
    ModelGraph<T> g;
    g.family = family;
    g.scale = scale;
    g.num_classes = num_classes;
    g.seed = seed;
    g.input_size = arch::input_size(scale);
    PlacementPlan baseline;
    baseline.family = family;
    g.plan_text = serialize_plan(baseline);
    g.plan_label = "baseline";

    Rng rng = Rng::derive(seed, (static_cast<uint64_t>(family) << 40) ^
                                    (static_cast<uint64_t>(scale) << 32) ^
                                    static_cast<uint64_t>(num_classes));
    switch (family) {
        case Family::VggMini: build_vgg(g, rng); break;
        case Family::ResNetMini: build_resnet(g, rng); break;
        case Family::InceptionMini: build_inception(g, rng); break;
        case Family::DenseNetMini: build_densenet(g, rng); break;
        case Family::EfficientNetMini: build_efficientnet(g, rng); break;
    }

    // shape probe: verify every hook's recorded channel count
    std::vector<Shape> shapes = g.probe_shapes({1, 3, g.input_size, g.input_size});
    for (const HookPoint& h : g.hooks)
        if (shapes[static_cast<size_t>(h.position)][1] != h.channels)
            throw UsageError("hook " + h.name + " records " + std::to_string(h.channels) +
                             " channels but the probe found " +
                             std::to_string(shapes[static_cast<size_t>(h.position)][1]));
    return g;
}

template <typename T>
ModelGraph<T> attach_attention(const ModelGraph<T>& model, const PlacementPlan& plan) {
    PlacementPlan p = plan;
    if (auto err = validate_plan(p, model)) throw UsageError("attach_attention: " + err->message);

    // insertions grouped by resolved node position, keeping normalized order
    std::map<int64_t, std::vector<const Insertion*>> at_position;
    std::unordered_map<std::string, const HookPoint*> hook_by_name;
    for (const auto& h : model.hooks) hook_by_name[h.name] = &h;
    for (const Insertion& ins : p.insertions)
        at_position[hook_by_name[ins.hook]->position].push_back(&ins);

    ModelGraph<T> out = model.deep_clone();
    out.plan_text = serialize_plan(p);
    out.nodes.clear();
    out.hooks.clear();

    Rng rng = Rng::derive(model.seed, 0xA77E4710ull);
    std::vector<int32_t> remap(model.nodes.size());
    for (size_t i = 0; i < model.nodes.size(); ++i) {
        LayerNode copy = model.nodes[i];
        for (int32_t& in : copy.inputs) in = remap[static_cast<size_t>(in)];
        out.nodes.push_back(std::move(copy));
        int32_t cur = static_cast<int32_t>(out.nodes.size() - 1);
        const int32_t node_new_index = cur;

        auto it = at_position.find(static_cast<int64_t>(i));
        if (it != at_position.end()) {
            for (const Insertion* ins : it->second) {
                const int64_t channels = hook_by_name[ins->hook]->channels;
                if (ins->kind == AttentionKind::SE)
                    cur = out.add_se("attn." + ins->hook + ".se", cur, channels, ins->reduction,
                                     rng);
                else
                    cur = out.add_sa("attn." + ins->hook + ".sa", cur, ins->kernel);
            }
        }
        remap[i] = cur;

        for (const HookPoint& h : model.hooks)
            if (h.position == static_cast<int64_t>(i))
                out.hooks.push_back({h.name, h.channels, node_new_index});
    }
    return out;
}

template <typename T>
ModelGraph<T> build_model(Family family, Scale scale, int64_t num_classes, uint64_t seed,
                          const PlacementPlan& plan, const std::string& plan_label) {
    ModelGraph<T> g = build_backbone<T>(family, scale, num_classes, seed);
    if (!plan.insertions.empty()) g = attach_attention(g, plan);
    g.plan_label = plan_label;
    return g;
}

template class ModelGraph<float>;
template class ModelGraph<double>;
template ModelGraph<float> build_backbone<float>(Family, Scale, int64_t, uint64_t);
template ModelGraph<double> build_backbone<double>(Family, Scale, int64_t, uint64_t);
template ModelGraph<float> attach_attention<float>(const ModelGraph<float>&,
                                                   const PlacementPlan&);
template ModelGraph<double> attach_attention<double>(const ModelGraph<double>&,
                                                     const PlacementPlan&);
template ModelGraph<float> build_model<float>(Family, Scale, int64_t, uint64_t,
                                              const PlacementPlan&, const std::string&);
template ModelGraph<double> build_model<double>(Family, Scale, int64_t, uint64_t,
                                                const PlacementPlan&, const std::string&);

}  // namespace atnf
