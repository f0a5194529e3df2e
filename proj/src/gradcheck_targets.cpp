#include "atnf/gradcheck_targets.hpp"

#include "atnf/attention.hpp"
#include "atnf/model.hpp"

namespace atnf {

namespace {

using DTensor = Tensor<double>;

DTensor randn(Shape shape, Rng& rng, double stddev = 1.0) {
    return DTensor::randn(std::move(shape), rng, stddev);
}

/// Random positive-and-negative weighting so every output coordinate gets a
/// distinct gradient signal.
DTensor weights_like(const Shape& shape, Rng& rng) { return DTensor::randn(Shape(shape), rng); }

Tensor<double> weighted_sum(const Tensor<double>& x, const Tensor<double>& c) {
    return sum(mul(x, c));
}

struct OpCase {
    std::string name;
    std::vector<CheckedParam> params;
    std::function<Tensor<double>()> fn;
};

std::vector<OpCase> ops_battery(uint64_t seed) {
    std::vector<OpCase> cases;
    auto add_case = [&](std::string name, std::vector<CheckedParam> params,
                        std::function<Tensor<double>()> fn) {
        cases.push_back({std::move(name), std::move(params), std::move(fn)});
    };
    Rng rng = Rng::derive(seed, 0x09C4EC);

    {
        DTensor x = randn({2, 3, 6, 7}, rng), w = randn({4, 3, 3, 3}, rng, 0.5),
                b = randn({4}, rng, 0.1);
        DTensor c = weights_like({2, 4, 6, 7}, rng);
        add_case("conv2d_s1p1", {{"x", x}, {"w", w}, {"b", b}}, [=] {
            return weighted_sum(conv2d(x, w, std::optional<DTensor>(b), 1, 1), c);
        });
    }
    {
        DTensor x = randn({2, 3, 7, 7}, rng), w = randn({2, 3, 5, 5}, rng, 0.3);
        DTensor c = weights_like({2, 2, 2, 2}, rng);
        add_case("conv2d_s2p0_k5", {{"x", x}, {"w", w}}, [=] {
            return weighted_sum(conv2d(x, w, std::optional<DTensor>(), 2, 0), c);
        });
    }
    {
        DTensor x = randn({2, 4, 6, 6}, rng), w = randn({4, 1, 3, 3}, rng, 0.5);
        DTensor c = weights_like({2, 4, 3, 3}, rng);
        add_case("depthwise_conv2d_s2", {{"x", x}, {"w", w}}, [=] {
            return weighted_sum(depthwise_conv2d(x, w, std::optional<DTensor>(), 2, 1), c);
        });
    }
    {
        DTensor x = randn({2, 3, 6, 6}, rng);
        DTensor c = weights_like({2, 3, 3, 3}, rng);
        add_case("max_pool2d", {{"x", x}},
                 [=] { return weighted_sum(max_pool2d(x, 2, 2), c); });
    }
    {
        DTensor x = randn({2, 3, 7, 7}, rng);
        DTensor c = weights_like({2, 3, 4, 4}, rng);
        add_case("avg_pool2d_pad", {{"x", x}},
                 [=] { return weighted_sum(avg_pool2d(x, 3, 2, 1), c); });
    }
    {
        DTensor x = randn({2, 5, 4, 4}, rng);
        DTensor c = weights_like({2, 5, 1, 1}, rng);
        add_case("global_pool_avg", {{"x", x}},
                 [=] { return weighted_sum(global_spatial_pool(x, PoolMode::Avg), c); });
        add_case("global_pool_max", {{"x", x}},
                 [=] { return weighted_sum(global_spatial_pool(x, PoolMode::Max), c); });
    }
    {
        DTensor x = randn({2, 6, 3, 3}, rng);
        DTensor c = weights_like({2, 1, 3, 3}, rng);
        add_case("channel_pool_avg", {{"x", x}},
                 [=] { return weighted_sum(channel_pool(x, PoolMode::Avg), c); });
        add_case("channel_pool_max", {{"x", x}},
                 [=] { return weighted_sum(channel_pool(x, PoolMode::Max), c); });
    }
    {
        DTensor x = randn({3, 5}, rng), w = randn({4, 5}, rng, 0.5), b = randn({4}, rng, 0.1);
        DTensor c = weights_like({3, 4}, rng);
        add_case("linear", {{"x", x}, {"w", w}, {"b", b}},
                 [=] { return weighted_sum(linear(x, w, b), c); });
    }
    {
        DTensor x = randn({2, 20}, rng);
        DTensor c = weights_like({2, 20}, rng);
        add_case("relu", {{"x", x}},
                 [=] { return weighted_sum(activation(x, ActKind::ReLU), c); });
        add_case("sigmoid", {{"x", x}},
                 [=] { return weighted_sum(activation(x, ActKind::Sigmoid), c); });
    }
    {
        DTensor x = randn({3, 4, 5, 5}, rng), g = randn({4}, rng, 0.3), b = randn({4}, rng, 0.3);
        for (auto& v : g.values()) v += 1.0;
        DTensor c = weights_like({3, 4, 5, 5}, rng);
        // fresh state per evaluation; train-mode output ignores running stats
        add_case("batch_norm_train", {{"x", x}, {"gamma", g}, {"beta", b}}, [=] {
            BatchNormState<double> state = BatchNormState<double>::make(4);
            return weighted_sum(batch_norm2d(x, g, b, state, Mode::Train), c);
        });
    }
    {
        DTensor a = randn({2, 3, 4, 4}, rng), b = randn({2, 3, 1, 1}, rng);
        DTensor c = weights_like({2, 3, 4, 4}, rng);
        add_case("broadcast_add_c11", {{"a", a}, {"b", b}},
                 [=] { return weighted_sum(add(a, b), c); });
        DTensor m = randn({2, 1, 4, 4}, rng);
        add_case("broadcast_mul_1hw", {{"a", a}, {"m", m}},
                 [=] { return weighted_sum(mul(a, m), c); });
        DTensor s = randn({2, 3, 4, 4}, rng);
        add_case("mul_same_shape", {{"a", a}, {"s", s}},
                 [=] { return weighted_sum(mul(a, s), c); });
    }
    {
        DTensor logits = randn({4, 5}, rng);
        std::vector<int> labels = {0, 3, 2, 1};
        add_case("softmax_cross_entropy", {{"logits", logits}},
                 [=] { return softmax_cross_entropy(logits, labels); });
    }
    {
        DTensor a = randn({2, 2, 3, 3}, rng), b = randn({2, 3, 3, 3}, rng);
        DTensor c = weights_like({2, 5, 3, 3}, rng);
        add_case("concat_channels", {{"a", a}, {"b", b}}, [=] {
            std::vector<DTensor> xs = {a, b};
            return weighted_sum(concat_channels(std::span<const DTensor>(xs)), c);
        });
    }
    {
        DTensor x = randn({2, 3, 2, 2}, rng);
        DTensor c = weights_like({2, 12}, rng);
        add_case("flatten", {{"x", x}}, [=] { return weighted_sum(flatten(x), c); });
        add_case("scale_sum", {{"x", x}}, [=] { return sum(scale(x, 0.7)); });
    }
    return cases;
}

}  // namespace

std::vector<TargetReport> run_gradcheck_target(const std::string& target, uint64_t seed,
                                               double eps) {
    GradCheckOptions opts;
    opts.eps = eps;
    std::vector<TargetReport> out;

    if (target == "ops") {
        for (OpCase& c : ops_battery(seed)) {
            out.push_back({c.name, grad_check(c.fn, c.params, opts)});
        }
        return out;
    }

    if (target == "se") {
        Rng rng = Rng::derive(seed, 0x5E5E5E);
        SEBlock<double> block = SEBlock<double>::make(8, 4, rng);
        // randomize the zero-initialized gate layers so their gradients are live
        for (auto& v : block.fc2_weight.values()) v = rng.normal() * 0.5;
        for (auto& v : block.fc2_bias.values()) v = rng.normal() * 0.1;
        for (auto& v : block.fc1_bias.values()) v = rng.normal() * 0.1;
        Tensor<double> x = Tensor<double>::randn({2, 8, 5, 6}, rng);
        std::vector<CheckedParam> params = {{"x", x},
                                            {"fc1.weight", block.fc1_weight},
                                            {"fc1.bias", block.fc1_bias},
                                            {"fc2.weight", block.fc2_weight},
                                            {"fc2.bias", block.fc2_bias}};
        Tensor<double> c = Tensor<double>::randn({2, 8, 5, 6}, rng);
        auto fn = [=] { return sum(mul(se_forward(x, block), c)); };
        out.push_back({"se_block", grad_check(fn, params, opts)});
        return out;
    }

    if (target == "sa") {
        Rng rng = Rng::derive(seed, 0x5A5A5A);
        SABlock<double> block = SABlock<double>::make(7);
        for (auto& v : block.conv_weight.values()) v = rng.normal() * 0.3;
        for (auto& v : block.conv_bias.values()) v = rng.normal() * 0.1;
        Tensor<double> x = Tensor<double>::randn({2, 4, 6, 5}, rng);
        std::vector<CheckedParam> params = {{"x", x},
                                            {"conv.weight", block.conv_weight},
                                            {"conv.bias", block.conv_bias}};
        Tensor<double> c = Tensor<double>::randn({2, 4, 6, 5}, rng);
        auto fn = [=] { return sum(mul(sa_forward(x, block), c)); };
        out.push_back({"sa_block", grad_check(fn, params, opts)});
        return out;
    }

    if (target == "model") {
        Rng rng = Rng::derive(seed, 0x30DE1);
        ModelGraph<double> model = build_model<double>(
            Family::VggMini, Scale::Toy, 4, seed,
            canonical_plans(Family::VggMini, Scale::Toy).at("v3_hybrid"), "canonical:v3");
        // randomize attention gate layers so their gradients are live
        for (auto& p : model.params)
            if (p.group == ParamGroup::Attention)
                for (auto& v : p.value.values()) v += rng.normal() * 0.2;
        Tensor<double> x = Tensor<double>::randn({1, 3, 32, 32}, rng, 0.5);
        std::vector<int> labels = {2};
        std::vector<CheckedParam> params;
        for (auto& p : model.params) params.push_back({p.name, p.value});
        auto fn = [&model, x, labels] {
            return softmax_cross_entropy(model.forward(x, Mode::Train), labels);
        };
        GradCheckOptions model_opts = opts;
        model_opts.max_coords_per_param = 4;
        model_opts.sample_seed = seed;
        out.push_back({"vgg_mini_v3_hybrid", grad_check(fn, params, model_opts)});
        return out;
    }

    throw UsageError("unknown gradcheck target '" + target +
                     "' (expected ops, se, sa, or model)");
}

}  // namespace atnf
