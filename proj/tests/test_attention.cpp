#include <doctest.h>

#include "atnf/attention.hpp"
#include "atnf/gradcheck_targets.hpp"
#include "atnf/model.hpp"
#include "atnf/overhead.hpp"
#include "helpers.hpp"

using namespace atnf;

TEST_SUITE_BEGIN("attention");

namespace {

template <typename T>
SEBlock<T> random_se(int64_t channels, int64_t reduction, uint64_t seed) {
    Rng rng(seed);
    SEBlock<T> b = SEBlock<T>::make(channels, reduction, rng);
    for (auto& v : b.fc1_bias.values()) v = static_cast<T>(rng.normal() * 0.1);
    for (auto& v : b.fc2_weight.values()) v = static_cast<T>(rng.normal() * 0.5);
    for (auto& v : b.fc2_bias.values()) v = static_cast<T>(rng.normal() * 0.1);
    return b;
}

}  // namespace

TEST_CASE("freshly built SE applies a uniform 0.5 gate") {
    Rng rng(0);
    SEBlock<float> block = SEBlock<float>::make(8, 4, rng);
    Tensor<float> x = testutil::randn<float>({2, 8, 5, 5}, 1);
    Tensor<float> y = se_forward(x, block);
    for (int64_t i = 0; i < x.numel(); ++i)
        CHECK(y[static_cast<size_t>(i)] == 0.5f * x[static_cast<size_t>(i)]);
}

TEST_CASE("SE on a zero input returns zeros") {
    SEBlock<float> block = random_se<float>(8, 4, 2);
    Tensor<float> x = Tensor<float>::zeros({1, 8, 3, 3});
    Tensor<float> y = se_forward(x, block);
    for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[static_cast<size_t>(i)] == 0.f);
}

TEST_CASE("SE equals the step-by-step composition of primitives") {
    SEBlock<double> block = random_se<double>(8, 2, 0);
    Tensor<double> x = testutil::randn<double>({2, 8, 4, 6}, 0);
    Tensor<double> got = se_forward(x, block);

    // oracle: compose the five primitives by hand
    Tensor<double> z = reshape(global_spatial_pool(x, PoolMode::Avg), {2, 8});
    Tensor<double> h = activation(linear(z, block.fc1_weight, block.fc1_bias), ActKind::ReLU);
    Tensor<double> s = activation(linear(h, block.fc2_weight, block.fc2_bias), ActKind::Sigmoid);
    Tensor<double> want = mul(x, reshape(s, {2, 8, 1, 1}));
    CHECK(testutil::bitwise_equal(got, want));
}

TEST_CASE("SE dense excitation equals the 1x1-convolution formulation") {
    SEBlock<double> block = random_se<double>(6, 3, 7);
    Tensor<double> x = testutil::randn<double>({2, 6, 5, 5}, 8);

    Tensor<double> got = se_forward(x, block);

    // same weights reshaped into 1x1 conv kernels, applied to the squeezed map
    Tensor<double> z4 = global_spatial_pool(x, PoolMode::Avg);  // (2,6,1,1)
    Tensor<double> w1 = block.fc1_weight.view_copy({2, 6, 1, 1});
    Tensor<double> w2 = block.fc2_weight.view_copy({6, 2, 1, 1});
    Tensor<double> h = activation(conv2d(z4, w1, std::optional<Tensor<double>>(block.fc1_bias), 1, 0),
                                  ActKind::ReLU);
    Tensor<double> s = activation(conv2d(h, w2, std::optional<Tensor<double>>(block.fc2_bias), 1, 0),
                                  ActKind::Sigmoid);
    Tensor<double> want = mul(x, s);
    CHECK(testutil::max_rel_err(got, want) < 1e-12);
}

TEST_CASE("freshly built SA applies a uniform 0.5 gate") {
    SABlock<float> block = SABlock<float>::make(7);
    Tensor<float> x = testutil::randn<float>({2, 4, 6, 6}, 3);
    Tensor<float> y = sa_forward(x, block);
    for (int64_t i = 0; i < x.numel(); ++i)
        CHECK(y[static_cast<size_t>(i)] == 0.5f * x[static_cast<size_t>(i)]);
}

TEST_CASE("SA map is spatially constant on the interior for constant input") {
    SABlock<double> block = SABlock<double>::make(7);
    Rng rng(4);
    for (auto& v : block.conv_weight.values()) v = rng.normal() * 0.2;
    block.conv_bias[0] = 0.1;
    Tensor<double> x = Tensor<double>::full({1, 3, 16, 16}, 2.0);
    Tensor<double> y = sa_forward(x, block);
    // interior = at least 3 cells from the border (7x7 kernel, padding 3)
    const double ref = y.at(0, 0, 8, 8);
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t i = 3; i < 13; ++i)
            for (int64_t j = 3; j < 13; ++j)
                CHECK(y.at(0, c, i, j) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("SA equals the step-by-step composition of primitives") {
    SABlock<double> block = SABlock<double>::make(7);
    Rng rng(0);
    for (auto& v : block.conv_weight.values()) v = rng.normal() * 0.3;
    block.conv_bias[0] = rng.normal() * 0.1;
    Tensor<double> x = testutil::randn<double>({2, 5, 6, 7}, 0);

    Tensor<double> got = sa_forward(x, block);

    std::vector<Tensor<double>> pooled = {channel_pool(x, PoolMode::Avg),
                                          channel_pool(x, PoolMode::Max)};
    Tensor<double> d = concat_channels(std::span<const Tensor<double>>(pooled));
    Tensor<double> m = activation(
        conv2d(d, block.conv_weight, std::optional<Tensor<double>>(block.conv_bias), 1, 3),
        ActKind::Sigmoid);
    Tensor<double> want = mul(x, m);
    CHECK(testutil::bitwise_equal(got, want));
}

TEST_CASE("se_param_count closed form") {
    CHECK(se_param_count(176, 16) == 4059);
    CHECK(se_param_count(16, 16) == 49);
    for (int64_t c : {1, 3, 7, 16, 64}) {
        // C == r collapses the bottleneck to width 1
        CHECK(se_param_count(c, c) == 2 * c + 1 + c);
    }
    CHECK(sa_param_count(7) == 99);
}

TEST_CASE("shape preservation and attenuation bound") {
    Rng shapes(99);
    for (int it = 0; it < 8; ++it) {
        const int64_t n = 1 + static_cast<int64_t>(shapes.uniform_int(3));
        const int64_t c = 1 + static_cast<int64_t>(shapes.uniform_int(12));
        const int64_t h = 1 + static_cast<int64_t>(shapes.uniform_int(8));
        const int64_t w = 1 + static_cast<int64_t>(shapes.uniform_int(8));
        Tensor<double> x = testutil::randn<double>({n, c, h, w}, 200 + it);
        SEBlock<double> se = random_se<double>(c, 4, 300 + it);
        Tensor<double> ys = se_forward(x, se);
        CHECK(ys.shape() == x.shape());
        SABlock<double> sa = SABlock<double>::make(7);
        Rng wr(400 + it);
        for (auto& v : sa.conv_weight.values()) v = wr.normal() * 0.3;
        Tensor<double> ya = sa_forward(x, sa);
        CHECK(ya.shape() == x.shape());
        for (int64_t i = 0; i < x.numel(); ++i) {
            // gates lie strictly inside (0,1): attention only attenuates
            CHECK(std::abs(ys[static_cast<size_t>(i)]) <= std::abs(x[static_cast<size_t>(i)]));
            CHECK(std::abs(ya[static_cast<size_t>(i)]) <= std::abs(x[static_cast<size_t>(i)]));
            if (x[static_cast<size_t>(i)] != 0.0) {
                const double gate = ys[static_cast<size_t>(i)] / x[static_cast<size_t>(i)];
                CHECK(gate > 0.0);
                CHECK(gate < 1.0);
            }
        }
    }
}

TEST_CASE("raising a channel's fc2 bias strictly raises its gate") {
    SEBlock<double> block = random_se<double>(8, 4, 5);
    Tensor<double> x = testutil::randn<double>({1, 8, 4, 4}, 6);
    for (auto& v : x.values()) v = std::abs(v) + 0.1;
    Tensor<double> before = se_forward(x, block);
    block.fc2_bias[3] += 0.7;
    Tensor<double> after = se_forward(x, block);
    for (int64_t i = 0; i < 4; ++i)
        for (int64_t j = 0; j < 4; ++j) {
            CHECK(after.at(0, 3, i, j) > before.at(0, 3, i, j));
            CHECK(after.at(0, 0, i, j) == before.at(0, 0, i, j));
        }
}

TEST_CASE("SE and SA gradients pass the finite-difference check (seeds 0-2)") {
    for (uint64_t seed : {0u, 1u, 2u}) {
        for (const char* target : {"se", "sa"}) {
            for (const TargetReport& tr : run_gradcheck_target(target, seed)) {
                INFO(target << " seed " << seed << " err " << tr.report.max_rel_err);
                CHECK(tr.report.passed(1e-4));
            }
        }
    }
}

TEST_CASE("batch independence: one batch of two equals two batches of one") {
    SEBlock<float> se = random_se<float>(6, 3, 10);
    SABlock<float> sa = SABlock<float>::make(7);
    Rng wr(11);
    for (auto& v : sa.conv_weight.values()) v = static_cast<float>(wr.normal() * 0.3);
    Tensor<float> pair = testutil::randn<float>({2, 6, 5, 5}, 12);
    Tensor<float> first({1, 6, 5, 5});
    Tensor<float> second({1, 6, 5, 5});
    std::copy(pair.data(), pair.data() + 150, first.data());
    std::copy(pair.data() + 150, pair.data() + 300, second.data());

    for (int which = 0; which < 2; ++which) {
        Tensor<float> batched = which == 0 ? se_forward(pair, se) : sa_forward(pair, sa);
        Tensor<float> a = which == 0 ? se_forward(first, se) : sa_forward(first, sa);
        Tensor<float> b = which == 0 ? se_forward(second, se) : sa_forward(second, sa);
        for (int64_t i = 0; i < 150; ++i) {
            CHECK(batched[static_cast<size_t>(i)] == a[static_cast<size_t>(i)]);
            CHECK(batched[static_cast<size_t>(i + 150)] == b[static_cast<size_t>(i)]);
        }
    }
}

TEST_CASE("attention_overhead accounting") {
    ModelGraph<float> model = build_backbone<float>(Family::VggMini, Scale::Toy, 4, 0);
    PlacementPlan empty;
    empty.family = Family::VggMini;
    OverheadReport none = attention_overhead(model, empty, {1, 3, 32, 32});
    CHECK(none.params_added == 0);
    CHECK(none.flops_added == 0);

    PlacementPlan one_sa;
    one_sa.family = Family::VggMini;
    Insertion ins;
    ins.kind = AttentionKind::SA;
    ins.hook = "b2.last";
    one_sa.insertions.push_back(ins);
    OverheadReport sa_rep = attention_overhead(model, one_sa, {1, 3, 32, 32});
    CHECK(sa_rep.params_added == 99);
    CHECK(sa_rep.breakdown.size() == 1);

    // totals equal the sum of the breakdown
    auto plans = canonical_plans(Family::VggMini, Scale::Toy);
    OverheadReport v1 = attention_overhead(model, plans.at("v1_global_se"), {1, 3, 32, 32});
    int64_t p = 0, f = 0;
    for (const auto& e : v1.breakdown) {
        p += e.params_added;
        f += e.flops_added;
    }
    CHECK(v1.params_added == p);
    CHECK(v1.flops_added == f);

    // a plan with an unknown hook is a usage error
    PlacementPlan bad;
    bad.family = Family::VggMini;
    ins.hook = "b9.last";
    bad.insertions = {ins};
    CHECK_THROWS_AS(attention_overhead(model, bad, {1, 3, 32, 32}), UsageError);
}

TEST_CASE("selective placement costs less than global for every family") {
    for (Family fam : {Family::VggMini, Family::ResNetMini, Family::InceptionMini,
                       Family::DenseNetMini, Family::EfficientNetMini}) {
        ModelGraph<float> model = build_backbone<float>(fam, Scale::Toy, 4, 0);
        auto plans = canonical_plans(fam, Scale::Toy);
        const Shape in = {1, 3, 32, 32};
        OverheadReport v1 = attention_overhead(model, plans.at("v1_global_se"), in);
        OverheadReport v2 = attention_overhead(model, plans.at("v2_selective_se"), in);
        CHECK(v2.params_added < v1.params_added);
    }
}

TEST_SUITE_END();
