#include <doctest.h>

#include "helpers.hpp"

using namespace atnf;

TEST_SUITE_BEGIN("tensor-ops");

TEST_CASE("conv2d 1x1 scaling") {
    Tensor<float> x({1, 1, 1, 1}, {5.f});
    Tensor<float> w({1, 1, 1, 1}, {2.f});
    Tensor<float> y = conv2d(x, w, std::optional<Tensor<float>>(), 1, 0);
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y[0] == doctest::Approx(10.f));
}

TEST_CASE("conv2d 2x2 identity kernel matches the naive oracle") {
    Tensor<double> x({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor<double> w({1, 1, 2, 2}, {1, 0, 0, 1});
    Tensor<double> want = oracle::conv2d_naive(x, w, nullptr, 1, 0);
    Tensor<double> got = conv2d(x, w, std::optional<Tensor<double>>(), 1, 0);
    CHECK(want[0] == 5.0);  // 1*1 + 4*1, frozen from the oracle
    CHECK(got[0] == doctest::Approx(want[0]));
}

TEST_CASE("conv2d padding preserves 224x224 shape") {
    Tensor<float> x = testutil::randn<float>({1, 3, 224, 224}, 0);
    Tensor<float> w = testutil::randn<float>({64, 3, 3, 3}, 1, 0.1);
    Tensor<float> y = conv2d(x, w, std::optional<Tensor<float>>(), 1, 1);
    CHECK(y.shape() == Shape{1, 64, 224, 224});
}

TEST_CASE("conv2d random shapes match the naive oracle") {
    Rng rng(42);
    for (int it = 0; it < 40; ++it) {
        const int64_t n = 1 + static_cast<int64_t>(rng.uniform_int(3));
        const int64_t ci = 1 + static_cast<int64_t>(rng.uniform_int(4));
        const int64_t co = 1 + static_cast<int64_t>(rng.uniform_int(3));
        const int64_t h = 3 + static_cast<int64_t>(rng.uniform_int(6));
        const int64_t w = 3 + static_cast<int64_t>(rng.uniform_int(6));
        const int64_t k = 1 + 2 * static_cast<int64_t>(rng.uniform_int(2));
        const int64_t stride = 1 + static_cast<int64_t>(rng.uniform_int(2));
        const int64_t pad = static_cast<int64_t>(rng.uniform_int(2));
        if (k > h + 2 * pad || k > w + 2 * pad) continue;
        Tensor<double> x = Tensor<double>::randn({n, ci, h, w}, rng);
        Tensor<double> wt = Tensor<double>::randn({co, ci, k, k}, rng);
        Tensor<double> b = Tensor<double>::randn({co}, rng);
        Tensor<double> want = oracle::conv2d_naive(x, wt, &b, stride, pad);
        Tensor<double> got = conv2d(x, wt, std::optional<Tensor<double>>(b), stride, pad);
        CHECK(testutil::max_rel_err(want, got) < 1e-12);
    }
}

TEST_CASE("conv2d errors") {
    Tensor<float> x = testutil::randn<float>({1, 3, 4, 4}, 0);
    Tensor<float> w_badc = testutil::randn<float>({2, 4, 3, 3}, 1);
    CHECK_THROWS_AS(conv2d(x, w_badc, std::optional<Tensor<float>>(), 1, 1), ShapeError);
    Tensor<float> w_big = testutil::randn<float>({2, 3, 7, 7}, 1);
    CHECK_THROWS_AS(conv2d(x, w_big, std::optional<Tensor<float>>(), 1, 0), ShapeError);
    Tensor<float> bad = x.clone();
    bad[0] = std::numeric_limits<float>::quiet_NaN();
    Tensor<float> w = testutil::randn<float>({2, 3, 3, 3}, 1);
    CHECK_THROWS_AS(conv2d(bad, w, std::optional<Tensor<float>>(), 1, 1), NumericError);
}

TEST_CASE("max_pool2d examples") {
    Tensor<float> x({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(max_pool2d(x, 2, 2)[0] == 4.f);

    Tensor<float> c = Tensor<float>::full({1, 2, 4, 4}, 7.f);
    Tensor<float> pooled = max_pool2d(c, 2, 2);
    for (int64_t i = 0; i < pooled.numel(); ++i) CHECK(pooled[static_cast<size_t>(i)] == 7.f);

    std::vector<float> ramp(16);
    for (int i = 0; i < 16; ++i) ramp[static_cast<size_t>(i)] = static_cast<float>(i);
    Tensor<float> r({1, 1, 4, 4}, ramp);
    Tensor<float> want = oracle::max_pool_naive(r, 2, 2);
    Tensor<float> got = max_pool2d(r, 2, 2);
    CHECK(want.values() == std::vector<float>{5, 7, 13, 15});
    CHECK(got.values() == want.values());

    CHECK_THROWS_AS(max_pool2d(x, 3, 1), ShapeError);
}

TEST_CASE("global_spatial_pool") {
    Tensor<float> x({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(global_spatial_pool(x, PoolMode::Avg)[0] == doctest::Approx(2.5f));
    CHECK(global_spatial_pool(x, PoolMode::Max)[0] == 4.f);

    Tensor<double> r = testutil::randn<double>({2, 8, 5, 5}, 3);
    Tensor<double> avg = global_spatial_pool(r, PoolMode::Avg);
    for (int64_t n = 0; n < 2; ++n)
        for (int64_t c = 0; c < 8; ++c) {
            double s = 0;
            for (int64_t i = 0; i < 5; ++i)
                for (int64_t j = 0; j < 5; ++j) s += r.at(n, c, i, j);
            CHECK(avg.at(n, c, 0, 0) == doctest::Approx(s / 25.0).epsilon(1e-12));
        }
}

TEST_CASE("channel_pool") {
    Tensor<float> x({1, 2, 1, 1}, {1, 3});
    CHECK(channel_pool(x, PoolMode::Avg)[0] == doctest::Approx(2.f));
    CHECK(channel_pool(x, PoolMode::Max)[0] == 3.f);

    Tensor<double> r = testutil::randn<double>({1, 16, 4, 4}, 4);
    Tensor<double> avg = channel_pool(r, PoolMode::Avg);
    Tensor<double> mx = channel_pool(r, PoolMode::Max);
    for (int64_t y = 0; y < 4; ++y)
        for (int64_t xx = 0; xx < 4; ++xx) {
            CHECK(avg.at(0, 0, y, xx) ==
                  doctest::Approx(oracle::channel_reduce_naive(r, 0, y, xx, false)).epsilon(1e-12));
            CHECK(mx.at(0, 0, y, xx) ==
                  doctest::Approx(oracle::channel_reduce_naive(r, 0, y, xx, true)));
        }
}

TEST_CASE("linear") {
    // identity weights, zero bias
    Tensor<float> x({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor<float> eye = Tensor<float>::zeros({3, 3});
    for (int i = 0; i < 3; ++i) eye[static_cast<size_t>(i * 3 + i)] = 1.f;
    Tensor<float> zero_b = Tensor<float>::zeros({3});
    CHECK(linear(x, eye, zero_b).values() == x.values());

    // hand matrix multiply: [1,2] * [[3,4]]^T + [5] = 3 + 8 + 5
    Tensor<float> x2({1, 2}, {1, 2});
    Tensor<float> w({1, 2}, {3, 4});
    Tensor<float> b({1}, {5});
    CHECK(linear(x2, w, b)[0] == doctest::Approx(16.f));

    // zero weights: every row equals the bias
    Tensor<float> zw = Tensor<float>::zeros({2, 3});
    Tensor<float> cb({2}, {0.5f, -1.f});
    Tensor<float> y = linear(x, zw, cb);
    CHECK(y.values() == std::vector<float>{0.5f, -1.f, 0.5f, -1.f});

    CHECK_THROWS_AS(linear(x2, eye, zero_b), ShapeError);
}

TEST_CASE("activation") {
    Tensor<float> x({1, 4}, {-2, 3, 0, -0.5f});
    Tensor<float> r = activation(x, ActKind::ReLU);
    CHECK(r.values() == std::vector<float>{0, 3, 0, 0});
    Tensor<float> s = activation(Tensor<float>({1, 1}, {0.f}), ActKind::Sigmoid);
    CHECK(s[0] == doctest::Approx(0.5f));

    Tensor<double> z = testutil::randn<double>({1, 64}, 5, 3.0);
    Tensor<double> pos = activation(z, ActKind::Sigmoid);
    Tensor<double> neg = activation(scale(z, -1.0), ActKind::Sigmoid);
    for (int64_t i = 0; i < z.numel(); ++i)
        CHECK(pos[static_cast<size_t>(i)] + neg[static_cast<size_t>(i)] ==
              doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("batch_norm2d train normalizes, eval uses running stats") {
    Tensor<double> x = testutil::randn<double>({4, 3, 6, 6}, 6, 2.0);
    for (auto& v : x.values()) v += 1.5;
    Tensor<double> gamma = Tensor<double>::full({3}, 1.0);
    Tensor<double> beta = Tensor<double>::zeros({3});
    auto state = BatchNormState<double>::make(3);
    Tensor<double> y = batch_norm2d(x, gamma, beta, state, Mode::Train);
    const int64_t cnt = 4 * 6 * 6;
    for (int64_t c = 0; c < 3; ++c) {
        double mean = 0, var = 0;
        for (int64_t n = 0; n < 4; ++n)
            for (int64_t i = 0; i < 6; ++i)
                for (int64_t j = 0; j < 6; ++j) mean += y.at(n, c, i, j);
        mean /= cnt;
        for (int64_t n = 0; n < 4; ++n)
            for (int64_t i = 0; i < 6; ++i)
                for (int64_t j = 0; j < 6; ++j) {
                    const double d = y.at(n, c, i, j) - mean;
                    var += d * d;
                }
        var /= cnt;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }

    // gamma = 0 -> output equals beta everywhere
    Tensor<double> g0 = Tensor<double>::zeros({3});
    Tensor<double> b2({3}, {1.0, -2.0, 0.25});
    auto state2 = BatchNormState<double>::make(3);
    Tensor<double> y2 = batch_norm2d(x, g0, b2, state2, Mode::Train);
    for (int64_t n = 0; n < 4; ++n)
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t i = 0; i < 6; ++i)
                for (int64_t j = 0; j < 6; ++j) CHECK(y2.at(n, c, i, j) == b2[static_cast<size_t>(c)]);

    // eval with fresh stats (mean 0, var 1): y = x / sqrt(1 + eps)
    auto state3 = BatchNormState<double>::make(3);
    Tensor<double> y3 = batch_norm2d(x, gamma, beta, state3, Mode::Eval);
    const double scale3 = 1.0 / std::sqrt(1.0 + kBatchNormEps);
    CHECK(testutil::max_rel_err(y3, scale(x, scale3)) < 1e-12);

    // Train precondition: N*H*W >= 2
    Tensor<double> tiny = testutil::randn<double>({1, 3, 1, 1}, 7);
    auto state4 = BatchNormState<double>::make(3);
    CHECK_THROWS_AS(batch_norm2d(tiny, gamma, beta, state4, Mode::Train), ShapeError);
}

TEST_CASE("broadcast binary") {
    Tensor<float> x = testutil::randn<float>({2, 3, 4, 4}, 8);
    Tensor<float> ones = Tensor<float>::full({2, 3, 4, 4}, 1.f);
    CHECK(mul(x, ones).values() == x.values());

    Tensor<float> s({1, 3, 1, 1}, {2.f, 0.5f, -1.f});
    Tensor<float> scaled = mul(x, s);
    for (int64_t n = 0; n < 2; ++n)
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t i = 0; i < 4; ++i)
                for (int64_t j = 0; j < 4; ++j)
                    CHECK(scaled.at(n, c, i, j) ==
                          doctest::Approx(x.at(n, c, i, j) * s[static_cast<size_t>(c)]));

    Tensor<float> neg = scale(x, -1.f);
    Tensor<float> zero = add(x, neg);
    for (int64_t i = 0; i < zero.numel(); ++i) CHECK(zero[static_cast<size_t>(i)] == 0.f);

    Tensor<float> bad = testutil::randn<float>({1, 2, 1, 1}, 9);
    CHECK_THROWS_AS(add(x, bad), ShapeError);
}

TEST_CASE("softmax_cross_entropy") {
    Tensor<double> uniform = Tensor<double>::zeros({2, 4});
    Tensor<double> loss = softmax_cross_entropy(uniform, {0, 3});
    CHECK(loss[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    Tensor<double> dominant = Tensor<double>::zeros({1, 4});
    dominant[2] = 200.0;
    CHECK(softmax_cross_entropy(dominant, {2})[0] < 1e-12);

    // random logits against the long-double reference
    Tensor<double> logits = testutil::randn<double>({3, 4}, 10, 2.0);
    std::vector<int> labels = {1, 0, 3};
    std::vector<std::vector<double>> rows(3, std::vector<double>(4));
    for (int64_t i = 0; i < 3; ++i)
        for (int64_t j = 0; j < 4; ++j) rows[static_cast<size_t>(i)][static_cast<size_t>(j)] = logits[static_cast<size_t>(i * 4 + j)];
    CHECK(softmax_cross_entropy(logits, labels)[0] ==
          doctest::Approx(oracle::softmax_ce_reference(rows, labels)).epsilon(1e-12));

    CHECK_THROWS_AS(softmax_cross_entropy(uniform, {0, 4}), ShapeError);
    CHECK_THROWS_AS(softmax_cross_entropy(uniform, {0}), ShapeError);
}

TEST_CASE("softmax rows sum to one") {
    for (uint64_t seed : {0, 1, 2}) {
        Tensor<double> logits = testutil::randn<double>({5, 7}, 100 + seed, 4.0);
        Tensor<double> p = softmax(logits);
        for (int64_t i = 0; i < 5; ++i) {
            double s = 0;
            for (int64_t j = 0; j < 7; ++j) s += p[static_cast<size_t>(i * 7 + j)];
            CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("avg_pool2d with padding counts the full window") {
    Tensor<float> x = Tensor<float>::full({1, 1, 2, 2}, 4.f);
    Tensor<float> y = avg_pool2d(x, 2, 2, 0);
    CHECK(y[0] == doctest::Approx(4.f));
    // 3x3 window at the corner sees 4 real cells out of 9
    Tensor<float> p = avg_pool2d(Tensor<float>::full({1, 1, 3, 3}, 9.f), 3, 1, 1);
    CHECK(p.at(0, 0, 0, 0) == doctest::Approx(9.f * 4 / 9));
    CHECK(p.at(0, 0, 1, 1) == doctest::Approx(9.f));
}

TEST_SUITE_END();
