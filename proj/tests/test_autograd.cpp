#include <doctest.h>

#include "atnf/gradcheck.hpp"
#include "atnf/gradcheck_targets.hpp"
#include "helpers.hpp"

using namespace atnf;

TEST_SUITE_BEGIN("autograd");

TEST_CASE("sum(w * x) puts x into grad(w)") {
    Tensor<double> w = testutil::randn<double>({2, 3}, 0);
    Tensor<double> x = testutil::randn<double>({2, 3}, 1);
    w.set_requires_grad(true);
    GradTape<double> tape;
    Tensor<double> loss = sum(mul(w, x));
    tape.backward(loss);
    for (int64_t i = 0; i < w.numel(); ++i)
        CHECK(w.grad()[static_cast<size_t>(i)] == doctest::Approx(x[static_cast<size_t>(i)]));
}

TEST_CASE("gradients accumulate over multiple uses of a parameter") {
    Tensor<double> w = testutil::randn<double>({4}, 2);
    Tensor<double> x1 = testutil::randn<double>({4}, 3);
    Tensor<double> x2 = testutil::randn<double>({4}, 4);
    w.set_requires_grad(true);
    GradTape<double> tape;
    Tensor<double> loss = sum(add(mul(w, x1), mul(w, x2)));
    tape.backward(loss);
    for (size_t i = 0; i < 4; ++i)
        CHECK(w.grad()[i] == doctest::Approx(x1[i] + x2[i]).epsilon(1e-12));
}

TEST_CASE("sigmoid'(0) = 0.25") {
    Tensor<double> w({1}, {0.0});
    w.set_requires_grad(true);
    GradTape<double> tape;
    Tensor<double> loss = sum(activation(w, ActKind::Sigmoid));
    tape.backward(loss);
    CHECK(w.grad()[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("backward without a tape is a usage error") {
    Tensor<double> x = testutil::randn<double>({3}, 5);
    x.set_requires_grad(true);
    Tensor<double> y = sum(x);  // no active tape: nothing recorded
    CHECK(y.tape() == nullptr);
    CHECK_THROWS_AS(backward(y), UsageError);
}

TEST_CASE("a tape is consumed by backward") {
    Tensor<double> x = testutil::randn<double>({3}, 6);
    x.set_requires_grad(true);
    GradTape<double> tape;
    Tensor<double> y = sum(x);
    tape.backward(y);
    CHECK(tape.consumed());
    CHECK_THROWS_AS(tape.backward(y), UsageError);
}

TEST_CASE("backward requires a scalar loss") {
    Tensor<double> x = testutil::randn<double>({3}, 7);
    x.set_requires_grad(true);
    GradTape<double> tape;
    Tensor<double> y = scale(x, 2.0);
    CHECK_THROWS_AS(tape.backward(y), UsageError);
}

TEST_CASE("no recording happens without requires_grad") {
    Tensor<double> x = testutil::randn<double>({3}, 8);
    GradTape<double> tape;
    Tensor<double> y = sum(x);
    CHECK(tape.size() == 0);
    CHECK(!y.requires_grad());
}

TEST_CASE("every op matches central finite differences (seeds 0-2)") {
    for (uint64_t seed : {0u, 1u, 2u}) {
        for (const TargetReport& tr : run_gradcheck_target("ops", seed)) {
            INFO("op " << tr.name << " seed " << seed << " max_rel_err "
                       << tr.report.max_rel_err);
            CHECK(tr.report.passed(1e-4));
        }
    }
}

TEST_CASE("linear-layer gradients are exact to 1e-6 (seed 0)") {
    Rng rng(0);
    Tensor<double> x = Tensor<double>::randn({3, 5}, rng);
    Tensor<double> w = Tensor<double>::randn({4, 5}, rng, 0.5);
    Tensor<double> b = Tensor<double>::randn({4}, rng, 0.1);
    Tensor<double> c = Tensor<double>::randn({3, 4}, rng);
    std::vector<CheckedParam> params = {{"x", x}, {"w", w}, {"b", b}};
    auto fn = [=] { return sum(mul(linear(x, w, b), c)); };
    GradCheckReport rep = grad_check(fn, params);
    CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("3x3 conv gradients on an 8x8 input within 1e-5") {
    Rng rng(0);
    Tensor<double> x = Tensor<double>::randn({1, 2, 8, 8}, rng);
    Tensor<double> w = Tensor<double>::randn({3, 2, 3, 3}, rng, 0.4);
    Tensor<double> c = Tensor<double>::randn({1, 3, 8, 8}, rng);
    std::vector<CheckedParam> params = {{"x", x}, {"w", w}};
    auto fn = [=] { return sum(mul(conv2d(x, w, std::optional<Tensor<double>>(), 1, 1), c)); };
    GradCheckReport rep = grad_check(fn, params);
    CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("broadcast backward equals the explicitly tiled route") {
    Rng rng(11);
    Tensor<double> a = Tensor<double>::randn({2, 3, 4, 4}, rng);
    Tensor<double> b = Tensor<double>::randn({2, 3, 1, 1}, rng);
    Tensor<double> c = Tensor<double>::randn({2, 3, 4, 4}, rng);

    Tensor<double> b1 = b.clone();
    b1.set_requires_grad(true);
    {
        GradTape<double> tape;
        Tensor<double> loss = sum(mul(mul(a, b1), c));
        tape.backward(loss);
    }

    // independent route: tile b to the full shape, sum grads over H,W
    Tensor<double> tiled({2, 3, 4, 4});
    for (int64_t n = 0; n < 2; ++n)
        for (int64_t ch = 0; ch < 3; ++ch)
            for (int64_t i = 0; i < 4; ++i)
                for (int64_t j = 0; j < 4; ++j) tiled.at(n, ch, i, j) = b.at(n, ch, 0, 0);
    tiled.set_requires_grad(true);
    {
        GradTape<double> tape;
        Tensor<double> loss = sum(mul(mul(a, tiled), c));
        tape.backward(loss);
    }
    for (int64_t n = 0; n < 2; ++n)
        for (int64_t ch = 0; ch < 3; ++ch) {
            double summed = 0;
            for (int64_t i = 0; i < 4; ++i)
                for (int64_t j = 0; j < 4; ++j)
                    summed += tiled.grad()[static_cast<size_t>(((n * 3 + ch) * 4 + i) * 4 + j)];
            CHECK(b1.grad()[static_cast<size_t>(n * 3 + ch)] ==
                  doctest::Approx(summed).epsilon(1e-12));
        }
}

TEST_CASE("max-pool backward routes to the argmax, first index on ties") {
    Tensor<double> x({1, 1, 2, 2}, {3.0, 3.0, 1.0, 3.0});
    x.set_requires_grad(true);
    GradTape<double> tape;
    Tensor<double> loss = sum(max_pool2d(x, 2, 2));
    tape.backward(loss);
    CHECK(x.grad() == std::vector<double>{1, 0, 0, 0});
}

TEST_SUITE_END();
