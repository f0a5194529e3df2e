#pragma once

#include <cmath>
#include <cstring>

#include "atnf/ops.hpp"
#include "atnf/rng.hpp"

// Test-side reference implementations. These stay deliberately naive and
// independent of the library's kernels: six explicit loops for convolution,
// direct window scans for pooling, long-double accumulation for the loss.

namespace oracle {

using atnf::Shape;
using atnf::Tensor;

template <typename T>
Tensor<T> conv2d_naive(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                       int64_t stride, int64_t pad);

template <typename T>
Tensor<T> conv2d_naive(const Tensor<T>& x, const Tensor<T>& w, std::nullptr_t, int64_t stride,
                       int64_t pad) {
    return conv2d_naive(x, w, static_cast<const Tensor<T>*>(nullptr), stride, pad);
}

template <typename T>
Tensor<T> conv2d_naive(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                       int64_t stride, int64_t pad) {
    const int64_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const int64_t co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int64_t oh = (h + 2 * pad - kh) / stride + 1;
    const int64_t ow = (ww + 2 * pad - kw) / stride + 1;
    Tensor<T> out({n, co, oh, ow});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t o = 0; o < co; ++o)
            for (int64_t i = 0; i < oh; ++i)
                for (int64_t j = 0; j < ow; ++j) {
                    T acc = bias ? (*bias)[static_cast<size_t>(o)] : T(0);
                    for (int64_t c = 0; c < ci; ++c)
                        for (int64_t u = 0; u < kh; ++u)
                            for (int64_t v = 0; v < kw; ++v) {
                                const int64_t ih = i * stride + u - pad;
                                const int64_t iw = j * stride + v - pad;
                                if (ih < 0 || ih >= h || iw < 0 || iw >= ww) continue;
                                acc += x.at(b, c, ih, iw) * w.at(o, c, u, v);
                            }
                    out.at(b, o, i, j) = acc;
                }
    return out;
}

template <typename T>
Tensor<T> max_pool_naive(const Tensor<T>& x, int64_t k, int64_t stride) {
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
    Tensor<T> out({n, c, oh, ow});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t i = 0; i < oh; ++i)
                for (int64_t j = 0; j < ow; ++j) {
                    T best = x.at(b, ch, i * stride, j * stride);
                    for (int64_t u = 0; u < k; ++u)
                        for (int64_t v = 0; v < k; ++v)
                            best = std::max(best, x.at(b, ch, i * stride + u, j * stride + v));
                    out.at(b, ch, i, j) = best;
                }
    return out;
}

template <typename T>
double channel_reduce_naive(const Tensor<T>& x, int64_t b, int64_t y, int64_t xx, bool want_max) {
    double acc = want_max ? -HUGE_VAL : 0.0;
    for (int64_t c = 0; c < x.dim(1); ++c) {
        const double v = static_cast<double>(x.at(b, c, y, xx));
        acc = want_max ? std::max(acc, v) : acc + v;
    }
    return want_max ? acc : acc / static_cast<double>(x.dim(1));
}

/// High-precision cross-entropy reference.
inline double softmax_ce_reference(const std::vector<std::vector<double>>& logits,
                                   const std::vector<int>& labels) {
    long double total = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
        long double mx = logits[i][0];
        for (double v : logits[i]) mx = std::max<long double>(mx, v);
        long double denom = 0;
        for (double v : logits[i]) denom += expl(static_cast<long double>(v) - mx);
        total += logl(denom) + mx - logits[i][static_cast<size_t>(labels[i])];
    }
    return static_cast<double>(total / static_cast<long double>(logits.size()));
}

}  // namespace oracle

namespace testutil {

template <typename T>
atnf::Tensor<T> randn(atnf::Shape shape, uint64_t seed, double stddev = 1.0) {
    atnf::Rng rng(seed);
    return atnf::Tensor<T>::randn(std::move(shape), rng, static_cast<T>(stddev));
}

template <typename T>
double max_rel_err(const atnf::Tensor<T>& a, const atnf::Tensor<T>& b) {
    REQUIRE(a.shape() == b.shape());
    double worst = 0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        const double av = a[static_cast<size_t>(i)], bv = b[static_cast<size_t>(i)];
        const double denom = std::max({std::abs(av), std::abs(bv), 1e-30});
        if (av != bv) worst = std::max(worst, std::abs(av - bv) / denom);
    }
    return worst;
}

template <typename T>
bool bitwise_equal(const atnf::Tensor<T>& a, const atnf::Tensor<T>& b) {
    if (a.shape() != b.shape()) return false;
    for (int64_t i = 0; i < a.numel(); ++i)
        if (std::memcmp(&a[static_cast<size_t>(i)], &b[static_cast<size_t>(i)], sizeof(T)) != 0)
            return false;
    return true;
}

}  // namespace testutil
