#include "atnf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace atnf {
namespace {

// ceil/floor division for int64 with positive divisor
int64_t ceil_div(int64_t a, int64_t b) { return a > 0 ? (a + b - 1) / b : a / b; }
int64_t floor_div(int64_t a, int64_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
    if (!all_finite(t))
        throw NumericError(std::string(op) + " produced non-finite values");
}

template <typename T>
void require_4d(const Tensor<T>& x, const char* op) {
    if (x.ndim() != 4)
        throw ShapeError(std::string(op) + " expects a 4-d (N,C,H,W) tensor, got " +
                         shape_str(x.shape()));
}

/// Marks `out` as tape-tracked and records the backward closure when a tape
/// is active and any input participates in differentiation.
template <typename T, typename F>
void record_op(Tensor<T>& out, std::initializer_list<const Tensor<T>*> inputs, F&& fn) {
    GradTape<T>* tape = GradTape<T>::active();
    if (!tape) return;
    bool any = false;
    for (const Tensor<T>* in : inputs) any = any || in->requires_grad();
    if (!any) return;
    out.set_requires_grad(true);
    out.set_tape(tape);
    tape->record(std::forward<F>(fn));
}

template <typename T>
void feed_mask_bits(KinkMonitor* mon, const T* x, int64_t n) {
    uint64_t acc = 0;
    int bit = 0;
    for (int64_t i = 0; i < n; ++i) {
        acc |= static_cast<uint64_t>(x[i] > T(0)) << bit;
        if (++bit == 64) {
            mon->feed(acc);
            acc = 0;
            bit = 0;
        }
    }
    if (bit) mon->feed(acc);
}

template <typename T>
struct ConvDims {
    int64_t n, ci, h, w, co, kh, kw, oh, ow, stride, pad;
};

template <typename T>
ConvDims<T> conv_dims(const Tensor<T>& x, const Tensor<T>& weight, int64_t stride,
                      int64_t padding, bool depthwise, const char* op) {
    require_4d(x, op);
    require_4d(weight, op);
    if (stride < 1) throw ShapeError(std::string(op) + ": stride must be positive");
    if (padding < 0) throw ShapeError(std::string(op) + ": padding must be non-negative");
    ConvDims<T> d;
    d.n = x.dim(0);
    d.ci = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.co = weight.dim(0);
    d.kh = weight.dim(2);
    d.kw = weight.dim(3);
    d.stride = stride;
    d.pad = padding;
    if (depthwise) {
        if (weight.dim(1) != 1 || d.co != d.ci)
            throw ShapeError(std::string(op) + ": weight must be [C,1,kh,kw] with C == input channels, got weight " +
                             shape_str(weight.shape()) + " for input " + shape_str(x.shape()));
    } else if (weight.dim(1) != d.ci) {
        throw ShapeError(std::string(op) + ": input has " + std::to_string(d.ci) +
                         " channels but weight expects " + std::to_string(weight.dim(1)));
    }
    if (d.kh > d.h + 2 * padding || d.kw > d.w + 2 * padding)
        throw ShapeError(std::string(op) + ": kernel " + std::to_string(d.kh) + "x" +
                         std::to_string(d.kw) + " larger than padded input " +
                         shape_str(x.shape()) + " with padding " + std::to_string(padding));
    d.oh = (d.h + 2 * padding - d.kh) / stride + 1;
    d.ow = (d.w + 2 * padding - d.kw) / stride + 1;
    return d;
}

// Valid output range along one axis for a given kernel offset: indices o with
// 0 <= o*stride + k - pad < extent.
struct AxisRange {
    int64_t lo, hi;  // inclusive; empty when lo > hi
};
AxisRange valid_range(int64_t k, int64_t pad, int64_t stride, int64_t extent, int64_t out_extent) {
    AxisRange r;
    r.lo = std::max<int64_t>(0, ceil_div(pad - k, stride));
    r.hi = std::min<int64_t>(out_extent - 1, floor_div(extent - 1 + pad - k, stride));
    return r;
}

// Shared accumulation core for conv2d / depthwise backward and forward.
// Forward:  out[oh][ow] += wv * x[ih][iw]
// Backward-to-input: dx[ih][iw] += wv * dout[oh][ow]
template <typename T>
inline void conv_axpy_rows(T* dst, const T* src, int64_t count, T wv, int64_t dst_stride,
                           int64_t src_stride) {
    if (dst_stride == 1 && src_stride == 1) {
        for (int64_t t = 0; t < count; ++t) dst[t] += wv * src[t];
    } else {
        for (int64_t t = 0; t < count; ++t) dst[t * dst_stride] += wv * src[t * src_stride];
    }
}

// Register-blocked plane kernel for the dominant 3x3 / stride 1 / pad 1 case:
// out[oh][ow] += sum_{ki,kj} w9[ki*3+kj] * x[oh+ki-1][ow+kj-1], zero padded.
// zero_row must hold >= w zeros.
template <typename T>
void conv3x3_plane_acc(T* out, const T* x, const T* w9, int64_t h, int64_t w,
                       const T* zero_row) {
    const T w00 = w9[0], w01 = w9[1], w02 = w9[2];
    const T w10 = w9[3], w11 = w9[4], w12 = w9[5];
    const T w20 = w9[6], w21 = w9[7], w22 = w9[8];
    for (int64_t oh = 0; oh < h; ++oh) {
        const T* r0 = oh > 0 ? x + (oh - 1) * w : zero_row;
        const T* r1 = x + oh * w;
        const T* r2 = oh + 1 < h ? x + (oh + 1) * w : zero_row;
        T* o = out + oh * w;
        if (w == 1) {
            o[0] += w01 * r0[0] + w11 * r1[0] + w21 * r2[0];
            continue;
        }
        o[0] += w01 * r0[0] + w02 * r0[1] + w11 * r1[0] + w12 * r1[1] + w21 * r2[0] +
                w22 * r2[1];
        for (int64_t ow = 1; ow < w - 1; ++ow)
            o[ow] += w00 * r0[ow - 1] + w01 * r0[ow] + w02 * r0[ow + 1] + w10 * r1[ow - 1] +
                     w11 * r1[ow] + w12 * r1[ow + 1] + w20 * r2[ow - 1] + w21 * r2[ow] +
                     w22 * r2[ow + 1];
        const int64_t m = w - 1;
        o[m] += w00 * r0[m - 1] + w01 * r0[m] + w10 * r1[m - 1] + w11 * r1[m] +
                w20 * r2[m - 1] + w21 * r2[m];
    }
}

// Companion weight-gradient kernel for the same case:
// dw9[ki*3+kj] += sum_{oh,ow} dout[oh][ow] * x[oh+ki-1][ow+kj-1].
template <typename T>
void conv3x3_dw_acc(T* dw9, const T* dout, const T* x, int64_t h, int64_t w,
                    const T* zero_row) {
    T a00 = 0, a01 = 0, a02 = 0, a10 = 0, a11 = 0, a12 = 0, a20 = 0, a21 = 0, a22 = 0;
    for (int64_t oh = 0; oh < h; ++oh) {
        const T* r0 = oh > 0 ? x + (oh - 1) * w : zero_row;
        const T* r1 = x + oh * w;
        const T* r2 = oh + 1 < h ? x + (oh + 1) * w : zero_row;
        const T* d = dout + oh * w;
        if (w == 1) {
            a01 += d[0] * r0[0];
            a11 += d[0] * r1[0];
            a21 += d[0] * r2[0];
            continue;
        }
        a01 += d[0] * r0[0];
        a02 += d[0] * r0[1];
        a11 += d[0] * r1[0];
        a12 += d[0] * r1[1];
        a21 += d[0] * r2[0];
        a22 += d[0] * r2[1];
        for (int64_t ow = 1; ow < w - 1; ++ow) {
            const T dv = d[ow];
            a00 += dv * r0[ow - 1];
            a01 += dv * r0[ow];
            a02 += dv * r0[ow + 1];
            a10 += dv * r1[ow - 1];
            a11 += dv * r1[ow];
            a12 += dv * r1[ow + 1];
            a20 += dv * r2[ow - 1];
            a21 += dv * r2[ow];
            a22 += dv * r2[ow + 1];
        }
        const int64_t m = w - 1;
        const T dv = d[m];
        a00 += dv * r0[m - 1];
        a01 += dv * r0[m];
        a10 += dv * r1[m - 1];
        a11 += dv * r1[m];
        a20 += dv * r2[m - 1];
        a21 += dv * r2[m];
    }
    dw9[0] += a00;
    dw9[1] += a01;
    dw9[2] += a02;
    dw9[3] += a10;
    dw9[4] += a11;
    dw9[5] += a12;
    dw9[6] += a20;
    dw9[7] += a21;
    dw9[8] += a22;
}

template <typename T>
Tensor<T> conv2d_impl(const Tensor<T>& x, const Tensor<T>& weight,
                      const std::optional<Tensor<T>>& bias, int64_t stride, int64_t padding,
                      bool depthwise, const char* opname) {
    ConvDims<T> d = conv_dims(x, weight, stride, padding, depthwise, opname);
    if (bias && (bias->ndim() != 1 || bias->dim(0) != d.co))
        throw ShapeError(std::string(opname) + ": bias must be [" + std::to_string(d.co) + "]");

    Tensor<T> out({d.n, d.co, d.oh, d.ow});
    const T* xd = x.data();
    const T* wd = weight.data();
    T* od = out.data();

    const bool fast3x3 =
        !depthwise && d.kh == 3 && d.kw == 3 && d.stride == 1 && d.pad == 1;
    const std::vector<T> zero_row(static_cast<size_t>(std::max(d.w, d.ow)), T(0));

    const int64_t cin_per_out = depthwise ? 1 : d.ci;
    for (int64_t n = 0; n < d.n; ++n) {
        for (int64_t co = 0; co < d.co; ++co) {
            T* oplane = od + ((n * d.co + co) * d.oh) * d.ow;
            if (bias) {
                const T b = bias->data()[co];
                for (int64_t i = 0; i < d.oh * d.ow; ++i) oplane[i] = b;
            }
            for (int64_t g = 0; g < cin_per_out; ++g) {
                const int64_t ci = depthwise ? co : g;
                const T* xplane = xd + ((n * d.ci + ci) * d.h) * d.w;
                const T* wker = wd + ((co * cin_per_out + g) * d.kh) * d.kw;
                if (fast3x3) {
                    conv3x3_plane_acc(oplane, xplane, wker, d.h, d.w, zero_row.data());
                    continue;
                }
                for (int64_t ki = 0; ki < d.kh; ++ki) {
                    AxisRange rh = valid_range(ki, d.pad, d.stride, d.h, d.oh);
                    for (int64_t kj = 0; kj < d.kw; ++kj) {
                        AxisRange rw = valid_range(kj, d.pad, d.stride, d.w, d.ow);
                        if (rw.lo > rw.hi) continue;
                        const T wv = wker[ki * d.kw + kj];
                        for (int64_t oh = rh.lo; oh <= rh.hi; ++oh) {
                            const int64_t ih = oh * d.stride + ki - d.pad;
                            const T* xrow = xplane + ih * d.w + (rw.lo * d.stride + kj - d.pad);
                            T* orow = oplane + oh * d.ow + rw.lo;
                            conv_axpy_rows(orow, xrow, rw.hi - rw.lo + 1, wv, int64_t{1}, d.stride);
                        }
                    }
                }
            }
        }
    }
    check_finite(out, opname);

    const bool need_dx = x.requires_grad();
    const bool need_dw = weight.requires_grad();
    const bool need_db = bias && bias->requires_grad();
    Tensor<T> bias_t = bias ? *bias : Tensor<T>();
    const bool has_bias = bias.has_value();
    GradTape<T>* tape = GradTape<T>::active();
    if (!tape || !(need_dx || need_dw || need_db)) return out;
    out.set_requires_grad(true);
    out.set_tape(tape);
    tape->record([=, xc = x, wc = weight, oc = out]() mutable {
        const T* dout = oc.grad().data();
        const bool fast3x3 =
            !depthwise && d.kh == 3 && d.kw == 3 && d.stride == 1 && d.pad == 1;
        const std::vector<T> zero_row(static_cast<size_t>(std::max(d.w, d.ow)), T(0));
        if (need_dx) {
            T* dx = xc.grad().data();
            const T* w = wc.data();
            if (fast3x3) {
                // dx[ci] = sum_co rot180(w[co][ci]) (*) dout[co]: same plane kernel
                // with rotated kernels and channel roles swapped
                std::vector<T> wrot(static_cast<size_t>(d.ci * d.co * 9));
                for (int64_t co = 0; co < d.co; ++co)
                    for (int64_t ci = 0; ci < d.ci; ++ci)
                        for (int64_t t = 0; t < 9; ++t)
                            wrot[static_cast<size_t>((ci * d.co + co) * 9 + t)] =
                                w[(co * d.ci + ci) * 9 + (8 - t)];
                for (int64_t n = 0; n < d.n; ++n)
                    for (int64_t ci = 0; ci < d.ci; ++ci) {
                        T* dxplane = dx + ((n * d.ci + ci) * d.h) * d.w;
                        for (int64_t co = 0; co < d.co; ++co)
                            conv3x3_plane_acc(
                                dxplane, dout + ((n * d.co + co) * d.oh) * d.ow,
                                wrot.data() + (ci * d.co + co) * 9, d.h, d.w, zero_row.data());
                    }
            } else {
                for (int64_t n = 0; n < d.n; ++n)
                    for (int64_t co = 0; co < d.co; ++co) {
                        const T* doplane = dout + ((n * d.co + co) * d.oh) * d.ow;
                        for (int64_t g = 0; g < cin_per_out; ++g) {
                            const int64_t ci = depthwise ? co : g;
                            T* dxplane = dx + ((n * d.ci + ci) * d.h) * d.w;
                            const T* wker = w + ((co * cin_per_out + g) * d.kh) * d.kw;
                            for (int64_t ki = 0; ki < d.kh; ++ki) {
                                AxisRange rh = valid_range(ki, d.pad, d.stride, d.h, d.oh);
                                for (int64_t kj = 0; kj < d.kw; ++kj) {
                                    AxisRange rw = valid_range(kj, d.pad, d.stride, d.w, d.ow);
                                    if (rw.lo > rw.hi) continue;
                                    const T wv = wker[ki * d.kw + kj];
                                    for (int64_t oh = rh.lo; oh <= rh.hi; ++oh) {
                                        const int64_t ih = oh * d.stride + ki - d.pad;
                                        T* dxrow =
                                            dxplane + ih * d.w + (rw.lo * d.stride + kj - d.pad);
                                        const T* dorow = doplane + oh * d.ow + rw.lo;
                                        conv_axpy_rows(dxrow, dorow, rw.hi - rw.lo + 1, wv,
                                                       d.stride, int64_t{1});
                                    }
                                }
                            }
                        }
                    }
            }
        }
        if (need_dw) {
            T* dw = wc.grad().data();
            const T* xdv = xc.data();
            if (fast3x3) {
                for (int64_t n = 0; n < d.n; ++n)
                    for (int64_t co = 0; co < d.co; ++co) {
                        const T* doplane = dout + ((n * d.co + co) * d.oh) * d.ow;
                        for (int64_t ci = 0; ci < d.ci; ++ci)
                            conv3x3_dw_acc(dw + ((co * d.ci + ci) * 9), doplane,
                                           xdv + ((n * d.ci + ci) * d.h) * d.w, d.h, d.w,
                                           zero_row.data());
                    }
            } else {
                for (int64_t co = 0; co < d.co; ++co)
                    for (int64_t g = 0; g < cin_per_out; ++g) {
                        const int64_t ci = depthwise ? co : g;
                        T* dwker = dw + ((co * cin_per_out + g) * d.kh) * d.kw;
                        for (int64_t ki = 0; ki < d.kh; ++ki) {
                            AxisRange rh = valid_range(ki, d.pad, d.stride, d.h, d.oh);
                            for (int64_t kj = 0; kj < d.kw; ++kj) {
                                AxisRange rw = valid_range(kj, d.pad, d.stride, d.w, d.ow);
                                if (rw.lo > rw.hi) continue;
                                T acc = T(0);
                                for (int64_t n = 0; n < d.n; ++n) {
                                    const T* doplane = dout + ((n * d.co + co) * d.oh) * d.ow;
                                    const T* xplane = xdv + ((n * d.ci + ci) * d.h) * d.w;
                                    for (int64_t oh = rh.lo; oh <= rh.hi; ++oh) {
                                        const int64_t ih = oh * d.stride + ki - d.pad;
                                        const T* dorow = doplane + oh * d.ow + rw.lo;
                                        const T* xrow =
                                            xplane + ih * d.w + (rw.lo * d.stride + kj - d.pad);
                                        const int64_t count = rw.hi - rw.lo + 1;
                                        if (d.stride == 1)
                                            for (int64_t t = 0; t < count; ++t)
                                                acc += dorow[t] * xrow[t];
                                        else
                                            for (int64_t t = 0; t < count; ++t)
                                                acc += dorow[t] * xrow[t * d.stride];
                                    }
                                }
                                dwker[ki * d.kw + kj] += acc;
                            }
                        }
                    }
            }
        }
        if (has_bias && need_db) {
            T* db = bias_t.grad().data();
            for (int64_t n = 0; n < d.n; ++n)
                for (int64_t co = 0; co < d.co; ++co) {
                    const T* doplane = dout + ((n * d.co + co) * d.oh) * d.ow;
                    T acc = T(0);
                    for (int64_t i = 0; i < d.oh * d.ow; ++i) acc += doplane[i];
                    db[co] += acc;
                }
        }
    });
    return out;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const std::optional<Tensor<T>>& bias, int64_t stride, int64_t padding) {
    return conv2d_impl(x, weight, bias, stride, padding, false, "conv2d");
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                           const std::optional<Tensor<T>>& bias, int64_t stride,
                           int64_t padding) {
    return conv2d_impl(x, weight, bias, stride, padding, true, "depthwise_conv2d");
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, int64_t k, int64_t stride) {
    require_4d(x, "max_pool2d");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (k < 1 || stride < 1) throw ShapeError("max_pool2d: k and stride must be positive");
    if (k > h || k > w)
        throw ShapeError("max_pool2d: window " + std::to_string(k) + " larger than input " +
                         shape_str(x.shape()));
    const int64_t oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
    Tensor<T> out({n, c, oh, ow});
    std::vector<int32_t> argmax(static_cast<size_t>(out.numel()));
    const T* xd = x.data();
    T* od = out.data();
    KinkMonitor* mon = KinkMonitor::active();
    size_t oi = 0;
    for (int64_t p = 0; p < n * c; ++p) {
        const T* plane = xd + p * h * w;
        for (int64_t i = 0; i < oh; ++i)
            for (int64_t j = 0; j < ow; ++j, ++oi) {
                const int64_t i0 = i * stride, j0 = j * stride;
                T best = plane[i0 * w + j0];
                int32_t besti = static_cast<int32_t>(i0 * w + j0);
                for (int64_t di = 0; di < k; ++di)
                    for (int64_t dj = 0; dj < k; ++dj) {
                        const int32_t idx = static_cast<int32_t>((i0 + di) * w + (j0 + dj));
                        if (plane[idx] > best) {
                            best = plane[idx];
                            besti = idx;
                        }
                    }
                od[oi] = best;
                argmax[oi] = besti;
                if (mon) mon->feed(static_cast<uint64_t>(besti) * 0x9E3779B1u + static_cast<uint64_t>(oi));
            }
    }
    check_finite(out, "max_pool2d");

    if (x.requires_grad()) {
        record_op(out, {&x}, [xc = x, oc = out, argmax = std::move(argmax), h, w, oh, ow]() mutable {
            T* dx = xc.grad().data();
            const T* dout = oc.grad().data();
            const int64_t planes = xc.dim(0) * xc.dim(1);
            size_t oi = 0;
            for (int64_t p = 0; p < planes; ++p) {
                T* dxplane = dx + p * h * w;
                for (int64_t i = 0; i < oh * ow; ++i, ++oi) dxplane[argmax[oi]] += dout[oi];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, int64_t k, int64_t stride, int64_t padding) {
    require_4d(x, "avg_pool2d");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (k < 1 || stride < 1) throw ShapeError("avg_pool2d: k and stride must be positive");
    if (padding < 0) throw ShapeError("avg_pool2d: padding must be non-negative");
    if (k > h + 2 * padding || k > w + 2 * padding)
        throw ShapeError("avg_pool2d: window " + std::to_string(k) + " larger than input " +
                         shape_str(x.shape()));
    const int64_t oh = (h + 2 * padding - k) / stride + 1, ow = (w + 2 * padding - k) / stride + 1;
    Tensor<T> out({n, c, oh, ow});
    const T inv = T(1) / static_cast<T>(k * k);
    const T* xd = x.data();
    T* od = out.data();
    size_t oi = 0;
    for (int64_t p = 0; p < n * c; ++p) {
        const T* plane = xd + p * h * w;
        for (int64_t i = 0; i < oh; ++i)
            for (int64_t j = 0; j < ow; ++j, ++oi) {
                const int64_t i0 = i * stride - padding, j0 = j * stride - padding;
                const int64_t ilo = std::max<int64_t>(0, i0), ihi = std::min(h, i0 + k);
                const int64_t jlo = std::max<int64_t>(0, j0), jhi = std::min(w, j0 + k);
                T acc = T(0);
                for (int64_t di = ilo; di < ihi; ++di)
                    for (int64_t dj = jlo; dj < jhi; ++dj) acc += plane[di * w + dj];
                od[oi] = acc * inv;
            }
    }
    check_finite(out, "avg_pool2d");

    if (x.requires_grad()) {
        record_op(out, {&x}, [xc = x, oc = out, k, stride, padding, h, w, oh, ow, inv]() mutable {
            T* dx = xc.grad().data();
            const T* dout = oc.grad().data();
            const int64_t planes = xc.dim(0) * xc.dim(1);
            size_t oi = 0;
            for (int64_t p = 0; p < planes; ++p) {
                T* dxplane = dx + p * h * w;
                for (int64_t i = 0; i < oh; ++i)
                    for (int64_t j = 0; j < ow; ++j, ++oi) {
                        const T g = dout[oi] * inv;
                        const int64_t i0 = i * stride - padding, j0 = j * stride - padding;
                        const int64_t ilo = std::max<int64_t>(0, i0), ihi = std::min(h, i0 + k);
                        const int64_t jlo = std::max<int64_t>(0, j0), jhi = std::min(w, j0 + k);
                        for (int64_t di = ilo; di < ihi; ++di)
                            for (int64_t dj = jlo; dj < jhi; ++dj) dxplane[di * w + dj] += g;
                    }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> global_spatial_pool(const Tensor<T>& x, PoolMode mode) {
    require_4d(x, "global_spatial_pool");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h < 1 || w < 1) throw ShapeError("global_spatial_pool: empty spatial extent");
    Tensor<T> out({n, c, 1, 1});
    const int64_t hw = h * w;
    const T* xd = x.data();
    T* od = out.data();
    std::vector<int32_t> argmax;
    KinkMonitor* mon = KinkMonitor::active();
    if (mode == PoolMode::Avg) {
        const T inv = T(1) / static_cast<T>(hw);
        for (int64_t p = 0; p < n * c; ++p) {
            const T* plane = xd + p * hw;
            T acc = T(0);
            for (int64_t i = 0; i < hw; ++i) acc += plane[i];
            od[p] = acc * inv;
        }
    } else {
        argmax.resize(static_cast<size_t>(n * c));
        for (int64_t p = 0; p < n * c; ++p) {
            const T* plane = xd + p * hw;
            T best = plane[0];
            int32_t bi = 0;
            for (int64_t i = 1; i < hw; ++i)
                if (plane[i] > best) {
                    best = plane[i];
                    bi = static_cast<int32_t>(i);
                }
            od[p] = best;
            argmax[static_cast<size_t>(p)] = bi;
            if (mon) mon->feed(static_cast<uint64_t>(bi) * 0x9E3779B1u + static_cast<uint64_t>(p));
        }
    }
    check_finite(out, "global_spatial_pool");

    if (x.requires_grad()) {
        record_op(out, {&x}, [xc = x, oc = out, mode, hw, argmax = std::move(argmax)]() mutable {
            T* dx = xc.grad().data();
            const T* dout = oc.grad().data();
            const int64_t planes = xc.dim(0) * xc.dim(1);
            if (mode == PoolMode::Avg) {
                const T inv = T(1) / static_cast<T>(hw);
                for (int64_t p = 0; p < planes; ++p) {
                    const T g = dout[p] * inv;
                    T* plane = dx + p * hw;
                    for (int64_t i = 0; i < hw; ++i) plane[i] += g;
                }
            } else {
                for (int64_t p = 0; p < planes; ++p)
                    dx[p * hw + argmax[static_cast<size_t>(p)]] += dout[p];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> channel_pool(const Tensor<T>& x, PoolMode mode) {
    require_4d(x, "channel_pool");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (c < 1) throw ShapeError("channel_pool: need at least one channel");
    Tensor<T> out({n, 1, h, w});
    const int64_t hw = h * w;
    const T* xd = x.data();
    T* od = out.data();
    std::vector<int32_t> argmax;
    KinkMonitor* mon = KinkMonitor::active();
    if (mode == PoolMode::Avg) {
        const T inv = T(1) / static_cast<T>(c);
        for (int64_t b = 0; b < n; ++b) {
            const T* base = xd + b * c * hw;
            T* orow = od + b * hw;
            for (int64_t i = 0; i < hw; ++i) orow[i] = base[i];
            for (int64_t ch = 1; ch < c; ++ch) {
                const T* plane = base + ch * hw;
                for (int64_t i = 0; i < hw; ++i) orow[i] += plane[i];
            }
            for (int64_t i = 0; i < hw; ++i) orow[i] *= inv;
        }
    } else {
        argmax.resize(static_cast<size_t>(n * hw));
        for (int64_t b = 0; b < n; ++b) {
            const T* base = xd + b * c * hw;
            T* orow = od + b * hw;
            int32_t* am = argmax.data() + b * hw;
            for (int64_t i = 0; i < hw; ++i) {
                orow[i] = base[i];
                am[i] = 0;
            }
            for (int64_t ch = 1; ch < c; ++ch) {
                const T* plane = base + ch * hw;
                for (int64_t i = 0; i < hw; ++i)
                    if (plane[i] > orow[i]) {
                        orow[i] = plane[i];
                        am[i] = static_cast<int32_t>(ch);
                    }
            }
            if (mon)
                for (int64_t i = 0; i < hw; ++i)
                    mon->feed(static_cast<uint64_t>(am[i]) * 0x9E3779B1u +
                              static_cast<uint64_t>(b * hw + i));
        }
    }
    check_finite(out, "channel_pool");

    if (x.requires_grad()) {
        record_op(out, {&x}, [xc = x, oc = out, mode, c, hw, argmax = std::move(argmax)]() mutable {
            T* dx = xc.grad().data();
            const T* dout = oc.grad().data();
            const int64_t n = xc.dim(0);
            if (mode == PoolMode::Avg) {
                const T inv = T(1) / static_cast<T>(c);
                for (int64_t b = 0; b < n; ++b) {
                    const T* dorow = dout + b * hw;
                    T* base = dx + b * c * hw;
                    for (int64_t ch = 0; ch < c; ++ch) {
                        T* plane = base + ch * hw;
                        for (int64_t i = 0; i < hw; ++i) plane[i] += dorow[i] * inv;
                    }
                }
            } else {
                for (int64_t b = 0; b < n; ++b) {
                    const T* dorow = dout + b * hw;
                    T* base = dx + b * c * hw;
                    const int32_t* am = argmax.data() + b * hw;
                    for (int64_t i = 0; i < hw; ++i) base[am[i] * hw + i] += dorow[i];
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    if (x.ndim() != 2 || weight.ndim() != 2 || bias.ndim() != 1)
        throw ShapeError("linear expects x [N,Din], weight [Dout,Din], bias [Dout]");
    const int64_t n = x.dim(0), din = x.dim(1), dout_n = weight.dim(0);
    if (weight.dim(1) != din)
        throw ShapeError("linear: input feature size " + std::to_string(din) +
                         " does not match weight " + shape_str(weight.shape()));
    if (bias.dim(0) != dout_n) throw ShapeError("linear: bias size mismatch");

    Tensor<T> out({n, dout_n});
    const T* xd = x.data();
    const T* wd = weight.data();
    const T* bd = bias.data();
    T* od = out.data();
    for (int64_t i = 0; i < n; ++i) {
        const T* xrow = xd + i * din;
        T* orow = od + i * dout_n;
        for (int64_t j = 0; j < dout_n; ++j) {
            const T* wrow = wd + j * din;
            T acc = bd[j];
            for (int64_t k = 0; k < din; ++k) acc += xrow[k] * wrow[k];
            orow[j] = acc;
        }
    }
    check_finite(out, "linear");

    const bool need_dx = x.requires_grad();
    const bool need_dw = weight.requires_grad();
    const bool need_db = bias.requires_grad();
    record_op(out, {&x, &weight, &bias},
              [=, xc = x, wc = weight, bc = bias, oc = out]() mutable {
                  const T* dout = oc.grad().data();
                  if (need_dx) {
                      T* dx = xc.grad().data();
                      const T* w = wc.data();
                      for (int64_t i = 0; i < n; ++i)
                          for (int64_t j = 0; j < dout_n; ++j) {
                              const T g = dout[i * dout_n + j];
                              const T* wrow = w + j * din;
                              T* dxrow = dx + i * din;
                              for (int64_t k = 0; k < din; ++k) dxrow[k] += g * wrow[k];
                          }
                  }
                  if (need_dw) {
                      T* dw = wc.grad().data();
                      const T* xv = xc.data();
                      for (int64_t i = 0; i < n; ++i)
                          for (int64_t j = 0; j < dout_n; ++j) {
                              const T g = dout[i * dout_n + j];
                              const T* xrow = xv + i * din;
                              T* dwrow = dw + j * din;
                              for (int64_t k = 0; k < din; ++k) dwrow[k] += g * xrow[k];
                          }
                  }
                  if (need_db) {
                      T* db = bc.grad().data();
                      for (int64_t i = 0; i < n; ++i)
                          for (int64_t j = 0; j < dout_n; ++j) db[j] += dout[i * dout_n + j];
                  }
              });
    return out;
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, ActKind kind) {
    Tensor<T> out(x.shape());
    const T* xd = x.data();
    T* od = out.data();
    const int64_t n = x.numel();
    if (kind == ActKind::ReLU) {
        for (int64_t i = 0; i < n; ++i) od[i] = xd[i] > T(0) ? xd[i] : T(0);
        if (KinkMonitor* mon = KinkMonitor::active()) feed_mask_bits(mon, xd, n);
    } else {
        for (int64_t i = 0; i < n; ++i) {
            const T v = xd[i];
            if (v >= T(0)) {
                od[i] = T(1) / (T(1) + std::exp(-v));
            } else {
                const T e = std::exp(v);
                od[i] = e / (T(1) + e);
            }
        }
    }
    check_finite(out, "activation");

    if (x.requires_grad()) {
        record_op(out, {&x}, [xc = x, oc = out, kind]() mutable {
            T* dx = xc.grad().data();
            const T* dout = oc.grad().data();
            const int64_t n = xc.numel();
            if (kind == ActKind::ReLU) {
                const T* xv = xc.data();
                for (int64_t i = 0; i < n; ++i)
                    if (xv[i] > T(0)) dx[i] += dout[i];
            } else {
                const T* y = oc.data();
                for (int64_t i = 0; i < n; ++i) dx[i] += dout[i] * y[i] * (T(1) - y[i]);
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       BatchNormState<T>& state, Mode mode) {
    require_4d(x, "batch_norm2d");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (gamma.ndim() != 1 || gamma.dim(0) != c || beta.ndim() != 1 || beta.dim(0) != c)
        throw ShapeError("batch_norm2d: gamma/beta must be [C]");
    const int64_t cnt = n * h * w;
    if (mode == Mode::Train && cnt < 2)
        throw ShapeError("batch_norm2d: Train mode needs N*H*W >= 2 per channel");

    const int64_t hw = h * w;
    const T* xd = x.data();
    std::vector<T> mean(static_cast<size_t>(c)), inv_std(static_cast<size_t>(c));
    const T eps = static_cast<T>(kBatchNormEps);

    if (mode == Mode::Train) {
        std::vector<T> var(static_cast<size_t>(c));
        for (int64_t ch = 0; ch < c; ++ch) {
            T s = T(0);
            for (int64_t b = 0; b < n; ++b) {
                const T* plane = xd + (b * c + ch) * hw;
                for (int64_t i = 0; i < hw; ++i) s += plane[i];
            }
            const T mu = s / static_cast<T>(cnt);
            T sq = T(0);
            for (int64_t b = 0; b < n; ++b) {
                const T* plane = xd + (b * c + ch) * hw;
                for (int64_t i = 0; i < hw; ++i) {
                    const T dlt = plane[i] - mu;
                    sq += dlt * dlt;
                }
            }
            mean[static_cast<size_t>(ch)] = mu;
            var[static_cast<size_t>(ch)] = sq / static_cast<T>(cnt);
            inv_std[static_cast<size_t>(ch)] =
                T(1) / std::sqrt(var[static_cast<size_t>(ch)] + eps);
        }
        // running stats use the unbiased variance, momentum 0.1
        const T m = static_cast<T>(kBatchNormMomentum);
        const T unbias = static_cast<T>(cnt) / static_cast<T>(cnt - 1);
        for (int64_t ch = 0; ch < c; ++ch) {
            auto i = static_cast<size_t>(ch);
            state.running_mean[i] = (T(1) - m) * state.running_mean[i] + m * mean[i];
            state.running_var[i] = (T(1) - m) * state.running_var[i] + m * var[i] * unbias;
        }
    } else {
        for (int64_t ch = 0; ch < c; ++ch) {
            auto i = static_cast<size_t>(ch);
            mean[i] = state.running_mean[i];
            inv_std[i] = T(1) / std::sqrt(state.running_var[i] + eps);
        }
    }

    Tensor<T> out(x.shape());
    T* od = out.data();
    const T* gd = gamma.data();
    const T* bd = beta.data();
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ch = 0; ch < c; ++ch) {
            const T* plane = xd + (b * c + ch) * hw;
            T* oplane = od + (b * c + ch) * hw;
            const T mu = mean[static_cast<size_t>(ch)];
            const T is = inv_std[static_cast<size_t>(ch)];
            const T g = gd[ch], bt = bd[ch];
            for (int64_t i = 0; i < hw; ++i) oplane[i] = (plane[i] - mu) * is * g + bt;
        }
    check_finite(out, "batch_norm2d");

    const bool need_dx = x.requires_grad();
    const bool need_dg = gamma.requires_grad();
    const bool need_db = beta.requires_grad();
    record_op(out, {&x, &gamma, &beta},
              [=, xc = x, gc = gamma, bc = beta, oc = out, mean = std::move(mean),
               inv_std = std::move(inv_std)]() mutable {
                  const T* dout = oc.grad().data();
                  const T* xv = xc.data();
                  const T* g = gc.data();
                  const int64_t cnt = n * hw;
                  for (int64_t ch = 0; ch < c; ++ch) {
                      const T mu = mean[static_cast<size_t>(ch)];
                      const T is = inv_std[static_cast<size_t>(ch)];
                      T sum_do = T(0), sum_do_xhat = T(0);
                      for (int64_t b = 0; b < n; ++b) {
                          const T* dop = dout + (b * c + ch) * hw;
                          const T* xp = xv + (b * c + ch) * hw;
                          for (int64_t i = 0; i < hw; ++i) {
                              sum_do += dop[i];
                              sum_do_xhat += dop[i] * (xp[i] - mu) * is;
                          }
                      }
                      if (need_dg) gc.grad()[static_cast<size_t>(ch)] += sum_do_xhat;
                      if (need_db) bc.grad()[static_cast<size_t>(ch)] += sum_do;
                      if (need_dx) {
                          T* dx = xc.grad().data();
                          if (mode == Mode::Train) {
                              const T k1 = sum_do / static_cast<T>(cnt);
                              const T k2 = sum_do_xhat / static_cast<T>(cnt);
                              for (int64_t b = 0; b < n; ++b) {
                                  const T* dop = dout + (b * c + ch) * hw;
                                  const T* xp = xv + (b * c + ch) * hw;
                                  T* dxp = dx + (b * c + ch) * hw;
                                  for (int64_t i = 0; i < hw; ++i) {
                                      const T xhat = (xp[i] - mu) * is;
                                      dxp[i] += g[ch] * is * (dop[i] - k1 - xhat * k2);
                                  }
                              }
                          } else {
                              for (int64_t b = 0; b < n; ++b) {
                                  const T* dop = dout + (b * c + ch) * hw;
                                  T* dxp = dx + (b * c + ch) * hw;
                                  for (int64_t i = 0; i < hw; ++i) dxp[i] += dop[i] * g[ch] * is;
                              }
                          }
                      }
                  }
              });
    return out;
}

namespace {

// Broadcast iteration state: walks a's index space while tracking the flat
// offset into b (stride 0 on broadcast dimensions).
struct BcastIter {
    Shape a_shape;
    std::vector<int64_t> b_strides;

    static BcastIter make(const Shape& a, const Shape& b, const char* op) {
        if (a.size() != b.size())
            throw ShapeError(std::string(op) + ": rank mismatch between " + shape_str(a) +
                             " and " + shape_str(b));
        BcastIter it;
        it.a_shape = a;
        it.b_strides.resize(a.size());
        int64_t stride = 1;
        for (size_t i = a.size(); i-- > 0;) {
            if (b[i] == a[i]) {
                it.b_strides[i] = stride;
                stride *= b[i];
            } else if (b[i] == 1) {
                it.b_strides[i] = 0;
            } else {
                throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(b) +
                                 " onto " + shape_str(a));
            }
        }
        return it;
    }

    // Calls fn(a_flat, b_flat) for every position of a, in row-major order.
    template <typename F>
    void for_each(F&& fn) const {
        const size_t rank = a_shape.size();
        const int64_t total = atnf::numel(a_shape);
        std::vector<int64_t> idx(rank, 0);
        int64_t boff = 0;
        for (int64_t ai = 0; ai < total; ++ai) {
            fn(ai, boff);
            for (size_t d = rank; d-- > 0;) {
                ++idx[d];
                boff += b_strides[d];
                if (idx[d] < a_shape[d]) break;
                boff -= b_strides[d] * a_shape[d];
                idx[d] = 0;
            }
        }
    }
};

}  // namespace

template <typename T>
Tensor<T> broadcast_binary(const Tensor<T>& a, const Tensor<T>& b, BinOp op) {
    const bool same = a.shape() == b.shape();
    Tensor<T> out(a.shape());
    const T* ad = a.data();
    const T* bd = b.data();
    T* od = out.data();
    const int64_t n = a.numel();
    if (same) {
        if (op == BinOp::Add)
            for (int64_t i = 0; i < n; ++i) od[i] = ad[i] + bd[i];
        else
            for (int64_t i = 0; i < n; ++i) od[i] = ad[i] * bd[i];
    } else {
        BcastIter it = BcastIter::make(a.shape(), b.shape(), "broadcast_binary");
        if (op == BinOp::Add)
            it.for_each([&](int64_t ai, int64_t bi) { od[ai] = ad[ai] + bd[bi]; });
        else
            it.for_each([&](int64_t ai, int64_t bi) { od[ai] = ad[ai] * bd[bi]; });
    }
    check_finite(out, "broadcast_binary");

    const bool need_da = a.requires_grad();
    const bool need_db = b.requires_grad();
    record_op(out, {&a, &b}, [=, ac = a, bc = b, oc = out]() mutable {
        const T* dout = oc.grad().data();
        const int64_t n = ac.numel();
        if (same) {
            if (op == BinOp::Add) {
                if (need_da) {
                    T* da = ac.grad().data();
                    for (int64_t i = 0; i < n; ++i) da[i] += dout[i];
                }
                if (need_db) {
                    T* db = bc.grad().data();
                    for (int64_t i = 0; i < n; ++i) db[i] += dout[i];
                }
            } else {
                if (need_da) {
                    T* da = ac.grad().data();
                    const T* bv = bc.data();
                    for (int64_t i = 0; i < n; ++i) da[i] += dout[i] * bv[i];
                }
                if (need_db) {
                    T* db = bc.grad().data();
                    const T* av = ac.data();
                    for (int64_t i = 0; i < n; ++i) db[i] += dout[i] * av[i];
                }
            }
            return;
        }
        BcastIter it = BcastIter::make(ac.shape(), bc.shape(), "broadcast_binary");
        if (op == BinOp::Add) {
            if (need_da) {
                T* da = ac.grad().data();
                for (int64_t i = 0; i < n; ++i) da[i] += dout[i];
            }
            if (need_db) {
                T* db = bc.grad().data();
                it.for_each([&](int64_t ai, int64_t bi) { db[bi] += dout[ai]; });
            }
        } else {
            if (need_da) {
                T* da = ac.grad().data();
                const T* bv = bc.data();
                it.for_each([&](int64_t ai, int64_t bi) { da[ai] += dout[ai] * bv[bi]; });
            }
            if (need_db) {
                T* db = bc.grad().data();
                const T* av = ac.data();
                it.for_each([&](int64_t ai, int64_t bi) { db[bi] += dout[ai] * av[ai]; });
            }
        }
    });
    return out;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> xs) {
    if (xs.empty()) throw ShapeError("concat_channels: no inputs");
    for (const auto& x : xs) require_4d(x, "concat_channels");
    const int64_t n = xs[0].dim(0), h = xs[0].dim(2), w = xs[0].dim(3);
    int64_t ctotal = 0;
    for (const auto& x : xs) {
        if (x.dim(0) != n || x.dim(2) != h || x.dim(3) != w)
            throw ShapeError("concat_channels: inputs disagree on N/H/W");
        ctotal += x.dim(1);
    }
    Tensor<T> out({n, ctotal, h, w});
    const int64_t hw = h * w;
    T* od = out.data();
    for (int64_t b = 0; b < n; ++b) {
        int64_t coff = 0;
        for (const auto& x : xs) {
            const int64_t ci = x.dim(1);
            std::memcpy(od + (b * ctotal + coff) * hw, x.data() + b * ci * hw,
                        static_cast<size_t>(ci * hw) * sizeof(T));
            coff += ci;
        }
    }
    check_finite(out, "concat_channels");

    bool any = false;
    for (const auto& x : xs) any = any || x.requires_grad();
    GradTape<T>* tape = GradTape<T>::active();
    if (tape && any) {
        out.set_requires_grad(true);
        out.set_tape(tape);
        std::vector<Tensor<T>> inputs(xs.begin(), xs.end());
        tape->record([inputs, oc = out, n, ctotal, hw]() mutable {
            const T* dout = oc.grad().data();
            for (int64_t b = 0; b < n; ++b) {
                int64_t coff = 0;
                for (auto& x : inputs) {
                    const int64_t ci = x.dim(1);
                    if (x.requires_grad()) {
                        T* dx = x.grad().data() + b * ci * hw;
                        const T* src = dout + (b * ctotal + coff) * hw;
                        for (int64_t i = 0; i < ci * hw; ++i) dx[i] += src[i];
                    }
                    coff += ci;
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    if (logits.ndim() != 2) throw ShapeError("softmax expects [N,K] logits");
    const int64_t n = logits.dim(0), k = logits.dim(1);
    Tensor<T> out(logits.shape());
    const T* xd = logits.data();
    T* od = out.data();
    for (int64_t i = 0; i < n; ++i) {
        const T* row = xd + i * k;
        T* orow = od + i * k;
        T mx = row[0];
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        T denom = T(0);
        for (int64_t j = 0; j < k; ++j) {
            orow[j] = std::exp(row[j] - mx);
            denom += orow[j];
        }
        for (int64_t j = 0; j < k; ++j) orow[j] /= denom;
    }
    return out;
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw ShapeError("softmax_cross_entropy expects [N,K] logits");
    const int64_t n = logits.dim(0), k = logits.dim(1);
    if (static_cast<int64_t>(labels.size()) != n)
        throw ShapeError("softmax_cross_entropy: label count " + std::to_string(labels.size()) +
                         " does not match batch size " + std::to_string(n));
    for (int lab : labels)
        if (lab < 0 || lab >= k)
            throw ShapeError("softmax_cross_entropy: label " + std::to_string(lab) +
                             " out of range [0," + std::to_string(k) + ")");

    Tensor<T> probs = softmax(logits);
    const T* xd = logits.data();
    T total = T(0);
    for (int64_t i = 0; i < n; ++i) {
        const T* row = xd + i * k;
        T mx = row[0];
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        T lse = T(0);
        for (int64_t j = 0; j < k; ++j) lse += std::exp(row[j] - mx);
        lse = std::log(lse) + mx;
        total += lse - row[labels[static_cast<size_t>(i)]];
    }
    Tensor<T> loss({1});
    loss[0] = total / static_cast<T>(n);
    check_finite(loss, "softmax_cross_entropy");

    if (logits.requires_grad()) {
        record_op(loss, {&logits}, [xc = logits, lc = loss, probs, labels, n, k]() mutable {
            const T g = lc.grad()[0] / static_cast<T>(n);
            T* dx = xc.grad().data();
            const T* p = probs.data();
            for (int64_t i = 0; i < n; ++i) {
                const int lab = labels[static_cast<size_t>(i)];
                for (int64_t j = 0; j < k; ++j) {
                    T v = p[i * k + j];
                    if (j == lab) v -= T(1);
                    dx[i * k + j] += g * v;
                }
            }
        });
    }
    return loss;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    Tensor<T> out({1});
    T acc = T(0);
    const T* xd = x.data();
    for (int64_t i = 0; i < x.numel(); ++i) acc += xd[i];
    out[0] = acc;
    check_finite(out, "sum");
    if (x.requires_grad()) {
        record_op(out, {&x}, [xc = x, oc = out]() mutable {
            const T g = oc.grad()[0];
            T* dx = xc.grad().data();
            for (int64_t i = 0; i < xc.numel(); ++i) dx[i] += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
    Tensor<T> out(x.shape());
    const T* xd = x.data();
    T* od = out.data();
    for (int64_t i = 0; i < x.numel(); ++i) od[i] = xd[i] * factor;
    check_finite(out, "scale");
    if (x.requires_grad()) {
        record_op(out, {&x}, [xc = x, oc = out, factor]() mutable {
            const T* dout = oc.grad().data();
            T* dx = xc.grad().data();
            for (int64_t i = 0; i < xc.numel(); ++i) dx[i] += dout[i] * factor;
        });
    }
    return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape) {
    Tensor<T> out = x.view_copy(std::move(new_shape));
    out.set_requires_grad(false);
    out.set_tape(nullptr);
    if (x.requires_grad()) {
        record_op(out, {&x}, [xc = x, oc = out]() mutable {
            const T* dout = oc.grad().data();
            T* dx = xc.grad().data();
            for (int64_t i = 0; i < xc.numel(); ++i) dx[i] += dout[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& x) {
    if (x.ndim() < 2) throw ShapeError("flatten expects at least 2 dims");
    int64_t rest = 1;
    for (size_t i = 1; i < x.ndim(); ++i) rest *= x.dim(i);
    return reshape(x, {x.dim(0), rest});
}

// ---------------------------------------------------------------------------
// explicit instantiations

#define ATNF_INSTANTIATE_OPS(T)                                                              \
    template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&,                         \
                                 const std::optional<Tensor<T>>&, int64_t, int64_t);         \
    template Tensor<T> depthwise_conv2d<T>(const Tensor<T>&, const Tensor<T>&,               \
                                           const std::optional<Tensor<T>>&, int64_t,         \
                                           int64_t);                                         \
    template Tensor<T> max_pool2d<T>(const Tensor<T>&, int64_t, int64_t);                    \
    template Tensor<T> avg_pool2d<T>(const Tensor<T>&, int64_t, int64_t, int64_t);           \
    template Tensor<T> global_spatial_pool<T>(const Tensor<T>&, PoolMode);                   \
    template Tensor<T> channel_pool<T>(const Tensor<T>&, PoolMode);                          \
    template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
    template Tensor<T> activation<T>(const Tensor<T>&, ActKind);                             \
    template Tensor<T> batch_norm2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                       BatchNormState<T>&, Mode);                            \
    template Tensor<T> broadcast_binary<T>(const Tensor<T>&, const Tensor<T>&, BinOp);       \
    template Tensor<T> concat_channels<T>(std::span<const Tensor<T>>);                       \
    template Tensor<T> softmax<T>(const Tensor<T>&);                                         \
    template Tensor<T> softmax_cross_entropy<T>(const Tensor<T>&, const std::vector<int>&);  \
    template Tensor<T> sum<T>(const Tensor<T>&);                                             \
    template Tensor<T> scale<T>(const Tensor<T>&, T);                                        \
    template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                  \
    template Tensor<T> flatten<T>(const Tensor<T>&);

ATNF_INSTANTIATE_OPS(float)
ATNF_INSTANTIATE_OPS(double)

#undef ATNF_INSTANTIATE_OPS

}  // namespace atnf
