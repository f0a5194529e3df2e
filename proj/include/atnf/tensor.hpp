#pragma once

#include <cmath>
#include <memory>

#include "atnf/common.hpp"
#include "atnf/rng.hpp"

namespace atnf {

template <typename T>
class GradTape;

/// Dense N-dimensional tensor.
///
/// A Tensor is a cheap handle onto shared storage: copying a Tensor aliases
/// the same data, which is what lets recorded backward closures and optimizer
/// state refer to the live parameter buffers. Feature maps use (N, C, H, W)
/// layout, row-major.
template <typename T>
class Tensor {
public:
    struct Impl {
        Shape shape;
        std::vector<T> data;
        std::vector<T> grad;  // empty until touched by backward
        bool requires_grad = false;
        GradTape<T>* tape = nullptr;  // tape that recorded the producing op
    };

    Tensor() : impl_(std::make_shared<Impl>()) {}

    explicit Tensor(Shape shape, T fill = T(0)) : impl_(std::make_shared<Impl>()) {
        impl_->shape = std::move(shape);
        impl_->data.assign(static_cast<size_t>(atnf::numel(impl_->shape)), fill);
    }

    Tensor(Shape shape, std::vector<T> data) : impl_(std::make_shared<Impl>()) {
        if (atnf::numel(shape) != static_cast<int64_t>(data.size()))
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        impl_->shape = std::move(shape);
        impl_->data = std::move(data);
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
    static Tensor full(Shape shape, T value) { return Tensor(std::move(shape), value); }

    static Tensor randn(Shape shape, Rng& rng, T stddev = T(1)) {
        Tensor t(std::move(shape));
        for (auto& v : t.impl_->data) v = static_cast<T>(rng.normal()) * stddev;
        return t;
    }

    /// Kaiming-uniform init: U(-b, b) with b = sqrt(6 / fan_in).
    static Tensor kaiming_uniform(Shape shape, int64_t fan_in, Rng& rng) {
        Tensor t(std::move(shape));
        double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (auto& v : t.impl_->data) v = static_cast<T>(rng.uniform(-bound, bound));
        return t;
    }

    const Shape& shape() const { return impl_->shape; }
    int64_t dim(size_t i) const { return impl_->shape[i]; }
    size_t ndim() const { return impl_->shape.size(); }
    int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

    T* data() { return impl_->data.data(); }
    const T* data() const { return impl_->data.data(); }
    std::vector<T>& values() { return impl_->data; }
    const std::vector<T>& values() const { return impl_->data; }

    T& operator[](size_t i) { return impl_->data[i]; }
    const T& operator[](size_t i) const { return impl_->data[i]; }

    /// Row-major element access for 4-d feature maps; 3-d [C,H,W] images are
    /// addressed with n == 0.
    T& at(int64_t n, int64_t c, int64_t h, int64_t w) {
        const Shape& s = impl_->shape;
        if (s.size() == 3) return impl_->data[static_cast<size_t>((c * s[1] + h) * s[2] + w)];
        return impl_->data[static_cast<size_t>(((n * s[1] + c) * s[2] + h) * s[3] + w)];
    }
    T at(int64_t n, int64_t c, int64_t h, int64_t w) const {
        return const_cast<Tensor*>(this)->at(n, c, h, w);
    }

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool rg) {
        impl_->requires_grad = rg;
        return *this;
    }

    bool has_grad() const { return !impl_->grad.empty(); }

    /// Gradient accumulator, allocated zero-filled on first use.
    std::vector<T>& grad() {
        if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
        return impl_->grad;
    }
    const std::vector<T>& grad() const {
        return const_cast<Tensor*>(this)->grad();
    }

    void zero_grad() {
        if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
    }

    GradTape<T>* tape() const { return impl_->tape; }
    void set_tape(GradTape<T>* tape) { impl_->tape = tape; }

    /// Deep copy (new storage, no grad, no tape link).
    Tensor clone() const {
        Tensor t;
        t.impl_->shape = impl_->shape;
        t.impl_->data = impl_->data;
        t.impl_->requires_grad = impl_->requires_grad;
        return t;
    }

    /// Same storage viewed under a different shape with equal element count.
    Tensor view_copy(Shape new_shape) const {
        if (atnf::numel(new_shape) != numel())
            throw ShapeError("cannot view " + shape_str(impl_->shape) + " as " +
                             shape_str(new_shape));
        Tensor t = clone();
        t.impl_->shape = std::move(new_shape);
        return t;
    }

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

    std::shared_ptr<Impl> impl() const { return impl_; }

private:
    std::shared_ptr<Impl> impl_;
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
    // x*0 is NaN exactly when x is NaN or +-Inf, and the loop vectorizes
    T acc = T(0);
    for (const T& v : t.values()) acc += v * T(0);
    return acc == T(0);
}

}  // namespace atnf
