#pragma once

#include <functional>

#include "atnf/tensor.hpp"

namespace atnf {

/// Reverse-mode gradient tape.
///
/// Ops executed while a tape is active append one node each, in execution
/// order. backward() replays the nodes in exact reverse order; every closure
/// accumulates (never overwrites) into input gradients, so shared parameters
/// collect contributions from every path. A tape is consumed by backward().
///
/// Construction activates the tape for the current thread; tapes nest as a
/// stack. Single-threaded use per graph is part of the execution contract.
template <typename T>
class GradTape {
public:
    GradTape() : parent_(active_slot()) { active_slot() = this; }

    ~GradTape() {
        if (active_slot() == this) active_slot() = parent_;
    }

    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;

    static GradTape* active() { return active_slot(); }

    void record(std::function<void()> backward_fn) {
        nodes_.push_back(std::move(backward_fn));
    }

    size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    /// Seeds d(loss)/d(loss) = 1 and replays the tape backwards.
    void backward(Tensor<T>& loss) {
        if (consumed_) throw UsageError("backward on an already-consumed tape");
        if (loss.numel() != 1)
            throw UsageError("backward requires a scalar loss, got shape " +
                             shape_str(loss.shape()));
        if (active_slot() == this) active_slot() = parent_;
        loss.grad()[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
        nodes_.clear();
        consumed_ = true;
    }

private:
    static GradTape*& active_slot() {
        static thread_local GradTape* tape = nullptr;
        return tape;
    }

    std::vector<std::function<void()>> nodes_;
    GradTape* parent_ = nullptr;
    bool consumed_ = false;
};

/// Runs backward from a loss tensor through the tape that produced it.
template <typename T>
void backward(Tensor<T>& loss) {
    GradTape<T>* tape = loss.tape();
    if (!tape) throw UsageError("backward called on a tensor produced without an active tape");
    tape->backward(loss);
}

/// Collects a hash of every data-dependent branch decision (ReLU sign masks,
/// pooling argmax picks) taken while active. Finite-difference checking
/// compares the signatures of the two perturbed forward passes and skips
/// coordinates whose perturbation crossed a kink.
class KinkMonitor {
public:
    KinkMonitor() : parent_(slot()) { slot() = this; }
    ~KinkMonitor() {
        if (slot() == this) slot() = parent_;
    }

    KinkMonitor(const KinkMonitor&) = delete;
    KinkMonitor& operator=(const KinkMonitor&) = delete;

    static KinkMonitor* active() { return slot(); }

    void feed(uint64_t v) {
        sig_ = (sig_ ^ v) * 0x100000001B3ull;  // FNV-1a step
    }

    uint64_t signature() const { return sig_; }

private:
    static KinkMonitor*& slot() {
        static thread_local KinkMonitor* m = nullptr;
        return m;
    }

    uint64_t sig_ = 0xCBF29CE484222325ull;
    KinkMonitor* parent_ = nullptr;
};

}  // namespace atnf
