#pragma once

#include <cstdint>

namespace vwa {

// Per-run cost counters. A counter is activated on the current thread with a
// CounterScope; tensor ops then accumulate multiply-accumulate counts into it
// and the attention layer records activation element counts at its labelled
// instrumentation points. Scopes nest; concurrent runs on different threads
// each own their counter.
//
// Accounting rules (fixed conventions of this project):
//   - 1 MAC = one multiply-accumulate. Only matmul and conv2d record MACs;
//     bias adds, softmax, scaling and pooling record none.
//   - MACs are split between the Linear and Attention categories by the
//     category active at the time of the op (default Linear).
//   - mem_linear_elems sums, per attention pass: the query projection output,
//     the key/value context representation (counted once), the attention
//     weighted sum, the out projection output, and — for post-scaling
//     strategies only — the raw unfolded context.
//   - mem_attn_elems counts attention-matrix entries as windows * nq * nk,
//     once across heads.

enum class CostCategory { Linear, Attention };

struct CostCounter {
    std::uint64_t macs_linear = 0;
    std::uint64_t macs_attention = 0;
    std::uint64_t mem_linear_elems = 0;
    std::uint64_t mem_attn_elems = 0;

    std::uint64_t macs_total() const { return macs_linear + macs_attention; }
    void reset() { *this = CostCounter{}; }
};

namespace detail {

struct CounterState {
    CostCounter* counter = nullptr;
    CostCategory category = CostCategory::Linear;
};

inline CounterState& counter_state() {
    thread_local CounterState state;
    return state;
}

inline void add_macs(std::uint64_t n) {
    CounterState& s = counter_state();
    if (!s.counter) return;
    if (s.category == CostCategory::Attention)
        s.counter->macs_attention += n;
    else
        s.counter->macs_linear += n;
}

inline void add_mem_linear(std::uint64_t elems) {
    CounterState& s = counter_state();
    if (s.counter) s.counter->mem_linear_elems += elems;
}

inline void add_mem_attn(std::uint64_t elems) {
    CounterState& s = counter_state();
    if (s.counter) s.counter->mem_attn_elems += elems;
}

}  // namespace detail

// Activates a counter on this thread for the scope's lifetime.
class CounterScope {
public:
    explicit CounterScope(CostCounter& counter) : saved_(detail::counter_state()) {
        detail::counter_state() = {&counter, CostCategory::Linear};
    }
    ~CounterScope() { detail::counter_state() = saved_; }
    CounterScope(const CounterScope&) = delete;
    CounterScope& operator=(const CounterScope&) = delete;

private:
    detail::CounterState saved_;
};

// Switches the MAC category within an active counter scope.
class CategoryScope {
public:
    explicit CategoryScope(CostCategory cat) : saved_(detail::counter_state().category) {
        detail::counter_state().category = cat;
    }
    ~CategoryScope() { detail::counter_state().category = saved_; }
    CategoryScope(const CategoryScope&) = delete;
    CategoryScope& operator=(const CategoryScope&) = delete;

private:
    CostCategory saved_;
};

}  // namespace vwa
