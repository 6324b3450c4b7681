#pragma once

#include "polydiff/core/types.hpp"

#include <atomic>
#include <cstdint>
#include <functional>

namespace polydiff::core {

/// Process-wide probes read by tests and benchmarks.
struct Instrumentation {
    std::atomic<std::uint64_t> self_attention_calls{0};
    std::atomic<std::int64_t> self_attention_min_tokens{INT64_MAX};
    std::atomic<std::int64_t> self_attention_max_tokens{0};
    std::atomic<std::uint64_t> denoiser_calls{0};

    /// Called with every block of attention weights (rows are queries) on the
    /// non-streaming routes. Unset in production.
    std::function<void(const Mat&)> attention_weights_hook;

    void record_self_attention(Index tokens);
    void reset();
};

Instrumentation& instrumentation();

}  // namespace polydiff::core
