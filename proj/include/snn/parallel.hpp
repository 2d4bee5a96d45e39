#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace snn {

/// Thread count from SNN_NLM_THREADS, else hardware concurrency (at least 1).
inline int default_threads() {
    if (const char *env = std::getenv("SNN_NLM_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1)
                return n;
        } catch (const std::exception &) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/**
 * Runs fn(chunk) for every chunk in [0, n_chunks) on up to `threads` workers.
 *
 * Chunks are claimed dynamically, so callers must make each chunk's output
 * independent of which worker ran it; combining results in chunk order then
 * gives thread-count independent output.
 */
template <typename Fn>
void parallel_chunks(std::size_t n_chunks, int threads, Fn &&fn) {
    threads = std::max(1, std::min<int>(threads, int(std::min<std::size_t>(n_chunks, 1u << 16))));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n_chunks; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_chunks)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next = n_chunks;
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(std::size_t(threads - 1));
    for (int t = 1; t < threads; ++t)
        pool.emplace_back(worker);
    worker();
    pool.clear();
    if (error)
        std::rethrow_exception(error);
}

/// SplitMix64 finalizer; derives independent RNG stream seeds from (seed, stream).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace snn
