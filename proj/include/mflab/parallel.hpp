#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace mflab {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Splits [0, total) into fixed-size chunks and maps `fn(begin, end, chunk_index)`
/// over them on `threads` workers. Chunk boundaries depend only on
/// (total, chunk_size), never on the worker count, and each chunk's result
/// is stored at its own index — so any later in-order reduction is
/// deterministic regardless of scheduling.
template <typename Summary, typename Fn>
std::vector<Summary> parallel_chunks(std::uint64_t total, std::uint64_t chunk_size,
                                     int threads, Fn&& fn) {
    const std::uint64_t nchunks =
        chunk_size == 0 ? 0 : (total + chunk_size - 1) / chunk_size;
    std::vector<Summary> out(nchunks);
    if (nchunks == 0) return out;

    const int nthreads = std::min<std::uint64_t>(resolve_threads(threads), nchunks);
    if (nthreads <= 1) {
        for (std::uint64_t c = 0; c < nchunks; ++c) {
            const std::uint64_t lo = c * chunk_size;
            const std::uint64_t hi = std::min(total, lo + chunk_size);
            out[c] = fn(lo, hi, c);
        }
        return out;
    }

    std::atomic<std::uint64_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::uint64_t c = next.fetch_add(1, std::memory_order_relaxed);
            if (c >= nchunks) return;
            const std::uint64_t lo = c * chunk_size;
            const std::uint64_t hi = std::min(total, lo + chunk_size);
            out[c] = fn(lo, hi, c);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return out;
}

}  // namespace mflab
