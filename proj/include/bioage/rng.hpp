#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <thread>
#include <vector>

namespace bioage {

// Path i draws from its own engine, so results do not depend on how paths are split across threads.
inline std::mt19937_64 path_stream(std::uint64_t seed, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      0x62696fu};
    return std::mt19937_64(seq);
}

inline double pairwise_sum(std::span<const double> x)
{
    if (x.size() <= 16) {
        double s = 0.0;
        for (double v : x)
            s += v;
        return s;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

inline unsigned default_workers()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

// out[i] = fn(i) for i < n, computed in contiguous chunks on `workers` threads.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, unsigned workers, Fn&& fn)
{
    std::vector<T> out(n);
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = fn(i);
        return out;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi)
            break;
        pool.emplace_back([&, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i)
                out[i] = fn(i);
        });
    }
    for (auto& th : pool)
        th.join();
    return out;
}

} // namespace bioage
