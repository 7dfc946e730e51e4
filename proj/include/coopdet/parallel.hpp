// parallel.hpp: order-preserving parallel map over an index range

#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <algorithm>
#include <thread>
#include <type_traits>
#include <vector>

namespace coopdet {

// Worker count used by parallel_map; 1 (the default) runs inline.
void set_thread_count(unsigned n);
unsigned thread_count();

template <class Fn>
auto parallel_map(std::size_t n, Fn&& fn) -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
    using T = std::invoke_result_t<Fn&, std::size_t>;
    const unsigned workers = std::min<std::size_t>(thread_count(), n);
    if (workers <= 1) {
        std::vector<T> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(fn(i));
        return out;
    }

    std::vector<std::optional<T>> slots(n);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            // strided assignment keeps the partition deterministic
            for (std::size_t i = w; i < n; i += workers) {
                try {
                    slots[i].emplace(fn(i));
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<T> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

}  // namespace coopdet
