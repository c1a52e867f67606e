#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cpreg {

/* Run fn(replica_index) for indices 0..replicas-1 on a bounded pool. Workers
   pull indices from a shared counter; results must go into per-replica slots
   so the merged output is independent of scheduling and thread count. */
template <class Fn>
void parallel_replicas(std::size_t replicas, unsigned threads, Fn&& fn) {
    if (threads <= 1 || replicas <= 1) {
        for (std::size_t r = 0; r < replicas; ++r) fn(r);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= replicas) return;
            try {
                fn(r);
            } catch (...) {
                {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
                next.store(replicas);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned spawn = threads - 1;
    pool.reserve(spawn);
    for (unsigned i = 0; i < spawn; ++i) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace cpreg
